use ads_panel::sim::rep_seed;
use ads_panel::{
    paper_table, run_cell, run_suite, AdsConfig, DgpConfig, DgpKind, EstimatorKind, PaperTable,
    SimConfig,
};

#[test]
fn noiseless_least_squares_has_zero_error() {
    let cell = DgpConfig::new(DgpKind::Alpha, 4, 12, 3).with_noise_sd(0.0);
    let report = run_cell(&cell, &[EstimatorKind::Ols], &AdsConfig::ols(), 5, 1).unwrap();
    assert!(report.rows[0].mse < 1e-12, "{}", report.rows[0].mse);
}

#[test]
fn runs_are_reproducible() {
    let cell = DgpConfig::new(DgpKind::SparseCorrelated, 5, 10, 8)
        .with_s(3)
        .with_cor(0.5);
    let est = [EstimatorKind::Lasso, EstimatorKind::AdsLasso];
    let a = run_cell(&cell, &est, &AdsConfig::lasso(), 1, 17).unwrap();
    let b = run_cell(&cell, &est, &AdsConfig::lasso(), 1, 17).unwrap();
    assert_eq!(a, b);
    let c = run_cell(&cell, &est, &AdsConfig::lasso(), 1, 18).unwrap();
    assert_ne!(a.rows[0].mse, c.rows[0].mse);
}

#[test]
fn repetition_seeds_are_distinct() {
    let cell = DgpConfig::new(DgpKind::Alpha, 2, 5, 1);
    let mut seeds: Vec<u64> = (0..1000).map(|r| rep_seed(3, &cell, r)).collect();
    seeds.sort();
    seeds.dedup();
    assert_eq!(seeds.len(), 1000);
    let other = DgpConfig::new(DgpKind::Alpha, 3, 5, 1);
    assert_ne!(rep_seed(3, &cell, 0), rep_seed(3, &other, 0));
}

#[test]
fn standard_error_shrinks_with_repetitions() {
    let cell = DgpConfig::new(DgpKind::Alpha, 5, 10, 3);
    let est = [EstimatorKind::Ols];
    let few = run_cell(&cell, &est, &AdsConfig::ols(), 100, 2).unwrap();
    let many = run_cell(&cell, &est, &AdsConfig::ols(), 400, 2).unwrap();
    let ratio = many.rows[0].mc_stderr / few.rows[0].mc_stderr;
    assert!(ratio > 0.3 && ratio < 0.75, "stderr ratio {ratio}");
}

#[test]
fn thread_pool_size_does_not_change_results() {
    let cell = DgpConfig::new(DgpKind::Correlated, 6, 10, 3).with_cor(0.7);
    let est = [EstimatorKind::Naive, EstimatorKind::Ols, EstimatorKind::AdsOls];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_cell(&cell, &est, &AdsConfig::ols(), 20, 4).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn suites_emit_one_row_per_cell_and_estimator() {
    let mut cfg = paper_table(PaperTable::LinearS1Cor);
    assert_eq!(cfg.cells.len(), 25);
    cfg.cells.truncate(3);
    cfg.reps = 2;
    let report = run_suite(&cfg).unwrap();
    assert_eq!(report.rows.len(), 6);
    assert!(report.failures.is_empty());

    let empty = SimConfig {
        cells: Vec::new(),
        ..cfg
    };
    assert!(run_suite(&empty).unwrap().rows.is_empty());
}

#[test]
fn benchmark_grids_have_the_published_sizes() {
    let sizes: Vec<usize> = PaperTable::ALL
        .iter()
        .map(|t| paper_table(*t).cells.len())
        .collect();
    // linear-s1-iid: (3 + 2) * 2 cells per cor, 4 cors; linear-s1-cor: 5 * 5;
    // linear-s2: 2 * 13; lasso-s1: (4 + 3) * 9; lasso-s2: 16 + 13.
    assert_eq!(sizes, vec![40, 25, 26, 63, 29]);
}
