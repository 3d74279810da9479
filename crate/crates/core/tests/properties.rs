use ads_panel::ads::{ads_fit, weight_matrix_with_gamma};
use ads_panel::estimators::kkt_violation;
use ads_panel::{
    build_weight_matrix, gen_panel, mse_against, predict, weighted_lasso, weighted_ols, AdsConfig,
    CoefficientSet, DgpConfig, DgpKind, GammaRule, LassoConfig, PanelDataset, WeightedSample,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn sample_from_seed(seed: u64, rows: usize, cols: usize) -> WeightedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(rows, cols, |_, j| if j == 0 { 1.0 } else { normal(&mut rng) });
    let y = DVector::from_fn(rows, |_, _| 2.0 * normal(&mut rng));
    let w = DVector::from_fn(rows, |_, _| rng.random_range(0.05..3.0));
    WeightedSample::new(x, y, w).unwrap()
}

fn panel_from_seed(seed: u64, n: usize, t: usize, p: usize) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut designs = Vec::new();
    let mut responses = Vec::new();
    for _ in 0..n {
        let x = DMatrix::from_fn(t, p + 1, |_, j| if j == 0 { 1.0 } else { normal(&mut rng) });
        let b = DVector::from_fn(p + 1, |_, _| normal(&mut rng));
        let e = DVector::from_fn(t, |_, _| normal(&mut rng));
        responses.push(&x * b + e);
        designs.push(x);
    }
    PanelDataset::new(designs, responses).unwrap()
}

fn coefs_from_seed(seed: u64, n: usize, dim: usize) -> CoefficientSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CoefficientSet::new(DMatrix::from_fn(n, dim, |_, _| normal(&mut rng))).unwrap()
}

fn scaled(sample: &WeightedSample, c: f64) -> WeightedSample {
    WeightedSample::new(sample.rows().clone(), sample.targets().clone(), sample.weights() * c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mse_ignores_individual_order(seed in any::<u64>(), n in 2usize..6, t in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let preds: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(t, |_, _| normal(&mut rng))).collect();
        let targets: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(t, |_, _| normal(&mut rng))).collect();
        let base = mse_against(&preds, &targets).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.rotate_left(seed as usize % n);
        let p2: Vec<_> = order.iter().map(|&i| preds[i].clone()).collect();
        let t2: Vec<_> = order.iter().map(|&i| targets[i].clone()).collect();
        prop_assert!((mse_against(&p2, &t2).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn predictions_are_linear_in_coefficients(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let data = panel_from_seed(seed, 3, 4, 2);
        let c1 = coefs_from_seed(seed ^ 1, 3, 3);
        let c2 = coefs_from_seed(seed ^ 2, 3, 3);
        let mix = CoefficientSet::new(c1.matrix() * a + c2.matrix() * b).unwrap();
        let (p1, p2, pm) = (predict(&data, &c1).unwrap(), predict(&data, &c2).unwrap(), predict(&data, &mix).unwrap());
        for i in 0..3 {
            let expect = &p1[i] * a + &p2[i] * b;
            prop_assert!((&pm[i] - expect).amax() < 1e-10);
        }
    }

    #[test]
    fn estimators_ignore_a_common_weight_scale(seed in any::<u64>(), c in 0.01f64..100.0, lambda in 0.0f64..0.5) {
        let s = sample_from_seed(seed, 12, 4);
        let s2 = scaled(&s, c);
        prop_assert!((weighted_ols(&s).unwrap() - weighted_ols(&s2).unwrap()).amax() < 1e-8);
        let cfg = LassoConfig::default();
        let l1 = weighted_lasso(&s, &cfg, lambda).unwrap();
        let l2 = weighted_lasso(&s2, &cfg, lambda).unwrap();
        prop_assert!((l1.coefs - l2.coefs).amax() < 1e-6);
    }

    #[test]
    fn coordinate_descent_never_increases_the_objective(
        seed in any::<u64>(), rows in 3usize..20, cols in 2usize..8, lambda in 0.0f64..1.0,
        penalize in any::<bool>(), standardize in any::<bool>(),
    ) {
        let s = sample_from_seed(seed, rows, cols);
        let cfg = LassoConfig { penalize_intercept: penalize, standardize, ..LassoConfig::default() };
        let fit = weighted_lasso(&s, &cfg, lambda).unwrap();
        for pair in fit.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0), "{:?}", fit.objective_trace);
        }
    }

    #[test]
    fn converged_lasso_satisfies_kkt(
        seed in any::<u64>(), rows in 3usize..25, cols in 2usize..8, lambda in 0.0f64..1.0,
        penalize in any::<bool>(),
    ) {
        let s = sample_from_seed(seed, rows, cols);
        let cfg = LassoConfig { penalize_intercept: penalize, ..LassoConfig::default() };
        let fit = weighted_lasso(&s, &cfg, lambda).unwrap();
        if fit.converged {
            prop_assert!(kkt_violation(&s, &fit.coefs, lambda, penalize) < 1e-6);
        }
    }

    #[test]
    fn weight_matrices_are_well_formed(seed in any::<u64>(), n in 2usize..12, delta in 0.01f64..=1.0) {
        let coefs = coefs_from_seed(seed, n, 4);
        let cfg = AdsConfig { delta, ..AdsConfig::ols() };
        let w = build_weight_matrix(&coefs, &cfg).unwrap();
        for i in 0..n {
            prop_assert_eq!(w.get(i, i), 1.0);
            for j in 0..n {
                prop_assert_eq!(w.get(i, j), w.get(j, i));
                if i != j {
                    prop_assert!(w.get(i, j) >= 0.0 && w.get(i, j) <= delta);
                }
            }
        }
    }

    #[test]
    fn weights_shrink_as_gamma_grows(seed in any::<u64>(), g in 0.0f64..5.0, step in 0.0f64..5.0) {
        let coefs = coefs_from_seed(seed, 6, 3);
        let a = weight_matrix_with_gamma(&coefs, 0.5, g).unwrap();
        let b = weight_matrix_with_gamma(&coefs, 0.5, g + step).unwrap();
        prop_assert!(a.matrix().iter().zip(b.matrix().iter()).all(|(x, y)| y <= x));
    }

    #[test]
    fn ads_is_equivariant_to_relabelling(seed in any::<u64>(), shift in 1usize..5) {
        let n = 5;
        let data = panel_from_seed(seed, n, 8, 2);
        let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let permuted = PanelDataset::new(
            order.iter().map(|&i| data.design(i).clone()).collect(),
            order.iter().map(|&i| data.response(i).clone()).collect(),
        ).unwrap();
        for cfg in [AdsConfig::ols(), AdsConfig::lasso()] {
            let a = ads_fit(&data, &cfg).unwrap();
            let b = ads_fit(&permuted, &cfg).unwrap();
            prop_assert!((a.gamma - b.gamma).abs() <= 1e-12 * a.gamma.max(1.0));
            for (k, &i) in order.iter().enumerate() {
                prop_assert!((a.coefs.row(i) - b.coefs.row(k)).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn synthetic_panels_are_reproducible(seed in any::<u64>(), dgp in 1u8..=4) {
        let kind = DgpKind::from_number(dgp).unwrap();
        let mut cfg = DgpConfig::new(kind, 3, 5, 6).with_seed(seed);
        if kind.is_sparse() {
            cfg = cfg.with_s(2);
        }
        if kind.uses_cor() {
            cfg = cfg.with_cor(0.5);
        }
        prop_assert_eq!(gen_panel(&cfg).unwrap(), gen_panel(&cfg).unwrap());
    }
}

#[test]
fn median_heuristic_gives_the_median_pair_half_of_delta() {
    let coefs = coefs_from_seed(99, 7, 3);
    let cfg = AdsConfig {
        gamma: GammaRule::MedianHeuristic,
        ..AdsConfig::ols()
    };
    let w = build_weight_matrix(&coefs, &cfg).unwrap();
    let mut off: Vec<f64> = (0..7)
        .flat_map(|i| (i + 1..7).map(move |j| (i, j)))
        .map(|(i, j)| w.get(i, j))
        .collect();
    off.sort_by(f64::total_cmp);
    // 21 pairs: the median pair is the 11th.
    assert!((off[10] - 0.25).abs() < 1e-12);
}
