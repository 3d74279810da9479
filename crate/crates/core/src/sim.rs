//! Monte Carlo harness: repeat (generate, fit, score out of sample) and
//! aggregate per estimator.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::ads::{ads_fit_from_first_stage, first_stage, naive_fit, AdsConfig};
use crate::dgp::{gen_panel, mix_seed, DgpConfig, DgpKind};
use crate::error::{AdsError, Result};
use crate::estimators::BaseEstimator;
use crate::panel::{evaluate, CellFailure, CoefficientSet, Design, EstimatorKind, MseReport, MseRow};

/// Default repetition count of the published tables.
pub const DEFAULT_REPS: usize = 500;

/// A cell may lose at most this share of repetitions to numerical failures.
pub const MAX_FAILURE_SHARE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Cell definitions; their `seed` fields are ignored.
    pub cells: Vec<DgpConfig>,
    pub estimators: Vec<EstimatorKind>,
    pub ads: AdsConfig,
    pub reps: usize,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(AdsError::Validation("reps must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(AdsError::Validation("no estimators requested".into()));
        }
        for cell in &self.cells {
            cell.validate()?;
        }
        self.ads.validate()
    }
}

/// Stable identifier of a cell, independent of its seed field.
pub fn cell_id(cell: &DgpConfig) -> u64 {
    let mut h = mix_seed(cell.dgp.number() as u64, cell.n as u64, cell.t as u64);
    h = mix_seed(h, cell.p as u64, cell.s.map_or(u64::MAX, |s| s as u64));
    h = mix_seed(h, cell.cor.map_or(u64::MAX, f64::to_bits), cell.design as u64);
    mix_seed(h, cell.noise_sd.to_bits(), cell.alignment as u64)
}

/// Seed of repetition `rep` of `cell`.
pub fn rep_seed(master_seed: u64, cell: &DgpConfig, rep: usize) -> u64 {
    mix_seed(master_seed, cell_id(cell), rep as u64)
}

fn describe(cell: &DgpConfig) -> String {
    let mut s = format!(
        "dgp={} design={} n={} t={} p={}",
        cell.dgp.number(),
        cell.design,
        cell.n,
        cell.t,
        cell.p
    );
    if let Some(sp) = cell.s {
        s.push_str(&format!(" s={sp}"));
    }
    if let Some(c) = cell.cor {
        s.push_str(&format!(" cor={c}"));
    }
    s
}

fn fit_estimators(
    cfg: &DgpConfig,
    estimators: &[EstimatorKind],
    ads: &AdsConfig,
) -> Result<Vec<f64>> {
    let panel = gen_panel(cfg)?;
    let train = &panel.train;
    let ols_cfg = AdsConfig {
        estimator: BaseEstimator::Ols,
        ..ads.clone()
    };
    let lasso_cfg = AdsConfig {
        estimator: BaseEstimator::Lasso,
        ..ads.clone()
    };
    let mut ols_first: Option<(CoefficientSet, bool)> = None;
    let mut lasso_first: Option<(CoefficientSet, bool)> = None;

    let mut out = Vec::with_capacity(estimators.len());
    for &kind in estimators {
        let coefs = match kind {
            EstimatorKind::Naive => naive_fit(train),
            EstimatorKind::Ols | EstimatorKind::AdsOls => {
                if ols_first.is_none() {
                    ols_first = Some(first_stage(train, &ols_cfg)?);
                }
                let (first, ok) = ols_first.clone().expect("set above");
                if kind == EstimatorKind::Ols {
                    first
                } else {
                    ads_fit_from_first_stage(train, first, ok, &ols_cfg)?.coefs
                }
            }
            EstimatorKind::Lasso | EstimatorKind::AdsLasso => {
                if lasso_first.is_none() {
                    lasso_first = Some(first_stage(train, &lasso_cfg)?);
                }
                let (first, ok) = lasso_first.clone().expect("set above");
                if kind == EstimatorKind::Lasso {
                    first
                } else {
                    ads_fit_from_first_stage(train, first, ok, &lasso_cfg)?.coefs
                }
            }
        };
        let mse = evaluate(&panel.test, &coefs)?;
        if !mse.is_finite() {
            return Err(AdsError::Degenerate(format!("{kind}: non-finite test MSE")));
        }
        out.push(mse);
    }
    Ok(out)
}

/// Runs `reps` repetitions of one cell and aggregates per estimator.
///
/// Repetition `r` uses seed `rep_seed(master_seed, cell, r)`, so results do
/// not depend on scheduling. Failed repetitions are excluded from the means;
/// if more than 1% fail the cell is also listed in `failures`.
pub fn run_cell(
    cell: &DgpConfig,
    estimators: &[EstimatorKind],
    ads: &AdsConfig,
    reps: usize,
    master_seed: u64,
) -> Result<MseReport> {
    if reps == 0 {
        return Err(AdsError::Validation("reps must be >= 1".into()));
    }
    if estimators.is_empty() {
        return Err(AdsError::Validation("no estimators requested".into()));
    }
    cell.validate()?;
    ads.validate()?;

    let outcomes: Vec<Result<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let cfg = DgpConfig {
                seed: rep_seed(master_seed, cell, r),
                ..cell.clone()
            };
            fit_estimators(&cfg, estimators, ads)
        })
        .collect();

    let mut per_estimator: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); estimators.len()];
    let mut failed = 0usize;
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(values) => {
                for (acc, v) in per_estimator.iter_mut().zip(values) {
                    acc.push(v);
                }
            }
            Err(e) => {
                failed += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }

    let mut report = MseReport::default();
    if failed as f64 > MAX_FAILURE_SHARE * reps as f64 {
        report.failures.push(CellFailure {
            cell: describe(cell),
            failed_reps: failed,
            total_reps: reps,
            first_error: first_error.unwrap_or_default(),
        });
    }
    for (&estimator, values) in estimators.iter().zip(per_estimator) {
        if values.is_empty() {
            continue;
        }
        let (mse, mc_stderr) = mean_and_stderr(&values);
        report.rows.push(MseRow {
            dgp: cell.dgp.number(),
            design: cell.design,
            n: cell.n,
            t: cell.t,
            p: cell.p,
            s: cell.s,
            cor: cell.cor,
            estimator,
            mse,
            mc_stderr,
            reps: values.len(),
        });
    }
    Ok(report)
}

/// Mean and standard error of the mean (sample sd over sqrt(R)).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Every cell of `cfg` in order. A cell that errors outright is recorded in
/// `failures` and the suite moves on.
pub fn run_suite(cfg: &SimConfig) -> Result<MseReport> {
    run_suite_with(cfg, |_, _| {})
}

/// [`run_suite`] with a callback invoked after each cell.
pub fn run_suite_with<F>(cfg: &SimConfig, mut on_cell: F) -> Result<MseReport>
where
    F: FnMut(&DgpConfig, &MseReport),
{
    if cfg.reps == 0 {
        return Err(AdsError::Validation("reps must be >= 1".into()));
    }
    if cfg.estimators.is_empty() {
        return Err(AdsError::Validation("no estimators requested".into()));
    }
    cfg.ads.validate()?;
    let mut report = MseReport::default();
    for cell in &cfg.cells {
        let part = match run_cell(cell, &cfg.estimators, &cfg.ads, cfg.reps, cfg.master_seed) {
            Ok(part) => part,
            Err(e) => MseReport {
                rows: Vec::new(),
                failures: vec![CellFailure {
                    cell: describe(cell),
                    failed_reps: cfg.reps,
                    total_reps: cfg.reps,
                    first_error: e.to_string(),
                }],
            },
        };
        on_cell(cell, &part);
        report.extend(part);
    }
    Ok(report)
}

/// The published simulation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaperTable {
    LinearS1Iid,
    LinearS1Cor,
    LinearS2,
    LassoS1,
    LassoS2,
}

impl PaperTable {
    pub const ALL: [PaperTable; 5] = [
        PaperTable::LinearS1Iid,
        PaperTable::LinearS1Cor,
        PaperTable::LinearS2,
        PaperTable::LassoS1,
        PaperTable::LassoS2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PaperTable::LinearS1Iid => "linear-s1-iid",
            PaperTable::LinearS1Cor => "linear-s1-cor",
            PaperTable::LinearS2 => "linear-s2",
            PaperTable::LassoS1 => "lasso-s1",
            PaperTable::LassoS2 => "lasso-s2",
        }
    }
}

impl fmt::Display for PaperTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PaperTable {
    type Err = AdsError;

    fn from_str(s: &str) -> Result<Self> {
        PaperTable::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| AdsError::Validation(format!("unknown table `{s}`")))
    }
}

fn correlated(n: usize, t: usize, p: usize, cor: f64, design: Design) -> DgpConfig {
    DgpConfig::new(DgpKind::Correlated, n, t, p)
        .with_cor(cor)
        .with_design(design)
}

/// Cell grid and estimators of a published table, at the default 500
/// repetitions. Blank table cells are not part of the grid.
pub fn paper_table(table: PaperTable) -> SimConfig {
    let mut cells = Vec::new();
    let linear = vec![EstimatorKind::Ols, EstimatorKind::AdsOls];
    let lasso = vec![EstimatorKind::Lasso, EstimatorKind::AdsLasso];
    let estimators = match table {
        PaperTable::LinearS1Iid => {
            let cors = [0.0, 0.3, 0.7, 1.0];
            for (p, blocks) in [
                (5, &[(10, &[2, 10, 50][..]), (20, &[2, 10][..])][..]),
                (10, &[(20, &[2, 10, 50][..]), (50, &[2, 10][..])][..]),
            ] {
                for &(t, ns) in blocks {
                    for &n in ns {
                        for cor in cors {
                            cells.push(correlated(n, t, p, cor, Design::Iid));
                        }
                    }
                }
            }
            linear
        }
        PaperTable::LinearS1Cor => {
            let cors = [0.0, 0.3, 0.5, 0.8, 1.0];
            for n in [2, 10, 50, 100] {
                for cor in cors {
                    cells.push(correlated(n, 10, 5, cor, Design::Toeplitz));
                }
            }
            for cor in cors {
                cells.push(correlated(2, 20, 5, cor, Design::Toeplitz));
            }
            linear
        }
        PaperTable::LinearS2 => {
            for design in [Design::Iid, Design::Toeplitz] {
                for t in [10, 20, 50] {
                    for n in [2, 5, 10, 50] {
                        cells.push(DgpConfig::new(DgpKind::Alpha, n, t, 5).with_design(design));
                    }
                }
                cells.push(DgpConfig::new(DgpKind::Alpha, 2, 100, 5).with_design(design));
            }
            linear
        }
        PaperTable::LassoS1 => {
            for design in [Design::Iid, Design::Toeplitz] {
                let ts: &[usize] = match design {
                    Design::Iid => &[5, 10, 25, 50],
                    Design::Toeplitz => &[10, 25, 50],
                };
                for &t in ts {
                    for n in [10, 50, 100] {
                        for cor in [0.0, 0.5, 1.0] {
                            cells.push(
                                DgpConfig::new(DgpKind::SparseCorrelated, n, t, 15)
                                    .with_s(5)
                                    .with_cor(cor)
                                    .with_design(design),
                            );
                        }
                    }
                }
            }
            lasso
        }
        PaperTable::LassoS2 => {
            let sparse = |n, t, design| {
                DgpConfig::new(DgpKind::SparseAlpha, n, t, 15)
                    .with_s(5)
                    .with_design(design)
            };
            for t in [10, 20, 50, 100] {
                for n in [2, 5, 10, 50] {
                    cells.push(sparse(n, t, Design::Iid));
                }
            }
            for t in [10, 20, 50] {
                for n in [2, 5, 10, 50] {
                    cells.push(sparse(n, t, Design::Toeplitz));
                }
            }
            cells.push(sparse(50, 100, Design::Toeplitz));
            lasso
        }
    };
    let ads = match table {
        PaperTable::LassoS1 | PaperTable::LassoS2 => AdsConfig::lasso(),
        _ => AdsConfig::ols(),
    };
    SimConfig {
        cells,
        estimators,
        ads,
        reps: DEFAULT_REPS,
        master_seed: 0,
    }
}
