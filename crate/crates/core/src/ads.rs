//! The three-step adaptive discrete smoothing driver.
//!
//! 1. Fit every individual on its own `T` observations.
//! 2. Turn the first-stage coefficients into similarity weights
//!    `W(i, j) = delta * exp(-gamma * ||b_i - b_j||^2)` with `W(i, i) = 1`.
//! 3. Re-fit every individual on all `N * T` observations, the rows of
//!    individual `j` weighted by `W(i, j)`.
//!
//! Optionally steps 2 and 3 are repeated from the second-stage coefficients
//! until the weights stop moving.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{AdsError, Result};
use crate::estimators::{
    fit_individual, fit_sample, BaseEstimator, FitOutcome, LassoConfig, WeightedSample,
};
use crate::panel::{CoefficientSet, EstimatorKind, PanelDataset, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    Fixed(f64),
    /// `ln 2 / median pairwise squared distance`: the median pair gets
    /// weight `delta / 2`.
    MedianHeuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdsConfig {
    pub delta: f64,
    pub gamma: GammaRule,
    pub estimator: BaseEstimator,
    pub lasso: LassoConfig,
    pub refine_iterations: usize,
    /// Refinement stops once no weight moves by more than this.
    pub refine_tol: f64,
}

impl Default for AdsConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            gamma: GammaRule::MedianHeuristic,
            estimator: BaseEstimator::Ols,
            lasso: LassoConfig::default(),
            refine_iterations: 0,
            refine_tol: 1e-3,
        }
    }
}

impl AdsConfig {
    pub fn ols() -> Self {
        Self::default()
    }

    pub fn lasso() -> Self {
        Self {
            estimator: BaseEstimator::Lasso,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(AdsError::Validation(format!("delta {} outside (0, 1]", self.delta)));
        }
        if let GammaRule::Fixed(g) = self.gamma {
            if !(g >= 0.0) {
                return Err(AdsError::Validation(format!("gamma {g} must be >= 0")));
            }
        }
        if !(self.refine_tol > 0.0) {
            return Err(AdsError::Validation("refine_tol must be > 0".into()));
        }
        self.lasso.validate()
    }
}

/// Squared Euclidean distance `||a - b||^2`.
pub fn coef_distance(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(AdsError::Dimension(format!(
            "coefficient vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum())
}

fn pairwise_distances(coefs: &CoefficientSet) -> DMatrix<f64> {
    let n = coefs.n_individuals();
    let rows: Vec<DVector<f64>> = (0..n).map(|i| coefs.row(i)).collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (&rows[i] - &rows[j]).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

fn gamma_from_distances(dist: &DMatrix<f64>, rule: GammaRule) -> Result<f64> {
    match rule {
        GammaRule::Fixed(g) => Ok(g),
        GammaRule::MedianHeuristic => {
            let n = dist.nrows();
            if n < 2 {
                return Err(AdsError::Validation(
                    "median heuristic needs at least two individuals".into(),
                ));
            }
            let pairs: Vec<f64> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| dist[(i, j)])
                .collect();
            let m = median(pairs);
            Ok(if m > 0.0 { std::f64::consts::LN_2 / m } else { 0.0 })
        }
    }
}

/// Kernel bandwidth for the given first-stage estimates.
pub fn resolve_gamma(first_stage: &CoefficientSet, cfg: &AdsConfig) -> Result<f64> {
    gamma_from_distances(&pairwise_distances(first_stage), cfg.gamma)
}

fn weights_from_distances(dist: &DMatrix<f64>, delta: f64, gamma: f64) -> Result<WeightMatrix> {
    let n = dist.nrows();
    let w = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            delta * (-gamma * dist[(i, j)]).exp()
        }
    });
    WeightMatrix::new(w, delta)
}

/// Similarity weights with an explicit bandwidth.
pub fn weight_matrix_with_gamma(
    coefs: &CoefficientSet,
    delta: f64,
    gamma: f64,
) -> Result<WeightMatrix> {
    if !(gamma >= 0.0) {
        return Err(AdsError::Validation(format!("gamma {gamma} must be >= 0")));
    }
    weights_from_distances(&pairwise_distances(coefs), delta, gamma)
}

/// Similarity weights from first-stage estimates, bandwidth per `cfg.gamma`.
pub fn build_weight_matrix(first_stage: &CoefficientSet, cfg: &AdsConfig) -> Result<WeightMatrix> {
    Ok(build_weights(first_stage, cfg)?.0)
}

fn build_weights(coefs: &CoefficientSet, cfg: &AdsConfig) -> Result<(WeightMatrix, f64)> {
    let dist = pairwise_distances(coefs);
    // A lone individual has no pairs; its weight matrix is [1] whatever gamma is.
    let gamma = if coefs.n_individuals() == 1 {
        0.0
    } else {
        gamma_from_distances(&dist, cfg.gamma)?
    };
    Ok((weights_from_distances(&dist, cfg.delta, gamma)?, gamma))
}

/// Everything produced by one ADS run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdsFit {
    pub first_stage: CoefficientSet,
    /// Weights used for the returned second-stage coefficients.
    pub weights: WeightMatrix,
    pub gamma: f64,
    pub coefs: CoefficientSet,
    /// Number of extra weight/re-fit rounds performed after the base pass.
    pub refinements: usize,
    /// Refinement reached `refine_tol` (always true without refinement).
    pub refine_converged: bool,
    /// Every Lasso solve hit its tolerance before `max_sweeps`.
    pub solver_converged: bool,
}

fn collect_fits(fits: Vec<FitOutcome>) -> Result<(CoefficientSet, bool)> {
    let converged = fits.iter().all(|f| f.converged);
    let rows: Vec<DVector<f64>> = fits.into_iter().map(|f| f.coefs).collect();
    Ok((CoefficientSet::from_rows(&rows)?, converged))
}

/// Step 1: independent per-individual fits.
pub fn first_stage(data: &PanelDataset, cfg: &AdsConfig) -> Result<(CoefficientSet, bool)> {
    let fits = (0..data.n_individuals())
        .into_par_iter()
        .map(|i| fit_individual(data, i, cfg.estimator, &cfg.lasso))
        .collect::<Result<Vec<_>>>()?;
    collect_fits(fits)
}

/// Step 3: similarity-weighted re-estimation of every individual.
pub fn second_stage(
    data: &PanelDataset,
    weights: &WeightMatrix,
    cfg: &AdsConfig,
) -> Result<(CoefficientSet, bool)> {
    let n = data.n_individuals();
    if weights.n_individuals() != n {
        return Err(AdsError::Dimension(format!(
            "weight matrix for {} individuals, dataset has {n}",
            weights.n_individuals()
        )));
    }
    let t = data.n_periods() as f64;
    let fits = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|j| weights.get(i, j)).collect();
            let sample = WeightedSample::pooled(data, &row)?;
            fit_sample(&sample, cfg.estimator, &cfg.lasso, t * weights.row_sum(i))
        })
        .collect::<Result<Vec<_>>>()?;
    collect_fits(fits)
}

/// Full ADS fit: first stage, weights, second stage, optional refinement.
pub fn ads_fit(data: &PanelDataset, cfg: &AdsConfig) -> Result<AdsFit> {
    cfg.validate()?;
    let (first, first_ok) = first_stage(data, cfg)?;
    ads_fit_from_first_stage(data, first, first_ok, cfg)
}

/// Steps 2 and 3 given precomputed first-stage coefficients, which must
/// come from `cfg.estimator` fitted per individual.
pub fn ads_fit_from_first_stage(
    data: &PanelDataset,
    first: CoefficientSet,
    first_ok: bool,
    cfg: &AdsConfig,
) -> Result<AdsFit> {
    cfg.validate()?;
    if first.n_individuals() != data.n_individuals() || first.dim() != data.n_covariates() + 1 {
        return Err(AdsError::Dimension(
            "first-stage coefficients do not match the dataset".into(),
        ));
    }
    let (mut weights, mut gamma) = build_weights(&first, cfg)?;
    let (mut coefs, mut solver_ok) = second_stage(data, &weights, cfg)?;
    solver_ok &= first_ok;

    let mut refinements = 0;
    let mut refine_converged = cfg.refine_iterations == 0;
    while refinements < cfg.refine_iterations {
        let (next_w, next_gamma) = build_weights(&coefs, cfg)?;
        if next_w.max_abs_diff(&weights) < cfg.refine_tol {
            refine_converged = true;
            break;
        }
        weights = next_w;
        gamma = next_gamma;
        let (c, ok) = second_stage(data, &weights, cfg)?;
        coefs = c;
        solver_ok &= ok;
        refinements += 1;
    }
    if !refine_converged {
        let (last_w, _) = build_weights(&coefs, cfg)?;
        refine_converged = last_w.max_abs_diff(&weights) < cfg.refine_tol;
    }

    Ok(AdsFit {
        first_stage: first,
        weights,
        gamma,
        coefs,
        refinements,
        refine_converged,
        solver_converged: solver_ok,
    })
}

/// Per-individual sample mean as an intercept-only model.
pub fn naive_fit(data: &PanelDataset) -> CoefficientSet {
    let dim = data.n_covariates() + 1;
    let mut m = DMatrix::zeros(data.n_individuals(), dim);
    for (i, y) in data.responses().iter().enumerate() {
        m[(i, 0)] = y.mean();
    }
    CoefficientSet::new(m).expect("sample means of finite data are finite")
}

/// Stage-1 fits only, as a coefficient set (the "individual" baseline).
pub fn individual_fit(
    data: &PanelDataset,
    estimator: BaseEstimator,
    lasso: &LassoConfig,
) -> Result<CoefficientSet> {
    let cfg = AdsConfig {
        estimator,
        lasso: lasso.clone(),
        ..AdsConfig::default()
    };
    Ok(first_stage(data, &cfg)?.0)
}

/// Fits any of the compared estimators. Non-ADS estimators report an
/// identity weight matrix.
pub fn fit_estimator(
    data: &PanelDataset,
    kind: EstimatorKind,
    cfg: &AdsConfig,
) -> Result<(CoefficientSet, WeightMatrix)> {
    let n = data.n_individuals();
    match kind {
        EstimatorKind::Naive => Ok((naive_fit(data), WeightMatrix::identity(n))),
        EstimatorKind::Ols => Ok((
            individual_fit(data, BaseEstimator::Ols, &cfg.lasso)?,
            WeightMatrix::identity(n),
        )),
        EstimatorKind::Lasso => Ok((
            individual_fit(data, BaseEstimator::Lasso, &cfg.lasso)?,
            WeightMatrix::identity(n),
        )),
        EstimatorKind::AdsOls | EstimatorKind::AdsLasso => {
            let estimator = if kind == EstimatorKind::AdsOls {
                BaseEstimator::Ols
            } else {
                BaseEstimator::Lasso
            };
            let fit = ads_fit(
                data,
                &AdsConfig {
                    estimator,
                    ..cfg.clone()
                },
            )?;
            Ok((fit.coefs, fit.weights))
        }
    }
}
