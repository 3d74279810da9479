//! Weighted per-individual estimation backends.
//!
//! Both estimators work on a [`WeightedSample`]: stacked design rows, targets
//! and non-negative observation weights. The Lasso objective is normalized by
//! the total weight `S = sum_k w_k`,
//!
//! ```text
//! L(b) = 1/(2S) * sum_k w_k (y_k - x_k'b)^2 + lambda * ||b||_1
//! ```
//!
//! so an unweighted single-individual fit uses `1/(2T)` and a similarity
//! weighted fit uses `1/(2 T N_i)` with `N_i = sum_j W(i, j)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{AdsError, Result};
use crate::panel::PanelDataset;

/// Relative singular-value cutoff for the minimum-norm least-squares solve.
pub const PINV_RCOND: f64 = 1e-10;

/// Stacked rows, targets and observation weights for one weighted fit.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    rows: DMatrix<f64>,
    targets: DVector<f64>,
    weights: DVector<f64>,
}

impl WeightedSample {
    pub fn new(rows: DMatrix<f64>, targets: DVector<f64>, weights: DVector<f64>) -> Result<Self> {
        if rows.nrows() != targets.len() || rows.nrows() != weights.len() {
            return Err(AdsError::Dimension(format!(
                "{} rows, {} targets, {} weights",
                rows.nrows(),
                targets.len(),
                weights.len()
            )));
        }
        if rows.ncols() == 0 {
            return Err(AdsError::Dimension("sample has no columns".into()));
        }
        if rows.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(AdsError::Validation("non-finite value in sample".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AdsError::Validation(
                "observation weights must be finite and non-negative".into(),
            ));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(AdsError::Degenerate("all observation weights are zero".into()));
        }
        Ok(Self {
            rows,
            targets,
            weights,
        })
    }

    /// Unit weights on every row.
    pub fn unweighted(rows: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        let n = rows.nrows();
        Self::new(rows, targets, DVector::from_element(n, 1.0))
    }

    /// Individual `i`'s own `T` rows with unit weight.
    pub fn for_individual(data: &PanelDataset, i: usize) -> Result<Self> {
        if i >= data.n_individuals() {
            return Err(AdsError::Index {
                index: i,
                len: data.n_individuals(),
            });
        }
        Self::unweighted(data.design(i).clone(), data.response(i).clone())
    }

    /// Every individual's rows, stacked by individual then period, with all
    /// `T` rows of individual `j` carrying `individual_weights[j]`.
    /// Individuals with zero weight are left out of the stack.
    pub fn pooled(data: &PanelDataset, individual_weights: &[f64]) -> Result<Self> {
        if individual_weights.len() != data.n_individuals() {
            return Err(AdsError::Dimension(format!(
                "{} individual weights for {} individuals",
                individual_weights.len(),
                data.n_individuals()
            )));
        }
        let t = data.n_periods();
        let cols = data.n_covariates() + 1;
        let active: Vec<usize> = (0..data.n_individuals())
            .filter(|&j| individual_weights[j] != 0.0)
            .collect();
        let n_rows = active.len() * t;
        let mut rows = DMatrix::zeros(n_rows, cols);
        let mut targets = DVector::zeros(n_rows);
        let mut weights = DVector::zeros(n_rows);
        for (block, &j) in active.iter().enumerate() {
            let off = block * t;
            rows.view_mut((off, 0), (t, cols)).copy_from(data.design(j));
            targets.rows_mut(off, t).copy_from(data.response(j));
            weights.rows_mut(off, t).fill(individual_weights[j]);
        }
        Self::new(rows, targets, weights)
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Coefficient count `p + 1`.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.sum()
    }

    /// Weighted residual sum of squares divided by the total weight.
    pub fn weighted_mean_square_residual(&self, coefs: &DVector<f64>) -> f64 {
        let resid = &self.targets - &self.rows * coefs;
        resid
            .iter()
            .zip(self.weights.iter())
            .map(|(r, w)| w * r * r)
            .sum::<f64>()
            / self.total_weight()
    }

    fn weighted_target_sd(&self) -> f64 {
        let total = self.total_weight();
        let mean = self.targets.dot(&self.weights) / total;
        let var = self
            .targets
            .iter()
            .zip(self.weights.iter())
            .map(|(y, w)| w * (y - mean).powi(2))
            .sum::<f64>()
            / total;
        var.sqrt()
    }
}

/// Weighted least squares. Falls back to the minimum-norm solution when the
/// weighted design is rank deficient (singular values below
/// `PINV_RCOND * s_max` are treated as zero).
pub fn weighted_ols(sample: &WeightedSample) -> Result<DVector<f64>> {
    let sqrt_w = sample.weights.map(f64::sqrt);
    let mut a = sample.rows.clone();
    for (mut row, sw) in a.row_iter_mut().zip(sqrt_w.iter()) {
        row *= *sw;
    }
    let b = sample.targets.component_mul(&sqrt_w);
    let svd = a.svd(true, true);
    let s_max = svd.singular_values.max();
    if s_max == 0.0 {
        return Ok(DVector::zeros(sample.dim()));
    }
    let coefs = svd
        .solve(&b, PINV_RCOND * s_max)
        .map_err(|e| AdsError::Degenerate(format!("least-squares solve failed: {e}")))?;
    if coefs.iter().any(|v| !v.is_finite()) {
        return Err(AdsError::Degenerate("least-squares solution is not finite".into()));
    }
    Ok(coefs)
}

/// `sign(z) * max(|z| - kappa, 0)`.
pub fn soft_threshold(z: f64, kappa: f64) -> f64 {
    debug_assert!(kappa >= 0.0);
    if z > kappa {
        z - kappa
    } else if z < -kappa {
        z + kappa
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyRule {
    /// `c * sigma_hat * sqrt(2 ln(p+1) / n_eff)` with an iterated noise estimate.
    Plugin,
    Fixed(f64),
}

/// Residuals used to re-estimate the noise level inside the plug-in rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseEstimate {
    /// Residuals of the pilot Lasso fit itself.
    LassoResidual,
    /// Residuals of a weighted least-squares refit on the pilot's support
    /// (intercept always kept), with a degrees-of-freedom correction.
    PostLasso,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoConfig {
    pub penalty: PenaltyRule,
    pub plugin_constant: f64,
    pub noise_estimate: NoiseEstimate,
    /// Pilot fits used to refine the noise estimate, starting from the
    /// weighted standard deviation of the targets.
    pub sigma_updates: usize,
    pub max_sweeps: usize,
    /// Stop once the largest coefficient change in a sweep falls below this.
    pub tol: f64,
    pub penalize_intercept: bool,
    /// Rescale covariates to unit weighted second moment before fitting.
    pub standardize: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            penalty: PenaltyRule::Plugin,
            plugin_constant: 1.1,
            noise_estimate: NoiseEstimate::PostLasso,
            sigma_updates: 15,
            max_sweeps: 1000,
            tol: 1e-7,
            penalize_intercept: false,
            standardize: false,
        }
    }
}

impl LassoConfig {
    /// Defaults for fitting observed data: standardized covariates.
    pub fn for_real_data() -> Self {
        Self {
            standardize: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(AdsError::Validation(format!("lasso tol {} must be > 0", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(AdsError::Validation("max_sweeps must be >= 1".into()));
        }
        if !(self.plugin_constant > 0.0) {
            return Err(AdsError::Validation("plugin constant must be > 0".into()));
        }
        if let PenaltyRule::Fixed(l) = self.penalty {
            if !(l >= 0.0) {
                return Err(AdsError::Validation(format!("fixed lambda {l} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefs: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Penalized objective before the first sweep and after each sweep, in
    /// the coordinates the solver works in (standardized if enabled).
    pub objective_trace: Vec<f64>,
}

/// Weighted second moments of the normalized quadratic loss.
struct Moments {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl Moments {
    fn new(sample: &WeightedSample) -> Self {
        let total = sample.total_weight();
        let mut xw = sample.rows.clone();
        for (mut row, w) in xw.row_iter_mut().zip(sample.weights.iter()) {
            row *= *w / total;
        }
        let gram = sample.rows.transpose() * &xw;
        let xty = xw.transpose() * &sample.targets;
        let yty = sample
            .targets
            .iter()
            .zip(sample.weights.iter())
            .map(|(y, w)| w * y * y)
            .sum::<f64>()
            / total;
        Self { gram, xty, yty }
    }

    fn objective(&self, coefs: &DVector<f64>, penalties: &[f64]) -> f64 {
        let quad = coefs.dot(&(&self.gram * coefs));
        let loss = 0.5 * (self.yty - 2.0 * self.xty.dot(coefs) + quad);
        let l1: f64 = coefs.iter().zip(penalties).map(|(b, l)| l * b.abs()).sum();
        loss + l1
    }
}

fn penalty_vector(dim: usize, lambda: f64, penalize_intercept: bool) -> Vec<f64> {
    (0..dim)
        .map(|j| if j == 0 && !penalize_intercept { 0.0 } else { lambda })
        .collect()
}

/// Weighted Lasso by cyclic coordinate descent over coordinates `0..=p`.
///
/// Hitting `max_sweeps` is not an error: the last iterate is returned with
/// `converged = false`.
pub fn weighted_lasso(sample: &WeightedSample, cfg: &LassoConfig, lambda: f64) -> Result<LassoFit> {
    cfg.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(AdsError::Validation(format!("lambda {lambda} must be finite and >= 0")));
    }
    let dim = sample.dim();
    let mut m = Moments::new(sample);

    let mut scale = vec![1.0; dim];
    if cfg.standardize {
        for j in 1..dim {
            let s = m.gram[(j, j)].sqrt();
            if s > 0.0 {
                scale[j] = s;
            }
        }
        for j in 0..dim {
            m.xty[j] /= scale[j];
            for k in 0..dim {
                m.gram[(j, k)] /= scale[j] * scale[k];
            }
        }
    }

    let penalties = penalty_vector(dim, lambda, cfg.penalize_intercept);
    let mut beta = DVector::<f64>::zeros(dim);
    // Running G * beta so each coordinate update costs O(p).
    let mut g_beta = DVector::<f64>::zeros(dim);
    let mut trace = vec![m.objective(&beta, &penalties)];
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..dim {
            let gjj = m.gram[(j, j)];
            let old = beta[j];
            let new = if gjj > 0.0 {
                let partial = m.xty[j] - g_beta[j] + gjj * old;
                soft_threshold(partial, penalties[j]) / gjj
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                g_beta.axpy(delta, &m.gram.column(j), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        trace.push(m.objective(&beta, &penalties));
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }

    for j in 0..dim {
        beta[j] /= scale[j];
    }
    Ok(LassoFit {
        coefs: beta,
        converged,
        sweeps,
        objective_trace: trace,
    })
}

/// Largest violation of the Lasso optimality conditions at `coefs` for the
/// unstandardized weighted problem with penalty `lambda`.
pub fn kkt_violation(
    sample: &WeightedSample,
    coefs: &DVector<f64>,
    lambda: f64,
    penalize_intercept: bool,
) -> f64 {
    let m = Moments::new(sample);
    let grad = &m.xty - &m.gram * coefs;
    let penalties = penalty_vector(sample.dim(), lambda, penalize_intercept);
    grad.iter()
        .zip(coefs.iter())
        .zip(&penalties)
        .map(|((g, b), l)| {
            if *b == 0.0 {
                (g.abs() - l).max(0.0)
            } else {
                (g - l * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Smallest penalty for which the all-zero vector is optimal when every
/// coordinate is penalized: `max_j |(1/S) sum_k w_k x_kj y_k|`.
pub fn lambda_max(sample: &WeightedSample) -> f64 {
    Moments::new(sample).xty.amax()
}

/// `c * sigma * sqrt(2 ln(p+1) / n_eff)`.
pub fn plugin_formula(constant: f64, sigma: f64, n_covariates: usize, effective_n: f64) -> f64 {
    constant * sigma * (2.0 * ((n_covariates + 1) as f64).ln() / effective_n).sqrt()
}

/// Noise level implied by a pilot fit.
fn residual_sigma(
    sample: &WeightedSample,
    pilot: &DVector<f64>,
    mode: NoiseEstimate,
    effective_n: f64,
) -> Result<f64> {
    let lasso_sigma = sample.weighted_mean_square_residual(pilot).sqrt();
    match mode {
        NoiseEstimate::LassoResidual => Ok(lasso_sigma),
        NoiseEstimate::PostLasso => {
            let support: Vec<usize> = (0..sample.dim())
                .filter(|&j| j == 0 || pilot[j] != 0.0)
                .collect();
            let k = support.len() as f64;
            if k >= effective_n {
                return Ok(lasso_sigma);
            }
            let sub = WeightedSample {
                rows: sample.rows.select_columns(&support),
                targets: sample.targets.clone(),
                weights: sample.weights.clone(),
            };
            let refit = weighted_ols(&sub)?;
            let mse = sub.weighted_mean_square_residual(&refit);
            Ok((mse * effective_n / (effective_n - k)).sqrt())
        }
    }
}

/// Plug-in penalty `c * sigma * sqrt(2 ln(p+1) / n_eff)`. The noise level
/// starts at the weighted standard deviation of the targets and is updated
/// `cfg.sigma_updates` times from the residuals of a pilot fit at the
/// current penalty.
pub fn plugin_lambda(sample: &WeightedSample, cfg: &LassoConfig, effective_n: f64) -> Result<f64> {
    let p = sample.dim() - 1;
    if p == 0 {
        return Err(AdsError::Validation(
            "plug-in penalty needs at least one covariate".into(),
        ));
    }
    if !(effective_n > 0.0) {
        return Err(AdsError::Validation(format!(
            "effective sample size {effective_n} must be > 0"
        )));
    }
    let c = cfg.plugin_constant;
    let mut sigma = sample.weighted_target_sd();
    for _ in 0..cfg.sigma_updates {
        let pilot = weighted_lasso(sample, cfg, plugin_formula(c, sigma, p, effective_n))?;
        let next = residual_sigma(sample, &pilot.coefs, cfg.noise_estimate, effective_n)?;
        let done = (next - sigma).abs() <= 1e-6 * sigma.max(f64::MIN_POSITIVE);
        sigma = next;
        if done {
            break;
        }
    }
    Ok(plugin_formula(c, sigma, p, effective_n))
}

/// Penalty for a fit under `cfg`'s rule.
pub fn resolve_lambda(sample: &WeightedSample, cfg: &LassoConfig, effective_n: f64) -> Result<f64> {
    match cfg.penalty {
        PenaltyRule::Fixed(l) => Ok(l),
        PenaltyRule::Plugin => plugin_lambda(sample, cfg, effective_n),
    }
}

/// Estimator family shared by both ADS stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseEstimator {
    Ols,
    Lasso,
}

/// Coefficients plus solver status for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub coefs: DVector<f64>,
    pub converged: bool,
}

pub(crate) fn fit_sample(
    sample: &WeightedSample,
    estimator: BaseEstimator,
    cfg: &LassoConfig,
    effective_n: f64,
) -> Result<FitOutcome> {
    match estimator {
        BaseEstimator::Ols => Ok(FitOutcome {
            coefs: weighted_ols(sample)?,
            converged: true,
        }),
        BaseEstimator::Lasso => {
            let lambda = resolve_lambda(sample, cfg, effective_n)?;
            let fit = weighted_lasso(sample, cfg, lambda)?;
            Ok(FitOutcome {
                coefs: fit.coefs,
                converged: fit.converged,
            })
        }
    }
}

/// Fits individual `i` on its own `T` observations only.
pub fn fit_individual(
    data: &PanelDataset,
    i: usize,
    estimator: BaseEstimator,
    cfg: &LassoConfig,
) -> Result<FitOutcome> {
    let sample = WeightedSample::for_individual(data, i)?;
    fit_sample(&sample, estimator, cfg, data.n_periods() as f64)
}
