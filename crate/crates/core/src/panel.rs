//! Panel data containers, coefficient sets, similarity weights and the
//! prediction / MSE evaluation shared by every estimator.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{AdsError, Result};

/// A balanced panel: `N` individuals observed over `T` periods with `p`
/// covariates plus a leading intercept column in every design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    design: Vec<DMatrix<f64>>,
    response: Vec<DVector<f64>>,
    signal: Option<Vec<DVector<f64>>>,
    ids: Vec<String>,
    times: Vec<Vec<i64>>,
    covariate_names: Vec<String>,
}

impl PanelDataset {
    /// Builds a dataset from per-individual `T x (p+1)` design matrices and
    /// length-`T` responses. Column 0 of every design must be identically 1.
    pub fn new(design: Vec<DMatrix<f64>>, response: Vec<DVector<f64>>) -> Result<Self> {
        if design.is_empty() {
            return Err(AdsError::Validation("panel has no individuals".into()));
        }
        if design.len() != response.len() {
            return Err(AdsError::Dimension(format!(
                "{} design matrices but {} response vectors",
                design.len(),
                response.len()
            )));
        }
        let t = design[0].nrows();
        let cols = design[0].ncols();
        if t == 0 {
            return Err(AdsError::Validation("panel has zero periods".into()));
        }
        if cols == 0 {
            return Err(AdsError::Validation("design has no intercept column".into()));
        }
        for (i, (x, y)) in design.iter().zip(&response).enumerate() {
            if x.nrows() != t || x.ncols() != cols {
                return Err(AdsError::Dimension(format!(
                    "individual {i}: design is {}x{}, expected {t}x{cols}",
                    x.nrows(),
                    x.ncols()
                )));
            }
            if y.len() != t {
                return Err(AdsError::Dimension(format!(
                    "individual {i}: response has length {}, expected {t}",
                    y.len()
                )));
            }
            if x.column(0).iter().any(|&v| v != 1.0) {
                return Err(AdsError::Validation(format!(
                    "individual {i}: design column 0 is not identically 1"
                )));
            }
            if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                return Err(AdsError::Validation(format!(
                    "individual {i}: non-finite value in design or response"
                )));
            }
        }
        let n = design.len();
        Ok(Self {
            ids: (0..n).map(|i| i.to_string()).collect(),
            times: vec![(0..t as i64).collect(); n],
            covariate_names: (1..cols).map(|k| format!("x{k}")).collect(),
            design,
            response,
            signal: None,
        })
    }

    /// Attaches the noiseless values `x_it' beta_i` (synthetic data only).
    pub fn with_signal(mut self, signal: Vec<DVector<f64>>) -> Result<Self> {
        if signal.len() != self.n_individuals()
            || signal.iter().any(|s| s.len() != self.n_periods())
        {
            return Err(AdsError::Dimension(
                "signal must have the same shape as the response".into(),
            ));
        }
        self.signal = Some(signal);
        Ok(self)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_individuals() {
            return Err(AdsError::Dimension(format!(
                "{} ids for {} individuals",
                ids.len(),
                self.n_individuals()
            )));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn with_times(mut self, times: Vec<Vec<i64>>) -> Result<Self> {
        if times.len() != self.n_individuals()
            || times.iter().any(|t| t.len() != self.n_periods())
        {
            return Err(AdsError::Dimension(
                "time index must have one entry per observation".into(),
            ));
        }
        self.times = times;
        Ok(self)
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_covariates() {
            return Err(AdsError::Dimension(format!(
                "{} covariate names for {} covariates",
                names.len(),
                self.n_covariates()
            )));
        }
        self.covariate_names = names;
        Ok(self)
    }

    pub fn n_individuals(&self) -> usize {
        self.design.len()
    }

    pub fn n_periods(&self) -> usize {
        self.design[0].nrows()
    }

    /// Number of covariates, excluding the intercept.
    pub fn n_covariates(&self) -> usize {
        self.design[0].ncols() - 1
    }

    pub fn design(&self, i: usize) -> &DMatrix<f64> {
        &self.design[i]
    }

    pub fn designs(&self) -> &[DMatrix<f64>] {
        &self.design
    }

    pub fn response(&self, i: usize) -> &DVector<f64> {
        &self.response[i]
    }

    pub fn responses(&self) -> &[DVector<f64>] {
        &self.response
    }

    pub fn signal(&self) -> Option<&[DVector<f64>]> {
        self.signal.as_deref()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn times(&self) -> &[Vec<i64>] {
        &self.times
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Targets for evaluation: the noiseless signal when present, otherwise
    /// the observed response.
    pub fn evaluation_targets(&self) -> &[DVector<f64>] {
        self.signal.as_deref().unwrap_or(&self.response)
    }

    /// Keeps periods `start..start + len` of every individual.
    pub fn slice_periods(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.n_periods() {
            return Err(AdsError::Validation(format!(
                "period slice {start}..{} outside 0..{}",
                start + len,
                self.n_periods()
            )));
        }
        let cols = self.design[0].ncols();
        Ok(Self {
            design: self
                .design
                .iter()
                .map(|x| x.view((start, 0), (len, cols)).into_owned())
                .collect(),
            response: self.response.iter().map(|y| y.rows(start, len).into_owned()).collect(),
            signal: self
                .signal
                .as_ref()
                .map(|s| s.iter().map(|v| v.rows(start, len).into_owned()).collect()),
            ids: self.ids.clone(),
            times: self.times.iter().map(|t| t[start..start + len].to_vec()).collect(),
            covariate_names: self.covariate_names.clone(),
        })
    }
}

/// One coefficient vector per individual, stored as the rows of an
/// `N x (p+1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    coefs: DMatrix<f64>,
}

impl CoefficientSet {
    pub fn new(coefs: DMatrix<f64>) -> Result<Self> {
        if coefs.iter().any(|v| !v.is_finite()) {
            return Err(AdsError::Validation("non-finite coefficient".into()));
        }
        Ok(Self { coefs })
    }

    pub fn from_rows(rows: &[DVector<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(AdsError::Validation("empty coefficient set".into()));
        };
        let dim = first.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(AdsError::Dimension("ragged coefficient rows".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), dim, |i, k| rows[i][k]))
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            coefs: DMatrix::zeros(n, dim),
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.coefs.nrows()
    }

    /// Coefficient count per individual (`p + 1`).
    pub fn dim(&self) -> usize {
        self.coefs.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.coefs.row(i).transpose()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.coefs
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.coefs
    }
}

/// Pairwise similarity weights with unit diagonal and symmetric
/// off-diagonal entries in `[0, delta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
    delta: f64,
}

impl WeightMatrix {
    /// Validates and wraps `w`. Off-diagonal entries may be exactly zero
    /// when the kernel underflows.
    pub fn new(w: DMatrix<f64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(AdsError::Validation(format!("delta {delta} outside (0, 1]")));
        }
        if !w.is_square() || w.nrows() == 0 {
            return Err(AdsError::Dimension(format!(
                "weight matrix is {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let n = w.nrows();
        for i in 0..n {
            if w[(i, i)] != 1.0 {
                return Err(AdsError::Validation(format!("W({i},{i}) = {} != 1", w[(i, i)])));
            }
            for j in (i + 1)..n {
                let v = w[(i, j)];
                if v != w[(j, i)] {
                    return Err(AdsError::Validation(format!("W({i},{j}) != W({j},{i})")));
                }
                if !(0.0..=delta).contains(&v) {
                    return Err(AdsError::Validation(format!(
                        "W({i},{j}) = {v} outside [0, {delta}]"
                    )));
                }
            }
        }
        Ok(Self { w, delta })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            w: DMatrix::identity(n, n),
            delta: 1.0,
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.w.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `sum_j W(i, j)`, the soft-pooled sample-size factor of individual `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.w.row(i).iter().sum()
    }

    pub fn max_abs_diff(&self, other: &WeightMatrix) -> f64 {
        self.w
            .iter()
            .zip(other.w.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `prediction[i][t] = design[i][t] . coefs[i]`.
pub fn predict(data: &PanelDataset, coefs: &CoefficientSet) -> Result<Vec<DVector<f64>>> {
    if coefs.n_individuals() != data.n_individuals() || coefs.dim() != data.n_covariates() + 1 {
        return Err(AdsError::Dimension(format!(
            "coefficients are {}x{}, dataset needs {}x{}",
            coefs.n_individuals(),
            coefs.dim(),
            data.n_individuals(),
            data.n_covariates() + 1
        )));
    }
    Ok(data
        .designs()
        .iter()
        .enumerate()
        .map(|(i, x)| x * coefs.row(i))
        .collect())
}

/// Mean squared difference over all `N * T` cells.
pub fn mse_against(predictions: &[DVector<f64>], targets: &[DVector<f64>]) -> Result<f64> {
    if predictions.len() != targets.len()
        || predictions.iter().zip(targets).any(|(p, t)| p.len() != t.len())
    {
        return Err(AdsError::Dimension("predictions and targets differ in shape".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        sum += p.iter().zip(t.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += p.len();
    }
    if count == 0 {
        return Err(AdsError::Dimension("no observations to evaluate".into()));
    }
    Ok(sum / count as f64)
}

/// Predicts on `data` and scores against its evaluation targets.
pub fn evaluate(data: &PanelDataset, coefs: &CoefficientSet) -> Result<f64> {
    mse_against(&predict(data, coefs)?, data.evaluation_targets())
}

/// Covariate design family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    Iid,
    /// Covariance `0.5^|k-l|`.
    Toeplitz,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Iid => "iid",
            Design::Toeplitz => "toeplitz",
        })
    }
}

impl FromStr for Design {
    type Err = AdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(Design::Iid),
            "toeplitz" | "cor" => Ok(Design::Toeplitz),
            other => Err(AdsError::Validation(format!("unknown design `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Naive,
    Ols,
    Lasso,
    AdsOls,
    AdsLasso,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Naive,
        EstimatorKind::Ols,
        EstimatorKind::Lasso,
        EstimatorKind::AdsOls,
        EstimatorKind::AdsLasso,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Ols => "ols",
            EstimatorKind::Lasso => "lasso",
            EstimatorKind::AdsOls => "ads-ols",
            EstimatorKind::AdsLasso => "ads-lasso",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = AdsError;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| AdsError::Validation(format!("unknown estimator `{s}`")))
    }
}

/// One aggregated Monte Carlo result.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub dgp: u8,
    pub design: Design,
    pub n: usize,
    pub t: usize,
    pub p: usize,
    pub s: Option<usize>,
    pub cor: Option<f64>,
    pub estimator: EstimatorKind,
    pub mse: f64,
    pub mc_stderr: f64,
    /// Successful repetitions contributing to `mse`.
    pub reps: usize,
}

/// A cell whose failure rate exceeded the tolerated share of repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub cell: String,
    pub failed_reps: usize,
    pub total_reps: usize,
    pub first_error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MseReport {
    pub rows: Vec<MseRow>,
    pub failures: Vec<CellFailure>,
}

impl MseReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: MseReport) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
    }

    /// First row matching the given cell coordinates and estimator.
    pub fn find(
        &self,
        n: usize,
        t: usize,
        cor: Option<f64>,
        estimator: EstimatorKind,
    ) -> Option<&MseRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.t == t && r.cor == cor && r.estimator == estimator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> PanelDataset {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 1.0, 0.5, 4.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        PanelDataset::new(vec![x.clone(), x], vec![y.clone(), y]).unwrap()
    }

    #[test]
    fn intercept_only_coefs_predict_one() {
        let data = toy();
        let coefs = CoefficientSet::new(DMatrix::from_row_slice(2, 3, &[1., 0., 0., 1., 0., 0.])).unwrap();
        for p in predict(&data, &coefs).unwrap() {
            assert!(p.iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn zero_coefs_predict_zero() {
        let data = toy();
        let preds = predict(&data, &CoefficientSet::zeros(2, 3)).unwrap();
        assert!(preds.iter().flat_map(|p| p.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn predict_arithmetic() {
        let data = toy();
        let coefs =
            CoefficientSet::new(DMatrix::from_row_slice(2, 3, &[0.5, 1., 3., 0., 0., 0.])).unwrap();
        let preds = predict(&data, &coefs).unwrap();
        assert_eq!(preds[0][0], -0.5);
    }

    #[test]
    fn predict_rejects_shape_mismatch() {
        let data = toy();
        assert!(matches!(
            predict(&data, &CoefficientSet::zeros(2, 2)),
            Err(AdsError::Dimension(_))
        ));
        assert!(matches!(
            predict(&data, &CoefficientSet::zeros(3, 3)),
            Err(AdsError::Dimension(_))
        ));
    }

    #[test]
    fn mse_examples() {
        let a = vec![DVector::from_vec(vec![1.0, 2.0])];
        assert_eq!(mse_against(&a, &a).unwrap(), 0.0);
        let shifted = vec![DVector::from_vec(vec![1.5, 2.5])];
        assert_eq!(mse_against(&shifted, &a).unwrap(), 0.25);
        let errs = vec![DVector::from_vec(vec![1.0, -3.0])];
        let zero = vec![DVector::zeros(2)];
        assert_eq!(mse_against(&errs, &zero).unwrap(), 5.0);
        assert!(mse_against(&errs, &[DVector::zeros(3)]).is_err());
    }

    #[test]
    fn dataset_rejects_missing_intercept() {
        let x = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        assert!(PanelDataset::new(vec![x], vec![DVector::zeros(1)]).is_err());
    }

    #[test]
    fn dataset_rejects_ragged_panels() {
        let x1 = DMatrix::from_element(2, 2, 1.0);
        let x2 = DMatrix::from_element(3, 2, 1.0);
        let r = PanelDataset::new(vec![x1, x2], vec![DVector::zeros(2), DVector::zeros(3)]);
        assert!(matches!(r, Err(AdsError::Dimension(_))));
    }

    #[test]
    fn weight_matrix_validation() {
        let ok = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        assert!(WeightMatrix::new(ok, 0.5).is_ok());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        assert!(WeightMatrix::new(asym, 0.5).is_err());
        let too_big = DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]);
        assert!(WeightMatrix::new(too_big, 0.5).is_err());
        let bad_diag = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 1.0]);
        assert!(WeightMatrix::new(bad_diag, 0.5).is_err());
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in EstimatorKind::ALL {
            assert_eq!(e.as_str().parse::<EstimatorKind>().unwrap(), e);
        }
        assert!("ridge".parse::<EstimatorKind>().is_err());
    }
}
