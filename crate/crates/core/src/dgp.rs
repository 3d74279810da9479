//! Seeded synthetic panels.
//!
//! Four coefficient processes are supported:
//!
//! * DGP 1: every coefficient component is equicorrelated across individuals
//!   with correlation `cor` and independent across components.
//! * DGP 2: `beta_i = 1 + (a, a^2, -a, -a^2, a/1, a/2, a/3, ...)` with
//!   `a ~ U(0, 1)` drawn per individual.
//! * DGP 3 / DGP 4: sparse versions of DGP 2 / DGP 1 where only the first
//!   `s + 1` components are non-zero.
//!
//! Covariates are standard normal, either independent or with Toeplitz
//! covariance `0.5^|k-l|`, and every design carries a leading intercept.
//!
//! # Random streams
//!
//! Each draw comes from its own ChaCha8 stream seeded with
//! `mix(seed, purpose, index)`, where `purpose` distinguishes coefficients,
//! train/test designs and train/test noise, and `index` is the individual.
//! Changing `T` therefore leaves the coefficient draw untouched, and train
//! and test never share random numbers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AdsError, Result};
use crate::panel::{CoefficientSet, Design, PanelDataset};

/// Correlation parameter of the Toeplitz covariate design.
pub const TOEPLITZ_RHO: f64 = 0.5;

/// SplitMix64 finalizer applied to a combination of the inputs.
pub fn mix_seed(seed: u64, tag: u64, index: u64) -> u64 {
    fn finalize(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let a = finalize(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let b = finalize(a ^ tag.wrapping_mul(0xd1b5_4a32_d192_ed03));
    finalize(b ^ index.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Purpose {
    Beta = 1,
    TrainDesign = 2,
    TrainNoise = 3,
    TestDesign = 4,
    TestNoise = 5,
}

fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, purpose as u64, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DgpKind {
    Correlated = 1,
    Alpha = 2,
    SparseAlpha = 3,
    SparseCorrelated = 4,
}

impl DgpKind {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(DgpKind::Correlated),
            2 => Ok(DgpKind::Alpha),
            3 => Ok(DgpKind::SparseAlpha),
            4 => Ok(DgpKind::SparseCorrelated),
            other => Err(AdsError::Validation(format!("unknown dgp {other}, expected 1-4"))),
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, DgpKind::SparseAlpha | DgpKind::SparseCorrelated)
    }

    pub fn uses_cor(self) -> bool {
        matches!(self, DgpKind::Correlated | DgpKind::SparseCorrelated)
    }
}

/// Which coefficient slot receives the first element of the DGP 2 offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetAlignment {
    /// Offset starts at the intercept.
    #[default]
    Intercept,
    /// Intercept stays at 1; the offset starts at the first covariate.
    FirstCovariate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub dgp: DgpKind,
    pub n: usize,
    pub t: usize,
    pub p: usize,
    /// Non-zero slopes for DGP 3/4.
    pub s: Option<usize>,
    /// Cross-individual coefficient correlation for DGP 1/4.
    pub cor: Option<f64>,
    pub design: Design,
    pub noise_sd: f64,
    pub seed: u64,
    pub alignment: OffsetAlignment,
}

impl DgpConfig {
    pub fn new(dgp: DgpKind, n: usize, t: usize, p: usize) -> Self {
        Self {
            dgp,
            n,
            t,
            p,
            s: None,
            cor: None,
            design: Design::Iid,
            noise_sd: 1.0,
            seed: 0,
            alignment: OffsetAlignment::Intercept,
        }
    }

    pub fn with_s(mut self, s: usize) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_cor(mut self, cor: f64) -> Self {
        self.cor = Some(cor);
        self
    }

    pub fn with_design(mut self, design: Design) -> Self {
        self.design = design;
        self
    }

    pub fn with_noise_sd(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 {
            return Err(AdsError::Validation("n and t must be positive".into()));
        }
        if self.p == 0 {
            return Err(AdsError::Validation("p must be positive".into()));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(AdsError::Validation(format!(
                "noise sd {} must be finite and >= 0",
                self.noise_sd
            )));
        }
        match (self.dgp.is_sparse(), self.s) {
            (true, None) => {
                return Err(AdsError::Validation(format!(
                    "dgp {} needs a sparsity level s",
                    self.dgp.number()
                )))
            }
            (true, Some(s)) if s > self.p => {
                return Err(AdsError::Validation(format!("s = {s} exceeds p = {}", self.p)))
            }
            (false, Some(_)) => {
                return Err(AdsError::Validation(format!(
                    "dgp {} takes no sparsity level",
                    self.dgp.number()
                )))
            }
            _ => {}
        }
        match (self.dgp.uses_cor(), self.cor) {
            (true, None) => Err(AdsError::Validation(format!(
                "dgp {} needs a coefficient correlation",
                self.dgp.number()
            ))),
            (true, Some(c)) => check_cor(c),
            (false, Some(_)) => Err(AdsError::Validation(format!(
                "dgp {} takes no coefficient correlation",
                self.dgp.number()
            ))),
            (false, None) => Ok(()),
        }
    }

    /// Length of the non-zero coefficient block.
    fn active_dim(&self) -> usize {
        match self.s {
            Some(s) if self.dgp.is_sparse() => s + 1,
            _ => self.p + 1,
        }
    }
}

fn check_cor(cor: f64) -> Result<()> {
    if (0.0..=1.0).contains(&cor) {
        Ok(())
    } else {
        Err(AdsError::Validation(format!("coefficient correlation {cor} outside [0, 1]")))
    }
}

/// `p x p` matrix with entries `rho^|k-l|`.
pub fn toeplitz_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |k, l| rho.powi((k as i32 - l as i32).abs()))
}

/// Lower Cholesky factor of the covariate covariance, `None` for iid.
fn covariate_factor(design: Design, p: usize) -> Option<DMatrix<f64>> {
    match design {
        Design::Iid => None,
        Design::Toeplitz => Some(
            toeplitz_covariance(p, TOEPLITZ_RHO)
                .cholesky()
                .expect("Toeplitz covariance with |rho| < 1 is positive definite")
                .unpack(),
        ),
    }
}

fn design_matrix<R: Rng>(t: usize, p: usize, factor: Option<&DMatrix<f64>>, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::from_element(t, p + 1, 1.0);
    let mut z = DVector::<f64>::zeros(p);
    for row in 0..t {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let draw = match factor {
            Some(l) => l * &z,
            None => z.clone(),
        };
        for k in 0..p {
            x[(row, k + 1)] = draw[k];
        }
    }
    x
}

/// `n` design matrices of shape `t x (p+1)` drawn from one stream.
pub fn gen_design<R: Rng>(cfg: &DgpConfig, rng: &mut R) -> Vec<DMatrix<f64>> {
    let factor = covariate_factor(cfg.design, cfg.p);
    (0..cfg.n)
        .map(|_| design_matrix(cfg.t, cfg.p, factor.as_ref(), rng))
        .collect()
}

/// Equicorrelated normal coefficients:
/// `b_il = sqrt(cor) z_l + sqrt(1 - cor) e_il`.
pub fn gen_beta_dgp1<R: Rng>(n: usize, dim: usize, cor: f64, rng: &mut R) -> Result<CoefficientSet> {
    check_cor(cor)?;
    let shared: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let (a, b) = (cor.sqrt(), (1.0 - cor).sqrt());
    let mut m = DMatrix::zeros(n, dim);
    for i in 0..n {
        for l in 0..dim {
            let e: f64 = rng.sample(StandardNormal);
            m[(i, l)] = a * shared[l] + b * e;
        }
    }
    CoefficientSet::new(m)
}

/// The DGP 2 offset vector `(a, a^2, -a, -a^2, a/1, a/2, ...)` truncated
/// to `len` entries.
pub fn alpha_offset(alpha: f64, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |k, _| match k {
        0 => alpha,
        1 => alpha * alpha,
        2 => -alpha,
        3 => -alpha * alpha,
        k => alpha / (k - 3) as f64,
    })
}

/// `1 + offset(alpha)` placed according to `alignment`.
pub fn alpha_beta(alpha: f64, dim: usize, alignment: OffsetAlignment) -> DVector<f64> {
    let mut beta = DVector::from_element(dim, 1.0);
    match alignment {
        OffsetAlignment::Intercept => beta += alpha_offset(alpha, dim),
        OffsetAlignment::FirstCovariate => {
            if dim > 1 {
                let off = alpha_offset(alpha, dim - 1);
                let mut tail = beta.rows_mut(1, dim - 1);
                tail += &off;
            }
        }
    }
    beta
}

/// DGP 2 coefficients with `alpha_i ~ U(0, 1)`.
pub fn gen_beta_dgp2<R: Rng>(
    n: usize,
    dim: usize,
    alignment: OffsetAlignment,
    rng: &mut R,
) -> Result<CoefficientSet> {
    let rows: Vec<DVector<f64>> = (0..n)
        .map(|_| alpha_beta(rng.random::<f64>(), dim, alignment))
        .collect();
    CoefficientSet::from_rows(&rows)
}

/// DGP 3/4: the first `s + 1` components from DGP 2/1, the remaining
/// `p - s` exactly zero.
pub fn gen_beta_sparse<R: Rng>(cfg: &DgpConfig, rng: &mut R) -> Result<CoefficientSet> {
    let Some(s) = cfg.s else {
        return Err(AdsError::Validation("sparse dgp needs s".into()));
    };
    if s > cfg.p {
        return Err(AdsError::Validation(format!("s = {s} exceeds p = {}", cfg.p)));
    }
    let block = match cfg.dgp {
        DgpKind::SparseAlpha => gen_beta_dgp2(cfg.n, s + 1, cfg.alignment, rng)?,
        DgpKind::SparseCorrelated => {
            let cor = cfg
                .cor
                .ok_or_else(|| AdsError::Validation("dgp 4 needs a correlation".into()))?;
            gen_beta_dgp1(cfg.n, s + 1, cor, rng)?
        }
        other => {
            return Err(AdsError::Validation(format!(
                "dgp {} is not a sparse process",
                other.number()
            )))
        }
    };
    let mut m = DMatrix::zeros(cfg.n, cfg.p + 1);
    m.view_mut((0, 0), (cfg.n, s + 1)).copy_from(block.matrix());
    CoefficientSet::new(m)
}

/// True coefficients for `cfg` from the given stream.
pub fn gen_beta<R: Rng>(cfg: &DgpConfig, rng: &mut R) -> Result<CoefficientSet> {
    cfg.validate()?;
    let dim = cfg.active_dim();
    match cfg.dgp {
        DgpKind::Correlated => gen_beta_dgp1(cfg.n, dim, cfg.cor.unwrap_or(0.0), rng),
        DgpKind::Alpha => gen_beta_dgp2(cfg.n, dim, cfg.alignment, rng),
        DgpKind::SparseAlpha | DgpKind::SparseCorrelated => gen_beta_sparse(cfg, rng),
    }
}

fn draw_panel(
    cfg: &DgpConfig,
    truth: &CoefficientSet,
    design_purpose: Purpose,
    noise_purpose: Purpose,
) -> Result<PanelDataset> {
    let factor = covariate_factor(cfg.design, cfg.p);
    let mut designs = Vec::with_capacity(cfg.n);
    let mut responses = Vec::with_capacity(cfg.n);
    let mut signals = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut design_rng = stream(cfg.seed, design_purpose, i as u64);
        let mut noise_rng = stream(cfg.seed, noise_purpose, i as u64);
        let x = design_matrix(cfg.t, cfg.p, factor.as_ref(), &mut design_rng);
        let signal = &x * truth.row(i);
        let response = DVector::from_fn(cfg.t, |t, _| {
            let e: f64 = noise_rng.sample(StandardNormal);
            signal[t] + cfg.noise_sd * e
        });
        designs.push(x);
        responses.push(response);
        signals.push(signal);
    }
    PanelDataset::new(designs, responses)?.with_signal(signals)
}

/// A synthetic train/test pair sharing one coefficient draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub train: PanelDataset,
    pub test: PanelDataset,
    pub truth: CoefficientSet,
}

/// Draws the true coefficients, then independent train and test panels of
/// identical shape. Both carry the noiseless signal.
pub fn gen_panel(cfg: &DgpConfig) -> Result<SyntheticPanel> {
    cfg.validate()?;
    let truth = gen_beta(cfg, &mut stream(cfg.seed, Purpose::Beta, 0))?;
    let train = draw_panel(cfg, &truth, Purpose::TrainDesign, Purpose::TrainNoise)?;
    let test = draw_panel(cfg, &truth, Purpose::TestDesign, Purpose::TestNoise)?;
    Ok(SyntheticPanel { train, test, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn toeplitz_entries() {
        let s = toeplitz_covariance(4, 0.5);
        assert_eq!(s[(0, 0)], 1.0);
        assert_eq!(s[(0, 2)], 0.25);
        assert_eq!(s[(3, 1)], 0.25);
        assert_eq!(s[(0, 3)], 0.125);
    }

    #[test]
    fn alpha_beta_examples() {
        let ones = alpha_beta(0.0, 6, OffsetAlignment::Intercept);
        assert!(ones.iter().all(|&v| v == 1.0));
        let b = alpha_beta(1.0, 6, OffsetAlignment::Intercept);
        assert_eq!(b.as_slice(), &[2.0, 2.0, 0.0, 0.0, 2.0, 1.5]);
        let b = alpha_beta(0.5, 4, OffsetAlignment::Intercept);
        assert_eq!(b.as_slice(), &[1.5, 1.25, 0.5, 0.75]);
        let shifted = alpha_beta(1.0, 4, OffsetAlignment::FirstCovariate);
        assert_eq!(shifted.as_slice(), &[1.0, 2.0, 2.0, 0.0]);
        let tail = alpha_offset(1.0, 8);
        assert_abs_diff_eq!(tail[7], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn sparse_alpha_block() {
        let cfg = DgpConfig::new(DgpKind::SparseAlpha, 3, 5, 15).with_s(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = gen_beta(&cfg, &mut rng).unwrap();
        assert_eq!(b.dim(), 16);
        for i in 0..3 {
            let row = b.row(i);
            assert!(row.rows(6, 10).iter().all(|&v| v == 0.0));
            assert!(row.rows(0, 6).iter().filter(|&&v| v != 0.0).count() >= 4);
        }
        // alpha = 1 composition.
        let mut full = DVector::zeros(16);
        full.rows_mut(0, 6).copy_from(&alpha_beta(1.0, 6, OffsetAlignment::Intercept));
        assert_eq!(&full.as_slice()[..6], &[2.0, 2.0, 0.0, 0.0, 2.0, 1.5]);
    }

    #[test]
    fn sparse_correlated_perfect_cor() {
        let cfg = DgpConfig::new(DgpKind::SparseCorrelated, 4, 5, 15)
            .with_s(5)
            .with_cor(1.0);
        let b = gen_beta(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        for i in 1..4 {
            assert_eq!(b.row(i), b.row(0));
        }
        assert!(b.row(0).rows(6, 10).iter().all(|&v| v == 0.0));
        let nonzero_cols = (0..16)
            .filter(|&k| b.matrix().column(k).iter().any(|&v| v != 0.0))
            .count();
        assert_eq!(nonzero_cols, 6);
    }

    #[test]
    fn dgp1_perfect_correlation_shares_rows() {
        let b = gen_beta_dgp1(5, 6, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for i in 1..5 {
            assert_eq!(b.row(i), b.row(0));
        }
        assert!(gen_beta_dgp1(2, 2, 1.5, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        assert!(gen_beta_dgp1(2, 2, -0.1, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn config_validation() {
        let base = DgpConfig::new(DgpKind::Correlated, 5, 10, 5);
        assert!(base.validate().is_err(), "dgp 1 without cor");
        assert!(base.clone().with_cor(0.5).validate().is_ok());
        assert!(base.clone().with_cor(0.5).with_s(2).validate().is_err());
        let sparse = DgpConfig::new(DgpKind::SparseAlpha, 5, 10, 5);
        assert!(sparse.validate().is_err(), "dgp 3 without s");
        assert!(sparse.clone().with_s(6).validate().is_err());
        assert!(sparse.clone().with_s(5).validate().is_ok());
        assert!(DgpConfig::new(DgpKind::Alpha, 5, 10, 5).with_cor(0.1).validate().is_err());
    }

    #[test]
    fn intercept_column_is_ones() {
        let cfg = DgpConfig::new(DgpKind::Alpha, 4, 7, 3).with_design(Design::Toeplitz);
        for x in gen_design(&cfg, &mut ChaCha8Rng::seed_from_u64(9)) {
            assert!(x.column(0).iter().all(|&v| v == 1.0));
            assert_eq!(x.shape(), (7, 4));
        }
    }

    #[test]
    fn zero_noise_response_equals_signal() {
        let cfg = DgpConfig::new(DgpKind::Alpha, 3, 8, 4).with_noise_sd(0.0).with_seed(5);
        let panel = gen_panel(&cfg).unwrap();
        assert_eq!(panel.train.responses(), panel.train.signal().unwrap());
        assert_eq!(panel.test.responses(), panel.test.signal().unwrap());
    }

    #[test]
    fn train_and_test_differ_and_beta_ignores_t() {
        let cfg = DgpConfig::new(DgpKind::Alpha, 3, 8, 4).with_seed(42);
        let a = gen_panel(&cfg).unwrap();
        assert_ne!(a.train.designs(), a.test.designs());
        let mut longer = cfg.clone();
        longer.t = 20;
        let b = gen_panel(&longer).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(gen_panel(&cfg).unwrap(), a);
    }

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(mix_seed(1, 1, 0), mix_seed(1, 2, 0));
        assert_ne!(mix_seed(1, 1, 0), mix_seed(1, 1, 1));
        assert_ne!(mix_seed(1, 1, 0), mix_seed(2, 1, 0));
    }
}
