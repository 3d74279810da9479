//! Adaptive discrete smoothing for heterogeneous panel data.
//!
//! Each individual in a panel gets its own linear model. Fitting every
//! individual on its own `T` observations is noisy when `T` is small, while
//! pooling everyone ignores heterogeneity. Adaptive discrete smoothing sits
//! in between: a first-stage fit per individual yields coefficient vectors,
//! their pairwise distances define similarity weights, and every individual
//! is re-estimated on the whole panel with other individuals' observations
//! down-weighted by dissimilarity (a soft clustering).
//!
//! Both least squares and the Lasso are supported as backends, together
//! with the synthetic designs and Monte Carlo protocol used to benchmark the
//! estimator, and CSV ingestion for long-format panel data.
//!
//! ```no_run
//! use ads_panel::{ads_fit, evaluate, gen_panel, AdsConfig, DgpConfig, DgpKind};
//!
//! let panel = gen_panel(&DgpConfig::new(DgpKind::Alpha, 50, 10, 5).with_seed(7))?;
//! let fit = ads_fit(&panel.train, &AdsConfig::ols())?;
//! println!("out-of-sample MSE: {:.4}", evaluate(&panel.test, &fit.coefs)?);
//! # Ok::<(), ads_panel::AdsError>(())
//! ```

pub mod ads;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod io;
pub mod panel;
pub mod sim;

pub use ads::{
    ads_fit, build_weight_matrix, coef_distance, fit_estimator, naive_fit, resolve_gamma, AdsConfig,
    AdsFit, GammaRule,
};
pub use dgp::{gen_panel, DgpConfig, DgpKind, OffsetAlignment, SyntheticPanel};
pub use error::{AdsError, Result};
pub use estimators::{
    fit_individual, plugin_lambda, soft_threshold, weighted_lasso, weighted_ols, BaseEstimator,
    LassoConfig, LassoFit, NoiseEstimate, PenaltyRule, WeightedSample,
};
pub use io::{chronological_split, read_long_csv, write_report, LongSchema, ReportFormat};
pub use panel::{
    evaluate, mse_against, predict, CoefficientSet, Design, EstimatorKind, MseReport, MseRow,
    PanelDataset, WeightMatrix,
};
pub use sim::{paper_table, run_cell, run_suite, PaperTable, SimConfig};
