// Weighted least squares and the weighted Lasso on one small sample.
//
// Run with `cargo run --example weighted_estimators`.

use ads_panel::estimators::lambda_max;
use ads_panel::{weighted_lasso, weighted_ols, LassoConfig, WeightedSample};
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> ads_panel::Result<()> {
    // Eight rows, intercept plus three covariates. The last covariate is noise.
    let x = DMatrix::from_row_slice(
        8,
        4,
        &[
            1.0, 0.5, -1.2, 0.3, //
            1.0, -0.7, 0.4, -1.1, //
            1.0, 1.9, 0.8, 0.2, //
            1.0, -1.4, -0.3, 0.9, //
            1.0, 0.2, 1.6, -0.4, //
            1.0, 1.1, -0.9, 1.3, //
            1.0, -0.3, 0.1, -0.8, //
            1.0, 0.8, 1.2, 0.6,
        ],
    );
    let beta = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.0]);
    let y = &x * &beta + DVector::from_vec(vec![0.1, -0.2, 0.05, 0.0, 0.15, -0.1, 0.2, -0.05]);
    // The second half of the rows counts double.
    let w = DVector::from_fn(8, |k, _| if k < 4 { 1.0 } else { 2.0 });
    let sample = WeightedSample::new(x, y, w)?;

    let ols = weighted_ols(&sample)?;
    println!("weighted OLS      {:?}", rounded(&ols));

    let cfg = LassoConfig::default();
    let top = lambda_max(&sample);
    println!("lambda_max = {top:.4}");
    for frac in [0.0, 0.05, 0.2, 0.5, 1.0] {
        let fit = weighted_lasso(&sample, &cfg, frac * top)?;
        println!(
            "lambda = {:>6.4}   {:?}   sweeps = {}",
            frac * top,
            rounded(&fit.coefs),
            fit.sweeps
        );
    }
    Ok(())
}

fn rounded(v: &DVector<f64>) -> Vec<f64> {
    v.iter().map(|b| (b * 1e4).round() / 1e4).collect()
}

fn main() -> ads_panel::Result<()> {
    run_example()
}
