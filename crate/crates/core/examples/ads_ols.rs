// Individual OLS against adaptive discrete smoothing on a heterogeneous
// linear panel with 50 individuals and 10 periods each.
//
// Run with `cargo run --release --example ads_ols`.

use ads_panel::{ads_fit, evaluate, gen_panel, naive_fit, AdsConfig, DgpConfig, DgpKind};
use ads_panel::{fit_estimator, EstimatorKind};

pub fn run_example() -> ads_panel::Result<()> {
    let cfg = DgpConfig::new(DgpKind::Alpha, 50, 10, 5).with_seed(11);
    let panel = gen_panel(&cfg)?;
    let ads = AdsConfig::ols();

    let naive = naive_fit(&panel.train);
    let (ols, _) = fit_estimator(&panel.train, EstimatorKind::Ols, &ads)?;
    let fit = ads_fit(&panel.train, &ads)?;

    println!("gamma (median heuristic) = {:.4}", fit.gamma);
    let w = &fit.weights;
    let mean_pool = (0..w.n_individuals()).map(|i| w.row_sum(i)).sum::<f64>() / w.n_individuals() as f64;
    println!("mean soft-pooled size    = {mean_pool:.2} individuals");
    println!("out-of-sample MSE");
    println!("  naive   {:.4}", evaluate(&panel.test, &naive)?);
    println!("  ols     {:.4}", evaluate(&panel.test, &ols)?);
    println!("  ads-ols {:.4}", evaluate(&panel.test, &fit.coefs)?);
    println!("  oracle  {:.4}", evaluate(&panel.test, &panel.truth)?);
    Ok(())
}

fn main() -> ads_panel::Result<()> {
    run_example()
}
