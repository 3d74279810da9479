// Sparse high-dimensional panel: per-individual Lasso with fewer periods
// than coefficients, then the smoothed Lasso.
//
// Run with `cargo run --release --example ads_lasso`.

use ads_panel::ads::{ads_fit_from_first_stage, first_stage};
use ads_panel::{evaluate, gen_panel, AdsConfig, DgpConfig, DgpKind, GammaRule};

pub fn run_example() -> ads_panel::Result<()> {
    let cfg = DgpConfig::new(DgpKind::SparseAlpha, 30, 10, 15)
        .with_s(5)
        .with_seed(5);
    let panel = gen_panel(&cfg)?;
    let ads = AdsConfig::lasso();

    let (first, first_ok) = first_stage(&panel.train, &ads)?;
    let selected = (0..first.n_individuals())
        .map(|i| first.row(i).iter().skip(1).filter(|b| **b != 0.0).count())
        .sum::<usize>() as f64
        / first.n_individuals() as f64;
    println!("first stage: {selected:.2} covariates selected on average");
    println!("lasso      MSE {:.4}", evaluate(&panel.test, &first)?);

    let fit = ads_fit_from_first_stage(&panel.train, first.clone(), first_ok, &ads)?;
    println!(
        "ads-lasso  MSE {:.4}   (gamma {:.4}, solver converged: {})",
        evaluate(&panel.test, &fit.coefs)?,
        fit.gamma,
        fit.solver_converged
    );

    // A flat kernel pools everyone at weight delta.
    let flat = AdsConfig {
        gamma: GammaRule::Fixed(0.0),
        ..ads
    };
    let fit = ads_fit_from_first_stage(&panel.train, first, first_ok, &flat)?;
    println!("flat kernel MSE {:.4}", evaluate(&panel.test, &fit.coefs)?);
    Ok(())
}

fn main() -> ads_panel::Result<()> {
    run_example()
}
