// Kernel bandwidth and refinement: how the similarity weights change the
// smoothed fit.
//
// Run with `cargo run --release --example weight_refinement`.

use ads_panel::{ads_fit, evaluate, gen_panel, AdsConfig, DgpConfig, DgpKind, GammaRule};

pub fn run_example() -> ads_panel::Result<()> {
    let panel = gen_panel(&DgpConfig::new(DgpKind::Correlated, 30, 15, 5).with_cor(0.5).with_seed(3))?;

    println!("gamma sweep (delta = 0.5)");
    for gamma in [0.0, 0.05, 0.2, 1.0, 1e6] {
        let cfg = AdsConfig {
            gamma: GammaRule::Fixed(gamma),
            ..AdsConfig::ols()
        };
        let fit = ads_fit(&panel.train, &cfg)?;
        println!("  gamma {gamma:>9}: test MSE {:.4}", evaluate(&panel.test, &fit.coefs)?);
    }

    println!("refinement with the median heuristic");
    for rounds in [0, 1, 5] {
        let cfg = AdsConfig {
            refine_iterations: rounds,
            ..AdsConfig::ols()
        };
        let fit = ads_fit(&panel.train, &cfg)?;
        println!(
            "  {rounds} rounds (ran {}, converged {}): gamma {:.4}, test MSE {:.4}",
            fit.refinements,
            fit.refine_converged,
            fit.gamma,
            evaluate(&panel.test, &fit.coefs)?
        );
    }
    Ok(())
}

fn main() -> ads_panel::Result<()> {
    run_example()
}
