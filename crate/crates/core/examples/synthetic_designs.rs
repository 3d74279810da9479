// The four synthetic processes and the two covariate designs.
//
// Run with `cargo run --example synthetic_designs`.

use ads_panel::dgp::toeplitz_covariance;
use ads_panel::{gen_panel, DgpConfig, DgpKind, Design};

pub fn run_example() -> ads_panel::Result<()> {
    println!("Toeplitz covariance, p = 4:\n{:.4}", toeplitz_covariance(4, 0.5));

    let cells = [
        DgpConfig::new(DgpKind::Correlated, 4, 10, 3).with_cor(0.7),
        DgpConfig::new(DgpKind::Alpha, 4, 10, 3),
        DgpConfig::new(DgpKind::SparseAlpha, 4, 10, 8).with_s(3),
        DgpConfig::new(DgpKind::SparseCorrelated, 4, 10, 8)
            .with_s(3)
            .with_cor(1.0)
            .with_design(Design::Toeplitz),
    ];
    for cfg in cells {
        let cfg = cfg.with_seed(2);
        let panel = gen_panel(&cfg)?;
        println!("dgp {} ({} design), true coefficients:", cfg.dgp.number(), cfg.design);
        for i in 0..panel.truth.n_individuals() {
            let row: Vec<String> = panel.truth.row(i).iter().map(|b| format!("{b:6.3}")).collect();
            println!("  {}", row.join(" "));
        }
    }
    Ok(())
}

fn main() -> ads_panel::Result<()> {
    run_example()
}
