// A small Monte Carlo study: one simulation cell, then a few cells from a
// benchmark table at reduced repetitions.
//
// Run with `cargo run --release --example monte_carlo`.

use ads_panel::io::render_report;
use ads_panel::{
    paper_table, run_cell, run_suite, AdsConfig, DgpConfig, DgpKind, EstimatorKind, PaperTable,
    ReportFormat,
};

pub fn run_example() -> ads_panel::Result<()> {
    let cell = DgpConfig::new(DgpKind::Correlated, 20, 10, 5).with_cor(1.0);
    let estimators = [EstimatorKind::Naive, EstimatorKind::Ols, EstimatorKind::AdsOls];
    let report = run_cell(&cell, &estimators, &AdsConfig::ols(), 20, 42)?;
    print!("{}", render_report(&report, ReportFormat::Markdown));

    let mut table = paper_table(PaperTable::LinearS2);
    println!("\n{} has {} cells; running the first four", PaperTable::LinearS2, table.cells.len());
    table.cells.truncate(4);
    table.reps = 10;
    table.master_seed = 42;
    print!("{}", render_report(&run_suite(&table)?, ReportFormat::Csv));
    Ok(())
}

fn main() -> ads_panel::Result<()> {
    run_example()
}
