// Long-format CSV round trip: export a synthetic panel, read it back,
// split it in time, fit, save the model and score new rows.
//
// Run with `cargo run --release --example csv_workflow`.

use ads_panel::io::{predict_long_csv, write_long_csv, ModelBundle};
use ads_panel::{
    chronological_split, evaluate, fit_estimator, gen_panel, read_long_csv, AdsConfig, DgpConfig,
    DgpKind, EstimatorKind, LongSchema,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("ads-csv-workflow-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let schema = LongSchema::new("sales", "store", "week");

    let panel = gen_panel(&DgpConfig::new(DgpKind::Alpha, 12, 25, 3).with_seed(9))?;
    let path = dir.join("panel.csv");
    write_long_csv(&panel.train, &path, &schema)?;

    let data = read_long_csv(&path, &schema)?;
    let (train, test) = chronological_split(&data, 0.2)?;
    println!(
        "{} individuals, {} train / {} test periods",
        data.n_individuals(),
        train.n_periods(),
        test.n_periods()
    );
    let cfg = AdsConfig::ols();
    for kind in [EstimatorKind::Naive, EstimatorKind::Ols, EstimatorKind::AdsOls] {
        let (coefs, _) = fit_estimator(&train, kind, &cfg)?;
        println!("{:<8} test MSE {:.4}", kind.as_str(), evaluate(&test, &coefs)?);
    }

    let (coefs, weights) = fit_estimator(&train, EstimatorKind::AdsOls, &cfg)?;
    let bundle = ModelBundle {
        estimator: EstimatorKind::AdsOls,
        schema: schema.clone(),
        ids: train.ids().to_vec(),
        covariate_names: train.covariate_names().to_vec(),
        coefs,
        weights,
        extra: Vec::new(),
    };
    let model_dir = dir.join("model");
    bundle.save(&model_dir)?;
    let loaded = ModelBundle::load(&model_dir)?;
    let scored = predict_long_csv(&loaded, &path)?;
    for row in scored.iter().take(3) {
        println!("{} @ {}: {:.4}", row.id, row.time, row.prediction);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
