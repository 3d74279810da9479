use std::fs;

use ads_panel::io::{predict_long_csv, render_report, write_long_csv, ModelBundle};
use ads_panel::{
    chronological_split, fit_estimator, gen_panel, read_long_csv, AdsConfig, AdsError, DgpConfig,
    DgpKind, EstimatorKind, LongSchema, MseReport, MseRow, ReportFormat,
};

fn schema() -> LongSchema {
    LongSchema::new("y", "id", "t")
}

#[test]
fn long_format_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let panel = gen_panel(&DgpConfig::new(DgpKind::Alpha, 4, 7, 3).with_seed(1)).unwrap();
    let path = dir.path().join("p.csv");
    write_long_csv(&panel.train, &path, &schema()).unwrap();
    let back = read_long_csv(&path, &schema()).unwrap();
    assert_eq!(back.designs(), panel.train.designs());
    assert_eq!(back.responses(), panel.train.responses());
    assert_eq!(back.ids(), panel.train.ids());
    assert_eq!(back.covariate_names(), panel.train.covariate_names());
}

#[test]
fn rows_are_grouped_sorted_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(
        &path,
        "t,id,x,y\n3,b,0.3,3\n1,a,1.0,10\n2,a,2.0,20\n1,b,0.1,1\n2,b,0.2,2\n3,a,3.0,30\n4,b,0.4,4\n",
    )
    .unwrap();
    let data = read_long_csv(&path, &schema()).unwrap();
    assert_eq!(data.ids(), ["b", "a"]);
    assert_eq!(data.n_periods(), 3);
    assert_eq!(data.times()[0], vec![1, 2, 3]);
    assert_eq!(data.response(0).as_slice(), &[1.0, 2.0, 3.0]);
    assert_eq!(data.response(1).as_slice(), &[10.0, 20.0, 30.0]);
    assert_eq!(data.design(1)[(2, 0)], 1.0);
    assert_eq!(data.design(1)[(2, 1)], 3.0);
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("id,t,x\na,1,2\n", "missing"),
        ("id,t,y,x\na,1,2,oops\n", "parse"),
        ("id,t,y,x\na,1,2,1\na,1,3,1\n", "duplicate"),
    ];
    for (k, (body, kind)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("{k}.csv"));
        fs::write(&path, body).unwrap();
        let err = read_long_csv(&path, &schema()).unwrap_err();
        match (*kind, &err) {
            ("missing", AdsError::MissingColumn(c)) => assert_eq!(c, "y"),
            ("parse", AdsError::Parse { column, value, .. }) => {
                assert_eq!(column, "x");
                assert_eq!(value, "oops");
            }
            ("duplicate", AdsError::Validation(_)) => {}
            _ => panic!("{kind}: unexpected {err:?}"),
        }
    }
    let err = read_long_csv(dir.path().join("absent.csv"), &schema()).unwrap_err();
    assert!(matches!(err, AdsError::Io { .. }));
}

#[test]
fn split_keeps_the_last_periods_for_testing() {
    let panel = gen_panel(&DgpConfig::new(DgpKind::Alpha, 2, 10, 1).with_seed(2)).unwrap();
    let (train, test) = chronological_split(&panel.train, 0.2).unwrap();
    assert_eq!((train.n_periods(), test.n_periods()), (8, 2));
    assert_eq!(test.response(1)[0], panel.train.response(1)[8]);
    assert!(chronological_split(&panel.train, 0.05).is_err());
    assert!(chronological_split(&panel.train, 1.0).is_err());
}

#[test]
fn saved_models_predict_like_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let panel = gen_panel(&DgpConfig::new(DgpKind::Alpha, 5, 12, 2).with_seed(3)).unwrap();
    let path = dir.path().join("p.csv");
    write_long_csv(&panel.train, &path, &schema()).unwrap();
    let data = read_long_csv(&path, &schema()).unwrap();
    let (coefs, weights) = fit_estimator(&data, EstimatorKind::AdsOls, &AdsConfig::ols()).unwrap();
    let bundle = ModelBundle {
        estimator: EstimatorKind::AdsOls,
        schema: schema(),
        ids: data.ids().to_vec(),
        covariate_names: data.covariate_names().to_vec(),
        coefs: coefs.clone(),
        weights,
        extra: vec![("note".into(), "x".into())],
    };
    bundle.save(dir.path().join("m")).unwrap();
    let loaded = ModelBundle::load(dir.path().join("m")).unwrap();
    assert_eq!(loaded, bundle);

    let preds = predict_long_csv(&loaded, &path).unwrap();
    let fitted = ads_panel::predict(&data, &coefs).unwrap();
    assert_eq!(preds.len(), 5 * 12);
    for (k, row) in preds.iter().enumerate() {
        let (i, t) = (k / 12, k % 12);
        assert_eq!(row.id, data.ids()[i]);
        assert!((row.prediction - fitted[i][t]).abs() < 1e-12);
    }

    fs::write(dir.path().join("new.csv"), "id,t,x1,x2\n0,1,1,1\nzz,1,1,1\nyy,2,0,0\n").unwrap();
    match predict_long_csv(&loaded, dir.path().join("new.csv")) {
        Err(AdsError::UnknownIndividuals(ids)) => assert_eq!(ids, ["yy", "zz"]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn reports_render_in_both_formats() {
    let report = MseReport {
        rows: vec![MseRow {
            dgp: 1,
            design: ads_panel::Design::Iid,
            n: 50,
            t: 10,
            p: 5,
            s: None,
            cor: Some(0.3),
            estimator: EstimatorKind::AdsOls,
            mse: 0.123456,
            mc_stderr: 0.01,
            reps: 100,
        }],
        failures: Vec::new(),
    };
    assert_eq!(
        render_report(&report, ReportFormat::Csv),
        "dgp,design,n,t,cor,estimator,mse,mc_stderr,reps\n1,iid,50,10,0.3,ads-ols,0.1235,0.0100,100\n"
    );
    let md = render_report(&report, ReportFormat::Markdown);
    assert!(md.lines().nth(2).unwrap().contains("| ads-ols | 0.1235 |"));
}
