//! Long-format panel CSV ingestion, chronological splitting, report
//! rendering and the on-disk model bundle.
//!
//! Long format means one row per (individual, period): an id column, an
//! integer time column, the response, and every other column a numeric
//! covariate in header order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{AdsError, Result};
use crate::panel::{CoefficientSet, EstimatorKind, MseReport, PanelDataset, WeightMatrix};

/// Largest tolerated ratio between the longest and shortest individual
/// series before truncation to a balanced panel is refused.
pub const MAX_IMBALANCE_RATIO: f64 = 10.0;

/// Column roles in a long-format file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongSchema {
    pub y: String,
    pub id: String,
    pub time: String,
}

impl LongSchema {
    pub fn new(y: impl Into<String>, id: impl Into<String>, time: impl Into<String>) -> Self {
        Self {
            y: y.into(),
            id: id.into(),
            time: time.into(),
        }
    }
}

/// One parsed observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LongPanelRow {
    pub individual_id: String,
    pub time_index: i64,
    pub y: Option<f64>,
    pub covariates: Vec<f64>,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| AdsError::MissingColumn(name.to_string()))
}

fn parse_num<T: FromStr>(record: &csv::StringRecord, idx: usize, column: &str) -> Result<T> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<T>().map_err(|_| AdsError::Parse {
        line: record.position().map_or(0, |p| p.line()),
        column: column.to_string(),
        value: raw.to_string(),
    })
}

fn open_reader(path: &Path) -> Result<(csv::Reader<fs::File>, csv::StringRecord)> {
    let file = fs::File::open(path).map_err(|e| AdsError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| AdsError::csv(path, e))?.clone();
    Ok((reader, headers))
}

/// Reads rows whose covariates are the named columns, in that order. The
/// response column is optional here.
fn read_rows(
    path: &Path,
    id: &str,
    time: &str,
    y: Option<&str>,
    covariates: &[String],
) -> Result<Vec<LongPanelRow>> {
    let (mut reader, headers) = open_reader(path)?;
    let id_idx = column_index(&headers, id)?;
    let time_idx = column_index(&headers, time)?;
    let y_idx = y.map(|name| column_index(&headers, name)).transpose()?;
    let cov_idx = covariates
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| AdsError::csv(path, e))?;
        let individual_id = record.get(id_idx).unwrap_or("").to_string();
        let time_index = parse_num::<i64>(&record, time_idx, time)?;
        let y = match (y_idx, y) {
            (Some(idx), Some(name)) => Some(parse_num::<f64>(&record, idx, name)?),
            _ => None,
        };
        let covariates = cov_idx
            .iter()
            .zip(covariates)
            .map(|(&idx, name)| parse_num::<f64>(&record, idx, name))
            .collect::<Result<Vec<_>>>()?;
        if y.is_some_and(|v| !v.is_finite()) || covariates.iter().any(|v| !v.is_finite()) {
            return Err(AdsError::Validation(format!(
                "non-finite value at line {}",
                record.position().map_or(0, |p| p.line())
            )));
        }
        rows.push(LongPanelRow {
            individual_id,
            time_index,
            y,
            covariates,
        });
    }
    Ok(rows)
}

/// Reads a long-format panel into a balanced dataset with an intercept
/// column prepended.
///
/// Individuals appear in order of first appearance; each individual's rows
/// are sorted by time and truncated to the shortest series length.
pub fn read_long_csv(path: impl AsRef<Path>, schema: &LongSchema) -> Result<PanelDataset> {
    let path = path.as_ref();
    let (_, headers) = open_reader(path)?;
    for name in [&schema.y, &schema.id, &schema.time] {
        column_index(&headers, name)?;
    }
    let covariate_names: Vec<String> = headers
        .iter()
        .filter(|h| *h != schema.y && *h != schema.id && *h != schema.time)
        .map(str::to_string)
        .collect();
    let rows = read_rows(path, &schema.id, &schema.time, Some(&schema.y), &covariate_names)?;
    if rows.is_empty() {
        return Err(AdsError::Validation(format!("{} has no data rows", path.display())));
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<LongPanelRow>> = HashMap::new();
    for row in rows {
        let entry = groups.entry(row.individual_id.clone()).or_insert_with(|| {
            order.push(row.individual_id.clone());
            Vec::new()
        });
        entry.push(row);
    }
    for id in &order {
        let g = groups.get_mut(id).expect("grouped above");
        g.sort_by_key(|r| r.time_index);
        if let Some(w) = g.windows(2).find(|w| w[0].time_index == w[1].time_index) {
            return Err(AdsError::Validation(format!(
                "duplicate observation for individual `{id}` at time {}",
                w[0].time_index
            )));
        }
    }
    let t_min = order.iter().map(|id| groups[id].len()).min().expect("non-empty");
    let t_max = order.iter().map(|id| groups[id].len()).max().expect("non-empty");
    if t_max as f64 / t_min as f64 > MAX_IMBALANCE_RATIO {
        return Err(AdsError::Validation(format!(
            "panel too unbalanced: series lengths range from {t_min} to {t_max}"
        )));
    }

    let p = covariate_names.len();
    let mut designs = Vec::with_capacity(order.len());
    let mut responses = Vec::with_capacity(order.len());
    let mut times = Vec::with_capacity(order.len());
    for id in &order {
        let g = &groups[id][..t_min];
        designs.push(DMatrix::from_fn(t_min, p + 1, |t, k| {
            if k == 0 {
                1.0
            } else {
                g[t].covariates[k - 1]
            }
        }));
        responses.push(DVector::from_iterator(t_min, g.iter().map(|r| r.y.expect("y read"))));
        times.push(g.iter().map(|r| r.time_index).collect());
    }
    PanelDataset::new(designs, responses)?
        .with_ids(order)?
        .with_times(times)?
        .with_covariate_names(covariate_names)
}

/// Writes `data` in long format: id, time, y, then the covariates.
pub fn write_long_csv(data: &PanelDataset, path: impl AsRef<Path>, schema: &LongSchema) -> Result<()> {
    let path = path.as_ref();
    let mut out = csv::Writer::from_path(path).map_err(|e| AdsError::csv(path, e))?;
    let mut header = vec![schema.id.clone(), schema.time.clone(), schema.y.clone()];
    header.extend(data.covariate_names().iter().cloned());
    out.write_record(&header).map_err(|e| AdsError::csv(path, e))?;
    for i in 0..data.n_individuals() {
        let x = data.design(i);
        for t in 0..data.n_periods() {
            let mut rec = vec![
                data.ids()[i].clone(),
                data.times()[i][t].to_string(),
                data.response(i)[t].to_string(),
            ];
            rec.extend((1..x.ncols()).map(|k| x[(t, k)].to_string()));
            out.write_record(&rec).map_err(|e| AdsError::csv(path, e))?;
        }
    }
    out.flush().map_err(|e| AdsError::io(path, e))
}

/// Per individual, the last `floor(T * test_fraction)` periods become the
/// test panel and the earlier ones the training panel.
pub fn chronological_split(
    data: &PanelDataset,
    test_fraction: f64,
) -> Result<(PanelDataset, PanelDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AdsError::Validation(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let t = data.n_periods();
    let test_t = (t as f64 * test_fraction).floor() as usize;
    if test_t == 0 || test_t >= t {
        return Err(AdsError::Validation(format!(
            "split of T = {t} at fraction {test_fraction} leaves {test_t} test and {} train periods",
            t.saturating_sub(test_t)
        )));
    }
    Ok((data.slice_periods(0, t - test_t)?, data.slice_periods(t - test_t, test_t)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = AdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(AdsError::Validation(format!("unknown report format `{other}`"))),
        }
    }
}

pub const REPORT_HEADER: [&str; 9] = [
    "dgp",
    "design",
    "n",
    "t",
    "cor",
    "estimator",
    "mse",
    "mc_stderr",
    "reps",
];

fn report_cells(report: &MseReport) -> Vec<[String; 9]> {
    report
        .rows
        .iter()
        .map(|r| {
            [
                r.dgp.to_string(),
                r.design.to_string(),
                r.n.to_string(),
                r.t.to_string(),
                r.cor.map(|c| c.to_string()).unwrap_or_default(),
                r.estimator.to_string(),
                format!("{:.4}", r.mse),
                format!("{:.4}", r.mc_stderr),
                r.reps.to_string(),
            ]
        })
        .collect()
}

/// Renders the report; MSE and its standard error use four decimals.
pub fn render_report(report: &MseReport, format: ReportFormat) -> String {
    let mut s = String::new();
    let cells = report_cells(report);
    match format {
        ReportFormat::Csv => {
            s.push_str(&REPORT_HEADER.join(","));
            s.push('\n');
            for row in cells {
                s.push_str(&row.join(","));
                s.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(s, "| {} |", REPORT_HEADER.join(" | "));
            let _ = writeln!(s, "|{}", "---|".repeat(REPORT_HEADER.len()));
            for row in cells {
                let _ = writeln!(s, "| {} |", row.join(" | "));
            }
        }
    }
    s
}

pub fn write_report(report: &MseReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_report(report, format)).map_err(|e| AdsError::io(path, e))
}

/// A fitted model on disk: a directory holding `coefs.csv`, `weights.csv`
/// and `meta.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub estimator: EstimatorKind,
    pub schema: LongSchema,
    pub ids: Vec<String>,
    pub covariate_names: Vec<String>,
    pub coefs: CoefficientSet,
    pub weights: WeightMatrix,
    /// Extra key/value pairs persisted verbatim in `meta.csv`.
    pub extra: Vec<(String, String)>,
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AdsError::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| AdsError::csv(path, e))?;
    }
    w.flush().map_err(|e| AdsError::io(path, e))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let (mut reader, headers) = open_reader(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| AdsError::csv(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((headers.iter().map(str::to_string).collect(), rows))
}

fn parse_cell(path: &Path, line: usize, column: &str, raw: &str) -> Result<f64> {
    raw.parse().map_err(|_| AdsError::Parse {
        line: line as u64,
        column: format!("{}:{column}", path.display()),
        value: raw.to_string(),
    })
}

impl ModelBundle {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| AdsError::io(dir, e))?;

        let mut coef_rows = Vec::with_capacity(self.ids.len() + 1);
        let mut header = vec!["id".to_string(), "intercept".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        coef_rows.push(header);
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.coefs.row(i).iter().map(f64::to_string));
            coef_rows.push(row);
        }
        write_csv(&dir.join("coefs.csv"), &coef_rows)?;

        let mut weight_rows = Vec::with_capacity(self.ids.len() + 1);
        let mut header = vec!["id".to_string()];
        header.extend(self.ids.iter().cloned());
        weight_rows.push(header);
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend((0..self.ids.len()).map(|j| self.weights.get(i, j).to_string()));
            weight_rows.push(row);
        }
        write_csv(&dir.join("weights.csv"), &weight_rows)?;

        let mut meta = vec![
            vec!["key".to_string(), "value".to_string()],
            vec!["estimator".into(), self.estimator.to_string()],
            vec!["y_column".into(), self.schema.y.clone()],
            vec!["id_column".into(), self.schema.id.clone()],
            vec!["time_column".into(), self.schema.time.clone()],
            vec!["delta".into(), self.weights.delta().to_string()],
        ];
        meta.extend(self.extra.iter().map(|(k, v)| vec![k.clone(), v.clone()]));
        write_csv(&dir.join("meta.csv"), &meta)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join("meta.csv");
        let (_, meta_rows) = read_csv(&meta_path)?;
        let meta: HashMap<String, String> = meta_rows
            .iter()
            .filter(|r| r.len() >= 2)
            .map(|r| (r[0].clone(), r[1].clone()))
            .collect();
        let get = |k: &str| -> Result<String> {
            meta.get(k)
                .cloned()
                .ok_or_else(|| AdsError::MissingColumn(format!("{}:{k}", meta_path.display())))
        };
        let estimator: EstimatorKind = get("estimator")?.parse()?;
        let schema = LongSchema::new(get("y_column")?, get("id_column")?, get("time_column")?);
        let delta = parse_cell(&meta_path, 0, "delta", &get("delta")?)?;
        let reserved = ["estimator", "y_column", "id_column", "time_column", "delta"];
        let extra = meta_rows
            .iter()
            .filter(|r| r.len() >= 2 && !reserved.contains(&r[0].as_str()))
            .map(|r| (r[0].clone(), r[1].clone()))
            .collect();

        let coef_path = dir.join("coefs.csv");
        let (header, rows) = read_csv(&coef_path)?;
        if header.len() < 2 {
            return Err(AdsError::MissingColumn("intercept".into()));
        }
        let covariate_names = header[2..].to_vec();
        let dim = header.len() - 1;
        let ids: Vec<String> = rows.iter().map(|r| r[0].clone()).collect();
        let mut m = DMatrix::zeros(rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            for k in 0..dim {
                m[(i, k)] = parse_cell(&coef_path, i + 2, &header[k + 1], &r[k + 1])?;
            }
        }
        let coefs = CoefficientSet::new(m)?;

        let w_path = dir.join("weights.csv");
        let (_, w_rows) = read_csv(&w_path)?;
        let n = ids.len();
        if w_rows.len() != n || w_rows.iter().any(|r| r.len() != n + 1) {
            return Err(AdsError::Dimension(format!(
                "{} does not hold a {n}x{n} matrix",
                w_path.display()
            )));
        }
        let mut w = DMatrix::zeros(n, n);
        for (i, r) in w_rows.iter().enumerate() {
            for j in 0..n {
                w[(i, j)] = parse_cell(&w_path, i + 2, &ids[j], &r[j + 1])?;
            }
        }
        let weights = WeightMatrix::new(w, delta)?;

        Ok(Self {
            estimator,
            schema,
            ids,
            covariate_names,
            coefs,
            weights,
            extra,
        })
    }
}

/// One prediction keyed by (id, time).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    pub time: i64,
    pub prediction: f64,
}

/// Scores every row of a long-format file with the bundle's per-individual
/// coefficients. Rows need not be balanced. Unknown ids are reported
/// together in one error.
pub fn predict_long_csv(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let rows = read_rows(
        path,
        &bundle.schema.id,
        &bundle.schema.time,
        None,
        &bundle.covariate_names,
    )?;
    let index: HashMap<&str, usize> = bundle
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut unknown: Vec<String> = rows
        .iter()
        .filter(|r| !index.contains_key(r.individual_id.as_str()))
        .map(|r| r.individual_id.clone())
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(AdsError::UnknownIndividuals(unknown));
    }
    Ok(rows
        .into_iter()
        .map(|r| {
            let beta = bundle.coefs.row(index[r.individual_id.as_str()]);
            let prediction =
                beta[0] + r.covariates.iter().zip(beta.iter().skip(1)).map(|(x, b)| x * b).sum::<f64>();
            PredictionRow {
                id: r.individual_id,
                time: r.time_index,
                prediction,
            }
        })
        .collect())
}

pub fn write_predictions(
    rows: &[PredictionRow],
    schema: &LongSchema,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let mut out = vec![vec![schema.id.clone(), schema.time.clone(), "prediction".to_string()]];
    out.extend(
        rows.iter()
            .map(|r| vec![r.id.clone(), r.time.to_string(), r.prediction.to_string()]),
    );
    write_csv(&path, &out)
}
