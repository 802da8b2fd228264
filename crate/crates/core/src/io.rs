//! File formats: datasets, observed-entry triplets, dense matrices, models,
//! configuration and diagnostics. Numbers in text tables are written with
//! 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::admm::FitDiagnostics;
use crate::completion::{CompletionModel, ObservedMatrix};
use crate::error::{AssistError, Result};
use crate::matrix::DenseMatrix;
use crate::types::{Dataset, Hyperparams, SignSeriesModel};

pub const DATASET_MAGIC: &str = "#assist-dataset v1";
pub const TRIPLETS_MAGIC: &str = "#assist-triplets v1";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, message: impl Into<String>) -> AssistError {
    AssistError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads `key=value` fields of a magic header line in the given order.
fn parse_header(line: &str, magic: &str, keys: &[&str]) -> Result<Vec<usize>> {
    let rest = line
        .strip_prefix(magic)
        .ok_or_else(|| parse_err(1, format!("expected header starting with '{magic}'")))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    if fields.len() != keys.len() {
        return Err(parse_err(1, format!("expected header fields {}", keys.join(", "))));
    }
    fields
        .iter()
        .zip(keys)
        .map(|(field, key)| {
            field
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(1, format!("malformed header field '{field}', expected {key}=<count>")))
        })
        .collect()
}

fn parse_row(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(',')
        .enumerate()
        .map(|(c, field)| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("column {}: cannot parse '{}'", c + 1, field.trim())))
        })
        .collect()
}

/// Non-blank lines after the header, with 1-based line numbers.
fn body_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn dataset_to_string(data: &Dataset) -> String {
    let (d1, d2, p) = data.dims();
    let mut out = format!("{DATASET_MAGIC} d1={d1} d2={d2} p={p} n={}\n", data.len());
    for (s, y) in data.samples().iter().zip(data.raw_responses()) {
        let fields: Vec<String> = s
            .predictor
            .as_slice()
            .iter()
            .chain(&s.covariates)
            .chain(std::iter::once(&y))
            .map(|v| num(*v))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let header = text
        .lines()
        .next()
        .filter(|l| !l.trim().is_empty())
        .ok_or_else(|| AssistError::InvalidInput("empty dataset file".into()))?;
    let dims = parse_header(header.trim(), DATASET_MAGIC, &["d1", "d2", "p", "n"])?;
    let (d1, d2, p, n) = (dims[0], dims[1], dims[2], dims[3]);
    let width = d1 * d2 + p + 1;
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for (line_no, line) in body_lines(text) {
        let row = parse_row(line, line_no)?;
        if row.len() != width {
            return Err(parse_err(
                line_no,
                format!("expected {width} columns (d1*d2 + p + 1), found {}", row.len()),
            ));
        }
        xs.push(DenseMatrix::new(d1, d2, row[..d1 * d2].to_vec())?);
        ws.push(row[d1 * d2..d1 * d2 + p].to_vec());
        ys.push(row[width - 1]);
    }
    if ys.is_empty() {
        return Err(AssistError::InvalidInput("empty dataset: no sample rows".into()));
    }
    if ys.len() != n {
        return Err(AssistError::mismatch(format!("n={n} sample rows"), ys.len()));
    }
    Dataset::from_raw(xs, ws, &ys)
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_to_string(data))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_str(&fs::read_to_string(path)?)
}

/// Dimensions and 0-based `(i, j, y)` entries of a triplet file.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplets {
    pub d1: usize,
    pub d2: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn observed(&self) -> Result<ObservedMatrix> {
        ObservedMatrix::from_raw(self.d1, self.d2, &self.entries)
    }
}

pub fn triplets_to_string(t: &Triplets) -> String {
    let mut out = format!("{TRIPLETS_MAGIC} d1={} d2={}\n", t.d1, t.d2);
    for &(i, j, y) in &t.entries {
        let _ = writeln!(out, "{i},{j},{}", num(y));
    }
    out
}

pub fn triplets_from_str(text: &str) -> Result<Triplets> {
    let header = text
        .lines()
        .next()
        .filter(|l| !l.trim().is_empty())
        .ok_or_else(|| AssistError::InvalidInput("empty triplet file".into()))?;
    let dims = parse_header(header.trim(), TRIPLETS_MAGIC, &["d1", "d2"])?;
    let (d1, d2) = (dims[0], dims[1]);
    let mut entries = Vec::new();
    for (line_no, line) in body_lines(text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(
                line_no,
                format!("expected 3 columns (i,j,y), found {}", fields.len()),
            ));
        }
        let index = |s: &str, bound: usize, name: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| parse_err(line_no, format!("cannot parse {name} index '{s}'")))?;
            if v >= bound {
                return Err(parse_err(
                    line_no,
                    format!("{name}={v} out of range for dimension {bound}"),
                ));
            }
            Ok(v)
        };
        let i = index(fields[0], d1, "i")?;
        let j = index(fields[1], d2, "j")?;
        let y: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, format!("cannot parse value '{}'", fields[2])))?;
        if !y.is_finite() {
            return Err(parse_err(line_no, "non-finite value"));
        }
        entries.push((i, j, y));
    }
    Ok(Triplets { d1, d2, entries })
}

pub fn save_triplets(t: &Triplets, path: &Path) -> Result<()> {
    fs::write(path, triplets_to_string(t))?;
    Ok(())
}

pub fn load_triplets(path: &Path) -> Result<Triplets> {
    triplets_from_str(&fs::read_to_string(path)?)
}

/// Headerless CSV, one matrix row per line.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let fields: Vec<String> = m.row(i).iter().map(|v| num(*v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(line, i + 1)?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(parse_err(
                    i + 1,
                    format!("expected {first} columns, found {}", row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(AssistError::InvalidInput("empty matrix file".into()));
    }
    DenseMatrix::from_rows(&rows)
}

/// Either kind of fitted model.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Regression(SignSeriesModel),
    Completion(CompletionModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Regression(_) => "regression",
            Model::Completion(_) => "completion",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema_version: u32,
    kind: String,
    model: Value,
}

fn check_regression(m: &SignSeriesModel) -> Result<()> {
    let (d1, d2, p) = m.dims;
    if m.classifiers.len() != m.grid.len() {
        return Err(AssistError::Format(format!(
            "expected {} classifier records, found {}",
            m.grid.len(),
            m.classifiers.len()
        )));
    }
    if m.center.shape() != (d1, d2) {
        return Err(AssistError::Format("center shape disagrees with model dims".into()));
    }
    for (k, tf) in m.classifiers.iter().enumerate() {
        let r = tf.u.cols();
        if tf.u.rows() != d1 || tf.v.shape() != (d2, r) || tf.covariate_coeffs.len() != p {
            return Err(AssistError::Format(format!(
                "classifier {k} has inconsistent factor shapes"
            )));
        }
    }
    Ok(())
}

fn check_completion(m: &CompletionModel) -> Result<()> {
    let (d1, d2) = m.dims;
    if m.sign_factors.len() != m.grid.len() {
        return Err(AssistError::Format(format!(
            "expected {} sign factor records, found {}",
            m.grid.len(),
            m.sign_factors.len()
        )));
    }
    for (k, f) in m.sign_factors.iter().enumerate() {
        let r = f.u.cols();
        if f.u.rows() != d1 || f.v.shape() != (d2, r) {
            return Err(AssistError::Format(format!("sign factor {k} has inconsistent shapes")));
        }
    }
    Ok(())
}

pub fn model_to_json(model: &Model) -> Result<String> {
    let body = match model {
        Model::Regression(m) => serde_json::to_value(m),
        Model::Completion(m) => serde_json::to_value(m),
    }
    .map_err(|e| AssistError::Format(e.to_string()))?;
    let env = Envelope {
        schema_version: MODEL_SCHEMA_VERSION,
        kind: model.kind().into(),
        model: body,
    };
    serde_json::to_string_pretty(&env).map_err(|e| AssistError::Format(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let env: Value = serde_json::from_str(text)
        .map_err(|e| AssistError::Format(format!("truncated or malformed model file: {e}")))?;
    let version = env
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| AssistError::Format("missing schema_version".into()))?;
    if version != u64::from(MODEL_SCHEMA_VERSION) {
        return Err(AssistError::Format(format!(
            "unsupported schema_version {version} (expected {MODEL_SCHEMA_VERSION})"
        )));
    }
    let env: Envelope = serde_json::from_value(env).map_err(|e| AssistError::Format(e.to_string()))?;
    let decode = |e: serde_json::Error| AssistError::Format(format!("corrupted {} model: {e}", env.kind));
    match env.kind.as_str() {
        "regression" => {
            let m: SignSeriesModel = serde_json::from_value(env.model.clone()).map_err(decode)?;
            check_regression(&m)?;
            Ok(Model::Regression(m))
        }
        "completion" => {
            let m: CompletionModel = serde_json::from_value(env.model.clone()).map_err(decode)?;
            check_completion(&m)?;
            Ok(Model::Completion(m))
        }
        other => Err(AssistError::Format(format!("unknown model kind '{other}'"))),
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn config_from_json(text: &str) -> Result<Hyperparams> {
    serde_json::from_str(text).map_err(|e| AssistError::InvalidInput(format!("config: {e}")))
}

pub fn load_config(path: &Path) -> Result<Hyperparams> {
    config_from_json(&fs::read_to_string(path)?)
}

/// Keys present in `text` replace the corresponding fields of `base`.
pub fn config_over(base: &Hyperparams, text: &str) -> Result<Hyperparams> {
    let overlay: Value = serde_json::from_str(text).map_err(|e| AssistError::InvalidInput(format!("config: {e}")))?;
    let Value::Object(fields) = overlay else {
        return Err(AssistError::InvalidInput("config: expected a JSON object".into()));
    };
    let mut merged = serde_json::to_value(base).expect("hyperparameters always serialize");
    for (k, v) in fields {
        merged[k.as_str()] = v;
    }
    serde_json::from_value(merged).map_err(|e| AssistError::InvalidInput(format!("config: {e}")))
}

pub fn config_to_json(hp: &Hyperparams) -> String {
    serde_json::to_string_pretty(hp).expect("hyperparameters always serialize")
}

/// One row per fitted level: level,start,iterations,converged,residual,objective.
pub fn diagnostics_to_csv(diags: &[FitDiagnostics]) -> String {
    let mut out = String::from("level,start,iterations,converged,residual,objective\n");
    for d in diags {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(d.level),
            d.start,
            d.iterations,
            d.converged,
            num(d.residual),
            num(d.objective)
        );
    }
    out
}

/// Single `prediction` column.
pub fn predictions_to_csv(preds: &[f64]) -> String {
    let mut out = String::from("prediction\n");
    for p in preds {
        out.push_str(&num(*p));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assist::{fit, predict};
    use crate::rng::rng_from;
    use rand::Rng as _;

    fn random_dataset(seed: u64, p: usize) -> Dataset {
        let mut rng = rng_from(seed);
        let xs: Vec<DenseMatrix> = (0..15)
            .map(|_| DenseMatrix::from_fn(3, 2, |_, _| rng.random_range(-5.0..5.0)))
            .collect();
        let ws: Vec<Vec<f64>> = (0..15).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<f64> = (0..15).map(|_| rng.random_range(-3e3..7e3)).collect();
        Dataset::from_raw(xs, ws, &ys).unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let data = random_dataset(1, 2);
        let back = dataset_from_str(&dataset_to_string(&data)).unwrap();
        assert_eq!(back.dims(), data.dims());
        for (a, b) in data.samples().iter().zip(back.samples()) {
            assert_eq!(a.predictor, b.predictor);
            assert_eq!(a.covariates, b.covariates);
        }
        for (a, b) in data.raw_responses().iter().zip(back.raw_responses()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn dataset_errors() {
        assert!(matches!(dataset_from_str(""), Err(AssistError::InvalidInput(_))));
        let header_only = format!("{DATASET_MAGIC} d1=1 d2=1 p=0 n=0\n");
        assert!(matches!(
            dataset_from_str(&header_only),
            Err(AssistError::InvalidInput(_))
        ));
        let ragged = format!("{DATASET_MAGIC} d1=1 d2=2 p=0 n=2\n1,2,3\n1,2\n");
        match dataset_from_str(&ragged) {
            Err(AssistError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(
                    message.contains("expected 3") && message.contains("found 2"),
                    "{message}"
                );
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            dataset_from_str("d1=1\n1,2\n"),
            Err(AssistError::Parse { line: 1, .. })
        ));
        let short = format!("{DATASET_MAGIC} d1=1 d2=1 p=0 n=3\n1,2\n");
        assert!(matches!(
            dataset_from_str(&short),
            Err(AssistError::DimensionMismatch { .. })
        ));
        let bad = format!("{DATASET_MAGIC} d1=1 d2=1 p=0 n=1\n1,x\n");
        assert!(matches!(
            dataset_from_str(&bad),
            Err(AssistError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn triplets_and_matrix_round_trip() {
        let t = Triplets {
            d1: 3,
            d2: 2,
            entries: vec![(0, 1, 0.1), (2, 0, -7.25)],
        };
        assert_eq!(triplets_from_str(&triplets_to_string(&t)).unwrap(), t);
        let oob = format!("{TRIPLETS_MAGIC} d1=2 d2=2\n0,0,1\n2,0,1\n");
        assert!(matches!(
            triplets_from_str(&oob),
            Err(AssistError::Parse { line: 3, .. })
        ));
        let m = DenseMatrix::from_fn(2, 3, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        assert_eq!(matrix_from_csv(&matrix_to_csv(&m)).unwrap(), m);
        assert!(matrix_from_csv("1,2\n3\n").is_err());
    }

    fn small_model(h: usize) -> SignSeriesModel {
        let mut hp = Hyperparams::for_sample_size(15).with_budgets(1, 1, 1);
        hp.h = h;
        hp.n_starts = 1;
        hp.max_admm_iters = 20;
        fit(&random_dataset(3, 1), &hp).unwrap()
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let model = small_model(2);
        let text = model_to_json(&Model::Regression(model.clone())).unwrap();
        let Model::Regression(back) = model_from_json(&text).unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!(back, model);
        let mut rng = rng_from(7);
        for _ in 0..100 {
            let x = DenseMatrix::from_fn(3, 2, |_, _| rng.random_range(-5.0..5.0));
            let w = [rng.random::<f64>()];
            assert_eq!(
                predict(&model, &x, &w).unwrap().to_bits(),
                predict(&back, &x, &w).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn model_file_structure_and_errors() {
        let text = model_to_json(&Model::Regression(small_model(1))).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["model"]["classifiers"].as_array().unwrap().len(), 3);

        assert!(matches!(
            model_from_json(&text[..text.len() / 2]),
            Err(AssistError::Format(_))
        ));
        let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
        assert!(matches!(model_from_json(&bumped), Err(AssistError::Format(m)) if m.contains("schema_version 9")));

        let mut corrupt = v.clone();
        corrupt["model"]["classifiers"][0]["u"]["values"] = serde_json::json!([1.0]);
        let err = model_from_json(&corrupt.to_string()).unwrap_err();
        assert!(matches!(err, AssistError::Format(m) if m.contains("corrupted regression model")));

        let mut dropped = v;
        dropped["model"]["classifiers"].as_array_mut().unwrap().pop();
        assert!(matches!(
            model_from_json(&dropped.to_string()),
            Err(AssistError::Format(_))
        ));
    }

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let mut hp = Hyperparams::default().with_budgets(2, 3, 4);
        hp.lambda = 0.0125;
        assert_eq!(config_from_json(&config_to_json(&hp)).unwrap(), hp);
        let partial = config_from_json(r#"{"r": 2, "s1": 2, "s2": 2, "H": 20}"#).unwrap();
        assert_eq!(
            (partial.r, partial.h, partial.n_starts),
            (2, 20, Hyperparams::default().n_starts)
        );
        assert!(config_from_json(r#"{"rank": 2}"#).is_err());
        let base = Hyperparams::for_sample_size(400);
        let over = config_over(&base, r#"{"r": 2, "s1": 2}"#).unwrap();
        assert_eq!((over.r, over.s1, over.s2, over.lambda), (2, 2, 1, base.lambda));
        assert!(config_over(&base, r#"{"rank": 2}"#).is_err());
        assert!(config_over(&base, "[1]").is_err());
    }
}
