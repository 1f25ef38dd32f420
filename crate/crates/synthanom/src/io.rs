//! File formats: CSV datasets and schemas, tabulated densities, JSON
//! artifacts (normalizer, checkpoint, reports) and CSV result tables.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use synthanom_core::activation::ActivationSpec;
use synthanom_core::data::{ClassTag, ColumnKind, Normalizer, RawDataset, RawValue, Schema, MISSING_CATEGORY};
use synthanom_core::density::TabulatedDensity;
use synthanom_core::metrics::{PrPoint, SubtypeScore};
use synthanom_core::mlp::MlpClassifier;
use synthanom_core::train::TrainHistory;
use synthanom_core::{Error, Matrix};

use crate::error::{AppError, AppResult};
use crate::manifest::sha256_json;

/// Where row tags come from when loading a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TagSource {
    /// Read the schema's label column and apply its label convention.
    LabelColumn,
    /// Every row gets this tag; the label column may be absent.
    Fixed(ClassTag),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub tags: TagSource,
    /// Reject categories not declared in the schema (training data).
    pub strict_categories: bool,
}

impl LoadOptions {
    pub fn training(tags: TagSource) -> Self {
        LoadOptions { tags, strict_categories: true }
    }

    pub fn test(tags: TagSource) -> Self {
        LoadOptions { tags, strict_categories: false }
    }
}

fn open(path: &Path) -> AppResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| AppError::io(path, e))
}

fn create(path: &Path) -> AppResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> AppResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| AppError::io(path, e))
}

pub fn load_schema(path: &Path) -> AppResult<Schema> {
    let schema: Schema = read_json(path)?;
    schema.validate()?;
    Ok(schema)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.to_ascii_lowercase().as_str(), "" | "na" | "nan" | "null" | "?")
}

/// Parses CSV rows against `schema`. Row numbers in errors count data rows
/// from 1; the header is row 0.
pub fn read_dataset<R: Read>(reader: R, schema: &Schema, opts: LoadOptions, source: &str) -> AppResult<RawDataset> {
    schema.validate()?;
    let path = Path::new(source);
    let parse_err = |row: usize, message: String| AppError::Parse { path: path.to_path_buf(), row, message };

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for h in &header {
        if !schema.columns.iter().any(|c| &c.name == h) {
            return Err(parse_err(0, format!("column `{h}` is not in the schema")));
        }
    }
    let position = |name: &str| header.iter().position(|h| h == name);

    let mut feature_pos = Vec::new();
    for c in schema.feature_columns() {
        let p = position(&c.name).ok_or_else(|| parse_err(0, format!("missing column `{}`", c.name)))?;
        feature_pos.push((p, c));
    }
    let label_name = &schema.label_column().expect("validated schema has a label").name;
    let label_pos = match opts.tags {
        TagSource::LabelColumn => {
            Some(position(label_name).ok_or_else(|| parse_err(0, format!("missing label column `{label_name}`")))?)
        }
        TagSource::Fixed(_) => None,
    };
    let subtype_pos = schema.subtype_column().and_then(|c| position(&c.name));

    let mut data = RawDataset {
        schema: schema.clone(),
        rows: Vec::new(),
        tags: Vec::new(),
        subtypes: Vec::new(),
        source: source.to_string(),
    };
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(parse_err(row_no, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let mut row = Vec::with_capacity(feature_pos.len());
        for &(p, spec) in &feature_pos {
            let cell = &record[p];
            row.push(match spec.kind {
                ColumnKind::Numeric if is_missing(cell) => RawValue::Numeric(None),
                ColumnKind::Numeric => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| parse_err(row_no, format!("column `{}`: `{cell}` is not a number", spec.name)))?;
                    if !v.is_finite() {
                        return Err(parse_err(row_no, format!("column `{}`: non-finite value", spec.name)));
                    }
                    RawValue::Numeric(Some(v))
                }
                ColumnKind::Categorical => {
                    let value = if cell.is_empty() { MISSING_CATEGORY.to_string() } else { cell.to_string() };
                    if opts.strict_categories && value != MISSING_CATEGORY {
                        let declared = spec.categories.as_deref().unwrap_or(&[]);
                        if !declared.contains(&value) {
                            return Err(AppError::Core(Error::Schema(format!(
                                "row {row_no}: unknown category `{value}` in column `{}`",
                                spec.name
                            ))));
                        }
                    }
                    RawValue::Category(value)
                }
            });
        }
        let tag = match (opts.tags, label_pos) {
            (TagSource::Fixed(tag), _) => tag,
            (TagSource::LabelColumn, Some(p)) if schema.is_normal_label(&record[p]) => ClassTag::Normal,
            _ => ClassTag::KnownAnomaly,
        };
        let subtype = match subtype_pos {
            Some(p) if tag.is_anomaly() && !record[p].is_empty() => Some(record[p].to_string()),
            _ => None,
        };
        data.rows.push(row);
        data.tags.push(tag);
        data.subtypes.push(subtype);
    }
    Ok(data)
}

pub fn load_dataset(path: &Path, schema: &Schema, opts: LoadOptions) -> AppResult<RawDataset> {
    read_dataset(open(path)?, schema, opts, &path.display().to_string())
}

/// Writes feature columns (raw units) plus the label column, using
/// `labels` to name each tag.
pub fn write_raw_csv(path: &Path, data: &RawDataset, labels: impl Fn(ClassTag) -> String) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<&str> = data.schema.feature_columns().map(|c| c.name.as_str()).collect();
    let label = data.schema.label_column().map(|c| c.name.as_str()).unwrap_or("label");
    header.push(label);
    w.write_record(&header)?;
    for (row, tag) in data.rows.iter().zip(&data.tags) {
        let mut rec: Vec<String> = row
            .iter()
            .map(|v| match v {
                RawValue::Numeric(Some(x)) => x.to_string(),
                RawValue::Numeric(None) => String::new(),
                RawValue::Category(c) => c.clone(),
            })
            .collect();
        rec.push(labels(*tag));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Writes a numeric matrix with the given header.
pub fn write_matrix_csv(path: &Path, header: &[String], m: &Matrix) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for row in m.iter_rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Tabulated density from CSV rows `x1,..,xd,value` on a full tensor grid.
pub fn load_tabulated_density(path: &Path) -> AppResult<TabulatedDensity> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(AppError::Parse { path: path.into(), row: 0, message: "need at least one coordinate and a value".into() });
    }
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| AppError::Parse { path: path.into(), row: i + 1, message: e.to_string() })?;
        if nums.len() != width {
            return Err(AppError::Parse { path: path.into(), row: i + 1, message: "wrong field count".into() });
        }
        points.push((nums[..width - 1].to_vec(), nums[width - 1]));
    }
    Ok(TabulatedDensity::from_points(width - 1, &points)?)
}

pub const CHECKPOINT_FORMAT: &str = "synthanom-checkpoint/1";

/// A trained model with everything needed to score raw rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub schema: Schema,
    pub schema_hash: String,
    pub normalizer: Normalizer,
    pub activation: ActivationSpec,
    pub seed: u64,
    pub config_hash: String,
    pub model: MlpClassifier,
}

impl Checkpoint {
    pub fn new(schema: Schema, normalizer: Normalizer, model: MlpClassifier, seed: u64, config_hash: String) -> AppResult<Self> {
        Ok(Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            schema_hash: sha256_json(&schema)?,
            activation: model.activation(),
            schema,
            normalizer,
            seed,
            config_hash,
            model,
        })
    }

    /// Loads and checks format, schema hash and model/normalizer widths.
    pub fn load(path: &Path) -> AppResult<Self> {
        let ck: Checkpoint = read_json(path)?;
        let bad = |m: &str| AppError::Core(Error::Schema(format!("{}: {m}", path.display())));
        if ck.format != CHECKPOINT_FORMAT {
            return Err(bad("unsupported checkpoint format"));
        }
        if sha256_json(&ck.schema)? != ck.schema_hash {
            return Err(bad("schema hash mismatch"));
        }
        if ck.normalizer.layout().width() != ck.model.input_dim() {
            return Err(bad("normalizer width does not match the model input"));
        }
        Ok(ck)
    }
}

pub fn write_history_csv(path: &Path, history: &TrainHistory) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["epoch", "train_risk", "val_risk"])?;
    for e in &history.epochs {
        w.write_record([e.epoch.to_string(), e.train_risk.to_string(), e.val_risk.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// One block of PR points per subtype.
pub fn write_pr_curves_csv(path: &Path, curves: &[(String, Vec<PrPoint>)]) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["subtype", "threshold", "precision", "recall"])?;
    for (subtype, points) in curves {
        for p in points {
            w.write_record([subtype.clone(), p.threshold.to_string(), p.precision.to_string(), p.recall.to_string()])?;
        }
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Serializes any row type with `Serialize` into a headered CSV.
pub fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T]) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub checkpoint: String,
    pub test_data: String,
    pub config_hash: String,
    pub rows: usize,
    pub out_of_domain: usize,
    pub subtypes: Vec<SubtypeScore>,
}

/// Label strings used when writing tagged rows.
pub fn default_label(tag: ClassTag) -> String {
    match tag {
        ClassTag::Normal => "normal",
        ClassTag::KnownAnomaly => "anomaly",
        ClassTag::SyntheticAnomaly => "synthetic",
    }
    .into()
}

/// Label string of a schema for tag `tag`: the first normal value for
/// normals, `default_label` otherwise.
pub fn schema_label(schema: &Schema, tag: ClassTag) -> String {
    match tag {
        ClassTag::Normal => schema.label_convention.normal[0].clone(),
        other => default_label(other),
    }
}
