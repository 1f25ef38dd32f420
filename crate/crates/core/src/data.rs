//! Tabular data: schema, raw rows, mean imputation, min-max normalization
//! with one-hot categorical groups, the out-of-domain rule and stratified
//! splitting.
//!
//! Parsing files is the job of the `synthanom` crate; everything here works
//! on in-memory rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Matrix, Result};

/// Category assigned to empty categorical cells.
pub const MISSING_CATEGORY: &str = "missing";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Feature,
    Label,
    /// Optional anomaly-subtype column (e.g. an attack category).
    Subtype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    pub role: Role,
}

/// Label values that denote the normal class; every other value is an anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConvention {
    pub normal: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub label_convention: LabelConvention,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        let labels = self.columns.iter().filter(|c| c.role == Role::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!("expected exactly one label column, found {labels}")));
        }
        if self.columns.iter().filter(|c| c.role == Role::Subtype).count() > 1 {
            return Err(Error::Schema("at most one subtype column is allowed".into()));
        }
        if self.feature_columns().next().is_none() {
            return Err(Error::Schema("schema has no feature columns".into()));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
            if c.role == Role::Feature && c.kind == ColumnKind::Categorical {
                let cats = c.categories.as_deref().unwrap_or(&[]);
                if cats.is_empty() {
                    return Err(Error::Schema(format!("categorical column `{}` lists no categories", c.name)));
                }
                for (j, cat) in cats.iter().enumerate() {
                    if cats[..j].contains(cat) {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` repeats category `{cat}`",
                            c.name
                        )));
                    }
                }
            }
        }
        if self.label_convention.normal.is_empty() {
            return Err(Error::Schema("label convention names no normal value".into()));
        }
        Ok(())
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> + '_ {
        self.columns.iter().filter(|c| c.role == Role::Feature)
    }

    pub fn label_column(&self) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.role == Role::Label)
    }

    pub fn subtype_column(&self) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.role == Role::Subtype)
    }

    pub fn is_normal_label(&self, value: &str) -> bool {
        self.label_convention.normal.iter().any(|v| v == value)
    }

    /// All-numeric schema with features `x1..xd` and a `label` column.
    pub fn numeric(d: usize) -> Schema {
        let mut columns: Vec<ColumnSpec> = (1..=d)
            .map(|i| ColumnSpec {
                name: format!("x{i}"),
                kind: ColumnKind::Numeric,
                categories: None,
                role: Role::Feature,
            })
            .collect();
        columns.push(ColumnSpec {
            name: "label".into(),
            kind: ColumnKind::Categorical,
            categories: None,
            role: Role::Label,
        });
        Schema { columns, label_convention: LabelConvention { normal: alloc::vec!["normal".into()] } }
    }

    /// Feature layout implied by the schema's declared categories, for use
    /// before any normalizer is fitted.
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            blocks: self
                .feature_columns()
                .map(|c| match c.kind {
                    ColumnKind::Numeric => FeatureBlock::Numeric { name: c.name.clone() },
                    ColumnKind::Categorical => FeatureBlock::OneHot {
                        name: c.name.clone(),
                        categories: c.categories.clone().unwrap_or_default(),
                    },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassTag {
    Normal,
    KnownAnomaly,
    SyntheticAnomaly,
}

impl ClassTag {
    pub fn is_anomaly(self) -> bool {
        !matches!(self, ClassTag::Normal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    /// `None` marks a missing cell awaiting imputation.
    Numeric(Option<f64>),
    Category(String),
}

/// Rows as read from a file, one value per feature column in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub schema: Schema,
    pub rows: Vec<Vec<RawValue>>,
    pub tags: Vec<ClassTag>,
    pub subtypes: Vec<Option<String>>,
    pub source: String,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn missing_cells(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .filter(|v| matches!(v, RawValue::Numeric(None)))
            .count()
    }

    pub fn select(&self, indices: &[usize]) -> RawDataset {
        RawDataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            tags: indices.iter().map(|&i| self.tags[i]).collect(),
            subtypes: indices.iter().map(|&i| self.subtypes[i].clone()).collect(),
            source: self.source.clone(),
        }
    }

    pub fn concat(mut self, other: RawDataset) -> Result<RawDataset> {
        if self.schema != other.schema {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        self.rows.extend(other.rows);
        self.tags.extend(other.tags);
        self.subtypes.extend(other.subtypes);
        self.source = format!("{}+{}", self.source, other.source);
        Ok(self)
    }
}

/// Replaces missing numeric cells by the column mean over observed cells.
pub fn mean_impute(data: &RawDataset) -> Result<RawDataset> {
    let names: Vec<&str> = data.schema.feature_columns().map(|c| c.name.as_str()).collect();
    let mut out = data.clone();
    for (j, name) in names.iter().enumerate() {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut missing = 0usize;
        for row in &data.rows {
            match row[j] {
                RawValue::Numeric(Some(v)) => {
                    sum += v;
                    count += 1;
                }
                RawValue::Numeric(None) => missing += 1,
                RawValue::Category(_) => {}
            }
        }
        if missing == 0 {
            continue;
        }
        if count == 0 {
            return Err(Error::Imputation { column: name.to_string() });
        }
        let mean = sum / count as f64;
        for row in out.rows.iter_mut() {
            if let RawValue::Numeric(v @ None) = &mut row[j] {
                *v = Some(mean);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureBlock {
    Numeric { name: String },
    OneHot { name: String, categories: Vec<String> },
}

impl FeatureBlock {
    pub fn width(&self) -> usize {
        match self {
            FeatureBlock::Numeric { .. } => 1,
            FeatureBlock::OneHot { categories, .. } => categories.len(),
        }
    }
}

/// Column layout of the encoded feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub blocks: Vec<FeatureBlock>,
}

impl FeatureLayout {
    pub fn numeric(d: usize) -> FeatureLayout {
        FeatureLayout {
            blocks: (1..=d).map(|i| FeatureBlock::Numeric { name: format!("x{i}") }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(FeatureBlock::width).sum()
    }
}

/// True iff a numeric feature leaves `[0,1]` or a one-hot group has no
/// active entry (a category not seen in training).
pub fn ood_flag(layout: &FeatureLayout, row: &[f64]) -> bool {
    let mut offset = 0;
    for block in &layout.blocks {
        match block {
            FeatureBlock::Numeric { .. } => {
                let v = row[offset];
                if !(0.0..=1.0).contains(&v) {
                    return true;
                }
            }
            FeatureBlock::OneHot { categories, .. } => {
                let group = &row[offset..offset + categories.len()];
                if !group.contains(&1.0) {
                    return true;
                }
            }
        }
        offset += block.width();
    }
    false
}

/// Encoded dataset: features normalized and one-hot encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub tags: Vec<ClassTag>,
    pub subtypes: Vec<Option<String>>,
    pub layout: FeatureLayout,
    pub source: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn count(&self, tag: ClassTag) -> usize {
        self.tags.iter().filter(|&&t| t == tag).count()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(indices),
            tags: indices.iter().map(|&i| self.tags[i]).collect(),
            subtypes: indices.iter().map(|&i| self.subtypes[i].clone()).collect(),
            layout: self.layout.clone(),
            source: self.source.clone(),
        }
    }

    /// Rows carrying `tag`, as a feature matrix.
    pub fn rows_with(&self, tag: ClassTag) -> Matrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.tags[i] == tag).collect();
        self.features.select(&idx)
    }

    /// Appends rows that all carry `tag`.
    pub fn extend_tagged(&mut self, rows: &Matrix, tag: ClassTag) -> Result<()> {
        self.features.append(rows)?;
        self.tags.extend(core::iter::repeat(tag).take(rows.rows()));
        self.subtypes.extend(core::iter::repeat(None).take(rows.rows()));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnStats {
    Numeric { name: String, min: f64, max: f64, mean: f64 },
    Categorical { name: String, vocabulary: Vec<String> },
}

/// Min-max scaling for numeric columns and one-hot vocabularies for
/// categorical ones, learned from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub columns: Vec<ColumnStats>,
}

impl Normalizer {
    /// Fits on `train`. Missing numeric cells are ignored; the stored column
    /// mean later fills missing cells in [`Normalizer::apply`].
    pub fn fit(train: &RawDataset) -> Result<Normalizer> {
        let mut columns = Vec::new();
        for (j, spec) in train.schema.feature_columns().enumerate() {
            match spec.kind {
                ColumnKind::Numeric => {
                    let mut min = f64::INFINITY;
                    let mut max = f64::NEG_INFINITY;
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for row in &train.rows {
                        if let RawValue::Numeric(Some(v)) = row[j] {
                            min = min.min(v);
                            max = max.max(v);
                            sum += v;
                            count += 1;
                        }
                    }
                    if count == 0 {
                        return Err(Error::Imputation { column: spec.name.clone() });
                    }
                    columns.push(ColumnStats::Numeric {
                        name: spec.name.clone(),
                        min,
                        max,
                        mean: sum / count as f64,
                    });
                }
                ColumnKind::Categorical => {
                    let declared = spec.categories.clone().unwrap_or_default();
                    let mut seen: Vec<String> = Vec::new();
                    for row in &train.rows {
                        if let RawValue::Category(c) = &row[j] {
                            if !seen.contains(c) {
                                seen.push(c.clone());
                            }
                        }
                    }
                    // Declared order first, then anything extra (e.g. "missing").
                    let mut vocabulary: Vec<String> =
                        declared.iter().filter(|c| seen.contains(c)).cloned().collect();
                    vocabulary.extend(seen.into_iter().filter(|c| !declared.contains(c)));
                    if vocabulary.is_empty() {
                        return Err(Error::Schema(format!("categorical column `{}` has no values", spec.name)));
                    }
                    columns.push(ColumnStats::Categorical { name: spec.name.clone(), vocabulary });
                }
            }
        }
        Ok(Normalizer { columns })
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            blocks: self
                .columns
                .iter()
                .map(|c| match c {
                    ColumnStats::Numeric { name, .. } => FeatureBlock::Numeric { name: name.clone() },
                    ColumnStats::Categorical { name, vocabulary } => FeatureBlock::OneHot {
                        name: name.clone(),
                        categories: vocabulary.clone(),
                    },
                })
                .collect(),
        }
    }

    pub fn encode_row(&self, row: &[RawValue], out: &mut Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape { expected: self.columns.len(), got: row.len() });
        }
        for (stats, value) in self.columns.iter().zip(row) {
            match (stats, value) {
                (ColumnStats::Numeric { min, max, mean, .. }, RawValue::Numeric(v)) => {
                    let v = v.unwrap_or(*mean);
                    let range = max - min;
                    out.push(if range > 0.0 { (v - min) / range } else { 0.0 });
                }
                (ColumnStats::Categorical { vocabulary, .. }, RawValue::Category(c)) => {
                    // Unseen categories leave the whole group at zero.
                    out.extend(vocabulary.iter().map(|v| if v == c { 1.0 } else { 0.0 }));
                }
                (stats, _) => {
                    let name = match stats {
                        ColumnStats::Numeric { name, .. } | ColumnStats::Categorical { name, .. } => name,
                    };
                    return Err(Error::Schema(format!("value of wrong kind in column `{name}`")));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, data: &RawDataset) -> Result<Dataset> {
        let layout = self.layout();
        let mut features = Matrix::with_cols(layout.width());
        let mut buf = Vec::with_capacity(layout.width());
        for row in &data.rows {
            buf.clear();
            self.encode_row(row, &mut buf)?;
            features.push_row(&buf)?;
        }
        Ok(Dataset {
            features,
            tags: data.tags.clone(),
            subtypes: data.subtypes.clone(),
            layout,
            source: data.source.clone(),
        })
    }

    /// Decodes one encoded row. One-hot groups decode to their argmax; an
    /// all-zero group decodes to `"?"`. Constant columns decode to the constant.
    pub fn decode_row(&self, row: &[f64]) -> Vec<RawValue> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.columns.len());
        for stats in &self.columns {
            match stats {
                ColumnStats::Numeric { min, max, .. } => {
                    let range = max - min;
                    let v = if range > 0.0 { row[offset] * range + min } else { *min };
                    out.push(RawValue::Numeric(Some(v)));
                    offset += 1;
                }
                ColumnStats::Categorical { vocabulary, .. } => {
                    let group = &row[offset..offset + vocabulary.len()];
                    let best = group
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| v > 0.0)
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| vocabulary[i].clone())
                        .unwrap_or_else(|| "?".into());
                    out.push(RawValue::Category(best));
                    offset += vocabulary.len();
                }
            }
        }
        out
    }

    pub fn invert(&self, data: &Dataset, schema: &Schema) -> RawDataset {
        RawDataset {
            schema: schema.clone(),
            rows: data.features.iter_rows().map(|r| self.decode_row(r)).collect(),
            tags: data.tags.clone(),
            subtypes: data.subtypes.clone(),
            source: data.source.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome<T> {
    pub train: T,
    pub validation: T,
    /// Strata too small to split, kept whole in `train`.
    pub warnings: Vec<String>,
}

/// Stratified split by class tag. Each stratum of size `m >= 2` sends
/// `round(val_fraction * m)` rows (clamped to `[1, m-1]`) to validation.
pub fn split_indices(tags: &[ClassTag], val_fraction: f64, seed: u64) -> Result<SplitOutcome<Vec<usize>>> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid("validation fraction must lie in (0, 1)"));
    }
    if tags.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let mut strata: BTreeMap<ClassTag, Vec<usize>> = BTreeMap::new();
    for (i, &t) in tags.iter().enumerate() {
        strata.entry(t).or_default().push(i);
    }
    let mut rng = seeded(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut warnings = Vec::new();
    for (tag, mut idx) in strata {
        if idx.len() < 2 {
            warnings.push(format!("stratum {tag:?} has {} row(s); kept in training", idx.len()));
            train.extend(idx);
            continue;
        }
        idx.shuffle(&mut rng);
        let m = idx.len();
        let take = ((val_fraction * m as f64 + 0.5) as usize).clamp(1, m - 1);
        validation.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok(SplitOutcome { train, validation, warnings })
}

pub fn split(data: &Dataset, val_fraction: f64, seed: u64) -> Result<SplitOutcome<Dataset>> {
    let s = split_indices(&data.tags, val_fraction, seed)?;
    Ok(SplitOutcome {
        train: data.select(&s.train),
        validation: data.select(&s.validation),
        warnings: s.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn mixed_schema() -> Schema {
        Schema {
            columns: vec![
                ColumnSpec { name: "a".into(), kind: ColumnKind::Numeric, categories: None, role: Role::Feature },
                ColumnSpec {
                    name: "proto".into(),
                    kind: ColumnKind::Categorical,
                    categories: Some(vec!["tcp".into(), "udp".into()]),
                    role: Role::Feature,
                },
                ColumnSpec { name: "label".into(), kind: ColumnKind::Categorical, categories: None, role: Role::Label },
            ],
            label_convention: LabelConvention { normal: vec!["normal".into()] },
        }
    }

    fn raw(values: &[(Option<f64>, &str)]) -> RawDataset {
        RawDataset {
            schema: mixed_schema(),
            rows: values
                .iter()
                .map(|(v, c)| vec![RawValue::Numeric(*v), RawValue::Category((*c).into())])
                .collect(),
            tags: vec![ClassTag::Normal; values.len()],
            subtypes: vec![None; values.len()],
            source: "test".into(),
        }
    }

    #[test]
    fn schema_validation() {
        assert!(mixed_schema().validate().is_ok());
        let mut s = mixed_schema();
        s.columns[1].categories = Some(vec!["tcp".into(), "tcp".into()]);
        assert!(s.validate().is_err());
        let mut s = mixed_schema();
        s.columns[2].role = Role::Feature;
        assert!(s.validate().is_err());
        let mut s = mixed_schema();
        s.columns[1].categories = Some(vec![]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn imputation_examples() {
        let d = raw(&[(Some(1.0), "tcp"), (None, "tcp"), (Some(3.0), "udp")]);
        let out = mean_impute(&d).unwrap();
        assert_eq!(out.rows[1][0], RawValue::Numeric(Some(2.0)));
        let d = raw(&[(Some(5.0), "tcp"), (None, "tcp"), (None, "udp")]);
        let out = mean_impute(&d).unwrap();
        assert!(out.rows.iter().all(|r| r[0] == RawValue::Numeric(Some(5.0))));
        let d = raw(&[(Some(1.0), "tcp"), (Some(2.0), "udp")]);
        assert_eq!(mean_impute(&d).unwrap(), d);
        let d = raw(&[(None, "tcp"), (None, "udp")]);
        assert!(matches!(mean_impute(&d), Err(Error::Imputation { .. })));
    }

    #[test]
    fn normalization_examples() {
        let d = raw(&[(Some(0.0), "tcp"), (Some(5.0), "udp"), (Some(10.0), "tcp")]);
        let norm = Normalizer::fit(&d).unwrap();
        let enc = norm.apply(&d).unwrap();
        assert_eq!(enc.features.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(enc.features.row(1), &[0.5, 0.0, 1.0]);
        assert_eq!(enc.features.row(2), &[1.0, 1.0, 0.0]);
        let test = raw(&[(Some(12.0), "tcp"), (Some(3.0), "icmp"), (Some(3.0), "udp")]);
        let enc_t = norm.apply(&test).unwrap();
        assert!((enc_t.features.row(0)[0] - 1.2).abs() < 1e-12);
        assert!(ood_flag(&enc.layout, enc_t.features.row(0)));
        assert!(ood_flag(&enc.layout, enc_t.features.row(1)));
        assert!(!ood_flag(&enc.layout, enc_t.features.row(2)));
        for r in enc.features.iter_rows() {
            assert!(!ood_flag(&enc.layout, r));
        }
    }

    #[test]
    fn constant_column_maps_to_zero_and_inverts_to_constant() {
        let d = raw(&[(Some(4.0), "tcp"), (Some(4.0), "tcp")]);
        let norm = Normalizer::fit(&d).unwrap();
        let enc = norm.apply(&d).unwrap();
        assert_eq!(enc.features.row(0)[0], 0.0);
        let back = norm.invert(&enc, &d.schema);
        assert_eq!(back.rows[1][0], RawValue::Numeric(Some(4.0)));
    }

    #[test]
    fn stratified_split_counts() {
        let mut tags = vec![ClassTag::Normal; 50];
        tags.extend(vec![ClassTag::KnownAnomaly; 10]);
        let s = split_indices(&tags, 0.2, 3).unwrap();
        let val_anom = s.validation.iter().filter(|&&i| tags[i].is_anomaly()).count();
        assert_eq!(s.validation.len() - val_anom, 10);
        assert_eq!(val_anom, 2);
        assert_eq!(s.train.len(), 48);

        let tags = vec![ClassTag::Normal; 100];
        let a = split_indices(&tags, 0.2, 7).unwrap();
        let b = split_indices(&tags, 0.2, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.validation.len()), (80, 20));
        assert!(split_indices(&tags, 0.0, 7).is_err());
        assert!(split_indices(&tags, 1.0, 7).is_err());
    }

    #[test]
    fn tiny_stratum_stays_in_training() {
        let mut tags = vec![ClassTag::Normal; 10];
        tags.push(ClassTag::KnownAnomaly);
        let s = split_indices(&tags, 0.2, 1).unwrap();
        assert!(s.train.contains(&10));
        assert_eq!(s.warnings.len(), 1);
    }

    proptest! {
        #[test]
        fn invert_undoes_apply_on_training_rows(
            values in proptest::collection::vec((-1e3f64..1e3, 0usize..2), 2..40)
        ) {
            let rows: Vec<(Option<f64>, &str)> =
                values.iter().map(|&(v, c)| (Some(v), if c == 0 { "tcp" } else { "udp" })).collect();
            let d = raw(&rows);
            let norm = Normalizer::fit(&d).unwrap();
            let enc = norm.apply(&d).unwrap();
            let back = norm.invert(&enc, &d.schema);
            for (a, b) in back.rows.iter().zip(&d.rows) {
                match (&a[0], &b[0]) {
                    (RawValue::Numeric(Some(x)), RawValue::Numeric(Some(y))) => {
                        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()))
                    }
                    _ => prop_assert!(false),
                }
                prop_assert_eq!(&a[1], &b[1]);
            }
            for r in enc.features.iter_rows() {
                prop_assert!(!ood_flag(&enc.layout, r));
                prop_assert_eq!(r[1..].iter().sum::<f64>(), 1.0);
            }
        }

        #[test]
        fn split_is_a_partition(n_norm in 1usize..60, n_anom in 0usize..20, frac in 0.05f64..0.95, seed in 0u64..1000) {
            let mut tags = vec![ClassTag::Normal; n_norm];
            tags.extend(vec![ClassTag::KnownAnomaly; n_anom]);
            let s = split_indices(&tags, frac, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..tags.len()).collect::<Vec<_>>());
        }
    }
}
