//! Attribute schemas, datasets, and their CSV/JSON interchange formats.
//!
//! A dataset is an N x M table of attribute values plus a class label per
//! row. Attributes are binary, members of a one-hot group, ordinal over a
//! finite integer domain, or numerical. Schemas travel as a JSON sidecar
//! next to the CSV data so fixtures stay human-readable.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("csv parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no rows")]
    NoRows,
    #[error("one-hot violation in row {row}, group {group}: {detail}")]
    OneHot { row: usize, group: usize, detail: String },
    #[error("value error in row {row}, attribute {attr}: {detail}")]
    Value { row: usize, attr: String, detail: String },
    #[error("sample size {n} out of range 1..={max}")]
    SampleSize { n: usize, max: usize },
}

/// What kind of values an attribute takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Binary,
    /// One binary column of a one-hot encoded categorical attribute.
    OneHotMember { group_id: usize },
    /// Ordered finite integer domain.
    Ordinal { domain: Vec<i64> },
    Numerical {
        lower_bound: Option<f64>,
        upper_bound: Option<f64>,
    },
}

impl AttributeKind {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, AttributeKind::Numerical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

/// Ordered attribute descriptors, the one-hot groups over them, and the
/// number of classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<Attribute>,
    pub groups: Vec<Vec<usize>>,
    pub n_classes: usize,
}

/// One original attribute as seen by the error metric: a one-hot group
/// counts as a single unit.
#[derive(Debug, Clone, PartialEq)]
pub enum Unit {
    Single(usize),
    Group { group_id: usize, members: Vec<usize> },
}

impl Unit {
    pub fn members(&self) -> &[usize] {
        match self {
            Unit::Single(i) => std::slice::from_ref(i),
            Unit::Group { members, .. } => members,
        }
    }
}

impl AttributeSchema {
    pub fn new(
        attributes: Vec<Attribute>,
        groups: Vec<Vec<usize>>,
        n_classes: usize,
    ) -> Result<Self, DataError> {
        let schema = AttributeSchema { attributes, groups, n_classes };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let m = self.attributes.len();
        if m == 0 {
            return Err(DataError::Schema("schema has no attributes".into()));
        }
        if self.n_classes == 0 {
            return Err(DataError::Schema("n_classes must be at least 1".into()));
        }
        let mut seen = vec![false; m];
        for (gid, group) in self.groups.iter().enumerate() {
            if group.len() < 2 {
                return Err(DataError::Schema(format!(
                    "one-hot group {gid} has fewer than 2 members"
                )));
            }
            for &i in group {
                if i >= m {
                    return Err(DataError::Schema(format!(
                        "group {gid} references attribute {i} out of range"
                    )));
                }
                if seen[i] {
                    return Err(DataError::Schema(format!(
                        "attribute {i} appears in more than one group"
                    )));
                }
                seen[i] = true;
                match &self.attributes[i].kind {
                    AttributeKind::OneHotMember { group_id } if *group_id == gid => {}
                    other => {
                        return Err(DataError::Schema(format!(
                            "attribute {i} in group {gid} has kind {other:?}, expected \
                             one_hot_member of that group"
                        )))
                    }
                }
            }
        }
        for (i, attr) in self.attributes.iter().enumerate() {
            match &attr.kind {
                AttributeKind::OneHotMember { group_id } => {
                    if *group_id >= self.groups.len() || !self.groups[*group_id].contains(&i) {
                        return Err(DataError::Schema(format!(
                            "attribute {i} claims group {group_id} but is not a member"
                        )));
                    }
                }
                AttributeKind::Ordinal { domain } => {
                    if domain.is_empty() {
                        return Err(DataError::Schema(format!(
                            "ordinal attribute {} has empty domain",
                            attr.name
                        )));
                    }
                    if !domain.windows(2).all(|w| w[0] < w[1]) {
                        return Err(DataError::Schema(format!(
                            "ordinal attribute {} domain is not strictly increasing",
                            attr.name
                        )));
                    }
                }
                AttributeKind::Numerical { lower_bound, upper_bound } => {
                    if let (Some(lo), Some(hi)) = (lower_bound, upper_bound) {
                        if lo >= hi {
                            return Err(DataError::Schema(format!(
                                "numerical attribute {} has lower_bound >= upper_bound",
                                attr.name
                            )));
                        }
                    }
                }
                AttributeKind::Binary => {}
            }
        }
        Ok(())
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    /// Original attributes, with each one-hot group collapsed to one unit.
    pub fn units(&self) -> Vec<Unit> {
        let mut grouped: BTreeSet<usize> = BTreeSet::new();
        for g in &self.groups {
            grouped.extend(g.iter().copied());
        }
        let mut units = Vec::new();
        let mut emitted_groups: BTreeSet<usize> = BTreeSet::new();
        for i in 0..self.attributes.len() {
            if let AttributeKind::OneHotMember { group_id } = self.attributes[i].kind {
                if emitted_groups.insert(group_id) {
                    units.push(Unit::Group {
                        group_id,
                        members: self.groups[group_id].clone(),
                    });
                }
            } else if !grouped.contains(&i) {
                units.push(Unit::Single(i));
            }
        }
        units
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let schema: AttributeSchema =
            serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        std::fs::write(path, serde_json::to_string_pretty(self).unwrap())?;
        Ok(())
    }
}

/// A single cell value. Discrete attributes carry exact integers, numerical
/// ones carry reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match self {
            Value::Int(v) => *v as f64,
            Value::Real(v) => *v,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Real(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
        }
    }
}

/// An N x M value table with class labels, validated against its schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: AttributeSchema,
    pub rows: Vec<Vec<Value>>,
    pub labels: Vec<usize>,
    pub class_column: String,
}

impl Dataset {
    pub fn new(
        schema: AttributeSchema,
        rows: Vec<Vec<Value>>,
        labels: Vec<usize>,
        class_column: impl Into<String>,
    ) -> Result<Self, DataError> {
        let ds = Dataset { schema, rows, labels, class_column: class_column.into() };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        self.schema.validate()?;
        if self.rows.is_empty() {
            return Err(DataError::NoRows);
        }
        if self.labels.len() != self.rows.len() {
            return Err(DataError::Parse(format!(
                "{} rows but {} labels",
                self.rows.len(),
                self.labels.len()
            )));
        }
        for (k, row) in self.rows.iter().enumerate() {
            if row.len() != self.schema.n_attributes() {
                return Err(DataError::Parse(format!(
                    "row {k} has {} values, schema expects {}",
                    row.len(),
                    self.schema.n_attributes()
                )));
            }
            for (i, value) in row.iter().enumerate() {
                check_value(&self.schema, k, i, value)?;
            }
            if self.labels[k] >= self.schema.n_classes {
                return Err(DataError::Value {
                    row: k,
                    attr: self.class_column.clone(),
                    detail: format!(
                        "class {} out of range 0..{}",
                        self.labels[k], self.schema.n_classes
                    ),
                });
            }
            for (gid, group) in self.schema.groups.iter().enumerate() {
                let ones: Vec<usize> = group
                    .iter()
                    .copied()
                    .filter(|&i| row[i] == Value::Int(1))
                    .collect();
                if ones.len() != 1 {
                    return Err(DataError::OneHot {
                        row: k,
                        group: gid,
                        detail: format!("{} members set to 1, expected exactly 1", ones.len()),
                    });
                }
            }
        }
        Ok(())
    }

    /// Class histogram over the labels.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.schema.n_classes];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
        let mut header: Vec<&str> =
            self.schema.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.class_column);
        writer.write_record(&header).map_err(csv_err)?;
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(label.to_string());
            writer.write_record(&record).map_err(csv_err)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn check_value(
    schema: &AttributeSchema,
    row: usize,
    attr: usize,
    value: &Value,
) -> Result<(), DataError> {
    let a = &schema.attributes[attr];
    let err = |detail: String| DataError::Value { row, attr: a.name.clone(), detail };
    match (&a.kind, value) {
        (AttributeKind::Binary | AttributeKind::OneHotMember { .. }, Value::Int(v)) => {
            if *v != 0 && *v != 1 {
                return Err(err(format!("expected 0 or 1, got {v}")));
            }
        }
        (AttributeKind::Ordinal { domain }, Value::Int(v)) => {
            if !domain.contains(v) {
                return Err(err(format!("{v} not in ordinal domain {domain:?}")));
            }
        }
        (AttributeKind::Numerical { lower_bound, upper_bound }, Value::Real(v)) => {
            if !v.is_finite() {
                return Err(err(format!("non-finite value {v}")));
            }
            if let Some(lo) = lower_bound {
                if v < lo {
                    return Err(err(format!("{v} below lower bound {lo}")));
                }
            }
            if let Some(hi) = upper_bound {
                if v > hi {
                    return Err(err(format!("{v} above upper bound {hi}")));
                }
            }
        }
        (kind, value) => {
            return Err(err(format!("value {value} does not fit attribute kind {kind:?}")));
        }
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> DataError {
    DataError::Parse(e.to_string())
}

/// Loads a CSV with a header row, mapping columns by name against the schema.
/// Missing values are rejected outright.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &AttributeSchema,
    class_column: &str,
) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    load_dataset_from_str(&text, schema, class_column)
}

pub fn load_dataset_from_str(
    text: &str,
    schema: &AttributeSchema,
    class_column: &str,
) -> Result<Dataset, DataError> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| -> Result<usize, DataError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Parse(format!("column '{name}' not found in header")))
    };
    let class_idx = find(class_column)?;
    let attr_cols: Vec<usize> = schema
        .attributes
        .iter()
        .map(|a| find(&a.name))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let cell = |idx: usize| -> Result<&str, DataError> {
            let raw = record
                .get(idx)
                .ok_or_else(|| DataError::Parse(format!("row {k} too short")))?;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                return Err(DataError::Value {
                    row: k,
                    attr: header[idx].to_string(),
                    detail: "missing value".into(),
                });
            }
            Ok(trimmed)
        };
        let mut row = Vec::with_capacity(schema.n_attributes());
        for (i, &col) in attr_cols.iter().enumerate() {
            let raw = cell(col)?;
            let value = match &schema.attributes[i].kind {
                AttributeKind::Numerical { .. } => Value::Real(raw.parse::<f64>().map_err(
                    |e| DataError::Value {
                        row: k,
                        attr: schema.attributes[i].name.clone(),
                        detail: e.to_string(),
                    },
                )?),
                _ => Value::Int(raw.parse::<i64>().map_err(|e| DataError::Value {
                    row: k,
                    attr: schema.attributes[i].name.clone(),
                    detail: e.to_string(),
                })?),
            };
            row.push(value);
        }
        let label: usize = cell(class_idx)?.parse().map_err(|e| DataError::Value {
            row: k,
            attr: class_column.to_string(),
            detail: format!("{e}"),
        })?;
        rows.push(row);
        labels.push(label);
    }
    Dataset::new(schema.clone(), rows, labels, class_column)
}

/// Splits off a training sample of exactly `n` rows; the rest become the
/// holdout. Deterministic for a fixed seed.
pub fn sample_training_set(
    dataset: &Dataset,
    n: usize,
    seed: u64,
) -> Result<(Dataset, Option<Dataset>), DataError> {
    let total = dataset.n_rows();
    if n == 0 || n > total {
        return Err(DataError::SampleSize { n, max: total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..total).collect();
    indices.shuffle(&mut rng);
    let pick = |idx: &[usize]| {
        let rows = idx.iter().map(|&i| dataset.rows[i].clone()).collect();
        let labels = idx.iter().map(|&i| dataset.labels[i]).collect();
        Dataset::new(dataset.schema.clone(), rows, labels, dataset.class_column.clone())
    };
    let train = pick(&indices[..n])?;
    let holdout = if n == total { None } else { Some(pick(&indices[n..])?) };
    Ok((train, holdout))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table1_schema() -> AttributeSchema {
        AttributeSchema::new(
            (1..=4)
                .map(|i| Attribute { name: format!("f{i}"), kind: AttributeKind::Binary })
                .collect(),
            vec![],
            2,
        )
        .unwrap()
    }

    const TABLE1_CSV: &str = "f1,f2,f3,f4,c\n0,0,0,1,0\n1,0,0,0,0\n0,1,0,0,1\n1,0,1,1,1\n";

    #[test]
    fn loads_four_row_binary_table() {
        let ds = load_dataset_from_str(TABLE1_CSV, &table1_schema(), "c").unwrap();
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.schema.n_attributes(), 4);
        assert_eq!(ds.labels, vec![0, 0, 1, 1]);
        assert_eq!(ds.rows[3], vec![Value::Int(1), Value::Int(0), Value::Int(1), Value::Int(1)]);
    }

    #[test]
    fn empty_data_section_is_an_error() {
        let err = load_dataset_from_str("f1,f2,f3,f4,c\n", &table1_schema(), "c").unwrap_err();
        assert!(matches!(err, DataError::NoRows));
    }

    #[test]
    fn two_ones_in_a_group_is_a_one_hot_violation() {
        let schema = AttributeSchema::new(
            vec![
                Attribute { name: "a0".into(), kind: AttributeKind::OneHotMember { group_id: 0 } },
                Attribute { name: "a1".into(), kind: AttributeKind::OneHotMember { group_id: 0 } },
            ],
            vec![vec![0, 1]],
            2,
        )
        .unwrap();
        let err = load_dataset_from_str("a0,a1,c\n1,1,0\n", &schema, "c").unwrap_err();
        match err {
            DataError::OneHot { row, group, .. } => {
                assert_eq!(row, 0);
                assert_eq!(group, 0);
            }
            other => panic!("expected one-hot violation, got {other}"),
        }
    }

    #[test]
    fn missing_values_are_rejected() {
        let err = load_dataset_from_str(
            "f1,f2,f3,f4,c\n0,,0,1,0\n",
            &table1_schema(),
            "c",
        )
        .unwrap_err();
        assert!(matches!(err, DataError::Value { .. }));
    }

    #[test]
    fn full_sample_leaves_empty_holdout() {
        let ds = load_dataset_from_str(TABLE1_CSV, &table1_schema(), "c").unwrap();
        let (train, holdout) = sample_training_set(&ds, 4, 7).unwrap();
        assert_eq!(train.n_rows(), 4);
        assert!(holdout.is_none());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let ds = load_dataset_from_str(TABLE1_CSV, &table1_schema(), "c").unwrap();
        let (a, _) = sample_training_set(&ds, 2, 123).unwrap();
        let (b, _) = sample_training_set(&ds, 2, 123).unwrap();
        assert_eq!(a, b);
        let (c, _) = sample_training_set(&ds, 2, 124).unwrap();
        let _ = c; // a different seed may or may not coincide; only equality above is contract
    }

    #[test]
    fn sample_partitions_the_row_multiset() {
        // 200 synthetic rows over 3 binary attributes, so duplicates abound.
        let schema = AttributeSchema::new(
            (0..3)
                .map(|i| Attribute { name: format!("b{i}"), kind: AttributeKind::Binary })
                .collect(),
            vec![],
            2,
        )
        .unwrap();
        let rows: Vec<Vec<Value>> = (0..200)
            .map(|k| (0..3).map(|i| Value::Int(((k >> i) & 1) as i64)).collect())
            .collect();
        let labels: Vec<usize> = (0..200).map(|k| k % 2).collect();
        let ds = Dataset::new(schema, rows, labels, "c").unwrap();
        let (train, holdout) = sample_training_set(&ds, 100, 99).unwrap();
        let holdout = holdout.unwrap();
        assert_eq!(train.n_rows(), 100);
        assert_eq!(holdout.n_rows(), 100);

        let key = |ds: &Dataset| {
            let mut items: Vec<String> = ds
                .rows
                .iter()
                .zip(&ds.labels)
                .map(|(r, l)| {
                    let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                    format!("{}|{}", cells.join(","), l)
                })
                .collect();
            items.sort();
            items
        };
        let mut combined = key(&train);
        combined.extend(key(&holdout));
        combined.sort();
        assert_eq!(combined, key(&ds));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let schema = AttributeSchema::new(
            vec![
                Attribute { name: "b".into(), kind: AttributeKind::Binary },
                Attribute { name: "o".into(), kind: AttributeKind::Ordinal { domain: vec![1, 3, 7] } },
                Attribute {
                    name: "x".into(),
                    kind: AttributeKind::Numerical { lower_bound: None, upper_bound: None },
                },
            ],
            vec![],
            2,
        )
        .unwrap();
        let ds = Dataset::new(
            schema,
            vec![
                vec![Value::Int(1), Value::Int(3), Value::Real(0.1 + 0.2)],
                vec![Value::Int(0), Value::Int(7), Value::Real(-1.25e-7)],
            ],
            vec![0, 1],
            "c",
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("forestleak-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        ds.save(&path).unwrap();
        let loaded = load_dataset(&path, &ds.schema, "c").unwrap();
        assert_eq!(loaded, ds);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn schema_rejects_small_groups_and_bad_domains() {
        let bad_group = AttributeSchema::new(
            vec![Attribute { name: "a".into(), kind: AttributeKind::OneHotMember { group_id: 0 } }],
            vec![vec![0]],
            2,
        );
        assert!(bad_group.is_err());
        let bad_domain = AttributeSchema::new(
            vec![Attribute { name: "o".into(), kind: AttributeKind::Ordinal { domain: vec![3, 1] } }],
            vec![],
            2,
        );
        assert!(bad_domain.is_err());
        let bad_bounds = AttributeSchema::new(
            vec![Attribute {
                name: "x".into(),
                kind: AttributeKind::Numerical { lower_bound: Some(2.0), upper_bound: Some(1.0) },
            }],
            vec![],
            2,
        );
        assert!(bad_bounds.is_err());
    }

    #[test]
    fn units_collapse_groups() {
        let schema = AttributeSchema::new(
            vec![
                Attribute { name: "b".into(), kind: AttributeKind::Binary },
                Attribute { name: "g0".into(), kind: AttributeKind::OneHotMember { group_id: 0 } },
                Attribute { name: "g1".into(), kind: AttributeKind::OneHotMember { group_id: 0 } },
                Attribute { name: "h".into(), kind: AttributeKind::Binary },
            ],
            vec![vec![1, 2]],
            2,
        )
        .unwrap();
        let units = schema.units();
        assert_eq!(units.len(), 3);
        assert_eq!(units[0], Unit::Single(0));
        assert_eq!(units[1], Unit::Group { group_id: 0, members: vec![1, 2] });
        assert_eq!(units[2], Unit::Single(3));
    }
}
