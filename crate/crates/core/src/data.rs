//! Dataset loading, cleaning, and normalization.
//!
//! Supports the two UCI-format disease files (breast cancer diagnostics and
//! chronic kidney disease) plus any same-shaped CSV described by a sidecar
//! schema. Splitting is seeded, all statistics (min/max, medians, modes,
//! categorical levels) are fitted on the train split only, and every
//! operation is a pure function over immutable inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Tensor2;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: expected {expected} columns, got {got}")]
    ColumnCount {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row}, column {column}: unknown categorical level {level:?}")]
    UnknownLevel {
        row: usize,
        column: String,
        level: String,
    },
    #[error("feature {feature:?} has no observed values in the train split")]
    AllMissing { feature: String },
    #[error("feature {feature:?} contains missing values; impute before normalizing")]
    NotImputed { feature: String },
    #[error("feature {feature:?} has no fitted min/max")]
    NotFitted { feature: String },
    #[error("schema sidecar error: {0}")]
    Sidecar(String),
    #[error("dataset is empty")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// Per-feature metadata after encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Ordered levels for categorical features; encoded value is the index
    /// (or 0/1 membership for one-hot columns).
    pub categories: Vec<String>,
    pub observed_min: Option<f64>,
    pub observed_max: Option<f64>,
}

/// One feature vector with an optional binary label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: Option<u8>,
}

/// A split, encoded dataset with its feature metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: String,
    pub specs: Vec<FeatureSpec>,
    pub train: Vec<Record>,
    pub test: Vec<Record>,
    pub n: usize,
    pub seed: u64,
    pub normalized: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemaKind {
    Wdbc,
    Ckd,
    Generic { sidecar: PathBuf },
}

/// Collect record features into a batch tensor.
pub fn records_matrix(records: &[Record]) -> Tensor2 {
    let cols = records.first().map_or(0, |r| r.features.len());
    let mut data = Vec::with_capacity(records.len() * cols);
    for r in records {
        data.extend_from_slice(&r.features);
    }
    Tensor2::from_vec(records.len(), cols, data)
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

enum ColumnDef {
    Numeric,
    /// (level encoded as 0, level encoded as 1)
    Binary(&'static str, &'static str),
}

const CKD_COLUMNS: &[(&str, ColumnDef)] = &[
    ("age", ColumnDef::Numeric),
    ("bp", ColumnDef::Numeric),
    ("sg", ColumnDef::Numeric),
    ("al", ColumnDef::Numeric),
    ("su", ColumnDef::Numeric),
    ("rbc", ColumnDef::Binary("normal", "abnormal")),
    ("pc", ColumnDef::Binary("normal", "abnormal")),
    ("pcc", ColumnDef::Binary("notpresent", "present")),
    ("ba", ColumnDef::Binary("notpresent", "present")),
    ("bgr", ColumnDef::Numeric),
    ("bu", ColumnDef::Numeric),
    ("sc", ColumnDef::Numeric),
    ("sod", ColumnDef::Numeric),
    ("pot", ColumnDef::Numeric),
    ("hemo", ColumnDef::Numeric),
    ("pcv", ColumnDef::Numeric),
    ("wc", ColumnDef::Numeric),
    ("rc", ColumnDef::Numeric),
    ("htn", ColumnDef::Binary("no", "yes")),
    ("dm", ColumnDef::Binary("no", "yes")),
    ("cad", ColumnDef::Binary("no", "yes")),
    ("appet", ColumnDef::Binary("good", "poor")),
    ("pe", ColumnDef::Binary("no", "yes")),
    ("ane", ColumnDef::Binary("no", "yes")),
];

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        let fields: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }
        rows.push(fields);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(rows)
}

/// 90/10 split of `0..count`, shuffled by `seed`.
fn split_indices(count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train_count = count * 9 / 10;
    let test = indices.split_off(train_count);
    (indices, test)
}

fn parse_numeric_cell(cell: &str, row: usize, column: &str) -> Result<f64, DataError> {
    if cell.is_empty() || cell == "?" {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>().map_err(|_| DataError::Parse {
        row,
        message: format!("column {column:?}: cannot parse {cell:?} as a number"),
    })
}

/// Load, encode, and split a CSV under the named schema. Labels map to 1 for
/// the disease-positive class. Statistics and categorical level sets are
/// fitted on the train split only.
pub fn load_csv(path: &Path, schema: &SchemaKind, seed: u64) -> Result<Dataset, DataError> {
    match schema {
        SchemaKind::Wdbc => load_wdbc(path, seed),
        SchemaKind::Ckd => load_ckd(path, seed),
        SchemaKind::Generic { sidecar } => load_generic(path, sidecar, seed),
    }
}

fn load_wdbc(path: &Path, seed: u64) -> Result<Dataset, DataError> {
    let mut rows = read_rows(path)?;
    // Header detection: the third field of a data row is a number.
    if rows[0].len() >= 3 && rows[0][2].parse::<f64>().is_err() {
        rows.remove(0);
    }
    let mut records = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rownum = i + 1;
        if row.len() != 32 {
            return Err(DataError::ColumnCount {
                row: rownum,
                expected: 32,
                got: row.len(),
            });
        }
        let label = match row[1].as_str() {
            "M" => 1u8,
            "B" => 0u8,
            other => {
                return Err(DataError::Parse {
                    row: rownum,
                    message: format!("diagnosis must be M or B, got {other:?}"),
                })
            }
        };
        let mut features = Vec::with_capacity(30);
        for (c, cell) in row[2..].iter().enumerate() {
            let v = parse_numeric_cell(cell, rownum, &format!("f{}", c + 1))?;
            if v.is_nan() {
                return Err(DataError::Parse {
                    row: rownum,
                    message: format!("column f{}: missing value", c + 1),
                });
            }
            features.push(v);
        }
        records.push(Record {
            features,
            label: Some(label),
        });
    }
    let specs = (0..30)
        .map(|c| FeatureSpec {
            name: format!("f{}", c + 1),
            kind: FeatureKind::Numeric,
            categories: Vec::new(),
            observed_min: None,
            observed_max: None,
        })
        .collect();
    assemble("wdbc", specs, records, seed)
}

fn load_ckd(path: &Path, seed: u64) -> Result<Dataset, DataError> {
    let mut rows = read_rows(path)?;
    if rows[0]
        .iter()
        .any(|f| f.eq_ignore_ascii_case("age") || f.eq_ignore_ascii_case("class"))
    {
        rows.remove(0);
    }
    let expected = CKD_COLUMNS.len() + 1;
    let mut records = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rownum = i + 1;
        if row.len() != expected {
            return Err(DataError::ColumnCount {
                row: rownum,
                expected,
                got: row.len(),
            });
        }
        let mut features = Vec::with_capacity(CKD_COLUMNS.len());
        for ((name, def), cell) in CKD_COLUMNS.iter().zip(row.iter()) {
            let value = match def {
                ColumnDef::Numeric => parse_numeric_cell(cell, rownum, name)?,
                ColumnDef::Binary(neg, pos) => {
                    let lower = cell.to_ascii_lowercase();
                    if lower.is_empty() || lower == "?" {
                        f64::NAN
                    } else if lower == *neg {
                        0.0
                    } else if lower == *pos {
                        1.0
                    } else {
                        return Err(DataError::UnknownLevel {
                            row: rownum,
                            column: (*name).to_string(),
                            level: cell.clone(),
                        });
                    }
                }
            };
            features.push(value);
        }
        let label = match row[expected - 1].to_ascii_lowercase().as_str() {
            "ckd" => 1u8,
            "notckd" => 0u8,
            other => {
                return Err(DataError::Parse {
                    row: rownum,
                    message: format!("class must be ckd or notckd, got {other:?}"),
                })
            }
        };
        records.push(Record {
            features,
            label: Some(label),
        });
    }
    let specs = CKD_COLUMNS
        .iter()
        .map(|(name, def)| match def {
            ColumnDef::Numeric => FeatureSpec {
                name: (*name).to_string(),
                kind: FeatureKind::Numeric,
                categories: Vec::new(),
                observed_min: None,
                observed_max: None,
            },
            ColumnDef::Binary(neg, pos) => FeatureSpec {
                name: (*name).to_string(),
                kind: FeatureKind::Categorical,
                categories: vec![(*neg).to_string(), (*pos).to_string()],
                observed_min: None,
                observed_max: None,
            },
        })
        .collect();
    assemble("ckd", specs, records, seed)
}

#[derive(Deserialize)]
struct Sidecar {
    label: String,
    positive: String,
    #[serde(default)]
    drop: Vec<String>,
    #[serde(default = "default_missing")]
    missing: String,
    #[serde(default)]
    kinds: BTreeMap<String, String>,
}

fn default_missing() -> String {
    "?".to_string()
}

fn load_generic(path: &Path, sidecar: &Path, seed: u64) -> Result<Dataset, DataError> {
    let sidecar_text = fs::read_to_string(sidecar).map_err(|source| DataError::Io {
        path: sidecar.display().to_string(),
        source,
    })?;
    let sc: Sidecar =
        toml::from_str(&sidecar_text).map_err(|e| DataError::Sidecar(e.to_string()))?;

    let rows = read_rows(path)?;
    let header = rows[0].clone();
    let data_rows = &rows[1..];
    if data_rows.is_empty() {
        return Err(DataError::Empty);
    }
    let label_idx = header
        .iter()
        .position(|h| *h == sc.label)
        .ok_or_else(|| DataError::Sidecar(format!("label column {:?} not found", sc.label)))?;
    let keep: Vec<usize> = (0..header.len())
        .filter(|i| *i != label_idx && !sc.drop.contains(&header[*i]))
        .collect();
    for (col, kind) in &sc.kinds {
        if !header.contains(col) {
            return Err(DataError::Sidecar(format!("kinds column {col:?} not found")));
        }
        if kind != "numeric" && kind != "categorical" {
            return Err(DataError::Sidecar(format!(
                "kind for {col:?} must be numeric or categorical, got {kind:?}"
            )));
        }
    }

    // Parse cells first, split second, then fit level sets on train rows.
    struct RawRow {
        cells: Vec<String>,
        label: u8,
    }
    let mut raw = Vec::with_capacity(data_rows.len());
    for (i, row) in data_rows.iter().enumerate() {
        let rownum = i + 1;
        if row.len() != header.len() {
            return Err(DataError::ColumnCount {
                row: rownum,
                expected: header.len(),
                got: row.len(),
            });
        }
        let label_cell = &row[label_idx];
        if label_cell == &sc.missing || label_cell.is_empty() {
            return Err(DataError::Parse {
                row: rownum,
                message: "missing label".to_string(),
            });
        }
        let label = u8::from(*label_cell == sc.positive);
        raw.push(RawRow {
            cells: keep.iter().map(|k| row[*k].clone()).collect(),
            label,
        });
    }

    let (train_idx, test_idx) = split_indices(raw.len(), seed);

    // Column plans: categorical levels observed in the train split.
    enum Plan {
        Numeric { name: String },
        Binary { name: String, levels: Vec<String> },
        OneHot { name: String, levels: Vec<String> },
    }
    let mut plans = Vec::new();
    for (ci, keep_idx) in keep.iter().enumerate() {
        let name = header[*keep_idx].clone();
        let categorical = sc.kinds.get(&name).map(String::as_str) == Some("categorical");
        if categorical {
            let mut levels: Vec<String> = train_idx
                .iter()
                .map(|ri| raw[*ri].cells[ci].clone())
                .filter(|c| !c.is_empty() && *c != sc.missing)
                .collect();
            levels.sort();
            levels.dedup();
            if levels.is_empty() {
                return Err(DataError::AllMissing { feature: name });
            }
            if levels.len() <= 2 {
                plans.push(Plan::Binary { name, levels });
            } else {
                plans.push(Plan::OneHot { name, levels });
            }
        } else {
            plans.push(Plan::Numeric { name });
        }
    }

    let mut specs = Vec::new();
    for plan in &plans {
        match plan {
            Plan::Numeric { name } => specs.push(FeatureSpec {
                name: name.clone(),
                kind: FeatureKind::Numeric,
                categories: Vec::new(),
                observed_min: None,
                observed_max: None,
            }),
            Plan::Binary { name, levels } => specs.push(FeatureSpec {
                name: name.clone(),
                kind: FeatureKind::Categorical,
                categories: levels.clone(),
                observed_min: None,
                observed_max: None,
            }),
            Plan::OneHot { name, levels } => {
                for level in levels {
                    specs.push(FeatureSpec {
                        name: format!("{name}={level}"),
                        kind: FeatureKind::Categorical,
                        categories: vec!["absent".to_string(), level.clone()],
                        observed_min: None,
                        observed_max: None,
                    });
                }
            }
        }
    }

    let mut records = Vec::with_capacity(raw.len());
    for (i, row) in raw.iter().enumerate() {
        let rownum = i + 1;
        let mut features = Vec::with_capacity(specs.len());
        for (ci, plan) in plans.iter().enumerate() {
            let cell = &row.cells[ci];
            let is_missing = cell.is_empty() || *cell == sc.missing;
            match plan {
                Plan::Numeric { name } => {
                    features.push(if is_missing {
                        f64::NAN
                    } else {
                        parse_numeric_cell(cell, rownum, name)?
                    });
                }
                Plan::Binary { name, levels } => {
                    if is_missing {
                        features.push(f64::NAN);
                    } else if let Some(pos) = levels.iter().position(|l| l == cell) {
                        features.push(pos as f64);
                    } else {
                        return Err(DataError::UnknownLevel {
                            row: rownum,
                            column: name.clone(),
                            level: cell.clone(),
                        });
                    }
                }
                Plan::OneHot { name, levels } => {
                    if is_missing {
                        features.extend(std::iter::repeat(f64::NAN).take(levels.len()));
                    } else if levels.iter().any(|l| l == cell) {
                        for level in levels {
                            features.push(f64::from(level == cell));
                        }
                    } else {
                        return Err(DataError::UnknownLevel {
                            row: rownum,
                            column: name.clone(),
                            level: cell.clone(),
                        });
                    }
                }
            }
        }
        records.push(Record {
            features,
            label: Some(row.label),
        });
    }

    let schema = format!(
        "generic:{}",
        path.file_stem().map_or_else(String::new, |s| s
            .to_string_lossy()
            .to_string())
    );
    assemble_presplit(&schema, specs, records, seed, train_idx, test_idx)
}

fn assemble(
    schema: &str,
    specs: Vec<FeatureSpec>,
    records: Vec<Record>,
    seed: u64,
) -> Result<Dataset, DataError> {
    let (train_idx, test_idx) = split_indices(records.len(), seed);
    assemble_presplit(schema, specs, records, seed, train_idx, test_idx)
}

fn assemble_presplit(
    schema: &str,
    mut specs: Vec<FeatureSpec>,
    records: Vec<Record>,
    seed: u64,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
) -> Result<Dataset, DataError> {
    let train: Vec<Record> = train_idx.iter().map(|i| records[*i].clone()).collect();
    let test: Vec<Record> = test_idx.iter().map(|i| records[*i].clone()).collect();
    fit_min_max(&mut specs, &train);
    let n = specs.len();
    Ok(Dataset {
        schema: schema.to_string(),
        specs,
        train,
        test,
        n,
        seed,
        normalized: false,
        warnings: Vec::new(),
    })
}

/// Observed min/max of numeric features over non-missing train values.
fn fit_min_max(specs: &mut [FeatureSpec], train: &[Record]) {
    for (f, spec) in specs.iter_mut().enumerate() {
        if spec.kind != FeatureKind::Numeric {
            continue;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for r in train {
            let v = r.features[f];
            if v.is_nan() {
                continue;
            }
            min = min.min(v);
            max = max.max(v);
        }
        if min.is_finite() {
            spec.observed_min = Some(min);
            spec.observed_max = Some(max);
        } else {
            spec.observed_min = None;
            spec.observed_max = None;
        }
    }
}

// ---------------------------------------------------------------------------
// Cleaning and normalization
// ---------------------------------------------------------------------------

/// Fill missing entries: numeric features take the train-split median,
/// categorical features the train-split mode (ties to the smaller encoded
/// value). A dataset without missing values is returned unchanged.
pub fn impute(ds: &Dataset) -> Result<Dataset, DataError> {
    let mut out = ds.clone();
    for f in 0..ds.n {
        let has_missing = ds
            .train
            .iter()
            .chain(&ds.test)
            .any(|r| r.features[f].is_nan());
        if !has_missing {
            continue;
        }
        let observed: Vec<f64> = ds
            .train
            .iter()
            .map(|r| r.features[f])
            .filter(|v| !v.is_nan())
            .collect();
        if observed.is_empty() {
            return Err(DataError::AllMissing {
                feature: ds.specs[f].name.clone(),
            });
        }
        let fill = match ds.specs[f].kind {
            FeatureKind::Numeric => median(&observed),
            FeatureKind::Categorical => mode(&observed),
        };
        for r in out.train.iter_mut().chain(out.test.iter_mut()) {
            if r.features[f].is_nan() {
                r.features[f] = fill;
            }
        }
    }
    Ok(out)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

fn mode(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for v in values {
        let entry = counts.entry(v.to_bits()).or_insert((0, *v));
        entry.0 += 1;
    }
    let mut best = (0usize, f64::INFINITY);
    for (count, value) in counts.values() {
        if *count > best.0 || (*count == best.0 && *value < best.1) {
            best = (*count, *value);
        }
    }
    best.1
}

/// Map numeric features to [0,1] by the train-split min/max; test values are
/// clamped. Constant features map to 0 and are flagged in `warnings`.
/// Idempotent: specs are refitted on the mapped train split.
pub fn normalize(ds: &Dataset) -> Result<Dataset, DataError> {
    for (f, spec) in ds.specs.iter().enumerate() {
        for r in ds.train.iter().chain(&ds.test) {
            if !r.features[f].is_finite() {
                return Err(DataError::NotImputed {
                    feature: spec.name.clone(),
                });
            }
        }
    }
    let mut out = ds.clone();
    for (f, spec) in ds.specs.iter().enumerate() {
        if spec.kind != FeatureKind::Numeric {
            continue;
        }
        let min = spec.observed_min.ok_or_else(|| DataError::NotFitted {
            feature: spec.name.clone(),
        })?;
        let max = spec.observed_max.ok_or_else(|| DataError::NotFitted {
            feature: spec.name.clone(),
        })?;
        if max == min {
            for r in out.train.iter_mut().chain(out.test.iter_mut()) {
                r.features[f] = 0.0;
            }
            let warning = format!("feature {:?} is constant on the train split", spec.name);
            if !out.warnings.contains(&warning) {
                out.warnings.push(warning);
            }
        } else {
            let range = max - min;
            for r in &mut out.train {
                r.features[f] = (r.features[f] - min) / range;
            }
            for r in &mut out.test {
                r.features[f] = ((r.features[f] - min) / range).clamp(0.0, 1.0);
            }
        }
    }
    fit_min_max(&mut out.specs, &out.train);
    out.normalized = true;
    Ok(out)
}

impl Dataset {
    pub fn train_matrix(&self) -> Tensor2 {
        records_matrix(&self.train)
    }

    pub fn test_matrix(&self) -> Tensor2 {
        records_matrix(&self.test)
    }

    /// Identifier used in model metadata.
    pub fn id(&self) -> String {
        format!("{}#seed{}", self.schema, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn dataset_from_columns(train: Vec<Vec<f64>>, test: Vec<Vec<f64>>) -> Dataset {
        let n = train[0].len();
        let mut specs: Vec<FeatureSpec> = (0..n)
            .map(|i| FeatureSpec {
                name: format!("c{i}"),
                kind: FeatureKind::Numeric,
                categories: Vec::new(),
                observed_min: None,
                observed_max: None,
            })
            .collect();
        let train: Vec<Record> = train
            .into_iter()
            .map(|features| Record {
                features,
                label: Some(0),
            })
            .collect();
        let test: Vec<Record> = test
            .into_iter()
            .map(|features| Record {
                features,
                label: Some(1),
            })
            .collect();
        fit_min_max(&mut specs, &train);
        Dataset {
            schema: "test".to_string(),
            specs,
            train,
            test,
            n,
            seed: 0,
            normalized: false,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn normalize_maps_endpoints() {
        let ds = dataset_from_columns(vec![vec![2.0], vec![4.0], vec![6.0]], vec![]);
        let out = normalize(&ds).unwrap();
        let values: Vec<f64> = out.train.iter().map(|r| r.features[0]).collect();
        assert_eq!(values, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero_with_warning() {
        let ds = dataset_from_columns(vec![vec![5.0], vec![5.0], vec![5.0]], vec![]);
        let out = normalize(&ds).unwrap();
        assert!(out.train.iter().all(|r| r.features[0] == 0.0));
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn test_values_below_train_min_clamp_to_zero() {
        let ds = dataset_from_columns(vec![vec![2.0], vec![6.0]], vec![vec![1.0], vec![9.0]]);
        let out = normalize(&ds).unwrap();
        assert_eq!(out.test[0].features[0], 0.0);
        assert_eq!(out.test[1].features[0], 1.0);
    }

    #[test]
    fn normalize_is_idempotent() {
        let ds = dataset_from_columns(
            vec![vec![2.0, 5.0], vec![4.0, 5.0], vec![6.0, 5.0]],
            vec![vec![3.0, 5.0]],
        );
        let once = normalize(&ds).unwrap();
        let twice = normalize(&once).unwrap();
        for (a, b) in once.train.iter().zip(&twice.train) {
            assert_eq!(a.features, b.features);
        }
        for (a, b) in once.test.iter().zip(&twice.test) {
            assert_eq!(a.features, b.features);
        }
    }

    #[test]
    fn impute_uses_train_median() {
        let mut ds = dataset_from_columns(vec![vec![1.0], vec![f64::NAN], vec![3.0]], vec![]);
        ds.specs[0].kind = FeatureKind::Numeric;
        let out = impute(&ds).unwrap();
        assert_eq!(out.train[1].features[0], 2.0);
    }

    #[test]
    fn impute_uses_train_mode_for_categorical() {
        let mut ds = dataset_from_columns(
            vec![vec![1.0], vec![f64::NAN], vec![1.0], vec![0.0]],
            vec![],
        );
        ds.specs[0].kind = FeatureKind::Categorical;
        let out = impute(&ds).unwrap();
        assert_eq!(out.train[1].features[0], 1.0);
    }

    #[test]
    fn impute_without_missing_is_identity() {
        let ds = dataset_from_columns(vec![vec![1.0], vec![2.0]], vec![vec![3.0]]);
        let out = impute(&ds).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn impute_fails_when_feature_all_missing_in_train() {
        let ds = dataset_from_columns(vec![vec![f64::NAN], vec![f64::NAN]], vec![vec![1.0]]);
        assert!(matches!(
            impute(&ds),
            Err(DataError::AllMissing { .. })
        ));
    }

    #[test]
    fn test_statistics_never_influence_fitting() {
        let base = dataset_from_columns(
            vec![vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, f64::NAN]],
            vec![vec![2.0, 1.0]],
        );
        let mut corrupted = base.clone();
        corrupted.test[0].features = vec![1e9, f64::NAN];
        let a = normalize(&impute(&base).unwrap()).unwrap();
        let b = normalize(&impute(&corrupted).unwrap()).unwrap();
        assert_eq!(a.specs, b.specs);
        for (x, y) in a.train.iter().zip(&b.train) {
            assert_eq!(x.features, y.features);
        }
    }

    #[test]
    fn split_is_a_partition_for_every_seed() {
        for seed in 0..20u64 {
            let (train, test) = split_indices(57, seed);
            assert_eq!(train.len() + test.len(), 57);
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..57).collect::<Vec<_>>());
            assert_eq!(train.len(), 57 * 9 / 10);
        }
    }

    #[test]
    fn loads_wdbc_shaped_file() {
        let mut tmp = tempfile::NamedTempFile::new().unwrap();
        for i in 0..20 {
            let label = if i % 3 == 0 { "M" } else { "B" };
            let features: Vec<String> =
                (0..30).map(|c| format!("{}", (i * 31 + c) as f64 * 0.1)).collect();
            writeln!(tmp, "{},{},{}", i, label, features.join(",")).unwrap();
        }
        let ds = load_csv(tmp.path(), &SchemaKind::Wdbc, 3).unwrap();
        assert_eq!(ds.n, 30);
        assert_eq!(ds.train.len(), 18);
        assert_eq!(ds.test.len(), 2);
        // Determinism under the same seed.
        let ds2 = load_csv(tmp.path(), &SchemaKind::Wdbc, 3).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn malformed_row_names_its_index() {
        let mut tmp = tempfile::NamedTempFile::new().unwrap();
        let good: Vec<String> = (0..30).map(|c| format!("{c}.0")).collect();
        writeln!(tmp, "1,M,{}", good.join(",")).unwrap();
        writeln!(tmp, "2,M,oops").unwrap();
        let err = load_csv(tmp.path(), &SchemaKind::Wdbc, 0).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn ckd_unknown_level_is_an_encoding_error() {
        let mut tmp = tempfile::NamedTempFile::new().unwrap();
        let header: Vec<&str> = CKD_COLUMNS.iter().map(|(n, _)| *n).collect();
        writeln!(tmp, "{},class", header.join(",")).unwrap();
        // rbc column holds a level outside {normal, abnormal}.
        writeln!(
            tmp,
            "50,80,1.02,0,0,strange,normal,notpresent,notpresent,120,30,1.0,140,4.0,15.0,45,8000,5.0,no,no,no,good,no,no,ckd"
        )
        .unwrap();
        let err = load_csv(tmp.path(), &SchemaKind::Ckd, 0).unwrap_err();
        assert!(matches!(err, DataError::UnknownLevel { .. }), "{err}");
    }
}
