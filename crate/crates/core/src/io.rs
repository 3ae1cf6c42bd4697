//! Dataset ingestion and persistence.
//!
//! Input CSV: header row, columns `y1, y2, delta1, delta2` (names remappable
//! through a [`Schema`]) and covariate columns. Categorical covariates are
//! encoded as the index of their level in lexicographic order.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::survival::CensoredRecord;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: {message}")]
    ParseError { row: usize, column: String, message: String },
    #[error("row {row}: negative time")]
    NegativeTime { row: usize },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

impl CovariateKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, CovariateKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<CensoredRecord>,
    pub covariate_names: Vec<String>,
    pub covariate_kinds: Vec<CovariateKind>,
    pub source: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    /// Numeric code of a categorical level.
    pub fn level_code(&self, index: usize, level: &str) -> Option<f64> {
        match &self.covariate_kinds[index] {
            CovariateKind::Categorical { levels } => levels.iter().position(|l| l == level).map(|p| p as f64),
            CovariateKind::Continuous => None,
        }
    }

    /// Same dataset restricted to the records accepted by `keep`.
    pub fn filter(&self, keep: impl Fn(&CensoredRecord) -> bool) -> Dataset {
        Dataset { records: self.records.iter().filter(|r| keep(r)).cloned().collect(), ..self.clone() }
    }
}

/// Declared kind of a covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateColumn {
    pub name: String,
    /// Header in the file; defaults to `name`.
    #[serde(default)]
    pub column: Option<String>,
    pub kind: DeclaredKind,
}

/// Column name mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default = "default_y1")]
    pub y1: String,
    #[serde(default = "default_y2")]
    pub y2: String,
    #[serde(default = "default_delta1")]
    pub delta1: String,
    #[serde(default = "default_delta2")]
    pub delta2: String,
    /// `None`: every remaining column, kind inferred (numeric columns are
    /// continuous).
    #[serde(default)]
    pub covariates: Option<Vec<CovariateColumn>>,
}

fn default_y1() -> String {
    "y1".into()
}
fn default_y2() -> String {
    "y2".into()
}
fn default_delta1() -> String {
    "delta1".into()
}
fn default_delta2() -> String {
    "delta2".into()
}

impl Default for Schema {
    fn default() -> Self {
        Self { y1: default_y1(), y2: default_y2(), delta1: default_delta1(), delta2: default_delta2(), covariates: None }
    }
}

impl Schema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset, IoError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut ds = read_csv(file, schema)?;
    ds.source = path.display().to_string();
    Ok(ds)
}

/// Parse a dataset from any reader.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| IoError::MissingColumn(name.to_string()))
    };
    let core = [find(&schema.y1)?, find(&schema.y2)?, find(&schema.delta1)?, find(&schema.delta2)?];
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;

    let columns: Vec<(String, usize, Option<DeclaredKind>)> = match &schema.covariates {
        Some(cols) => cols
            .iter()
            .map(|c| Ok((c.name.clone(), find(c.column.as_deref().unwrap_or(&c.name))?, Some(c.kind))))
            .collect::<Result<_, IoError>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !core.contains(i))
            .map(|(i, h)| (h.clone(), i, None))
            .collect(),
    };

    let mut kinds = Vec::with_capacity(columns.len());
    for (_, idx, declared) in &columns {
        let numeric = rows.iter().all(|r| r.get(*idx).is_some_and(|s| s.parse::<f64>().is_ok()));
        let categorical = match declared {
            Some(DeclaredKind::Categorical) => true,
            Some(DeclaredKind::Continuous) => false,
            None => !numeric,
        };
        kinds.push(if categorical {
            let levels: BTreeSet<String> = rows.iter().filter_map(|r| r.get(*idx)).map(str::to_string).collect();
            CovariateKind::Categorical { levels: levels.into_iter().collect() }
        } else {
            CovariateKind::Continuous
        });
    }

    let mut records = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let line = k + 1;
        let field = |idx: usize| -> Result<&str, IoError> {
            row.get(idx).filter(|s| !s.is_empty()).ok_or_else(|| IoError::ParseError {
                row: line,
                column: headers[idx].clone(),
                message: "empty field".into(),
            })
        };
        let number = |idx: usize| -> Result<f64, IoError> {
            let s = field(idx)?;
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| IoError::ParseError {
                row: line,
                column: headers[idx].clone(),
                message: format!("{s:?} is not a finite number"),
            })
        };
        let indicator = |idx: usize| -> Result<bool, IoError> {
            match number(idx)? {
                0.0 => Ok(false),
                1.0 => Ok(true),
                v => Err(IoError::ParseError {
                    row: line,
                    column: headers[idx].clone(),
                    message: format!("censoring indicator must be 0 or 1, got {v}"),
                }),
            }
        };
        let (y1, y2) = (number(core[0])?, number(core[1])?);
        if y1 < 0.0 || y2 < 0.0 {
            return Err(IoError::NegativeTime { row: line });
        }
        let (d1, d2) = (indicator(core[2])?, indicator(core[3])?);
        let mut z = Vec::with_capacity(columns.len());
        for ((_, idx, _), kind) in columns.iter().zip(&kinds) {
            z.push(match kind {
                CovariateKind::Continuous => number(*idx)?,
                CovariateKind::Categorical { levels } => {
                    let s = field(*idx)?;
                    levels.iter().position(|l| l == s).unwrap() as f64
                }
            });
        }
        records.push(CensoredRecord::new(y1, y2, d1, d2, z));
    }
    Ok(Dataset {
        records,
        covariate_names: columns.into_iter().map(|c| c.0).collect(),
        covariate_kinds: kinds,
        source: String::new(),
    })
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), IoError> {
    let file = std::fs::File::create(path)?;
    write_csv_to(dataset, file)
}

/// Write the dataset; categorical covariates are written as level strings,
/// numbers in shortest round-trip form.
pub fn write_csv_to<W: std::io::Write>(dataset: &Dataset, writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["y1".to_string(), "y2".into(), "delta1".into(), "delta2".into()];
    header.extend(dataset.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for r in &dataset.records {
        let mut row = vec![r.y1.to_string(), r.y2.to_string(), u8::from(r.delta1).to_string(), u8::from(r.delta2).to_string()];
        for (v, kind) in r.z.iter().zip(&dataset.covariate_kinds) {
            row.push(match kind {
                CovariateKind::Continuous => v.to_string(),
                CovariateKind::Categorical { levels } => levels[*v as usize].clone(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Schema that reproduces a dataset's covariate kinds when reading back a
/// file written by [`write_csv`].
pub fn schema_for(dataset: &Dataset) -> Schema {
    Schema {
        covariates: Some(
            dataset
                .covariate_names
                .iter()
                .zip(&dataset.covariate_kinds)
                .map(|(n, k)| CovariateColumn {
                    name: n.clone(),
                    column: None,
                    kind: if k.is_categorical() { DeclaredKind::Categorical } else { DeclaredKind::Continuous },
                })
                .collect(),
        ),
        ..Schema::default()
    }
}
