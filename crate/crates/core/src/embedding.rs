//! Candidate embedding.
//!
//! Each expression slot of a candidate is evaluated at every row of a
//! baseline feature table and reduced to its mean, so a candidate becomes a
//! point with one coordinate per slot. Candidates with the same phenotype
//! land on the same point; small phenotype edits move it a little.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symreg::{ConstantsPool, ExprTree, SymRegError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read feature table {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed feature table: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature table has no header or no data rows")]
    Empty,
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row} column {column}: `{value}` is not a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row} column {column}: non-finite value")]
    NonFinite { row: usize, column: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error(transparent)]
    Expr(#[from] SymRegError),
    #[error("expected {expected} expressions, got {got}")]
    SlotCount { expected: usize, got: usize },
}

/// Named, equal-length, finite columns sampled from a baseline solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub source: Option<PathBuf>,
}

impl FeatureTable {
    /// Build from named columns; every column must be non-empty, the same
    /// length and finite.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, IngestError> {
        if names.is_empty() || columns.is_empty() || columns[0].is_empty() {
            return Err(IngestError::Empty);
        }
        assert_eq!(names.len(), columns.len(), "one name per column");
        let m = columns[0].len();
        for (k, name) in names.iter().enumerate() {
            if names[..k].contains(name) {
                return Err(IngestError::DuplicateColumn(name.clone()));
            }
            if columns[k].len() != m {
                return Err(IngestError::Ragged { row: columns[k].len().min(m) + 1, expected: m, found: columns[k].len() });
            }
            if let Some(i) = columns[k].iter().position(|v| !v.is_finite()) {
                return Err(IngestError::NonFinite { row: i + 1, column: name.clone() });
            }
        }
        Ok(Self { names, columns, source: None })
    }

    pub fn from_pairs(pairs: &[(&str, Vec<f64>)]) -> Result<Self, IngestError> {
        Self::new(
            pairs.iter().map(|(n, _)| n.to_string()).collect(),
            pairs.iter().map(|(_, c)| c.clone()).collect(),
        )
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.columns[k].as_slice())
    }

    /// Row `i` in column order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    pub fn column_means(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }

    /// Reorder rows by `perm` (a permutation of `0..n_rows`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let columns = self.columns.iter().map(|c| perm.iter().map(|&i| c[i]).collect()).collect();
        Self { names: self.names.clone(), columns, source: self.source.clone() }
    }

    /// Write as comma-separated text with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.names)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush().map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
    }
}

/// Read a comma-separated feature table with a header row of symbol names.
/// Errors name the 1-based data row and the column.
pub fn ingest_feature_table(path: &Path) -> Result<FeatureTable, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut table = parse_feature_table(&text)?;
    table.source = Some(path.to_path_buf());
    Ok(table)
}

pub fn parse_feature_table(text: &str) -> Result<FeatureTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(|n| n.is_empty()) {
        return Err(IngestError::Empty);
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != names.len() {
            return Err(IngestError::Ragged { row, expected: names.len(), found: rec.len() });
        }
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| IngestError::NonNumeric {
                row,
                column: names[k].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(IngestError::NonFinite { row, column: names[k].clone() });
            }
            columns[k].push(v);
        }
    }
    FeatureTable::new(names, columns)
}

/// Order of averaging and evaluation when embedding an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Evaluate at every row, then average the outputs.
    #[default]
    PointwiseMean,
    /// Average the input columns first, then evaluate once.
    MeanInputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Vec<f64>,
    pub normalized: bool,
}

impl Embedding {
    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|v| v.is_finite())
    }
}

/// Map a candidate's expressions (one per slot) to a point.
///
/// A non-finite pointwise value makes its coordinate non-finite; callers
/// treat such candidates as diverged.
pub fn embed(
    exprs: &[ExprTree],
    table: &FeatureTable,
    pool: &ConstantsPool,
    aggregation: Aggregation,
) -> Result<Embedding, EmbedError> {
    let coords = exprs
        .iter()
        .map(|t| {
            let f = t.compile(table.names(), pool)?;
            Ok(match aggregation {
                Aggregation::PointwiseMean => {
                    let m = table.n_rows();
                    let mut row = vec![0.0; table.names().len()];
                    let mut sum = 0.0;
                    for i in 0..m {
                        for (v, c) in row.iter_mut().zip(&table.columns) {
                            *v = c[i];
                        }
                        sum += f.eval(&row);
                    }
                    sum / m as f64
                }
                Aggregation::MeanInputs => f.eval(&table.column_means()),
            })
        })
        .collect::<Result<Vec<f64>, SymRegError>>()?;
    Ok(Embedding { coords, normalized: false })
}

/// Per-dimension standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population mean and standard deviation over the finite points.
    pub fn fit(points: &[Vec<f64>]) -> Self {
        let finite: Vec<&Vec<f64>> = points.iter().filter(|p| p.iter().all(|v| v.is_finite())).collect();
        let d = points.first().map_or(0, |p| p.len());
        let n = finite.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|k| finite.iter().map(|p| p[k]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|k| (finite.iter().map(|p| (p[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Self { mean, std }
    }

    /// Zero-variance dimensions map to 0.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }
}

/// Standardize `points`, fitting fresh statistics unless frozen ones are
/// supplied. Already-normalized embeddings pass through unchanged.
pub fn normalize(points: &[Embedding], stats: Option<&NormStats>) -> (Vec<Embedding>, NormStats) {
    let stats = match stats {
        Some(s) => s.clone(),
        None => {
            let raw: Vec<Vec<f64>> = points.iter().filter(|p| !p.normalized).map(|p| p.coords.clone()).collect();
            NormStats::fit(&raw)
        }
    };
    let out = points
        .iter()
        .map(|p| {
            if p.normalized {
                p.clone()
            } else {
                Embedding { coords: stats.apply(&p.coords), normalized: true }
            }
        })
        .collect();
    (out, stats)
}
