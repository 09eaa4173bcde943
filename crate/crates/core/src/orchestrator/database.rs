use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, RunError};
use crate::symreg::Provenance;

/// One scored candidate as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub generation: usize,
    pub id: u64,
    pub phenotype_keys: Vec<String>,
    /// Genotype tokens per slot.
    pub genotypes: Vec<String>,
    /// Raw embedding; absent when not finite.
    pub embedding: Option<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub converged: bool,
    pub provenance: Provenance,
    /// Surrogate-predicted objectives when a prediction was made.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl EvaluationRecord {
    pub fn joint_key(&self) -> String {
        self.phenotype_keys.join(" | ")
    }

    pub fn is_expensive(&self) -> bool {
        self.provenance == Provenance::Expensive
    }
}

/// Append-only list of records ordered by (generation, id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationDatabase {
    pub records: Vec<EvaluationRecord>,
}

impl EvaluationDatabase {
    pub fn push(&mut self, r: EvaluationRecord) -> Result<(), RunError> {
        if let Some(last) = self.records.last() {
            if (r.generation, r.id) <= (last.generation, last.id) {
                return Err(RunError::Database(format!(
                    "record ({}, {}) after ({}, {})",
                    r.generation, r.id, last.generation, last.id
                )));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn n_generations(&self) -> usize {
        self.records.last().map_or(0, |r| r.generation + 1)
    }

    pub fn generation(&self, g: usize) -> impl Iterator<Item = &EvaluationRecord> {
        self.records.iter().filter(move |r| r.generation == g)
    }

    pub fn n_objectives(&self) -> usize {
        self.records.first().map_or(0, |r| r.objectives.len())
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let f = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(f);
        w.write_all(self.to_jsonl().as_bytes()).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    /// Append records to an existing file (creating it if needed).
    pub fn append_to(path: &Path, records: &[EvaluationRecord]) -> Result<(), RunError> {
        let f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(f);
        for r in records {
            serde_json::to_writer(&mut w, r).map_err(|e| RunError::Database(e.to_string()))?;
            w.write_all(b"\n").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, RunError> {
        let f = std::fs::File::open(path).map_err(io_err(path))?;
        let mut db = EvaluationDatabase::default();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: EvaluationRecord =
                serde_json::from_str(&line).map_err(|e| RunError::Database(format!("line {}: {e}", i + 1)))?;
            db.push(r)?;
        }
        Ok(db)
    }
}
