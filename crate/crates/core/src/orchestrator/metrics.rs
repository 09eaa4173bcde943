use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hypervolume::{coverage_in_box, hypervolume_coverage, pareto_front};
use super::{io_err, EvaluationDatabase, EvaluationRecord, RunError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetrics {
    pub generation: usize,
    pub cumulative_expensive: usize,
    pub cumulative_candidates: usize,
    /// Coverage of the expensive front so far within its own bounding box.
    pub coverage: f64,
    pub selection_ratio: f64,
    pub relative_error: Option<f64>,
    /// Best expensive objectives so far (per objective minimum).
    pub best: Option<Vec<f64>>,
    pub front_size: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub generations: Vec<GenerationMetrics>,
}

impl RunMetrics {
    pub fn final_generation(&self) -> Option<&GenerationMetrics> {
        self.generations.last()
    }

    pub fn total_expensive(&self) -> usize {
        self.final_generation().map_or(0, |g| g.cumulative_expensive)
    }
}

fn converged_expensive(r: &EvaluationRecord) -> bool {
    r.is_expensive() && r.converged
}

/// Pareto front of converged expensive objectives up to and including
/// `up_to` (all generations when `None`).
pub fn expensive_front(db: &EvaluationDatabase, up_to: Option<usize>) -> Vec<Vec<f64>> {
    let pts: Vec<Vec<f64>> = db
        .records
        .iter()
        .filter(|r| up_to.is_none_or(|g| r.generation <= g) && converged_expensive(r))
        .map(|r| r.objectives.clone())
        .collect();
    pareto_front(&pts)
}

/// Expensive evaluations over all stored candidates.
pub fn selection_ratio(db: &EvaluationDatabase) -> f64 {
    if db.records.is_empty() {
        return 0.0;
    }
    db.records.iter().filter(|r| r.is_expensive()).count() as f64 / db.records.len() as f64
}

/// Mean of |μ − truth| / |truth| over (record id, predicted objectives)
/// pairs whose stored truth converged. `None` when no pair qualifies.
pub fn surrogate_relative_error(db: &EvaluationDatabase, predictions: &[(u64, Vec<f64>)]) -> Option<f64> {
    let by_id: HashMap<u64, &EvaluationRecord> = db.records.iter().map(|r| (r.id, r)).collect();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (id, mu) in predictions {
        let Some(r) = by_id.get(id) else { continue };
        if !r.converged {
            continue;
        }
        for (m, t) in mu.iter().zip(&r.objectives) {
            if *t != 0.0 {
                sum += (m - t).abs() / t.abs();
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Per-generation metrics from a database. Relative error is left empty:
/// training runs have no truth for surrogate-attributed candidates.
pub fn compute_metrics(db: &EvaluationDatabase) -> RunMetrics {
    let mut out = Vec::new();
    let mut expensive = 0;
    let mut total = 0;
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let p = db.n_objectives();
    for g in 0..db.n_generations() {
        for r in db.generation(g) {
            total += 1;
            if r.is_expensive() {
                expensive += 1;
                if r.converged {
                    pts.push(r.objectives.clone());
                }
            }
        }
        let front = pareto_front(&pts);
        let best = (!pts.is_empty())
            .then(|| (0..p).map(|k| pts.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min)).collect());
        out.push(GenerationMetrics {
            generation: g,
            cumulative_expensive: expensive,
            cumulative_candidates: total,
            coverage: if front.is_empty() { 0.0 } else { hypervolume_coverage(&front) },
            selection_ratio: if total > 0 { expensive as f64 / total as f64 } else { 0.0 },
            relative_error: None,
            best,
            front_size: front.len(),
        });
    }
    RunMetrics { generations: out }
}

/// (cumulative expensive evaluations, coverage in the given box) after each
/// generation.
pub fn coverage_curve(db: &EvaluationDatabase, ideal: &[f64], reference: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut expensive = 0;
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for g in 0..db.n_generations() {
        for r in db.generation(g) {
            if r.is_expensive() {
                expensive += 1;
                if r.converged {
                    pts.push(r.objectives.clone());
                }
            }
        }
        out.push((expensive, coverage_in_box(&pareto_front(&pts), ideal, reference)));
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// Write `metrics.csv` and `summary.txt` into `out`.
pub fn emit_report(metrics: &RunMetrics, out: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let csv_path = out.join("metrics.csv");
    let p = metrics.generations.iter().find_map(|g| g.best.as_ref().map(Vec::len)).unwrap_or(0);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| RunError::Database(e.to_string()))?;
    let mut header: Vec<String> = [
        "generation",
        "cumulative_expensive",
        "cumulative_candidates",
        "coverage",
        "selection_ratio",
        "relative_error",
        "front_size",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..p).map(|k| format!("best_{k}")));
    w.write_record(&header).map_err(|e| RunError::Database(e.to_string()))?;
    for g in &metrics.generations {
        let mut row = vec![
            g.generation.to_string(),
            g.cumulative_expensive.to_string(),
            g.cumulative_candidates.to_string(),
            format!("{}", g.coverage),
            format!("{}", g.selection_ratio),
            fmt_opt(g.relative_error),
            g.front_size.to_string(),
        ];
        for k in 0..p {
            row.push(fmt_opt(g.best.as_ref().map(|b| b[k])));
        }
        w.write_record(&row).map_err(|e| RunError::Database(e.to_string()))?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    let mut s = String::new();
    if let Some(last) = metrics.final_generation() {
        s.push_str(&format!("generations: {}\n", metrics.generations.len()));
        s.push_str(&format!("expensive evaluations: {}\n", last.cumulative_expensive));
        s.push_str(&format!("candidates: {}\n", last.cumulative_candidates));
        s.push_str(&format!("selection ratio: {:.4}\n", last.selection_ratio));
        s.push_str(&format!("final coverage: {:.4}\n", last.coverage));
        s.push_str(&format!("front size: {}\n", last.front_size));
        if let Some(b) = &last.best {
            let txt: Vec<String> = b.iter().map(|v| format!("{v:.6e}")).collect();
            s.push_str(&format!("best objectives: {}\n", txt.join(", ")));
        }
        let errs: Vec<f64> = metrics.generations.iter().filter_map(|g| g.relative_error).collect();
        if !errs.is_empty() {
            s.push_str(&format!("mean surrogate relative error: {:.4}\n", errs.iter().sum::<f64>() / errs.len() as f64));
        }
    } else {
        s.push_str("no generations\n");
    }
    let summary = out.join("summary.txt");
    std::fs::write(&summary, s).map_err(io_err(&summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::Provenance;

    fn rec(generation: usize, id: u64, objectives: Vec<f64>, provenance: Provenance) -> EvaluationRecord {
        EvaluationRecord {
            generation,
            id,
            phenotype_keys: vec![format!("k{id}")],
            genotypes: vec![],
            embedding: None,
            converged: objectives[0] != crate::DIVERGED,
            objectives,
            provenance,
            prediction: None,
            wall_time: None,
        }
    }

    fn db() -> EvaluationDatabase {
        let mut db = EvaluationDatabase::default();
        db.push(rec(0, 0, vec![1.0, 3.0], Provenance::Expensive)).unwrap();
        db.push(rec(0, 1, vec![3.0, 1.0], Provenance::Expensive)).unwrap();
        db.push(rec(1, 2, vec![2.0, 2.0], Provenance::Expensive)).unwrap();
        db.push(rec(1, 3, vec![0.1, 0.1], Provenance::Surrogate)).unwrap();
        db.push(rec(1, 4, vec![crate::DIVERGED; 2], Provenance::Expensive)).unwrap();
        db
    }

    #[test]
    fn ratio_counts_expensive() {
        assert!((selection_ratio(&db()) - 0.8).abs() < 1e-12);
        let mut d = EvaluationDatabase::default();
        for i in 0..2000 {
            let p = if i < 880 { Provenance::Expensive } else { Provenance::Surrogate };
            d.push(rec(0, i, vec![1.0, 1.0], p)).unwrap();
        }
        assert!((selection_ratio(&d) - 0.44).abs() < 1e-12);
    }

    #[test]
    fn relative_error_of_perfect_predictions_is_zero() {
        let d = db();
        assert_eq!(surrogate_relative_error(&d, &[(2, vec![2.0, 2.0])]), Some(0.0));
        assert_eq!(surrogate_relative_error(&d, &[(2, vec![3.0, 1.0])]), Some(0.5));
        assert_eq!(surrogate_relative_error(&d, &[(4, vec![1.0, 1.0])]), None);
    }

    #[test]
    fn metrics_per_generation() {
        let m = compute_metrics(&db());
        assert_eq!(m.generations.len(), 2);
        assert_eq!(m.generations[0].cumulative_expensive, 2);
        assert_eq!(m.generations[1].cumulative_expensive, 4);
        assert_eq!(m.generations[0].coverage, 0.0);
        assert!((m.generations[1].coverage - 0.25).abs() < 1e-12);
        assert_eq!(m.generations[1].best, Some(vec![1.0, 1.0]));
    }

    #[test]
    fn report_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let m = compute_metrics(&db());
        emit_report(&m, dir.path()).unwrap();
        let a = std::fs::read(dir.path().join("metrics.csv")).unwrap();
        emit_report(&m, dir.path()).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("metrics.csv")).unwrap());
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("generation,cumulative_expensive"));
    }
}
