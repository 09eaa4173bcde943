use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::hypervolume::{hypervolume_coverage, pareto_front};
use super::run::{refit, ExpensiveHistory, FittedSurrogate};
use super::{surrogate_relative_error, EvaluationDatabase, GenerationMetrics, RunConfig, RunError, RunMetrics};
use crate::selection::{select_generation, SelectionInput};

/// Emulate a surrogate-augmented run on a stored baseline database: each
/// generation, select from the stored candidates, reveal the selected ones'
/// stored objectives, refit, and score predictions for the rest against the
/// stored truth. No evaluator is involved.
pub fn passive_replay(db: &EvaluationDatabase, config: &RunConfig) -> Result<RunMetrics, RunError> {
    config.selection.validate()?;
    let n_gen = db.n_generations();
    if n_gen == 0 {
        return Err(RunError::Database("empty database".into()));
    }
    if let Some(r) = db.records.iter().find(|r| !r.is_expensive()) {
        return Err(RunError::Database(format!("record {} is not an expensive evaluation; replay needs a baseline run", r.id)));
    }
    let p = db.n_objectives();
    let names: Vec<String> = (0..p).map(|k| format!("obj{k}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut hist = ExpensiveHistory::default();
    let mut state: Option<FittedSurrogate> = None;
    let mut revealed_pts: Vec<Vec<f64>> = Vec::new();
    let (mut revealed, mut total) = (0usize, 0usize);
    let mut out = Vec::with_capacity(n_gen);

    for g in 0..n_gen {
        let recs: Vec<_> = db.generation(g).collect();
        if recs.is_empty() {
            return Err(RunError::Database(format!("generation {g} missing")));
        }
        let mut chosen: HashSet<u64> = recs.iter().map(|r| r.id).collect();
        let mut predictions = Vec::new();
        if config.surrogate_enabled && g > 0 {
            let s = state.as_ref().ok_or_else(|| RunError::Database(format!("generation {g}: nothing to train on")))?;
            let inputs: Vec<SelectionInput> = recs
                .iter()
                .filter_map(|r| {
                    r.embedding.as_ref().map(|e| SelectionInput { id: r.id, key: r.joint_key(), embedding: s.normalize(e) })
                })
                .collect();
            let d = select_generation(g, &inputs, Some(&s.model), &s.history(&hist), &config.selection, &mut rng)?;
            chosen = d.selected_ids.into_iter().collect();
            for r in &recs {
                if let (false, Some(e)) = (chosen.contains(&r.id), &r.embedding) {
                    predictions.push((r.id, s.predict_objectives(e)));
                }
            }
        }
        for r in &recs {
            total += 1;
            if chosen.contains(&r.id) {
                revealed += 1;
                hist.push(r.embedding.clone(), r.objectives.clone(), r.converged, r.joint_key());
                if r.converged {
                    revealed_pts.push(r.objectives.clone());
                }
            }
        }
        if config.surrogate_enabled {
            hist.freeze_stats();
            state = refit(&hist, &config.surrogate, &names, state.as_ref(), &mut rng)?;
        }
        let front = pareto_front(&revealed_pts);
        let best = (!revealed_pts.is_empty())
            .then(|| (0..p).map(|k| revealed_pts.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min)).collect());
        out.push(GenerationMetrics {
            generation: g,
            cumulative_expensive: revealed,
            cumulative_candidates: total,
            coverage: if front.is_empty() { 0.0 } else { hypervolume_coverage(&front) },
            selection_ratio: revealed as f64 / total as f64,
            relative_error: surrogate_relative_error(db, &predictions),
            best,
            front_size: front.len(),
        });
    }
    Ok(RunMetrics { generations: out })
}
