use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{compute_metrics, emit_report, io_err, EvaluationDatabase, EvaluationRecord, RunConfig, RunError, RunMetrics, SurrogateConfig};
use crate::embedding::{embed, ingest_feature_table, FeatureTable, NormStats};
use crate::evaluators::Evaluator;
use crate::selection::{select_generation, History, SelectionInput};
use crate::surrogate::{fit_multi, KernelParams, MultiGp};
use crate::symreg::{evolve_generation, rank_population, survive, Candidate, ConstantsPool, Provenance};

/// Smallest error used before taking log10 of regression targets.
const TARGET_FLOOR: f64 = 1e-12;

pub struct RunOutput {
    pub db: EvaluationDatabase,
    pub metrics: RunMetrics,
}

/// Expensively evaluated samples seen so far.
#[derive(Debug, Default)]
pub(crate) struct ExpensiveHistory {
    raw: Vec<Option<Vec<f64>>>,
    objectives: Vec<Vec<f64>>,
    converged: Vec<bool>,
    keys: HashSet<String>,
    stats: Option<NormStats>,
}

impl ExpensiveHistory {
    pub(crate) fn push(&mut self, raw: Option<Vec<f64>>, objectives: Vec<f64>, converged: bool, key: String) {
        self.raw.push(raw.filter(|e| e.iter().all(|v| v.is_finite())));
        self.objectives.push(objectives);
        self.converged.push(converged);
        self.keys.insert(key);
    }

    /// Fix the input normalization to the finite embeddings seen so far.
    /// Later calls are no-ops.
    pub(crate) fn freeze_stats(&mut self) {
        let finite: Vec<Vec<f64>> = self.raw.iter().flatten().cloned().collect();
        if self.stats.is_none() && !finite.is_empty() {
            self.stats = Some(NormStats::fit(&finite));
        }
    }
}

/// Fitted surrogate with the normalization it was trained under.
pub struct FittedSurrogate {
    pub stats: NormStats,
    pub model: MultiGp,
    log_targets: bool,
}

impl FittedSurrogate {
    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        self.stats.apply(raw)
    }

    /// Predicted objectives (back-transformed from log space if needed).
    pub fn predict_objectives(&self, raw: &[f64]) -> Vec<f64> {
        let pr = self.model.predict(&self.normalize(raw));
        pr.mean.iter().map(|&m| if self.log_targets { 10f64.powf(m) } else { m }).collect()
    }

    fn target(&self, v: f64) -> f64 {
        to_target(v, self.log_targets)
    }

    /// Selection view of the history in the current normalized space.
    pub(crate) fn history(&self, hist: &ExpensiveHistory) -> History {
        let mut h = History { evaluated_keys: hist.keys.clone(), ..Default::default() };
        let p = self.model.n_objectives();
        h.best_targets = vec![f64::INFINITY; p];
        for i in 0..hist.raw.len() {
            let Some(raw) = &hist.raw[i] else { continue };
            let x = self.normalize(raw);
            if hist.converged[i] {
                for k in 0..p {
                    h.best_targets[k] = h.best_targets[k].min(self.target(hist.objectives[i][k]));
                }
                h.converged.push(x);
            } else {
                h.diverged.push(x);
            }
        }
        h
    }
}

fn to_target(v: f64, log: bool) -> f64 {
    if log {
        v.max(TARGET_FLOOR).log10()
    } else {
        v
    }
}

/// Refit from scratch on every converged expensive sample with a finite
/// embedding, in the frozen normalization.
pub(crate) fn refit(
    hist: &ExpensiveHistory,
    cfg: &SurrogateConfig,
    names: &[String],
    previous: Option<&FittedSurrogate>,
    rng: &mut ChaCha8Rng,
) -> Result<Option<FittedSurrogate>, RunError> {
    let Some(stats) = hist.stats.clone() else {
        return Ok(None);
    };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..hist.raw.len() {
        if let (Some(raw), true) = (&hist.raw[i], hist.converged[i]) {
            x.push(stats.apply(raw));
            y.push(hist.objectives[i].iter().map(|&v| to_target(v, cfg.log_targets)).collect::<Vec<f64>>());
        }
    }
    if x.is_empty() {
        return Ok(None);
    }
    let warm: Option<Vec<KernelParams>> = previous.filter(|_| cfg.warm_start).map(|s| s.model.params());
    let model = fit_multi(&x, &y, names, &cfg.fit, warm.as_deref(), rng)?;
    if model.per_objective.iter().any(|m| m.fit_fallback) {
        log::warn!("surrogate refit fell back to default hyperparameters");
    }
    Ok(Some(FittedSurrogate { stats, model, log_targets: cfg.log_targets }))
}

/// Fit the surrogate on the expensive records of a database the same way a
/// run does after its last generation. `None` when nothing converged.
pub fn fit_surrogate_from_database(
    db: &EvaluationDatabase,
    cfg: &SurrogateConfig,
    seed: u64,
) -> Result<Option<FittedSurrogate>, RunError> {
    let mut hist = ExpensiveHistory::default();
    for g in 0..db.n_generations() {
        for r in db.generation(g).filter(|r| r.is_expensive()) {
            hist.push(r.embedding.clone(), r.objectives.clone(), r.converged, r.joint_key());
        }
        hist.freeze_stats();
    }
    let names: Vec<String> = (0..db.n_objectives()).map(|k| format!("obj{k}")).collect();
    refit(&hist, cfg, &names, None, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn record(c: &Candidate, prediction: Option<Vec<f64>>, wall_time: Option<f64>) -> EvaluationRecord {
    EvaluationRecord {
        generation: c.generation,
        id: c.id,
        phenotype_keys: c.phenotype_keys.clone(),
        genotypes: c.genotypes.iter().map(|g| g.tokens().join(" ")).collect(),
        embedding: c.embedding.clone().filter(|e| e.iter().all(|v| v.is_finite())),
        objectives: c.objectives.clone(),
        converged: c.converged,
        provenance: c.provenance,
        prediction,
        wall_time,
    }
}

/// Run training with the evaluator described by the config.
pub fn run_training(config: &RunConfig) -> Result<RunOutput, RunError> {
    config.validate()?;
    let pool = config.symreg.pool(config.seed);
    let evaluator = config.evaluator.build(&config.slot_names(), &pool)?;
    run_training_with(config, evaluator.as_ref(), &pool)
}

/// Run training against a caller-supplied evaluator.
pub fn run_training_with(config: &RunConfig, evaluator: &dyn Evaluator, pool: &ConstantsPool) -> Result<RunOutput, RunError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let features: FeatureTable = match &config.embedding.feature_table {
        Some(p) => ingest_feature_table(p)?,
        None => evaluator.baseline_features().clone(),
    };
    let names = evaluator.objective_names();
    let p = names.len();
    let pop_size = config.evolution.population;

    let db_path = match &config.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join("db.jsonl");
            std::fs::write(&path, b"").map_err(io_err(&path))?;
            Some(path)
        }
        None => None,
    };

    let mut next_id: u64 = 0;
    let mut pop: Vec<Candidate> = Vec::new();
    let mut db = EvaluationDatabase::default();
    let mut hist = ExpensiveHistory::default();
    let mut state: Option<FittedSurrogate> = None;

    for gen in 0..config.generations {
        let mut fresh = if gen == 0 {
            (0..pop_size)
                .map(|_| {
                    let c = config.symreg.random_candidate(next_id, 0, &mut rng);
                    next_id += 1;
                    c
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            let ranks = rank_population(&pop);
            evolve_generation(&pop, &ranks, gen, &mut next_id, &mut rng, &config.symreg, &config.evolution)?
        };
        for c in fresh.iter_mut() {
            c.embedding = Some(embed(&c.trees, &features, pool, config.embedding.aggregation)?.coords);
        }

        let n = fresh.len();
        let mut selected = vec![true; n];
        let mut predictions: Vec<Option<Vec<f64>>> = vec![None; n];
        if config.surrogate_enabled && gen > 0 {
            match &state {
                Some(s) => {
                    let finite: Vec<usize> = (0..n)
                        .filter(|&i| fresh[i].embedding.as_ref().is_some_and(|e| e.iter().all(|v| v.is_finite())))
                        .collect();
                    let inputs: Vec<SelectionInput> = finite
                        .iter()
                        .map(|&i| SelectionInput {
                            id: fresh[i].id,
                            key: fresh[i].joint_key(),
                            embedding: s.normalize(fresh[i].embedding.as_ref().unwrap()),
                        })
                        .collect();
                    let decision =
                        select_generation(gen, &inputs, Some(&s.model), &s.history(&hist), &config.selection, &mut rng)?;
                    let chosen: HashSet<u64> = decision.selected_ids.iter().copied().collect();
                    for i in 0..n {
                        selected[i] = chosen.contains(&fresh[i].id);
                    }
                    for &i in &finite {
                        if !selected[i] {
                            let pred = s.predict_objectives(fresh[i].embedding.as_ref().unwrap());
                            fresh[i].set_outcome(pred.clone(), true, Provenance::Surrogate);
                            predictions[i] = Some(pred);
                        }
                    }
                    for i in 0..n {
                        if !selected[i] && predictions[i].is_none() {
                            fresh[i].mark_diverged(p, Provenance::Surrogate);
                        }
                    }
                }
                None => log::warn!("generation {gen}: no surrogate available, evaluating every candidate"),
            }
        }

        let mut records = Vec::with_capacity(n);
        for (i, c) in fresh.iter_mut().enumerate() {
            let mut wall = None;
            if selected[i] {
                let t0 = Instant::now();
                let out = evaluator.evaluate(&c.trees, pool);
                if config.record_wall_time {
                    wall = Some(t0.elapsed().as_secs_f64());
                }
                c.set_outcome(out.objectives.clone(), out.converged, Provenance::Expensive);
                hist.push(c.embedding.clone(), out.objectives, out.converged, c.joint_key());
            }
            records.push(record(c, predictions[i].take(), wall));
        }
        if let Some(path) = &db_path {
            EvaluationDatabase::append_to(path, &records)?;
        }
        for r in records {
            db.push(r)?;
        }

        if config.surrogate_enabled {
            hist.freeze_stats();
            state = refit(&hist, &config.surrogate, &names, state.as_ref(), &mut rng)?;
            // surrogate-attributed fitness follows the latest model
            if let Some(s) = &state {
                for c in pop.iter_mut().chain(fresh.iter_mut()) {
                    if c.provenance == Provenance::Surrogate && c.converged {
                        let pred = s.predict_objectives(c.embedding.as_ref().unwrap());
                        c.objectives = pred;
                    }
                }
            }
        }

        pop = if gen == 0 {
            fresh
        } else {
            pop.extend(fresh);
            survive(pop, pop_size)
        };
        let exp = db.records.iter().filter(|r| r.is_expensive()).count();
        log::info!("generation {gen}: {exp} expensive evaluations so far");
    }

    let metrics = compute_metrics(&db);
    if let Some(dir) = &config.output_dir {
        emit_report(&metrics, dir)?;
    }
    Ok(RunOutput { db, metrics })
}
