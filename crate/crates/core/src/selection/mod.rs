//! Choosing which candidates get an expensive evaluation.

mod acquisition;

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use acquisition::{convergence_weight, ei, lcb, normal_cdf, normal_pdf};

use crate::lowdisc::shifted_halton;
use crate::surrogate::{sq_dist, MultiGp, Prediction};
use crate::symreg::nondominated_sort;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Lcb,
    Ei,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub metric: Metric,
    pub beta: f64,
    pub xi: f64,
    pub delta: f64,
    /// Space-filling picks in generation 1. When absent, `n_init_fraction`
    /// of the population size is used.
    pub n_init: Option<usize>,
    pub n_init_fraction: f64,
    pub m_init_rel: Option<f64>,
    pub m_fixed: Option<usize>,
    pub m_rel: Option<f64>,
    pub m_pareto: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Lcb,
            beta: 5.0,
            xi: 0.0,
            delta: 0.75,
            n_init: None,
            n_init_fraction: 0.4,
            m_init_rel: Some(0.5),
            m_fixed: Some(1),
            m_rel: Some(0.25),
            m_pareto: None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SelectionError {
    #[error("invalid selection config: {0}")]
    Config(String),
    #[error("generation {0} needs a fitted surrogate")]
    NoSurrogate(usize),
    #[error("generation {0} needs expensive history")]
    NoHistory(usize),
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let bad = |m: &str| Err(SelectionError::Config(m.into()));
        if self.m_fixed.is_none() && self.m_rel.is_none() && self.m_pareto.is_none() {
            return bad("at least one of m_fixed, m_rel, m_pareto is required");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta must lie in (0, 1]");
        }
        if self.beta < 0.0 || self.xi < 0.0 {
            return bad("beta and xi must be nonnegative");
        }
        if self.m_fixed == Some(0) || self.m_pareto == Some(0) || self.n_init == Some(0) {
            return bad("m_fixed, m_pareto and n_init must be at least 1");
        }
        for r in [self.m_rel, self.m_init_rel].into_iter().flatten() {
            if !(0.0..=1.0).contains(&r) {
                return bad("relative thresholds must lie in [0, 1]");
            }
        }
        if self.n_init.is_none() && !(self.n_init_fraction > 0.0 && self.n_init_fraction <= 1.0) {
            return bad("n_init_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn n_init_for(&self, population: usize) -> usize {
        self.n_init
            .unwrap_or_else(|| ((self.n_init_fraction * population as f64).round() as usize).max(1))
    }
}

/// One member of the current population as seen by selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionInput {
    pub id: u64,
    pub key: String,
    /// Normalized embedding.
    pub embedding: Vec<f64>,
}

/// Expensively evaluated data available when selecting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub converged: Vec<Vec<f64>>,
    pub diverged: Vec<Vec<f64>>,
    pub evaluated_keys: HashSet<String>,
    /// Per-objective best (smallest) surrogate target among converged
    /// samples; used by EI.
    pub best_targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDecision {
    pub selected_ids: Vec<u64>,
    /// Per-candidate, per-objective weighted selection values (population
    /// order; empty in generation 0).
    pub values: Vec<Vec<f64>>,
    /// Aggregated scalar per candidate; NaN for ineligible candidates.
    pub scalar: Vec<f64>,
    pub weights: Vec<f64>,
    pub predictions: Vec<Option<Prediction>>,
}

/// Min-max normalize each objective over the rows, then take the max over
/// objectives. Fronts are nondominated layers under maximization.
pub fn aggregate_multiobjective(values: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let p = values[0].len();
    let mut scalar = vec![f64::NEG_INFINITY; n];
    for k in 0..p {
        let lo = values.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min);
        let hi = values.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            let z = if hi > lo { (values[i][k] - lo) / (hi - lo) } else { 1.0 };
            scalar[i] = scalar[i].max(z);
        }
    }
    let negated: Vec<Vec<f64>> = values.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
    let mut front = vec![0; n];
    for (r, f) in nondominated_sort(&negated).iter().enumerate() {
        for &i in f {
            front[i] = r;
        }
    }
    (scalar, front)
}

/// Threshold rule over candidates that are all eligible: keep those passing
/// every present relative/Pareto threshold, then the top `m_fixed` by scalar
/// (ties by lower id). Output is sorted by descending scalar.
pub fn apply_thresholds(scalar: &[f64], fronts: &[usize], ids: &[u64], config: &SelectionConfig) -> Vec<u64> {
    let mut pass: Vec<usize> = (0..scalar.len())
        .filter(|&i| config.m_rel.is_none_or(|r| scalar[i] >= r))
        .filter(|&i| config.m_pareto.is_none_or(|m| fronts[i] < m))
        .collect();
    pass.sort_by(|&a, &b| scalar[b].total_cmp(&scalar[a]).then(ids[a].cmp(&ids[b])));
    if let Some(m) = config.m_fixed {
        pass.truncate(m);
    }
    pass.into_iter().map(|i| ids[i]).collect()
}

/// Candidates that may be selected: phenotype keys not yet expensively
/// evaluated, first occurrence (lowest id) of each key.
fn eligibility(pop: &[SelectionInput], history: &History) -> Vec<bool> {
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (i, c) in pop.iter().enumerate() {
        first
            .entry(c.key.as_str())
            .and_modify(|j| {
                if pop[*j].id > c.id {
                    *j = i
                }
            })
            .or_insert(i);
    }
    pop.iter()
        .enumerate()
        .map(|(i, c)| {
            !history.evaluated_keys.contains(&c.key)
                && first[c.key.as_str()] == i
                && c.embedding.iter().all(|v| v.is_finite())
        })
        .collect()
}

fn acquisition_values(pop: &[SelectionInput], preds: &[Prediction], history: &History, config: &SelectionConfig) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = preds.first().map_or(0, |q| q.mean.len());
    let mut values: Vec<Vec<f64>> = preds
        .iter()
        .map(|pr| {
            (0..p)
                .map(|k| {
                    let s = pr.var[k].sqrt();
                    match config.metric {
                        Metric::Lcb => lcb(pr.mean[k], s, config.beta),
                        Metric::Ei => ei(pr.mean[k], s, history.best_targets.get(k).copied().unwrap_or(f64::INFINITY), config.xi),
                    }
                })
                .collect()
        })
        .collect();
    // LCB can be negative; shift to a zero floor so that weighting below 1
    // always lowers attractiveness.
    if config.metric == Metric::Lcb {
        for k in 0..p {
            let lo = values.iter().map(|v| v[k]).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
            if lo.is_finite() {
                values.iter_mut().for_each(|v| v[k] -= lo);
            }
        }
    }
    let weights: Vec<f64> = pop
        .iter()
        .map(|c| {
            if history.converged.is_empty() && history.diverged.is_empty() {
                1.0
            } else {
                convergence_weight(&c.embedding, &history.converged, &history.diverged, config.delta)
            }
        })
        .collect();
    for (v, w) in values.iter_mut().zip(&weights) {
        v.iter_mut().for_each(|x| *x *= w);
    }
    (values, weights)
}

/// Selection for one generation. Generation 0 takes everything; generation 1
/// spreads `n_init` picks over the history bounding box; later generations
/// use weighted acquisition values and the threshold rule.
pub fn select_generation<R: Rng + ?Sized>(
    gen_index: usize,
    pop: &[SelectionInput],
    model: Option<&MultiGp>,
    history: &History,
    config: &SelectionConfig,
    rng: &mut R,
) -> Result<SelectionDecision, SelectionError> {
    config.validate()?;
    let n = pop.len();
    if gen_index == 0 {
        return Ok(SelectionDecision {
            selected_ids: pop.iter().map(|c| c.id).collect(),
            values: Vec::new(),
            scalar: vec![f64::NAN; n],
            weights: vec![1.0; n],
            predictions: vec![None; n],
        });
    }
    let model = model.ok_or(SelectionError::NoSurrogate(gen_index))?;
    if history.converged.is_empty() && history.diverged.is_empty() {
        return Err(SelectionError::NoHistory(gen_index));
    }
    let eligible = eligibility(pop, history);
    let preds: Vec<Prediction> = pop
        .iter()
        .map(|c| {
            if c.embedding.iter().all(|v| v.is_finite()) {
                model.predict(&c.embedding)
            } else {
                let p = model.n_objectives();
                Prediction { mean: vec![f64::NAN; p], var: vec![f64::NAN; p] }
            }
        })
        .collect();
    let (values, weights) = acquisition_values(pop, &preds, history, config);

    let elig_idx: Vec<usize> = (0..n).filter(|&i| eligible[i]).collect();
    let elig_values: Vec<Vec<f64>> = elig_idx.iter().map(|&i| values[i].clone()).collect();
    let (elig_scalar, elig_fronts) = aggregate_multiobjective(&elig_values);
    let mut scalar = vec![f64::NAN; n];
    for (k, &i) in elig_idx.iter().enumerate() {
        scalar[i] = elig_scalar[k];
    }

    let selected_ids = if gen_index == 1 {
        let all_hist: Vec<&Vec<f64>> = history.converged.iter().chain(&history.diverged).collect();
        let d = all_hist[0].len();
        let lo: Vec<f64> = (0..d).map(|k| all_hist.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..d).map(|k| all_hist.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let mut taken = vec![false; n];
        let mut picks = Vec::new();
        for u in shifted_halton(config.n_init_for(n), d, rng) {
            let target: Vec<f64> = (0..d).map(|k| lo[k] + u[k] * (hi[k] - lo[k])).collect();
            let best = elig_idx
                .iter()
                .copied()
                .filter(|&i| !taken[i])
                .min_by(|&a, &b| {
                    sq_dist(&pop[a].embedding, &target)
                        .total_cmp(&sq_dist(&pop[b].embedding, &target))
                        .then(pop[a].id.cmp(&pop[b].id))
                });
            if let Some(i) = best {
                taken[i] = true;
                if config.m_init_rel.is_none_or(|r| scalar[i] >= r) {
                    picks.push(pop[i].id);
                }
            }
        }
        picks
    } else {
        let ids: Vec<u64> = elig_idx.iter().map(|&i| pop[i].id).collect();
        apply_thresholds(&elig_scalar, &elig_fronts, &ids, config)
    };

    Ok(SelectionDecision {
        selected_ids,
        values,
        scalar,
        weights,
        predictions: preds.into_iter().map(Some).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{GpModel, KernelParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aggregate_examples() {
        let (s, f) = aggregate_multiobjective(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(s, vec![1.0, 1.0]);
        assert_eq!(f, vec![0, 0]);
        let (s, f) = aggregate_multiobjective(&[vec![2.0, 2.0], vec![1.0, 1.0]]);
        assert_eq!(s, vec![1.0, 0.0]);
        assert_eq!(f, vec![0, 1]);
        let (s, f) = aggregate_multiobjective(&[vec![3.0], vec![1.0], vec![2.0]]);
        assert_eq!(s, vec![1.0, 0.0, 0.5]);
        assert_eq!(f, vec![0, 2, 1]);
    }

    fn only(m_fixed: Option<usize>, m_rel: Option<f64>, m_pareto: Option<usize>) -> SelectionConfig {
        SelectionConfig { m_fixed, m_rel, m_pareto, ..Default::default() }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(apply_thresholds(&[0.9, 0.3], &[0, 1], &[7, 8], &only(Some(1), None, None)), vec![7]);
        let mut got = apply_thresholds(&[0.6, 0.4, 0.7], &[0, 0, 0], &[1, 2, 3], &only(Some(10), Some(0.5), None));
        got.sort();
        assert_eq!(got, vec![1, 3]);
        let (s, f) = aggregate_multiobjective(&[vec![2.0, 2.0], vec![1.0, 1.0]]);
        assert_eq!(apply_thresholds(&s, &f, &[0, 1], &only(None, None, Some(1))), vec![0]);
    }

    #[test]
    fn ties_break_by_lower_id() {
        assert_eq!(apply_thresholds(&[0.5, 0.5, 0.5], &[0; 3], &[9, 4, 6], &only(Some(2), None, None)), vec![4, 6]);
    }

    #[test]
    fn config_needs_a_threshold() {
        assert!(only(None, None, None).validate().is_err());
        assert!(SelectionConfig::default().validate().is_ok());
        assert_eq!(SelectionConfig::default().n_init_for(96), 38);
    }

    fn inputs(points: &[Vec<f64>]) -> Vec<SelectionInput> {
        points
            .iter()
            .enumerate()
            .map(|(i, e)| SelectionInput { id: i as u64, key: format!("k{i}"), embedding: e.clone() })
            .collect()
    }

    fn model(x: Vec<Vec<f64>>, y: Vec<f64>) -> MultiGp {
        let gp = GpModel::condition(x, y, KernelParams::new(1.0, 0.3, 1.0, 1e-8)).unwrap();
        MultiGp { per_objective: vec![gp], names: vec!["e".into()] }
    }

    #[test]
    fn generation_zero_selects_all() {
        let pop = inputs(&vec![vec![0.0]; 96]);
        let d = select_generation(0, &pop, None, &History::default(), &SelectionConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(d.selected_ids.len(), 96);
    }

    #[test]
    fn generation_one_dedupes() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0, (i * 7 % 20) as f64 / 19.0]).collect();
        let pop = inputs(&pts);
        let m = model(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.1, 0.2]);
        let h = History { converged: vec![vec![0.0, 0.0], vec![1.0, 1.0]], ..Default::default() };
        let cfg = SelectionConfig { n_init: Some(5), m_init_rel: None, ..Default::default() };
        let d = select_generation(1, &pop, Some(&m), &h, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut ids = d.selected_ids.clone();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), d.selected_ids.len());
        assert!(ids.len() <= 5 && !ids.is_empty());
    }

    #[test]
    fn large_beta_prefers_uncertain_candidate() {
        let train = vec![vec![0.0], vec![0.5]];
        let m = model(train.clone(), vec![0.0, 0.0]);
        let pop = inputs(&[vec![0.0], vec![5.0]]);
        let h = History { converged: train, ..Default::default() };
        let cfg = SelectionConfig { beta: 100.0, m_rel: None, ..Default::default() };
        let d = select_generation(2, &pop, Some(&m), &h, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(d.selected_ids, vec![1]);
    }

    #[test]
    fn evaluated_keys_are_skipped() {
        let m = model(vec![vec![0.0]], vec![0.0]);
        let mut pop = inputs(&[vec![3.0], vec![0.0], vec![3.0]]);
        pop[2].key = "k0".into();
        let mut h = History { converged: vec![vec![0.0]], ..Default::default() };
        h.evaluated_keys.insert("k0".into());
        let cfg = SelectionConfig { m_fixed: Some(5), m_rel: None, ..Default::default() };
        let d = select_generation(2, &pop, Some(&m), &h, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(d.selected_ids, vec![1]);
    }

    #[test]
    fn needs_model_after_generation_zero() {
        let pop = inputs(&[vec![0.0]]);
        let r = select_generation(2, &pop, None, &History::default(), &SelectionConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r.unwrap_err(), SelectionError::NoSurrogate(2));
    }
}
