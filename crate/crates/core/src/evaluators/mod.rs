//! Expensive evaluators: the feature library, an analytic benchmark and a
//! 1-D coupled channel solver.

mod benchmark;
mod channel;
mod invariants;

use std::cell::Cell;

use serde::{Deserialize, Serialize};

pub use benchmark::{evaluate_symbolic_benchmark, BenchmarkSpec, SymbolicBenchmark};
pub use channel::{
    baseline_features, make_reference, solve_channel, solve_profiles, ChannelCase, ChannelEvaluator, ChannelSolution, Profiles,
    TruthExprs, CHANNEL_FEATURES,
};
pub use invariants::{
    compute_invariants, ingest_invariant_fields, parse_invariant_fields, InvariantError, InvariantFields, FIELD_COLUMNS,
};

use crate::embedding::FeatureTable;
use crate::symreg::{ConstantsPool, ExprTree};
use crate::DIVERGED;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutcome {
    pub objectives: Vec<f64>,
    pub converged: bool,
    pub cost_units: f64,
}

impl EvaluationOutcome {
    pub fn converged(objectives: Vec<f64>) -> Self {
        Self { objectives, converged: true, cost_units: 1.0 }
    }

    pub fn diverged(n_objectives: usize) -> Self {
        Self { objectives: vec![DIVERGED; n_objectives], converged: false, cost_units: 1.0 }
    }

    /// Converged outcome unless any objective is non-finite.
    pub fn from_objectives(objectives: Vec<f64>) -> Self {
        if objectives.iter().all(|v| v.is_finite()) {
            Self::converged(objectives)
        } else {
            Self::diverged(objectives.len())
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvaluatorError {
    #[error("evaluator setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Expr(#[from] crate::symreg::SymRegError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("case file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Ingest(#[from] crate::embedding::IngestError),
}

thread_local! {
    static CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Expensive evaluations performed on the current thread so far.
pub fn calls_on_this_thread() -> u64 {
    CALLS.with(Cell::get)
}

pub(crate) fn count_call() {
    CALLS.with(|c| c.set(c.get() + 1));
}

/// An expensive oracle scoring one expression per slot.
pub trait Evaluator {
    fn objective_names(&self) -> Vec<String>;

    fn n_objectives(&self) -> usize {
        self.objective_names().len()
    }

    /// `exprs` follow the slot order the evaluator was built for.
    fn evaluate(&self, exprs: &[ExprTree], pool: &ConstantsPool) -> EvaluationOutcome;

    /// Features used to embed candidates.
    fn baseline_features(&self) -> &FeatureTable;
}

/// Evaluator selection in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluatorSpec {
    Channel {
        #[serde(default)]
        case: Option<ChannelCase>,
        #[serde(default)]
        case_file: Option<std::path::PathBuf>,
    },
    Benchmark(BenchmarkSpec),
}

impl Default for EvaluatorSpec {
    fn default() -> Self {
        EvaluatorSpec::Channel { case: None, case_file: None }
    }
}

impl EvaluatorSpec {
    /// Build the evaluator for the given slot names.
    pub fn build(&self, slots: &[String], pool: &ConstantsPool) -> Result<Box<dyn Evaluator>, EvaluatorError> {
        match self {
            EvaluatorSpec::Channel { case, case_file } => {
                let case = match (case, case_file) {
                    (Some(c), _) => c.clone(),
                    (None, Some(path)) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                    (None, None) => ChannelCase::default(),
                };
                Ok(Box::new(ChannelEvaluator::new(case, slots, pool)?))
            }
            EvaluatorSpec::Benchmark(spec) => Ok(Box::new(SymbolicBenchmark::from_spec(spec, slots)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_rule() {
        let o = EvaluationOutcome::from_objectives(vec![0.1, f64::NAN]);
        assert!(!o.converged);
        assert_eq!(o.objectives, vec![DIVERGED, DIVERGED]);
        assert!(EvaluationOutcome::from_objectives(vec![0.1, 0.2]).converged);
    }

    #[test]
    fn spec_json_shape() {
        let s: EvaluatorSpec = serde_json::from_str(r#"{"kind":"channel"}"#).unwrap();
        assert_eq!(s, EvaluatorSpec::default());
    }
}
