use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{count_call, EvaluationOutcome, Evaluator, EvaluatorError};
use crate::embedding::FeatureTable;
use crate::symreg::{parse_expr, ConstantsPool, ExprTree};

/// Analytic target expressions scored on sampled feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    /// Target expression per objective.
    pub targets: Vec<String>,
    /// Slot compared against each target; defaults to slot j for target j.
    pub objective_slots: Option<Vec<usize>>,
    pub columns: Vec<String>,
    pub n_samples: usize,
    pub range: (f64, f64),
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            targets: vec!["I1 * I1 + J1".into(), "2 * J1 - I1".into()],
            objective_slots: None,
            columns: vec!["I1".into(), "J1".into()],
            n_samples: 32,
            range: (0.0, 1.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymbolicBenchmark {
    pub table: FeatureTable,
    pub targets: Vec<ExprTree>,
    pub objective_slots: Vec<usize>,
}

impl SymbolicBenchmark {
    pub fn from_spec(spec: &BenchmarkSpec, slots: &[String]) -> Result<Self, EvaluatorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let cols: Vec<Vec<f64>> = spec
            .columns
            .iter()
            .map(|_| (0..spec.n_samples).map(|_| rng.gen_range(spec.range.0..=spec.range.1)).collect())
            .collect();
        let table = FeatureTable::new(spec.columns.clone(), cols)?;
        let targets = spec.targets.iter().map(|t| parse_expr(t)).collect::<Result<Vec<_>, _>>()?;
        let objective_slots = spec.objective_slots.clone().unwrap_or_else(|| (0..targets.len()).collect());
        if objective_slots.len() != targets.len() || objective_slots.iter().any(|&s| s >= slots.len()) {
            return Err(EvaluatorError::Setup("objective_slots must map every target to an existing slot".into()));
        }
        Ok(Self { table, targets, objective_slots })
    }
}

/// RMS difference between each mapped candidate expression and its target
/// over the table rows. Any non-finite value gives the diverged sentinel.
pub fn evaluate_symbolic_benchmark(
    exprs: &[ExprTree],
    bench: &SymbolicBenchmark,
    pool: &ConstantsPool,
) -> EvaluationOutcome {
    count_call();
    let p = bench.targets.len();
    let names = bench.table.names();
    let mut objectives = Vec::with_capacity(p);
    for (target, &slot) in bench.targets.iter().zip(&bench.objective_slots) {
        let (Ok(f), Ok(t)) = (exprs[slot].compile(names, pool), target.compile(names, pool)) else {
            return EvaluationOutcome::diverged(p);
        };
        let m = bench.table.n_rows();
        let mut sse = 0.0;
        for row in bench.table.rows() {
            sse += (f.eval(&row) - t.eval(&row)).powi(2);
        }
        objectives.push((sse / m as f64).sqrt());
    }
    EvaluationOutcome::from_objectives(objectives)
}

impl Evaluator for SymbolicBenchmark {
    fn objective_names(&self) -> Vec<String> {
        (0..self.targets.len()).map(|j| format!("rms{j}")).collect()
    }

    fn evaluate(&self, exprs: &[ExprTree], pool: &ConstantsPool) -> EvaluationOutcome {
        evaluate_symbolic_benchmark(exprs, self, pool)
    }

    fn baseline_features(&self) -> &FeatureTable {
        &self.table
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DIVERGED;

    fn bench() -> SymbolicBenchmark {
        SymbolicBenchmark::from_spec(&BenchmarkSpec::default(), &["a".into(), "b".into()]).unwrap()
    }

    fn pool() -> ConstantsPool {
        ConstantsPool::with_values(vec![1.0])
    }

    #[test]
    fn exact_recovery_is_zero() {
        let b = bench();
        let o = evaluate_symbolic_benchmark(&b.targets, &b, &pool());
        assert_eq!(o.objectives, vec![0.0, 0.0]);
        assert!(o.converged);
    }

    #[test]
    fn constant_offset_gives_one() {
        let b = bench();
        let e = vec![parse_expr("I1 * I1 + J1 + 1").unwrap(), parse_expr("2 * J1 - I1 + c0").unwrap()];
        let o = evaluate_symbolic_benchmark(&e, &b, &pool());
        for v in o.objectives {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_terminal_is_sentinel() {
        let b = bench();
        let e = vec![parse_expr("Q").unwrap(), parse_expr("J1").unwrap()];
        let o = evaluate_symbolic_benchmark(&e, &b, &pool());
        assert_eq!(o.objectives, vec![DIVERGED; 2]);
    }

    #[test]
    fn overflow_is_sentinel() {
        let b = bench();
        let big = "1e200 * 1e200 * I1";
        let e = vec![parse_expr(big).unwrap(), parse_expr("J1").unwrap()];
        let o = evaluate_symbolic_benchmark(&e, &b, &pool());
        assert!(!o.converged);
        assert_eq!(o.objectives, vec![DIVERGED; 2]);
    }
}
