//! Surrogate-augmented symbolic regression.
//!
//! Gene expression programming proposes closed-form model expressions, each
//! candidate is mapped to a low-dimensional embedding by averaging its
//! predictions over a baseline feature table, and a multi-output Gaussian
//! Process trained on past expensive evaluations decides which candidates are
//! worth an expensive evaluation. Everything else receives the surrogate's
//! predicted objectives.
//!
//! Module map:
//!
//! * [`symreg`]: genotypes, decoding, canonical phenotype keys, variation and
//!   multi-objective ranking.
//! * [`embedding`]: feature tables, candidate embedding and normalization.
//! * [`surrogate`]: rational-quadratic GP regression and hyperparameter fitting.
//! * [`selection`]: acquisition metrics, convergence weighting and thresholds.
//! * [`evaluators`]: expensive-evaluation oracles and the invariant library.
//! * [`orchestrator`]: the training loop, evaluation database, passive replay,
//!   efficiency metrics and reporting.

pub mod embedding;
pub mod evaluators;
pub mod lowdisc;
pub mod orchestrator;
pub mod selection;
pub mod surrogate;
pub mod symreg;

/// Objective value assigned to every objective of a non-convergent evaluation.
pub const DIVERGED: f64 = 9999.0;

/// True when every entry of `objectives` is the divergence sentinel.
pub fn is_sentinel(objectives: &[f64]) -> bool {
    !objectives.is_empty() && objectives.iter().all(|&v| v == DIVERGED)
}
