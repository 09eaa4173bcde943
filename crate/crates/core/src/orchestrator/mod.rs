//! Training loop, evaluation database, passive replay and efficiency
//! metrics.

mod database;
mod hypervolume;
mod metrics;
mod replay;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use database::{EvaluationDatabase, EvaluationRecord};
pub use hypervolume::{
    bounding_box, coverage_in_box, hypervolume, hypervolume_coverage, hypervolume_inclusion_exclusion, pareto_front,
};
pub use metrics::{
    compute_metrics, coverage_curve, emit_report, expensive_front, selection_ratio, surrogate_relative_error,
    GenerationMetrics, RunMetrics,
};
pub use replay::passive_replay;
pub use run::{fit_surrogate_from_database, run_training, run_training_with, FittedSurrogate, RunOutput};

use crate::embedding::Aggregation;
use crate::evaluators::EvaluatorSpec;
use crate::selection::SelectionConfig;
use crate::surrogate::FitOptions;
use crate::symreg::{EvolutionConfig, SymRegConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    /// Feature table for embeddings; the evaluator's baseline features when
    /// absent.
    pub feature_table: Option<PathBuf>,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub fit: FitOptions,
    /// Regress on log10(error) instead of raw error.
    pub log_targets: bool,
    /// Start each refit from the previous generation's hyperparameters too.
    pub warm_start: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { fit: FitOptions::default(), log_targets: true, warm_start: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub generations: usize,
    pub evolution: EvolutionConfig,
    pub symreg: SymRegConfig,
    pub embedding: EmbeddingConfig,
    pub surrogate: SurrogateConfig,
    pub selection: SelectionConfig,
    pub evaluator: EvaluatorSpec,
    /// False runs the plain baseline where every candidate is evaluated.
    pub surrogate_enabled: bool,
    pub output_dir: Option<PathBuf>,
    /// Store per-evaluation wall time in the database (breaks byte-identical
    /// reruns).
    pub record_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            generations: 20,
            evolution: EvolutionConfig::default(),
            symreg: SymRegConfig::default(),
            embedding: EmbeddingConfig::default(),
            surrogate: SurrogateConfig::default(),
            selection: SelectionConfig::default(),
            evaluator: EvaluatorSpec::default(),
            surrogate_enabled: true,
            output_dir: None,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("evaluator: {0}")]
    Evaluator(#[from] crate::evaluators::EvaluatorError),
    #[error("expression: {0}")]
    SymReg(#[from] crate::symreg::SymRegError),
    #[error("embedding: {0}")]
    Embed(#[from] crate::embedding::EmbedError),
    #[error("feature table: {0}")]
    Ingest(#[from] crate::embedding::IngestError),
    #[error("surrogate: {0}")]
    Surrogate(#[from] crate::surrogate::GpError),
    #[error("selection: {0}")]
    Selection(#[from] crate::selection::SelectionError),
    #[error("database: {0}")]
    Database(String),
    #[error("io at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// True for errors caused by the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, RunError::Config(_) | RunError::Selection(crate::selection::SelectionError::Config(_)))
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.generations == 0 {
            return bad("generations must be at least 1".into());
        }
        if self.evolution.population == 0 || self.evolution.offspring == 0 {
            return bad("population and offspring must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.evolution.mutation_rate) || !(0.0..=1.0).contains(&self.evolution.crossover_rate) {
            return bad("rates must lie in [0, 1]".into());
        }
        self.symreg.validate().map_err(|e| RunError::Config(e.to_string()))?;
        self.selection.validate().map_err(|e| RunError::Config(e.to_string()))?;
        if let Some(p) = &self.embedding.feature_table {
            if !p.exists() {
                return bad(format!("feature table {} does not exist", p.display()));
            }
        }
        if let EvaluatorSpec::Channel { case_file: Some(p), .. } = &self.evaluator {
            if !p.exists() {
                return bad(format!("case file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn slot_names(&self) -> Vec<String> {
        self.symreg.slots.iter().map(|s| s.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 4, "generations": 3}"#).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.evolution.population, 96);
    }

    #[test]
    fn missing_paths_are_config_errors() {
        let c = RunConfig {
            embedding: EmbeddingConfig { feature_table: Some("/nonexistent/table.csv".into()), ..Default::default() },
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().is_config());
    }
}
