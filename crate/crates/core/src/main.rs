use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use surrogate_gep::orchestrator::{
    bounding_box, compute_metrics, emit_report, hypervolume, hypervolume_coverage, passive_replay, pareto_front,
    run_training, EvaluationDatabase, RunConfig, RunError, RunMetrics,
};

/// Surrogate-gated gene expression programming for closure discovery.
#[derive(Parser)]
#[command(name = "sgep", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training loop.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate every candidate (no surrogate).
        #[arg(long)]
        baseline: bool,
    },
    /// Emulate surrogate selection on a stored baseline database.
    Replay {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute metrics from a database and write them to a directory.
    Report {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hypervolume of a point set (one comma or whitespace separated row per point).
    Hv {
        #[arg(long)]
        points: PathBuf,
    },
}

fn print_summary(m: &RunMetrics) {
    if let Some(g) = m.final_generation() {
        println!(
            "generations {} expensive {} candidates {} ratio {:.4} coverage {:.4}",
            g.generation + 1,
            g.cumulative_expensive,
            g.cumulative_candidates,
            g.selection_ratio,
            g.coverage
        );
        if let Some(e) = m.generations.iter().rev().find_map(|g| g.relative_error) {
            println!("relative error {e:.4}");
        }
    }
}

fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.into(), source })?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> =
            line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::parse).collect();
        match row {
            Ok(r) if r.iter().all(|v| v.is_finite()) => pts.push(r),
            _ => return Err(RunError::Config(format!("{}:{}: bad point row", path.display(), i + 1))),
        }
    }
    let p = pts.first().map_or(0, Vec::len);
    if p == 0 || pts.iter().any(|r| r.len() != p) {
        return Err(RunError::Config(format!("{}: need at least one point of consistent width", path.display())));
    }
    Ok(pts)
}

fn execute(cmd: Command) -> Result<(), RunError> {
    match cmd {
        Command::Run { config, seed, baseline } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if baseline {
                cfg.surrogate_enabled = false;
            }
            let out = run_training(&cfg)?;
            print_summary(&out.metrics);
        }
        Command::Replay { db, config } => {
            let cfg = RunConfig::load(&config)?;
            let db = EvaluationDatabase::read(&db)?;
            let m = passive_replay(&db, &cfg)?;
            print_summary(&m);
            if let Some(dir) = &cfg.output_dir {
                emit_report(&m, dir)?;
            }
        }
        Command::Report { db, out } => {
            let db = EvaluationDatabase::read(&db)?;
            let m = compute_metrics(&db);
            emit_report(&m, &out)?;
            print_summary(&m);
        }
        Command::Hv { points } => {
            let pts = read_points(&points)?;
            let front = pareto_front(&pts);
            let (_, reference) = bounding_box(&front);
            println!("front {} hv {:.10} coverage {:.10}", front.len(), hypervolume(&front, &reference), hypervolume_coverage(&front));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
