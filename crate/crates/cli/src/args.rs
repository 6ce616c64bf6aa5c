use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand};
use fairrec::{Penalty, Setting};

#[derive(Debug, Parser)]
#[command(name = "fairrec", version, about = "Fairness-aware matrix factorization experiments")]
pub struct Cli {
    /// Worker threads for multi-trial runs. Results do not depend on it.
    #[arg(long, global = true, env = "FAIRREC_JOBS", default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a block-model dataset.
    Generate(GenerateArgs),
    /// Train one model on a dataset directory.
    Train(TrainArgs),
    /// Score a trained model on evaluation targets.
    Evaluate(EvaluateArgs),
    /// Run a multi-trial penalty sweep or the sampling-setting study.
    Experiment(ExperimentArgs),
    /// Filter MovieLens-1M into a dataset directory.
    PrepareMovielens(PrepareArgs),
    /// Re-run a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "spec"])))]
pub struct GenerateArgs {
    /// U, O, P, or P+O.
    #[arg(long)]
    pub scenario: Option<Setting>,
    /// Block-model specification as JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long, env = "FAIRREC_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Training hyperparameters. Unset flags fall back to `--config`, then to
/// the built-in defaults.
#[derive(Debug, Args, Default)]
pub struct TrainingFlags {
    /// TOML file with any `TrainConfig` fields.
    #[arg(long, env = "FAIRREC_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub init_std: Option<f64>,
    #[arg(long)]
    pub fairness_weight: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory with ratings.tsv and groups.tsv.
    #[arg(long)]
    pub data: PathBuf,
    /// Training ratings, if not `<data>/ratings.tsv`.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long)]
    pub penalty: Option<Penalty>,
    #[arg(long, env = "FAIRREC_SEED")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory providing groups.tsv.
    #[arg(long)]
    pub data: PathBuf,
    /// Targets to score; defaults to `<data>/expected.tsv`, else `<data>/test.tsv`.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// What an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioArg {
    Synthetic(Setting),
    /// Unpenalized runs across all four sampling settings.
    Fig1,
    MovieLens,
}

impl FromStr for ScenarioArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig1" | "settings" => Ok(ScenarioArg::Fig1),
            "movielens" | "ml-1m" | "ml1m" => Ok(ScenarioArg::MovieLens),
            _ => s.parse().map(ScenarioArg::Synthetic).map_err(|_| {
                format!(
                    "unknown scenario {s:?}; expected synthetic_U, synthetic_O, synthetic_P, \
                     synthetic_PO, fig1, or movielens"
                )
            }),
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub scenario: ScenarioArg,
    /// Trials per penalty; defaults to 3 for synthetic sweeps and 5 otherwise.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated penalties; defaults to the six-row table.
    #[arg(long, value_delimiter = ',')]
    pub penalties: Option<Vec<Penalty>>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = "FAIRREC_SEED")]
    pub seed: Option<u64>,
    /// Synthetic grid size.
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    /// Raw MovieLens-1M directory (movielens scenario).
    #[arg(long, env = "FAIRREC_ML1M_DIR")]
    pub ml_dir: Option<PathBuf>,
    /// Prepared dataset directory, instead of `--ml-dir`.
    #[arg(long, conflicts_with = "ml_dir")]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub genres: Option<Vec<String>>,
    #[arg(long)]
    pub min_ratings: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long, env = "FAIRREC_ML1M_DIR")]
    pub ml_dir: PathBuf,
    /// Comma-separated genres; matching ignores case.
    #[arg(long, value_delimiter = ',')]
    pub genres: Option<Vec<String>>,
    #[arg(long)]
    pub min_ratings: Option<usize>,
    /// Also write a seeded train.tsv/test.tsv split with this test share.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long, env = "FAIRREC_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// manifest.json written by an earlier run.
    pub manifest: PathBuf,
    /// Where to write the re-run; defaults to the original output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
