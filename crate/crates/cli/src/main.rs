mod args;
mod manifest;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use args::{
    Cli, Command, EvaluateArgs, ExperimentArgs, GenerateArgs, PrepareArgs, ReplayArgs, ScenarioArg,
    TrainArgs, TrainingFlags,
};
use clap::Parser;
use fairrec::movielens::{FilterOptions, DEFAULT_TEST_FRACTION};
use fairrec::synthetic::{BlockModelSpec, DEFAULT_ITEMS, DEFAULT_USERS};
use fairrec::{Penalty, TrainConfig};
use manifest::RunManifest;
use run::{EvaluateRun, ExperimentRun, ExperimentSource, GenerateRun, PrepareRun, Run, TrainRun};

/// A problem with how the command was invoked rather than with its data.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if err.is::<Usage>() => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let jobs = cli.jobs.max(1);
    let run = match cli.command {
        Command::Generate(a) => resolve_generate(a)?,
        Command::Train(a) => resolve_train(a)?,
        Command::Evaluate(a) => resolve_evaluate(a)?,
        Command::Experiment(a) => resolve_experiment(a)?,
        Command::PrepareMovielens(a) => resolve_prepare(a)?,
        Command::Replay(a) => return replay(a, jobs),
    };
    execute(run, jobs).map(|_| ())
}

fn execute(run: Run, jobs: usize) -> Result<RunManifest> {
    let start = Instant::now();
    let effects = run.execute(jobs)?;
    let manifest = RunManifest::new(run, &effects, jobs, start.elapsed().as_secs_f64())?;
    manifest.write()?;
    Ok(manifest)
}

fn replay(args: ReplayArgs, jobs: usize) -> Result<()> {
    let recorded = RunManifest::read(&args.manifest)?;
    let changed = recorded.changed_inputs()?;
    if !changed.is_empty() {
        let list: Vec<String> = changed.iter().map(|p| p.display().to_string()).collect();
        anyhow::bail!("inputs changed since the recorded run: {}", list.join(", "));
    }
    let mut run = recorded.run.clone();
    if let Some(out) = args.out {
        run.set_out(absolute(&out)?);
    }
    let fresh = execute(run, jobs)?;
    let differing = recorded.differing_outputs(&fresh);
    if differing.is_empty() {
        println!("replay of {} reproduced {} files exactly", fresh.run.name(), fresh.outputs.len());
        Ok(())
    } else {
        anyhow::bail!("replay produced different files: {}", differing.join(", "))
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).with_context(|| format!("cannot resolve {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn resolve_generate(a: GenerateArgs) -> Result<Run> {
    let (name, mut spec) = match (a.scenario, &a.spec) {
        (Some(setting), None) => (
            format!("synthetic_{}", setting.name()),
            setting.spec(DEFAULT_USERS, DEFAULT_ITEMS, 0),
        ),
        (None, Some(path)) => ("custom".to_string(), read_json::<BlockModelSpec>(path)?),
        _ => return Err(usage("pass exactly one of --scenario and --spec")),
    };
    if let Some(users) = a.users {
        spec.num_users = users;
    }
    if let Some(items) = a.items {
        spec.num_items = items;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    Ok(Run::Generate(GenerateRun {
        name,
        spec,
        out: absolute(&a.out)?,
    }))
}

/// Defaults, then the config file, then explicit flags.
fn resolve_config(flags: &TrainingFlags, penalty: Option<Penalty>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! overlay {
        ($($field:ident = $value:expr),*) => {
            $(if let Some(v) = $value { config.$field = v; })*
        };
    }
    overlay!(
        d = flags.d,
        lambda = flags.lambda,
        iterations = flags.iterations,
        learning_rate = flags.learning_rate,
        init_std = flags.init_std,
        fairness_weight = flags.fairness_weight,
        penalty = penalty,
        seed = seed
    );
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn resolve_train(a: TrainArgs) -> Result<Run> {
    let config = resolve_config(&a.training, a.penalty, a.seed)?;
    let data = absolute(&a.data)?;
    let ratings = match a.ratings {
        Some(p) => absolute(&p)?,
        None => data.join("ratings.tsv"),
    };
    let dims = run::read_dataset_info(&data)?.map(|i| (i.num_users, i.num_items));
    Ok(Run::Train(TrainRun {
        ratings,
        groups: data.join("groups.tsv"),
        dims,
        config,
        out: absolute(&a.out)?,
    }))
}

fn resolve_evaluate(a: EvaluateArgs) -> Result<Run> {
    let data = absolute(&a.data)?;
    let targets = match a.targets {
        Some(p) => absolute(&p)?,
        None => ["expected.tsv", "test.tsv"]
            .iter()
            .map(|name| data.join(name))
            .find(|p| p.is_file())
            .ok_or_else(|| usage(format!("{} has no expected.tsv or test.tsv; pass --targets", data.display())))?,
    };
    Ok(Run::Evaluate(EvaluateRun {
        model: absolute(&a.model)?,
        targets,
        groups: data.join("groups.tsv"),
        out: absolute(&a.out)?,
    }))
}

fn filter_options(genres: Option<Vec<String>>, min_ratings: Option<usize>) -> FilterOptions {
    let mut filter = FilterOptions::default();
    if let Some(genres) = genres {
        filter.genres = genres.into_iter().map(|g| g.trim().to_string()).collect();
    }
    if let Some(min) = min_ratings {
        filter.min_ratings = min;
    }
    filter
}

fn resolve_experiment(a: ExperimentArgs) -> Result<Run> {
    let config = resolve_config(&a.training, None, None)?;
    let num_users = a.users.unwrap_or(DEFAULT_USERS);
    let num_items = a.items.unwrap_or(DEFAULT_ITEMS);
    let test_fraction = a.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION);
    let (source, default_trials) = match a.scenario {
        ScenarioArg::Synthetic(setting) => (
            ExperimentSource::Synthetic {
                setting,
                num_users,
                num_items,
            },
            3,
        ),
        ScenarioArg::Fig1 => (ExperimentSource::Settings { num_users, num_items }, 5),
        ScenarioArg::MovieLens => {
            let source = match (a.ml_dir, a.data) {
                (Some(dir), None) => ExperimentSource::MovieLens {
                    ml_dir: absolute(&dir)?,
                    filter: filter_options(a.genres, a.min_ratings),
                    test_fraction,
                },
                (None, Some(data)) => ExperimentSource::Prepared {
                    data: absolute(&data)?,
                    test_fraction,
                },
                _ => return Err(usage("the movielens scenario needs --ml-dir or --data")),
            };
            (source, 5)
        }
    };
    let penalties = match (a.scenario, a.penalties) {
        (ScenarioArg::Fig1, Some(_)) => return Err(usage("fig1 always trains without a penalty")),
        (ScenarioArg::Fig1, None) => vec![Penalty::None],
        (_, Some(p)) => p,
        (_, None) => Penalty::TABLE.to_vec(),
    };
    let trials = a.trials.unwrap_or(default_trials);
    if trials < 2 {
        return Err(usage("significance tests need at least 2 trials"));
    }
    Ok(Run::Experiment(ExperimentRun {
        source,
        penalties,
        trials,
        alpha: a.alpha,
        seed: a.seed.unwrap_or(0),
        config,
        out: absolute(&a.out)?,
    }))
}

fn resolve_prepare(a: PrepareArgs) -> Result<Run> {
    Ok(Run::PrepareMovielens(PrepareRun {
        ml_dir: absolute(&a.ml_dir)?,
        filter: filter_options(a.genres, a.min_ratings),
        test_fraction: a.test_fraction,
        seed: a.seed.unwrap_or(0),
        out: absolute(&a.out)?,
    }))
}
