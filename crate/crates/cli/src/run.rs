//! Fully resolved invocations. A `Run` carries every value that affects the
//! outputs, so executing the same `Run` again reproduces them byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fairrec::experiments::{run_setting_study, trial_data_seed, trial_init_seed};
use fairrec::movielens::{self, FilterOptions, MovieLensPaths};
use fairrec::synthetic::{self, BlockModelSpec};
use fairrec::{
    evaluate, run_experiment, train, ExperimentPlan, GroupAssignment, ModelParams, Penalty,
    RatingSet, Scenario, Setting, TrainConfig,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Run {
    Generate(GenerateRun),
    Train(TrainRun),
    Evaluate(EvaluateRun),
    Experiment(ExperimentRun),
    PrepareMovielens(PrepareRun),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRun {
    pub name: String,
    pub spec: BlockModelSpec,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub ratings: PathBuf,
    pub groups: PathBuf,
    /// Grid size, when the dataset directory records it.
    pub dims: Option<(usize, usize)>,
    pub config: TrainConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRun {
    pub model: PathBuf,
    pub targets: PathBuf,
    pub groups: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSource {
    Synthetic { setting: Setting, num_users: usize, num_items: usize },
    Settings { num_users: usize, num_items: usize },
    MovieLens { ml_dir: PathBuf, filter: FilterOptions, test_fraction: f64 },
    Prepared { data: PathBuf, test_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub source: ExperimentSource,
    pub penalties: Vec<Penalty>,
    pub trials: usize,
    pub alpha: f64,
    pub seed: u64,
    pub config: TrainConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareRun {
    pub ml_dir: PathBuf,
    pub filter: FilterOptions,
    pub test_fraction: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
}

/// Size and origin of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub num_users: usize,
    pub num_items: usize,
    pub source: String,
}

pub const DATASET_INFO: &str = "dataset.json";

/// What a run read and wrote.
#[derive(Debug, Default)]
pub struct Effects {
    pub inputs: Vec<PathBuf>,
    /// File names inside the output directory, in write order.
    pub outputs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
}

struct Writer<'a> {
    dir: &'a Path,
    effects: &'a mut Effects,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.effects.outputs.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }
}

impl Run {
    pub fn out(&self) -> &Path {
        match self {
            Run::Generate(r) => &r.out,
            Run::Train(r) => &r.out,
            Run::Evaluate(r) => &r.out,
            Run::Experiment(r) => &r.out,
            Run::PrepareMovielens(r) => &r.out,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Run::Generate(r) => r.out = out,
            Run::Train(r) => r.out = out,
            Run::Evaluate(r) => r.out = out,
            Run::Experiment(r) => r.out = out,
            Run::PrepareMovielens(r) => r.out = out,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Run::Generate(_) => "generate",
            Run::Train(_) => "train",
            Run::Evaluate(_) => "evaluate",
            Run::Experiment(_) => "experiment",
            Run::PrepareMovielens(_) => "prepare-movielens",
        }
    }

    /// Files read by the run, known before it starts.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Run::Generate(_) => vec![],
            Run::Train(r) => vec![r.ratings.clone(), r.groups.clone()],
            Run::Evaluate(r) => vec![r.model.clone(), r.targets.clone(), r.groups.clone()],
            Run::Experiment(r) => match &r.source {
                ExperimentSource::MovieLens { ml_dir, .. } => ml_files(ml_dir),
                ExperimentSource::Prepared { data, .. } => {
                    vec![data.join("ratings.tsv"), data.join("groups.tsv")]
                }
                _ => vec![],
            },
            Run::PrepareMovielens(r) => ml_files(&r.ml_dir),
        }
    }

    /// Executes the run, writing into `self.out()`.
    pub fn execute(&self, jobs: usize) -> Result<Effects> {
        let out = self.out();
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let mut effects = Effects {
            inputs: self.inputs(),
            ..Effects::default()
        };
        let mut w = Writer {
            dir: out,
            effects: &mut effects,
        };
        match self {
            Run::Generate(r) => generate(r, &mut w)?,
            Run::Train(r) => train_one(r, &mut w)?,
            Run::Evaluate(r) => evaluate_one(r, &mut w)?,
            Run::Experiment(r) => experiment(r, jobs, &mut w)?,
            Run::PrepareMovielens(r) => prepare(r, &mut w)?,
        }
        Ok(effects)
    }
}

fn ml_files(dir: &Path) -> Vec<PathBuf> {
    let p = MovieLensPaths::in_dir(dir);
    vec![p.users, p.movies, p.ratings]
}

fn generate(run: &GenerateRun, w: &mut Writer) -> Result<()> {
    let data = synthetic::generate(&run.spec)?;
    w.effects.seeds.insert("data".into(), run.spec.seed);
    w.write("ratings.tsv", data.observed.to_tsv())?;
    w.write("groups.tsv", data.groups.to_tsv())?;
    w.write("expected.tsv", synthetic::evaluation_set(&data).to_tsv())?;
    let mut types = String::new();
    for (u, &g) in data.user_types.iter().enumerate() {
        types.push_str(&format!("user\t{u}\t{}\n", run.spec.user_groups[g].name));
    }
    for (i, &h) in data.item_types.iter().enumerate() {
        types.push_str(&format!("item\t{i}\t{}\n", run.spec.item_groups[h].name));
    }
    w.write("types.tsv", types)?;
    w.json(
        DATASET_INFO,
        &DatasetInfo {
            num_users: run.spec.num_users,
            num_items: run.spec.num_items,
            source: run.name.clone(),
        },
    )?;
    println!(
        "{}: {} observed ratings on a {}x{} grid",
        run.name,
        data.observed.len(),
        run.spec.num_users,
        run.spec.num_items
    );
    Ok(())
}

pub fn read_dataset_info(dir: &Path) -> Result<Option<DatasetInfo>> {
    let path = dir.join(DATASET_INFO);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let info = serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display()))?;
    Ok(Some(info))
}

fn load_ratings(path: &Path, dims: Option<(usize, usize)>) -> Result<RatingSet> {
    Ok(RatingSet::read_tsv(path, dims)?)
}

fn train_one(run: &TrainRun, w: &mut Writer) -> Result<()> {
    let groups = GroupAssignment::read_tsv(&run.groups)?;
    let ratings = load_ratings(&run.ratings, run.dims)?;
    w.effects.seeds.insert("init".into(), run.config.seed);
    let (params, trace) = train(&ratings, &groups, &run.config)?;
    w.write("model.txt", params.to_text())?;
    w.write("trace.csv", trace.to_csv())?;
    match trace.rows.last() {
        Some(last) => println!(
            "trained {} iterations, penalty {}: objective {:.6}",
            last.iteration, run.config.penalty, last.objective
        ),
        None => println!("wrote the initialization (0 iterations)"),
    }
    Ok(())
}

fn evaluate_one(run: &EvaluateRun, w: &mut Writer) -> Result<()> {
    let params = ModelParams::read_text(&run.model)?;
    let groups = GroupAssignment::read_tsv(&run.groups)?;
    let targets = load_ratings(&run.targets, Some((params.num_users(), params.num_items())))?;
    let report = evaluate(&params, &targets, &groups)?;
    w.write("report.csv", report.to_csv())?;
    print!("{}", report.to_csv());
    Ok(())
}

fn filtered(ml_dir: &Path, filter: &FilterOptions) -> Result<movielens::FilteredDataset> {
    let paths = MovieLensPaths::in_dir(ml_dir);
    if !paths.exist() {
        bail!(
            "{} does not contain users.dat, movies.dat, and ratings.dat",
            ml_dir.display()
        );
    }
    Ok(movielens::filter(&movielens::parse(&paths)?, filter)?)
}

fn experiment(run: &ExperimentRun, jobs: usize, w: &mut Writer) -> Result<()> {
    for t in 0..run.trials {
        w.effects.seeds.insert(format!("trial/{t}/data"), trial_data_seed(run.seed, t));
        w.effects.seeds.insert(format!("trial/{t}/init"), trial_init_seed(run.seed, t));
    }
    let scenario = match &run.source {
        ExperimentSource::Settings { num_users, num_items } => {
            return setting_study(run, *num_users, *num_items, jobs, w);
        }
        ExperimentSource::Synthetic {
            setting,
            num_users,
            num_items,
        } => Scenario::Synthetic {
            setting: *setting,
            num_users: *num_users,
            num_items: *num_items,
        },
        ExperimentSource::MovieLens {
            ml_dir,
            filter,
            test_fraction,
        } => {
            let data = filtered(ml_dir, filter)?;
            Scenario::Ratings {
                name: "movielens".into(),
                ratings: data.ratings,
                groups: data.groups,
                test_fraction: *test_fraction,
            }
        }
        ExperimentSource::Prepared { data, test_fraction } => {
            let dims = read_dataset_info(data)?.map(|i| (i.num_users, i.num_items));
            Scenario::Ratings {
                name: read_dataset_info(data)?.map_or_else(|| "ratings".into(), |i| i.source),
                ratings: load_ratings(&data.join("ratings.tsv"), dims)?,
                groups: GroupAssignment::read_tsv(data.join("groups.tsv"))?,
                test_fraction: *test_fraction,
            }
        }
    };
    let plan = ExperimentPlan {
        scenario,
        penalties: run.penalties.clone(),
        trials: run.trials,
        config: run.config.clone(),
        seed: run.seed,
        alpha: run.alpha,
        jobs,
    };
    let result = run_experiment(&plan)?;
    let table = result.render_text();
    w.write("results.csv", result.results_csv())?;
    w.write("table.txt", &table)?;
    w.write("table.csv", result.render_csv())?;
    w.json("summary.json", &result.summary_json(&run.config, run.seed))?;
    print!("{table}");
    Ok(())
}

fn setting_study(run: &ExperimentRun, num_users: usize, num_items: usize, jobs: usize, w: &mut Writer) -> Result<()> {
    let config = &run.config;
    let study = run_setting_study(&Setting::ALL, (num_users, num_items), run.trials, config, run.seed, jobs)?;
    let table = study.render_text();
    w.write("settings.csv", study.to_csv())?;
    w.write("results.csv", study.results_csv())?;
    w.write("table.txt", &table)?;
    let per_setting: BTreeMap<&str, serde_json::Value> = study
        .results
        .iter()
        .map(|(s, r)| (s.name(), r.summary_json(config, run.seed)))
        .collect();
    w.json("summary.json", &per_setting)?;
    print!("{table}");
    Ok(())
}

fn prepare(run: &PrepareRun, w: &mut Writer) -> Result<()> {
    let data = filtered(&run.ml_dir, &run.filter)?;
    let stats = movielens::genre_stats(&data);
    w.write("ratings.tsv", data.ratings.to_tsv())?;
    w.write("groups.tsv", data.groups.to_tsv())?;
    let mut users = String::new();
    for (k, u) in data.users.iter().enumerate() {
        users.push_str(&format!("{k}\t{}\t{:?}\n", u.id, u.gender));
    }
    w.write("users.tsv", users)?;
    let mut movies = String::new();
    for (k, m) in data.movies.iter().enumerate() {
        movies.push_str(&format!("{k}\t{}\t{}\t{}\n", m.id, m.title, m.genres.join("|")));
    }
    w.write("movies.tsv", movies)?;
    let rendered = format!(
        "{} users, {} movies, {} ratings\n\n{}",
        data.num_users(),
        data.num_movies(),
        data.ratings.len(),
        stats.render()
    );
    w.write("genre_stats.txt", &rendered)?;
    w.json("genre_stats.json", &stats)?;
    w.json(
        DATASET_INFO,
        &DatasetInfo {
            num_users: data.num_users(),
            num_items: data.num_movies(),
            source: "movielens".into(),
        },
    )?;
    if let Some(fraction) = run.test_fraction {
        w.effects.seeds.insert("split".into(), run.seed);
        let (train, test) = movielens::split(&data.ratings, fraction, run.seed)?;
        w.write("train.tsv", train.to_tsv())?;
        w.write("test.tsv", test.to_tsv())?;
    }
    print!("{rendered}");
    Ok(())
}
