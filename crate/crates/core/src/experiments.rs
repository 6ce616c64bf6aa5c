//! Multi-trial studies: train every penalty on the same per-trial data,
//! score the held-out targets, aggregate, and mark results that a paired
//! t-test cannot separate from the best mean.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{GroupAssignment, RatingSet};
use crate::error::{Error, Result};
use crate::fairness::{FairnessReport, Penalty, REPORT_COLUMNS};
use crate::model::ModelParams;
use crate::movielens;
use crate::seed;
use crate::synthetic::{self, Setting};
use crate::trainer::{train, TrainConfig};

/// Scores `params` on `targets`: mean squared error plus the five metrics.
pub fn evaluate(
    params: &ModelParams,
    targets: &RatingSet,
    groups: &GroupAssignment,
) -> Result<FairnessReport> {
    if targets.is_empty() {
        return Err(Error::EmptyRatings);
    }
    let predictions = params.predict_set(targets)?;
    FairnessReport::compute(&predictions, targets, groups)
}

/// Where each trial's data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Fresh block-model sample per trial, scored on the unobserved cells.
    Synthetic {
        setting: Setting,
        num_users: usize,
        num_items: usize,
    },
    /// Fresh random split of a fixed rating set per trial.
    Ratings {
        name: String,
        ratings: RatingSet,
        groups: GroupAssignment,
        test_fraction: f64,
    },
}

impl Scenario {
    pub fn synthetic(setting: Setting) -> Self {
        Scenario::Synthetic {
            setting,
            num_users: synthetic::DEFAULT_USERS,
            num_items: synthetic::DEFAULT_ITEMS,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Scenario::Synthetic { setting, .. } => format!("synthetic_{}", setting.name()),
            Scenario::Ratings { name, .. } => name.clone(),
        }
    }
}

/// Training data, evaluation targets, and groups for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    pub train: RatingSet,
    pub targets: RatingSet,
    pub groups: GroupAssignment,
}

/// Seed of the data stream for a trial.
pub fn trial_data_seed(base: u64, trial: usize) -> u64 {
    seed::derive_seed(base, &format!("trial/{trial}/data"))
}

/// Seed of the model initialization for a trial, shared by all penalties.
pub fn trial_init_seed(base: u64, trial: usize) -> u64 {
    seed::derive_seed(base, &format!("trial/{trial}/init"))
}

impl Scenario {
    pub fn trial_data(&self, base_seed: u64, trial: usize) -> Result<TrialData> {
        let data_seed = trial_data_seed(base_seed, trial);
        match self {
            Scenario::Synthetic {
                setting,
                num_users,
                num_items,
            } => {
                let data = synthetic::generate(&setting.spec(*num_users, *num_items, data_seed))?;
                let targets = synthetic::evaluation_set(&data);
                Ok(TrialData {
                    train: data.observed,
                    targets,
                    groups: data.groups,
                })
            }
            Scenario::Ratings {
                ratings,
                groups,
                test_fraction,
                ..
            } => {
                let (train, targets) = movielens::split(ratings, *test_fraction, data_seed)?;
                Ok(TrialData {
                    train,
                    targets,
                    groups: groups.clone(),
                })
            }
        }
    }
}

/// A full sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub scenario: Scenario,
    pub penalties: Vec<Penalty>,
    pub trials: usize,
    pub config: TrainConfig,
    pub seed: u64,
    /// Significance threshold of the paired t-tests.
    pub alpha: f64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl ExperimentPlan {
    pub fn new(scenario: Scenario, penalties: Vec<Penalty>, trials: usize) -> Self {
        ExperimentPlan {
            scenario,
            penalties,
            trials,
            config: TrainConfig::default(),
            seed: 0,
            alpha: 0.05,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::InvalidConfig(
                "at least two trials are needed for significance testing".into(),
            ));
        }
        if self.penalties.is_empty() {
            return Err(Error::InvalidConfig("no penalties to run".into()));
        }
        let mut seen = self.penalties.clone();
        seen.sort_by_key(|p| p.name());
        seen.dedup();
        if seen.len() != self.penalties.len() {
            return Err(Error::InvalidConfig("penalty listed twice".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        self.config.validate()
    }
}

/// Mean and standard error of one column for one penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

impl Summary {
    /// Sample mean and `stddev / sqrt(n)` with the `n - 1` denominator.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Summary { mean, stderr }
    }
}

/// Everything a sweep produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scenario: String,
    pub penalties: Vec<Penalty>,
    pub trials: usize,
    pub alpha: f64,
    /// `reports[p][t]` for penalty index `p` and trial `t`.
    pub reports: Vec<Vec<FairnessReport>>,
    /// `summary[p][c]` for report column `c`.
    pub summary: Vec<[Summary; 6]>,
    /// Per column: penalty indices indistinguishable from the best mean,
    /// best first.
    pub best_sets: [Vec<usize>; 6],
}

impl ExperimentResult {
    /// Aggregates per-trial reports.
    pub fn from_reports(
        scenario: String,
        penalties: Vec<Penalty>,
        reports: Vec<Vec<FairnessReport>>,
        alpha: f64,
    ) -> Result<Self> {
        let trials = reports.first().map_or(0, Vec::len);
        if reports.len() != penalties.len() || reports.iter().any(|r| r.len() != trials) {
            return Err(Error::Shape("reports must be penalties x trials".into()));
        }
        let column = |p: usize, c: usize| -> Vec<f64> {
            reports[p].iter().map(|r| r.values()[c]).collect()
        };
        let summary: Vec<[Summary; 6]> = (0..penalties.len())
            .map(|p| std::array::from_fn(|c| Summary::of(&column(p, c))))
            .collect();

        let mut best_sets: [Vec<usize>; 6] = Default::default();
        for (c, set) in best_sets.iter_mut().enumerate() {
            let best = (0..penalties.len())
                .min_by(|&a, &b| summary[a][c].mean.total_cmp(&summary[b][c].mean))
                .expect("at least one penalty");
            set.push(best);
            let best_values = column(best, c);
            for p in (0..penalties.len()).filter(|&p| p != best) {
                let test = paired_t_test(&column(p, c), &best_values, alpha)?;
                if test.outcome == Outcome::Indistinguishable {
                    set.push(p);
                }
            }
        }

        Ok(ExperimentResult {
            scenario,
            penalties,
            trials,
            alpha,
            reports,
            summary,
            best_sets,
        })
    }

    pub fn penalty_index(&self, penalty: Penalty) -> Option<usize> {
        self.penalties.iter().position(|&p| p == penalty)
    }

    /// Summary of `column` (an index into [`REPORT_COLUMNS`]) for `penalty`.
    pub fn get(&self, penalty: Penalty, column: usize) -> Option<Summary> {
        Some(self.summary[self.penalty_index(penalty)?][column])
    }

    pub fn is_marked(&self, penalty_index: usize, column: usize) -> bool {
        self.best_sets[column].contains(&penalty_index)
    }

    /// Long format: `scenario,penalty,trial,metric,value`.
    pub fn results_csv(&self) -> String {
        let mut out = String::from("scenario,penalty,trial,metric,value\n");
        for (p, penalty) in self.penalties.iter().enumerate() {
            for (t, report) in self.reports[p].iter().enumerate() {
                for (name, v) in REPORT_COLUMNS.iter().zip(report.values()) {
                    let _ = writeln!(out, "{},{},{},{},{}", self.scenario, penalty, t, name, v);
                }
            }
        }
        out
    }

    /// Aligned plain-text table with `mean ± stderr` cells; `*` marks cells
    /// indistinguishable from the column's best.
    pub fn render_text(&self) -> String {
        let header = [
            "Unfairness",
            "Error",
            "Value",
            "Absolute",
            "Underestimation",
            "Overestimation",
            "Non-Parity",
        ];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for (p, penalty) in self.penalties.iter().enumerate() {
            let mut row = vec![penalty.label().to_string()];
            for c in 0..6 {
                let s = self.summary[p][c];
                let mark = if self.is_marked(p, c) { "*" } else { " " };
                row.push(format!("{:.3} ± {}{}", s.mean, sci(s.stderr), mark));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| {
                    let pad = w - cell.chars().count();
                    if c == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "\n{} trials; * = best mean or not distinct from it (paired t-test, alpha = {})",
            self.trials, self.alpha
        );
        out
    }

    /// Wide CSV: per column `<name>_mean,<name>_stderr,<name>_best`.
    pub fn render_csv(&self) -> String {
        let mut header = vec!["penalty".to_string()];
        for name in REPORT_COLUMNS {
            header.push(format!("{name}_mean"));
            header.push(format!("{name}_stderr"));
            header.push(format!("{name}_best"));
        }
        let mut out = header.join(",");
        out.push('\n');
        for (p, penalty) in self.penalties.iter().enumerate() {
            let mut row = vec![penalty.name().to_string()];
            for c in 0..6 {
                let s = self.summary[p][c];
                row.push(s.mean.to_string());
                row.push(s.stderr.to_string());
                row.push(u8::from(self.is_marked(p, c)).to_string());
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self, config: &TrainConfig, base_seed: u64) -> serde_json::Value {
        let columns: Vec<_> = REPORT_COLUMNS
            .iter()
            .enumerate()
            .map(|(c, name)| {
                serde_json::json!({
                    "metric": name,
                    "mean": self.penalties.iter().enumerate()
                        .map(|(p, pen)| (pen.name().to_string(), self.summary[p][c].mean.into()))
                        .collect::<serde_json::Map<String, serde_json::Value>>(),
                    "stderr": self.penalties.iter().enumerate()
                        .map(|(p, pen)| (pen.name().to_string(), self.summary[p][c].stderr.into()))
                        .collect::<serde_json::Map<String, serde_json::Value>>(),
                    "best": self.penalties[self.best_sets[c][0]].name(),
                    "indistinguishable": self.best_sets[c].iter()
                        .map(|&p| self.penalties[p].name())
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "scenario": self.scenario,
            "trials": self.trials,
            "alpha": self.alpha,
            "penalties": self.penalties.iter().map(|p| p.name()).collect::<Vec<_>>(),
            "base_seed": base_seed,
            "trial_seeds": (0..self.trials).map(|t| serde_json::json!({
                "trial": t,
                "data": trial_data_seed(base_seed, t),
                "init": trial_init_seed(base_seed, t),
            })).collect::<Vec<_>>(),
            "config": config,
            "columns": columns,
        })
    }
}

/// `1.3e-02` style: one decimal in the mantissa, two-digit exponent.
fn sci(x: f64) -> String {
    let s = format!("{x:.1e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let exp: i32 = exp.parse().unwrap_or(0);
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{mantissa}e{sign}{:02}", exp.abs())
        }
        None => s,
    }
}

/// Reads the means back out of [`ExperimentResult::render_csv`].
pub fn parse_table_csv(text: &str) -> Result<Vec<(Penalty, [f64; 6])>> {
    let origin = std::path::Path::new("<table.csv>");
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    lines.next().ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
    lines
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + 3 * 6 {
                return Err(Error::parse(origin, i + 1, "wrong number of fields"));
            }
            let penalty: Penalty = fields[0].parse()?;
            let mut means = [0.0; 6];
            for (c, m) in means.iter_mut().enumerate() {
                *m = fields[1 + 3 * c]
                    .parse()
                    .map_err(|_| Error::parse(origin, i + 1, "invalid mean"))?;
            }
            Ok((penalty, means))
        })
        .collect()
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every (penalty, trial) pair. Within a trial all penalties share the
/// training data, targets, and initialization seed.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let reports = with_pool(plan.jobs, || -> Result<Vec<Vec<FairnessReport>>> {
        let data: Vec<TrialData> = (0..plan.trials)
            .into_par_iter()
            .map(|t| plan.scenario.trial_data(plan.seed, t))
            .collect::<Result<_>>()?;

        let jobs: Vec<(usize, usize)> = (0..plan.penalties.len())
            .flat_map(|p| (0..plan.trials).map(move |t| (p, t)))
            .collect();
        let flat: Vec<FairnessReport> = jobs
            .into_par_iter()
            .map(|(p, t)| {
                let penalty = plan.penalties[p];
                let config = plan
                    .config
                    .clone()
                    .with_penalty(penalty)
                    .with_seed(trial_init_seed(plan.seed, t));
                let trial = &data[t];
                let run = || -> Result<FairnessReport> {
                    let (params, _) = train(&trial.train, &trial.groups, &config)?;
                    evaluate(&params, &trial.targets, &trial.groups)
                };
                run().map_err(|e| Error::Trial {
                    penalty: penalty.name().to_string(),
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        Ok(flat.chunks(plan.trials).map(<[_]>::to_vec).collect())
    })??;

    ExperimentResult::from_reports(plan.scenario.name(), plan.penalties.clone(), reports, plan.alpha)
}

/// Unpenalized runs across sampling settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingStudy {
    pub results: Vec<(Setting, ExperimentResult)>,
}

/// Trains the unpenalized model on each setting at `num_users` x `num_items`.
/// All settings share the base seed, so trial `t` uses the same streams in
/// every setting.
pub fn run_setting_study(
    settings: &[Setting],
    (num_users, num_items): (usize, usize),
    trials: usize,
    config: &TrainConfig,
    base_seed: u64,
    jobs: usize,
) -> Result<SettingStudy> {
    let results = settings
        .iter()
        .map(|&setting| {
            let plan = ExperimentPlan {
                config: config.clone(),
                seed: base_seed,
                jobs,
                ..ExperimentPlan::new(
                    Scenario::Synthetic {
                        setting,
                        num_users,
                        num_items,
                    },
                    vec![Penalty::None],
                    trials,
                )
            };
            Ok((setting, run_experiment(&plan)?))
        })
        .collect::<Result<_>>()?;
    Ok(SettingStudy { results })
}

impl SettingStudy {
    pub fn summary(&self, setting: Setting, column: usize) -> Option<Summary> {
        self.results
            .iter()
            .find(|(s, _)| *s == setting)
            .map(|(_, r)| r.summary[0][column])
    }

    /// Plot-ready `setting,metric,mean,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,metric,mean,stderr\n");
        for (setting, result) in &self.results {
            for (c, name) in REPORT_COLUMNS.iter().enumerate() {
                let s = result.summary[0][c];
                let _ = writeln!(out, "{},{},{},{}", setting.name(), name, s.mean, s.stderr);
            }
        }
        out
    }

    /// Long format across settings: `scenario,penalty,trial,metric,value`.
    pub fn results_csv(&self) -> String {
        let mut out = String::from("scenario,penalty,trial,metric,value\n");
        for (_, r) in &self.results {
            out.extend(r.results_csv().lines().skip(1).map(|l| format!("{l}\n")));
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("{:<8}", "Setting");
        for name in REPORT_COLUMNS {
            let _ = write!(out, "  {name:>20}");
        }
        out.push('\n');
        for (setting, result) in &self.results {
            let _ = write!(out, "{:<8}", setting.name());
            for c in 0..6 {
                let s = result.summary[0][c];
                let _ = write!(out, "  {:>20}", format!("{:.3} ± {}", s.mean, sci(s.stderr)));
            }
            out.push('\n');
        }
        out
    }
}

/// Whether two paired samples differ significantly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Distinct,
    Indistinguishable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    /// `mean(d) / (sd(d) / sqrt(n))`; infinite for constant nonzero differences.
    pub t: f64,
    pub p_value: f64,
    pub outcome: Outcome,
}

/// Two-sided paired t-test on `a - b` with `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidConfig("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);

    let (t, p_value) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / n).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid degrees of freedom");
        (t, 2.0 * dist.cdf(-t.abs()))
    };
    let outcome = if p_value >= alpha {
        Outcome::Indistinguishable
    } else {
        Outcome::Distinct
    };
    Ok(TTest { t, p_value, outcome })
}
