//! Fairness-aware matrix factorization for collaborative filtering.
//!
//! The crate trains biased matrix-factorization recommenders whose objective
//! can carry an unfairness penalty, measures five group-level unfairness
//! metrics on held-out data, generates block-model rating data with
//! population and observation bias, and ingests MovieLens-1M.
//!
//! ```
//! use fairrec::{evaluate, generate, evaluation_set, train, Penalty, Setting, TrainConfig};
//!
//! let data = generate(&Setting::PO.spec(40, 30, 7)).unwrap();
//! let config = TrainConfig { iterations: 20, ..TrainConfig::default() }.with_penalty(Penalty::Value);
//! let (params, trace) = train(&data.observed, &data.groups, &config).unwrap();
//! assert_eq!(trace.len(), 20);
//!
//! let report = evaluate(&params, &evaluation_set(&data), &data.groups).unwrap();
//! assert!(report.value >= 0.0);
//! ```
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod data;
pub mod error;
pub mod experiments;
pub mod fairness;
pub mod model;
pub mod movielens;
pub mod seed;
pub mod synthetic;
pub mod trainer;

pub use data::{Group, GroupAssignment, Rating, RatingSet};
pub use error::{Error, Result};
pub use experiments::{
    evaluate, paired_t_test, run_experiment, ExperimentPlan, ExperimentResult, Outcome, Scenario,
};
pub use fairness::{
    group_item_averages, metric_absolute, metric_nonparity, metric_over, metric_under,
    metric_value, penalty, penalty_gradient, smoothed_penalty_term, FairnessReport,
    GroupItemAverages, Metric, Penalty,
};
pub use model::{mf_gradient, mf_objective, predict, Gradient, ModelParams};
pub use synthetic::{builtin_specs, evaluation_set, generate, BlockModelSpec, Setting, SyntheticDataset};
pub use trainer::{adam_step, train, AdamState, TrainConfig, TrainTrace};

// The guide's chapters, compiled so that `cargo test --doc` runs their
// listings. One module per chapter keeps failures traceable to a file.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/movielens.md")]
    mod movielens {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
