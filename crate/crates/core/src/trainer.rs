//! Full-gradient Adam training of the penalized objective
//! `mf_objective + weight * penalty`.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::data::{GroupAssignment, RatingSet};
use crate::error::{Error, Result};
use crate::fairness::{penalty, penalty_gradient, Penalty};
use crate::model::{mf_gradient, mf_objective, Gradient, ModelParams};
use crate::seed;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Latent dimension.
    pub d: usize,
    /// Weight of the Frobenius regularizer on the latent vectors.
    pub lambda: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Standard deviation of the normal initialization.
    pub init_std: f64,
    pub seed: u64,
    pub penalty: Penalty,
    /// Multiplier on the fairness penalty.
    pub fairness_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 2,
            lambda: 1e-3,
            iterations: 250,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            init_std: 0.1,
            seed: 0,
            penalty: Penalty::None,
            fairness_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive and finite");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be nonnegative and finite");
        }
        if !(self.init_std >= 0.0) || !self.init_std.is_finite() {
            return bad("init_std must be nonnegative and finite");
        }
        if !self.fairness_weight.is_finite() {
            return bad("fairness weight must be finite");
        }
        Ok(())
    }
}

/// Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: ModelParams,
    pub second_moment: ModelParams,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(like: &ModelParams) -> Self {
        AdamState {
            first_moment: like.zeros_like(),
            second_moment: like.zeros_like(),
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update, applied in place.
pub fn adam_step(
    params: &mut ModelParams,
    grad: &Gradient,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if !params.same_shape(grad)
        || !params.same_shape(&state.first_moment)
        || !params.same_shape(&state.second_moment)
    {
        return Err(Error::Shape("Adam parameter, gradient, and state shapes differ".into()));
    }
    state.step_count += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let t = state.step_count as i32;
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.adam_epsilon;

    for (((theta, &g), m), v) in params
        .values_mut()
        .zip(grad.values())
        .zip(state.first_moment.values_mut())
        .zip(state.second_moment.values_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Objective and penalty after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Full training objective, `mf_objective + weight * penalty`.
    pub objective: f64,
    /// Unweighted penalty value.
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    pub duration: Duration,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `iteration,objective,penalty` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,penalty\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.iteration, r.objective, r.penalty);
        }
        out
    }
}

struct Evaluation {
    objective: f64,
    penalty: f64,
    gradient: Gradient,
}

fn evaluate(
    params: &ModelParams,
    train: &RatingSet,
    groups: &GroupAssignment,
    config: &TrainConfig,
) -> Result<Evaluation> {
    let base = mf_objective(params, train, config.lambda)?;
    let mut gradient = mf_gradient(params, train, config.lambda)?;
    let pen = penalty(config.penalty, params, train, groups)?;
    if config.penalty != Penalty::None {
        let pen_grad = penalty_gradient(config.penalty, params, train, groups)?;
        gradient.add_scaled(config.fairness_weight, &pen_grad);
    }
    Ok(Evaluation {
        objective: base + config.fairness_weight * pen,
        penalty: pen,
        gradient,
    })
}

/// Seeded initialization used by [`train`].
pub fn initial_params(num_users: usize, num_items: usize, config: &TrainConfig) -> ModelParams {
    let mut rng = seed::stream(config.seed, "init");
    ModelParams::random_normal(num_users, num_items, config.d, config.init_std, &mut rng)
}

/// Trains a model from the seeded initialization for `config.iterations`
/// full-gradient Adam steps.
pub fn train(
    train: &RatingSet,
    groups: &GroupAssignment,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainTrace)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyRatings);
    }
    groups.check_covers(train)?;
    let start = Instant::now();

    let mut params = initial_params(train.num_users(), train.num_items(), config);
    let mut trace = TrainTrace {
        rows: Vec::with_capacity(config.iterations),
        duration: Duration::ZERO,
    };
    if config.iterations == 0 {
        trace.duration = start.elapsed();
        return Ok((params, trace));
    }

    let mut state = AdamState::new(&params);
    let mut eval = evaluate(&params, train, groups, config)?;
    check_finite(0, eval.objective)?;
    for iteration in 1..=config.iterations {
        adam_step(&mut params, &eval.gradient, &mut state, config)?;
        eval = evaluate(&params, train, groups, config)?;
        check_finite(iteration, eval.objective)?;
        trace.rows.push(TraceRow {
            iteration,
            objective: eval.objective,
            penalty: eval.penalty,
        });
    }
    trace.duration = start.elapsed();
    Ok((params, trace))
}

fn check_finite(iteration: usize, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (RatingSet, GroupAssignment) {
        // rank one: rows (1, 2) times columns (1, -1)
        let set = RatingSet::from_triples(2, 2, [(0, 0, 1.0), (0, 1, -1.0), (1, 0, 2.0), (1, 1, -2.0)])
            .unwrap();
        (set, GroupAssignment::from_flags([true, false]))
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let config = TrainConfig::default();
        let mut params = initial_params(3, 2, &config);
        let before = params.clone();
        let mut state = AdamState::new(&params);
        let zero = params.zeros_like();
        adam_step(&mut params, &zero, &mut state, &config).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count, 1);
        assert!(state.first_moment.values().all(|&x| x == 0.0));
        assert!(state.second_moment.values().all(|&x| x == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let config = TrainConfig::default();
        let mut params = ModelParams::zeros(2, 2, 2);
        let mut grad = params.zeros_like();
        for g in grad.values_mut() {
            *g = 0.37;
        }
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grad, &mut state, &config).unwrap();
        let expected = -config.learning_rate * 0.37 / (0.37 + config.adam_epsilon);
        for &x in params.values() {
            assert!((x - expected).abs() < 1e-15);
            assert!((x + config.learning_rate).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let config = TrainConfig::default();
        let mut params = ModelParams::zeros(2, 2, 2);
        let mut state = AdamState::new(&params);
        let grad = ModelParams::zeros(2, 3, 2);
        assert!(adam_step(&mut params, &grad, &mut state, &config).is_err());
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let (set, groups) = tiny();
        let config = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let (params, trace) = train(&set, &groups, &config).unwrap();
        assert_eq!(params, initial_params(2, 2, &config));
        assert!(trace.is_empty());
    }

    #[test]
    fn fits_factorizable_data() {
        let (set, groups) = tiny();
        let config = TrainConfig {
            lambda: 0.0,
            iterations: 2000,
            ..TrainConfig::default()
        };
        let (params, trace) = train(&set, &groups, &config).unwrap();
        assert_eq!(trace.len(), 2000);
        let mse = mf_objective(&params, &set, 0.0).unwrap();
        assert!(mse < 1e-2, "mse {mse}");
    }

    #[test]
    fn rejects_bad_config_and_empty_data() {
        let (set, groups) = tiny();
        let bad = TrainConfig {
            adam_beta1: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&set, &groups, &bad), Err(Error::InvalidConfig(_))));
        let empty = RatingSet::empty(2, 2);
        assert!(matches!(
            train(&empty, &groups, &TrainConfig::default()),
            Err(Error::EmptyRatings)
        ));
    }

    #[test]
    fn divergence_names_iteration() {
        let (set, groups) = tiny();
        let config = TrainConfig {
            learning_rate: 1e300,
            iterations: 10,
            ..TrainConfig::default()
        };
        match train(&set, &groups, &config) {
            Err(Error::NonFinite { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_has_header() {
        let (set, groups) = tiny();
        let config = TrainConfig {
            iterations: 3,
            ..TrainConfig::default()
        };
        let (_, trace) = train(&set, &groups, &config).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("iteration,objective,penalty\n1,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
