use fairrec::trainer::initial_params;
use fairrec::{
    evaluate, evaluation_set, generate, mf_objective, penalty, train, Penalty, Setting, TrainConfig,
};

fn small_config(penalty: Penalty, iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        seed: 42,
        ..TrainConfig::default()
    }
    .with_penalty(penalty)
}

#[test]
fn training_is_deterministic() {
    let data = generate(&Setting::PO.spec(60, 45, 1)).unwrap();
    let config = small_config(Penalty::Absolute, 40);
    let (a, ta) = train(&data.observed, &data.groups, &config).unwrap();
    let (b, tb) = train(&data.observed, &data.groups, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta.rows, tb.rows);
    assert_eq!(ta.to_csv(), tb.to_csv());
}

#[test]
fn trace_matches_recomputation() {
    let data = generate(&Setting::PO.spec(60, 45, 2)).unwrap();
    for kind in [Penalty::None, Penalty::Value, Penalty::NonParity, Penalty::UnderPlusOver] {
        let long = train(&data.observed, &data.groups, &small_config(kind, 30)).unwrap().1;
        for k in [1, 7, 30] {
            let (params, trace) = train(&data.observed, &data.groups, &small_config(kind, k)).unwrap();
            let row = trace.rows.last().unwrap();
            assert_eq!(row.iteration, k);
            let pen = penalty(kind, &params, &data.observed, &data.groups).unwrap();
            let objective = mf_objective(&params, &data.observed, 1e-3).unwrap() + pen;
            assert_eq!(row.penalty, pen);
            assert!((row.objective - objective).abs() <= 1e-12 * objective.abs());
            assert_eq!(long.rows[k - 1], *row, "prefix of a longer run");
        }
    }
}

#[test]
fn no_divergence_on_any_setting() {
    for setting in Setting::ALL {
        let data = generate(&setting.spec(80, 60, 3)).unwrap();
        let (params, trace) =
            train(&data.observed, &data.groups, &small_config(Penalty::None, 100)).unwrap();
        assert!(params.is_finite());
        assert!(trace.rows.iter().all(|r| r.objective.is_finite()));
    }
}

#[test]
fn initialization_depends_only_on_seed() {
    let config = small_config(Penalty::None, 0);
    assert_eq!(initial_params(5, 4, &config), initial_params(5, 4, &config));
    assert_ne!(initial_params(5, 4, &config), initial_params(5, 4, &config.clone().with_seed(43)));
    let stds: Vec<f64> = initial_params(200, 200, &config).values().copied().collect();
    let var = stds.iter().map(|x| x * x).sum::<f64>() / stds.len() as f64;
    assert!((var.sqrt() - 0.1).abs() < 0.01);
}

#[test]
fn value_penalty_lowers_value_unfairness() {
    let data = generate(&Setting::PO.spec(400, 300, 0)).unwrap();
    let targets = evaluation_set(&data);
    let score = |kind| {
        let (params, _) = train(&data.observed, &data.groups, &small_config(kind, 250)).unwrap();
        evaluate(&params, &targets, &data.groups).unwrap()
    };
    let none = score(Penalty::None);
    let value = score(Penalty::Value);
    assert!(value.value < none.value, "{} vs {}", value.value, none.value);
}
