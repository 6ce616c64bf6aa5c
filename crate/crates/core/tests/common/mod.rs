//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into `fairrec::fairness`; the metric formulas
//! are written out again from scratch over raw triples.

#![allow(dead_code)]

use fairrec::{GroupAssignment, ModelParams, RatingSet};
use rand::Rng;

pub const KINDS: [&str; 5] = ["value", "absolute", "under", "over", "nonparity"];

/// Per-item group means, computed by filtering the triples once per item.
pub struct ItemTerms {
    /// (E_dis[y], E_dis[r], E_adv[y], E_adv[r]) for items rated by both groups.
    pub items: Vec<(f64, f64, f64, f64)>,
    pub mean_pred_dis: Option<f64>,
    pub mean_pred_adv: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// `triples` are `(user, item, prediction, rating)`; `dis[u]` marks the
/// disadvantaged group.
pub fn item_terms(triples: &[(usize, usize, f64, f64)], dis: &[bool], num_items: usize) -> ItemTerms {
    let mut items = Vec::new();
    for j in 0..num_items {
        let pick = |want: bool, k: usize| -> Vec<f64> {
            triples
                .iter()
                .filter(|t| t.1 == j && dis[t.0] == want)
                .map(|t| if k == 0 { t.2 } else { t.3 })
                .collect()
        };
        if let (Some(yd), Some(rd), Some(ya), Some(ra)) =
            (mean(&pick(true, 0)), mean(&pick(true, 1)), mean(&pick(false, 0)), mean(&pick(false, 1)))
        {
            items.push((yd, rd, ya, ra));
        }
    }
    let preds = |want: bool| -> Vec<f64> {
        triples.iter().filter(|t| dis[t.0] == want).map(|t| t.2).collect()
    };
    ItemTerms {
        items,
        mean_pred_dis: mean(&preds(true)),
        mean_pred_adv: mean(&preds(false)),
    }
}

/// Signed inner differences, one per valid item (or one overall for non-parity).
pub fn inner_differences(terms: &ItemTerms, kind: &str) -> Vec<f64> {
    if kind == "nonparity" {
        return match (terms.mean_pred_dis, terms.mean_pred_adv) {
            (Some(a), Some(b)) => vec![a - b],
            _ => vec![],
        };
    }
    terms
        .items
        .iter()
        .map(|&(yd, rd, ya, ra)| match kind {
            "value" => (yd - rd) - (ya - ra),
            "absolute" => (yd - rd).abs() - (ya - ra).abs(),
            "under" => f64::max(0.0, rd - yd) - f64::max(0.0, ra - ya),
            "over" => f64::max(0.0, yd - rd) - f64::max(0.0, ya - ra),
            other => panic!("unknown kind {other}"),
        })
        .collect()
}

fn average(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn brute_metric(terms: &ItemTerms, kind: &str) -> f64 {
    average(inner_differences(terms, kind).into_iter().map(f64::abs))
}

pub fn brute_smoothed(terms: &ItemTerms, kind: &str) -> f64 {
    average(
        inner_differences(terms, kind)
            .into_iter()
            .map(|d| if d.abs() < 1.0 { d * d } else { d.abs() }),
    )
}

pub fn brute_mse(triples: &[(usize, usize, f64, f64)]) -> f64 {
    average(triples.iter().map(|t| (t.2 - t.3) * (t.2 - t.3)))
}

/// Predictions of `params` written out by hand.
pub fn triples_for(params: &ModelParams, ratings: &RatingSet) -> Vec<(usize, usize, f64, f64)> {
    ratings
        .iter()
        .map(|r| {
            let dot: f64 = (0..params.dim())
                .map(|k| params.user_vectors[[r.user, k]] * params.item_vectors[[r.item, k]])
                .sum();
            let y = dot + params.user_bias[r.user] + params.item_bias[r.item];
            (r.user, r.item, y, r.value)
        })
        .collect()
}

pub fn flags(groups: &GroupAssignment) -> Vec<bool> {
    groups.users().iter().map(|g| g.is_disadvantaged()).collect()
}

/// Brute-force smoothed penalty for a penalty name, including `under_plus_over`.
pub fn brute_penalty(kind: &str, params: &ModelParams, ratings: &RatingSet, groups: &GroupAssignment) -> f64 {
    let terms = item_terms(&triples_for(params, ratings), &flags(groups), ratings.num_items());
    match kind {
        "none" => 0.0,
        "under_plus_over" => brute_smoothed(&terms, "under") + brute_smoothed(&terms, "over"),
        k => brute_smoothed(&terms, k),
    }
}

/// Whether any penalty kink lies within `margin` of the current point: an
/// inner difference near +-1, or a group error near zero (absolute value and
/// hinges).
pub fn near_kink(params: &ModelParams, ratings: &RatingSet, groups: &GroupAssignment, margin: f64) -> bool {
    let terms = item_terms(&triples_for(params, ratings), &flags(groups), ratings.num_items());
    let error_kink = terms
        .items
        .iter()
        .any(|&(yd, rd, ya, ra)| (yd - rd).abs() < margin || (ya - ra).abs() < margin);
    let unit_kink = KINDS
        .iter()
        .flat_map(|k| inner_differences(&terms, k))
        .any(|d| (d.abs() - 1.0).abs() < margin);
    error_kink || unit_kink
}

/// Central difference of `f` along every coordinate of `params`, in the
/// order of [`ModelParams::values`].
pub fn central_differences(params: &ModelParams, h: f64, f: impl Fn(&ModelParams) -> f64) -> Vec<f64> {
    let n = params.len();
    (0..n)
        .map(|k| {
            let mut plus = params.clone();
            *plus.values_mut().nth(k).unwrap() += h;
            let mut minus = params.clone();
            *minus.values_mut().nth(k).unwrap() -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - n| / max(1, |a|)` over coordinates.
pub fn worst_relative_error(analytic: &ModelParams, numeric: &[f64]) -> f64 {
    analytic
        .values()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Random instance with at most `max_users` x `max_items`, both groups present
/// and at least one item rated by both groups.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_users: usize,
    max_items: usize,
    dim: usize,
    scale: f64,
) -> (ModelParams, RatingSet, GroupAssignment) {
    loop {
        let m = rng.random_range(2..=max_users);
        let n = rng.random_range(1..=max_items);
        let density = rng.random_range(0.3..=1.0);
        let mut triples = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.random_bool(density) {
                    triples.push((i, j, rng.random_range(-2.0..2.0)));
                }
            }
        }
        let flags: Vec<bool> = (0..m).map(|_| rng.random_bool(0.5)).collect();
        let ratings = RatingSet::from_triples(m, n, triples).unwrap();
        let groups = GroupAssignment::from_flags(flags.iter().copied());
        let has_valid = (0..n).any(|j| {
            let rated = |want: bool| ratings.iter().any(|r| r.item == j && flags[r.user] == want);
            rated(true) && rated(false)
        });
        if !has_valid {
            continue;
        }
        let mut params = ModelParams::zeros(m, n, dim);
        for x in params.values_mut() {
            *x = scale * rng.random_range(-1.0..1.0);
        }
        return (params, ratings, groups);
    }
}

/// Writes a small MovieLens-format directory: latin-1 titles, `::` fields,
/// a mix of selected and unselected genres, and users on both sides of a
/// 3-rating activity threshold.
pub fn write_movielens_fixture(dir: &std::path::Path) {
    let users = "1::F::1::10::48067\n2::M::56::16::70072\n3::F::25::15::55117\n\
                 4::M::45::7::02460\n5::F::25::20::55455\n6::M::50::9::55117\n";
    let mut movies: Vec<u8> = Vec::new();
    movies.extend_from_slice(b"1::Toy Story (1995)::Animation|Children's|Comedy\n");
    movies.extend_from_slice(b"2::Sabrina (1995)::Comedy|Romance\n");
    movies.extend_from_slice(b"3::Heat (1995)::Action|Crime|Thriller\n");
    movies.extend_from_slice(b"4::Am\xe9lie (2001)::Comedy|Romance\n");
    movies.extend_from_slice(b"5::Star Wars (1977)::Action|Adventure|Fantasy|Sci-Fi\n");
    movies.extend_from_slice(b"6::Grease (1978)::Comedy|Musical|Romance\n");
    movies.extend_from_slice(b"7::Fargo (1996)::Crime|Drama|Thriller\n");
    movies.extend_from_slice(b"8::Unwatched Musical (1950)::Musical\n");
    // (user, movie, stars); user 4 has only two genre ratings, user 6 one.
    let ratings: &[(u32, u32, u8)] = &[
        (1, 1, 5), (1, 2, 4), (1, 4, 5), (1, 6, 3), (1, 3, 2),
        (2, 3, 5), (2, 5, 4), (2, 7, 4), (2, 2, 1), (2, 1, 3),
        (3, 2, 5), (3, 6, 4), (3, 5, 2),
        (4, 3, 4), (4, 7, 5), (4, 1, 4),
        (5, 2, 3), (5, 4, 4), (5, 5, 3), (5, 7, 2),
        (6, 6, 1), (6, 1, 2),
    ];
    let mut lines = String::new();
    for (k, (u, m, s)) in ratings.iter().enumerate() {
        lines.push_str(&format!("{u}::{m}::{s}::{}\n", 978300000 + k));
    }
    std::fs::write(dir.join("users.dat"), users).unwrap();
    std::fs::write(dir.join("movies.dat"), movies).unwrap();
    std::fs::write(dir.join("ratings.dat"), lines).unwrap();
}
