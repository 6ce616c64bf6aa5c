//! Group-conditional averages, the five unfairness metrics, and their smoothed
//! penalty forms with analytic gradients.
//!
//! Every per-item metric compares the disadvantaged group's estimation error
//! on an item against the advantaged group's. Items that lack observations
//! from either group are skipped, and the average runs over the remaining
//! items only. Non-parity compares the overall mean prediction of the two
//! groups.
//!
//! The penalty form of a metric replaces its outer absolute value with
//! [`smoothed_penalty_term`], which is quadratic inside the unit interval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Group, GroupAssignment, RatingSet};
use crate::error::{Error, Result};
use crate::model::{Gradient, ModelParams};

/// Per-item averages for one item. `None` marks a group with no entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ItemAverages {
    pub avg_pred_disadvantaged: Option<f64>,
    pub avg_pred_advantaged: Option<f64>,
    pub avg_rating_disadvantaged: Option<f64>,
    pub avg_rating_advantaged: Option<f64>,
    pub count_disadvantaged: usize,
    pub count_advantaged: usize,
}

impl ItemAverages {
    /// Signed errors `(pred - rating)` of both groups, when both are observed.
    pub fn errors(&self) -> Option<(f64, f64)> {
        match (
            self.avg_pred_disadvantaged,
            self.avg_rating_disadvantaged,
            self.avg_pred_advantaged,
            self.avg_rating_advantaged,
        ) {
            (Some(yd), Some(rd), Some(ya), Some(ra)) => Some((yd - rd, ya - ra)),
            _ => None,
        }
    }
}

/// Per-item and overall group means of predictions and ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupItemAverages {
    pub items: Vec<ItemAverages>,
    pub overall_pred_disadvantaged: Option<f64>,
    pub overall_pred_advantaged: Option<f64>,
    pub overall_count_disadvantaged: usize,
    pub overall_count_advantaged: usize,
}

impl GroupItemAverages {
    /// Items observed by both groups, with their signed errors.
    pub fn valid_errors(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.items
            .iter()
            .enumerate()
            .filter_map(|(j, a)| a.errors().map(|(d, v)| (j, d, v)))
    }

    pub fn num_valid_items(&self) -> usize {
        self.valid_errors().count()
    }
}

fn mean(sum: f64, count: usize) -> Option<f64> {
    (count > 0).then(|| sum / count as f64)
}

/// Computes the group means over exactly the entries of `ratings`.
/// `predictions[k]` is the prediction for `ratings.entries()[k]`.
pub fn group_item_averages(
    predictions: &[f64],
    ratings: &RatingSet,
    groups: &GroupAssignment,
) -> Result<GroupItemAverages> {
    if predictions.len() != ratings.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ratings",
            predictions.len(),
            ratings.len()
        )));
    }
    groups.check_covers(ratings)?;

    // [disadvantaged, advantaged]
    let mut pred_sum = vec![[0.0f64; 2]; ratings.num_items()];
    let mut rating_sum = vec![[0.0f64; 2]; ratings.num_items()];
    let mut count = vec![[0usize; 2]; ratings.num_items()];
    let mut overall_sum = [0.0f64; 2];
    let mut overall_count = [0usize; 2];
    for (r, &y) in ratings.iter().zip(predictions) {
        let g = slot(groups.user(r.user));
        pred_sum[r.item][g] += y;
        rating_sum[r.item][g] += r.value;
        count[r.item][g] += 1;
        overall_sum[g] += y;
        overall_count[g] += 1;
    }

    let items = (0..ratings.num_items())
        .map(|j| ItemAverages {
            avg_pred_disadvantaged: mean(pred_sum[j][0], count[j][0]),
            avg_pred_advantaged: mean(pred_sum[j][1], count[j][1]),
            avg_rating_disadvantaged: mean(rating_sum[j][0], count[j][0]),
            avg_rating_advantaged: mean(rating_sum[j][1], count[j][1]),
            count_disadvantaged: count[j][0],
            count_advantaged: count[j][1],
        })
        .collect();

    Ok(GroupItemAverages {
        items,
        overall_pred_disadvantaged: mean(overall_sum[0], overall_count[0]),
        overall_pred_advantaged: mean(overall_sum[1], overall_count[1]),
        overall_count_disadvantaged: overall_count[0],
        overall_count_advantaged: overall_count[1],
    })
}

#[inline]
fn slot(g: Group) -> usize {
    match g {
        Group::Disadvantaged => 0,
        Group::Advantaged => 1,
    }
}

/// The five unfairness measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Value,
    Absolute,
    Under,
    Over,
    NonParity,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Value,
        Metric::Absolute,
        Metric::Under,
        Metric::Over,
        Metric::NonParity,
    ];

    /// Signed per-item difference whose magnitude is the item's contribution,
    /// given the signed errors of the disadvantaged and advantaged groups.
    /// Not meaningful for [`Metric::NonParity`].
    #[inline]
    fn item_difference(self, err_dis: f64, err_adv: f64) -> f64 {
        match self {
            Metric::Value => err_dis - err_adv,
            Metric::Absolute => err_dis.abs() - err_adv.abs(),
            Metric::Under => (-err_dis).max(0.0) - (-err_adv).max(0.0),
            Metric::Over => err_dis.max(0.0) - err_adv.max(0.0),
            Metric::NonParity => unreachable!("non-parity has no per-item term"),
        }
    }

    /// Subgradient of [`Metric::item_difference`] with respect to the two
    /// signed errors. Zero at the hinge and absolute-value kinks.
    #[inline]
    fn item_difference_slope(self, err_dis: f64, err_adv: f64) -> (f64, f64) {
        match self {
            Metric::Value => (1.0, -1.0),
            Metric::Absolute => (sign(err_dis), -sign(err_adv)),
            Metric::Under => (
                if err_dis < 0.0 { -1.0 } else { 0.0 },
                if err_adv < 0.0 { 1.0 } else { 0.0 },
            ),
            Metric::Over => (
                if err_dis > 0.0 { 1.0 } else { 0.0 },
                if err_adv > 0.0 { -1.0 } else { 0.0 },
            ),
            Metric::NonParity => unreachable!("non-parity has no per-item term"),
        }
    }

    /// Signed quantity behind each term of the metric: one per valid item,
    /// or the single overall difference for non-parity.
    pub fn differences(self, avgs: &GroupItemAverages) -> Vec<f64> {
        match self {
            Metric::NonParity => nonparity_difference(avgs).into_iter().collect(),
            _ => avgs
                .valid_errors()
                .map(|(_, d, a)| self.item_difference(d, a))
                .collect(),
        }
    }

    /// Unsmoothed metric value.
    pub fn evaluate(self, avgs: &GroupItemAverages) -> f64 {
        mean_of(self.differences(avgs).into_iter().map(f64::abs))
    }

    /// Metric with the outer absolute value smoothed.
    pub fn smoothed(self, avgs: &GroupItemAverages) -> f64 {
        mean_of(self.differences(avgs).into_iter().map(smoothed_penalty_term))
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Value => "value",
            Metric::Absolute => "absolute",
            Metric::Under => "under",
            Metric::Over => "over",
            Metric::NonParity => "nonparity",
        }
    }
}

fn nonparity_difference(avgs: &GroupItemAverages) -> Option<f64> {
    Some(avgs.overall_pred_disadvantaged? - avgs.overall_pred_advantaged?)
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Value unfairness: mean over items of the gap in signed error.
pub fn metric_value(avgs: &GroupItemAverages) -> f64 {
    Metric::Value.evaluate(avgs)
}

/// Absolute unfairness: mean over items of the gap in unsigned error.
pub fn metric_absolute(avgs: &GroupItemAverages) -> f64 {
    Metric::Absolute.evaluate(avgs)
}

/// Underestimation unfairness.
pub fn metric_under(avgs: &GroupItemAverages) -> f64 {
    Metric::Under.evaluate(avgs)
}

/// Overestimation unfairness.
pub fn metric_over(avgs: &GroupItemAverages) -> f64 {
    Metric::Over.evaluate(avgs)
}

/// Gap between the two groups' overall average predictions.
pub fn metric_nonparity(avgs: &GroupItemAverages) -> f64 {
    Metric::NonParity.evaluate(avgs)
}

/// `d^2` inside the unit interval, `|d|` outside.
#[inline]
pub fn smoothed_penalty_term(d: f64) -> f64 {
    if d.abs() < 1.0 {
        d * d
    } else {
        d.abs()
    }
}

/// Derivative of [`smoothed_penalty_term`]; at `|d| = 1` the linear branch's slope.
#[inline]
pub fn smoothed_penalty_slope(d: f64) -> f64 {
    if d.abs() < 1.0 {
        2.0 * d
    } else {
        sign(d)
    }
}

/// Which fairness term is added to the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    None,
    Value,
    Absolute,
    Under,
    Over,
    #[serde(rename = "nonparity")]
    NonParity,
    UnderPlusOver,
}

impl Penalty {
    pub const ALL: [Penalty; 7] = [
        Penalty::None,
        Penalty::Value,
        Penalty::Absolute,
        Penalty::Under,
        Penalty::Over,
        Penalty::NonParity,
        Penalty::UnderPlusOver,
    ];

    /// The six objectives of the standard comparison table.
    pub const TABLE: [Penalty; 6] = [
        Penalty::None,
        Penalty::Value,
        Penalty::Absolute,
        Penalty::Under,
        Penalty::Over,
        Penalty::NonParity,
    ];

    /// Metrics summed (with equal weight) by this penalty.
    pub fn metrics(self) -> &'static [Metric] {
        match self {
            Penalty::None => &[],
            Penalty::Value => &[Metric::Value],
            Penalty::Absolute => &[Metric::Absolute],
            Penalty::Under => &[Metric::Under],
            Penalty::Over => &[Metric::Over],
            Penalty::NonParity => &[Metric::NonParity],
            Penalty::UnderPlusOver => &[Metric::Under, Metric::Over],
        }
    }

    /// The metric this penalty targets, for single-metric penalties.
    pub fn target_metric(self) -> Option<Metric> {
        match self.metrics() {
            [m] => Some(*m),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Penalty::None => "none",
            Penalty::Value => "value",
            Penalty::Absolute => "absolute",
            Penalty::Under => "under",
            Penalty::Over => "over",
            Penalty::NonParity => "nonparity",
            Penalty::UnderPlusOver => "under_plus_over",
        }
    }

    /// Row label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Penalty::None => "None",
            Penalty::Value => "Value",
            Penalty::Absolute => "Absolute",
            Penalty::Under => "Under",
            Penalty::Over => "Over",
            Penalty::NonParity => "Non-Parity",
            Penalty::UnderPlusOver => "Under+Over",
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match key.as_str() {
            "none" => Penalty::None,
            "value" => Penalty::Value,
            "absolute" => Penalty::Absolute,
            "under" | "underestimation" => Penalty::Under,
            "over" | "overestimation" => Penalty::Over,
            "nonparity" | "non_parity" | "parity" => Penalty::NonParity,
            "under_plus_over" | "under+over" => Penalty::UnderPlusOver,
            _ => {
                let names: Vec<_> = Penalty::ALL.iter().map(|p| p.name()).collect();
                return Err(Error::InvalidConfig(format!(
                    "unknown penalty {s:?}; expected one of {}",
                    names.join(", ")
                )));
            }
        })
    }
}

fn averages_for(
    params: &ModelParams,
    train: &RatingSet,
    groups: &GroupAssignment,
) -> Result<GroupItemAverages> {
    if train.is_empty() {
        return Err(Error::EmptyRatings);
    }
    let predictions = params.predict_set(train)?;
    group_item_averages(&predictions, train, groups)
}

/// Smoothed fairness penalty of the model on `train`.
pub fn penalty(
    kind: Penalty,
    params: &ModelParams,
    train: &RatingSet,
    groups: &GroupAssignment,
) -> Result<f64> {
    if kind == Penalty::None {
        return Ok(0.0);
    }
    let avgs = averages_for(params, train, groups)?;
    Ok(kind.metrics().iter().map(|m| m.smoothed(&avgs)).sum())
}

/// Analytic (sub)gradient of [`penalty`] with respect to every parameter.
pub fn penalty_gradient(
    kind: Penalty,
    params: &ModelParams,
    train: &RatingSet,
    groups: &GroupAssignment,
) -> Result<Gradient> {
    let mut grad = params.zeros_like();
    if kind == Penalty::None {
        return Ok(grad);
    }
    let avgs = averages_for(params, train, groups)?;

    // d penalty / d yhat for an entry, per (item, group) for per-item metrics,
    // and per group for non-parity.
    let mut item_coef = vec![[0.0f64; 2]; train.num_items()];
    let mut overall_coef = [0.0f64; 2];

    for &metric in kind.metrics() {
        if metric == Metric::NonParity {
            if let Some(diff) = nonparity_difference(&avgs) {
                let s = smoothed_penalty_slope(diff);
                overall_coef[0] += s / avgs.overall_count_disadvantaged as f64;
                overall_coef[1] -= s / avgs.overall_count_advantaged as f64;
            }
            continue;
        }
        let valid: Vec<_> = avgs.valid_errors().collect();
        if valid.is_empty() {
            continue;
        }
        let norm = valid.len() as f64;
        for (j, err_dis, err_adv) in valid {
            let outer = smoothed_penalty_slope(metric.item_difference(err_dis, err_adv)) / norm;
            let (slope_dis, slope_adv) = metric.item_difference_slope(err_dis, err_adv);
            let item = &avgs.items[j];
            item_coef[j][0] += outer * slope_dis / item.count_disadvantaged as f64;
            item_coef[j][1] += outer * slope_adv / item.count_advantaged as f64;
        }
    }

    for r in train {
        let g = slot(groups.user(r.user));
        let coef = item_coef[r.item][g] + overall_coef[g];
        if coef != 0.0 {
            grad.accumulate_prediction_grad(params, r.user, r.item, coef);
        }
    }
    Ok(grad)
}

/// Prediction error and the five unfairness metrics on an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub error: f64,
    pub value: f64,
    pub absolute: f64,
    pub under: f64,
    pub over: f64,
    pub nonparity: f64,
}

/// Column names in fixed report order.
pub const REPORT_COLUMNS: [&str; 6] = ["error", "value", "absolute", "under", "over", "nonparity"];

impl FairnessReport {
    /// Scores `predictions` (aligned with `targets.entries()`) against the target values.
    pub fn compute(
        predictions: &[f64],
        targets: &RatingSet,
        groups: &GroupAssignment,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyRatings);
        }
        let avgs = group_item_averages(predictions, targets, groups)?;
        let sse: f64 = predictions
            .iter()
            .zip(targets)
            .map(|(y, r)| (y - r.value) * (y - r.value))
            .sum();
        Ok(FairnessReport {
            error: sse / targets.len() as f64,
            value: metric_value(&avgs),
            absolute: metric_absolute(&avgs),
            under: metric_under(&avgs),
            over: metric_over(&avgs),
            nonparity: metric_nonparity(&avgs),
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [
            self.error,
            self.value,
            self.absolute,
            self.under,
            self.over,
            self.nonparity,
        ]
    }

    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Value => self.value,
            Metric::Absolute => self.absolute,
            Metric::Under => self.under,
            Metric::Over => self.over,
            Metric::NonParity => self.nonparity,
        }
    }

    /// Header line plus one data row.
    pub fn to_csv(&self) -> String {
        let row: Vec<String> = self.values().iter().map(|v| v.to_string()).collect();
        format!("{}\n{}\n", REPORT_COLUMNS.join(","), row.join(","))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let origin = std::path::Path::new("<report>");
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        if header.trim() != REPORT_COLUMNS.join(",") {
            return Err(Error::parse(origin, 1, format!("unexpected header {header:?}")));
        }
        let row = lines.next().ok_or_else(|| Error::parse(origin, 2, "missing row"))?;
        let v: Vec<f64> = row
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(origin, 2, "invalid number"))?;
        let [error, value, absolute, under, over, nonparity] = v[..] else {
            return Err(Error::parse(origin, 2, "expected 6 columns"));
        };
        Ok(FairnessReport {
            error,
            value,
            absolute,
            under,
            over,
            nonparity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// One item; the disadvantaged users come first.
    fn single_item(dis: &[(f64, f64)], adv: &[(f64, f64)]) -> GroupItemAverages {
        let mut triples = Vec::new();
        let mut preds = Vec::new();
        let mut flags = Vec::new();
        for (u, &(y, r)) in dis.iter().chain(adv).enumerate() {
            triples.push((u, 0, r));
            preds.push(y);
            flags.push(u < dis.len());
        }
        let set = RatingSet::from_triples(flags.len(), 1, triples).unwrap();
        group_item_averages(&preds, &set, &GroupAssignment::from_flags(flags)).unwrap()
    }

    #[test]
    fn averages_examples() {
        let a = single_item(&[(1.0, 0.0), (0.0, 0.0)], &[(0.5, 0.0)]);
        assert_eq!(a.items[0].avg_pred_disadvantaged, Some(0.5));
        assert_eq!(a.items[0].avg_pred_advantaged, Some(0.5));

        let b = single_item(&[], &[(0.5, 1.0)]);
        assert_eq!(b.items[0].avg_pred_disadvantaged, None);
        assert_eq!(b.items[0].count_disadvantaged, 0);
        assert_eq!(b.num_valid_items(), 0);
        assert_eq!(metric_value(&b), 0.0);

        let c = single_item(&[(0.3, 1.0), (0.3, -1.0)], &[(0.3, 0.0)]);
        assert_abs_diff_eq!(c.overall_pred_disadvantaged.unwrap(), 0.3);
        assert_abs_diff_eq!(c.overall_pred_advantaged.unwrap(), 0.3);
    }

    #[test]
    fn value_examples() {
        let perfect = single_item(&[(1.0, 1.0)], &[(0.2, 0.2)]);
        assert_eq!(metric_value(&perfect), 0.0);
        let both_over = single_item(&[(1.5, 1.0)], &[(0.7, 0.2)]);
        assert_abs_diff_eq!(metric_value(&both_over), 0.0, epsilon = 1e-15);
        let mixed = single_item(&[(1.0, 0.5)], &[(0.2, 0.4)]);
        assert_abs_diff_eq!(metric_value(&mixed), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn absolute_examples() {
        let opposite = single_item(&[(0.5, 1.0)], &[(1.5, 1.0)]);
        assert_eq!(metric_absolute(&opposite), 0.0);
        let two_vs_one = single_item(&[(1.0, 3.0)], &[(4.0, 3.0)]);
        assert_abs_diff_eq!(metric_absolute(&two_vs_one), 1.0);
        let perfect = single_item(&[(1.0, 1.0)], &[(0.2, 0.2)]);
        assert_eq!(metric_absolute(&perfect), 0.0);
    }

    #[test]
    fn under_over_examples() {
        let both_over = single_item(&[(1.5, 1.0)], &[(0.7, 0.2)]);
        assert_eq!(metric_under(&both_over), 0.0);
        let u = single_item(&[(0.2, 0.5)], &[(0.5, 0.4)]);
        assert_abs_diff_eq!(metric_under(&u), 0.3, epsilon = 1e-12);
        let both_under = single_item(&[(0.3, 0.5)], &[(-0.2, 0.0)]);
        assert_abs_diff_eq!(metric_under(&both_under), 0.0, epsilon = 1e-12);

        let both_under2 = single_item(&[(0.0, 0.5)], &[(0.0, 0.4)]);
        assert_eq!(metric_over(&both_under2), 0.0);
        let o = single_item(&[(0.9, 0.5)], &[(0.5, 0.4)]);
        assert_abs_diff_eq!(metric_over(&o), 0.3, epsilon = 1e-12);
        let perfect = single_item(&[(1.0, 1.0)], &[(0.2, 0.2)]);
        assert_eq!(metric_over(&perfect), 0.0);
    }

    #[test]
    fn nonparity_examples() {
        let constant = single_item(&[(0.4, 1.0), (0.4, 0.0)], &[(0.4, -1.0)]);
        assert_eq!(metric_nonparity(&constant), 0.0);
        let gap = single_item(&[(0.6, 0.0)], &[(0.2, 0.0)]);
        assert_abs_diff_eq!(metric_nonparity(&gap), 0.4, epsilon = 1e-12);
        let one_each = single_item(&[(1.0, 0.0)], &[(-1.0, 0.0)]);
        assert_eq!(metric_nonparity(&one_each), 2.0);
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smoothed_penalty_term(0.5), 0.25);
        assert_eq!(smoothed_penalty_term(2.0), 2.0);
        assert_eq!(smoothed_penalty_term(-1.0), 1.0);
        assert_eq!(smoothed_penalty_slope(-1.0), -1.0);
        assert_eq!(smoothed_penalty_slope(0.5), 1.0);
    }

    fn two_user_model(pred_dis: f64, pred_adv: f64) -> (ModelParams, RatingSet, GroupAssignment) {
        let mut params = ModelParams::zeros(2, 1, 2);
        params.user_bias[0] = pred_dis;
        params.user_bias[1] = pred_adv;
        let set = RatingSet::from_triples(2, 1, [(0, 0, 0.5), (1, 0, 0.4)]).unwrap();
        (params, set, GroupAssignment::from_flags([true, false]))
    }

    #[test]
    fn penalty_examples() {
        let (params, set, groups) = two_user_model(1.0, 0.2);
        assert_eq!(penalty(Penalty::None, &params, &set, &groups).unwrap(), 0.0);
        // inner difference 0.5 - (-0.2) = 0.7
        assert_abs_diff_eq!(
            penalty(Penalty::Value, &params, &set, &groups).unwrap(),
            0.49,
            epsilon = 1e-12
        );
        let (perfect, set, groups) = two_user_model(0.5, 0.4);
        for kind in Penalty::ALL {
            // group means differ (0.5 vs 0.4), so only non-parity is nonzero
            let expected = if kind == Penalty::NonParity { 0.01 } else { 0.0 };
            let got = penalty(kind, &perfect, &set, &groups).unwrap();
            assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        }
        assert!(matches!(
            penalty(Penalty::Value, &perfect, &RatingSet::empty(2, 1), &groups),
            Err(Error::EmptyRatings)
        ));
    }

    #[test]
    fn perfect_predictions_give_zero_gradient() {
        let (perfect, set, groups) = two_user_model(0.5, 0.4);
        for kind in [Penalty::Value, Penalty::Absolute, Penalty::Under, Penalty::Over] {
            let g = penalty_gradient(kind, &perfect, &set, &groups).unwrap();
            assert!(g.values().all(|&x| x == 0.0), "{kind}");
        }
    }

    #[test]
    fn nonparity_gradient_pushes_averages_together() {
        let (params, set, groups) = two_user_model(0.6, 0.2);
        let g = penalty_gradient(Penalty::NonParity, &params, &set, &groups).unwrap();
        // descent lowers the higher group and raises the lower one
        assert!(g.user_bias[0] > 0.0);
        assert!(g.user_bias[1] < 0.0);
        assert_abs_diff_eq!(g.user_bias[0], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn penalty_names_parse() {
        for p in Penalty::ALL {
            assert_eq!(p.name().parse::<Penalty>().unwrap(), p);
        }
        assert_eq!("Non-Parity".parse::<Penalty>().unwrap(), Penalty::NonParity);
        let err = "fair".parse::<Penalty>().unwrap_err().to_string();
        assert!(err.contains("under_plus_over"), "{err}");
    }

    #[test]
    fn report_csv_round_trip() {
        let r = FairnessReport {
            error: 0.317,
            value: 0.649,
            absolute: 0.443,
            under: 0.107,
            over: 0.544,
            nonparity: 0.362,
        };
        let text = r.to_csv();
        assert!(text.starts_with("error,value,absolute,under,over,nonparity\n"));
        assert_eq!(FairnessReport::from_csv(&text).unwrap(), r);
    }
}
