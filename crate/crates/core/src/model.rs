//! Biased matrix factorization: parameters, the prediction rule, and the
//! regularized squared-error objective with its analytic gradient.
//!
//! A rating is modeled as `p_i . q_j + u_i + v_j`. The objective is
//!
//! ```text
//! J = (lambda / 2) (|P|_F^2 + |Q|_F^2) + (1 / |X|) sum_{(i,j) in X} (yhat_ij - r_ij)^2
//! ```
//!
//! The bias vectors are not part of the norm term and are left unregularized.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::RatingSet;
use crate::error::{Error, Result};

/// Latent vectors and bias terms for every user and item.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub user_vectors: Array2<f64>,
    pub item_vectors: Array2<f64>,
    pub user_bias: Array1<f64>,
    pub item_bias: Array1<f64>,
}

/// Gradients share the parameter layout.
pub type Gradient = ModelParams;

impl ModelParams {
    pub fn zeros(num_users: usize, num_items: usize, dim: usize) -> Self {
        ModelParams {
            user_vectors: Array2::zeros((num_users, dim)),
            item_vectors: Array2::zeros((num_items, dim)),
            user_bias: Array1::zeros(num_users),
            item_bias: Array1::zeros(num_items),
        }
    }

    /// Every entry drawn i.i.d. from `N(0, std_dev^2)`, in the order
    /// user vectors, item vectors, user biases, item biases.
    pub fn random_normal<R: Rng + ?Sized>(
        num_users: usize,
        num_items: usize,
        dim: usize,
        std_dev: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, std_dev).expect("std_dev must be finite and >= 0");
        let mut params = Self::zeros(num_users, num_items, dim);
        for x in params.values_mut() {
            *x = normal.sample(rng);
        }
        params
    }

    pub fn num_users(&self) -> usize {
        self.user_bias.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_bias.len()
    }

    pub fn dim(&self) -> usize {
        self.user_vectors.ncols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.num_users(), self.num_items(), self.dim())
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.user_vectors.len() + self.item_vectors.len() + self.user_bias.len() + self.item_bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.user_vectors
            .iter()
            .chain(self.item_vectors.iter())
            .chain(self.user_bias.iter())
            .chain(self.item_bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.user_vectors
            .iter_mut()
            .chain(self.item_vectors.iter_mut())
            .chain(self.user_bias.iter_mut())
            .chain(self.item_bias.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.user_vectors.dim() == other.user_vectors.dim()
            && self.item_vectors.dim() == other.item_vectors.dim()
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, scale: f64, other: &ModelParams) {
        Zip::from(&mut self.user_vectors)
            .and(&other.user_vectors)
            .for_each(|a, &b| *a += scale * b);
        Zip::from(&mut self.item_vectors)
            .and(&other.item_vectors)
            .for_each(|a, &b| *a += scale * b);
        Zip::from(&mut self.user_bias)
            .and(&other.user_bias)
            .for_each(|a, &b| *a += scale * b);
        Zip::from(&mut self.item_bias)
            .and(&other.item_bias)
            .for_each(|a, &b| *a += scale * b);
    }

    /// Squared Frobenius norms of the user and item matrices, summed.
    pub fn vector_norm_sq(&self) -> f64 {
        self.user_vectors.iter().map(|x| x * x).sum::<f64>()
            + self.item_vectors.iter().map(|x| x * x).sum::<f64>()
    }

    /// Prediction without bounds checks.
    #[inline]
    pub fn predict_unchecked(&self, user: usize, item: usize) -> f64 {
        self.user_vectors.row(user).dot(&self.item_vectors.row(item))
            + self.user_bias[user]
            + self.item_bias[item]
    }

    /// Predicted rating for every entry of `set`, in entry order.
    pub fn predict_set(&self, set: &RatingSet) -> Result<Vec<f64>> {
        self.check_dims(set)?;
        Ok(set
            .iter()
            .map(|r| self.predict_unchecked(r.user, r.item))
            .collect())
    }

    pub fn check_dims(&self, set: &RatingSet) -> Result<()> {
        if set.num_users() != self.num_users() || set.num_items() != self.num_items() {
            return Err(Error::Shape(format!(
                "model is {}x{}, rating set is {}x{}",
                self.num_users(),
                self.num_items(),
                set.num_users(),
                set.num_items()
            )));
        }
        Ok(())
    }

    /// Adds the chain-rule contribution of `coef * d yhat_ij / d theta`.
    #[inline]
    pub(crate) fn accumulate_prediction_grad(
        &mut self,
        params: &ModelParams,
        user: usize,
        item: usize,
        coef: f64,
    ) {
        self.user_vectors
            .row_mut(user)
            .scaled_add(coef, &params.item_vectors.row(item));
        self.item_vectors
            .row_mut(item)
            .scaled_add(coef, &params.user_vectors.row(user));
        self.user_bias[user] += coef;
        self.item_bias[item] += coef;
    }

    /// Text form: a `num_users num_items dim` header, then one line per user
    /// (`bias p_1 .. p_d`), then one line per item (`bias q_1 .. q_d`).
    /// Values use shortest round-trip formatting, so reading restores the
    /// exact bits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.num_users(), self.num_items(), self.dim());
        let mut row = |bias: f64, vector: ndarray::ArrayView1<f64>| {
            let _ = write!(out, "{bias}");
            for x in vector {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        };
        for (u, v) in self.user_bias.iter().zip(self.user_vectors.rows()) {
            row(*u, v);
        }
        for (b, q) in self.item_bias.iter().zip(self.item_vectors.rows()) {
            row(*b, q);
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(origin, 1, "header must be `num_users num_items dim`"))?;
        let [num_users, num_items, dim] = dims[..] else {
            return Err(Error::parse(origin, 1, "header must be `num_users num_items dim`"));
        };
        let mut params = Self::zeros(num_users, num_items, dim);
        for row in 0..num_users + num_items {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::parse(origin, row + 2, "unexpected end of file"))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, lineno + 1, "invalid number"))?;
            if values.len() != dim + 1 {
                return Err(Error::parse(
                    origin,
                    lineno + 1,
                    format!("expected {} values, found {}", dim + 1, values.len()),
                ));
            }
            let (bias, vector) = if row < num_users {
                (&mut params.user_bias[row], params.user_vectors.row_mut(row))
            } else {
                let j = row - num_users;
                (&mut params.item_bias[j], params.item_vectors.row_mut(j))
            };
            *bias = values[0];
            for (dst, src) in vector.into_iter().zip(&values[1..]) {
                *dst = *src;
            }
        }
        if let Some((lineno, _)) = lines.next() {
            return Err(Error::parse(origin, lineno + 1, "trailing data"));
        }
        Ok(params)
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// `p_i . q_j + u_i + v_j`
pub fn predict(params: &ModelParams, user: usize, item: usize) -> Result<f64> {
    if user >= params.num_users() {
        return Err(Error::IndexOutOfRange {
            kind: "user",
            index: user,
            size: params.num_users(),
        });
    }
    if item >= params.num_items() {
        return Err(Error::IndexOutOfRange {
            kind: "item",
            index: item,
            size: params.num_items(),
        });
    }
    Ok(params.predict_unchecked(user, item))
}

fn check_train(params: &ModelParams, train: &RatingSet) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyRatings);
    }
    params.check_dims(train)
}

/// Regularized mean squared reconstruction error.
pub fn mf_objective(params: &ModelParams, train: &RatingSet, lambda: f64) -> Result<f64> {
    check_train(params, train)?;
    let sse: f64 = train
        .iter()
        .map(|r| {
            let e = params.predict_unchecked(r.user, r.item) - r.value;
            e * e
        })
        .sum();
    Ok(0.5 * lambda * params.vector_norm_sq() + sse / train.len() as f64)
}

/// Exact gradient of [`mf_objective`].
pub fn mf_gradient(params: &ModelParams, train: &RatingSet, lambda: f64) -> Result<Gradient> {
    check_train(params, train)?;
    let mut grad = params.zeros_like();
    let scale = 2.0 / train.len() as f64;
    for r in train {
        let e = params.predict_unchecked(r.user, r.item) - r.value;
        grad.accumulate_prediction_grad(params, r.user, r.item, scale * e);
    }
    grad.user_vectors.scaled_add(lambda, &params.user_vectors);
    grad.item_vectors.scaled_add(lambda, &params.item_vectors);
    Ok(grad)
}
