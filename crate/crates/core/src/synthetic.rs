//! Block-model rating data with controllable population imbalance and
//! observation bias.
//!
//! Users and items each belong to a latent group. One block matrix gives the
//! probability that a user of group `g` likes an item of group `h` (rating
//! `+1`, otherwise `-1`); a second gives the probability that the rating is
//! observed at all. The recommender only sees the binary group of each user,
//! never the latent one.
//!
//! Group sizes follow the population proportions exactly up to rounding:
//! each group gets its quota (largest-remainder rounding) and the labels are
//! then shuffled. Like and observation draws come from independent streams,
//! one draw per grid cell in row-major order, so swapping the observation
//! matrix never changes which ratings would be likes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{GroupAssignment, Rating, RatingSet};
use crate::error::{Error, Result};
use crate::seed;

/// A latent user group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGroupSpec {
    pub name: String,
    pub proportion: f64,
    /// Whether members carry the disadvantaged binary label.
    pub disadvantaged: bool,
}

/// A latent item group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemGroupSpec {
    pub name: String,
    pub proportion: f64,
}

/// Parameters of the two block models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub user_groups: Vec<UserGroupSpec>,
    pub item_groups: Vec<ItemGroupSpec>,
    /// `like[g][h]`: probability a rating is `+1`.
    pub like: Vec<Vec<f64>>,
    /// `observe[g][h]`: probability a rating is observed.
    pub observe: Vec<Vec<f64>>,
    pub num_users: usize,
    pub num_items: usize,
    pub seed: u64,
}

const PROPORTION_TOLERANCE: f64 = 1e-9;

impl BlockModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_users == 0 || self.num_items == 0 {
            return bad(format!(
                "block model needs at least one user and one item (got {}x{})",
                self.num_users, self.num_items
            ));
        }
        if self.user_groups.is_empty() || self.item_groups.is_empty() {
            return bad("block model needs at least one user group and one item group".into());
        }
        for (what, props) in [
            ("user", self.user_groups.iter().map(|g| g.proportion).collect::<Vec<_>>()),
            ("item", self.item_groups.iter().map(|g| g.proportion).collect()),
        ] {
            if props.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return bad(format!("{what} group proportions must be nonnegative"));
            }
            let total: f64 = props.iter().sum();
            if (total - 1.0).abs() > PROPORTION_TOLERANCE {
                return bad(format!("{what} group proportions sum to {total}, not 1"));
            }
        }
        for (what, m) in [("like", &self.like), ("observe", &self.observe)] {
            if m.len() != self.user_groups.len()
                || m.iter().any(|row| row.len() != self.item_groups.len())
            {
                return bad(format!(
                    "{what} matrix must be {}x{}",
                    self.user_groups.len(),
                    self.item_groups.len()
                ));
            }
            if m.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("{what} probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn with_size(mut self, num_users: usize, num_items: usize) -> Self {
        self.num_users = num_users;
        self.num_items = num_items;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Like probabilities; rows W, WS, MS, M; columns Fem, STEM, Masc.
pub const LIKE: [[f64; 3]; 4] = [
    [0.8, 0.2, 0.2],
    [0.8, 0.8, 0.2],
    [0.2, 0.8, 0.8],
    [0.2, 0.2, 0.8],
];

/// Uniform observation probabilities.
pub const OBSERVE_UNIFORM: [[f64; 3]; 4] = [[0.4; 3]; 4];

/// Skewed observation probabilities, same layout as [`LIKE`].
pub const OBSERVE_BIASED: [[f64; 3]; 4] = [
    [0.6, 0.2, 0.1],
    [0.3, 0.4, 0.2],
    [0.1, 0.3, 0.5],
    [0.05, 0.5, 0.35],
];

pub const USER_GROUP_NAMES: [&str; 4] = ["W", "WS", "MS", "M"];
pub const ITEM_GROUP_NAMES: [&str; 3] = ["Fem", "STEM", "Masc"];

/// Population shares of W, WS, MS, M.
pub const POPULATION_UNIFORM: [f64; 4] = [0.25; 4];
pub const POPULATION_IMBALANCED: [f64; 4] = [0.4, 0.1, 0.4, 0.1];

pub const DEFAULT_USERS: usize = 400;
pub const DEFAULT_ITEMS: usize = 300;

/// The four sampling settings built from the standard block models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    /// Uniform populations, uniform observations.
    U,
    /// Uniform populations, biased observations.
    O,
    /// Imbalanced populations, uniform observations.
    P,
    /// Imbalanced populations, biased observations.
    PO,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::U, Setting::O, Setting::P, Setting::PO];

    pub fn name(self) -> &'static str {
        match self {
            Setting::U => "U",
            Setting::O => "O",
            Setting::P => "P",
            Setting::PO => "P+O",
        }
    }

    pub fn spec(self, num_users: usize, num_items: usize, seed: u64) -> BlockModelSpec {
        let (population, observe) = match self {
            Setting::U => (POPULATION_UNIFORM, OBSERVE_UNIFORM),
            Setting::O => (POPULATION_UNIFORM, OBSERVE_BIASED),
            Setting::P => (POPULATION_IMBALANCED, OBSERVE_UNIFORM),
            Setting::PO => (POPULATION_IMBALANCED, OBSERVE_BIASED),
        };
        BlockModelSpec {
            user_groups: USER_GROUP_NAMES
                .iter()
                .zip(population)
                .map(|(name, proportion)| UserGroupSpec {
                    name: name.to_string(),
                    proportion,
                    disadvantaged: name.starts_with('W'),
                })
                .collect(),
            item_groups: ITEM_GROUP_NAMES
                .iter()
                .map(|name| ItemGroupSpec {
                    name: name.to_string(),
                    proportion: 1.0 / 3.0,
                })
                .collect(),
            like: LIKE.iter().map(|r| r.to_vec()).collect(),
            observe: observe.iter().map(|r| r.to_vec()).collect(),
            num_users,
            num_items,
            seed,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_prefix("SYNTHETIC_").unwrap_or(&key);
        match key {
            "U" => Ok(Setting::U),
            "O" => Ok(Setting::O),
            "P" => Ok(Setting::P),
            "P+O" | "PO" | "O+P" | "OP" => Ok(Setting::PO),
            _ => Err(Error::InvalidConfig(format!(
                "unknown synthetic setting {s:?}; expected U, O, P, or P+O"
            ))),
        }
    }
}

/// The standard settings at the default 400 x 300 size, keyed by name.
pub fn builtin_specs() -> BTreeMap<&'static str, BlockModelSpec> {
    Setting::ALL
        .iter()
        .map(|s| (s.name(), s.spec(DEFAULT_USERS, DEFAULT_ITEMS, 0)))
        .collect()
}

/// A generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Observed `+1`/`-1` ratings.
    pub observed: RatingSet,
    /// Binary user groups, with latent item groups attached.
    pub groups: GroupAssignment,
    /// Latent group index of every user, into `spec.user_groups`.
    pub user_types: Vec<usize>,
    /// Latent group index of every item.
    pub item_types: Vec<usize>,
    /// `2 * like[g_i][h_j] - 1` for every cell.
    pub expected_ratings: Array2<f64>,
}

/// Largest-remainder apportionment of `total` slots.
fn quotas(proportions: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    // stable sort keeps ties in group order
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

fn shuffled_labels<R: Rng + ?Sized>(proportions: &[f64], total: usize, rng: &mut R) -> Vec<usize> {
    let mut labels: Vec<usize> = quotas(proportions, total)
        .into_iter()
        .enumerate()
        .flat_map(|(k, n)| std::iter::repeat_n(k, n))
        .collect();
    labels.shuffle(rng);
    labels
}

/// Samples a dataset from `spec`. Fully determined by `spec.seed`.
pub fn generate(spec: &BlockModelSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let user_props: Vec<f64> = spec.user_groups.iter().map(|g| g.proportion).collect();
    let item_props: Vec<f64> = spec.item_groups.iter().map(|g| g.proportion).collect();
    let user_types = shuffled_labels(
        &user_props,
        spec.num_users,
        &mut seed::stream(spec.seed, "synthetic/user-groups"),
    );
    let item_types = shuffled_labels(
        &item_props,
        spec.num_items,
        &mut seed::stream(spec.seed, "synthetic/item-groups"),
    );

    let mut like_rng = seed::stream(spec.seed, "synthetic/likes");
    let mut observe_rng = seed::stream(spec.seed, "synthetic/observations");
    let mut entries = Vec::new();
    let mut expected = Array2::zeros((spec.num_users, spec.num_items));
    for (i, &g) in user_types.iter().enumerate() {
        for (j, &h) in item_types.iter().enumerate() {
            let like_p = spec.like[g][h];
            let liked = like_rng.random::<f64>() < like_p;
            let observed = observe_rng.random::<f64>() < spec.observe[g][h];
            expected[[i, j]] = 2.0 * like_p - 1.0;
            if observed {
                entries.push(Rating::new(i, j, if liked { 1.0 } else { -1.0 }));
            }
        }
    }

    let groups = GroupAssignment::from_flags(
        user_types.iter().map(|&g| spec.user_groups[g].disadvantaged),
    )
    .with_item_groups(item_types.clone());

    Ok(SyntheticDataset {
        observed: RatingSet::new(spec.num_users, spec.num_items, entries)?,
        groups,
        user_types,
        item_types,
        expected_ratings: expected,
    })
}

/// Every unobserved cell, valued by its expected rating, in row-major order.
pub fn evaluation_set(data: &SyntheticDataset) -> RatingSet {
    let (m, n) = data.expected_ratings.dim();
    let mut observed = vec![false; m * n];
    for r in &data.observed {
        observed[r.user * n + r.item] = true;
    }
    let entries = data
        .expected_ratings
        .indexed_iter()
        .filter(|((i, j), _)| !observed[i * n + j])
        .map(|((i, j), &e)| Rating::new(i, j, e))
        .collect();
    RatingSet::new(m, n, entries).expect("complement of a valid set is valid")
}
