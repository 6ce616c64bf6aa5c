//! MovieLens-1M ingestion: parsing, genre and activity filtering, per-genre
//! gender statistics, and random train/test splits.
//!
//! The three input files use `::` as the field separator and latin-1 text:
//!
//! ```text
//! users.dat    UserID::Gender::Age::Occupation::Zip-code
//! movies.dat   MovieID::Title::Genre1|Genre2|...
//! ratings.dat  UserID::MovieID::Rating::Timestamp
//! ```
//!
//! Filtering is a single pass: keep movies listing a selected genre, keep
//! users with at least `min_ratings` ratings among those movies, then keep the
//! ratings between kept users and kept movies. Movies left without any rating
//! are dropped. Women form the disadvantaged group.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Group, GroupAssignment, Rating, RatingSet};
use crate::error::{Error, Result};
use crate::seed;

/// Genres selected for the gender comparison, in reporting order.
pub const DEFAULT_GENRES: [&str; 5] = ["Romance", "Action", "Sci-Fi", "Musical", "Crime"];
pub const DEFAULT_MIN_RATINGS: usize = 50;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn group(self) -> Group {
        match self {
            Gender::F => Group::Disadvantaged,
            Gender::M => Group::Advantaged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: u32,
    pub gender: Gender,
    pub age: u32,
    pub occupation: u32,
    pub zip: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Movie {
    pub id: u32,
    pub title: String,
    pub genres: Vec<String>,
}

impl Movie {
    fn has_genre(&self, genre: &str) -> bool {
        self.genres.iter().any(|g| g.eq_ignore_ascii_case(genre))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRating {
    pub user_id: u32,
    pub movie_id: u32,
    pub value: u8,
    pub timestamp: u64,
}

/// The three parsed files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MovieLensRaw {
    pub users: Vec<User>,
    pub movies: Vec<Movie>,
    pub ratings: Vec<RawRating>,
}

/// Locations of `users.dat`, `movies.dat`, and `ratings.dat`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovieLensPaths {
    pub users: PathBuf,
    pub movies: PathBuf,
    pub ratings: PathBuf,
}

impl MovieLensPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        MovieLensPaths {
            users: dir.join("users.dat"),
            movies: dir.join("movies.dat"),
            ratings: dir.join("ratings.dat"),
        }
    }

    /// Whether all three files exist.
    pub fn exist(&self) -> bool {
        self.users.is_file() && self.movies.is_file() && self.ratings.is_file()
    }
}

fn read_latin1(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes.iter().map(|&b| b as char).collect())
}

fn records<'a>(
    text: &'a str,
    path: &'a Path,
    fields: usize,
) -> impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, line)| {
            let parts: Vec<&str> = line.trim_end_matches('\r').split("::").collect();
            if parts.len() != fields {
                Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {fields} `::`-separated fields, found {}", parts.len()),
                ))
            } else {
                Ok((i + 1, parts))
            }
        })
}

fn number<T: std::str::FromStr>(s: &str, path: &Path, line: usize, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what}: {s:?}")))
}

pub fn parse_users(text: &str, path: &Path) -> Result<Vec<User>> {
    records(text, path, 5)
        .map(|rec| {
            let (line, f) = rec?;
            let gender = match f[1].trim() {
                "F" => Gender::F,
                "M" => Gender::M,
                other => {
                    return Err(Error::parse(path, line, format!("invalid gender {other:?}")))
                }
            };
            Ok(User {
                id: number(f[0], path, line, "user id")?,
                gender,
                age: number(f[2], path, line, "age")?,
                occupation: number(f[3], path, line, "occupation")?,
                zip: f[4].trim().to_string(),
            })
        })
        .collect()
}

pub fn parse_movies(text: &str, path: &Path) -> Result<Vec<Movie>> {
    records(text, path, 3)
        .map(|rec| {
            let (line, f) = rec?;
            Ok(Movie {
                id: number(f[0], path, line, "movie id")?,
                title: f[1].to_string(),
                genres: f[2]
                    .split('|')
                    .map(|g| g.trim().to_string())
                    .filter(|g| !g.is_empty())
                    .collect(),
            })
        })
        .collect()
}

pub fn parse_ratings(text: &str, path: &Path) -> Result<Vec<RawRating>> {
    let ratings = records(text, path, 4)
        .map(|rec| {
            let (line, f) = rec?;
            let value: u8 = number(f[2], path, line, "rating")?;
            if !(1..=5).contains(&value) {
                return Err(Error::parse(path, line, format!("rating {value} outside 1..=5")));
            }
            Ok(RawRating {
                user_id: number(f[0], path, line, "user id")?,
                movie_id: number(f[1], path, line, "movie id")?,
                value,
                timestamp: number(f[3], path, line, "timestamp")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if ratings.is_empty() {
        return Err(Error::parse(path, 1, "ratings file is empty"));
    }
    Ok(ratings)
}

/// Reads and cross-checks the three files.
pub fn parse(paths: &MovieLensPaths) -> Result<MovieLensRaw> {
    let users = parse_users(&read_latin1(&paths.users)?, &paths.users)?;
    let movies = parse_movies(&read_latin1(&paths.movies)?, &paths.movies)?;
    let ratings = parse_ratings(&read_latin1(&paths.ratings)?, &paths.ratings)?;
    let raw = MovieLensRaw {
        users,
        movies,
        ratings,
    };
    raw.check_integrity(&paths.ratings)?;
    Ok(raw)
}

impl MovieLensRaw {
    fn check_integrity(&self, ratings_path: &Path) -> Result<()> {
        let users: BTreeSet<u32> = self.users.iter().map(|u| u.id).collect();
        let movies: BTreeSet<u32> = self.movies.iter().map(|m| m.id).collect();
        if users.len() != self.users.len() {
            return Err(Error::InvalidConfig("duplicate user id in users file".into()));
        }
        if movies.len() != self.movies.len() {
            return Err(Error::InvalidConfig("duplicate movie id in movies file".into()));
        }
        let mut pairs = BTreeSet::new();
        for (k, r) in self.ratings.iter().enumerate() {
            if !users.contains(&r.user_id) {
                return Err(Error::parse(
                    ratings_path,
                    k + 1,
                    format!("unknown user id {}", r.user_id),
                ));
            }
            if !movies.contains(&r.movie_id) {
                return Err(Error::parse(
                    ratings_path,
                    k + 1,
                    format!("unknown movie id {}", r.movie_id),
                ));
            }
            if !pairs.insert((r.user_id, r.movie_id)) {
                return Err(Error::parse(
                    ratings_path,
                    k + 1,
                    format!("duplicate rating for user {} movie {}", r.user_id, r.movie_id),
                ));
            }
        }
        Ok(())
    }
}

/// Filter parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub genres: Vec<String>,
    pub min_ratings: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            genres: DEFAULT_GENRES.iter().map(|g| g.to_string()).collect(),
            min_ratings: DEFAULT_MIN_RATINGS,
        }
    }
}

/// The filtered, contiguously reindexed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDataset {
    pub ratings: RatingSet,
    pub groups: GroupAssignment,
    /// Kept users; position is the new index.
    pub users: Vec<User>,
    /// Kept movies with their full genre lists; position is the new index.
    pub movies: Vec<Movie>,
    /// Selected genres, in the order requested.
    pub genres: Vec<String>,
}

impl FilteredDataset {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_movies(&self) -> usize {
        self.movies.len()
    }

    pub fn user_ids(&self) -> Vec<u32> {
        self.users.iter().map(|u| u.id).collect()
    }

    pub fn movie_ids(&self) -> Vec<u32> {
        self.movies.iter().map(|m| m.id).collect()
    }

    /// Selected genres listed by a retained movie.
    pub fn movie_selected_genres(&self, movie: usize) -> Vec<&str> {
        self.genres
            .iter()
            .filter(|g| self.movies[movie].has_genre(g))
            .map(String::as_str)
            .collect()
    }

    /// SHA-256 over the user and movie id tables, in index order.
    pub fn remap_checksum(&self) -> String {
        let mut h = Sha256::new();
        for id in self.user_ids() {
            h.update(b"u");
            h.update(id.to_le_bytes());
        }
        for id in self.movie_ids() {
            h.update(b"m");
            h.update(id.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Maps the dataset back to original ids. Timestamps are not retained
    /// and come back as zero.
    pub fn to_raw(&self) -> MovieLensRaw {
        MovieLensRaw {
            users: self.users.clone(),
            movies: self.movies.clone(),
            ratings: self
                .ratings
                .iter()
                .map(|r| RawRating {
                    user_id: self.users[r.user].id,
                    movie_id: self.movies[r.item].id,
                    value: r.value as u8,
                    timestamp: 0,
                })
                .collect(),
        }
    }
}

/// Applies the genre filter, then the activity filter, once each.
pub fn filter(raw: &MovieLensRaw, options: &FilterOptions) -> Result<FilteredDataset> {
    if options.min_ratings < 1 {
        return Err(Error::InvalidConfig("activity threshold must be at least 1".into()));
    }
    if options.genres.is_empty() {
        return Err(Error::InvalidConfig("at least one genre must be selected".into()));
    }

    let genre_movies: HashMap<u32, &Movie> = raw
        .movies
        .iter()
        .filter(|m| options.genres.iter().any(|g| m.has_genre(g)))
        .map(|m| (m.id, m))
        .collect();

    let mut activity: HashMap<u32, usize> = HashMap::new();
    for r in raw.ratings.iter().filter(|r| genre_movies.contains_key(&r.movie_id)) {
        *activity.entry(r.user_id).or_default() += 1;
    }
    let mut users: Vec<&User> = raw
        .users
        .iter()
        .filter(|u| activity.get(&u.id).copied().unwrap_or(0) >= options.min_ratings)
        .collect();
    users.sort_by_key(|u| u.id);
    let user_index: HashMap<u32, usize> = users.iter().enumerate().map(|(k, u)| (u.id, k)).collect();

    let kept: Vec<&RawRating> = raw
        .ratings
        .iter()
        .filter(|r| user_index.contains_key(&r.user_id) && genre_movies.contains_key(&r.movie_id))
        .collect();
    let movie_ids: BTreeSet<u32> = kept.iter().map(|r| r.movie_id).collect();
    let movie_index: HashMap<u32, usize> = movie_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();

    let mut entries: Vec<Rating> = kept
        .iter()
        .map(|r| {
            Rating::new(
                user_index[&r.user_id],
                movie_index[&r.movie_id],
                f64::from(r.value),
            )
        })
        .collect();
    entries.sort_by_key(|r| (r.user, r.item));

    let ratings = RatingSet::new(users.len(), movie_ids.len(), entries)?;
    let groups = GroupAssignment::new(users.iter().map(|u| u.gender.group()).collect());
    Ok(FilteredDataset {
        ratings,
        groups,
        users: users.into_iter().cloned().collect(),
        movies: movie_ids.iter().map(|id| genre_movies[id].clone()).collect(),
        genres: options.genres.clone(),
    })
}

/// Gender statistics of one genre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreRow {
    pub genre: String,
    pub movie_count: usize,
    pub ratings_per_female_user: f64,
    pub ratings_per_male_user: f64,
    pub avg_rating_female: Option<f64>,
    pub avg_rating_male: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreStats {
    pub rows: Vec<GenreRow>,
    pub num_female_users: usize,
    pub num_male_users: usize,
}

/// Per-genre counts and gendered averages. A movie counts toward every
/// selected genre it lists. Per-user rates divide by all retained users of
/// that gender.
pub fn genre_stats(data: &FilteredDataset) -> GenreStats {
    let is_female = |u: usize| data.users[u].gender == Gender::F;
    let num_female_users = (0..data.num_users()).filter(|&u| is_female(u)).count();
    let num_male_users = data.num_users() - num_female_users;

    let rows = data
        .genres
        .iter()
        .map(|genre| {
            let in_genre: Vec<bool> = data.movies.iter().map(|m| m.has_genre(genre)).collect();
            let (mut n_f, mut sum_f, mut n_m, mut sum_m) = (0usize, 0.0, 0usize, 0.0);
            for r in data.ratings.iter().filter(|r| in_genre[r.item]) {
                if is_female(r.user) {
                    n_f += 1;
                    sum_f += r.value;
                } else {
                    n_m += 1;
                    sum_m += r.value;
                }
            }
            let per_user = |n: usize, users: usize| {
                if users == 0 {
                    0.0
                } else {
                    n as f64 / users as f64
                }
            };
            GenreRow {
                genre: genre.clone(),
                movie_count: in_genre.iter().filter(|&&b| b).count(),
                ratings_per_female_user: per_user(n_f, num_female_users),
                ratings_per_male_user: per_user(n_m, num_male_users),
                avg_rating_female: (n_f > 0).then(|| sum_f / n_f as f64),
                avg_rating_male: (n_m > 0).then(|| sum_m / n_m as f64),
            }
        })
        .collect();

    GenreStats {
        rows,
        num_female_users,
        num_male_users,
    }
}

impl GenreStats {
    /// Genres as columns, statistics as rows.
    pub fn render(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let mut lines: Vec<(String, Vec<String>)> = vec![
            (String::new(), self.rows.iter().map(|r| r.genre.clone()).collect()),
            ("Count".into(), self.rows.iter().map(|r| r.movie_count.to_string()).collect()),
            (
                "Ratings per female user".into(),
                self.rows.iter().map(|r| format!("{:.2}", r.ratings_per_female_user)).collect(),
            ),
            (
                "Ratings per male user".into(),
                self.rows.iter().map(|r| format!("{:.2}", r.ratings_per_male_user)).collect(),
            ),
            (
                "Average rating by women".into(),
                self.rows.iter().map(|r| opt(r.avg_rating_female)).collect(),
            ),
            (
                "Average rating by men".into(),
                self.rows.iter().map(|r| opt(r.avg_rating_male)).collect(),
            ),
        ];
        let label_width = lines.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let col_width = lines
            .iter()
            .flat_map(|(_, cells)| cells.iter().map(String::len))
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for (label, cells) in lines.drain(..) {
            out.push_str(&format!("{label:<label_width$}"));
            for c in cells {
                out.push_str(&format!("  {c:>col_width$}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Uniform random partition into `(train, test)` with
/// `round(test_fraction * n)` test ratings. Both keep the input order.
pub fn split(ratings: &RatingSet, test_fraction: f64, seed: u64) -> Result<(RatingSet, RatingSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let n = ratings.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed, "split"));
    let mut is_test = vec![false; n];
    for &k in &order[..n_test] {
        is_test[k] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (r, t) in ratings.iter().zip(&is_test) {
        if *t {
            test.push(*r);
        } else {
            train.push(*r);
        }
    }
    Ok((
        RatingSet::new(ratings.num_users(), ratings.num_items(), train)?,
        RatingSet::new(ratings.num_users(), ratings.num_items(), test)?,
    ))
}
