//! Sparse rating observations, user group labels, and their text formats.
//!
//! Ratings are stored as `(user, item, value)` triples. On disk a rating set
//! is one record per line, `user<TAB>item<TAB>value`, with no header. A group
//! file holds `user<TAB>flag` lines where `1` marks the disadvantaged group
//! and `0` the advantaged group.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

impl Rating {
    pub fn new(user: usize, item: usize, value: f64) -> Self {
        Rating { user, item, value }
    }
}

/// A sparse set of ratings over a `num_users x num_items` grid.
///
/// Every index is in range and no `(user, item)` pair appears twice.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingSet {
    entries: Vec<Rating>,
    num_users: usize,
    num_items: usize,
}

impl RatingSet {
    pub fn new(num_users: usize, num_items: usize, entries: Vec<Rating>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for r in &entries {
            if r.user >= num_users {
                return Err(Error::IndexOutOfRange {
                    kind: "user",
                    index: r.user,
                    size: num_users,
                });
            }
            if r.item >= num_items {
                return Err(Error::IndexOutOfRange {
                    kind: "item",
                    index: r.item,
                    size: num_items,
                });
            }
            if !seen.insert((r.user, r.item)) {
                return Err(Error::DuplicateRating {
                    user: r.user,
                    item: r.item,
                });
            }
        }
        Ok(RatingSet {
            entries,
            num_users,
            num_items,
        })
    }

    /// Builds a set from `(user, item, value)` tuples.
    pub fn from_triples(
        num_users: usize,
        num_items: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let entries = triples
            .into_iter()
            .map(|(u, i, v)| Rating::new(u, i, v))
            .collect();
        Self::new(num_users, num_items, entries)
    }

    pub fn empty(num_users: usize, num_items: usize) -> Self {
        RatingSet {
            entries: Vec::new(),
            num_users,
            num_items,
        }
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Rating> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rating> {
        self.entries.iter()
    }

    /// Returns a copy of this set with every value replaced by `f(rating)`.
    pub fn map_values(&self, mut f: impl FnMut(&Rating) -> f64) -> RatingSet {
        RatingSet {
            entries: self
                .entries
                .iter()
                .map(|r| Rating::new(r.user, r.item, f(r)))
                .collect(),
            num_users: self.num_users,
            num_items: self.num_items,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 12);
        for r in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", r.user, r.item, r.value);
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Parses the tab-separated format. When `dims` is `None` the grid size is
    /// inferred from the largest indices present.
    pub fn parse_tsv(
        reader: impl Read,
        origin: &Path,
        dims: Option<(usize, usize)>,
    ) -> Result<Self> {
        let mut triples = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    origin,
                    lineno + 1,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let user = parse_field::<usize>(fields[0], origin, lineno + 1, "user index")?;
            let item = parse_field::<usize>(fields[1], origin, lineno + 1, "item index")?;
            let value = parse_field::<f64>(fields[2], origin, lineno + 1, "rating value")?;
            triples.push((user, item, value));
        }
        let (num_users, num_items) = dims.unwrap_or_else(|| {
            triples.iter().fold((0, 0), |(mu, mi), &(u, i, _)| {
                (mu.max(u + 1), mi.max(i + 1))
            })
        });
        Self::from_triples(num_users, num_items, triples)
    }

    pub fn read_tsv(path: impl AsRef<Path>, dims: Option<(usize, usize)>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(file, path, dims)
    }
}

impl<'a> IntoIterator for &'a RatingSet {
    type Item = &'a Rating;
    type IntoIter = std::slice::Iter<'a, Rating>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, path: &Path, line: usize, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what}: {s:?}")))
}

/// Binary user group label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Disadvantaged,
    Advantaged,
}

impl Group {
    pub fn is_disadvantaged(self) -> bool {
        matches!(self, Group::Disadvantaged)
    }

    pub fn flag(self) -> u8 {
        match self {
            Group::Disadvantaged => 1,
            Group::Advantaged => 0,
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::Disadvantaged => Group::Advantaged,
            Group::Advantaged => Group::Disadvantaged,
        }
    }
}

/// Group membership of every user, and optionally of every item.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    user_group: Vec<Group>,
    item_group: Option<Vec<usize>>,
}

impl GroupAssignment {
    pub fn new(user_group: Vec<Group>) -> Self {
        GroupAssignment {
            user_group,
            item_group: None,
        }
    }

    pub fn with_item_groups(mut self, item_group: Vec<usize>) -> Self {
        self.item_group = Some(item_group);
        self
    }

    /// Builds an assignment from disadvantaged flags.
    pub fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        Self::new(
            flags
                .into_iter()
                .map(|d| if d { Group::Disadvantaged } else { Group::Advantaged })
                .collect(),
        )
    }

    pub fn num_users(&self) -> usize {
        self.user_group.len()
    }

    pub fn user(&self, user: usize) -> Group {
        self.user_group[user]
    }

    pub fn users(&self) -> &[Group] {
        &self.user_group
    }

    pub fn item_groups(&self) -> Option<&[usize]> {
        self.item_group.as_deref()
    }

    /// Swaps the two labels of every user.
    pub fn swapped(&self) -> Self {
        GroupAssignment {
            user_group: self.user_group.iter().map(|g| g.other()).collect(),
            item_group: self.item_group.clone(),
        }
    }

    /// Checks that the assignment covers exactly the users (and items) of `ratings`.
    pub fn check_covers(&self, ratings: &RatingSet) -> Result<()> {
        if self.user_group.len() != ratings.num_users() {
            return Err(Error::Shape(format!(
                "group assignment has {} users, rating set has {}",
                self.user_group.len(),
                ratings.num_users()
            )));
        }
        if let Some(items) = &self.item_group {
            if items.len() != ratings.num_items() {
                return Err(Error::Shape(format!(
                    "group assignment has {} items, rating set has {}",
                    items.len(),
                    ratings.num_items()
                )));
            }
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(self.user_group.len() * 6);
        for (u, g) in self.user_group.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}", u, g.flag());
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Parses `user<TAB>{0|1}` lines. Every user index from 0 to the maximum
    /// must appear exactly once.
    pub fn parse_tsv(reader: impl Read, origin: &Path) -> Result<Self> {
        let mut labels: Vec<Option<Group>> = Vec::new();
        let mut last_line = 0;
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            last_line = lineno + 1;
            let (u, flag) = line.split_once('\t').ok_or_else(|| {
                Error::parse(origin, lineno + 1, "expected `user<TAB>flag`")
            })?;
            let u = parse_field::<usize>(u, origin, lineno + 1, "user index")?;
            let group = match flag.trim() {
                "1" => Group::Disadvantaged,
                "0" => Group::Advantaged,
                other => {
                    return Err(Error::parse(
                        origin,
                        lineno + 1,
                        format!("group flag must be 0 or 1, found {other:?}"),
                    ))
                }
            };
            if u >= labels.len() {
                labels.resize(u + 1, None);
            }
            if labels[u].replace(group).is_some() {
                return Err(Error::parse(
                    origin,
                    lineno + 1,
                    format!("user {u} listed twice"),
                ));
            }
        }
        let user_group = labels
            .into_iter()
            .enumerate()
            .map(|(u, g)| {
                g.ok_or_else(|| Error::parse(origin, last_line, format!("user {u} has no group")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(user_group))
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(file, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_duplicates() {
        assert!(matches!(
            RatingSet::from_triples(2, 2, [(2, 0, 1.0)]),
            Err(Error::IndexOutOfRange { kind: "user", .. })
        ));
        assert!(matches!(
            RatingSet::from_triples(2, 2, [(0, 3, 1.0)]),
            Err(Error::IndexOutOfRange { kind: "item", .. })
        ));
        assert!(matches!(
            RatingSet::from_triples(2, 2, [(0, 1, 1.0), (0, 1, 2.0)]),
            Err(Error::DuplicateRating { user: 0, item: 1 })
        ));
    }

    #[test]
    fn tsv_round_trip_preserves_bits() {
        let set = RatingSet::from_triples(3, 2, [(0, 1, 0.1 + 0.2), (2, 0, -1.0), (1, 1, 1e-300)])
            .unwrap();
        let text = set.to_tsv();
        let back = RatingSet::parse_tsv(text.as_bytes(), Path::new("mem"), Some((3, 2))).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = RatingSet::parse_tsv("0\t0\t1\n1\tx\t2\n".as_bytes(), Path::new("r.tsv"), None)
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_file_round_trip() {
        let groups = GroupAssignment::from_flags([true, false, false, true]);
        let parsed = GroupAssignment::parse_tsv(groups.to_tsv().as_bytes(), Path::new("g")).unwrap();
        assert_eq!(parsed, groups);
        assert!(GroupAssignment::parse_tsv("0\t2\n".as_bytes(), Path::new("g")).is_err());
        assert!(GroupAssignment::parse_tsv("1\t0\n".as_bytes(), Path::new("g")).is_err());
    }
}
