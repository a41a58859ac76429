use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A user or item identifier. Displays as `u<id>` / `i<id>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    User(u32),
    Item(u32),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::User(u) => write!(f, "u{u}"),
            NodeId::Item(i) => write!(f, "i{i}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownNode(s.to_string());
        let (kind, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let id: u32 = rest.parse().map_err(|_| bad())?;
        match kind {
            "u" => Ok(NodeId::User(id)),
            "i" => Ok(NodeId::Item(id)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Bipartite user-item interactions with a per-user train/test split.
///
/// Adjacency lists are sorted and duplicate-free. `item_users` is the
/// transpose of `train`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    user_count: usize,
    item_count: usize,
    train: Vec<Vec<u32>>,
    item_users: Vec<Vec<u32>>,
    test: Vec<Vec<u32>>,
}

/// What [`load_interactions`] did besides building the graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub lines: usize,
    pub duplicates: usize,
}

impl InteractionGraph {
    /// Build from explicit per-user lists. Lists are sorted and deduplicated;
    /// overlapping train/test pairs are rejected.
    pub fn from_lists(
        user_count: usize,
        item_count: usize,
        mut train: Vec<Vec<u32>>,
        mut test: Vec<Vec<u32>>,
    ) -> Result<Self> {
        train.resize(user_count, Vec::new());
        test.resize(user_count, Vec::new());
        if train.len() != user_count || test.len() != user_count {
            return Err(Error::Format(format!(
                "more adjacency lists than the declared {user_count} users"
            )));
        }
        for (u, (tr, te)) in train.iter_mut().zip(test.iter_mut()).enumerate() {
            for list in [&mut *tr, &mut *te] {
                list.sort_unstable();
                list.dedup();
                if let Some(&bad) = list.iter().find(|&&i| i as usize >= item_count) {
                    return Err(Error::Format(format!(
                        "item {bad} of user {u} is out of range (item_count = {item_count})"
                    )));
                }
            }
            if te.iter().any(|i| tr.binary_search(i).is_ok()) {
                return Err(Error::Format(format!(
                    "user {u} has an item in both train and test"
                )));
            }
        }
        let mut item_users = vec![Vec::new(); item_count];
        for (u, items) in train.iter().enumerate() {
            for &i in items {
                item_users[i as usize].push(u as u32);
            }
        }
        Ok(Self {
            user_count,
            item_count,
            train,
            item_users,
            test,
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    /// Total number of nodes (users + items).
    pub fn node_count(&self) -> usize {
        self.user_count + self.item_count
    }

    /// Training items of `user` (N_u), sorted.
    pub fn train_items(&self, user: u32) -> &[u32] {
        &self.train[user as usize]
    }

    /// Training users of `item` (N_i), sorted.
    pub fn item_users(&self, item: u32) -> &[u32] {
        &self.item_users[item as usize]
    }

    /// Held-out items of `user`, sorted.
    pub fn test_items(&self, user: u32) -> &[u32] {
        &self.test[user as usize]
    }

    pub fn has_train(&self, user: u32, item: u32) -> bool {
        self.train[user as usize].binary_search(&item).is_ok()
    }

    pub fn train_len(&self) -> usize {
        self.train.iter().map(Vec::len).sum()
    }

    pub fn test_len(&self) -> usize {
        self.test.iter().map(Vec::len).sum()
    }

    /// All training pairs in (user, item) order.
    pub fn train_pairs(&self) -> Vec<(u32, u32)> {
        self.train
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u as u32, i)))
            .collect()
    }

    /// Train interaction count per item.
    pub fn item_degrees(&self) -> Vec<usize> {
        self.item_users.iter().map(Vec::len).collect()
    }

    /// Move a fraction of each user's train items into a validation list.
    ///
    /// Users with at least three train items give up `max(1, round(frac·n))`
    /// items; others keep all of theirs. Returns the reduced graph (same test
    /// lists) and the per-user validation items.
    pub fn carve_validation(&self, frac: f64, seed: u64) -> (InteractionGraph, Vec<Vec<u32>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e_ed0f_7a1d);
        let mut train = Vec::with_capacity(self.user_count);
        let mut valid = Vec::with_capacity(self.user_count);
        for items in &self.train {
            let n = items.len();
            let take = if n >= 3 && frac > 0.0 {
                ((frac * n as f64).round() as usize).clamp(1, n - 1)
            } else {
                0
            };
            let mut shuffled = items.clone();
            shuffled.shuffle(&mut rng);
            let mut v = shuffled.split_off(n - take);
            shuffled.sort_unstable();
            v.sort_unstable();
            train.push(shuffled);
            valid.push(v);
        }
        let graph = InteractionGraph::from_lists(
            self.user_count,
            self.item_count,
            train,
            self.test.clone(),
        )
        .expect("subset of a valid graph is valid");
        (graph, valid)
    }

    /// Write the graph, split included, as `user<TAB>item<TAB>train|test` lines
    /// under a header that fixes the node counts.
    pub fn save_split(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        writeln!(
            out,
            "# split users={} items={}",
            self.user_count, self.item_count
        )?;
        for (u, (tr, te)) in self.train.iter().zip(&self.test).enumerate() {
            for i in tr {
                writeln!(out, "{u}\t{i}\ttrain")?;
            }
            for i in te {
                writeln!(out, "{u}\t{i}\ttest")?;
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load_split(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing split header"))?;
        let mut counts = [None, None];
        for tok in header.trim_start_matches('#').split_whitespace().skip(1) {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(path, 1, format!("bad header token `{tok}`")))?;
            let v: usize = v
                .parse()
                .map_err(|_| Error::parse(path, 1, format!("bad count `{v}`")))?;
            match k {
                "users" => counts[0] = Some(v),
                "items" => counts[1] = Some(v),
                _ => return Err(Error::parse(path, 1, format!("unknown header key `{k}`"))),
            }
        }
        let (Some(users), Some(items)) = (counts[0], counts[1]) else {
            return Err(Error::parse(path, 1, "header must declare users and items"));
        };
        let mut train = vec![Vec::new(); users];
        let mut test = vec![Vec::new(); users];
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [u, i, which] = fields[..] else {
                return Err(Error::parse(path, idx + 1, "expected three tab-separated fields"));
            };
            let u: usize = u
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, format!("bad user id `{u}`")))?;
            let i: u32 = i
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, format!("bad item id `{i}`")))?;
            if u >= users {
                return Err(Error::parse(path, idx + 1, "user id out of declared range"));
            }
            match which {
                "train" => train[u].push(i),
                "test" => test[u].push(i),
                other => {
                    return Err(Error::parse(path, idx + 1, format!("bad split tag `{other}`")))
                }
            }
        }
        InteractionGraph::from_lists(users, items, train, test)
    }
}

/// Parse an interactions file and split it per user.
///
/// Each line is `user_id<TAB>item_id`; blank lines and `#` comments are
/// skipped; duplicate pairs are dropped and counted. Node counts are the
/// largest ids plus one, so ids with no interactions exist with empty lists.
///
/// The split is seeded and independent of line order: every user's distinct
/// items are sorted, shuffled with the seeded generator, and the first
/// `clamp(round(ratio·n), 1, n-1)` go to train (users with a single item keep
/// it in train).
pub fn load_interactions(
    path: impl AsRef<Path>,
    split_ratio: f64,
    seed: u64,
) -> Result<(InteractionGraph, LoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut report = LoadReport::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(u), Some(i), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(path, idx + 1, "expected `user_id<TAB>item_id`"));
        };
        let u: u32 = u
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad user id `{u}`")))?;
        let i: u32 = i
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad item id `{i}`")))?;
        pairs.push((u, i));
        report.lines += 1;
    }
    let graph = split_pairs(&pairs, split_ratio, seed, &mut report)?;
    Ok((graph, report))
}

/// Split in-memory (user, item) pairs exactly as [`load_interactions`] does.
pub fn split_pairs(
    pairs: &[(u32, u32)],
    split_ratio: f64,
    seed: u64,
    report: &mut LoadReport,
) -> Result<InteractionGraph> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratio must lie in (0, 1), got {split_ratio}"
        )));
    }
    let user_count = pairs.iter().map(|p| p.0 as usize + 1).max().unwrap_or(0);
    let item_count = pairs.iter().map(|p| p.1 as usize + 1).max().unwrap_or(0);
    let mut per_user = vec![BTreeSet::new(); user_count];
    for &(u, i) in pairs {
        if !per_user[u as usize].insert(i) {
            report.duplicates += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(user_count);
    let mut test = Vec::with_capacity(user_count);
    for items in per_user {
        let mut items: Vec<u32> = items.into_iter().collect();
        let n = items.len();
        items.shuffle(&mut rng);
        let n_train = if n >= 2 {
            ((split_ratio * n as f64).round() as usize).clamp(1, n - 1)
        } else {
            n
        };
        let held = items.split_off(n_train);
        train.push(items);
        test.push(held);
    }
    InteractionGraph::from_lists(user_count, item_count, train, test)
}
