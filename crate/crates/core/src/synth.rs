//! Synthetic datasets with a planted preference hierarchy.
//!
//! A complete `branching`-ary tree of latent topics is drawn; every user and
//! item sits at one leaf. A user's interactions come from their own leaf with
//! probability `1 - noise`, otherwise from another leaf chosen with weight
//! halving per level of tree distance. Within a leaf, items follow a Zipf
//! popularity profile, which produces a long tail. Semantic vectors are
//! per-level one-hot encodings of the leaf path plus Gaussian noise.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::{save_semantic_vectors, DatasetManifest, NodeId, SemanticTable};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Target items per latent leaf, used to pick the tree depth.
pub const ITEMS_PER_LEAF: usize = 16;
pub const MIN_INTERACTIONS: usize = 12;
pub const MAX_INTERACTIONS: usize = 24;
pub const ZIPF_EXPONENT: f64 = 0.8;
pub const SEMANTIC_NOISE: f64 = 0.25;
/// Cross-leaf weight multiplier per level of tree distance.
pub const LEVEL_DECAY: f64 = 0.5;

pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const SEMANTIC_FILE: &str = "semantic.tsv";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub branching: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 200,
            items: 300,
            branching: 2,
            noise: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub depth: usize,
    pub branching: usize,
    pub user_leaf: Vec<usize>,
    pub item_leaf: Vec<usize>,
    /// Sorted, distinct `(user, item)` pairs.
    pub pairs: Vec<(u32, u32)>,
    pub semantic: SemanticTable,
}

/// Number of levels above the deepest common ancestor of two leaves.
fn tree_distance(mut a: usize, mut b: usize, branching: usize) -> usize {
    let mut d = 0;
    while a != b {
        a /= branching;
        b /= branching;
        d += 1;
    }
    d
}

fn path_encoding(leaf: usize, depth: usize, branching: usize) -> Vec<f64> {
    let mut v = vec![0.0; depth * branching];
    let mut rest = leaf;
    for level in (0..depth).rev() {
        v[level * branching + rest % branching] = 1.0;
        rest /= branching;
    }
    v
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if cfg.users == 0 || cfg.items == 0 {
        return Err(Error::InvalidParameter("users and items must be positive".into()));
    }
    if cfg.branching < 2 {
        return Err(Error::InvalidParameter("branching must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::InvalidParameter(format!("noise {} outside [0, 1]", cfg.noise)));
    }
    let b = cfg.branching;
    let mut depth = 1;
    while b.pow(depth as u32 + 1) * ITEMS_PER_LEAF <= cfg.items {
        depth += 1;
    }
    let leaves = b.pow(depth as u32);

    let mut rng = stream_rng(cfg.seed, 0);
    let mut assign = |n: usize| {
        let mut v: Vec<usize> = (0..n).map(|x| x % leaves).collect();
        v.shuffle(&mut rng);
        v
    };
    let user_leaf = assign(cfg.users);
    let item_leaf = assign(cfg.items);

    let mut by_leaf = vec![Vec::new(); leaves];
    for (i, &l) in item_leaf.iter().enumerate() {
        by_leaf[l].push(i as u32);
    }
    let leaf_pickers: Vec<Option<WeightedIndex<f64>>> = by_leaf
        .iter()
        .map(|items| {
            let w: Vec<f64> = (0..items.len())
                .map(|r| 1.0 / ((r + 1) as f64).powf(ZIPF_EXPONENT))
                .collect();
            WeightedIndex::new(w).ok()
        })
        .collect();

    let mut pairs = Vec::new();
    for (u, &home) in user_leaf.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, 1 + u as u64);
        let away: Vec<usize> = (0..leaves).filter(|&l| l != home && !by_leaf[l].is_empty()).collect();
        let away_pick = WeightedIndex::new(
            away.iter()
                .map(|&l| LEVEL_DECAY.powi(tree_distance(home, l, b) as i32 - 1)),
        )
        .ok();
        let home_size = by_leaf[home].len();
        let want = rng.random_range(MIN_INTERACTIONS..=MAX_INTERACTIONS);
        let mut chosen = BTreeSet::new();
        let mut attempts = 0;
        while chosen.len() < want && attempts < 50 * MAX_INTERACTIONS {
            attempts += 1;
            let explore = cfg.noise > 0.0 && rng.random_bool(cfg.noise);
            let leaf = match (&away_pick, explore) {
                (Some(p), true) => away[p.sample(&mut rng)],
                _ if home_size > 0 => home,
                _ => continue,
            };
            if let Some(pick) = &leaf_pickers[leaf] {
                chosen.insert(by_leaf[leaf][pick.sample(&mut rng)]);
            }
        }
        pairs.extend(chosen.into_iter().map(|i| (u as u32, i)));
    }

    let normal = Normal::new(0.0, SEMANTIC_NOISE).expect("valid deviation");
    let mut semantic = SemanticTable::new(depth * b);
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let nodes = user_leaf
        .iter()
        .enumerate()
        .map(|(u, &l)| (NodeId::User(u as u32), l))
        .chain(item_leaf.iter().enumerate().map(|(i, &l)| (NodeId::Item(i as u32), l)));
    for (node, leaf) in nodes {
        let mut v = path_encoding(leaf, depth, b);
        v.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
        semantic.insert(node, v)?;
    }

    Ok(SynthData {
        depth,
        branching: b,
        user_leaf,
        item_leaf,
        pairs,
        semantic,
    })
}

impl SynthData {
    /// Write interactions, semantic vectors and a manifest into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let inter = dir.join(INTERACTIONS_FILE);
        let mut text = String::from("# user_id\titem_id\n");
        for (u, i) in &self.pairs {
            text.push_str(&format!("{u}\t{i}\n"));
        }
        fs::write(&inter, text)?;
        let sem = dir.join(SEMANTIC_FILE);
        save_semantic_vectors(&self.semantic, &sem)?;
        let manifest = dir.join(MANIFEST_FILE);
        fs::write(
            &manifest,
            format!(
                "users={}\nitems={}\ninteractions={}\n",
                self.user_leaf.len(),
                self.item_leaf.len(),
                self.pairs.len()
            ),
        )?;
        // round-trip through the parser so a bad manifest never leaves here
        DatasetManifest::load(&manifest)?;
        Ok(vec![inter, sem, manifest])
    }
}
