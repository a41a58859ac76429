//! Interaction data, semantic vectors, and head/tail statistics.

mod graph;
mod semantic;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use graph::{load_interactions, split_pairs, InteractionGraph, LoadReport, NodeId};
pub use semantic::{load_semantic_vectors, save_semantic_vectors, SemanticTable};

use crate::error::{Error, Result};

/// Fraction of items, ranked by train popularity, that form the head.
pub const HEAD_FRACTION: f64 = 0.2;

/// Split counts and the H20/T80 item partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub train_interactions: usize,
    pub test_interactions: usize,
    /// Head item ids in popularity order.
    pub head: Vec<u32>,
    /// Per item: whether it belongs to the head.
    pub is_head: Vec<bool>,
}

impl DatasetStats {
    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    pub fn tail_len(&self) -> usize {
        self.items - self.head.len()
    }
}

/// Rank items by train interaction count (descending, ties by ascending id)
/// and mark the first `ceil(0.2 · item_count)` as head.
pub fn head_tail_split(graph: &InteractionGraph) -> DatasetStats {
    let degrees = graph.item_degrees();
    let mut order: Vec<u32> = (0..graph.item_count() as u32).collect();
    order.sort_by(|a, b| {
        degrees[*b as usize]
            .cmp(&degrees[*a as usize])
            .then(a.cmp(b))
    });
    let head_len = (HEAD_FRACTION * graph.item_count() as f64).ceil() as usize;
    order.truncate(head_len);
    let mut is_head = vec![false; graph.item_count()];
    for &i in &order {
        is_head[i as usize] = true;
    }
    DatasetStats {
        users: graph.user_count(),
        items: graph.item_count(),
        train_interactions: graph.train_len(),
        test_interactions: graph.test_len(),
        head: order,
        is_head,
    }
}

/// Optional `key=value` manifest declaring dataset counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: BTreeMap<String, usize>,
}

impl DatasetManifest {
    const KEYS: [&'static str; 3] = ["users", "items", "interactions"];

    pub fn from_graph(graph: &InteractionGraph) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("users".into(), graph.user_count());
        entries.insert("items".into(), graph.item_count());
        entries.insert("interactions".into(), graph.train_len() + graph.test_len());
        Self { entries }
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.entries.get(key).copied()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, idx + 1, "expected key=value"))?;
            let k = k.trim();
            if !Self::KEYS.contains(&k) {
                return Err(Error::parse(path, idx + 1, format!("unknown key `{k}`")));
            }
            let v: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, format!("bad count `{}`", v.trim())))?;
            entries.insert(k.to_string(), v);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text: String = self
            .entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        fs::write(path, text)?;
        Ok(())
    }

    /// Check every declared count against the loaded graph.
    pub fn validate(&self, graph: &InteractionGraph) -> Result<()> {
        let actual = Self::from_graph(graph);
        for (k, v) in &self.entries {
            let found = actual.get(k).unwrap_or(0);
            if found != *v {
                return Err(Error::Format(format!(
                    "manifest declares {k}={v}, data has {found}"
                )));
            }
        }
        Ok(())
    }
}
