//! Top-k retrieval and the (τ, l) explore/exploit policy.

use std::collections::HashSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::{InteractionGraph, NodeId};
use crate::error::{Error, Result};
use crate::hiercluster::HierarchyTree;
use crate::model::{predict, EmbeddingTable};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Retained,
    Explored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecItem {
    pub item_id: u32,
    pub score: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub user: u32,
    pub items: Vec<RecItem>,
}

impl RecommendationList {
    pub fn item_ids(&self) -> Vec<u32> {
        self.items.iter().map(|r| r.item_id).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn check_user(points: &EmbeddingTable, graph: &InteractionGraph, user: u32) -> Result<()> {
    if points.user_count() != graph.user_count() || points.item_count() != graph.item_count() {
        return Err(Error::Dimension {
            expected: graph.node_count(),
            found: points.node_count(),
        });
    }
    if user as usize >= graph.user_count() {
        return Err(Error::UnknownNode(NodeId::User(user).to_string()));
    }
    Ok(())
}

fn by_score(a: &RecItem, b: &RecItem) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.item_id.cmp(&b.item_id))
}

/// Items outside the user's train set, ranked by descending score with
/// ties to the lower id, truncated to `k`.
pub fn top_k(points: &EmbeddingTable, graph: &InteractionGraph, user: u32, k: usize) -> Result<RecommendationList> {
    check_user(points, graph, user)?;
    let h_u = points.user(user);
    let mut scored: Vec<RecItem> = (0..graph.item_count() as u32)
        .filter(|&i| !graph.has_train(user, i))
        .map(|i| RecItem {
            item_id: i,
            score: predict(h_u, points.item(i)),
            provenance: Provenance::Retained,
        })
        .collect();
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_score);
        scored.truncate(k);
    }
    scored.sort_by(by_score);
    Ok(RecommendationList { user, items: scored })
}

/// Number of top-ranked slots kept under temperature `tau`.
pub fn retained_count(k: usize, tau: f64) -> usize {
    ((1.0 - tau) * k as f64 + 1e-9).floor() as usize
}

/// Keep the top `⌊(1-τ)k⌋` items and fill the remaining slots with items
/// drawn uniformly without replacement from the item leaves under the
/// user's layer-`layer` ancestor. If that pool runs dry, the rest of the
/// original top-k list fills in.
///
/// Slot order: retained, explored (by descending score), backfill.
#[allow(clippy::too_many_arguments)]
pub fn explore_exploit(
    points: &EmbeddingTable,
    graph: &InteractionGraph,
    tree: &HierarchyTree,
    user: u32,
    k: usize,
    tau: f64,
    layer: usize,
    seed: u64,
) -> Result<RecommendationList> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau must lie in [0, 1], got {tau}")));
    }
    if layer == 0 || layer > tree.depth() {
        return Err(Error::InvalidParameter(format!(
            "layer {layer} outside 1..={}",
            tree.depth()
        )));
    }
    let ranked = top_k(points, graph, user, k)?;
    let keep = retained_count(k, tau).min(ranked.len());
    if keep == k {
        return Ok(ranked);
    }
    let mut out: Vec<RecItem> = ranked.items[..keep].to_vec();
    let taken: HashSet<u32> = out.iter().map(|r| r.item_id).collect();
    let anchor = tree.ancestor_at(NodeId::User(user), layer)?;
    let pool: Vec<u32> = tree
        .leaves_under(layer, anchor)
        .into_iter()
        .filter_map(|n| match n {
            NodeId::Item(i) if !graph.has_train(user, i) && !taken.contains(&i) => Some(i),
            _ => None,
        })
        .collect();
    let want = (k - keep).min(pool.len());
    let mut rng = stream_rng(seed, user as u64);
    let h_u = points.user(user);
    let mut explored: Vec<RecItem> = sample(&mut rng, pool.len(), want)
        .into_iter()
        .map(|idx| RecItem {
            item_id: pool[idx],
            score: predict(h_u, points.item(pool[idx])),
            provenance: Provenance::Explored,
        })
        .collect();
    explored.sort_by(by_score);
    let chosen: HashSet<u32> = explored.iter().map(|r| r.item_id).collect();
    out.extend(explored);
    let backfill: Vec<RecItem> = ranked.items[keep..]
        .iter()
        .filter(|r| !chosen.contains(&r.item_id))
        .copied()
        .collect();
    for r in backfill {
        if out.len() >= k {
            break;
        }
        out.push(r);
    }
    Ok(RecommendationList { user, items: out })
}

/// Most-popular baseline: train degree, ties to the lower id, train items excluded.
pub fn most_popular(graph: &InteractionGraph, user: u32, k: usize) -> Result<RecommendationList> {
    if user as usize >= graph.user_count() {
        return Err(Error::UnknownNode(NodeId::User(user).to_string()));
    }
    let degrees = graph.item_degrees();
    let mut items: Vec<RecItem> = (0..graph.item_count() as u32)
        .filter(|&i| !graph.has_train(user, i))
        .map(|i| RecItem {
            item_id: i,
            score: degrees[i as usize] as f64,
            provenance: Provenance::Retained,
        })
        .collect();
    items.sort_by(by_score);
    items.truncate(k);
    Ok(RecommendationList { user, items })
}
