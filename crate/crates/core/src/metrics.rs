//! Utility and diversity metrics over ranked recommendation lists.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::InteractionGraph;
use crate::manifold::Hyperboloid;
use crate::model::EmbeddingTable;

/// Cutoffs reported by default.
pub const DEFAULT_KS: [usize; 2] = [10, 20];

/// Distinct items of the first `k` entries, in order of first appearance.
fn head_unique(rec: &[u32], k: usize) -> Vec<u32> {
    let mut seen = HashSet::new();
    rec.iter().take(k).copied().filter(|i| seen.insert(*i)).collect()
}

/// `|top-K ∩ test| / |test|`; 0 for an empty test set.
pub fn recall_at_k(rec: &[u32], test: &[u32], k: usize) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let test: HashSet<u32> = test.iter().copied().collect();
    let hits = head_unique(rec, k).iter().filter(|i| test.contains(i)).count();
    hits as f64 / test.len() as f64
}

/// DCG with gain `1/log2(r+1)` at 1-based rank `r`, normalized by the ideal
/// DCG over `min(|test|, K)` ranks.
pub fn ndcg_at_k(rec: &[u32], test: &[u32], k: usize) -> f64 {
    if test.is_empty() || k == 0 {
        return 0.0;
    }
    let test: HashSet<u32> = test.iter().copied().collect();
    let mut seen = HashSet::new();
    let dcg: f64 = rec
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| test.contains(i) && seen.insert(**i))
        .map(|(r, _)| 1.0 / ((r + 2) as f64).log2())
        .sum();
    let idcg: f64 = (0..test.len().min(k)).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
    dcg / idcg
}

/// Mean pairwise hyperbolic distance among the first `k` items; `None`
/// when fewer than two remain.
pub fn div_at_k(rec: &[u32], points: &EmbeddingTable, k: usize) -> Option<f64> {
    let items: Vec<u32> = rec.iter().take(k).copied().collect();
    if items.len() < 2 {
        return None;
    }
    let m = Hyperboloid::default();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            total += m.dist(points.item(items[a]), points.item(items[b]));
            pairs += 1;
        }
    }
    Some(total / pairs as f64)
}

/// Shannon entropy in bits of the recommended-item multiset.
pub fn shannon_entropy<'a>(lists: impl IntoIterator<Item = &'a [u32]>) -> f64 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut total = 0usize;
    for list in lists {
        for &i in list {
            *counts.entry(i).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Expected popularity complement: `1 - mean over the distinct recommended
/// items of pop(i) / max pop`, popularity counted over train interactions.
pub fn epc<'a>(lists: impl IntoIterator<Item = &'a [u32]>, item_degrees: &[usize]) -> f64 {
    let distinct: BTreeSet<u32> = lists.into_iter().flatten().copied().collect();
    let max_pop = item_degrees.iter().copied().max().unwrap_or(0);
    if distinct.is_empty() {
        return 0.0;
    }
    if max_pop == 0 {
        return 1.0;
    }
    let mean: f64 = distinct
        .iter()
        .map(|&i| item_degrees[i as usize] as f64 / max_pop as f64)
        .sum::<f64>()
        / distinct.len() as f64;
    1.0 - mean
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub recall: f64,
    pub ndcg: f64,
    pub div: f64,
    pub entropy: f64,
    pub epc: f64,
    /// Users averaged into recall and NDCG.
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub k: usize,
    pub overall: MetricSet,
    /// Restricted to head items (H20).
    pub head: MetricSet,
    /// Restricted to tail items (T80).
    pub tail: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub users_evaluated: usize,
    pub cutoffs: Vec<CutoffReport>,
}

/// Which items a metric set covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    All,
    Head,
    Tail,
}

impl Part {
    fn keeps(self, is_head: &[bool], item: u32) -> bool {
        match self {
            Part::All => true,
            Part::Head => is_head[item as usize],
            Part::Tail => !is_head[item as usize],
        }
    }
}

fn metric_set(
    lists: &[(u32, &[u32])],
    graph: &InteractionGraph,
    points: &EmbeddingTable,
    is_head: &[bool],
    degrees: &[usize],
    k: usize,
    part: Part,
) -> MetricSet {
    let mut out = MetricSet::default();
    let mut div_users = 0usize;
    let mut shown: Vec<Vec<u32>> = Vec::with_capacity(lists.len());
    for &(user, rec) in lists {
        let top: Vec<u32> = rec.iter().take(k).copied().collect();
        let test: Vec<u32> = graph
            .test_items(user)
            .iter()
            .copied()
            .filter(|&i| part.keeps(is_head, i))
            .collect();
        if !test.is_empty() {
            out.recall += recall_at_k(&top, &test, k);
            out.ndcg += ndcg_at_k(&top, &test, k);
            out.users += 1;
        }
        let kept: Vec<u32> = top.into_iter().filter(|&i| part.keeps(is_head, i)).collect();
        if let Some(d) = div_at_k(&kept, points, k) {
            out.div += d;
            div_users += 1;
        }
        shown.push(kept);
    }
    if out.users > 0 {
        out.recall /= out.users as f64;
        out.ndcg /= out.users as f64;
    }
    if div_users > 0 {
        out.div /= div_users as f64;
    }
    out.entropy = shannon_entropy(shown.iter().map(Vec::as_slice));
    out.epc = epc(shown.iter().map(Vec::as_slice), degrees);
    out
}

impl EvalReport {
    /// Score ranked lists (longest cutoff or longer) against the graph's
    /// test split. Users without test items are skipped entirely.
    pub fn compute(
        rankings: &[(u32, Vec<u32>)],
        graph: &InteractionGraph,
        points: &EmbeddingTable,
        is_head: &[bool],
        ks: &[usize],
    ) -> Self {
        let lists: Vec<(u32, &[u32])> = rankings
            .iter()
            .filter(|(u, _)| !graph.test_items(*u).is_empty())
            .map(|(u, r)| (*u, r.as_slice()))
            .collect();
        let degrees = graph.item_degrees();
        let cutoffs = ks
            .iter()
            .map(|&k| CutoffReport {
                k,
                overall: metric_set(&lists, graph, points, is_head, &degrees, k, Part::All),
                head: metric_set(&lists, graph, points, is_head, &degrees, k, Part::Head),
                tail: metric_set(&lists, graph, points, is_head, &degrees, k, Part::Tail),
            })
            .collect();
        Self {
            users_evaluated: lists.len(),
            cutoffs,
        }
    }

    pub fn at(&self, k: usize) -> Option<&CutoffReport> {
        self.cutoffs.iter().find(|c| c.k == k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, one row per cutoff and partition.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "users evaluated: {}", self.users_evaluated);
        let _ = writeln!(
            s,
            "{:>4} {:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
            "K", "part", "Recall", "NDCG", "Div", "H", "EPC", "users"
        );
        for c in &self.cutoffs {
            for (name, m) in [("overall", &c.overall), ("head", &c.head), ("tail", &c.tail)] {
                let _ = writeln!(
                    s,
                    "{:>4} {:<8} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>6}",
                    c.k, name, m.recall, m.ndcg, m.div, m.entropy, m.epc, m.users
                );
            }
        }
        s
    }
}
