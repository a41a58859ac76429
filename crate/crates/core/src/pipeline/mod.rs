//! Training, evaluation and artifact lifecycle.
//!
//! A trained model lives in three files: the binary checkpoint holding the
//! base points, its JSON sidecar ([`CheckpointMeta`]), and the interaction
//! split (`<checkpoint>.split`) whose train edges drive message passing.

mod config;
mod train;

use std::path::{Path, PathBuf};

pub use config::TrainConfig;
pub use train::{
    holdout_recall, initial_model, split_path, train, CheckpointMeta, EpochRecord, TrainOutcome, ADAPTER_LR,
    VALIDATION_FRACTION, VALIDATION_K,
};

use crate::data::{head_tail_split, InteractionGraph};
use crate::error::{Error, Result};
use crate::hiercluster::HierarchyTree;
use crate::metrics::{div_at_k, recall_at_k, EvalReport};
use crate::model::{load_checkpoint, load_sidecar, propagate, EmbeddingTable, Model};
use crate::recommend::{explore_exploit, most_popular, top_k};

/// Train/test split ratio used when loading raw interactions.
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

/// A checkpoint with its sidecar, split, and propagated embeddings.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub path: PathBuf,
    pub model: Model,
    pub meta: CheckpointMeta,
    pub graph: InteractionGraph,
    /// Final embeddings after message passing over `graph`.
    pub points: EmbeddingTable,
}

impl Artifacts {
    pub fn load(checkpoint: impl AsRef<Path>) -> Result<Self> {
        let path = checkpoint.as_ref();
        let model = load_checkpoint(path)?;
        let meta: CheckpointMeta = load_sidecar(path)?;
        let graph = InteractionGraph::load_split(split_path(path))?;
        Self::assemble(path, model, meta, graph)
    }

    /// Load the checkpoint but take the interactions from `graph`.
    pub fn load_with_graph(checkpoint: impl AsRef<Path>, graph: InteractionGraph) -> Result<Self> {
        let path = checkpoint.as_ref();
        let model = load_checkpoint(path)?;
        let meta: CheckpointMeta = load_sidecar(path)?;
        Self::assemble(path, model, meta, graph)
    }

    fn assemble(path: &Path, model: Model, meta: CheckpointMeta, graph: InteractionGraph) -> Result<Self> {
        Error::check_dim(model.table.user_count(), graph.user_count())?;
        Error::check_dim(model.table.item_count(), graph.item_count())?;
        Error::check_dim(model.table.dim(), meta.config.dim)?;
        let points = propagate(&model.table, &graph, meta.config.layers).points;
        Ok(Self {
            path: path.to_path_buf(),
            model,
            meta,
            graph,
            points,
        })
    }

    /// Tree file conventionally stored beside the checkpoint.
    pub fn default_tree_path(&self) -> PathBuf {
        let mut s = self.path.as_os_str().to_owned();
        s.push(".tree.json");
        s.into()
    }

    pub fn build_tree(&self) -> Result<HierarchyTree> {
        HierarchyTree::build(&self.points, self.meta.config.seed)
    }
}

fn rank_all<F>(graph: &InteractionGraph, k: usize, mut rank: F) -> Result<Vec<(u32, Vec<u32>)>>
where
    F: FnMut(u32, usize) -> Result<Vec<u32>>,
{
    (0..graph.user_count() as u32)
        .filter(|&u| !graph.test_items(u).is_empty())
        .map(|u| Ok((u, rank(u, k)?)))
        .collect()
}

/// Full metric suite of the ranking by `points` against the test split.
pub fn evaluate(points: &EmbeddingTable, graph: &InteractionGraph, ks: &[usize]) -> Result<EvalReport> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let rankings = rank_all(graph, kmax, |u, k| Ok(top_k(points, graph, u, k)?.item_ids()))?;
    Ok(EvalReport::compute(&rankings, graph, points, &head_tail_split(graph).is_head, ks))
}

/// Metric suite of the most-popular baseline; diversity uses `points`.
pub fn evaluate_most_popular(points: &EmbeddingTable, graph: &InteractionGraph, ks: &[usize]) -> Result<EvalReport> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let rankings = rank_all(graph, kmax, |u, k| Ok(most_popular(graph, u, k)?.item_ids()))?;
    Ok(EvalReport::compute(&rankings, graph, points, &head_tail_split(graph).is_head, ks))
}

/// Mean test Recall@K and Div@K of the explore/exploit policy at one layer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerPoint {
    pub layer: usize,
    pub recall: f64,
    pub div: f64,
}

/// Sweep the hierarchy layer at fixed `tau`, averaging over users with test items.
pub fn layer_sweep(
    points: &EmbeddingTable,
    graph: &InteractionGraph,
    tree: &HierarchyTree,
    k: usize,
    tau: f64,
    seed: u64,
) -> Result<Vec<LayerPoint>> {
    (1..=tree.depth())
        .map(|layer| {
            let mut recall = 0.0;
            let mut div = 0.0;
            let mut users = 0usize;
            let mut div_users = 0usize;
            for u in 0..graph.user_count() as u32 {
                let test = graph.test_items(u);
                if test.is_empty() {
                    continue;
                }
                let rec = explore_exploit(points, graph, tree, u, k, tau, layer, seed)?.item_ids();
                recall += recall_at_k(&rec, test, k);
                users += 1;
                if let Some(d) = div_at_k(&rec, points, k) {
                    div += d;
                    div_users += 1;
                }
            }
            Ok(LayerPoint {
                layer,
                recall: recall / users.max(1) as f64,
                div: div / div_users.max(1) as f64,
            })
        })
        .collect()
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        idx[i..=j].iter().for_each(|&t| ranks[t] = r);
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
