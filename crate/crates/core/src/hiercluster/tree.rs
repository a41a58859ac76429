use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NodeId;
use crate::error::{Error, Result};
use crate::hiercluster::kmeans::{hyperbolic_kmeans, KMEANS_MAX_ITER, KMEANS_TOL};
use crate::manifold::Hyperboloid;
use crate::model::EmbeddingTable;
use crate::rng::derive_seed;

/// Ratio between consecutive layer sizes.
pub const BRANCHING: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    /// Index into the layer above; `None` only on the top layer.
    pub parent: Option<usize>,
    /// Indices into the layer below; empty on the leaf layer.
    pub children: Vec<usize>,
    pub centroid: Vec<f64>,
}

/// A layered clustering of users and items. Layer 1 is the single-node top
/// and layer `L` holds one leaf per user and item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyTree {
    /// `layers[l - 1]` is layer `l`.
    layers: Vec<Vec<TreeNode>>,
    /// Node id of each leaf, in leaf-index order.
    leaves: Vec<NodeId>,
    #[serde(skip)]
    leaf_index: HashMap<NodeId, usize>,
    #[serde(skip)]
    leaf_counts: Vec<Vec<usize>>,
}

/// One step of an ancestor chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub layer: usize,
    pub node_index: usize,
    /// Number of leaves under this node.
    pub sibling_leaf_count: usize,
}

impl HierarchyTree {
    /// Cluster every row of `points` bottom-up, halving the layer size each
    /// step, until a single node remains.
    pub fn build(points: &EmbeddingTable, seed: u64) -> Result<Self> {
        let n = points.node_count();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "hierarchy needs at least 2 leaves, got {n}"
            )));
        }
        let leaves: Vec<NodeId> = (0..n).map(|i| points.node_id(i)).collect();
        let mut bottom_up: Vec<Vec<TreeNode>> = vec![(0..n)
            .map(|i| TreeNode {
                id: i,
                parent: None,
                children: Vec::new(),
                centroid: points.node(i).to_vec(),
            })
            .collect()];
        let mut round = 0u64;
        loop {
            let below = bottom_up.last_mut().expect("nonempty");
            if below.len() <= 1 {
                break;
            }
            let k = (below.len() / BRANCHING).max(1);
            let pts: Vec<&[f64]> = below.iter().map(|t| t.centroid.as_slice()).collect();
            let km = hyperbolic_kmeans(&pts, k, derive_seed(seed, round), KMEANS_MAX_ITER, KMEANS_TOL)?;
            let mut above: Vec<TreeNode> = km
                .centroids
                .into_iter()
                .enumerate()
                .map(|(id, centroid)| TreeNode {
                    id,
                    parent: None,
                    children: Vec::new(),
                    centroid,
                })
                .collect();
            for (child, &c) in km.assignment.iter().enumerate() {
                below[child].parent = Some(c);
                above[c].children.push(child);
            }
            bottom_up.push(above);
            round += 1;
        }
        bottom_up.reverse();
        Self::from_parts(bottom_up, leaves)
    }

    fn from_parts(layers: Vec<Vec<TreeNode>>, leaves: Vec<NodeId>) -> Result<Self> {
        let mut tree = Self {
            layers,
            leaves,
            leaf_index: HashMap::new(),
            leaf_counts: Vec::new(),
        };
        tree.validate()?;
        tree.leaf_index = tree.leaves.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        if tree.leaf_index.len() != tree.leaves.len() {
            return Err(Error::Format("duplicate leaf id".into()));
        }
        let depth = tree.layers.len();
        let mut counts = vec![Vec::new(); depth];
        counts[depth - 1] = vec![1; tree.layers[depth - 1].len()];
        for l in (0..depth - 1).rev() {
            counts[l] = tree.layers[l]
                .iter()
                .map(|node| node.children.iter().map(|&c| counts[l + 1][c]).sum())
                .collect();
        }
        tree.leaf_counts = counts;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(msg));
        if self.layers.is_empty() || self.layers[0].len() != 1 {
            return bad("top layer must hold exactly one node".into());
        }
        let depth = self.layers.len();
        if self.layers[depth - 1].len() != self.leaves.len() {
            return bad("leaf layer size does not match the leaf-id list".into());
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for (i, node) in layer.iter().enumerate() {
                if node.id != i {
                    return bad(format!("layer {} node {i} has id {}", l + 1, node.id));
                }
                match (l, node.parent) {
                    (0, None) => {}
                    (0, Some(_)) => return bad("top node has a parent".into()),
                    (_, None) => return bad(format!("layer {} node {i} has no parent", l + 1)),
                    (_, Some(p)) => {
                        if !self.layers[l - 1].get(p).is_some_and(|q| q.children.contains(&i)) {
                            return bad(format!("layer {} node {i} has inconsistent parent {p}", l + 1));
                        }
                    }
                }
                if l + 1 == depth && !node.children.is_empty() {
                    return bad("leaf with children".into());
                }
                if l + 1 < depth && node.children.is_empty() {
                    return bad(format!("layer {} node {i} has no children", l + 1));
                }
                for &c in &node.children {
                    if self.layers.get(l + 1).and_then(|below| below.get(c)).and_then(|n| n.parent) != Some(i) {
                        return bad(format!("layer {} node {i} lists foreign child {c}", l + 1));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of layers `L`, counting the top and the leaves.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Nodes of layer `l` (1-based).
    pub fn layer(&self, l: usize) -> &[TreeNode] {
        &self.layers[l - 1]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_index(&self, node: NodeId) -> Result<usize> {
        self.leaf_index
            .get(&node)
            .copied()
            .ok_or_else(|| Error::UnknownNode(node.to_string()))
    }

    /// Leaves under node `index` of layer `l`.
    pub fn leaf_count(&self, l: usize, index: usize) -> usize {
        self.leaf_counts[l - 1][index]
    }

    /// Chain from the leaf up to the top, as `(layer, node_index)` with
    /// layers `L, L-1, ..., 1`.
    pub fn ancestor_path(&self, node: NodeId) -> Result<Vec<PathStep>> {
        let mut idx = self.leaf_index(node)?;
        let mut out = Vec::with_capacity(self.depth());
        for l in (1..=self.depth()).rev() {
            out.push(PathStep {
                layer: l,
                node_index: idx,
                sibling_leaf_count: self.leaf_count(l, idx),
            });
            if let Some(p) = self.layers[l - 1][idx].parent {
                idx = p;
            }
        }
        Ok(out)
    }

    /// Index of the layer-`l` ancestor of a leaf.
    pub fn ancestor_at(&self, node: NodeId, l: usize) -> Result<usize> {
        if l == 0 || l > self.depth() {
            return Err(Error::InvalidParameter(format!(
                "layer {l} outside 1..={}",
                self.depth()
            )));
        }
        let path = self.ancestor_path(node)?;
        Ok(path[self.depth() - l].node_index)
    }

    /// Layer of the deepest common ancestor; `L` for a leaf with itself.
    pub fn lca_layer(&self, a: NodeId, b: NodeId) -> Result<usize> {
        let pa = self.ancestor_path(a)?;
        let pb = self.ancestor_path(b)?;
        Ok(pa
            .iter()
            .zip(&pb)
            .find(|(x, y)| x.node_index == y.node_index)
            .map_or(1, |(x, _)| x.layer))
    }

    /// Leaf ids under node `index` of layer `l`, in leaf-index order.
    pub fn leaves_under(&self, l: usize, index: usize) -> Vec<NodeId> {
        let mut frontier = vec![index];
        for layer in l..self.depth() {
            frontier = frontier
                .iter()
                .flat_map(|&i| self.layers[layer - 1][i].children.iter().copied())
                .collect();
        }
        frontier.sort_unstable();
        frontier.into_iter().map(|i| self.leaves[i]).collect()
    }

    /// Mean distance from the origin of the centroids in each layer, top first.
    pub fn mean_norm_by_layer(&self) -> Vec<f64> {
        let m = Hyperboloid::default();
        self.layers
            .iter()
            .map(|layer| {
                let o = m.origin(layer[0].centroid.len() - 1);
                layer.iter().map(|n| m.dist(&n.centroid, &o)).sum::<f64>() / layer.len() as f64
            })
            .collect()
    }

    /// Parent array over all nodes, leaves first (leaf `i` is node `i`),
    /// then each internal layer from the bottom up.
    pub fn parent_array(&self) -> Vec<Option<usize>> {
        let depth = self.depth();
        let mut offsets = vec![0; depth];
        let mut next = 0;
        for l in (0..depth).rev() {
            offsets[l] = next;
            next += self.layers[l].len();
        }
        let mut parents = vec![None; next];
        for l in 1..depth {
            for (i, node) in self.layers[l].iter().enumerate() {
                parents[offsets[l] + i] = node.parent.map(|p| offsets[l - 1] + p);
            }
        }
        parents
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            layers: Vec<Vec<TreeNode>>,
            leaves: Vec<NodeId>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::from_parts(raw.layers, raw.leaves)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
