use rand::Rng;

use crate::data::InteractionGraph;
use crate::error::{Error, Result};
use crate::hiercluster::HierarchyTree;

/// A rooted tree over `leaf_count` leaves given as a parent array. Nodes
/// `0..leaf_count` are the leaves; exactly one node has no parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    leaf_count: usize,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    leaves_below: Vec<usize>,
}

impl RootedTree {
    pub fn new(leaf_count: usize, parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        if leaf_count == 0 || leaf_count > n {
            return Err(Error::InvalidParameter(format!(
                "{leaf_count} leaves in a tree of {n} nodes"
            )));
        }
        if parent.iter().filter(|p| p.is_none()).count() != 1 {
            return Err(Error::Format("tree must have exactly one root".into()));
        }
        let mut depth = vec![usize::MAX; n];
        // resolve depths iteratively; a chain longer than n means a cycle
        for start in 0..n {
            let mut chain = Vec::new();
            let mut v = start;
            while depth[v] == usize::MAX {
                chain.push(v);
                if chain.len() > n {
                    return Err(Error::Format("parent array contains a cycle".into()));
                }
                match parent[v] {
                    Some(p) if p < n => v = p,
                    Some(p) => return Err(Error::Format(format!("parent {p} out of range"))),
                    None => {
                        depth[v] = 0;
                        chain.pop();
                        break;
                    }
                }
            }
            let mut d = depth[v];
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = d;
            }
        }
        let mut has_child = vec![false; n];
        parent.iter().flatten().for_each(|&p| has_child[p] = true);
        if has_child[..leaf_count].iter().any(|&c| c) {
            return Err(Error::Format("a leaf has children".into()));
        }
        if let Some(v) = (leaf_count..n).find(|&v| !has_child[v]) {
            return Err(Error::Format(format!("internal node {v} has no children")));
        }
        let mut leaves_below = vec![0usize; n];
        for leaf in 0..leaf_count {
            let mut v = Some(leaf);
            while let Some(x) = v {
                leaves_below[x] += 1;
                v = parent[x];
            }
        }
        Ok(Self {
            leaf_count,
            parent,
            depth,
            leaves_below,
        })
    }

    pub fn from_hierarchy(tree: &HierarchyTree) -> Self {
        Self::new(tree.leaves().len(), tree.parent_array()).expect("hierarchy trees are valid")
    }

    /// Uniformly random binary tree over `leaf_count` labelled leaves (Rémy).
    pub fn random_binary<R: Rng + ?Sized>(leaf_count: usize, rng: &mut R) -> Self {
        assert!(leaf_count >= 1);
        // grow over an internal numbering, then relabel so leaves come first
        let mut parent: Vec<Option<usize>> = vec![None];
        let mut is_leaf = vec![true];
        for _ in 1..leaf_count {
            let target = rng.random_range(0..parent.len());
            let internal = parent.len();
            parent.push(parent[target]);
            is_leaf.push(false);
            parent.push(Some(internal));
            is_leaf.push(true);
            parent[target] = Some(internal);
        }
        let mut relabel = vec![0; parent.len()];
        let mut next_leaf = 0;
        let mut next_internal = leaf_count;
        for (v, &leaf) in is_leaf.iter().enumerate() {
            if leaf {
                relabel[v] = next_leaf;
                next_leaf += 1;
            } else {
                relabel[v] = next_internal;
                next_internal += 1;
            }
        }
        let mut out = vec![None; parent.len()];
        for (v, p) in parent.iter().enumerate() {
            out[relabel[v]] = p.map(|p| relabel[p]);
        }
        Self::new(leaf_count, out).expect("random tree is valid")
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root");
        }
        while a != b {
            a = self.parent[a].expect("non-root");
            b = self.parent[b].expect("non-root");
        }
        a
    }

    /// Σ over edges of `|leaves(lca(i, j))|`, unit weights.
    pub fn cost(&self, edges: &[(usize, usize)]) -> Result<f64> {
        let mut total = 0usize;
        for &(a, b) in edges {
            if a >= self.leaf_count || b >= self.leaf_count {
                return Err(Error::InvalidParameter(format!("edge ({a}, {b}) is not between leaves")));
            }
            total += self.leaves_below[self.lca(a, b)];
        }
        Ok(total as f64)
    }
}

/// Edges of the train graph as leaf pairs (users first, then items), the
/// numbering [`HierarchyTree::build`] uses.
pub fn graph_edges(graph: &InteractionGraph) -> Vec<(usize, usize)> {
    let users = graph.user_count();
    graph
        .train_pairs()
        .into_iter()
        .map(|(u, i)| (u as usize, users + i as usize))
        .collect()
}

/// Dasgupta cost of a hierarchy over the train interactions.
pub fn dasgupta_cost(tree: &HierarchyTree, graph: &InteractionGraph) -> Result<f64> {
    if tree.leaves().len() != graph.node_count() {
        return Err(Error::Dimension {
            expected: graph.node_count(),
            found: tree.leaves().len(),
        });
    }
    RootedTree::from_hierarchy(tree).cost(&graph_edges(graph))
}
