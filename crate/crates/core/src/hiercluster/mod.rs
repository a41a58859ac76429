//! Layered hyperbolic clustering of user and item embeddings.

mod dasgupta;
mod kmeans;
mod tree;

pub use dasgupta::{dasgupta_cost, graph_edges, RootedTree};
pub use kmeans::{
    hyperbolic_distortion, hyperbolic_kmeans, lorentz_sq_dist, KMeansResult, KMEANS_MAX_ITER, KMEANS_TOL,
};
pub use tree::{HierarchyTree, PathStep, TreeNode, BRANCHING};
