use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::NodeId;
use crate::error::{Error, Result};
use crate::model::propagate::exp_origin;

/// One hyperboloid point of ambient dimension `n + 1` per user and per item.
///
/// Rows are stored contiguously, users first, so node index `u` is user `u`
/// and node index `user_count + i` is item `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    user_count: usize,
    item_count: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// All nodes at the origin.
    pub fn at_origin(user_count: usize, item_count: usize, dim: usize) -> Self {
        let stride = dim + 1;
        let mut data = vec![0.0; (user_count + item_count) * stride];
        data.iter_mut().step_by(stride).for_each(|v| *v = 1.0);
        Self {
            dim,
            user_count,
            item_count,
            data,
        }
    }

    pub fn from_raw(user_count: usize, item_count: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_dim((user_count + item_count) * (dim + 1), data.len())?;
        Ok(Self {
            dim,
            user_count,
            item_count,
            data,
        })
    }

    /// Intrinsic dimension `n`; rows have `n + 1` coordinates.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self) -> usize {
        self.dim + 1
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn node_count(&self) -> usize {
        self.user_count + self.item_count
    }

    pub fn node_index(&self, node: NodeId) -> Result<usize> {
        match node {
            NodeId::User(u) if (u as usize) < self.user_count => Ok(u as usize),
            NodeId::Item(i) if (i as usize) < self.item_count => Ok(self.user_count + i as usize),
            _ => Err(Error::UnknownNode(node.to_string())),
        }
    }

    pub fn node_id(&self, index: usize) -> NodeId {
        if index < self.user_count {
            NodeId::User(index as u32)
        } else {
            NodeId::Item((index - self.user_count) as u32)
        }
    }

    pub fn node(&self, index: usize) -> &[f64] {
        let s = self.stride();
        &self.data[index * s..(index + 1) * s]
    }

    pub fn node_mut(&mut self, index: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[index * s..(index + 1) * s]
    }

    pub fn user(&self, u: u32) -> &[f64] {
        self.node(u as usize)
    }

    pub fn item(&self, i: u32) -> &[f64] {
        self.node(self.user_count + i as usize)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Gaussian draws `e ~ N(0, σ²)` per space-like coordinate, mapped onto the
/// hyperboloid through `exp_o((0, e))`.
pub fn init_embeddings(
    user_count: usize,
    item_count: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<EmbeddingTable> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("embedding dimension must be >= 2, got {dim}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut table = EmbeddingTable::at_origin(user_count, item_count, dim);
    if sigma == 0.0 {
        return Ok(table);
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = vec![0.0; dim];
    for idx in 0..table.node_count() {
        e.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        exp_origin(&e, table.node_mut(idx));
    }
    Ok(table)
}
