//! Hyperbolic graph collaborative filtering.

mod adapter;
mod checkpoint;
mod embedding;
mod loss;
mod objective;
pub mod propagate;

pub use adapter::{Adapter, AdapterCache, ADAPTER_HIDDEN};
pub use checkpoint::{load_checkpoint, load_sidecar, save_checkpoint, sidecar_path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use embedding::{init_embeddings, EmbeddingTable};
pub use loss::{
    align_loss, align_loss_grad, haml_margin, hins_select, margin_loss, margin_loss_grad, predict, sigmoid,
    MarginGrad, PREDICT_EPS,
};
pub use objective::{batch_loss, batch_loss_grad, sample_triples, Gradients, LossConfig, LossReport, Triple};
pub use propagate::{propagate, propagate_backward, Propagation};

/// Embedding dimension `n` (ambient `n + 1`).
pub const DEFAULT_DIM: usize = 50;
/// Standard deviation of the Gaussian initialization.
pub const INIT_SIGMA: f64 = 0.1;
/// Default HINS candidate pool size.
pub const DEFAULT_NEGATIVES: usize = 20;

/// Trainable parameters: base points plus the optional semantic adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub table: EmbeddingTable,
    pub adapter: Option<Adapter>,
}

impl Model {
    pub fn new(table: EmbeddingTable, adapter: Option<Adapter>) -> Self {
        Self { table, adapter }
    }
}
