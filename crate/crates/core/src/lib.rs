//! Hyperbolic collaborative filtering on the Lorentz model, with hierarchical
//! clustering of the learned embeddings and an explore/exploit retrieval policy.

pub mod data;
pub mod error;
pub mod hiercluster;
pub mod manifold;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod recommend;
pub mod rng;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
