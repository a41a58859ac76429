//! Riemannian SGD for hyperboloid points and Adam for Euclidean parameters.

use crate::error::{Error, Result};
use crate::manifold::Hyperboloid;
use crate::model::EmbeddingTable;

pub const DEFAULT_LR: f64 = 1e-2;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-3;

fn check_finite(g: &[f64], what: &str) -> Result<()> {
    match g.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::Numerical(format!("non-finite {what} gradient at index {k}"))),
        None => Ok(()),
    }
}

/// Riemannian SGD with an exponential-map retraction.
///
/// Weight decay pulls each updated point toward the origin along the
/// geodesic: the term `wd · (-log_x(o))` is added to the Riemannian gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rsgd {
    pub lr: f64,
    pub weight_decay: f64,
    manifold: Hyperboloid,
}

impl Rsgd {
    pub fn new(lr: f64, weight_decay: f64) -> Result<Self> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {lr}")));
        }
        if !(weight_decay.is_finite() && weight_decay >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight decay must be nonnegative, got {weight_decay}"
            )));
        }
        Ok(Self {
            lr,
            weight_decay,
            manifold: Hyperboloid::default(),
        })
    }

    fn update(&self, x: &mut [f64], euclidean: &[f64]) {
        let m = &self.manifold;
        let mut g = m.riemannian_grad(x, euclidean);
        if self.weight_decay > 0.0 {
            let to_origin = m.log_map(x, &m.origin(x.len() - 1));
            g.iter_mut()
                .zip(&to_origin)
                .for_each(|(gi, li)| *gi -= self.weight_decay * li);
        }
        let step: Vec<f64> = g.iter().map(|v| -self.lr * v).collect();
        let next = m.exp_map(x, &step);
        x.copy_from_slice(&next);
    }

    /// One step on a single point. A zero gradient leaves the point untouched.
    pub fn step(&self, x: &mut [f64], euclidean: &[f64]) -> Result<()> {
        Error::check_dim(x.len(), euclidean.len())?;
        check_finite(euclidean, "point")?;
        if euclidean.iter().any(|v| *v != 0.0) {
            self.update(x, euclidean);
        }
        Ok(())
    }

    /// Step every row of `table` whose gradient is nonzero. The whole
    /// gradient is validated before any row is touched. Returns the number of
    /// rows updated.
    pub fn step_table(&self, table: &mut EmbeddingTable, grad: &[f64]) -> Result<usize> {
        Error::check_dim(table.as_slice().len(), grad.len())?;
        check_finite(grad, "embedding")?;
        let stride = table.stride();
        let mut updated = 0;
        for (idx, g) in grad.chunks(stride).enumerate() {
            if g.iter().any(|v| *v != 0.0) {
                self.update(table.node_mut(idx), g);
                updated += 1;
            }
        }
        Ok(updated)
    }
}

/// Adam with bias correction and L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64, weight_decay: f64) -> Result<Self> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        Error::check_dim(self.m.len(), params.len())?;
        Error::check_dim(self.m.len(), grads.len())?;
        check_finite(grads, "adapter")?;
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grads[k] + self.weight_decay * params[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
