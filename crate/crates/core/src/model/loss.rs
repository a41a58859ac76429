use rand::Rng;

use crate::data::InteractionGraph;
use crate::error::{Error, Result};
use crate::manifold::Hyperboloid;
use crate::model::propagate::{exp_origin, exp_origin_vjp};
use crate::model::{Adapter, EmbeddingTable};

/// Floor added to the distance in [`predict`].
pub const PREDICT_EPS: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Preference score `1 / (d(h_u, h_i) + ε)`.
pub fn predict(h_u: &[f64], h_i: &[f64]) -> f64 {
    1.0 / (Hyperboloid::default().dist(h_u, h_i) + PREDICT_EPS)
}

/// Geometry-aware margin `sigmoid(δ)` with
/// `δ = (d²(e_u,o) + d²(e_i,o) - d²(e_u,e_i)) / (e_u0 · e_i0)`.
pub fn haml_margin(e_u: &[f64], e_i: &[f64]) -> f64 {
    let m = Hyperboloid::default();
    let o = m.origin(e_u.len() - 1);
    let du = m.dist(e_u, &o);
    let di = m.dist(e_i, &o);
    let dui = m.dist(e_u, e_i);
    sigmoid((du * du + di * di - dui * dui) / (e_u[0] * e_i[0]))
}

/// Hinge `max(d²(u,i) - d²(u,j) + m, 0)`.
pub fn margin_loss(h_u: &[f64], h_i: &[f64], h_j: &[f64], margin: f64) -> f64 {
    let m = Hyperboloid::default();
    let dp = m.dist(h_u, h_i);
    let dn = m.dist(h_u, h_j);
    (dp * dp - dn * dn + margin).max(0.0)
}

/// Ambient gradients of [`margin_loss`] with the margin held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginGrad {
    pub loss: f64,
    pub user: Vec<f64>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

pub fn margin_loss_grad(h_u: &[f64], h_i: &[f64], h_j: &[f64], margin: f64) -> MarginGrad {
    let m = Hyperboloid::default();
    let (dp2, g_ui) = m.dist_sq_grad(h_u, h_i);
    let (dn2, g_uj) = m.dist_sq_grad(h_u, h_j);
    let raw = dp2 - dn2 + margin;
    let n = h_u.len();
    if raw <= 0.0 {
        return MarginGrad {
            loss: 0.0,
            user: vec![0.0; n],
            pos: vec![0.0; n],
            neg: vec![0.0; n],
        };
    }
    let (_, g_iu) = m.dist_sq_grad(h_i, h_u);
    let (_, g_ju) = m.dist_sq_grad(h_j, h_u);
    MarginGrad {
        loss: raw,
        user: g_ui.iter().zip(&g_uj).map(|(a, b)| a - b).collect(),
        pos: g_iu,
        neg: g_ju.iter().map(|v| -v).collect(),
    }
}

/// Hyperbolic informative negative sampling: draw `pool` items uniformly
/// (with replacement) from the items `user` has not interacted with in
/// training, and return the one closest to the positive item `pos`. Ties go
/// to the lowest item id.
pub fn hins_select<R: Rng + ?Sized>(
    graph: &InteractionGraph,
    points: &EmbeddingTable,
    user: u32,
    pos: u32,
    pool: usize,
    rng: &mut R,
) -> Result<u32> {
    if pool == 0 {
        return Err(Error::InvalidParameter("negative pool size must be >= 1".into()));
    }
    let train = graph.train_items(user);
    let available = graph.item_count() - train.len();
    if available == 0 {
        return Err(Error::Sampling(format!(
            "user {user} has interacted with every item"
        )));
    }
    let m = Hyperboloid::default();
    let anchor = points.item(pos);
    let mut best: Option<(f64, u32)> = None;
    for _ in 0..pool {
        // the r-th item not in the (sorted) train list
        let mut cand = rng.random_range(0..available) as u32;
        for &t in train {
            if t <= cand {
                cand += 1;
            } else {
                break;
            }
        }
        let d = m.dist(points.item(cand), anchor);
        let better = match best {
            None => true,
            Some((bd, bj)) => d < bd || (d == bd && cand < bj),
        };
        if better {
            best = Some((d, cand));
        }
    }
    Ok(best.expect("pool >= 1").1)
}

/// `d²(h, exp_o((0, adapter(e))))`.
pub fn align_loss(h: &[f64], semantic: &[f64], adapter: &Adapter) -> f64 {
    let mut a = vec![0.0; adapter.output()];
    adapter.forward(semantic, &mut a);
    let mut s = vec![0.0; a.len() + 1];
    exp_origin(&a, &mut s);
    let d = Hyperboloid::default().dist(h, &s);
    d * d
}

/// [`align_loss`] plus its ambient gradient in `h` (returned) and its
/// adapter gradient (accumulated into `g_params`), both scaled by `weight`.
pub fn align_loss_grad(
    h: &[f64],
    semantic: &[f64],
    adapter: &Adapter,
    weight: f64,
    g_params: &mut [f64],
) -> (f64, Vec<f64>) {
    let m = Hyperboloid::default();
    let mut a = vec![0.0; adapter.output()];
    let cache = adapter.forward(semantic, &mut a);
    let mut s = vec![0.0; a.len() + 1];
    exp_origin(&a, &mut s);
    let (d2, g_h) = m.dist_sq_grad(h, &s);
    let (_, g_s) = m.dist_sq_grad(&s, h);
    let g_s: Vec<f64> = g_s.iter().map(|v| weight * v).collect();
    let mut g_a = vec![0.0; a.len()];
    exp_origin_vjp(&a, &g_s, &mut g_a);
    adapter.backward(semantic, &cache, &g_a, g_params);
    (d2, g_h.iter().map(|v| weight * v).collect())
}
