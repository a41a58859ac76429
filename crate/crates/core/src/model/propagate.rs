//! Tangent-space message passing at the origin, forward and backward.
//!
//! Every node is pulled back to `T_o` with `log_o`, aggregated linearly
//! (`z^l = z^{l-1} + mean of neighbours' z^{l-1}`), the layers are summed,
//! and the sum is pushed forward with `exp_o`. Tangent vectors at the origin
//! have a zero time-like coordinate, so they are stored as their `n`
//! space-like coordinates only.

use crate::data::InteractionGraph;
use crate::manifold::MAX_TANGENT_NORM;
use crate::model::EmbeddingTable;

const SERIES_CUTOFF: f64 = 1e-3;

/// `sinh(r)/r` and `(r cosh r - sinh r)/r^3`.
fn sinhc_terms(r: f64) -> (f64, f64) {
    if r < SERIES_CUTOFF {
        let r2 = r * r;
        (1.0 + r2 / 6.0, 1.0 / 3.0 + r2 / 30.0)
    } else {
        let (s, c) = (r.sinh(), r.cosh());
        (s / r, (r * c - s) / (r * r * r))
    }
}

/// `asinh(r)/r` and `(r/sqrt(1+r^2) - asinh r)/r^3`.
fn asinhc_terms(r: f64) -> (f64, f64) {
    if r < SERIES_CUTOFF {
        let r2 = r * r;
        (1.0 - r2 / 6.0, -1.0 / 3.0 + 0.3 * r2)
    } else {
        let a = r.asinh();
        (a / r, (r / (1.0 + r * r).sqrt() - a) / (r * r * r))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `exp_o((0, z))` written into `out` (length `z.len() + 1`), with the
/// tangent norm clipped at [`MAX_TANGENT_NORM`].
pub fn exp_origin(z: &[f64], out: &mut [f64]) {
    let r = norm(z);
    let (scale, r_eff) = if r > MAX_TANGENT_NORM {
        (MAX_TANGENT_NORM / r, MAX_TANGENT_NORM)
    } else {
        (1.0, r)
    };
    let (f, _) = sinhc_terms(r_eff);
    let mut s2 = 0.0;
    for (o, zi) in out[1..].iter_mut().zip(z) {
        *o = f * scale * zi;
        s2 += *o * *o;
    }
    out[0] = (1.0 + s2).sqrt();
}

/// Accumulate the vector-Jacobian product of [`exp_origin`] into `g_z`.
pub fn exp_origin_vjp(z: &[f64], g_out: &[f64], g_z: &mut [f64]) {
    let r = norm(z);
    if r > MAX_TANGENT_NORM {
        let c = MAX_TANGENT_NORM / r;
        let u: Vec<f64> = z.iter().map(|v| c * v).collect();
        let mut g_u = vec![0.0; z.len()];
        exp_origin_vjp(&u, g_out, &mut g_u);
        let along: f64 = g_u.iter().zip(z).map(|(g, zi)| g * zi).sum::<f64>() / r;
        for ((gz, gu), zi) in g_z.iter_mut().zip(&g_u).zip(z) {
            *gz += c * (gu - along * zi / r);
        }
        return;
    }
    let (f, fp_over_r) = sinhc_terms(r);
    let gs = &g_out[1..];
    let z_dot_g: f64 = z.iter().zip(gs).map(|(a, b)| a * b).sum();
    // d out_0 / dz = sinh(r) z / r = f z
    let radial = g_out[0] * f + fp_over_r * z_dot_g;
    for ((gz, zi), gi) in g_z.iter_mut().zip(z).zip(gs) {
        *gz += f * gi + radial * zi;
    }
}

/// `log_o(h)` as space-like coordinates, written into `out` (length `h.len() - 1`).
///
/// Uses `asinh(|h_s|)` for the distance, which agrees with `arcosh(h_0)` on
/// the hyperboloid and stays accurate near the origin.
pub fn log_origin(h: &[f64], out: &mut [f64]) {
    let hs = &h[1..];
    let (f, _) = asinhc_terms(norm(hs));
    out.iter_mut().zip(hs).for_each(|(o, v)| *o = f * v);
}

/// Accumulate the vector-Jacobian product of [`log_origin`] into `g_h`
/// (ambient, length `h.len()`; coordinate 0 receives nothing).
pub fn log_origin_vjp(h: &[f64], g_out: &[f64], g_h: &mut [f64]) {
    let hs = &h[1..];
    let (f, fp_over_r) = asinhc_terms(norm(hs));
    let hs_dot_g: f64 = hs.iter().zip(g_out).map(|(a, b)| a * b).sum();
    for ((gh, hi), gi) in g_h[1..].iter_mut().zip(hs).zip(g_out) {
        *gh += f * gi + fp_over_r * hs_dot_g * hi;
    }
}

/// Forward intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Propagation {
    layers: usize,
    /// Summed tangent vectors `z = Σ_l z^l`, `n` per node.
    pub tangent: Vec<f64>,
    /// Final hyperbolic embeddings `h = exp_o(z)`.
    pub points: EmbeddingTable,
}

impl Propagation {
    pub fn layers(&self) -> usize {
        self.layers
    }
}

/// `out = (I + P) z`, `P` the row-normalized bipartite adjacency. Isolated
/// nodes get no neighbour term.
fn aggregate(graph: &InteractionGraph, dim: usize, z: &[f64], out: &mut [f64]) {
    let users = graph.user_count();
    out.copy_from_slice(z);
    for u in 0..users {
        let nbrs = graph.train_items(u as u32);
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let row = u * dim;
        for &i in nbrs {
            let col = (users + i as usize) * dim;
            for k in 0..dim {
                out[row + k] += w * z[col + k];
            }
        }
    }
    for i in 0..graph.item_count() {
        let nbrs = graph.item_users(i as u32);
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let row = (users + i) * dim;
        for &u in nbrs {
            let col = u as usize * dim;
            for k in 0..dim {
                out[row + k] += w * z[col + k];
            }
        }
    }
}

/// `out = (I + P)^T g`.
fn aggregate_transpose(graph: &InteractionGraph, dim: usize, g: &[f64], out: &mut [f64]) {
    let users = graph.user_count();
    out.copy_from_slice(g);
    for u in 0..users {
        let nbrs = graph.train_items(u as u32);
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let src = u * dim;
        for &i in nbrs {
            let dst = (users + i as usize) * dim;
            for k in 0..dim {
                out[dst + k] += w * g[src + k];
            }
        }
    }
    for i in 0..graph.item_count() {
        let nbrs = graph.item_users(i as u32);
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let src = (users + i) * dim;
        for &u in nbrs {
            let dst = u as usize * dim;
            for k in 0..dim {
                out[dst + k] += w * g[src + k];
            }
        }
    }
}

/// Run `layers` rounds of message passing over `graph` starting from `table`.
pub fn propagate(table: &EmbeddingTable, graph: &InteractionGraph, layers: usize) -> Propagation {
    assert_eq!(table.user_count(), graph.user_count());
    assert_eq!(table.item_count(), graph.item_count());
    let n = table.dim();
    let nodes = table.node_count();
    let mut cur = vec![0.0; nodes * n];
    for (idx, chunk) in cur.chunks_mut(n).enumerate() {
        log_origin(table.node(idx), chunk);
    }
    let mut total = cur.clone();
    let mut next = vec![0.0; nodes * n];
    for _ in 0..layers {
        aggregate(graph, n, &cur, &mut next);
        total.iter_mut().zip(&next).for_each(|(t, v)| *t += v);
        std::mem::swap(&mut cur, &mut next);
    }
    let mut points = EmbeddingTable::at_origin(table.user_count(), table.item_count(), n);
    for (idx, z) in total.chunks(n).enumerate() {
        exp_origin(z, points.node_mut(idx));
    }
    Propagation {
        layers,
        tangent: total,
        points,
    }
}

/// Pull an ambient gradient on the propagated points back to an ambient
/// gradient on the table the propagation started from.
pub fn propagate_backward(
    table: &EmbeddingTable,
    graph: &InteractionGraph,
    forward: &Propagation,
    grad_points: &[f64],
) -> Vec<f64> {
    let n = table.dim();
    let stride = n + 1;
    let nodes = table.node_count();
    assert_eq!(grad_points.len(), nodes * stride);
    let mut g_total = vec![0.0; nodes * n];
    for idx in 0..nodes {
        let z = &forward.tangent[idx * n..(idx + 1) * n];
        let go = &grad_points[idx * stride..(idx + 1) * stride];
        if go.iter().all(|v| *v == 0.0) {
            continue;
        }
        exp_origin_vjp(z, go, &mut g_total[idx * n..(idx + 1) * n]);
    }
    // total = Σ_{l=0..L} A^l z0  =>  g_z0 = Σ_l (A^T)^l g, evaluated Horner-style
    let mut g = g_total.clone();
    let mut tmp = vec![0.0; nodes * n];
    for _ in 0..forward.layers {
        aggregate_transpose(graph, n, &g, &mut tmp);
        for (t, gt) in tmp.iter_mut().zip(&g_total) {
            *t += gt;
        }
        std::mem::swap(&mut g, &mut tmp);
    }
    let mut g_table = vec![0.0; nodes * stride];
    for idx in 0..nodes {
        let gz = &g[idx * n..(idx + 1) * n];
        if gz.iter().all(|v| *v == 0.0) {
            continue;
        }
        log_origin_vjp(table.node(idx), gz, &mut g_table[idx * stride..(idx + 1) * stride]);
    }
    g_table
}
