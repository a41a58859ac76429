//! The batch objective: margin ranking over propagated embeddings plus the
//! weighted semantic alignment term.
//!
//! Negatives and margins are chosen from the current propagated embeddings
//! and then held fixed while the gradient is taken.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{InteractionGraph, NodeId, SemanticTable};
use crate::error::{Error, Result};
use crate::model::loss::{align_loss_grad, haml_margin, hins_select, margin_loss_grad};
use crate::model::{propagate_backward, Model, Propagation};

/// One training example: a positive pair, its HINS negative, and its margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub align_weight: f64,
    /// Apply alignment to users as well as items.
    pub align_users: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub margin_loss: f64,
    pub align_loss: f64,
    pub total: f64,
    pub align_weight: f64,
    pub pairs: usize,
    /// Batch-touched nodes that had a semantic vector.
    pub aligned: usize,
    /// Batch-touched nodes without one.
    pub skipped: usize,
}

/// Gradients of the batch total with respect to the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Ambient Euclidean gradient per base point, laid out like the table.
    pub table: Vec<f64>,
    pub adapter: Vec<f64>,
}

/// Pick a HINS negative and a HAML margin for every pair.
pub fn sample_triples<R: Rng + ?Sized>(
    graph: &InteractionGraph,
    forward: &Propagation,
    pairs: &[(u32, u32)],
    pool: usize,
    rng: &mut R,
) -> Result<Vec<Triple>> {
    let h = &forward.points;
    pairs
        .iter()
        .map(|&(user, pos)| {
            let neg = hins_select(graph, h, user, pos, pool, rng)?;
            Ok(Triple {
                user,
                pos,
                neg,
                margin: haml_margin(h.user(user), h.item(pos)),
            })
        })
        .collect()
}

fn touched_nodes(triples: &[Triple], align_users: bool) -> BTreeSet<NodeId> {
    let mut nodes = BTreeSet::new();
    for t in triples {
        if align_users {
            nodes.insert(NodeId::User(t.user));
        }
        nodes.insert(NodeId::Item(t.pos));
        nodes.insert(NodeId::Item(t.neg));
    }
    nodes
}

/// Batch loss and its gradients for fixed triples.
pub fn batch_loss_grad(
    model: &Model,
    graph: &InteractionGraph,
    semantic: Option<&SemanticTable>,
    cfg: &LossConfig,
    forward: &Propagation,
    triples: &[Triple],
) -> Result<(LossReport, Gradients)> {
    if triples.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let h = &forward.points;
    let stride = h.stride();
    let users = h.user_count();
    let mut g_points = vec![0.0; h.as_slice().len()];
    let mut report = LossReport {
        align_weight: cfg.align_weight,
        pairs: triples.len(),
        ..Default::default()
    };
    let add = |g: &mut [f64], idx: usize, v: &[f64]| {
        g[idx * stride..(idx + 1) * stride]
            .iter_mut()
            .zip(v)
            .for_each(|(a, b)| *a += b);
    };
    for t in triples {
        let mg = margin_loss_grad(h.user(t.user), h.item(t.pos), h.item(t.neg), t.margin);
        report.margin_loss += mg.loss;
        if mg.loss > 0.0 {
            add(&mut g_points, t.user as usize, &mg.user);
            add(&mut g_points, users + t.pos as usize, &mg.pos);
            add(&mut g_points, users + t.neg as usize, &mg.neg);
        }
    }
    let mut g_adapter = vec![0.0; model.adapter.as_ref().map_or(0, |a| a.params().len())];
    for node in touched_nodes(triples, cfg.align_users) {
        let vec = semantic.and_then(|s| s.get(node));
        match (vec, &model.adapter) {
            (Some(e), Some(adapter)) => {
                let idx = h.node_index(node)?;
                let (l, g) = align_loss_grad(h.node(idx), e, adapter, cfg.align_weight, &mut g_adapter);
                report.align_loss += l;
                report.aligned += 1;
                add(&mut g_points, idx, &g);
            }
            _ => report.skipped += 1,
        }
    }
    report.total = report.margin_loss + cfg.align_weight * report.align_loss;
    if !report.total.is_finite() {
        return Err(Error::Numerical(format!("non-finite batch loss {}", report.total)));
    }
    let g_table = propagate_backward(&model.table, graph, forward, &g_points);
    Ok((
        report,
        Gradients {
            table: g_table,
            adapter: g_adapter,
        },
    ))
}

/// Batch loss for fixed triples. `forward` must be the propagation of `model.table`.
pub fn batch_loss(
    model: &Model,
    semantic: Option<&SemanticTable>,
    cfg: &LossConfig,
    forward: &Propagation,
    triples: &[Triple],
) -> Result<LossReport> {
    if triples.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let h = &forward.points;
    let mut report = LossReport {
        align_weight: cfg.align_weight,
        pairs: triples.len(),
        ..Default::default()
    };
    for t in triples {
        report.margin_loss +=
            crate::model::margin_loss(h.user(t.user), h.item(t.pos), h.item(t.neg), t.margin);
    }
    for node in touched_nodes(triples, cfg.align_users) {
        match (semantic.and_then(|s| s.get(node)), &model.adapter) {
            (Some(e), Some(adapter)) => {
                let idx = h.node_index(node)?;
                report.align_loss += crate::model::align_loss(h.node(idx), e, adapter);
                report.aligned += 1;
            }
            _ => report.skipped += 1,
        }
    }
    report.total = report.margin_loss + cfg.align_weight * report.align_loss;
    Ok(report)
}
