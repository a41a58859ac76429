use std::path::Path;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{InteractionGraph, SemanticTable};
use crate::error::{Error, Result};
use crate::metrics::recall_at_k;
use crate::model::{
    batch_loss_grad, init_embeddings, propagate, sample_triples, save_checkpoint, Adapter, LossConfig, Model,
    ADAPTER_HIDDEN, INIT_SIGMA,
};
use crate::optim::{Adam, Rsgd};
use crate::pipeline::TrainConfig;
use crate::recommend::top_k;
use crate::rng::{derive_seed, stream_rng};

/// Share of each user's train items held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.1;
/// Cutoff of the early-stopping metric.
pub const VALIDATION_K: usize = 10;
/// Adam step size for the adapter.
pub const ADAPTER_LR: f64 = 1e-3;

const INIT_STREAM: u64 = 1;
const ADAPTER_STREAM: u64 = 2;
const VALID_STREAM: u64 = 3;
const EPOCH_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub margin_loss: f64,
    pub align_loss: f64,
    pub total: f64,
    pub val_recall: f64,
}

/// Everything written to the checkpoint sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: TrainConfig,
    pub semantic_dim: usize,
    pub init_val_recall: f64,
    pub best_val_recall: f64,
    /// 0 when no epoch beat the initialization.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub meta: CheckpointMeta,
}

/// The model before any update: seeded initialization plus a fresh adapter
/// when alignment is active.
pub fn initial_model(cfg: &TrainConfig, graph: &InteractionGraph, semantic: Option<&SemanticTable>) -> Result<Model> {
    let table = init_embeddings(
        graph.user_count(),
        graph.item_count(),
        cfg.dim,
        INIT_SIGMA,
        derive_seed(cfg.seed, INIT_STREAM),
    )?;
    let adapter = match semantic {
        Some(s) if cfg.align_weight > 0.0 && !s.is_empty() => Some(Adapter::new(
            s.dim(),
            ADAPTER_HIDDEN,
            cfg.dim,
            derive_seed(cfg.seed, ADAPTER_STREAM),
        )?),
        _ => None,
    };
    Ok(Model::new(table, adapter))
}

/// Mean Recall@K of the current model against held-out lists, over users
/// that have any.
pub fn holdout_recall(model: &Model, graph: &InteractionGraph, layers: usize, held: &[Vec<u32>], k: usize) -> Result<f64> {
    let points = propagate(&model.table, graph, layers).points;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (u, items) in held.iter().enumerate() {
        if items.is_empty() {
            continue;
        }
        let rec = top_k(&points, graph, u as u32, k)?.item_ids();
        sum += recall_at_k(&rec, items, k);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Train with early stopping on validation Recall@10.
///
/// A slice of each user's train items is carved off for validation; the
/// rest drives message passing and the loss. The returned model is the best
/// one seen (the initialization counts). When `checkpoint` is given, every
/// new best is written there together with `graph`'s split, so an abort
/// leaves the last good state on disk.
pub fn train(
    cfg: &TrainConfig,
    graph: &InteractionGraph,
    semantic: Option<&SemanticTable>,
    checkpoint: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if graph.train_len() == 0 {
        return Err(Error::InvalidParameter("no train interactions".into()));
    }
    info!("train config: {cfg}");
    let (fit, valid) = graph.carve_validation(VALIDATION_FRACTION, derive_seed(cfg.seed, VALID_STREAM));
    let mut model = initial_model(cfg, graph, semantic)?;
    let loss_cfg = LossConfig {
        align_weight: cfg.align_weight,
        align_users: cfg.align_users,
    };
    let rsgd = Rsgd::new(cfg.lr, cfg.weight_decay)?;
    let mut adam = model
        .adapter
        .as_ref()
        .map(|a| Adam::new(a.params().len(), ADAPTER_LR, cfg.weight_decay))
        .transpose()?;

    let init_recall = holdout_recall(&model, &fit, cfg.layers, &valid, VALIDATION_K)?;
    info!("epoch 0: val recall@{VALIDATION_K} {init_recall:.4}");
    let mut meta = CheckpointMeta {
        config: *cfg,
        semantic_dim: model.adapter.as_ref().map_or(0, Adapter::input),
        init_val_recall: init_recall,
        best_val_recall: init_recall,
        best_epoch: 0,
        epochs_run: 0,
        stopped_early: false,
        history: Vec::new(),
    };
    let mut best = model.clone();
    let persist = |m: &Model, meta: &CheckpointMeta| -> Result<()> {
        if let Some(path) = checkpoint {
            save_checkpoint(path, m, meta)?;
            graph.save_split(split_path(path))?;
        }
        Ok(())
    };
    persist(&best, &meta)?;

    let mut pairs = fit.train_pairs();
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let mut rng = stream_rng(cfg.seed, EPOCH_STREAM + epoch as u64);
        pairs.shuffle(&mut rng);
        let mut rec = EpochRecord {
            epoch,
            margin_loss: 0.0,
            align_loss: 0.0,
            total: 0.0,
            val_recall: 0.0,
        };
        for batch in pairs.chunks(cfg.batch) {
            let forward = propagate(&model.table, &fit, cfg.layers);
            let triples = sample_triples(&fit, &forward, batch, cfg.negatives, &mut rng)?;
            let (report, grads) = batch_loss_grad(&model, &fit, semantic, &loss_cfg, &forward, &triples)
                .inspect_err(|_| {
                    warn!("epoch {epoch}: aborting, best checkpoint is from epoch {}", meta.best_epoch);
                })?;
            rsgd.step_table(&mut model.table, &grads.table)?;
            if let (Some(adapter), Some(opt)) = (model.adapter.as_mut(), adam.as_mut()) {
                opt.step(adapter.params_mut(), &grads.adapter)?;
            }
            rec.margin_loss += report.margin_loss;
            rec.align_loss += report.align_loss;
            rec.total += report.total;
        }
        rec.val_recall = holdout_recall(&model, &fit, cfg.layers, &valid, VALIDATION_K)?;
        debug!(
            "epoch {epoch}: loss {:.4} (margin {:.4}, align {:.4}) val recall@{VALIDATION_K} {:.4}",
            rec.total, rec.margin_loss, rec.align_loss, rec.val_recall
        );
        meta.history.push(rec);
        meta.epochs_run = epoch;
        if rec.val_recall > meta.best_val_recall {
            meta.best_val_recall = rec.val_recall;
            meta.best_epoch = epoch;
            best = model.clone();
            stale = 0;
            persist(&best, &meta)?;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                meta.stopped_early = true;
                info!("early stop at epoch {epoch}, best epoch {}", meta.best_epoch);
                break;
            }
        }
    }
    info!(
        "trained {} epochs; best val recall@{VALIDATION_K} {:.4} at epoch {}",
        meta.epochs_run, meta.best_val_recall, meta.best_epoch
    );
    persist(&best, &meta)?;
    Ok(TrainOutcome { model: best, meta })
}

/// Split file written next to a checkpoint.
pub fn split_path(checkpoint: &Path) -> std::path::PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".split");
    s.into()
}
