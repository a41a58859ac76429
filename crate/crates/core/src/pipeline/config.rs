use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DEFAULT_DIM, DEFAULT_NEGATIVES};
use crate::optim::DEFAULT_WEIGHT_DECAY;

/// Training hyperparameters. Serialized as `key=value` lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub batch: usize,
    /// Message-passing layers.
    pub layers: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// HINS candidate pool size.
    pub negatives: usize,
    pub align_weight: f64,
    /// Epoch cap.
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Align user embeddings as well as item embeddings.
    pub align_users: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            batch: 1024,
            layers: 2,
            lr: 5e-3,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            negatives: DEFAULT_NEGATIVES,
            align_weight: 0.1,
            epochs: 200,
            patience: 10,
            seed: 0,
            align_users: true,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 11] = [
        "dim",
        "batch",
        "layers",
        "lr",
        "weight_decay",
        "negatives",
        "align_weight",
        "epochs",
        "patience",
        "seed",
        "align_users",
    ];

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dim" => self.dim = parse_value(key, value)?,
            "batch" => self.batch = parse_value(key, value)?,
            "layers" => self.layers = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "negatives" => self.negatives = parse_value(key, value)?,
            "align_weight" => self.align_weight = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "align_users" => self.align_users = parse_value(key, value)?,
            _ => return Err(Error::InvalidParameter(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Apply `key=value` lines over `self`. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, idx + 1, "expected key=value"))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::parse(origin, idx + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::default();
        cfg.apply_text(&fs::read_to_string(path)?, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim >= 2),
            ("batch", self.batch > 0),
            ("negatives", self.negatives > 0),
            ("patience", self.patience > 0),
            ("lr", self.lr.is_finite() && self.lr > 0.0),
            ("weight_decay", self.weight_decay.is_finite() && self.weight_decay >= 0.0),
            ("align_weight", self.align_weight.is_finite() && self.align_weight >= 0.0),
        ];
        match positive.iter().find(|(_, ok)| !ok) {
            Some((k, _)) => Err(Error::InvalidParameter(format!("`{k}` out of range in {self}"))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dim={} batch={} layers={} lr={} weight_decay={} negatives={} align_weight={} epochs={} patience={} seed={} align_users={}",
            self.dim,
            self.batch,
            self.layers,
            self.lr,
            self.weight_decay,
            self.negatives,
            self.align_weight,
            self.epochs,
            self.patience,
            self.seed,
            self.align_users
        )
    }
}
