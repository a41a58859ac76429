//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! b"HERC" | version: u32 | n: u64 | user_count: u64 | item_count: u64 | κ: f64
//! (user_count + item_count) × (n + 1) f64       base points, users first
//! in: u64 | hidden: u64 | out: u64                adapter shape, all 0 if absent
//! params: f64 × param_count
//! ```
//!
//! A JSON sidecar at `<path>.json` carries the training configuration.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::Hyperboloid;
use crate::model::{Adapter, EmbeddingTable, Model};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HERC";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_checkpoint<S: Serialize>(path: impl AsRef<Path>, model: &Model, sidecar: &S) -> Result<()> {
    let path = path.as_ref();
    let t = &model.table;
    let mut buf = Vec::with_capacity(64 + 8 * t.as_slice().len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [t.dim(), t.user_count(), t.item_count()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(&1.0f64.to_le_bytes());
    for v in t.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let (shape, params): ([usize; 3], &[f64]) = match &model.adapter {
        Some(a) => ([a.input(), a.hidden(), a.output()], a.params()),
        None => ([0; 3], &[]),
    };
    for v in shape {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in params {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)? + "\n")?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let (head, rest) = self
            .bytes
            .split_first_chunk::<N>()
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        self.bytes = rest;
        Ok(*head)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take()?);
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("count {v} out of range")))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .filter(|b| *b <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let (head, rest) = self.bytes.split_at(bytes);
        self.bytes = rest;
        Ok(head
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let mut bytes = Vec::new();
    fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes };
    if &r.take::<4>()? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take()?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let (n, users, items) = (r.u64()?, r.u64()?, r.u64()?);
    let kappa = f64::from_le_bytes(r.take()?);
    if kappa != 1.0 {
        return Err(Error::Checkpoint(format!("unsupported curvature parameter {kappa}")));
    }
    let count = users
        .checked_add(items)
        .and_then(|c| c.checked_mul(n + 1))
        .ok_or_else(|| Error::Checkpoint("table size overflows".into()))?;
    let table = EmbeddingTable::from_raw(users, items, n, r.f64s(count)?)?;
    let m = Hyperboloid::default();
    if let Some(idx) = (0..table.node_count()).find(|&i| !m.contains(table.node(i))) {
        return Err(Error::Checkpoint(format!("node {} is off the hyperboloid", table.node_id(idx))));
    }
    let (a_in, a_hidden, a_out) = (r.u64()?, r.u64()?, r.u64()?);
    let adapter = if a_in == 0 && a_hidden == 0 && a_out == 0 {
        None
    } else {
        let params = r.f64s(Adapter::param_count(a_in, a_hidden, a_out))?;
        Some(Adapter::from_params(a_in, a_hidden, a_out, params)?)
    };
    if !r.bytes.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.bytes.len())));
    }
    Ok(Model::new(table, adapter))
}

pub fn load_sidecar<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(sidecar_path(path.as_ref()))?;
    Ok(serde_json::from_str(&text)?)
}
