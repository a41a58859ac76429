use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::data::NodeId;
use crate::error::{Error, Result};

/// Precomputed text-encoder vectors, at most one per node.
///
/// Nodes without a vector are simply absent; the alignment loss skips them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticTable {
    dim: usize,
    vectors: BTreeMap<NodeId, Vec<f64>>,
}

impl SemanticTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, node: NodeId, values: Vec<f64>) -> Result<()> {
        if self.vectors.is_empty() && self.dim == 0 {
            self.dim = values.len();
        }
        Error::check_dim(self.dim, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite entry in vector for {node}")));
        }
        if self.vectors.insert(node, values).is_some() {
            return Err(Error::Format(format!("duplicate vector for {node}")));
        }
        Ok(())
    }

    /// Vector dimension (0 for an empty table).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, node: NodeId) -> Option<&[f64]> {
        self.vectors.get(&node).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.vectors.iter().map(|(k, v)| (*k, v.as_slice()))
    }
}

/// Parse `kind<TAB>id<TAB>v1,v2,...,vd` lines, `kind` being `u` or `i`.
pub fn load_semantic_vectors(path: impl AsRef<Path>) -> Result<SemanticTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut table = SemanticTable::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [kind, id, values] = fields[..] else {
            return Err(Error::parse(path, lineno, "expected `kind<TAB>id<TAB>values`"));
        };
        let id: u32 = id
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad node id `{id}`")))?;
        let node = match kind {
            "u" => NodeId::User(id),
            "i" => NodeId::Item(id),
            _ => return Err(Error::parse(path, lineno, format!("bad node kind `{kind}`"))),
        };
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad value: {e}")))?;
        if !table.is_empty() && values.len() != table.dim() {
            return Err(Error::parse(
                path,
                lineno,
                format!("vector has dimension {}, expected {}", values.len(), table.dim()),
            ));
        }
        table
            .insert(node, values)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    }
    Ok(table)
}

/// Write a table in the format [`load_semantic_vectors`] reads.
pub fn save_semantic_vectors(table: &SemanticTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (node, values) in table.iter() {
        let (kind, id) = match node {
            NodeId::User(u) => ('u', u),
            NodeId::Item(i) => ('i', i),
        };
        let joined: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        out.push_str(&format!("{kind}\t{id}\t{}\n", joined.join(",")));
    }
    fs::write(path, out)?;
    Ok(())
}
