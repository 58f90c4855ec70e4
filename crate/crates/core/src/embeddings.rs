//! Dense vector tables: baseline sentence embeddings of definitions and
//! word vectors of surface forms.
//!
//! On disk a table is TSV: a `dim<TAB>N` header followed by one
//! `id<TAB>v1<TAB>...<TAB>vN` row per vector.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Sentence,
    Word,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    kind: EmbeddingKind,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, kind: EmbeddingKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("embedding dim must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            kind,
            vectors: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                id,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { id });
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicateId { kind: "vector", id });
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    /// Absent ids are errors, never zero vectors.
    pub fn get(&self, id: &str) -> Result<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice).ok_or_else(|| Error::MissingId {
            kind: match self.kind {
                EmbeddingKind::Sentence => "sentence embedding",
                EmbeddingKind::Word => "word vector",
            },
            id: id.to_string(),
        })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Merges another table of the same dim into this one.
    pub fn extend(&mut self, other: EmbeddingTable) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::LengthMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        for (id, v) in other.vectors {
            self.insert(id, v)?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("dim\t{}\n", self.dim);
        for (id, v) in &self.vectors {
            out.push_str(id);
            for x in v {
                write!(out, "\t{x}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_string(path, &self.to_tsv())
    }
}

pub fn load_table(path: &Path, expected_kind: EmbeddingKind) -> Result<EmbeddingTable> {
    let mut lines = io::data_lines(path)?.into_iter();
    let (n, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing `dim<TAB>N` header"))?;
    let dim = match header.split('\t').collect::<Vec<_>>().as_slice() {
        ["dim", d] => d
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::parse(path, n, format!("bad dim: {e}")))?,
        _ => return Err(Error::parse(path, n, "expected `dim<TAB>N` header")),
    };
    let mut table = EmbeddingTable::new(dim, expected_kind)?;
    for (n, line) in lines {
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::parse(path, n, "empty id"));
        }
        let vector = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, n, format!("`{id}`: {e}")))?;
        table.insert(id, vector)?;
    }
    Ok(table)
}

pub fn euclidean_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(squared_distance(u, v).sqrt())
}

pub(crate) fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `1 - cos(u, v)`, in `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}
