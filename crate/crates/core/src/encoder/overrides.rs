use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::model::Embedding;
use crate::error::{Error, Result};

/// Externally computed embeddings that replace the surrogate encoder for
/// specific ids.
///
/// Keys: a label id for the label text, a paper id for its title+abstract,
/// and `paper_id#leaf_idx` for a paragraph. Vectors are L2-normalized on
/// load.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingOverrides {
    vectors: HashMap<String, Embedding>,
    dim: Option<usize>,
}

#[derive(Deserialize)]
struct Row {
    id: String,
    vector: Vec<f64>,
}

impl EmbeddingOverrides {
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn get(&self, key: &str) -> Option<&Embedding> {
        self.vectors.get(key)
    }

    pub fn paragraph_key(paper_id: &str, leaf: usize) -> String {
        format!("{paper_id}#{leaf}")
    }

    pub fn insert(&mut self, id: String, mut vector: Vec<f64>) -> Result<()> {
        match self.dim {
            Some(d) if d != vector.len() => return Err(Error::DimensionMismatch(d, vector.len())),
            _ => self.dim = Some(vector.len()),
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite embedding for `{id}`")));
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            vector.iter_mut().for_each(|v| *v /= norm);
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    /// Reads either JSON Lines (`{"id": .., "vector": [..]}`) or TSV
    /// (`id<TAB>v1 v2 ...`), chosen by the first non-blank character.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json = content.trim_start().starts_with('{');
        let mut out = EmbeddingOverrides::default();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (id, vector) = if json {
                let row: Row = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
                (row.id, row.vector)
            } else {
                let (id, rest) = line
                    .split_once('\t')
                    .ok_or_else(|| parse_err("expected `id<TAB>values`".into()))?;
                let vector = rest
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|e| parse_err(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                (id.to_string(), vector)
            };
            out.insert(id, vector).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(out)
    }

    /// Fails unless every vector has `dim` entries.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim {
            Some(d) if d != dim => Err(Error::DimensionMismatch(d, dim)),
            _ => Ok(()),
        }
    }
}
