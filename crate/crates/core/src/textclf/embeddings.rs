//! Dense embedding sets and their line-JSON interchange file.
//!
//! Line 1 is a header `{"dim": D, "encoder": "..."}`; each following line is
//! `{"id": "...", "v": [D reals]}`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, Featurizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub id: String,
    #[serde(rename = "v")]
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn features(&self) -> FeatureVector {
        FeatureVector::from_dense(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub dim: usize,
    pub encoder: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub header: EmbeddingHeader,
    pub vectors: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, encoder: impl Into<String>) -> Self {
        EmbeddingStore {
            header: EmbeddingHeader {
                dim,
                encoder: encoder.into(),
            },
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&EmbeddingVector> {
        self.vectors
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    pub fn insert(&mut self, v: EmbeddingVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.dim(),
            });
        }
        if let Some(bad) = v.values.iter().find(|x| !x.is_finite()) {
            return Err(Error::malformed(
                "embeddings",
                format!("id `{}`: non-finite value {bad}", v.id),
            ));
        }
        if self.vectors.contains_key(&v.id) {
            return Err(Error::DuplicateId(v.id));
        }
        self.vectors.insert(v.id.clone(), v);
        Ok(())
    }

    /// Merges another set of the same width; ids must stay unique.
    pub fn extend(&mut self, other: EmbeddingStore) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        for v in other.vectors.into_values() {
            self.insert(v)?;
        }
        Ok(())
    }

    /// Dense hashed char-n-gram embeddings, used when no external encoder
    /// output is supplied.
    pub fn hashed<'a>(
        featurizer: &Featurizer,
        items: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut store = EmbeddingStore::new(
            featurizer.dim,
            format!(
                "hashed-char-ngram-{}-{}",
                featurizer.ngram_min, featurizer.ngram_max
            ),
        );
        for (id, text) in items {
            let fv = featurizer.featurize(text);
            let mut values = vec![0.0; featurizer.dim];
            for (j, v) in fv.iter() {
                values[j] = v;
            }
            store.insert(EmbeddingVector {
                id: id.to_string(),
                values,
            })?;
        }
        Ok(store)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = serde_json::to_string(&self.header).expect("header serializes");
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for v in self.vectors.values() {
            let line = serde_json::to_string(v).expect("vector serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn parse(reader: impl BufRead, origin: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header_line = loop {
            match lines.next() {
                None => return Err(Error::malformed(origin, "missing header line")),
                Some((_, line)) => {
                    let line = line.map_err(|e| Error::malformed(origin, e))?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
            }
        };
        let header: EmbeddingHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::malformed(origin, format!("header: {e}")))?;
        if header.dim == 0 {
            return Err(Error::malformed(origin, "header dim must be positive"));
        }
        let mut store = EmbeddingStore {
            header,
            vectors: BTreeMap::new(),
        };
        for (n, line) in lines {
            let line = line.map_err(|e| Error::malformed(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: EmbeddingVector = serde_json::from_str(&line)
                .map_err(|e| Error::malformed(origin, format!("line {}: {e}", n + 1)))?;
            store.insert(v)?;
        }
        Ok(store)
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::parse(BufReader::new(file), &path.display().to_string())
}
