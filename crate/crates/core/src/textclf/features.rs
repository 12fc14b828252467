use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
/// Salt for the shared-bucket namespace used by relation pair features.
const SHARED_SALT: u64 = 0x5348_4152_4544_0001;
const OVERLAP_SALT: u64 = 0x4f56_4552_4c41_5000;

/// Sparse vector over a hashed feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl FeatureVector {
    pub fn empty(dim: usize) -> Self {
        FeatureVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        FeatureVector {
            indices: (0..values.len() as u32).collect(),
            values: values.to_vec(),
            dim: values.len(),
        }
    }

    /// Builds from unsorted `(index, value)` entries, summing duplicates.
    pub fn from_entries(mut entries: Vec<(u32, f64)>, dim: usize) -> Result<Self> {
        entries.sort_unstable_by_key(|e| e.0);
        let mut indices: Vec<u32> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            if i as usize >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: i as usize + 1,
                });
            }
            match indices.last() {
                Some(&last) if last == i => *values.last_mut().unwrap() += v,
                _ => {
                    indices.push(i);
                    values.push(v);
                }
            }
        }
        Ok(FeatureVector {
            indices,
            values,
            dim,
        })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= n);
        }
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .map(|&i| i as usize)
            .zip(self.values.iter().copied())
    }

    pub fn is_well_formed(&self) -> bool {
        self.indices.windows(2).all(|w| w[0] < w[1])
            && self.indices.last().is_none_or(|&i| (i as usize) < self.dim)
            && self.values.iter().all(|v| v.is_finite())
            && self.indices.len() == self.values.len()
    }
}

/// 64-bit FNV-1a followed by the splitmix64 finalizer.
pub fn mix_hash(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix(h)
}

pub fn splitmix(mut h: u64) -> u64 {
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Character n-gram hasher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    pub dim: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer {
            dim: 1 << 18,
            ngram_min: 1,
            ngram_max: 3,
        }
    }
}

impl Featurizer {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > u32::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "feature dim {} out of range",
                self.dim
            )));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max || self.ngram_max > 255 {
            return Err(Error::InvalidConfig(format!(
                "n-gram range {}..={} invalid",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }

    /// Bucket of one n-gram: `mix_hash([n, 0xFF, utf8...]) mod dim`.
    pub fn bucket(&self, ngram: &str, n: usize) -> u32 {
        let mut buf = Vec::with_capacity(ngram.len() + 2);
        buf.push(n as u8);
        buf.push(0xFF);
        buf.extend_from_slice(ngram.as_bytes());
        (mix_hash(&buf) % self.dim as u64) as u32
    }

    pub fn shared_bucket(&self, bucket: u32) -> u32 {
        (splitmix(bucket as u64 ^ SHARED_SALT) % self.dim as u64) as u32
    }

    /// Raw n-gram bucket counts, unnormalized.
    pub fn ngram_entries(&self, text: &str, out: &mut Vec<(u32, f64)>) {
        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(b, _)| b)
            .chain([text.len()])
            .collect();
        let nchars = bounds.len() - 1;
        for n in self.ngram_min..=self.ngram_max {
            if n > nchars {
                break;
            }
            for start in 0..=nchars - n {
                let g = &text[bounds[start]..bounds[start + n]];
                out.push((self.bucket(g, n), 1.0));
            }
        }
    }

    pub fn counts(&self, text: &str) -> FeatureVector {
        let mut entries = Vec::new();
        self.ngram_entries(text, &mut entries);
        FeatureVector::from_entries(entries, self.dim).expect("buckets are reduced mod dim")
    }

    /// ℓ2-normalized n-gram counts.
    pub fn featurize(&self, text: &str) -> FeatureVector {
        self.counts(text).l2_normalized()
    }

    /// Features of a `(proposition, item, description)` pair.
    ///
    /// N-gram counts of each field (no n-gram crosses a field boundary) plus
    /// one indicator per bucket that occurs in both the proposition and the
    /// budget text, re-hashed into a separate namespace; this block is
    /// ℓ2-normalized. Two overlap ratios follow, unnormalized: shared buckets
    /// over budget-side buckets and over proposition-side buckets.
    pub fn pair_features(
        &self,
        prop_counts: &FeatureVector,
        budget_counts: &FeatureVector,
    ) -> FeatureVector {
        let mut entries: Vec<(u32, f64)> =
            Vec::with_capacity(prop_counts.nnz() + budget_counts.nnz() * 2);
        entries.extend(
            prop_counts
                .indices
                .iter()
                .copied()
                .zip(prop_counts.values.iter().copied()),
        );
        entries.extend(
            budget_counts
                .indices
                .iter()
                .copied()
                .zip(budget_counts.values.iter().copied()),
        );
        let (mut i, mut j, mut shared) = (0, 0, 0usize);
        let (a, b) = (&prop_counts.indices, &budget_counts.indices);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    entries.push((self.shared_bucket(a[i]), 1.0));
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let sparse = FeatureVector::from_entries(entries, self.dim)
            .expect("buckets are reduced mod dim")
            .l2_normalized();
        let mut entries: Vec<(u32, f64)> = sparse.iter().map(|(i, v)| (i as u32, v)).collect();
        if shared > 0 {
            entries.push((self.overlap_bucket(0), shared as f64 / b.len() as f64));
            entries.push((self.overlap_bucket(1), shared as f64 / a.len() as f64));
        }
        FeatureVector::from_entries(entries, self.dim).expect("buckets are reduced mod dim")
    }

    pub fn overlap_bucket(&self, which: u64) -> u32 {
        (splitmix(which ^ OVERLAP_SALT) % self.dim as u64) as u32
    }
}
