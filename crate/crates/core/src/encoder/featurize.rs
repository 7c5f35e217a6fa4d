use serde::{Deserialize, Serialize};

use crate::text::tokenize;

pub const DEFAULT_HASH_DIM: usize = 2048;
pub const DEFAULT_MAX_TOKENS: usize = 256;

/// Sparse vector as `(index, value)` pairs sorted by index, no duplicates.
pub type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    pub dim: usize,
    pub seed: u64,
    /// Only the first `max_tokens` tokens of a text are featurized.
    pub max_tokens: usize,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer {
            dim: DEFAULT_HASH_DIM,
            seed: 0x5eed_f00d,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

fn fnv1a(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

impl Featurizer {
    fn bucket(&self, parts: &[&[u8]]) -> (usize, f64) {
        let h = fnv1a(self.seed, parts);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.dim as u64) as usize, sign)
    }

    /// Term-frequency weighted signed hash of unigrams and bigrams,
    /// L2-normalized. Empty text maps to the empty (zero) vector.
    pub fn featurize_sparse(&self, text: &str) -> SparseVec {
        let mut tokens = tokenize(text);
        tokens.truncate(self.max_tokens);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(tokens.len() * 2);
        for (i, tok) in tokens.iter().enumerate() {
            entries.push(self.bucket(&[b"u", tok.as_bytes()]));
            if i + 1 < tokens.len() {
                entries.push(self.bucket(&[b"b", tok.as_bytes(), tokens[i + 1].as_bytes()]));
            }
        }
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: SparseVec = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        let norm = merged.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut merged {
                *v /= norm;
            }
        }
        merged
    }

    /// Dense form of [`Featurizer::featurize_sparse`].
    pub fn featurize(&self, text: &str) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for (i, v) in self.featurize_sparse(text) {
            dense[i] = v;
        }
        dense
    }
}
