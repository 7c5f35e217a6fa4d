use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::featurize::{Featurizer, SparseVec};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const DEFAULT_EMBED_DIM: usize = 256;

const CHECKPOINT_FORMAT: &str = "papertag-scorer";
const CHECKPOINT_VERSION: u32 = 1;

/// Dense embedding; unit norm, or all zeros for empty text.
pub type Embedding = Vec<f64>;

/// Instrumented call counters for the two scoring paths.
#[derive(Debug, Default)]
pub struct CallCounts {
    bi_embed: AtomicU64,
    cross_score: AtomicU64,
}

impl CallCounts {
    pub fn bi_embeds(&self) -> u64 {
        self.bi_embed.load(Ordering::Relaxed)
    }

    pub fn cross_scores(&self) -> u64 {
        self.cross_score.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.bi_embed.store(0, Ordering::Relaxed);
        self.cross_score.store(0, Ordering::Relaxed);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerModel {
    pub featurizer: Featurizer,
    pub embed_dim: usize,
    /// `featurizer.dim × embed_dim`, row-major (one row per hash bucket).
    pub projection: Vec<f64>,
    /// Scoring head over the `2 · embed_dim` pair features.
    pub head: Vec<f64>,
    pub train_config: TrainConfig,
    #[serde(skip)]
    counts: Arc<CallCounts>,
}

/// Gradient of the loss. Projection rows are sparse since only hash
/// buckets present in the tuple texts receive gradient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradient {
    pub projection_rows: BTreeMap<usize, Vec<f64>>,
    pub head: Vec<f64>,
}

impl Gradient {
    fn zeros(embed_dim: usize) -> Self {
        Gradient {
            projection_rows: BTreeMap::new(),
            head: vec![0.0; 2 * embed_dim],
        }
    }

    /// Adds `other` into `self`.
    pub fn accumulate(&mut self, other: &Gradient) {
        if self.head.is_empty() {
            self.head = vec![0.0; other.head.len()];
        }
        for (a, b) in self.head.iter_mut().zip(&other.head) {
            *a += b;
        }
        for (row, values) in &other.projection_rows {
            let entry = self
                .projection_rows
                .entry(*row)
                .or_insert_with(|| vec![0.0; values.len()]);
            for (a, b) in entry.iter_mut().zip(values) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.head.iter_mut().for_each(|v| *v *= c);
        for values in self.projection_rows.values_mut() {
            values.iter_mut().for_each(|v| *v *= c);
        }
    }

    /// Gradient entry at flat parameter index (projection first, then head).
    pub fn get(&self, flat: usize, embed_dim: usize, hash_dim: usize) -> f64 {
        let proj_len = hash_dim * embed_dim;
        if flat >= proj_len {
            return self.head[flat - proj_len];
        }
        let (row, col) = (flat / embed_dim, flat % embed_dim);
        self.projection_rows.get(&row).map_or(0.0, |r| r[col])
    }

    pub fn is_zero(&self) -> bool {
        self.head.iter().all(|&v| v == 0.0)
            && self.projection_rows.values().flatten().all(|&v| v == 0.0)
    }
}

/// `[u ⊙ v ; |u − v|]`.
pub fn pair_features(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * u.len());
    out.extend(u.iter().zip(v).map(|(a, b)| a * b));
    out.extend(u.iter().zip(v).map(|(a, b)| (a - b).abs()));
    out
}

/// Cosine similarity; 0 when either operand is the zero vector.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−log(e^pos / (e^pos + e^neg))` evaluated as `softplus(neg − pos)`.
pub fn contrastive_loss(s_pos: f64, s_neg: f64) -> f64 {
    softplus(s_neg - s_pos)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Forward state of one text: sparse features, raw projection, its norm,
/// and the normalized embedding.
struct Encoded {
    features: SparseVec,
    norm: f64,
    embedding: Vec<f64>,
}

impl ScorerModel {
    /// Projection drawn uniformly from `[-1, 1] / sqrt(hash_dim)`, head zero.
    pub fn new(featurizer: Featurizer, embed_dim: usize, train_config: TrainConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (featurizer.dim as f64).sqrt();
        let projection = (0..featurizer.dim * embed_dim)
            .map(|_| rng.gen_range(-1.0..=1.0) * scale)
            .collect();
        ScorerModel {
            featurizer,
            embed_dim,
            projection,
            head: vec![0.0; 2 * embed_dim],
            train_config,
            counts: Arc::default(),
        }
    }

    pub fn hash_dim(&self) -> usize {
        self.featurizer.dim
    }

    pub fn counts(&self) -> &CallCounts {
        &self.counts
    }

    pub fn param_count(&self) -> usize {
        self.projection.len() + self.head.len()
    }

    pub fn param(&self, flat: usize) -> f64 {
        match flat.checked_sub(self.projection.len()) {
            Some(h) => self.head[h],
            None => self.projection[flat],
        }
    }

    pub fn set_param(&mut self, flat: usize, value: f64) {
        match flat.checked_sub(self.projection.len()) {
            Some(h) => self.head[h] = value,
            None => self.projection[flat] = value,
        }
    }

    fn encode_features(&self, features: SparseVec) -> Encoded {
        let e = self.embed_dim;
        let mut z = vec![0.0; e];
        for &(i, f) in &features {
            let row = &self.projection[i * e..(i + 1) * e];
            for (acc, w) in z.iter_mut().zip(row) {
                *acc += f * w;
            }
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            z.iter_mut().for_each(|v| *v /= norm);
        }
        Encoded {
            features,
            norm,
            embedding: z,
        }
    }

    fn encode(&self, text: &str) -> Encoded {
        self.encode_features(self.featurizer.featurize_sparse(text))
    }

    pub(crate) fn embed_uncounted(&self, text: &str) -> Embedding {
        self.encode(text).embedding
    }

    /// Independent encoding of one text: normalized projection of its
    /// hashed features.
    pub fn bi_embed(&self, text: &str) -> Embedding {
        self.counts.bi_embed.fetch_add(1, Ordering::Relaxed);
        self.embed_uncounted(text)
    }

    /// Like [`ScorerModel::bi_embed`], returning `external` when given.
    pub fn bi_embed_or(&self, text: &str, external: Option<&Embedding>) -> Embedding {
        match external {
            Some(v) => {
                self.counts.bi_embed.fetch_add(1, Ordering::Relaxed);
                v.clone()
            }
            None => self.bi_embed(text),
        }
    }

    /// Head applied to the pair features of two embeddings.
    pub fn score_embeddings(&self, u: &[f64], v: &[f64]) -> f64 {
        let e = self.embed_dim;
        let (w_prod, w_diff) = self.head.split_at(e);
        let mut s = 0.0;
        for j in 0..e {
            s += w_prod[j] * (u[j] * v[j]) + w_diff[j] * (u[j] - v[j]).abs();
        }
        s
    }

    /// Joint score of a text pair.
    pub fn cross_score(&self, s: &str, t: &str) -> f64 {
        self.cross_score_with(s, t, None, None)
    }

    pub fn cross_score_with(
        &self,
        s: &str,
        t: &str,
        external_s: Option<&Embedding>,
        external_t: Option<&Embedding>,
    ) -> f64 {
        self.counts.cross_score.fetch_add(1, Ordering::Relaxed);
        let u = external_s.cloned().unwrap_or_else(|| self.embed_uncounted(s));
        let v = external_t.cloned().unwrap_or_else(|| self.embed_uncounted(t));
        self.score_embeddings(&u, &v)
    }

    /// Contrastive loss of one (anchor, positive, negative) text tuple.
    pub fn tuple_loss(&self, anchor: &str, positive: &str, negative: &str) -> f64 {
        let a = self.embed_uncounted(anchor);
        let p = self.embed_uncounted(positive);
        let n = self.embed_uncounted(negative);
        contrastive_loss(self.score_embeddings(&a, &p), self.score_embeddings(&a, &n))
    }

    /// Loss and exact gradient for one tuple.
    pub fn loss_gradient(&self, anchor: &str, positive: &str, negative: &str) -> (f64, Gradient) {
        let a = self.encode(anchor);
        let p = self.encode(positive);
        let n = self.encode(negative);
        self.loss_gradient_encoded(&a, &p, &n)
    }

    pub(crate) fn loss_gradient_features(
        &self,
        anchor: &SparseVec,
        positive: &SparseVec,
        negative: &SparseVec,
    ) -> (f64, Gradient) {
        let a = self.encode_features(anchor.clone());
        let p = self.encode_features(positive.clone());
        let n = self.encode_features(negative.clone());
        self.loss_gradient_encoded(&a, &p, &n)
    }

    fn loss_gradient_encoded(&self, a: &Encoded, p: &Encoded, n: &Encoded) -> (f64, Gradient) {
        let e = self.embed_dim;
        let (ha, hp, hn) = (&a.embedding, &p.embedding, &n.embedding);
        let s_pos = self.score_embeddings(ha, hp);
        let s_neg = self.score_embeddings(ha, hn);
        let loss = contrastive_loss(s_pos, s_neg);
        // dL/ds_neg = g, dL/ds_pos = -g
        let g = sigmoid(s_neg - s_pos);

        let mut grad = Gradient::zeros(e);
        let psi_pos = pair_features(ha, hp);
        let psi_neg = pair_features(ha, hn);
        for k in 0..2 * e {
            grad.head[k] = g * (psi_neg[k] - psi_pos[k]);
        }

        let (w_prod, w_diff) = self.head.split_at(e);
        let mut d_a = vec![0.0; e];
        let mut d_p = vec![0.0; e];
        let mut d_n = vec![0.0; e];
        for j in 0..e {
            let sp = sign(ha[j] - hp[j]);
            let sn = sign(ha[j] - hn[j]);
            d_a[j] = -g * (w_prod[j] * hp[j] + w_diff[j] * sp) + g * (w_prod[j] * hn[j] + w_diff[j] * sn);
            d_p[j] = -g * (w_prod[j] * ha[j] - w_diff[j] * sp);
            d_n[j] = g * (w_prod[j] * ha[j] - w_diff[j] * sn);
        }

        for (enc, d_h) in [(a, d_a), (p, d_p), (n, d_n)] {
            if enc.norm == 0.0 {
                continue;
            }
            // back through h = z / |z|
            let h = &enc.embedding;
            let dot: f64 = h.iter().zip(&d_h).map(|(x, y)| x * y).sum();
            let d_z: Vec<f64> = (0..e).map(|j| (d_h[j] - h[j] * dot) / enc.norm).collect();
            for &(i, f) in &enc.features {
                let row = grad
                    .projection_rows
                    .entry(i)
                    .or_insert_with(|| vec![0.0; e]);
                for (acc, dz) in row.iter_mut().zip(&d_z) {
                    *acc += f * dz;
                }
            }
        }
        (loss, grad)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let ckpt = CheckpointRef {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            model: self,
        };
        serde_json::to_writer(&mut out, &ckpt).map_err(|e| Error::Checkpoint(e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported scorer checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let m = ckpt.model;
        if m.projection.len() != m.featurizer.dim * m.embed_dim || m.head.len() != 2 * m.embed_dim {
            return Err(Error::Checkpoint("parameter shapes do not match dimensions".into()));
        }
        Ok(m)
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a ScorerModel,
}

#[derive(Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: ScorerModel,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(seed: u64) -> ScorerModel {
        let f = Featurizer {
            dim: 64,
            ..Featurizer::default()
        };
        ScorerModel::new(f, 8, TrainConfig::default(), seed)
    }

    fn randomize_head(m: &mut ScorerModel, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut m.head {
            *w = rng.gen_range(-1.0..1.0);
        }
    }

    #[test]
    fn loss_values() {
        assert_eq!(contrastive_loss(0.3, 0.3), std::f64::consts::LN_2);
        assert!((contrastive_loss(1.0, 0.0) - (-1.0f64).exp().ln_1p()).abs() < 1e-15);
        assert!((contrastive_loss(1.0, 0.0) - 0.3133).abs() < 1e-4);
        let tiny = contrastive_loss(50.0, -50.0);
        assert!(tiny.is_finite() && tiny >= 0.0 && tiny < 1e-40);
        assert!((contrastive_loss(-50.0, 50.0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_head_scores_zero() {
        let m = small_model(1);
        assert_eq!(m.cross_score("graph neural networks", "protein folding"), 0.0);
    }

    #[test]
    fn identity_projection_gives_basis_embedding() {
        let f = Featurizer {
            dim: 16,
            ..Featurizer::default()
        };
        let mut m = ScorerModel::new(f, 4, TrainConfig::default(), 0);
        m.projection.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..4 {
            m.projection[r * 4 + r] = 1.0;
        }
        // find a single-token text landing in bucket 0..4 with no bigram
        let word = (0..1000)
            .map(|i| format!("w{i}"))
            .find(|w| {
                let s = m.featurizer.featurize_sparse(w);
                s.len() == 1 && s[0].0 < 4
            })
            .unwrap();
        let (bucket, sign) = m.featurizer.featurize_sparse(&word)[0];
        let mut expected = vec![0.0; 4];
        expected[bucket] = sign;
        assert_eq!(m.bi_embed(&word), expected);
    }

    #[test]
    fn embeddings_are_unit_or_zero() {
        let m = small_model(2);
        let e = m.bi_embed("some words here");
        let n: f64 = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(m.bi_embed("").iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cross_score_is_symmetric_and_matches_formula() {
        let mut m = small_model(3);
        randomize_head(&mut m, 4);
        let (s, t) = ("alpha beta gamma", "beta delta");
        let a = m.cross_score(s, t);
        assert_eq!(a, m.cross_score(t, s));
        let u = m.bi_embed(s);
        let v = m.bi_embed(t);
        let direct: f64 = m.head.iter().zip(pair_features(&u, &v)).map(|(w, x)| w * x).sum();
        assert!((a - direct).abs() < 1e-12);
    }

    #[test]
    fn symmetric_tuple_has_zero_head_gradient() {
        let mut m = small_model(5);
        randomize_head(&mut m, 6);
        let (loss, g) = m.loss_gradient("anchor text", "same other", "same other");
        assert_eq!(loss, std::f64::consts::LN_2);
        assert!(g.head.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_texts_give_zero_gradient() {
        let mut m = small_model(7);
        randomize_head(&mut m, 8);
        let (_, g) = m.loss_gradient("", "", "");
        assert!(g.is_zero());
    }

    #[test]
    fn counters_track_calls() {
        let m = small_model(9);
        m.bi_embed("a");
        m.bi_embed("b");
        m.cross_score("a", "b");
        assert_eq!(m.counts().bi_embeds(), 2);
        assert_eq!(m.counts().cross_scores(), 1);
        m.counts().reset();
        assert_eq!(m.counts().bi_embeds(), 0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = small_model(10);
        randomize_head(&mut m, 11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let back = ScorerModel::load(&path).unwrap();
        assert_eq!(back.projection, m.projection);
        assert_eq!(back.head, m.head);
        assert_eq!(back.featurizer, m.featurizer);
    }
}
