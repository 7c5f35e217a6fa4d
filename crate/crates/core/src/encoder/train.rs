use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::featurize::SparseVec;
use super::model::{Gradient, ScorerModel};
use crate::citegraph::{ContrastiveTuple, ParagraphRef};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            warmup_steps: 100,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 8,
            epochs: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn total_steps(&self, tuples: usize) -> usize {
        self.epochs * tuples.div_ceil(self.batch_size.max(1))
    }
}

/// Learning rate at 1-based `step`: linear warmup to the peak over
/// `warmup_steps`, then linear decay to zero at `total_steps`.
pub fn lr_at_step(config: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    let peak = config.learning_rate;
    if step <= config.warmup_steps {
        return peak * step as f64 / config.warmup_steps.max(1) as f64;
    }
    let decay_len = total_steps.saturating_sub(config.warmup_steps);
    if decay_len == 0 {
        return 0.0;
    }
    let remaining = total_steps.saturating_sub(step) as f64;
    peak * remaining / decay_len as f64
}

/// Texts of one tuple, resolved from the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleTexts {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

impl TupleTexts {
    pub fn resolve(corpus: &Corpus, tuple: &ContrastiveTuple) -> Result<Self> {
        Ok(TupleTexts {
            anchor: resolve_ref(corpus, &tuple.anchor)?,
            positive: resolve_ref(corpus, &tuple.positive)?,
            negative: resolve_ref(corpus, &tuple.negative)?,
        })
    }
}

fn resolve_ref(corpus: &Corpus, r: &ParagraphRef) -> Result<String> {
    let paper = corpus
        .get(&r.0)
        .ok_or_else(|| Error::UnknownPaper(r.0.clone()))?;
    paper
        .hierarchy
        .leaves()
        .get(r.1)
        .map(|leaf| leaf.text.clone())
        .ok_or_else(|| Error::InvalidArgument(format!("paper `{}` has no paragraph {}", r.0, r.1)))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ScorerModel,
    /// Mean batch loss before each update.
    pub losses: Vec<f64>,
}

/// Trains on tuples addressed into `corpus`.
pub fn train(model: ScorerModel, tuples: &[ContrastiveTuple], corpus: &Corpus) -> Result<TrainOutcome> {
    let texts = tuples
        .iter()
        .map(|t| TupleTexts::resolve(corpus, t))
        .collect::<Result<Vec<_>>>()?;
    train_texts(model, &texts)
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut ScorerModel, grad: &Gradient, lr: f64, step_index: usize) -> Result<()> {
        let c = model.train_config;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        let e = model.embed_dim;
        let hash_dim = model.hash_dim();
        let decay = 1.0 - lr * c.weight_decay;

        let mut update = |idx: usize, param: &mut f64, g: f64| -> Result<()> {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *param = *param * decay - lr * m_hat / (v_hat.sqrt() + c.epsilon);
            if param.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite {
                    step: step_index,
                    what: format!("parameter {idx}"),
                })
            }
        };

        for row in 0..hash_dim {
            let g_row = grad.projection_rows.get(&row);
            for col in 0..e {
                let idx = row * e + col;
                let g = g_row.map_or(0.0, |r| r[col]);
                update(idx, &mut model.projection[idx], g)?;
            }
        }
        let offset = hash_dim * e;
        for k in 0..model.head.len() {
            update(offset + k, &mut model.head[k], grad.head[k])?;
        }
        Ok(())
    }
}

/// Mini-batch AdamW with decoupled weight decay and a warmup/linear-decay
/// schedule. Per-tuple gradients may be computed in parallel; they are
/// summed in batch order so results do not depend on the thread count.
pub fn train_texts(mut model: ScorerModel, tuples: &[TupleTexts]) -> Result<TrainOutcome> {
    if tuples.is_empty() {
        return Err(Error::InvalidArgument("no training tuples".into()));
    }
    let config = model.train_config;
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidConfig("batch_size and epochs must be positive".into()));
    }

    let mut cache: HashMap<&str, SparseVec> = HashMap::new();
    for t in tuples {
        for text in [&t.anchor, &t.positive, &t.negative] {
            cache
                .entry(text.as_str())
                .or_insert_with(|| model.featurizer.featurize_sparse(text));
        }
    }

    let total_steps = config.total_steps(tuples.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = AdamW::new(model.param_count());
    let mut losses = Vec::with_capacity(total_steps);
    let mut order: Vec<usize> = (0..tuples.len()).collect();
    let mut step = 0;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            step += 1;
            let per_tuple: Vec<(f64, Gradient)> = batch
                .par_iter()
                .map(|&i| {
                    let t = &tuples[i];
                    model.loss_gradient_features(&cache[t.anchor.as_str()], &cache[t.positive.as_str()], &cache[t.negative.as_str()])
                })
                .collect();
            let mut grad = Gradient::default();
            let mut loss = 0.0;
            for (l, g) in &per_tuple {
                loss += l;
                grad.accumulate(g);
            }
            let inv = 1.0 / batch.len() as f64;
            loss *= inv;
            grad.scale(inv);
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    step,
                    what: "loss".into(),
                });
            }
            losses.push(loss);
            let lr = lr_at_step(&config, step, total_steps);
            optimizer.step(&mut model, &grad, lr, step)?;
        }
    }
    log::info!(
        "trained scorer for {step} steps, final batch loss {:.4}",
        losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(TrainOutcome { model, losses })
}
