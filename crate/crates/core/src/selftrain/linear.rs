use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::SparseVec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub epochs: usize,
    pub l2: f64,
    pub learning_rate: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            epochs: 20,
            l2: 1e-4,
            learning_rate: 0.5,
        }
    }
}

/// Binary logistic model over sparse features. Weights are stored sparse,
/// sorted by feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub weights: SparseVec,
    pub bias: f64,
}

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    pub fn decision(&self, x: &SparseVec) -> f64 {
        sparse_dot(&self.weights, x) + self.bias
    }

    pub fn probability(&self, x: &SparseVec) -> f64 {
        sigmoid(self.decision(x))
    }

    /// L2-regularized log-loss fitted by seeded SGD over `examples`
    /// (`(feature row, target)` pairs into `features`). The bias is not
    /// regularized.
    pub fn fit(
        features: &[SparseVec],
        examples: &[(usize, bool)],
        dim: usize,
        config: &LinearConfig,
        seed: u64,
    ) -> Logistic {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = config.learning_rate;
        let shrink = 1.0 - eta * config.l2;
        // weights = scale * v, so L2 shrinkage is O(1) per step
        let mut v = vec![0.0; dim];
        let mut scale = 1.0;
        let mut bias = 0.0;
        let mut order: Vec<usize> = (0..examples.len()).collect();
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for &e in &order {
                let (row, target) = examples[e];
                let x = &features[row];
                let z = scale * x.iter().map(|&(j, xj)| v[j] * xj).sum::<f64>() + bias;
                let g = sigmoid(z) - if target { 1.0 } else { 0.0 };
                scale *= shrink;
                if scale < 1e-9 {
                    v.iter_mut().for_each(|w| *w *= scale);
                    scale = 1.0;
                }
                for &(j, xj) in x {
                    v[j] -= eta * g * xj / scale;
                }
                bias -= eta * g;
            }
        }
        Logistic {
            weights: v
                .into_iter()
                .enumerate()
                .filter(|&(_, w)| w != 0.0)
                .map(|(j, w)| (j, w * scale))
                .collect(),
            bias,
        }
    }
}
