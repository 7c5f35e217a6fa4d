//! Ranking metrics: precision and NDCG at k, plus their propensity-scored
//! variants that reward correct predictions of rare labels.
//!
//! Rankings are sequences of label indices, best first. Gold sets are label
//! indices in any order. Positions past the end of a ranking count as
//! irrelevant.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidArgument("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn discount(position: usize) -> f64 {
    1.0 / ((position + 1) as f64).ln()
}

fn ideal_dcg(k: usize, gold: usize) -> f64 {
    (1..=k.min(gold)).map(discount).sum()
}

pub fn precision_at_k(ranking: &[usize], gold: &[usize], k: usize) -> Result<f64> {
    check_k(k)?;
    let hits = ranking.iter().take(k).filter(|l| gold.contains(l)).count();
    Ok(hits as f64 / k as f64)
}

/// Returns 0 for an empty gold set; corpus evaluation skips such papers.
pub fn ndcg_at_k(ranking: &[usize], gold: &[usize], k: usize) -> Result<f64> {
    check_k(k)?;
    if gold.is_empty() {
        return Ok(0.0);
    }
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, l)| gold.contains(l))
        .map(|(i, _)| discount(i + 1))
        .sum();
    Ok(dcg / ideal_dcg(k, gold.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropensityParams {
    pub a: f64,
    pub b: f64,
    /// Base of the logarithm in `C = (log|D| - 1)(B + 1)^A`.
    pub log_base: f64,
}

impl Default for PropensityParams {
    fn default() -> Self {
        PropensityParams {
            a: 0.55,
            b: 1.5,
            log_base: std::f64::consts::E,
        }
    }
}

impl PropensityParams {
    pub fn c(&self, num_docs: usize) -> Result<f64> {
        let c = ((num_docs as f64).log(self.log_base) - 1.0) * (self.b + 1.0).powf(self.a);
        if c > 0.0 && c.is_finite() {
            Ok(c)
        } else {
            Err(Error::InvalidArgument(format!(
                "propensity constant is not positive for {num_docs} documents"
            )))
        }
    }
}

/// Reward `1/p_l = 1 + C (N_l + B)^-A` for a label relevant to `n_l` of
/// `num_docs` papers.
pub fn propensity(n_l: usize, num_docs: usize, params: &PropensityParams) -> Result<f64> {
    let c = params.c(num_docs)?;
    Ok(1.0 + c * (n_l as f64 + params.b).powf(-params.a))
}

/// Per-label rewards with `N_l` counted over `gold`, one entry per paper.
pub fn rewards(gold: &[Vec<usize>], num_labels: usize, params: &PropensityParams) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; num_labels];
    for set in gold {
        let mut seen = set.clone();
        seen.sort_unstable();
        seen.dedup();
        for l in seen {
            let slot = counts
                .get_mut(l)
                .ok_or_else(|| Error::InvalidArgument(format!("gold label index {l} out of range")))?;
            *slot += 1;
        }
    }
    let c = params.c(gold.len())?;
    Ok(counts
        .into_iter()
        .map(|n| 1.0 + c * (n as f64 + params.b).powf(-params.a))
        .collect())
}

pub fn psp_at_k(ranking: &[usize], gold: &[usize], rewards: &[f64], k: usize) -> Result<f64> {
    check_k(k)?;
    let total: f64 = ranking
        .iter()
        .take(k)
        .filter(|l| gold.contains(l))
        .map(|&l| rewards[l])
        .sum();
    Ok(total / k as f64)
}

/// Reward-weighted DCG normalized by the unweighted ideal prefix.
pub fn psn_at_k(ranking: &[usize], gold: &[usize], rewards: &[f64], k: usize) -> Result<f64> {
    check_k(k)?;
    if gold.is_empty() {
        return Ok(0.0);
    }
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, l)| gold.contains(l))
        .map(|(i, &l)| rewards[l] * discount(i + 1))
        .sum();
    Ok(dcg / ideal_dcg(k, gold.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub precision_k: Vec<usize>,
    pub ndcg_k: Vec<usize>,
    pub propensity: PropensityParams,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            precision_k: vec![1, 3, 5],
            ndcg_k: vec![3, 5],
            propensity: PropensityParams::default(),
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.precision_k.iter().chain(&self.ndcg_k).any(|&k| k == 0) {
            return Err(Error::InvalidConfig("metric cutoffs must be at least 1".into()));
        }
        if !(self.propensity.a > 0.0 && self.propensity.b > 0.0) {
            return Err(Error::InvalidConfig("propensity A and B must be positive".into()));
        }
        if !(self.propensity.log_base > 1.0) {
            return Err(Error::InvalidConfig("propensity log base must exceed 1".into()));
        }
        Ok(())
    }
}

/// Corpus-level macro averages keyed `P@k`, `NDCG@k`, `PSP@k`, `PSN@k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scores: BTreeMap<String, f64>,
    pub papers_evaluated: usize,
    pub papers_skipped: usize,
    pub lambda: f64,
}

impl MetricsReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.scores.get(key).copied()
    }

    pub fn csv_header(&self) -> String {
        let mut out = String::new();
        for key in self.scores.keys() {
            let _ = write!(out, "{key},");
        }
        out.push_str("papers_evaluated,papers_skipped,lambda");
        out
    }

    pub fn csv_row(&self) -> String {
        let mut out = String::new();
        for v in self.scores.values() {
            let _ = write!(out, "{v:.6},");
        }
        let _ = write!(out, "{},{},{:.6}", self.papers_evaluated, self.papers_skipped, self.lambda);
        out
    }
}

/// Evaluates `rankings[i]` against `gold[i]`. Rewards use the label counts
/// of all of `gold`; papers with empty gold sets are skipped and counted.
pub fn evaluate(
    rankings: &[Vec<usize>],
    gold: &[Vec<usize>],
    num_labels: usize,
    lambda: f64,
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    config.validate()?;
    if rankings.len() != gold.len() {
        return Err(Error::InvalidArgument("rankings and gold sets differ in length".into()));
    }
    let reward = rewards(gold, num_labels, &config.propensity)?;

    let mut keys = Vec::new();
    for &k in &config.precision_k {
        keys.push(format!("P@{k}"));
    }
    for &k in &config.ndcg_k {
        keys.push(format!("NDCG@{k}"));
    }
    for &k in &config.precision_k {
        keys.push(format!("PSP@{k}"));
    }
    for &k in &config.ndcg_k {
        keys.push(format!("PSN@{k}"));
    }

    let per_paper: Vec<Option<Vec<f64>>> = rankings
        .par_iter()
        .zip(gold)
        .map(|(ranking, gold)| {
            if gold.is_empty() {
                return Ok(None);
            }
            let mut row = Vec::with_capacity(keys.len());
            for &k in &config.precision_k {
                row.push(precision_at_k(ranking, gold, k)?);
            }
            for &k in &config.ndcg_k {
                row.push(ndcg_at_k(ranking, gold, k)?);
            }
            for &k in &config.precision_k {
                row.push(psp_at_k(ranking, gold, &reward, k)?);
            }
            for &k in &config.ndcg_k {
                row.push(psn_at_k(ranking, gold, &reward, k)?);
            }
            Ok(Some(row))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![0.0; keys.len()];
    let mut evaluated = 0;
    for row in per_paper.iter().flatten() {
        evaluated += 1;
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let skipped = per_paper.len() - evaluated;
    if skipped > 0 {
        log::warn!("{skipped} papers without gold labels were skipped");
    }
    let denom = evaluated.max(1) as f64;
    Ok(MetricsReport {
        scores: keys.into_iter().zip(sums.into_iter().map(|s| s / denom)).collect(),
        papers_evaluated: evaluated,
        papers_skipped: skipped,
        lambda,
    })
}
