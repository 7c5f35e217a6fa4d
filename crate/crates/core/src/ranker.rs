//! Paper-level scoring of candidate labels.
//!
//! Paragraph embeddings are averaged bottom-up through each paper's
//! hierarchy; the root embedding is compared to label embeddings by cosine
//! (bi score). Title+abstract is scored jointly with each label text (cross
//! score). The two candidate rankings are fused by summing reciprocal ranks.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSets;
use crate::corpus::{Corpus, HierarchyNode, LabelSpace, Paper};
use crate::encoder::{cosine, Embedding, EmbeddingOverrides, ScorerModel};
use crate::error::{Error, Result};
use crate::pipeline::io::{read_jsonl, write_jsonl};

/// Embedding of every hierarchy node in pre-order; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEmbeddings {
    pub nodes: Vec<Embedding>,
}

impl AggregatedEmbeddings {
    pub fn root(&self) -> &Embedding {
        &self.nodes[0]
    }
}

fn aggregate_node(
    node: &HierarchyNode,
    leaves: &[Embedding],
    next_leaf: &mut usize,
    out: &mut Vec<Embedding>,
) -> Result<usize> {
    let slot = out.len();
    out.push(Vec::new());
    if node.is_leaf() {
        let e = leaves
            .get(*next_leaf)
            .ok_or_else(|| Error::InvalidArgument("fewer leaf embeddings than paragraphs".into()))?;
        *next_leaf += 1;
        out[slot] = e.clone();
        return Ok(slot);
    }
    let mut child_slots = Vec::with_capacity(node.children.len());
    for child in &node.children {
        child_slots.push(aggregate_node(child, leaves, next_leaf, out)?);
    }
    let dim = out[child_slots[0]].len();
    let mut sum = vec![0.0; dim];
    for &c in &child_slots {
        if out[c].len() != dim {
            return Err(Error::DimensionMismatch(dim, out[c].len()));
        }
        for (acc, v) in sum.iter_mut().zip(&out[c]) {
            *acc += v;
        }
    }
    let n = child_slots.len() as f64;
    sum.iter_mut().for_each(|v| *v /= n);
    out[slot] = sum;
    Ok(slot)
}

/// Bottom-up mean of child embeddings at every internal node. Node vectors
/// are stored as raw means, without renormalization. A tree without
/// paragraphs takes `fallback()` as its root embedding.
pub fn aggregate_hierarchy(
    root: &HierarchyNode,
    leaf_embeddings: &[Embedding],
    fallback: impl FnOnce() -> Embedding,
) -> Result<AggregatedEmbeddings> {
    if root.children.is_empty() {
        return Ok(AggregatedEmbeddings {
            nodes: vec![fallback()],
        });
    }
    let mut nodes = Vec::with_capacity(root.node_count());
    let mut next_leaf = 0;
    aggregate_node(root, leaf_embeddings, &mut next_leaf, &mut nodes)?;
    if next_leaf != leaf_embeddings.len() {
        return Err(Error::InvalidArgument("more leaf embeddings than paragraphs".into()));
    }
    Ok(AggregatedEmbeddings { nodes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub label: usize,
    pub score_b: f64,
    pub score_x: f64,
    pub rank_b: usize,
    pub rank_x: usize,
    pub mrr: f64,
}

/// 1-based ranks after a descending sort, ties broken by label index.
fn ranks(entries: &[(usize, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        entries[b]
            .1
            .total_cmp(&entries[a].1)
            .then(entries[a].0.cmp(&entries[b].0))
    });
    let mut rank = vec![0; entries.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    rank
}

/// Fuses two scorings of one candidate set: `MRR = 1/r_B + 1/r_X`.
/// `entries` holds `(label, score_b, score_x)`. Output is sorted by MRR
/// descending, ties by label index.
pub fn mrr_combine(entries: &[(usize, f64, f64)]) -> Vec<CandidateScore> {
    let rb = ranks(&entries.iter().map(|&(l, b, _)| (l, b)).collect::<Vec<_>>());
    let rx = ranks(&entries.iter().map(|&(l, _, x)| (l, x)).collect::<Vec<_>>());
    let mut out: Vec<CandidateScore> = entries
        .iter()
        .enumerate()
        .map(|(i, &(label, score_b, score_x))| CandidateScore {
            label,
            score_b,
            score_x,
            rank_b: rb[i],
            rank_x: rx[i],
            mrr: 1.0 / rb[i] as f64 + 1.0 / rx[i] as f64,
        })
        .collect();
    sort_by_mrr(&mut out);
    out
}

fn sort_by_mrr(scores: &mut [CandidateScore]) {
    scores.sort_by(|a, b| b.mrr.total_cmp(&a.mrr).then(a.label.cmp(&b.label)));
}

/// Cosine between the paper root embedding and each candidate's label
/// embedding.
pub fn score_bi(root: &[f64], label_embeddings: &[Embedding], candidates: &[usize]) -> Vec<f64> {
    candidates
        .iter()
        .map(|&l| cosine(root, &label_embeddings[l]))
        .collect()
}

/// Joint score of the paper's title+abstract with each candidate's label
/// text. One cross-score call per candidate.
pub fn score_cross(
    model: &ScorerModel,
    paper: &Paper,
    labels: &LabelSpace,
    candidates: &[usize],
    overrides: &EmbeddingOverrides,
) -> Vec<f64> {
    let head = paper.title_abstract();
    candidates
        .iter()
        .map(|&l| {
            let label = labels.get(l);
            model.cross_score_with(&head, &label.text(), overrides.get(&paper.id), overrides.get(&label.id))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Aggregate paragraphs through the hierarchy. When off, the paper
    /// embedding is the title+abstract embedding alone.
    pub hierarchy: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { hierarchy: true }
    }
}

/// Per-paper fused candidate scores, parallel to the corpus order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredCorpus {
    pub papers: Vec<Vec<CandidateScore>>,
}

pub fn label_embeddings(model: &ScorerModel, labels: &LabelSpace, overrides: &EmbeddingOverrides) -> Vec<Embedding> {
    labels
        .labels()
        .par_iter()
        .map(|l| model.bi_embed_or(&l.text(), overrides.get(&l.id)))
        .collect()
}

pub fn paper_embedding(
    model: &ScorerModel,
    paper: &Paper,
    overrides: &EmbeddingOverrides,
    options: ScoreOptions,
) -> Result<Embedding> {
    let head = || model.bi_embed_or(&paper.title_abstract(), overrides.get(&paper.id));
    if !options.hierarchy {
        return Ok(head());
    }
    let leaves: Vec<Embedding> = paper
        .hierarchy
        .leaves()
        .iter()
        .enumerate()
        .map(|(i, leaf)| {
            let key = EmbeddingOverrides::paragraph_key(&paper.id, i);
            model.bi_embed_or(&leaf.text, overrides.get(&key))
        })
        .collect();
    Ok(aggregate_hierarchy(&paper.hierarchy, &leaves, head)?.nodes.swap_remove(0))
}

/// Scores every candidate of every paper and fuses the two rankings.
pub fn score_corpus(
    model: &ScorerModel,
    corpus: &Corpus,
    labels: &LabelSpace,
    candidates: &CandidateSets,
    overrides: &EmbeddingOverrides,
    options: ScoreOptions,
) -> Result<ScoredCorpus> {
    if candidates.sets.len() != corpus.len() {
        return Err(Error::InvalidArgument("candidate sets do not match corpus".into()));
    }
    overrides.check_dim(model.embed_dim)?;
    let cross: Vec<Vec<f64>> = corpus
        .papers
        .par_iter()
        .zip(&candidates.sets)
        .map(|(p, c)| score_cross(model, p, labels, c, overrides))
        .collect();
    let label_emb = label_embeddings(model, labels, overrides);
    let papers = corpus
        .papers
        .par_iter()
        .zip(&candidates.sets)
        .zip(cross)
        .map(|((paper, cands), score_x)| {
            let root = paper_embedding(model, paper, overrides, options)?;
            let score_b = score_bi(&root, &label_emb, cands);
            let entries: Vec<(usize, f64, f64)> = cands
                .iter()
                .zip(score_b.iter().zip(&score_x))
                .map(|(&l, (&b, &x))| (l, b, x))
                .collect();
            Ok(mrr_combine(&entries))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoredCorpus { papers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoreEntry {
    label_id: String,
    score_b: f64,
    score_x: f64,
    rank_b: usize,
    rank_x: usize,
    mrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoreRecord {
    paper_id: String,
    candidates: Vec<ScoreEntry>,
}

pub fn write_scores(path: impl AsRef<Path>, corpus: &Corpus, labels: &LabelSpace, scored: &ScoredCorpus) -> Result<()> {
    let records = corpus.papers.iter().zip(&scored.papers).map(|(p, scores)| ScoreRecord {
        paper_id: p.id.clone(),
        candidates: scores
            .iter()
            .map(|s| ScoreEntry {
                label_id: labels.get(s.label).id.clone(),
                score_b: s.score_b,
                score_x: s.score_x,
                rank_b: s.rank_b,
                rank_x: s.rank_x,
                mrr: s.mrr,
            })
            .collect(),
    });
    write_jsonl(path.as_ref(), records)
}

pub fn read_scores(path: impl AsRef<Path>, corpus: &Corpus, labels: &LabelSpace) -> Result<ScoredCorpus> {
    let records: Vec<ScoreRecord> = read_jsonl(path.as_ref())?;
    let mut papers = vec![None; corpus.len()];
    for r in records {
        let pos = corpus
            .position(&r.paper_id)
            .ok_or_else(|| Error::UnknownPaper(r.paper_id.clone()))?;
        let mut scores = r
            .candidates
            .into_iter()
            .map(|e| {
                Ok(CandidateScore {
                    label: labels.position(&e.label_id).ok_or(Error::UnknownLabel(e.label_id))?,
                    score_b: e.score_b,
                    score_x: e.score_x,
                    rank_b: e.rank_b,
                    rank_x: e.rank_x,
                    mrr: e.mrr,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sort_by_mrr(&mut scores);
        papers[pos] = Some(scores);
    }
    let papers = papers
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::Checkpoint(format!("no scores for paper `{}`", corpus.papers[i].id))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoredCorpus { papers })
}
