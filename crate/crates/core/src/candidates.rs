//! Candidate retrieval by exact label-name matching.
//!
//! A label is a candidate for a paper when any of its names occurs as a
//! contiguous run of normalized tokens in the paper text. Matching works on
//! token boundaries, so "art" never matches inside "particle".

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSpace, Paper};
use crate::error::{Error, Result};
use crate::pipeline::io::{read_jsonl, write_jsonl};
use crate::text::tokenize;

#[derive(Debug, Clone, Default)]
pub struct NameIndex {
    keys: HashMap<Vec<String>, Vec<usize>>,
    max_len: usize,
}

impl NameIndex {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn max_name_len(&self) -> usize {
        self.max_len
    }

    /// Label indices registered under an exact token sequence.
    pub fn lookup(&self, tokens: &[String]) -> &[usize] {
        self.keys.get(tokens).map_or(&[], Vec::as_slice)
    }

    /// Labels whose names occur in `tokens`, ascending by label index.
    pub fn matches(&self, tokens: &[String]) -> Vec<usize> {
        let mut found = Vec::new();
        for start in 0..tokens.len() {
            let longest = self.max_len.min(tokens.len() - start);
            for len in 1..=longest {
                found.extend_from_slice(self.lookup(&tokens[start..start + len]));
            }
        }
        found.sort_unstable();
        found.dedup();
        found
    }
}

pub fn build_name_index(labels: &LabelSpace) -> NameIndex {
    let mut index = NameIndex::default();
    for (i, label) in labels.iter().enumerate() {
        for tokens in &label.name_tokens {
            index.max_len = index.max_len.max(tokens.len());
            let ids = index.keys.entry(tokens.clone()).or_default();
            if ids.last() != Some(&i) {
                ids.push(i);
            }
        }
    }
    index
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchScope {
    #[default]
    TitleAbstract,
    FullText,
}

pub fn retrieve_candidates(paper: &Paper, index: &NameIndex, scope: MatchScope) -> Vec<usize> {
    let tokens = match scope {
        MatchScope::TitleAbstract => tokenize(&paper.title_abstract()),
        MatchScope::FullText => paper.full_text_tokens(),
    };
    index.matches(&tokens)
}

/// `C(d)` per paper, parallel to the corpus order. Each entry holds label
/// indices in ascending (label id) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSets {
    pub sets: Vec<Vec<usize>>,
}

pub fn retrieve_all(corpus: &Corpus, index: &NameIndex, scope: MatchScope) -> CandidateSets {
    CandidateSets {
        sets: corpus
            .papers
            .par_iter()
            .map(|p| retrieve_candidates(p, index, scope))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStats {
    /// Mean candidates per paper.
    pub lambda: f64,
    pub total: usize,
    pub empty_papers: usize,
    pub papers: usize,
}

pub fn candidate_stats(candidates: &CandidateSets) -> CandidateStats {
    let papers = candidates.sets.len();
    let total: usize = candidates.sets.iter().map(Vec::len).sum();
    let lambda = if papers == 0 {
        0.0
    } else {
        total as f64 / papers as f64
    };
    if total == 0 {
        log::warn!("no paper received any candidate label");
    }
    CandidateStats {
        lambda,
        total,
        empty_papers: candidates.sets.iter().filter(|s| s.is_empty()).count(),
        papers,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub paper_id: String,
    pub candidates: Vec<String>,
}

pub fn write_candidates(
    path: impl AsRef<Path>,
    corpus: &Corpus,
    labels: &LabelSpace,
    candidates: &CandidateSets,
) -> Result<()> {
    let records = corpus
        .papers
        .iter()
        .zip(&candidates.sets)
        .map(|(p, set)| CandidateRecord {
            paper_id: p.id.clone(),
            candidates: set.iter().map(|&l| labels.get(l).id.clone()).collect(),
        });
    write_jsonl(path.as_ref(), records)
}

/// Reads a candidate dump and aligns it with `corpus`.
pub fn read_candidates(
    path: impl AsRef<Path>,
    corpus: &Corpus,
    labels: &LabelSpace,
) -> Result<CandidateSets> {
    let records: Vec<CandidateRecord> = read_jsonl(path.as_ref())?;
    let mut sets = vec![None; corpus.len()];
    for r in records {
        let pos = corpus
            .position(&r.paper_id)
            .ok_or_else(|| Error::UnknownPaper(r.paper_id.clone()))?;
        let mut set = r
            .candidates
            .iter()
            .map(|id| labels.position(id).ok_or_else(|| Error::UnknownLabel(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        set.sort_unstable();
        set.dedup();
        sets[pos] = Some(set);
    }
    let sets = sets
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::Checkpoint(format!("no candidates for paper `{}`", corpus.papers[i].id))))
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSets { sets })
}
