//! Seeded synthetic corpora with planted labels.
//!
//! Every word is a generated pseudo-word, and label names, label topic
//! words and filler words are drawn from disjoint pools. A label name can
//! therefore only match where it was injected. Each paper gets a few gold
//! labels; some are named in the title and abstract, the rest only in a
//! section of the body. Every gold label also contributes a section of
//! paragraphs dense in its topic words.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::write_jsonl;
use crate::corpus::{LabelRecord, PaperRecord, SectionRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub papers: usize,
    pub labels: usize,
    pub min_labels_per_paper: usize,
    pub max_labels_per_paper: usize,
    /// Share of each paper's gold labels named only in the body.
    pub full_text_fraction: f64,
    pub filler_vocab: usize,
    pub topic_words_per_label: usize,
    /// Probability that a label has a second name.
    pub synonym_rate: f64,
    pub paragraphs_per_section: usize,
    pub paragraph_words: usize,
    /// Share of topic words in a label's section paragraphs.
    pub topic_density: f64,
    pub citations_per_paper: usize,
    /// Probability that a citation goes to a paper sharing a gold label.
    pub citation_affinity: f64,
    /// Probability that the abstract also names one non-gold label.
    pub distractor_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            papers: 500,
            labels: 50,
            min_labels_per_paper: 3,
            max_labels_per_paper: 3,
            full_text_fraction: 1.0 / 3.0,
            filler_vocab: 3000,
            topic_words_per_label: 8,
            synonym_rate: 0.2,
            paragraphs_per_section: 3,
            paragraph_words: 40,
            topic_density: 0.3,
            citations_per_paper: 6,
            citation_affinity: 0.9,
            distractor_rate: 0.0,
            seed: 1,
        }
    }
}

/// Where each gold label of a paper was planted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub paper_id: String,
    pub abstract_labels: Vec<String>,
    pub full_text_labels: Vec<String>,
    pub distractors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub papers: Vec<PaperRecord>,
    pub labels: Vec<LabelRecord>,
    pub truth: Vec<PlantedTruth>,
}

impl SyntheticCorpus {
    /// Writes `corpus.jsonl`, `labels.jsonl` and `truth.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("corpus.jsonl"), &self.papers)?;
        write_jsonl(&dir.join("labels.jsonl"), &self.labels)?;
        write_jsonl(&dir.join("truth.jsonl"), &self.truth)
    }
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br", "cl",
    "dr", "fl", "gr", "kr", "pl", "pr", "sk", "st", "tr", "sh", "ch", "th",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou", "io", "y"];

/// Yields distinct pseudo-words of two to four syllables.
struct WordPool {
    rng: ChaCha8Rng,
    seen: HashSet<String>,
}

impl WordPool {
    fn next(&mut self) -> String {
        loop {
            let syllables = self.rng.gen_range(2..=4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(&mut self.rng).unwrap());
                w.push_str(NUCLEI.choose(&mut self.rng).unwrap());
            }
            if self.seen.insert(w.clone()) {
                return w;
            }
        }
    }

    fn take(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.next()).collect()
    }
}

struct LabelPlan {
    names: Vec<String>,
    topic: Vec<String>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("infeasible synthetic spec: {m}")));
        if self.papers == 0 || self.labels == 0 {
            return bad("papers and labels must be positive");
        }
        if self.min_labels_per_paper == 0 || self.min_labels_per_paper > self.max_labels_per_paper {
            return bad("labels per paper must satisfy 1 <= min <= max");
        }
        if self.max_labels_per_paper > self.labels {
            return bad("labels per paper exceeds label count");
        }
        if !(0.0..=1.0).contains(&self.full_text_fraction) {
            return bad("full_text_fraction must lie in [0, 1]");
        }
        for p in [self.synonym_rate, self.topic_density, self.citation_affinity, self.distractor_rate] {
            if !(0.0..=1.0).contains(&p) {
                return bad("rates must lie in [0, 1]");
            }
        }
        if self.filler_vocab == 0 || self.topic_words_per_label == 0 {
            return bad("vocabularies must be nonempty");
        }
        if self.paragraph_words < 10 || self.paragraphs_per_section == 0 {
            return bad("paragraphs need at least 10 words");
        }
        Ok(())
    }
}

fn sentence(rng: &mut ChaCha8Rng, words: usize, filler: &[String], topic: &[String], density: f64) -> String {
    let mut out: Vec<&str> = Vec::with_capacity(words);
    for _ in 0..words {
        let pool = if !topic.is_empty() && rng.gen_bool(density) { topic } else { filler };
        out.push(pool.choose(rng).unwrap());
    }
    out.join(" ")
}

/// Inserts one of `names` at a random word boundary of `text`.
fn inject(rng: &mut ChaCha8Rng, text: &str, names: &[String]) -> String {
    let phrase = names.choose(rng).unwrap().as_str();
    let mut words: Vec<&str> = text.split(' ').collect();
    let at = rng.gen_range(0..=words.len());
    words.insert(at, phrase);
    words.join(" ")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pool = WordPool {
        rng: ChaCha8Rng::seed_from_u64(spec.seed ^ 0x776f_7264),
        seen: HashSet::new(),
    };
    let filler = pool.take(spec.filler_vocab);

    let plans: Vec<LabelPlan> = (0..spec.labels)
        .map(|_| {
            let mut names = Vec::new();
            let n_names = if rng.gen_bool(spec.synonym_rate) { 2 } else { 1 };
            for _ in 0..n_names {
                let len = rng.gen_range(1..=2);
                names.push(pool.take(len).join(" "));
            }
            LabelPlan {
                names,
                topic: pool.take(spec.topic_words_per_label),
            }
        })
        .collect();
    let width = spec.labels.to_string().len().max(3);
    let label_ids: Vec<String> = (0..spec.labels).map(|i| format!("L{i:0width$}")).collect();
    let labels = plans
        .iter()
        .zip(&label_ids)
        .map(|(plan, id)| LabelRecord {
            id: id.clone(),
            names: plan.names.clone(),
            description: format!("{} {}", plan.names[0], plan.topic.join(" ")),
        })
        .collect();

    let width = spec.papers.to_string().len().max(4);
    let paper_ids: Vec<String> = (0..spec.papers).map(|i| format!("P{i:0width$}")).collect();
    let label_indices: Vec<usize> = (0..spec.labels).collect();
    let gold: Vec<Vec<usize>> = (0..spec.papers)
        .map(|_| {
            let k = rng.gen_range(spec.min_labels_per_paper..=spec.max_labels_per_paper);
            label_indices.choose_multiple(&mut rng, k).copied().collect()
        })
        .collect();

    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); spec.labels];
    for (p, ls) in gold.iter().enumerate() {
        for &l in ls {
            holders[l].push(p);
        }
    }

    let mut papers = Vec::with_capacity(spec.papers);
    let mut truth = Vec::with_capacity(spec.papers);
    for (p, ls) in gold.iter().enumerate() {
        let hidden = ((ls.len() as f64) * spec.full_text_fraction).round() as usize;
        let (shown, body_only) = ls.split_at(ls.len() - hidden.min(ls.len()));

        let mut distractors = Vec::new();
        if rng.gen_bool(spec.distractor_rate) {
            let others: Vec<usize> = label_indices.iter().copied().filter(|l| !ls.contains(l)).collect();
            if let Some(&d) = others.choose(&mut rng) {
                distractors.push(d);
            }
        }

        let mut title = sentence(&mut rng, 8, &filler, &[], 0.0);
        if let Some(&first) = shown.first() {
            title = inject(&mut rng, &title, &plans[first].names);
        }
        let mut abstract_parts = Vec::new();
        for &l in shown {
            let plan = &plans[l];
            let s = sentence(&mut rng, 20, &filler, &plan.topic, 0.2);
            abstract_parts.push(inject(&mut rng, &s, &plan.names));
        }
        for &d in &distractors {
            let s = sentence(&mut rng, 12, &filler, &[], 0.0);
            abstract_parts.push(inject(&mut rng, &s, &plans[d].names[..1]));
        }
        abstract_parts.push(sentence(&mut rng, 15, &filler, &[], 0.0));

        let mut sections = vec![SectionRecord {
            name: "introduction".into(),
            paragraphs: vec![
                sentence(&mut rng, spec.paragraph_words, &filler, &[], 0.0),
                // caption-like fragment, removed by the paragraph filter
                sentence(&mut rng, 5, &filler, &[], 0.0),
            ],
            subsections: Vec::new(),
        }];
        let mut body_labels: Vec<usize> = ls.clone();
        body_labels.shuffle(&mut rng);
        for &l in &body_labels {
            let plan = &plans[l];
            let mut paragraphs: Vec<String> = (0..spec.paragraphs_per_section)
                .map(|_| sentence(&mut rng, spec.paragraph_words, &filler, &plan.topic, spec.topic_density))
                .collect();
            if body_only.contains(&l) {
                for para in paragraphs.iter_mut() {
                    *para = inject(&mut rng, para, &plan.names);
                }
            }
            let (head, tail) = paragraphs.split_at(1);
            sections.push(SectionRecord {
                name: plan.topic[0].clone(),
                paragraphs: head.to_vec(),
                subsections: vec![SectionRecord {
                    name: plan.topic[plan.topic.len() - 1].clone(),
                    paragraphs: tail.to_vec(),
                    subsections: Vec::new(),
                }],
            });
        }

        let mut refs = BTreeSet::new();
        for _ in 0..spec.citations_per_paper {
            let target = if rng.gen_bool(spec.citation_affinity) {
                let l = *ls.choose(&mut rng).unwrap();
                *holders[l].choose(&mut rng).unwrap()
            } else {
                rng.gen_range(0..spec.papers)
            };
            if target != p {
                refs.insert(paper_ids[target].clone());
            }
        }

        let ids = |v: &[usize]| -> Vec<String> { v.iter().map(|&l| label_ids[l].clone()).collect() };
        let mut gold_ids = ids(ls);
        gold_ids.sort();
        papers.push(PaperRecord {
            id: paper_ids[p].clone(),
            title,
            abstract_text: abstract_parts.join(". "),
            sections,
            bib_refs: refs.into_iter().collect(),
            labels: Some(gold_ids),
        });
        truth.push(PlantedTruth {
            paper_id: paper_ids[p].clone(),
            abstract_labels: ids(shown),
            full_text_labels: ids(body_only),
            distractors: ids(&distractors),
        });
    }

    Ok(SyntheticCorpus { papers, labels, truth })
}

/// Two disjoint topical clusters. Every paper cites five of its cluster's
/// eight hubs and hubs cite five of the other seven, so under the
/// co-citing meta-path each paper's neighborhood is its whole cluster.
pub fn generate_two_cluster(papers: usize, seed: u64) -> Result<Vec<PaperRecord>> {
    const HUBS: usize = 8;
    const CITED_HUBS: usize = 5;
    if papers < 2 * (HUBS + 1) {
        return Err(Error::InvalidArgument(format!(
            "two-cluster corpus needs at least {} papers",
            2 * (HUBS + 1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = WordPool {
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x636c_7573),
        seen: HashSet::new(),
    };
    let shared = pool.take(300);
    let topics = [pool.take(60), pool.take(60)];
    let width = papers.to_string().len().max(4);
    let id = |i: usize| format!("C{i:0width$}");

    let cluster_of = |i: usize| i % 2;
    let members: [Vec<usize>; 2] = [
        (0..papers).filter(|&i| cluster_of(i) == 0).collect(),
        (0..papers).filter(|&i| cluster_of(i) == 1).collect(),
    ];
    let hubs: [Vec<usize>; 2] = [members[0][..HUBS].to_vec(), members[1][..HUBS].to_vec()];

    let mut out = Vec::with_capacity(papers);
    for i in 0..papers {
        let c = cluster_of(i);
        let topic = &topics[c];
        let text = |rng: &mut ChaCha8Rng, n: usize| sentence(rng, n, &shared, topic, 0.5);
        let candidates: Vec<usize> = hubs[c].iter().copied().filter(|&h| h != i).collect();
        let refs: Vec<String> = candidates
            .choose_multiple(&mut rng, CITED_HUBS)
            .map(|&h| id(h))
            .collect();
        let sections = (0..2)
            .map(|s| SectionRecord {
                name: format!("section {s}"),
                paragraphs: (0..3).map(|_| text(&mut rng, 30)).collect(),
                subsections: Vec::new(),
            })
            .collect();
        out.push(PaperRecord {
            id: id(i),
            title: text(&mut rng, 8),
            abstract_text: text(&mut rng, 30),
            sections,
            bib_refs: refs,
            labels: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec {
            papers: 30,
            labels: 10,
            ..SyntheticSpec::default()
        };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 2, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap().papers, generate_synthetic(&other).unwrap().papers);
    }

    #[test]
    fn infeasible_spec_rejected() {
        let spec = SyntheticSpec {
            labels: 2,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn split_between_abstract_and_body() {
        let s = generate_synthetic(&SyntheticSpec {
            papers: 20,
            ..SyntheticSpec::default()
        })
        .unwrap();
        for t in &s.truth {
            assert_eq!(t.abstract_labels.len(), 2);
            assert_eq!(t.full_text_labels.len(), 1);
        }
    }

    #[test]
    fn two_cluster_refs_stay_in_cluster() {
        let papers = generate_two_cluster(40, 3).unwrap();
        for (i, p) in papers.iter().enumerate() {
            assert_eq!(p.bib_refs.len(), 5);
            for r in &p.bib_refs {
                let j: usize = r[1..].parse().unwrap();
                assert_eq!(i % 2, j % 2);
                assert_ne!(i, j);
            }
        }
    }
}
