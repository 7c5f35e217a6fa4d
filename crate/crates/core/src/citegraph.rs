//! Citation network, meta-path neighborhoods, and contrastive tuple sampling.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    /// Follow a citation from the citing paper to the cited one.
    Cites,
    /// Follow a citation backwards, from the cited paper to a citing one.
    CitedBy,
}

/// A sequence of edge directions. `P->P` is `[Cites]`, `P->P<-P` is
/// `[Cites, CitedBy]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MetaPath {
    steps: Vec<Step>,
}

impl MetaPath {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("meta-path needs at least one step".into()));
        }
        Ok(MetaPath { steps })
    }

    /// Paper cites paper.
    pub fn citation() -> Self {
        MetaPath {
            steps: vec![Step::Cites],
        }
    }

    /// Two papers sharing a common reference.
    pub fn co_citing() -> Self {
        MetaPath {
            steps: vec![Step::Cites, Step::CitedBy],
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("P")?;
        for step in &self.steps {
            f.write_str(match step {
                Step::Cites => "->P",
                Step::CitedBy => "<-P",
            })?;
        }
        Ok(())
    }
}

impl FromStr for MetaPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.replace('→', "->").replace('←', "<-").replace(' ', "");
        let bad = || Error::InvalidArgument(format!("cannot parse meta-path `{s}`"));
        let mut rest = normalized.strip_prefix('P').ok_or_else(bad)?;
        let mut steps = Vec::new();
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix("->P") {
                steps.push(Step::Cites);
                rest = r;
            } else if let Some(r) = rest.strip_prefix("<-P") {
                steps.push(Step::CitedBy);
                rest = r;
            } else {
                return Err(bad());
            }
        }
        MetaPath::new(steps)
    }
}

impl TryFrom<String> for MetaPath {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MetaPath> for String {
    fn from(m: MetaPath) -> String {
        m.to_string()
    }
}

/// Directed citation graph over the corpus papers, indexed by corpus
/// position. Adjacency lists are sorted and duplicate-free.
#[derive(Debug, Clone)]
pub struct CitationGraph {
    ids: Vec<String>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    pub dangling_refs: usize,
    pub self_loops: usize,
}

pub fn build_graph(corpus: &Corpus) -> CitationGraph {
    let n = corpus.len();
    let mut out_edges = vec![Vec::new(); n];
    let mut in_edges = vec![Vec::new(); n];
    let mut dangling_refs = 0;
    let mut self_loops = 0;
    for (i, paper) in corpus.papers.iter().enumerate() {
        for target in &paper.bib_refs {
            match corpus.position(target) {
                Some(j) if j == i => self_loops += 1,
                Some(j) => {
                    out_edges[i].push(j);
                    in_edges[j].push(i);
                }
                None => dangling_refs += 1,
            }
        }
    }
    for list in out_edges.iter_mut().chain(in_edges.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }
    if dangling_refs > 0 {
        log::info!("dropped {dangling_refs} references to papers outside the corpus");
    }
    CitationGraph {
        ids: corpus.papers.iter().map(|p| p.id.clone()).collect(),
        out_edges,
        in_edges,
        dangling_refs,
        self_loops,
    }
}

impl CitationGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    /// Neighborhood of the paper at position `node`, excluding itself.
    pub fn neighbors(&self, node: usize, path: &MetaPath) -> BTreeSet<usize> {
        let mut frontier = BTreeSet::from([node]);
        for step in path.steps() {
            let adjacency = match step {
                Step::Cites => &self.out_edges,
                Step::CitedBy => &self.in_edges,
            };
            frontier = frontier
                .iter()
                .flat_map(|&v| adjacency[v].iter().copied())
                .collect();
        }
        frontier.remove(&node);
        frontier
    }
}

/// Meta-path neighborhood of paper `id`, as paper ids.
pub fn neighborhood(graph: &CitationGraph, corpus: &Corpus, id: &str, path: &MetaPath) -> Result<BTreeSet<String>> {
    let node = corpus
        .position(id)
        .filter(|&i| i < graph.len() && graph.id(i) == id)
        .ok_or_else(|| Error::UnknownPaper(id.to_string()))?;
    Ok(graph
        .neighbors(node, path)
        .into_iter()
        .map(|j| graph.id(j).to_string())
        .collect())
}

/// A paragraph addressed by paper id and leaf index. Serialized as
/// `[paper_id, leaf_idx]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParagraphRef(pub String, pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContrastiveTuple {
    pub anchor: ParagraphRef,
    pub positive: ParagraphRef,
    pub negative: ParagraphRef,
}

struct Anchor {
    node: usize,
    positives: Vec<usize>,
    negatives: usize,
}

/// Draws `count` (anchor, positive, negative) paragraph tuples with
/// replacement. Positives come from the anchor paper's meta-path
/// neighborhood, negatives uniformly from eligible papers outside it.
/// Papers without paragraphs never take part.
pub fn sample_tuples(
    graph: &CitationGraph,
    corpus: &Corpus,
    path: &MetaPath,
    count: usize,
    seed: u64,
) -> Result<Vec<ContrastiveTuple>> {
    if count == 0 {
        return Err(Error::InvalidArgument("tuple count must be positive".into()));
    }
    let leaf_counts: Vec<usize> = corpus.papers.iter().map(|p| p.paragraph_count()).collect();
    let eligible: Vec<usize> = (0..corpus.len()).filter(|&i| leaf_counts[i] > 0).collect();

    let anchors: Vec<Anchor> = eligible
        .iter()
        .filter_map(|&node| {
            let positives: Vec<usize> = graph
                .neighbors(node, path)
                .into_iter()
                .filter(|&j| leaf_counts[j] > 0)
                .collect();
            let negatives = eligible.len() - positives.len() - 1;
            (!positives.is_empty() && negatives > 0).then_some(Anchor {
                node,
                positives,
                negatives,
            })
        })
        .collect();
    if anchors.is_empty() {
        return Err(Error::SparseGraph(path.to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick_leaf = |rng: &mut ChaCha8Rng, node: usize| -> ParagraphRef {
        ParagraphRef(corpus.papers[node].id.clone(), rng.gen_range(0..leaf_counts[node]))
    };

    let mut tuples = Vec::with_capacity(count);
    for _ in 0..count {
        let anchor = &anchors[rng.gen_range(0..anchors.len())];
        let positive = anchor.positives[rng.gen_range(0..anchor.positives.len())];
        let negative = if anchor.negatives * 4 >= eligible.len() {
            loop {
                let cand = eligible[rng.gen_range(0..eligible.len())];
                if cand != anchor.node && anchor.positives.binary_search(&cand).is_err() {
                    break cand;
                }
            }
        } else {
            let pool: Vec<usize> = eligible
                .iter()
                .copied()
                .filter(|&c| c != anchor.node && anchor.positives.binary_search(&c).is_err())
                .collect();
            pool[rng.gen_range(0..pool.len())]
        };
        tuples.push(ContrastiveTuple {
            anchor: pick_leaf(&mut rng, anchor.node),
            positive: pick_leaf(&mut rng, positive),
            negative: pick_leaf(&mut rng, negative),
        });
    }
    Ok(tuples)
}

pub fn write_tuples(path: impl AsRef<Path>, tuples: &[ContrastiveTuple]) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    for t in tuples {
        let line = serde_json::to_string(t).expect("tuple serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tuples(path: impl AsRef<Path>) -> Result<Vec<ContrastiveTuple>> {
    crate::pipeline::io::read_jsonl(path.as_ref())
}
