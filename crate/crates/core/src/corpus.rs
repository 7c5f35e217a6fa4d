//! Papers, labels, and the corpus vocabulary.
//!
//! Papers are read from JSON Lines records and turned into a hierarchy tree:
//! the root stands for the whole paper, title+abstract form one distinguished
//! leaf directly under the root, and every section (and nested subsection)
//! becomes an internal node whose leaves are its paragraphs. Paragraphs below
//! the word threshold are dropped and internal nodes emptied by the filter
//! are pruned.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{join_text, tokenize, word_count};

pub const DEFAULT_MIN_PARAGRAPH_WORDS: usize = 10;
pub const DEFAULT_MIN_DF: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Paper,
    Section,
    Subsection,
    Paragraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub kind: NodeKind,
    pub children: Vec<HierarchyNode>,
    /// Nonempty only on paragraph leaves.
    pub text: String,
    pub is_abstract: bool,
}

impl HierarchyNode {
    pub fn internal(kind: NodeKind, children: Vec<HierarchyNode>) -> Self {
        HierarchyNode {
            kind,
            children,
            text: String::new(),
            is_abstract: false,
        }
    }

    pub fn paragraph(text: impl Into<String>) -> Self {
        HierarchyNode {
            kind: NodeKind::Paragraph,
            children: Vec::new(),
            text: text.into(),
            is_abstract: false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::Paragraph
    }

    /// Paragraph leaves in depth-first, left-to-right order. A leaf's
    /// position in this sequence is its leaf index.
    pub fn leaves(&self) -> Vec<&HierarchyNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a HierarchyNode>) {
        if self.is_leaf() {
            out.push(self);
        } else {
            for child in &self.children {
                child.collect_leaves(out);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(HierarchyNode::leaf_count).sum()
        }
    }

    /// Total number of nodes including `self`.
    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(HierarchyNode::node_count)
            .sum::<usize>()
    }

    /// Removes paragraphs with fewer than `min_words` tokens, then prunes
    /// internal nodes left without children. Returns `false` when `self`
    /// should be removed by its parent.
    fn filter(&mut self, min_words: usize) -> bool {
        if self.is_leaf() {
            return word_count(&self.text) >= min_words;
        }
        self.children.retain_mut(|c| c.filter(min_words));
        !self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paper {
    pub id: String,
    pub title: String,
    pub abstract_text: String,
    pub hierarchy: HierarchyNode,
    /// Cited paper ids, deduplicated and in first-seen order.
    pub bib_refs: Vec<String>,
    pub gold_labels: Option<Vec<String>>,
}

impl Paper {
    /// Title and abstract joined; the text the cross scorer and the name
    /// matcher look at.
    pub fn title_abstract(&self) -> String {
        join_text(&self.title, &self.abstract_text)
    }

    /// True when no paragraph survived filtering.
    pub fn is_empty(&self) -> bool {
        self.hierarchy.children.is_empty()
    }

    pub fn paragraph_count(&self) -> usize {
        self.hierarchy.leaf_count()
    }

    pub fn paragraphs(&self) -> Vec<&str> {
        self.hierarchy
            .leaves()
            .into_iter()
            .map(|n| n.text.as_str())
            .collect()
    }

    /// Tokens of title + abstract + every surviving body paragraph. The
    /// abstract leaf is not counted twice.
    pub fn full_text_tokens(&self) -> Vec<String> {
        let mut tokens = tokenize(&self.title_abstract());
        for leaf in self.hierarchy.leaves() {
            if !leaf.is_abstract {
                tokens.extend(tokenize(&leaf.text));
            }
        }
        tokens
    }
}

/// On-disk section record, nestable through `subsections`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionRecord {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub paragraphs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsections: Vec<SectionRecord>,
}

/// On-disk paper record, one per JSON line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub sections: Vec<SectionRecord>,
    #[serde(default)]
    pub bib_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn section_node(record: &SectionRecord, depth: usize) -> HierarchyNode {
    let kind = if depth == 0 {
        NodeKind::Section
    } else {
        NodeKind::Subsection
    };
    let mut children: Vec<HierarchyNode> = record
        .paragraphs
        .iter()
        .map(|p| HierarchyNode::paragraph(p.clone()))
        .collect();
    children.extend(record.subsections.iter().map(|s| section_node(s, depth + 1)));
    HierarchyNode::internal(kind, children)
}

impl Paper {
    pub fn from_record(record: PaperRecord, min_paragraph_words: usize) -> Self {
        let mut children = Vec::with_capacity(record.sections.len() + 1);
        let head = join_text(&record.title, &record.abstract_text);
        if !head.is_empty() {
            let mut leaf = HierarchyNode::paragraph(head);
            leaf.is_abstract = true;
            children.push(leaf);
        }
        children.extend(record.sections.iter().map(|s| section_node(s, 0)));
        let mut hierarchy = HierarchyNode::internal(NodeKind::Paper, children);
        hierarchy.filter(min_paragraph_words);

        let mut seen = HashSet::new();
        let bib_refs = record
            .bib_refs
            .into_iter()
            .filter(|r| seen.insert(r.clone()))
            .collect();

        Paper {
            id: record.id,
            title: record.title,
            abstract_text: record.abstract_text,
            hierarchy,
            bib_refs,
            gold_labels: record.labels,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub papers: usize,
    pub paragraphs: usize,
    pub paragraphs_per_paper: f64,
    pub empty_papers: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub papers: Vec<Paper>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_records(
        records: impl IntoIterator<Item = PaperRecord>,
        min_paragraph_words: usize,
    ) -> Result<Self> {
        let mut corpus = Corpus::default();
        for record in records {
            corpus.push(Paper::from_record(record, min_paragraph_words))?;
        }
        Ok(corpus)
    }

    pub fn from_papers(papers: Vec<Paper>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for paper in papers {
            corpus.push(paper)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, paper: Paper) -> Result<()> {
        if paper.id.is_empty() {
            return Err(Error::InvalidArgument("paper with empty id".into()));
        }
        if self.index.contains_key(&paper.id) {
            return Err(Error::DuplicatePaper(paper.id));
        }
        self.index.insert(paper.id.clone(), self.papers.len());
        self.papers.push(paper);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Paper> {
        self.position(id).map(|i| &self.papers[i])
    }

    pub fn stats(&self) -> CorpusStats {
        let paragraphs: usize = self.papers.iter().map(Paper::paragraph_count).sum();
        CorpusStats {
            papers: self.papers.len(),
            paragraphs,
            paragraphs_per_paper: if self.papers.is_empty() {
                0.0
            } else {
                paragraphs as f64 / self.papers.len() as f64
            },
            empty_papers: self.papers.iter().filter(|p| p.is_empty()).count(),
        }
    }
}

fn read_json_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Reads a JSON Lines corpus and builds each paper's hierarchy.
pub fn load_corpus(path: impl AsRef<Path>, min_paragraph_words: usize) -> Result<Corpus> {
    let path = path.as_ref();
    let records = read_json_lines::<PaperRecord>(path)?;
    let mut corpus = Corpus::default();
    for (line, record) in records {
        if record.id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "empty paper id".into(),
            });
        }
        corpus.push(Paper::from_record(record, min_paragraph_words))?;
    }
    let stats = corpus.stats();
    log::info!(
        "loaded {} papers ({:.2} paragraphs/paper, {} empty)",
        stats.papers,
        stats.paragraphs_per_paper,
        stats.empty_papers
    );
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub id: String,
    /// First entry is the canonical name.
    pub names: Vec<String>,
    pub description: String,
    /// Normalized token sequence of every name, parallel to `names`.
    pub name_tokens: Vec<Vec<String>>,
}

impl Label {
    pub fn new(
        id: impl Into<String>,
        names: Vec<String>,
        description: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        if names.is_empty() {
            return Err(Error::LabelWithoutNames(id));
        }
        let name_tokens: Vec<Vec<String>> = names.iter().map(|n| tokenize(n)).collect();
        if name_tokens.iter().any(Vec::is_empty) {
            return Err(Error::LabelWithoutNames(id));
        }
        Ok(Label {
            id,
            names,
            description: description.into(),
            name_tokens,
        })
    }

    pub fn canonical_name(&self) -> &str {
        &self.names[0]
    }

    /// Canonical name followed by the description.
    pub fn text(&self) -> String {
        join_text(self.canonical_name(), &self.description)
    }
}

/// Label space ordered by label id, so index order is id order.
#[derive(Debug, Clone, Default)]
pub struct LabelSpace {
    labels: Vec<Label>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new(mut labels: Vec<Label>) -> Result<Self> {
        labels.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.id.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(label.id.clone()));
            }
        }
        Ok(LabelSpace { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, idx: usize) -> &Label {
        &self.labels[idx]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Label> {
        self.labels.iter()
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelSpace> {
    let path = path.as_ref();
    let records = read_json_lines::<LabelRecord>(path)?;
    if records.is_empty() {
        log::warn!("label file {} is empty", path.display());
    }
    let labels = records
        .into_iter()
        .map(|(_, r)| Label::new(r.id, r.names, r.description))
        .collect::<Result<Vec<_>>>()?;
    LabelSpace::new(labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    doc_freq: Vec<usize>,
    index: HashMap<String, usize>,
    pub num_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn doc_freq(&self, idx: usize) -> usize {
        self.doc_freq[idx]
    }

    pub fn get(&self, word: &str) -> Option<(usize, usize)> {
        self.index_of(word).map(|i| (i, self.doc_freq[i]))
    }
}

/// Builds the corpus vocabulary over full texts. Words are indexed in
/// lexicographic order; words in fewer than `min_df` papers are dropped.
pub fn build_vocabulary(corpus: &Corpus, min_df: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for paper in &corpus.papers {
        let distinct: HashSet<String> = paper.full_text_tokens().into_iter().collect();
        for word in distinct {
            *df.entry(word).or_default() += 1;
        }
    }
    let (words, doc_freq): (Vec<String>, Vec<usize>) =
        df.into_iter().filter(|(_, c)| *c >= min_df).unzip();
    if words.is_empty() {
        log::warn!("vocabulary is empty at min_df = {min_df}");
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(Vocabulary {
        words,
        doc_freq,
        index,
        num_docs: corpus.len(),
    })
}
