use std::collections::BTreeMap;

use crate::corpus::{Paper, Vocabulary};
use crate::encoder::SparseVec;

/// `tf(w, d) · ln(|D| / df(w))` over the paper's full text. Words outside
/// the vocabulary and zero entries are omitted.
pub fn tfidf_vector(paper: &Paper, vocabulary: &Vocabulary) -> SparseVec {
    let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
    for token in paper.full_text_tokens() {
        if let Some(i) = vocabulary.index_of(&token) {
            *tf.entry(i).or_default() += 1;
        }
    }
    let n = vocabulary.num_docs as f64;
    tf.into_iter()
        .map(|(i, count)| (i, count as f64 * (n / vocabulary.doc_freq(i) as f64).ln()))
        .filter(|&(_, x)| x > 0.0)
        .collect()
}

pub fn l2_normalize(mut v: SparseVec) -> SparseVec {
    let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|(_, x)| *x /= norm);
    }
    v
}
