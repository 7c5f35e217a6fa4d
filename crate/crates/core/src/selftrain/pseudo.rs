use crate::ranker::{CandidateScore, ScoredCorpus};

/// Top-`n` labels of one paper by fused rank (all of them when fewer than
/// `n`), returned in ascending label order. `scores` must already be in
/// fused-rank order.
pub fn pseudo_labels_for(scores: &[CandidateScore], n: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = scores.iter().take(n).map(|s| s.label).collect();
    labels.sort_unstable();
    labels
}

pub fn pseudo_labels(scored: &ScoredCorpus, n: usize) -> Vec<Vec<usize>> {
    scored
        .papers
        .iter()
        .map(|s| pseudo_labels_for(s, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::mrr_combine;

    #[test]
    fn top_n_by_fused_rank() {
        let scores = mrr_combine(&[(0, 0.9, 0.9), (1, 0.5, 0.5), (2, 0.1, 0.1)]);
        assert_eq!(pseudo_labels_for(&scores, 2), vec![0, 1]);
    }

    #[test]
    fn fewer_candidates_than_n() {
        let scores = mrr_combine(&[(7, 0.2, 0.1)]);
        assert_eq!(pseudo_labels_for(&scores, 5), vec![7]);
        assert!(pseudo_labels_for(&[], 5).is_empty());
    }

    #[test]
    fn cut_is_strict_after_tie_break() {
        // labels 3 and 1 tie on both scores; 1 wins the tie-break
        let scores = mrr_combine(&[(3, 0.5, 0.5), (1, 0.5, 0.5), (2, 0.9, 0.9)]);
        assert_eq!(pseudo_labels_for(&scores, 2), vec![1, 2]);
    }
}
