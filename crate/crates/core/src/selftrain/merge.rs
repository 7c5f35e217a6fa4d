use std::cmp::Ordering;

use crate::ranker::CandidateScore;

fn by_probability(probabilities: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| probabilities[b].total_cmp(&probabilities[a]).then(a.cmp(&b))
}

/// Ranking over all `probabilities.len()` labels: the first `min(n, |C|)`
/// fused-rank labels stay on top in their fused order, every other label
/// follows by descending probability with ties by label index.
pub fn final_ranking(scores: &[CandidateScore], probabilities: &[f64], n: usize) -> Vec<usize> {
    let pinned: Vec<usize> = scores.iter().take(n).map(|s| s.label).collect();
    let mut is_pinned = vec![false; probabilities.len()];
    for &l in &pinned {
        is_pinned[l] = true;
    }
    let mut rest: Vec<usize> = (0..probabilities.len()).filter(|&l| !is_pinned[l]).collect();
    rest.sort_by(by_probability(probabilities));
    let mut ranking = pinned;
    ranking.extend(rest);
    ranking
}

/// All labels by probability alone.
pub fn probability_ranking(probabilities: &[f64]) -> Vec<usize> {
    let mut all: Vec<usize> = (0..probabilities.len()).collect();
    all.sort_by(by_probability(probabilities));
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::mrr_combine;

    #[test]
    fn worked_example() {
        // A..E = 0..4; candidates A, B, C ranked (1,1), (2,2), (3,3)
        let scores = mrr_combine(&[(0, 3.0, 3.0), (1, 2.0, 2.0), (2, 1.0, 1.0)]);
        let probs = [0.80, 0.85, 0.30, 0.60, 0.90];
        assert_eq!(final_ranking(&scores, &probs, 2), vec![0, 1, 4, 3, 2]);
        assert_eq!(probability_ranking(&probs), vec![4, 1, 0, 3, 2]);
    }

    #[test]
    fn no_candidates_means_pure_probability() {
        let probs = [0.1, 0.7, 0.3];
        assert_eq!(final_ranking(&[], &probs, 5), probability_ranking(&probs));
    }

    #[test]
    fn equal_probabilities_fall_back_to_label_order() {
        let scores = mrr_combine(&[(3, 1.0, 1.0), (1, 0.0, 0.0)]);
        assert_eq!(final_ranking(&scores, &[0.5; 5], 1), vec![3, 0, 1, 2, 4]);
    }
}
