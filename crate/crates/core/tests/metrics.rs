mod common;

use common::Lcg;
use papertag::metrics::{
    evaluate, ndcg_at_k, precision_at_k, propensity, psn_at_k, psp_at_k, rewards, MetricsConfig, PropensityParams,
};
use proptest::prelude::*;

fn ranking_and_gold() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
    (2usize..12).prop_flat_map(|n| {
        (
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n),
            1..=n,
        )
    })
}

#[test]
fn rare_labels_earn_more_than_common_ones() {
    // label 0 is gold for every paper, label 1 for one paper only
    let mut gold: Vec<Vec<usize>> = (0..50).map(|_| vec![0]).collect();
    gold[0] = vec![0, 1];
    let reward = rewards(&gold, 2, &PropensityParams::default()).unwrap();
    assert!(reward[1] > reward[0]);
    let (rare_first, common_first) = (vec![1, 0], vec![0, 1]);
    for k in 1..=2 {
        assert_eq!(
            precision_at_k(&rare_first, &gold[0], k).unwrap(),
            precision_at_k(&common_first, &gold[0], k).unwrap()
        );
    }
    assert!(psp_at_k(&rare_first, &gold[0], &reward, 1).unwrap() > psp_at_k(&common_first, &gold[0], &reward, 1).unwrap());
    assert!(psn_at_k(&rare_first, &gold[0], &reward, 2).unwrap() > psn_at_k(&common_first, &gold[0], &reward, 2).unwrap());
}

#[test]
fn log_base_only_rescales_the_constant() {
    for base in [2.0, 10.0, std::f64::consts::E] {
        let params = PropensityParams {
            log_base: base,
            ..PropensityParams::default()
        };
        for (n, docs) in [(0, 100), (3, 1000), (250, 5000)] {
            let c = ((docs as f64).ln() / base.ln() - 1.0) * 2.5f64.powf(0.55);
            let expected = 1.0 + c * (n as f64 + 1.5).powf(-0.55);
            assert!((propensity(n, docs, &params).unwrap() - expected).abs() < 1e-12);
        }
    }
    let tiny = PropensityParams {
        log_base: 10.0,
        ..PropensityParams::default()
    };
    assert!(propensity(0, 10, &tiny).is_err());
}

#[test]
fn corpus_averages_match_hand_computation() {
    let rankings = vec![vec![0, 1, 2, 3], vec![2, 3, 0, 1], vec![1, 0, 3, 2]];
    let gold = vec![vec![0, 1], vec![0], vec![]];
    let config = MetricsConfig {
        precision_k: vec![1, 2],
        ndcg_k: vec![2],
        ..MetricsConfig::default()
    };
    let report = evaluate(&rankings, &gold, 4, 1.5, &config).unwrap();
    assert_eq!(report.papers_evaluated, 2);
    assert_eq!(report.papers_skipped, 1);
    assert_eq!(report.get("P@1"), Some(0.5));
    assert_eq!(report.get("P@2"), Some(0.5));
    assert!((report.get("NDCG@2").unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(report.lambda, 1.5);
    assert!(report.csv_header().starts_with("NDCG@2,P@1,P@2,PSN@2,PSP@1,PSP@2,"));
}

#[test]
fn ndcg_agrees_with_base_two_reference() {
    let mut rng = Lcg(77);
    for _ in 0..200 {
        let n = 2 + rng.below(10);
        let mut ranking: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            ranking.swap(i, rng.below(i + 1));
        }
        let gold: Vec<usize> = (0..n).filter(|_| rng.uniform() < 0.4).collect();
        if gold.is_empty() {
            continue;
        }
        let k = 1 + rng.below(n);
        let dcg: f64 = (0..k)
            .filter(|&i| gold.contains(&ranking[i]))
            .map(|i| 1.0 / ((i + 2) as f64).log2())
            .sum();
        let idcg: f64 = (0..k.min(gold.len())).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
        assert!((ndcg_at_k(&ranking, &gold, k).unwrap() - dcg / idcg).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn scores_depend_only_on_the_prefix((ranking, gold, k) in ranking_and_gold(), seed in any::<u64>()) {
        let reward: Vec<f64> = (0..ranking.len()).map(|l| 1.0 + l as f64 * 0.25).collect();
        let mut tail_shuffled = ranking.clone();
        let mut rng = Lcg(seed);
        let tail = &mut tail_shuffled[k..];
        for i in (1..tail.len()).rev() {
            tail.swap(i, rng.below(i + 1));
        }
        prop_assert_eq!(precision_at_k(&ranking, &gold, k).unwrap(), precision_at_k(&tail_shuffled, &gold, k).unwrap());
        prop_assert_eq!(ndcg_at_k(&ranking, &gold, k).unwrap(), ndcg_at_k(&tail_shuffled, &gold, k).unwrap());
        prop_assert_eq!(psp_at_k(&ranking, &gold, &reward, k).unwrap(), psp_at_k(&tail_shuffled, &gold, &reward, k).unwrap());
        prop_assert_eq!(psn_at_k(&ranking, &gold, &reward, k).unwrap(), psn_at_k(&tail_shuffled, &gold, &reward, k).unwrap());
    }

    #[test]
    fn bounded_scores((ranking, gold, k) in ranking_and_gold()) {
        let p = precision_at_k(&ranking, &gold, k).unwrap();
        let n = ndcg_at_k(&ranking, &gold, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        let ones = vec![1.0; ranking.len()];
        prop_assert!((psp_at_k(&ranking, &gold, &ones, k).unwrap() - p).abs() < 1e-15);
        prop_assert!((psn_at_k(&ranking, &gold, &ones, k).unwrap() - n).abs() < 1e-15);
    }
}
