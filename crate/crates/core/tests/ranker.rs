mod common;

use common::{planted, Lcg};
use papertag::corpus::{HierarchyNode, NodeKind};
use papertag::encoder::EmbeddingOverrides;
use papertag::pipeline::{run_pipeline, PipelineConfig, SyntheticSpec};
use papertag::ranker::{aggregate_hierarchy, label_embeddings, mrr_combine, paper_embedding, score_bi, ScoreOptions};
use proptest::prelude::*;

fn tree() -> HierarchyNode {
    use HierarchyNode as N;
    N::internal(
        NodeKind::Paper,
        vec![
            N::paragraph("a"),
            N::internal(NodeKind::Section, vec![N::paragraph("b"), N::paragraph("c")]),
            N::internal(
                NodeKind::Section,
                vec![N::internal(NodeKind::Subsection, vec![N::paragraph("d")]), N::paragraph("e")],
            ),
        ],
    )
}

#[test]
fn aggregation_is_linear_in_the_leaves() {
    let mut rng = Lcg(21);
    let mut leaves = || -> Vec<Vec<f64>> { (0..5).map(|_| (0..3).map(|_| rng.range(-1.0, 1.0)).collect()).collect() };
    let (x, y) = (leaves(), leaves());
    let (alpha, beta) = (0.7, -1.3);
    let mixed: Vec<Vec<f64>> = x
        .iter()
        .zip(&y)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| alpha * p + beta * q).collect())
        .collect();
    let t = tree();
    let ax = aggregate_hierarchy(&t, &x, Vec::new).unwrap();
    let ay = aggregate_hierarchy(&t, &y, Vec::new).unwrap();
    let am = aggregate_hierarchy(&t, &mixed, Vec::new).unwrap();
    for ((m, a), b) in am.nodes.iter().zip(&ax.nodes).zip(&ay.nodes) {
        for j in 0..3 {
            assert!((m[j] - (alpha * a[j] + beta * b[j])).abs() < 1e-12);
        }
    }
    // root = mean(a, mean(b, c), mean(mean(d), e))
    let root: Vec<f64> = (0..3)
        .map(|j| (x[0][j] + (x[1][j] + x[2][j]) / 2.0 + (x[3][j] + x[4][j]) / 2.0) / 3.0)
        .collect();
    for j in 0..3 {
        assert!((ax.root()[j] - root[j]).abs() < 1e-12);
    }
}

#[test]
fn bi_scores_are_plain_cosines() {
    let root = vec![1.0, 2.0, -1.0];
    let labels = vec![vec![1.0, 0.0, 0.0], vec![-2.0, -4.0, 2.0], vec![0.5, 1.0, 2.5]];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let got = score_bi(&root, &labels, &[2, 0, 1]);
    let expected: Vec<f64> = [2usize, 0, 1]
        .iter()
        .map(|&l| root.iter().zip(&labels[l]).map(|(a, b)| a * b).sum::<f64>() / (norm(&root) * norm(&labels[l])))
        .collect();
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-12);
    }
    assert!((got[2] + 1.0).abs() < 1e-12);
}

#[test]
fn planted_labels_outscore_absent_labels_under_the_bi_scorer() {
    let (synth, inputs) = planted(&SyntheticSpec {
        papers: 150,
        ..SyntheticSpec::default()
    });
    let mut config = PipelineConfig::default();
    config.self_train.enabled = false;
    config.tuples.count = 200;
    let out = run_pipeline(&config, &inputs).unwrap();
    let overrides = EmbeddingOverrides::default();
    let label_emb = label_embeddings(&out.model, &inputs.labels, &overrides);
    let mut wins = 0;
    let mut trials = 0;
    for (p, truth) in synth.truth.iter().enumerate() {
        let paper = &inputs.corpus.papers[p];
        let root = paper_embedding(&out.model, paper, &overrides, ScoreOptions::default()).unwrap();
        let present: Vec<usize> = truth
            .abstract_labels
            .iter()
            .map(|id| inputs.labels.position(id).unwrap())
            .collect();
        let absent = (0..inputs.labels.len())
            .find(|l| {
                let id = &inputs.labels.get(*l).id;
                !truth.abstract_labels.contains(id) && !truth.full_text_labels.contains(id)
            })
            .unwrap();
        for &l in &present {
            let s = score_bi(&root, &label_emb, &[l, absent]);
            trials += 1;
            if s[0] > s[1] {
                wins += 1;
            }
        }
    }
    assert!(wins as f64 >= 0.9 * trials as f64, "{wins}/{trials}");
}

fn entries_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..12)
}

proptest! {
    #[test]
    fn fusion_ignores_monotone_transforms(raw in entries_strategy(), scale in 0.1f64..5.0, shift in -3.0f64..3.0) {
        let entries: Vec<(usize, f64, f64)> = raw.iter().enumerate().map(|(l, &(b, x))| (l, b, x)).collect();
        let transformed: Vec<(usize, f64, f64)> = entries
            .iter()
            .map(|&(l, b, x)| (l, b.tanh(), scale * x + shift))
            .collect();
        let a = mrr_combine(&entries);
        let t = mrr_combine(&transformed);
        let key = |v: &[papertag::ranker::CandidateScore]| v.iter().map(|s| (s.label, s.rank_b, s.rank_x)).collect::<Vec<_>>();
        // tanh can merge nearby large scores into ties; compare only when it stays injective
        let distinct = |v: &[f64]| { let mut s = v.to_vec(); s.sort_by(f64::total_cmp); s.windows(2).all(|w| w[0] < w[1]) };
        let tb: Vec<f64> = transformed.iter().map(|e| e.1).collect();
        let tx: Vec<f64> = transformed.iter().map(|e| e.2).collect();
        let ob: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let ox: Vec<f64> = entries.iter().map(|e| e.2).collect();
        prop_assume!(distinct(&tb) && distinct(&tx) && distinct(&ob) && distinct(&ox));
        prop_assert_eq!(key(&a), key(&t));
    }

    #[test]
    fn fused_values_stay_in_range(raw in entries_strategy()) {
        let entries: Vec<(usize, f64, f64)> = raw.iter().enumerate().map(|(l, &(b, x))| (l, b, x)).collect();
        let n = entries.len() as f64;
        let out = mrr_combine(&entries);
        prop_assert_eq!(out.len(), entries.len());
        for s in &out {
            prop_assert!(s.mrr >= 2.0 / n - 1e-15 && s.mrr <= 2.0);
            prop_assert!((s.mrr - (1.0 / s.rank_b as f64 + 1.0 / s.rank_x as f64)).abs() < 1e-15);
        }
        prop_assert!(out.windows(2).all(|w| w[0].mrr >= w[1].mrr));
        let mut rb: Vec<usize> = out.iter().map(|s| s.rank_b).collect();
        rb.sort_unstable();
        prop_assert_eq!(rb, (1..=entries.len()).collect::<Vec<_>>());
    }
}
