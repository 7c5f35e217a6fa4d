mod common;

use common::planted;
use papertag::candidates::{build_name_index, candidate_stats, retrieve_all, retrieve_candidates, MatchScope};
use papertag::corpus::{Corpus, Label, LabelSpace, PaperRecord};
use papertag::pipeline::SyntheticSpec;
use proptest::prelude::*;

fn labels() -> LabelSpace {
    LabelSpace::new(vec![
        Label::new("gnn", vec!["Graph Neural Network".into(), "GNN".into()], "").unwrap(),
        Label::new("art", vec!["art".into()], "").unwrap(),
        Label::new("ml", vec!["machine learning".into()], "").unwrap(),
    ])
    .unwrap()
}

fn paper_with_abstract(text: &str) -> papertag::corpus::Paper {
    let record = PaperRecord {
        id: "p".into(),
        abstract_text: text.into(),
        ..PaperRecord::default()
    };
    Corpus::from_records([record], 0).unwrap().papers.remove(0)
}

#[test]
fn lambda_equals_the_planted_name_count() {
    let (synth, inputs) = planted(&SyntheticSpec {
        papers: 120,
        ..SyntheticSpec::default()
    });
    let index = build_name_index(&inputs.labels);
    let sets = retrieve_all(&inputs.corpus, &index, MatchScope::TitleAbstract);
    let planted_total: usize = synth.truth.iter().map(|t| t.abstract_labels.len()).sum();
    let stats = candidate_stats(&sets);
    assert_eq!(stats.total, planted_total);
    assert!((stats.lambda - planted_total as f64 / 120.0).abs() < 1e-12);
    for (set, truth) in sets.sets.iter().zip(&synth.truth) {
        let mut ids: Vec<&str> = set.iter().map(|&l| inputs.labels.get(l).id.as_str()).collect();
        let mut expected: Vec<&str> = truth.abstract_labels.iter().map(String::as_str).collect();
        ids.sort_unstable();
        expected.sort_unstable();
        assert_eq!(ids, expected);
    }
}

#[test]
fn matching_respects_token_boundaries() {
    let space = labels();
    let index = build_name_index(&space);
    let hits = |t: &str| -> Vec<&str> {
        retrieve_candidates(&paper_with_abstract(t), &index, MatchScope::TitleAbstract)
            .into_iter()
            .map(|l| space.get(l).id.as_str())
            .collect()
    };
    assert!(hits("particle physics and partial graphs").is_empty());
    assert_eq!(hits("a graph-neural network, trained by machine-learning"), ["gnn", "ml"]);
    assert!(hits("graph neural networks").is_empty());
    assert_eq!(hits("the gnn beats the ART"), ["art", "gnn"]);
}

proptest! {
    #[test]
    fn case_and_position_do_not_matter(
        before in proptest::collection::vec("[a-z]{3,7}", 0..8),
        after in proptest::collection::vec("[a-z]{3,7}", 0..8),
        upper in any::<bool>(),
    ) {
        let space = labels();
        let index = build_name_index(&space);
        let filler = |w: &Vec<String>| w.iter()
            .filter(|x| !["art", "gnn"].contains(&x.as_str()))
            .cloned()
            .collect::<Vec<_>>()
            .join(" ");
        let name = if upper { "MACHINE Learning" } else { "machine learning" };
        let text = format!("{} {name} {}", filler(&before), filler(&after));
        let found = retrieve_candidates(&paper_with_abstract(&text), &index, MatchScope::TitleAbstract);
        prop_assert!(found.contains(&space.position("ml").unwrap()));
    }
}
