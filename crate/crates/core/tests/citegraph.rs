use std::collections::{BTreeMap, BTreeSet};

use papertag::citegraph::{build_graph, neighborhood, sample_tuples, MetaPath};
use papertag::corpus::{Corpus, PaperRecord, SectionRecord};
use papertag::pipeline::generate_two_cluster;
use proptest::prelude::*;

/// Co-citing neighborhoods straight from the records: papers sharing at
/// least one reference that resolves to a paper in the corpus.
fn co_citing_oracle(records: &[PaperRecord]) -> BTreeMap<String, BTreeSet<String>> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let refs = |r: &PaperRecord| -> BTreeSet<String> {
        r.bib_refs
            .iter()
            .filter(|x| ids.contains(x.as_str()) && **x != r.id)
            .cloned()
            .collect()
    };
    records
        .iter()
        .map(|a| {
            let mine = refs(a);
            let hood = records
                .iter()
                .filter(|b| b.id != a.id && !refs(b).is_disjoint(&mine))
                .map(|b| b.id.clone())
                .collect();
            (a.id.clone(), hood)
        })
        .collect()
}

#[test]
fn tuples_respect_the_neighborhood_oracle() {
    let records = generate_two_cluster(120, 7).unwrap();
    let oracle = co_citing_oracle(&records);
    let corpus = Corpus::from_records(records, 10).unwrap();
    let graph = build_graph(&corpus);
    let tuples = sample_tuples(&graph, &corpus, &MetaPath::co_citing(), 100, 7).unwrap();
    assert_eq!(tuples.len(), 100);
    for t in &tuples {
        let hood = &oracle[&t.anchor.0];
        assert!(hood.contains(&t.positive.0), "{t:?}");
        assert!(!hood.contains(&t.negative.0), "{t:?}");
        assert_ne!(t.negative.0, t.anchor.0);
        for r in [&t.anchor, &t.positive, &t.negative] {
            assert!(r.1 < corpus.get(&r.0).unwrap().paragraph_count());
        }
    }
    assert_eq!(tuples, sample_tuples(&graph, &corpus, &MetaPath::co_citing(), 100, 7).unwrap());
}

#[test]
fn three_anchors_still_yield_the_requested_count() {
    let body = |tag: &str| SectionRecord {
        name: String::new(),
        paragraphs: vec![(0..12).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")],
        subsections: vec![],
    };
    let paper = |id: &str, refs: &[&str]| PaperRecord {
        id: id.into(),
        sections: vec![body(id)],
        bib_refs: refs.iter().map(|s| s.to_string()).collect(),
        ..PaperRecord::default()
    };
    let records = vec![
        paper("a", &["hub"]),
        paper("b", &["hub"]),
        paper("c", &["hub"]),
        paper("hub", &[]),
        paper("x", &[]),
        paper("y", &[]),
    ];
    let corpus = Corpus::from_records(records, 10).unwrap();
    let graph = build_graph(&corpus);
    let tuples = sample_tuples(&graph, &corpus, &MetaPath::co_citing(), 10, 1).unwrap();
    assert_eq!(tuples.len(), 10);
    let anchors: BTreeSet<&str> = tuples.iter().map(|t| t.anchor.0.as_str()).collect();
    assert!(anchors.is_subset(&BTreeSet::from(["a", "b", "c"])));
}

fn random_records(edges: &[(usize, usize)], n: usize) -> Vec<PaperRecord> {
    (0..n)
        .map(|i| PaperRecord {
            id: format!("n{i}"),
            bib_refs: edges
                .iter()
                .filter(|(s, _)| *s == i)
                .map(|(_, t)| format!("n{t}"))
                .collect(),
            ..PaperRecord::default()
        })
        .collect()
}

proptest! {
    #[test]
    fn co_citing_is_symmetric_and_matches_oracle(
        n in 2usize..12,
        raw in proptest::collection::vec((0usize..12, 0usize..12), 0..40),
    ) {
        let edges: Vec<(usize, usize)> = raw.into_iter().map(|(a, b)| (a % n, b % n)).collect();
        let records = random_records(&edges, n);
        let oracle = co_citing_oracle(&records);
        let corpus = Corpus::from_records(records, 10).unwrap();
        let graph = build_graph(&corpus);
        let path = MetaPath::co_citing();
        for a in 0..n {
            let id = format!("n{a}");
            let hood = neighborhood(&graph, &corpus, &id, &path).unwrap();
            prop_assert_eq!(&hood, &oracle[&id]);
            for b in &hood {
                prop_assert!(neighborhood(&graph, &corpus, b, &path).unwrap().contains(&id));
            }
        }
    }

    #[test]
    fn neighborhoods_ignore_record_order(
        n in 2usize..10,
        raw in proptest::collection::vec((0usize..10, 0usize..10), 0..30),
        rotate in 0usize..10,
    ) {
        let edges: Vec<(usize, usize)> = raw.into_iter().map(|(a, b)| (a % n, b % n)).collect();
        let records = random_records(&edges, n);
        let mut shuffled = records.clone();
        shuffled.rotate_left(rotate % n);
        shuffled.reverse();
        let a = Corpus::from_records(records, 10).unwrap();
        let b = Corpus::from_records(shuffled, 10).unwrap();
        let (ga, gb) = (build_graph(&a), build_graph(&b));
        for path in [MetaPath::citation(), MetaPath::co_citing(), "P<-P".parse().unwrap()] {
            for i in 0..n {
                let id = format!("n{i}");
                prop_assert_eq!(
                    neighborhood(&ga, &a, &id, &path).unwrap(),
                    neighborhood(&gb, &b, &id, &path).unwrap()
                );
            }
        }
    }
}
