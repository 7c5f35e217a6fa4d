#![allow(dead_code)]

use papertag::corpus::{Corpus, Label, LabelSpace};
use papertag::pipeline::{generate_synthetic, Inputs, SyntheticCorpus, SyntheticSpec};

pub fn label_space(synth: &SyntheticCorpus) -> LabelSpace {
    LabelSpace::new(
        synth
            .labels
            .iter()
            .map(|l| Label::new(l.id.clone(), l.names.clone(), l.description.clone()).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn planted(spec: &SyntheticSpec) -> (SyntheticCorpus, Inputs) {
    let synth = generate_synthetic(spec).unwrap();
    let corpus = Corpus::from_records(synth.papers.clone(), 10).unwrap();
    let labels = label_space(&synth);
    let inputs = Inputs {
        corpus,
        labels,
        overrides: Default::default(),
    };
    (synth, inputs)
}

/// Small deterministic generator so oracles do not share code paths with
/// the library's seeded streams.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut z = self.0;
        z = (z ^ (z >> 33)).wrapping_mul(0xff51afd7ed558ccd);
        z ^ (z >> 33)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}
