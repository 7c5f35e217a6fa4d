//! End-to-end orchestration, configuration, artifact I/O and synthetic
//! corpora.
//!
//! Stages run in a fixed order and exchange data only through files in
//! the output directory, so any stage can be rerun on its own:
//!
//! | stage | reads | writes |
//! |---|---|---|
//! | `ingest` | corpus, labels | `ingest.json` |
//! | `candidates` | corpus, labels | `candidates.jsonl` |
//! | `sample-tuples` | corpus | `tuples.jsonl` |
//! | `train-encoder` | `tuples.jsonl` | `model.json`, `losses.json` |
//! | `score` | `model.json`, `candidates.jsonl` | `scores.jsonl`, `calls.json` |
//! | `self-train` | `scores.jsonl` | `classifier.json` |
//! | `predict` | `scores.jsonl`, `classifier.json` | `predictions.jsonl` |
//! | `evaluate` | `predictions.jsonl`, `candidates.jsonl` | `metrics.json`, `metrics.csv` |

pub mod config;
pub mod io;
mod run;
pub mod synth;

pub use config::{stage_seed, EncoderConfig, Paths, PipelineConfig, PredictConfig, SelfTrainSection, TupleConfig};
pub use run::*;
pub use synth::{generate_synthetic, generate_two_cluster, PlantedTruth, SyntheticCorpus, SyntheticSpec};
