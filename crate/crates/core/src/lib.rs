//! Weakly supervised multi-label classification of full-text papers.
//!
//! The pipeline retrieves candidate labels by exact name matching over each
//! paper's title and abstract, trains a pairwise scorer on citation-linked
//! paragraph tuples, aggregates paragraph embeddings along each paper's
//! section hierarchy, fuses two rankings by reciprocal rank, and finally
//! self-trains a label-tree classifier on the confident predictions.

pub mod candidates;
pub mod citegraph;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod ranker;
pub mod selftrain;
pub mod text;

pub use error::{Error, Result};
