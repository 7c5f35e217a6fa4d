//! Trainable pairwise text scorer.
//!
//! Text is turned into a signed feature-hashed bag of unigrams and bigrams,
//! projected to a dense embedding, and L2-normalized. Two texts are scored
//! jointly through a linear head over the pair features `[u ⊙ v ; |u − v|]`
//! (the cross scorer), or independently by cosine of their embeddings (the
//! bi scorer). The head and projection are trained with a two-way softmax
//! contrastive loss on citation-linked paragraph tuples.

mod featurize;
mod model;
mod overrides;
mod train;

pub use featurize::{Featurizer, SparseVec, DEFAULT_HASH_DIM, DEFAULT_MAX_TOKENS};
pub use model::{
    contrastive_loss, cosine, pair_features, CallCounts, Embedding, Gradient, ScorerModel,
    DEFAULT_EMBED_DIM,
};
pub use overrides::EmbeddingOverrides;
pub use train::{lr_at_step, train, TrainConfig, TrainOutcome, TupleTexts};
