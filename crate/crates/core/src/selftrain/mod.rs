//! Self-training on confident predictions.
//!
//! Each paper's full text becomes a tf-idf vector; its top-`N` labels by
//! fused rank become pseudo labels; an ensemble of label trees with
//! logistic routing and leaf classifiers is fitted on them and queried by
//! beam search. The final ranking keeps the top-`N` fused labels in place
//! and orders everything else by classifier probability.

mod linear;
mod merge;
mod pseudo;
mod tfidf;
mod tree;

pub use linear::{LinearConfig, Logistic};
pub use merge::{final_ranking, probability_ranking};
pub use pseudo::{pseudo_labels, pseudo_labels_for};
pub use tfidf::{l2_normalize, tfidf_vector};
pub use tree::{
    build_label_tree, exhaustive_proba, fit_classifier, label_features, train_tree, FittedNode,
    FittedTree, LabelTree, LabelTreeClassifier, SelfTrainConfig, TreeNode,
};
