use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{LinearConfig, Logistic};
use crate::encoder::SparseVec;
use crate::error::{Error, Result};

const CHECKPOINT_FORMAT: &str = "papertag-label-trees";
const CHECKPOINT_VERSION: u32 = 1;
const KMEANS_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainConfig {
    /// Pseudo labels per paper.
    pub n_pseudo: usize,
    pub trees: usize,
    pub max_leaf: usize,
    pub beam: usize,
    pub min_df: usize,
    pub linear: LinearConfig,
    pub seed: u64,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            n_pseudo: 5,
            trees: 3,
            max_leaf: 100,
            beam: 10,
            min_df: 5,
            linear: LinearConfig::default(),
            seed: 0,
        }
    }
}

/// Label tree topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeNode {
    Branch(Vec<TreeNode>),
    Leaf(Vec<usize>),
}

impl TreeNode {
    /// Labels under this node, ascending.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out.sort_unstable();
        out
    }

    fn collect_labels(&self, out: &mut Vec<usize>) {
        match self {
            TreeNode::Leaf(labels) => out.extend_from_slice(labels),
            TreeNode::Branch(children) => children.iter().for_each(|c| c.collect_labels(out)),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Branch(children) => children.iter().map(TreeNode::leaf_count).sum(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Branch(children) => 1 + children.iter().map(TreeNode::depth).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTree {
    pub root: TreeNode,
}

/// Mean feature vector of each label's pseudo-positive papers. Labels
/// without positives get the empty vector.
pub fn label_features(features: &[SparseVec], targets: &[Vec<usize>], num_labels: usize) -> Vec<SparseVec> {
    let mut sums: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); num_labels];
    let mut counts = vec![0usize; num_labels];
    for (x, labels) in features.iter().zip(targets) {
        for &l in labels {
            counts[l] += 1;
            for &(j, v) in x {
                *sums[l].entry(j).or_default() += v;
            }
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(sum, c)| {
            sum.into_iter()
                .map(|(j, v)| (j, v / c as f64))
                .filter(|&(_, v)| v != 0.0)
                .collect()
        })
        .collect()
}

fn unit(v: &SparseVec) -> SparseVec {
    super::tfidf::l2_normalize(v.clone())
}

fn dot_dense(x: &SparseVec, dense: &[f64]) -> f64 {
    x.iter().map(|&(j, v)| v * dense[j]).sum()
}

fn centroid(members: &[usize], unit_features: &[SparseVec], dim: usize) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    for &m in members {
        for &(j, v) in &unit_features[m] {
            c[j] += v;
        }
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        c.iter_mut().for_each(|v| *v /= norm);
    }
    c
}

/// Balanced spherical 2-means seeded with a random label and the label
/// farthest from it. Labels are ordered by their preference for the first
/// centroid over the second and cut in half, so the two sides differ in
/// size by at most one.
fn balanced_split(
    labels: &[usize],
    unit_features: &[SparseVec],
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let n = labels.len();
    let first = rng.gen_range(0..n);
    let mut c0 = centroid(&[labels[first]], unit_features, dim);
    // second seed: the label least similar to the first
    let second = (0..n)
        .filter(|&i| i != first)
        .min_by(|&a, &b| {
            let sa = dot_dense(&unit_features[labels[a]], &c0);
            let sb = dot_dense(&unit_features[labels[b]], &c0);
            sa.total_cmp(&sb).then(a.cmp(&b))
        })
        .expect("at least two labels");
    let mut c1 = centroid(&[labels[second]], unit_features, dim);
    let mut assignment: Vec<usize> = Vec::new();
    for _ in 0..KMEANS_ITERATIONS {
        let mut order: Vec<(f64, usize)> = labels
            .iter()
            .map(|&l| (dot_dense(&unit_features[l], &c0) - dot_dense(&unit_features[l], &c1), l))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let next: Vec<usize> = order.into_iter().map(|(_, l)| l).collect();
        if next == assignment {
            break;
        }
        assignment = next;
        let half = n.div_ceil(2);
        c0 = centroid(&assignment[..half], unit_features, dim);
        c1 = centroid(&assignment[half..], unit_features, dim);
    }
    let half = n.div_ceil(2);
    let mut left = assignment[..half].to_vec();
    let mut right = assignment[half..].to_vec();
    left.sort_unstable();
    right.sort_unstable();
    (left, right)
}

fn cluster(
    labels: Vec<usize>,
    unit_features: &[SparseVec],
    dim: usize,
    max_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    if labels.len() <= max_leaf {
        return TreeNode::Leaf(labels);
    }
    let (left, right) = balanced_split(&labels, unit_features, dim, rng);
    TreeNode::Branch(vec![
        cluster(left, unit_features, dim, max_leaf, rng),
        cluster(right, unit_features, dim, max_leaf, rng),
    ])
}

/// Splits featureless labels into balanced halves by index.
fn pool(labels: Vec<usize>, max_leaf: usize) -> TreeNode {
    if labels.len() <= max_leaf {
        return TreeNode::Leaf(labels);
    }
    let half = labels.len().div_ceil(2);
    let right = labels[half..].to_vec();
    let mut left = labels;
    left.truncate(half);
    TreeNode::Branch(vec![pool(left, max_leaf), pool(right, max_leaf)])
}

/// Recursive balanced two-way clustering of labels by feature vector until
/// every leaf holds at most `max_leaf` labels. Labels with empty features
/// are kept apart in their own subtree under the root.
pub fn build_label_tree(features: &[SparseVec], max_leaf: usize, seed: u64) -> LabelTree {
    let max_leaf = max_leaf.max(1);
    let all: Vec<usize> = (0..features.len()).collect();
    if all.len() <= max_leaf {
        return LabelTree {
            root: TreeNode::Leaf(all),
        };
    }
    let unit_features: Vec<SparseVec> = features.iter().map(unit).collect();
    let dim = unit_features
        .iter()
        .filter_map(|f| f.last().map(|&(j, _)| j + 1))
        .max()
        .unwrap_or(0);
    let (labeled, unlabeled): (Vec<usize>, Vec<usize>) = all.into_iter().partition(|&l| !features[l].is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = match (labeled.is_empty(), unlabeled.is_empty()) {
        (true, _) => pool(unlabeled, max_leaf),
        (false, true) => cluster(labeled, &unit_features, dim, max_leaf, &mut rng),
        (false, false) => TreeNode::Branch(vec![
            cluster(labeled, &unit_features, dim, max_leaf, &mut rng),
            pool(unlabeled, max_leaf),
        ]),
    };
    LabelTree { root }
}

/// Tree node with trained classifiers: each branch child carries the
/// classifier for "some label of the paper lies in this child", each leaf
/// label its one-vs-all classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedNode {
    Branch(Vec<(FittedNode, Logistic)>),
    Leaf(Vec<(usize, Logistic)>),
}

impl FittedNode {
    fn is_leaf(&self) -> bool {
        matches!(self, FittedNode::Leaf(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTree {
    pub root: FittedNode,
}

fn intersects(sorted_a: &[usize], sorted_b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < sorted_a.len() && j < sorted_b.len() {
        match sorted_a[i].cmp(&sorted_b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

struct Trainer<'a> {
    features: &'a [SparseVec],
    targets: &'a [Vec<usize>],
    training: Vec<usize>,
    dim: usize,
    config: &'a LinearConfig,
    seed: u64,
    fitted: u64,
}

impl Trainer<'_> {
    fn next_seed(&mut self) -> u64 {
        self.fitted += 1;
        self.seed
            .wrapping_add(self.fitted.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// Papers reaching a node are trained on; with none, every training
    /// paper serves as a negative.
    fn fit(&mut self, reaching: &[usize], positive: impl Fn(usize) -> bool) -> Logistic {
        let pool = if reaching.is_empty() { &self.training } else { reaching };
        let examples: Vec<(usize, bool)> = pool
            .iter()
            .map(|&p| (p, !reaching.is_empty() && positive(p)))
            .collect();
        let seed = self.next_seed();
        Logistic::fit(self.features, &examples, self.dim, self.config, seed)
    }

    fn node(&mut self, node: &TreeNode, reaching: &[usize]) -> FittedNode {
        match node {
            TreeNode::Branch(children) => {
                let mut fitted = Vec::with_capacity(children.len());
                for child in children {
                    let child_labels = child.labels();
                    let targets = self.targets;
                    let has = |p: usize| intersects(&targets[p], &child_labels);
                    let clf = self.fit(reaching, has);
                    let child_reaching: Vec<usize> = reaching.iter().copied().filter(|&p| has(p)).collect();
                    fitted.push((self.node(child, &child_reaching), clf));
                }
                FittedNode::Branch(fitted)
            }
            TreeNode::Leaf(labels) => {
                let mut fitted = Vec::with_capacity(labels.len());
                for &label in labels {
                    let targets = self.targets;
                    let clf = self.fit(reaching, |p| targets[p].binary_search(&label).is_ok());
                    fitted.push((label, clf));
                }
                FittedNode::Leaf(fitted)
            }
        }
    }
}

/// Fits routing and leaf classifiers for one tree. `targets[p]` holds the
/// sorted pseudo labels of paper `p`; papers without any are not used.
pub fn train_tree(
    tree: &LabelTree,
    features: &[SparseVec],
    targets: &[Vec<usize>],
    dim: usize,
    config: &LinearConfig,
    seed: u64,
) -> Result<FittedTree> {
    if features.len() != targets.len() {
        return Err(Error::InvalidArgument("features and targets differ in length".into()));
    }
    let training: Vec<usize> = (0..targets.len()).filter(|&p| !targets[p].is_empty()).collect();
    if training.is_empty() {
        return Err(Error::InvalidArgument("no training papers with pseudo labels".into()));
    }
    let mut trainer = Trainer {
        features,
        targets,
        training: training.clone(),
        dim,
        config,
        seed,
        fitted: 0,
    };
    Ok(FittedTree {
        root: trainer.node(&tree.root, &training),
    })
}

impl FittedTree {
    /// Beam search: at each level keep the `beam` most probable nodes by
    /// path probability. Returns `(label, path × leaf probability)` for
    /// labels in the surviving leaves.
    pub fn predict(&self, x: &SparseVec, beam: usize) -> Vec<(usize, f64)> {
        let beam = beam.max(1);
        let mut frontier: Vec<(&FittedNode, f64)> = vec![(&self.root, 1.0)];
        while !frontier.iter().all(|(n, _)| n.is_leaf()) {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for (node, p) in frontier {
                match node {
                    FittedNode::Leaf(_) => next.push((node, p)),
                    FittedNode::Branch(children) => {
                        for (child, clf) in children {
                            next.push((child, p * clf.probability(x)));
                        }
                    }
                }
            }
            next.sort_by(|a, b| b.1.total_cmp(&a.1));
            next.truncate(beam);
            frontier = next;
        }
        frontier
            .into_iter()
            .flat_map(|(node, p)| match node {
                FittedNode::Leaf(labels) => labels.iter().map(move |(l, clf)| (*l, p * clf.probability(x))),
                FittedNode::Branch(_) => unreachable!(),
            })
            .collect()
    }
}

/// Every leaf evaluated, no pruning.
pub fn exhaustive_proba(tree: &FittedTree, x: &SparseVec) -> Vec<(usize, f64)> {
    fn walk(node: &FittedNode, p: f64, x: &SparseVec, out: &mut Vec<(usize, f64)>) {
        match node {
            FittedNode::Leaf(labels) => out.extend(labels.iter().map(|(l, clf)| (*l, p * clf.probability(x)))),
            FittedNode::Branch(children) => {
                for (child, clf) in children {
                    walk(child, p * clf.probability(x), x, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, 1.0, x, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTreeClassifier {
    pub trees: Vec<FittedTree>,
    pub num_labels: usize,
    pub dim: usize,
    pub beam: usize,
}

impl LabelTreeClassifier {
    /// Mean over trees of the beam-search label probabilities. Labels no
    /// beam reaches get 0. Output is dense over all labels.
    pub fn predict_proba(&self, x: &SparseVec, beam: usize) -> Vec<f64> {
        let mut probs = vec![0.0; self.num_labels];
        for tree in &self.trees {
            for (l, p) in tree.predict(x, beam) {
                probs[l] += p;
            }
        }
        let t = self.trees.len().max(1) as f64;
        probs.iter_mut().for_each(|p| *p /= t);
        probs
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let value = serde_json::json!({
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "classifier": self,
        });
        serde_json::to_writer(&mut out, &value).map_err(|e| Error::Checkpoint(e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Envelope {
            format: String,
            version: u32,
            classifier: LabelTreeClassifier,
        }
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let env: Envelope = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if env.format != CHECKPOINT_FORMAT || env.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported classifier checkpoint {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.classifier)
    }
}

/// Builds and trains `config.trees` label trees; trees differ only in
/// their clustering seed and are fitted in parallel.
pub fn fit_classifier(
    features: &[SparseVec],
    targets: &[Vec<usize>],
    num_labels: usize,
    dim: usize,
    config: &SelfTrainConfig,
) -> Result<LabelTreeClassifier> {
    if config.trees == 0 {
        return Err(Error::InvalidConfig("at least one tree is required".into()));
    }
    let label_feats = label_features(features, targets, num_labels);
    let trees = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let seed = config.seed ^ (t as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03);
            let tree = build_label_tree(&label_feats, config.max_leaf, seed);
            train_tree(&tree, features, targets, dim, &config.linear, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelTreeClassifier {
        trees,
        num_labels,
        dim,
        beam: config.beam,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_label_sets_make_one_leaf() {
        let feats = vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![]];
        let t = build_label_tree(&feats, 3, 1);
        assert_eq!(t.root, TreeNode::Leaf(vec![0, 1, 2]));
    }

    #[test]
    fn planted_pairs_end_up_together() {
        let feats = vec![
            vec![(0, 1.0), (1, 0.1)],
            vec![(2, 1.0)],
            vec![(0, 0.9), (1, 0.2)],
            vec![(2, 0.8), (3, 0.1)],
        ];
        for seed in 0..10 {
            let t = build_label_tree(&feats, 2, seed);
            assert_eq!(t.root.depth(), 2);
            match &t.root {
                TreeNode::Branch(children) => {
                    let mut leaves: Vec<Vec<usize>> = children.iter().map(TreeNode::labels).collect();
                    leaves.sort();
                    assert_eq!(leaves, vec![vec![0, 2], vec![1, 3]]);
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn unlabeled_labels_are_pooled() {
        let feats = vec![vec![(0, 1.0)], vec![], vec![(1, 1.0)], vec![]];
        let t = build_label_tree(&feats, 2, 3);
        match &t.root {
            TreeNode::Branch(children) => {
                assert_eq!(children[0].labels(), vec![0, 2]);
                assert_eq!(children[1], TreeNode::Leaf(vec![1, 3]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn splits_are_balanced_and_cover_every_label_once() {
        let feats: Vec<SparseVec> = (0..37).map(|i| vec![(i % 5, 1.0), (5 + i % 7, 0.5)]).collect();
        let t = build_label_tree(&feats, 4, 11);
        fn check(node: &TreeNode, max_leaf: usize) {
            match node {
                TreeNode::Leaf(ls) => assert!(ls.len() <= max_leaf),
                TreeNode::Branch(cs) => {
                    let a = cs[0].labels().len() as i64;
                    let b = cs[1].labels().len() as i64;
                    assert!((a - b).abs() <= 1);
                    cs.iter().for_each(|c| check(c, max_leaf));
                }
            }
        }
        check(&t.root, 4);
        assert_eq!(t.root.labels(), (0..37).collect::<Vec<_>>());
        assert_eq!(build_label_tree(&feats, 4, 11), t);
    }

    #[test]
    fn one_paper_one_label_overfits() {
        let tree = LabelTree {
            root: TreeNode::Leaf(vec![0]),
        };
        let x = vec![vec![(0, 1.0)]];
        let fitted = train_tree(&tree, &x, &[vec![0]], 1, &LinearConfig::default(), 1).unwrap();
        let p = fitted.predict(&x[0], 10);
        assert_eq!(p.len(), 1);
        assert!(p[0].1 > 0.5);
    }

    #[test]
    fn zero_training_papers_is_an_error() {
        let tree = LabelTree {
            root: TreeNode::Leaf(vec![0]),
        };
        assert!(train_tree(&tree, &[vec![]], &[vec![]], 1, &LinearConfig::default(), 1).is_err());
    }

    #[test]
    fn single_leaf_prediction_is_leaf_output() {
        let tree = LabelTree {
            root: TreeNode::Leaf(vec![0, 1]),
        };
        let x = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        let fitted = train_tree(&tree, &x, &[vec![0], vec![1]], 2, &LinearConfig::default(), 1).unwrap();
        let FittedNode::Leaf(leaf) = &fitted.root else { panic!() };
        let p = fitted.predict(&x[0], 1);
        for ((l, clf), (pl, pp)) in leaf.iter().zip(&p) {
            assert_eq!(l, pl);
            assert_eq!(clf.probability(&x[0]), *pp);
        }
    }

    #[test]
    fn classifier_round_trip() {
        let x: Vec<SparseVec> = (0..6).map(|i| vec![(i % 3, 1.0)]).collect();
        let y: Vec<Vec<usize>> = (0..6).map(|i| vec![i % 3]).collect();
        let config = SelfTrainConfig {
            max_leaf: 1,
            ..SelfTrainConfig::default()
        };
        let clf = fit_classifier(&x, &y, 3, 3, &config).unwrap();
        assert_eq!(clf.trees.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        clf.save(&path).unwrap();
        assert_eq!(LabelTreeClassifier::load(&path).unwrap(), clf);
        let p = clf.predict_proba(&x[1], 10);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        let best = (0..3).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(best, 1);
    }
}
