//! Random forest training over the six integer features, plus the
//! full-precision tree-walk oracle the encoded pipeline is verified
//! against.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flow::{FlowFeatures, TrafficClass, FEATURE_COUNT};
use crate::gen::arrivals::derive_seed;
use crate::{Error, Result};

use super::dataset::FlowSample;

/// Binary decision tree node. The predicate is `value <= threshold` goes
/// left, else right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: u32,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        label: TrafficClass,
    },
}

impl TreeNode {
    pub fn predict(&self, v: &[u32; FEATURE_COUNT]) -> TrafficClass {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Internal { feature, threshold, left, right } => {
                    node = if v[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    fn check(&self, max_depth: u32) -> Result<()> {
        match self {
            TreeNode::Leaf { .. } => Ok(()),
            TreeNode::Internal { feature, left, right, .. } => {
                if *feature >= FEATURE_COUNT {
                    return Err(Error::contract(format!("tree references feature {feature}")));
                }
                if max_depth == 0 {
                    return Err(Error::contract("tree deeper than declared max_depth"));
                }
                left.check(max_depth - 1)?;
                right.check(max_depth - 1)
            }
        }
    }
}

/// A trained forest: an odd number of trees over the six features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    pub max_depth: u32,
}

impl RandomForestModel {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::contract("model has no trees"));
        }
        if self.trees.len() % 2 == 0 {
            return Err(Error::contract("tree count must be odd"));
        }
        for tree in &self.trees {
            tree.check(self.max_depth)?;
        }
        Ok(())
    }
}

/// Majority vote over per-tree root-to-leaf walks. This is the
/// ground-truth inference path; the match-action encoding must agree with
/// it everywhere.
pub fn predict_vector(model: &RandomForestModel, v: &[u32; FEATURE_COUNT]) -> TrafficClass {
    let malicious = model
        .trees
        .iter()
        .filter(|t| t.predict(v) == TrafficClass::Malicious)
        .count();
    if malicious > model.trees.len() / 2 {
        TrafficClass::Malicious
    } else {
        TrafficClass::Benign
    }
}

pub fn predict_oracle(model: &RandomForestModel, features: &FlowFeatures) -> TrafficClass {
    predict_vector(model, &features.as_vector())
}

#[derive(Debug, Clone, Copy)]
pub struct TrainParams {
    /// Packet-count threshold whose snapshot trains the model.
    pub train_t: u32,
    pub num_trees: usize,
    pub max_depth: u32,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            train_t: 6,
            num_trees: 5,
            max_depth: 5,
            seed: 0,
        }
    }
}

type Row = ([u32; FEATURE_COUNT], TrafficClass);

/// Features considered per split: floor(sqrt(6)).
const SPLIT_FEATURES: usize = 2;

/// Standard random forest: per-tree bootstrap over the training flows'
/// snapshots at `train_t`, CART growth with Gini impurity, integer
/// midpoint thresholds. Deterministic in the seed; each tree draws from
/// its own derived stream, so per-tree parallelism cannot change results.
pub fn train_forest(samples: &[FlowSample], params: &TrainParams) -> Result<RandomForestModel> {
    if params.num_trees == 0 || params.num_trees % 2 == 0 {
        return Err(Error::config("num_trees must be odd"));
    }
    if params.max_depth == 0 {
        return Err(Error::config("max_depth must be at least 1"));
    }
    if params.train_t < 2 {
        return Err(Error::config("train_t must be at least 2"));
    }
    let rows: Vec<Row> = samples
        .iter()
        .filter_map(|s| s.features_at(params.train_t).map(|f| (f.as_vector(), s.truth)))
        .collect();
    let benign = rows.iter().filter(|r| r.1 == TrafficClass::Benign).count();
    if benign == 0 || benign == rows.len() {
        return Err(Error::contract(
            "training set must contain both classes at train_t",
        ));
    }

    let mut trees = Vec::with_capacity(params.num_trees);
    for tree_index in 0..params.num_trees {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(params.seed, 0x7265_0000 + tree_index as u64));
        let indices: Vec<usize> = (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect();
        trees.push(grow(&rows, indices, 0, params.max_depth, &mut rng));
    }
    Ok(RandomForestModel {
        trees,
        max_depth: params.max_depth,
    })
}

fn majority(rows: &[Row], indices: &[usize]) -> TrafficClass {
    let malicious = indices
        .iter()
        .filter(|&&i| rows[i].1 == TrafficClass::Malicious)
        .count();
    // Ties fall open to benign.
    if malicious * 2 > indices.len() {
        TrafficClass::Malicious
    } else {
        TrafficClass::Benign
    }
}

fn gini_counts(benign: usize, malicious: usize) -> f64 {
    let n = (benign + malicious) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let pb = benign as f64 / n;
    let pm = malicious as f64 / n;
    1.0 - pb * pb - pm * pm
}

struct Split {
    feature: usize,
    threshold: u32,
    impurity: f64,
}

fn best_split_on_feature(rows: &[Row], indices: &[usize], feature: usize) -> Option<Split> {
    let mut values: Vec<(u32, TrafficClass)> =
        indices.iter().map(|&i| (rows[i].0[feature], rows[i].1)).collect();
    values.sort_unstable_by_key(|v| v.0);
    let total_m = values.iter().filter(|v| v.1 == TrafficClass::Malicious).count();
    let total = values.len();

    let mut best: Option<Split> = None;
    let mut left_n = 0usize;
    let mut left_m = 0usize;
    let mut i = 0usize;
    while i < total {
        // Advance over one distinct value.
        let v = values[i].0;
        while i < total && values[i].0 == v {
            if values[i].1 == TrafficClass::Malicious {
                left_m += 1;
            }
            left_n += 1;
            i += 1;
        }
        if i == total {
            break;
        }
        let next = values[i].0;
        // Integer midpoint between adjacent distinct values; lands in
        // [v, next), so `<= threshold` keeps v on the left.
        let threshold = v + (next - v) / 2;
        let right_n = total - left_n;
        let right_m = total_m - left_m;
        let weighted = (left_n as f64 * gini_counts(left_n - left_m, left_m)
            + right_n as f64 * gini_counts(right_n - right_m, right_m))
            / total as f64;
        if best.as_ref().map_or(true, |b| weighted < b.impurity) {
            best = Some(Split {
                feature,
                threshold,
                impurity: weighted,
            });
        }
    }
    best
}

fn grow(
    rows: &[Row],
    indices: Vec<usize>,
    depth: u32,
    max_depth: u32,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let malicious = indices
        .iter()
        .filter(|&&i| rows[i].1 == TrafficClass::Malicious)
        .count();
    let pure = malicious == 0 || malicious == indices.len();
    if pure || depth == max_depth || indices.len() < 2 {
        return TreeNode::Leaf {
            label: majority(rows, &indices),
        };
    }

    let mut features: Vec<usize> = (0..FEATURE_COUNT).collect();
    features.shuffle(rng);
    let mut candidates = features[..SPLIT_FEATURES].to_vec();
    candidates.sort_unstable();

    let parent = gini_counts(indices.len() - malicious, malicious);
    let mut best: Option<Split> = None;
    for feature in candidates {
        if let Some(split) = best_split_on_feature(rows, &indices, feature) {
            if best.as_ref().map_or(true, |b| split.impurity < b.impurity) {
                best = Some(split);
            }
        }
    }
    let Some(split) = best else {
        return TreeNode::Leaf { label: majority(rows, &indices) };
    };
    if split.impurity >= parent {
        // No impurity reduction available on the sampled features.
        return TreeNode::Leaf { label: majority(rows, &indices) };
    }

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| rows[i].0[split.feature] <= split.threshold);
    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(rows, left_idx, depth + 1, max_depth, rng)),
        right: Box::new(grow(rows, right_idx, depth + 1, max_depth, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FiveTuple;
    use crate::flow::MsgKind;
    use crate::flow::PacketRecord;
    use crate::flow::TruthLabel;
    use crate::forest::dataset::extract_dataset;

    /// Build samples where malicious flows have min IPD below 50 and
    /// benign flows above 500: separable by one split.
    fn separable_samples() -> Vec<FlowSample> {
        let mut trace = Vec::new();
        for port in 0..20u16 {
            let malicious = port % 2 == 1;
            let gap = if malicious { 10 + port as u64 % 30 } else { 600 + port as u64 * 7 };
            let label = if malicious { TruthLabel::Malicious } else { TruthLabel::Benign };
            let tuple = FiveTuple::new(0x0A00_0001, 0x0A00_0002, port, 38472, 132);
            for i in 0..8u64 {
                trace.push(PacketRecord {
                    timestamp_us: i * gap,
                    tuple,
                    length_bytes: 80,
                    msg_kind: MsgKind::RrcConnectionRequest,
                    truth_label: label,
                });
            }
        }
        trace.sort_by_key(|p| p.timestamp_us);
        extract_dataset(&trace, 8).unwrap().samples
    }

    #[test]
    fn separable_set_perfect_with_one_stump() {
        let samples = separable_samples();
        let params = TrainParams {
            train_t: 6,
            num_trees: 1,
            max_depth: 1,
            seed: 3,
        };
        let model = train_forest(&samples, &params).unwrap();
        for s in &samples {
            let predicted = predict_oracle(&model, s.features_at(6).unwrap());
            assert_eq!(predicted, s.truth);
        }
    }

    #[test]
    fn deeper_forests_stay_perfect_on_separable_set() {
        let samples = separable_samples();
        for (trees, depth) in [(3usize, 2u32), (5, 5)] {
            let params = TrainParams { train_t: 6, num_trees: trees, max_depth: depth, seed: 3 };
            let model = train_forest(&samples, &params).unwrap();
            let correct = samples
                .iter()
                .filter(|s| predict_oracle(&model, s.features_at(6).unwrap()) == s.truth)
                .count();
            assert_eq!(correct, samples.len(), "trees={trees} depth={depth}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let samples = separable_samples();
        let params = TrainParams { train_t: 6, num_trees: 5, max_depth: 5, seed: 11 };
        let a = train_forest(&samples, &params).unwrap();
        let b = train_forest(&samples, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_single_class_and_even_trees() {
        let samples = separable_samples();
        let benign_only: Vec<FlowSample> = samples
            .iter()
            .filter(|s| s.truth == TrafficClass::Benign)
            .cloned()
            .collect();
        let params = TrainParams::default();
        assert!(matches!(train_forest(&benign_only, &params), Err(Error::Contract(_))));
        let bad = TrainParams { num_trees: 4, ..TrainParams::default() };
        assert!(matches!(train_forest(&samples, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn stump_oracle_single_comparison() {
        let model = RandomForestModel {
            trees: vec![TreeNode::Internal {
                feature: 4, // min_ipd_us
                threshold: 200,
                left: Box::new(TreeNode::Leaf { label: TrafficClass::Malicious }),
                right: Box::new(TreeNode::Leaf { label: TrafficClass::Benign }),
            }],
            max_depth: 1,
        };
        let mut f = FlowFeatures::zeroed();
        f.record_packet(80, None);
        f.record_packet(80, Some(150));
        assert_eq!(predict_oracle(&model, &f), TrafficClass::Malicious);
    }

    #[test]
    fn majority_vote_three_trees() {
        let leaf = |label| Box::new(TreeNode::Leaf { label });
        let stump = |threshold, flip| TreeNode::Internal {
            feature: 0,
            threshold,
            left: if flip { leaf(TrafficClass::Benign) } else { leaf(TrafficClass::Malicious) },
            right: if flip { leaf(TrafficClass::Malicious) } else { leaf(TrafficClass::Benign) },
        };
        // Votes on v[0]=0: benign, malicious, malicious.
        let model = RandomForestModel {
            trees: vec![stump(10, true), stump(10, false), stump(10, false)],
            max_depth: 1,
        };
        assert_eq!(predict_vector(&model, &[0; 6]), TrafficClass::Malicious);
    }

    #[test]
    fn oracle_matches_independent_recursive_walk() {
        // Second traversal implementation, recursive instead of the
        // iterative loop in `TreeNode::predict`.
        fn walk(node: &TreeNode, v: &[u32; 6]) -> TrafficClass {
            match node {
                TreeNode::Leaf { label } => *label,
                TreeNode::Internal { feature, threshold, left, right } => {
                    if v[*feature] <= *threshold {
                        walk(left, v)
                    } else {
                        walk(right, v)
                    }
                }
            }
        }
        fn vote(model: &RandomForestModel, v: &[u32; 6]) -> TrafficClass {
            let m = model.trees.iter().filter(|t| walk(t, v) == TrafficClass::Malicious).count();
            if m > model.trees.len() / 2 { TrafficClass::Malicious } else { TrafficClass::Benign }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let model = tests_support::random_model(&mut rng);
            for _ in 0..200 {
                let v: [u32; 6] = std::array::from_fn(|_| rng.gen());
                assert_eq!(predict_vector(&model, &v), vote(&model, &v));
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// Structurally random forest (random features, thresholds, labels) -
    /// not trained, so it also exercises degenerate shapes like
    /// contradictory paths and saturated thresholds.
    pub(crate) fn random_model(rng: &mut ChaCha8Rng) -> RandomForestModel {
        fn random_tree(rng: &mut ChaCha8Rng, depth: u32) -> TreeNode {
            if depth == 0 || rng.gen_bool(0.3) {
                let label = if rng.gen_bool(0.5) { TrafficClass::Benign } else { TrafficClass::Malicious };
                return TreeNode::Leaf { label };
            }
            TreeNode::Internal {
                feature: rng.gen_range(0..FEATURE_COUNT),
                threshold: rng.gen(),
                left: Box::new(random_tree(rng, depth - 1)),
                right: Box::new(random_tree(rng, depth - 1)),
            }
        }
        let num_trees = [1usize, 3, 5][rng.gen_range(0..3)];
        RandomForestModel {
            trees: (0..num_trees).map(|_| random_tree(rng, 5)).collect(),
            max_depth: 5,
        }
    }
}
