//! Compile a trained forest into match-action table entries.
//!
//! The decomposition follows the feature-table / code-table split used by
//! in-switch tree inference: one range table per feature assigns every
//! threshold interval a small codeword, then per-tree entries match code
//! hyper-rectangles (one entry per reachable leaf) and a vote table folds
//! the per-tree outcomes into the final class.
//!
//! The central property, enforced by [`verify_encoding`] and exercised
//! heavily in tests: for every feature vector, classification through the
//! encoded tables equals the full-precision oracle.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flow::{TrafficClass, FEATURE_COUNT};
use crate::forest::{predict_vector, RandomForestModel, TreeNode};
use crate::{Error, Result};

/// Highest representable feature value; range tables must cover
/// `[0, FIELD_MAX]` exactly.
pub const FIELD_MAX: u32 = u32::MAX;

/// One row of a feature table: values in `[lo, hi]` map to `code`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeEntry {
    pub lo: u32,
    pub hi: u32,
    pub code: u16,
}

/// Threshold ranges for one feature across every tree of the forest.
///
/// With sorted distinct boundaries `b0 < b1 < ...`, the ranges are
/// `[0, b0] -> 0`, `(b0, b1] -> 1`, ..., `(b_last, FIELD_MAX] -> last`,
/// matching the `<= threshold` tree predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTable {
    pub feature: usize,
    pub boundaries: Vec<u32>,
    pub entries: Vec<RangeEntry>,
}

impl FeatureTable {
    /// Build from sorted, deduplicated boundaries, all below `FIELD_MAX`.
    pub fn from_boundaries(feature: usize, boundaries: Vec<u32>) -> Self {
        let mut entries = Vec::with_capacity(boundaries.len() + 1);
        let mut lo = 0u32;
        for (i, &b) in boundaries.iter().enumerate() {
            entries.push(RangeEntry { lo, hi: b, code: i as u16 });
            lo = b + 1;
        }
        entries.push(RangeEntry {
            lo,
            hi: FIELD_MAX,
            code: boundaries.len() as u16,
        });
        FeatureTable {
            feature,
            boundaries,
            entries,
        }
    }

    pub fn num_codes(&self) -> usize {
        self.entries.len()
    }

    /// Codeword for a feature value: the unique range containing it.
    pub fn lookup(&self, value: u32) -> u16 {
        self.boundaries.partition_point(|&b| b < value) as u16
    }

    /// Ranges must partition `[0, FIELD_MAX]` with codes in range order.
    pub fn check_partition(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::contract(format!("feature {}: empty table", self.feature)));
        }
        if self.entries.len() != self.boundaries.len() + 1 {
            return Err(Error::contract(format!(
                "feature {}: {} entries for {} boundaries",
                self.feature,
                self.entries.len(),
                self.boundaries.len()
            )));
        }
        let mut expect_lo = 0u32;
        for (i, e) in self.entries.iter().enumerate() {
            if e.lo != expect_lo || e.lo > e.hi || e.code as usize != i {
                return Err(Error::contract(format!(
                    "feature {}: range {}..={} code {} breaks the partition at {}",
                    self.feature, e.lo, e.hi, e.code, expect_lo
                )));
            }
            if i < self.boundaries.len() && e.hi != self.boundaries[i] {
                return Err(Error::contract(format!(
                    "feature {}: range end {} disagrees with boundary {}",
                    self.feature, e.hi, self.boundaries[i]
                )));
            }
            expect_lo = match e.hi.checked_add(1) {
                Some(next) => next,
                None => {
                    if i + 1 != self.entries.len() {
                        return Err(Error::contract(format!(
                            "feature {}: range reaches FIELD_MAX before the last entry",
                            self.feature
                        )));
                    }
                    return Ok(());
                }
            };
        }
        Err(Error::contract(format!(
            "feature {}: ranges stop at {} instead of FIELD_MAX",
            self.feature,
            expect_lo - 1
        )))
    }
}

/// Inclusive codeword interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeInterval {
    pub lo: u16,
    pub hi: u16,
}

impl CodeInterval {
    fn contains(&self, code: u16) -> bool {
        self.lo <= code && code <= self.hi
    }

    fn overlaps(&self, other: &CodeInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    fn span(&self) -> u128 {
        (self.hi - self.lo) as u128 + 1
    }
}

/// One reachable leaf of one tree, as a code hyper-rectangle. Features the
/// leaf's path never tests span their full code range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafEntry {
    pub intervals: [CodeInterval; FEATURE_COUNT],
    pub label: TrafficClass,
}

impl LeafEntry {
    fn matches(&self, codes: &[u16; FEATURE_COUNT]) -> bool {
        self.intervals
            .iter()
            .zip(codes.iter())
            .all(|(iv, &c)| iv.contains(c))
    }
}

/// The complete compiled model: six feature tables, per-tree leaf entries,
/// and the majority-vote table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedModel {
    pub feature_tables: Vec<FeatureTable>,
    pub trees: Vec<Vec<LeafEntry>>,
    pub vote_table: Vec<TrafficClass>,
}

impl EncodedModel {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Per-feature codewords for a value vector.
    pub fn codes(&self, v: &[u32; FEATURE_COUNT]) -> [u16; FEATURE_COUNT] {
        std::array::from_fn(|f| self.feature_tables[f].lookup(v[f]))
    }

    fn tree_vote(&self, tree: &[LeafEntry], codes: &[u16; FEATURE_COUNT]) -> TrafficClass {
        for entry in tree {
            if entry.matches(codes) {
                return entry.label;
            }
        }
        // Unreachable once validate() has accepted the tables; fail open.
        debug_assert!(false, "code tuple escaped the leaf partition");
        TrafficClass::Benign
    }

    /// Classification through the encoded tables only: feature-range
    /// lookups, per-tree leaf matches, vote table.
    pub fn classify(&self, v: &[u32; FEATURE_COUNT]) -> TrafficClass {
        let codes = self.codes(v);
        let malicious = self
            .trees
            .iter()
            .filter(|t| self.tree_vote(t, &codes) == TrafficClass::Malicious)
            .count();
        self.vote_table[malicious]
    }

    /// Structural invariants: feature-table partitions, per-tree leaf
    /// partition of the code space, vote-table majority rule.
    pub fn validate(&self) -> Result<()> {
        if self.feature_tables.len() != FEATURE_COUNT {
            return Err(Error::contract(format!(
                "expected {FEATURE_COUNT} feature tables, found {}",
                self.feature_tables.len()
            )));
        }
        for (f, table) in self.feature_tables.iter().enumerate() {
            if table.feature != f {
                return Err(Error::contract(format!(
                    "feature table {f} claims feature {}",
                    table.feature
                )));
            }
            table.check_partition()?;
        }

        let code_space: u128 = self
            .feature_tables
            .iter()
            .map(|t| t.num_codes() as u128)
            .product();
        for (ti, tree) in self.trees.iter().enumerate() {
            let mut volume: u128 = 0;
            for (li, leaf) in tree.iter().enumerate() {
                let mut leaf_volume: u128 = 1;
                for (f, iv) in leaf.intervals.iter().enumerate() {
                    let max_code = (self.feature_tables[f].num_codes() - 1) as u16;
                    if iv.lo > iv.hi || iv.hi > max_code {
                        return Err(Error::contract(format!(
                            "tree {ti} leaf {li}: bad code interval [{},{}] on feature {f}",
                            iv.lo, iv.hi
                        )));
                    }
                    leaf_volume *= iv.span();
                }
                volume += leaf_volume;
                for other in &tree[..li] {
                    if leaf
                        .intervals
                        .iter()
                        .zip(other.intervals.iter())
                        .all(|(a, b)| a.overlaps(b))
                    {
                        return Err(Error::contract(format!(
                            "tree {ti}: overlapping leaf entries"
                        )));
                    }
                }
            }
            if volume != code_space {
                return Err(Error::contract(format!(
                    "tree {ti}: leaf entries cover {volume} of {code_space} code tuples"
                )));
            }
        }

        let n = self.trees.len();
        if self.vote_table.len() != n + 1 {
            return Err(Error::contract(format!(
                "vote table has {} rows for {n} trees",
                self.vote_table.len()
            )));
        }
        for (votes, &label) in self.vote_table.iter().enumerate() {
            let expect = if votes > n / 2 { TrafficClass::Malicious } else { TrafficClass::Benign };
            if label != expect {
                return Err(Error::contract(format!(
                    "vote table maps {votes} of {n} votes to {label}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderConfig {
    /// Range-count cap per feature table; 256 keeps codewords in 8 bits,
    /// mirroring the switch memory budget.
    pub max_codes_per_feature: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            max_codes_per_feature: 256,
        }
    }
}

pub fn encode_model(model: &RandomForestModel) -> Result<EncodedModel> {
    encode_model_with(model, &EncoderConfig::default())
}

/// Compile the forest. Deterministic: identical models encode to
/// identical tables.
pub fn encode_model_with(model: &RandomForestModel, config: &EncoderConfig) -> Result<EncodedModel> {
    model.validate()?;

    // Distinct thresholds per feature across all trees. A threshold at
    // FIELD_MAX never sends anything right, so it contributes no range
    // boundary.
    let mut thresholds: Vec<Vec<u32>> = vec![Vec::new(); FEATURE_COUNT];
    for tree in &model.trees {
        collect_thresholds(tree, &mut thresholds);
    }
    let mut feature_tables = Vec::with_capacity(FEATURE_COUNT);
    for (f, mut bounds) in thresholds.into_iter().enumerate() {
        bounds.retain(|&b| b < FIELD_MAX);
        bounds.sort_unstable();
        bounds.dedup();
        if bounds.len() + 1 > config.max_codes_per_feature {
            return Err(Error::contract(format!(
                "feature {f} needs {} ranges, cap is {}",
                bounds.len() + 1,
                config.max_codes_per_feature
            )));
        }
        feature_tables.push(FeatureTable::from_boundaries(f, bounds));
    }

    let trees = model
        .trees
        .iter()
        .map(|tree| {
            let mut leaves = Vec::new();
            let full = [ValueInterval { lo: 0, hi: FIELD_MAX }; FEATURE_COUNT];
            emit_leaves(tree, full, &feature_tables, &mut leaves);
            leaves
        })
        .collect();

    let n = model.trees.len();
    let vote_table = (0..=n)
        .map(|votes| if votes > n / 2 { TrafficClass::Malicious } else { TrafficClass::Benign })
        .collect();

    let encoded = EncodedModel {
        feature_tables,
        trees,
        vote_table,
    };
    encoded.validate()?;
    Ok(encoded)
}

#[derive(Debug, Clone, Copy)]
struct ValueInterval {
    lo: u32,
    hi: u32,
}

fn collect_thresholds(node: &TreeNode, out: &mut [Vec<u32>]) {
    if let TreeNode::Internal { feature, threshold, left, right } = node {
        out[*feature].push(*threshold);
        collect_thresholds(left, out);
        collect_thresholds(right, out);
    }
}

/// Walk every root-to-leaf path, narrowing per-feature value intervals,
/// and emit one code-rectangle entry per reachable leaf.
fn emit_leaves(
    node: &TreeNode,
    box_: [ValueInterval; FEATURE_COUNT],
    tables: &[FeatureTable],
    out: &mut Vec<LeafEntry>,
) {
    match node {
        TreeNode::Leaf { label } => {
            let intervals = std::array::from_fn(|f| CodeInterval {
                lo: tables[f].lookup(box_[f].lo),
                hi: tables[f].lookup(box_[f].hi),
            });
            out.push(LeafEntry {
                intervals,
                label: *label,
            });
        }
        TreeNode::Internal { feature, threshold, left, right } => {
            // value <= threshold
            if box_[*feature].lo <= *threshold {
                let mut narrowed = box_;
                narrowed[*feature].hi = narrowed[*feature].hi.min(*threshold);
                emit_leaves(left, narrowed, tables, out);
            }
            // value > threshold; empty when the threshold tops the field.
            if *threshold < box_[*feature].hi {
                let mut narrowed = box_;
                narrowed[*feature].lo = narrowed[*feature].lo.max(*threshold + 1);
                emit_leaves(right, narrowed, tables, out);
            }
        }
    }
}

/// Outcome of an encoder check.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub equivalent: bool,
    /// First feature vector where the encoded path and the oracle
    /// disagreed, if any.
    pub counterexample: Option<[u32; FEATURE_COUNT]>,
    /// Structural invariant failure, if the tables are malformed.
    pub structural_error: Option<String>,
    pub boundary_vectors: u64,
    pub random_vectors: u64,
}

/// The deterministic probe set: for every boundary `b` of every feature,
/// vectors pinning that feature to `0`, `b`, `b+1`, and `FIELD_MAX`
/// (against all-zero, all-max, and seeded-random backgrounds), plus both
/// value-space corners of every leaf entry.
fn boundary_vectors(encoded: &EncodedModel, seed: u64) -> Vec<[u32; FEATURE_COUNT]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for f in 0..FEATURE_COUNT {
        let mut specials = vec![0u32, FIELD_MAX];
        for &b in &encoded.feature_tables[f].boundaries {
            specials.push(b);
            specials.push(b + 1);
        }
        let random_background: [u32; FEATURE_COUNT] = std::array::from_fn(|_| rng.gen());
        for &s in &specials {
            for background in [[0u32; FEATURE_COUNT], [FIELD_MAX; FEATURE_COUNT], random_background] {
                let mut v = background;
                v[f] = s;
                out.push(v);
            }
        }
    }
    for tree in &encoded.trees {
        for leaf in tree {
            let corner_lo: [u32; FEATURE_COUNT] = std::array::from_fn(|f| {
                encoded.feature_tables[f].entries[leaf.intervals[f].lo as usize].lo
            });
            let corner_hi: [u32; FEATURE_COUNT] = std::array::from_fn(|f| {
                encoded.feature_tables[f].entries[leaf.intervals[f].hi as usize].hi
            });
            out.push(corner_lo);
            out.push(corner_hi);
        }
    }
    out
}

/// Check the encoding against the oracle: structural invariants, the
/// deterministic boundary set, then `trials` random vectors. Returns the
/// first counterexample instead of aborting.
pub fn verify_encoding(
    model: &RandomForestModel,
    encoded: &EncodedModel,
    trials: u64,
    seed: u64,
) -> VerifyReport {
    let mut report = VerifyReport {
        equivalent: true,
        counterexample: None,
        structural_error: None,
        boundary_vectors: 0,
        random_vectors: 0,
    };
    if let Err(e) = encoded.validate() {
        report.equivalent = false;
        report.structural_error = Some(e.to_string());
        return report;
    }

    for v in boundary_vectors(encoded, seed) {
        report.boundary_vectors += 1;
        if encoded.classify(&v) != predict_vector(model, &v) {
            report.equivalent = false;
            report.counterexample = Some(v);
            return report;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB0B0_5EED);
    for _ in 0..trials {
        report.random_vectors += 1;
        let v: [u32; FEATURE_COUNT] = std::array::from_fn(|_| rng.gen());
        if encoded.classify(&v) != predict_vector(model, &v) {
            report.equivalent = false;
            report.counterexample = Some(v);
            return report;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::train::tests_support::random_model;

    fn stump(feature: usize, threshold: u32) -> RandomForestModel {
        RandomForestModel {
            trees: vec![TreeNode::Internal {
                feature,
                threshold,
                left: Box::new(TreeNode::Leaf { label: TrafficClass::Malicious }),
                right: Box::new(TreeNode::Leaf { label: TrafficClass::Benign }),
            }],
            max_depth: 1,
        }
    }

    #[test]
    fn stump_encodes_to_spec_tables() {
        let encoded = encode_model(&stump(4, 200)).unwrap();
        // min_ipd_us table splits at 200; all others are a single range.
        for (f, table) in encoded.feature_tables.iter().enumerate() {
            if f == 4 {
                assert_eq!(
                    table.entries,
                    vec![
                        RangeEntry { lo: 0, hi: 200, code: 0 },
                        RangeEntry { lo: 201, hi: FIELD_MAX, code: 1 },
                    ]
                );
            } else {
                assert_eq!(table.entries, vec![RangeEntry { lo: 0, hi: FIELD_MAX, code: 0 }]);
            }
        }
        let tree = &encoded.trees[0];
        assert_eq!(tree.len(), 2);
        assert_eq!(tree[0].label, TrafficClass::Malicious);
        assert_eq!(tree[0].intervals[4], CodeInterval { lo: 0, hi: 0 });
        assert_eq!(tree[1].label, TrafficClass::Benign);
        assert_eq!(tree[1].intervals[4], CodeInterval { lo: 1, hi: 1 });
        for f in [0usize, 1, 2, 3, 5] {
            assert_eq!(tree[0].intervals[f], CodeInterval { lo: 0, hi: 0 });
        }
        assert_eq!(encoded.vote_table, vec![TrafficClass::Benign, TrafficClass::Malicious]);
    }

    #[test]
    fn shared_thresholds_dedupe() {
        let model = RandomForestModel {
            trees: vec![stump(4, 200).trees.remove(0), stump(4, 200).trees.remove(0), stump(4, 100).trees.remove(0)],
            max_depth: 1,
        };
        let encoded = encode_model(&model).unwrap();
        assert_eq!(encoded.feature_tables[4].boundaries, vec![100, 200]);
    }

    #[test]
    fn lookup_boundary_conventions() {
        let table = FeatureTable::from_boundaries(0, vec![200]);
        assert_eq!(table.lookup(200), 0);
        assert_eq!(table.lookup(201), 1);
        assert_eq!(table.lookup(0), 0);
        assert_eq!(table.lookup(FIELD_MAX), 1);
        let table = FeatureTable::from_boundaries(0, vec![10, 10_000]);
        assert_eq!(table.lookup(500), 1);
    }

    #[test]
    fn encoding_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let model = random_model(&mut rng);
            let a = encode_model(&model).unwrap();
            let b = encode_model(&model).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn random_forests_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31337);
        for round in 0..25 {
            let model = random_model(&mut rng);
            let encoded = encode_model(&model).unwrap();
            let report = verify_encoding(&model, &encoded, 2_000, round);
            assert!(
                report.equivalent,
                "round {round}: counterexample {:?}",
                report.counterexample
            );
        }
    }

    #[test]
    fn threshold_at_field_max_stays_equivalent() {
        let model = stump(2, FIELD_MAX);
        let encoded = encode_model(&model).unwrap();
        // The right branch is unreachable: one leaf entry, no boundary.
        assert!(encoded.feature_tables[2].boundaries.is_empty());
        assert_eq!(encoded.trees[0].len(), 1);
        let report = verify_encoding(&model, &encoded, 500, 1);
        assert!(report.equivalent);
    }

    #[test]
    fn flipped_leaf_label_caught_by_boundary_set() {
        let model = stump(4, 200);
        let mut encoded = encode_model(&model).unwrap();
        encoded.trees[0][1].label = TrafficClass::Malicious;
        let report = verify_encoding(&model, &encoded, 0, 9);
        assert!(!report.equivalent);
        assert!(report.counterexample.is_some());
        assert_eq!(report.random_vectors, 0);
    }

    #[test]
    fn corrupted_partition_rejected_structurally() {
        let model = stump(4, 200);
        let mut encoded = encode_model(&model).unwrap();
        // Punch a gap into the feature table.
        encoded.feature_tables[4].entries[1].lo = 250;
        let report = verify_encoding(&model, &encoded, 0, 0);
        assert!(!report.equivalent);
        assert!(report.structural_error.is_some());
        assert!(matches!(encoded.validate(), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_trials_still_checks_boundaries() {
        let model = stump(1, 999);
        let encoded = encode_model(&model).unwrap();
        let report = verify_encoding(&model, &encoded, 0, 0);
        assert!(report.equivalent);
        assert!(report.boundary_vectors > 0);
        assert_eq!(report.random_vectors, 0);
    }

    #[test]
    fn range_cap_enforced() {
        let mut trees = Vec::new();
        for i in 0..3u32 {
            trees.push(TreeNode::Internal {
                feature: 0,
                threshold: 1000 + i,
                left: Box::new(TreeNode::Leaf { label: TrafficClass::Benign }),
                right: Box::new(TreeNode::Leaf { label: TrafficClass::Malicious }),
            });
        }
        let model = RandomForestModel { trees, max_depth: 1 };
        let tight = EncoderConfig { max_codes_per_feature: 3 };
        assert!(matches!(encode_model_with(&model, &tight), Err(Error::Contract(_))));
        assert!(encode_model(&model).is_ok());
    }

    #[test]
    fn leaf_count_accounting_on_trained_shapes() {
        // Contradiction-free trees (like trained ones): entry count equals
        // leaf count and feature tables are distinct-threshold + 1.
        let model = RandomForestModel {
            trees: vec![TreeNode::Internal {
                feature: 4,
                threshold: 1000,
                left: Box::new(TreeNode::Internal {
                    feature: 5,
                    threshold: 400,
                    left: Box::new(TreeNode::Leaf { label: TrafficClass::Malicious }),
                    right: Box::new(TreeNode::Leaf { label: TrafficClass::Benign }),
                }),
                right: Box::new(TreeNode::Leaf { label: TrafficClass::Benign }),
            }],
            max_depth: 2,
        };
        let encoded = encode_model(&model).unwrap();
        assert_eq!(encoded.trees[0].len(), model.trees[0].leaf_count());
        assert_eq!(encoded.feature_tables[4].num_codes(), 2);
        assert_eq!(encoded.feature_tables[5].num_codes(), 2);
    }
}
