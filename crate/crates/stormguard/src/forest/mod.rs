//! Dataset construction, random-forest training, the inference oracle,
//! and classification metrics.

pub mod dataset;
pub mod metrics;
pub mod train;

pub use dataset::{extract_dataset, split_dataset, Dataset, FlowSample};
pub use metrics::{
    accuracy, f1_aggregates, f1_binary, fraction_decimal, fraction_f64, AggregateMetrics,
    ConfusionCounts, Fraction,
};
pub use train::{
    predict_oracle, predict_vector, train_forest, RandomForestModel, TrainParams, TreeNode,
};

/// Score `model` on every sample that reached threshold `t`, via the
/// full-precision oracle. Returns the metrics (None when no sample
/// qualified) and how many samples were too short to decide.
pub fn evaluate_at<'a>(
    model: &RandomForestModel,
    samples: impl IntoIterator<Item = &'a FlowSample>,
    t: u32,
) -> (Option<AggregateMetrics>, usize) {
    let mut undecided = 0usize;
    let mut pairs = Vec::new();
    for sample in samples {
        match sample.features_at(t) {
            Some(features) => pairs.push((sample.truth, predict_oracle(model, features))),
            None => undecided += 1,
        }
    }
    (f1_aggregates(pairs), undecided)
}
