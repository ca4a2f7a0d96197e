//! Inference-threshold study: macro-F1 as a function of the packet-count
//! threshold, marginal gains, and the operating-point selection.

use crate::forest::metrics::Fraction;
use crate::forest::{evaluate_at, FlowSample, RandomForestModel};
use crate::{Error, Result};

/// Everything the study produces. Marginal gains are exact differences of
/// exact fractions, so `m_of_t` reconstructs from `delta_m` by prefix
/// summation with no rounding residue.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub t_first: u32,
    pub t_last: u32,
    /// Macro-F1 per threshold, for `t_first..=t_last`.
    pub m_of_t: Vec<(u32, Fraction)>,
    /// `M(T) - M(T-1)` for `t_first+1..=t_last`.
    pub delta_m: Vec<(u32, Fraction)>,
    /// Flows shorter than each threshold (excluded from that M(T)).
    pub undecided: Vec<(u32, usize)>,
    pub epsilon: Fraction,
    pub t_star: u32,
    /// False when no marginal gain fell within epsilon and `t_star` was
    /// pinned to the end of the range.
    pub saturated: bool,
}

/// Selection rule: the smallest threshold whose marginal gain is within
/// `epsilon`, i.e. the first point where one more packet no longer buys a
/// meaningful macro-F1 improvement. Falls back to the last threshold
/// (flagged) when every gain stays above the margin.
pub fn select_t_star(m_of_t: &[(u32, Fraction)], epsilon: Fraction) -> (u32, bool, Vec<(u32, Fraction)>) {
    let mut deltas = Vec::with_capacity(m_of_t.len().saturating_sub(1));
    for pair in m_of_t.windows(2) {
        deltas.push((pair[1].0, pair[1].1 - pair[0].1));
    }
    for &(t, delta) in &deltas {
        if delta <= epsilon {
            return (t, true, deltas);
        }
    }
    (m_of_t.last().map(|&(t, _)| t).unwrap_or(0), false, deltas)
}

/// Evaluate the fixed model at every threshold in `t_first..=t_last` and
/// apply the selection rule. One model serves all thresholds, matching
/// the deployed pipeline where the same tables answer provisional and
/// final decisions.
pub fn threshold_sweep(
    samples: &[FlowSample],
    model: &RandomForestModel,
    t_first: u32,
    t_last: u32,
    epsilon: Fraction,
) -> Result<SweepResult> {
    if t_first < 2 {
        return Err(Error::config(
            "threshold range must start at 2: no features exist at the first packet",
        ));
    }
    if t_first > t_last {
        return Err(Error::config("empty threshold range"));
    }

    let mut m_of_t = Vec::new();
    let mut undecided_counts = Vec::new();
    for t in t_first..=t_last {
        let (metrics, undecided) = evaluate_at(model, samples.iter(), t);
        let Some(metrics) = metrics else {
            return Err(Error::contract(format!("no flow reaches threshold {t}")));
        };
        m_of_t.push((t, metrics.macro_f1));
        undecided_counts.push((t, undecided));
    }

    let (t_star, saturated, delta_m) = select_t_star(&m_of_t, epsilon);
    Ok(SweepResult {
        t_first,
        t_last,
        m_of_t,
        delta_m,
        undecided: undecided_counts,
        epsilon,
        t_star,
        saturated,
    })
}
