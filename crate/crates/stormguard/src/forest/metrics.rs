//! Classification metrics in exact rational arithmetic.
//!
//! Counts are folded into fractions and only rendered to decimals at the
//! edge, so reported numbers never accumulate float error and reruns are
//! bit-identical.

use num::rational::Ratio;
use num::{One, Zero};

use crate::flow::TrafficClass;

/// Exact metric value; always in `[0, 1]` for the metrics here.
pub type Fraction = Ratio<i128>;

/// Confusion counts with malicious as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn observe(&mut self, truth: TrafficClass, predicted: TrafficClass) {
        match (truth, predicted) {
            (TrafficClass::Malicious, TrafficClass::Malicious) => self.true_pos += 1,
            (TrafficClass::Benign, TrafficClass::Benign) => self.true_neg += 1,
            (TrafficClass::Benign, TrafficClass::Malicious) => self.false_pos += 1,
            (TrafficClass::Malicious, TrafficClass::Benign) => self.false_neg += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    /// The same counts with the class roles swapped (benign as positive).
    pub fn inverted(&self) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: self.true_neg,
            true_neg: self.true_pos,
            false_pos: self.false_neg,
            false_neg: self.false_pos,
        }
    }
}

/// Fraction of correct decisions; `None` when there is no data at all.
pub fn accuracy(c: &ConfusionCounts) -> Option<Fraction> {
    if c.total() == 0 {
        return None;
    }
    Some(Fraction::new(
        (c.true_pos + c.true_neg) as i128,
        c.total() as i128,
    ))
}

/// Harmonic mean of precision and recall: `2tp / (2tp + fp + fn)`.
/// Defined as 0 when the denominator vanishes so macro averages stay
/// total; callers can flag the degenerate case via [`f1_is_degenerate`].
pub fn f1_binary(c: &ConfusionCounts) -> Fraction {
    let denom = 2 * c.true_pos + c.false_pos + c.false_neg;
    if denom == 0 {
        return Fraction::zero();
    }
    Fraction::new(2 * c.true_pos as i128, denom as i128)
}

pub fn f1_is_degenerate(c: &ConfusionCounts) -> bool {
    2 * c.true_pos + c.false_pos + c.false_neg == 0
}

/// Accuracy plus the two F1 aggregations over both classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateMetrics {
    pub confusion: ConfusionCounts,
    pub accuracy: Fraction,
    pub f1_malicious: Fraction,
    pub f1_benign: Fraction,
    pub macro_f1: Fraction,
    pub weighted_f1: Fraction,
    /// Either per-class F1 hit its degenerate zero-denominator case.
    pub degenerate: bool,
}

/// Compute the aggregate metrics from aligned prediction/truth pairs.
/// Returns `None` for empty input.
pub fn f1_aggregates(
    pairs: impl IntoIterator<Item = (TrafficClass, TrafficClass)>,
) -> Option<AggregateMetrics> {
    let mut confusion = ConfusionCounts::default();
    for (truth, predicted) in pairs {
        confusion.observe(truth, predicted);
    }
    aggregates_from_confusion(&confusion)
}

pub fn aggregates_from_confusion(confusion: &ConfusionCounts) -> Option<AggregateMetrics> {
    if confusion.total() == 0 {
        return None;
    }
    let f1_malicious = f1_binary(confusion);
    let inverted = confusion.inverted();
    let f1_benign = f1_binary(&inverted);
    let support_m = (confusion.true_pos + confusion.false_neg) as i128;
    let support_b = (confusion.true_neg + confusion.false_pos) as i128;
    let total = support_m + support_b;
    let macro_f1 = (f1_malicious + f1_benign) / Fraction::new(2, 1);
    let weighted_f1 = f1_malicious * Fraction::new(support_m, total)
        + f1_benign * Fraction::new(support_b, total);
    Some(AggregateMetrics {
        confusion: *confusion,
        accuracy: accuracy(confusion).expect("nonzero total"),
        f1_malicious,
        f1_benign,
        macro_f1,
        weighted_f1,
        degenerate: f1_is_degenerate(confusion) || f1_is_degenerate(&inverted),
    })
}

/// Render an exact fraction as a fixed-point decimal (round half up),
/// e.g. `fraction_decimal(Fraction::new(19, 20), 4) == "0.9500"`.
pub fn fraction_decimal(value: Fraction, places: u32) -> String {
    let negative = value < Fraction::zero();
    let v = if negative { -value } else { value };
    let scale = 10i128.pow(places);
    let scaled = v.numer() * scale;
    let mut q = scaled / v.denom();
    let r = scaled % v.denom();
    if 2 * r >= *v.denom() {
        q += 1;
    }
    let int_part = q / scale;
    let frac_part = q % scale;
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part:0width$}", width = places as usize)
    }
}

pub fn fraction_f64(value: Fraction) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

/// Exact fraction from a decimal or `a/b` literal, for knobs like the
/// sweep margin.
pub fn parse_fraction(s: &str) -> Option<Fraction> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: i128 = num.trim().parse().ok()?;
        let den: i128 = den.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(Fraction::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let int: i128 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
        let scale = 10i128.checked_pow(frac_part.len() as u32)?;
        let frac: i128 = frac_part.parse().ok()?;
        let sign = if s.starts_with('-') { -1 } else { 1 };
        return Some(Fraction::new(int * scale + sign * frac, scale));
    }
    s.parse::<i128>().ok().map(Fraction::from_integer)
}

impl ConfusionCounts {
    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }
}

pub fn one() -> Fraction {
    Fraction::one()
}
