//! Threshold metrics over a confusion matrix, plus threshold-free AUC.
//!
//! Ratios with a zero denominator evaluate to `0.0` and carry
//! [`MetricValue::undefined`] so that averaged reports never see NaN.

use crate::model::PredictionSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn actual_positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn actual_negatives(&self) -> u64 {
        self.fp + self.tn
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.tn += rhs.tn;
        self.fn_ += rhs.fn_;
    }
}

/// A metric value with the undefined-denominator flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub undefined: bool,
}

impl MetricValue {
    fn defined(value: f64) -> Self {
        Self {
            value,
            undefined: false,
        }
    }

    fn undefined() -> Self {
        Self {
            value: 0.0,
            undefined: true,
        }
    }

    fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Self::undefined()
        } else {
            Self::defined(num / den)
        }
    }
}

/// Entities with `score >= threshold` are predicted defective.
pub fn confusion_at_threshold(set: &PredictionSet, threshold: f64) -> Result<ConfusionCounts> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::ThresholdOutOfRange(threshold));
    }
    let mut c = ConfusionCounts::default();
    for e in set.records() {
        match (e.score >= threshold, e.actual) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn precision(c: &ConfusionCounts) -> MetricValue {
    MetricValue::ratio(c.tp as f64, (c.tp + c.fp) as f64)
}

pub fn recall(c: &ConfusionCounts) -> MetricValue {
    MetricValue::ratio(c.tp as f64, c.actual_positives() as f64)
}

/// Harmonic mean of precision and recall; inherits their undefined flags.
pub fn f1(c: &ConfusionCounts) -> MetricValue {
    let p = precision(c);
    let r = recall(c);
    let mut out = MetricValue::ratio(2.0 * p.value * r.value, p.value + r.value);
    out.undefined |= p.undefined || r.undefined;
    out
}

/// Probability of false alarm, FP / (FP + TN).
pub fn false_alarm_rate(c: &ConfusionCounts) -> MetricValue {
    MetricValue::ratio(c.fp as f64, c.actual_negatives() as f64)
}

/// Matthews correlation coefficient.
pub fn mcc(c: &ConfusionCounts) -> MetricValue {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0.0) {
        return MetricValue::undefined();
    }
    let den = factors.iter().map(|f| f.sqrt()).product::<f64>();
    let value = (tp * tn - fp * fn_) / den;
    MetricValue::defined(value.clamp(-1.0, 1.0))
}

/// `2·recall·(1−pf) / (recall + (1−pf))`.
pub fn gmeasure(c: &ConfusionCounts) -> MetricValue {
    let r = recall(c);
    let pf = false_alarm_rate(c);
    let specificity = 1.0 - pf.value;
    let mut out = MetricValue::ratio(2.0 * r.value * specificity, r.value + specificity);
    out.undefined |= r.undefined || pf.undefined;
    out
}

/// Actual-positive prevalence, (TP + FN) / total.
pub fn inspection_ratio(c: &ConfusionCounts) -> Result<f64> {
    match c.total() {
        0 => Err(Error::invalid("inspection ratio of empty confusion counts")),
        total => Ok(c.actual_positives() as f64 / total as f64),
    }
}

/// Rank-sum (Mann–Whitney) AUC: the chance that a random defective entity
/// outscores a random clean one, ties counting one half.
pub fn auc(set: &PredictionSet) -> Result<f64> {
    let scores: Vec<(f64, bool)> = set.records().iter().map(|e| (e.score, e.actual)).collect();
    auc_from_scores(&scores)
}

pub fn auc_from_scores(scored: &[(f64, bool)]) -> Result<f64> {
    let positives = scored.iter().filter(|(_, a)| *a).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of doubled midranks of the positives, kept integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start;
        while end + 1 < sorted.len() && sorted[end + 1].0 == sorted[start].0 {
            end += 1;
        }
        // ranks start+1 ..= end+1, doubled midrank = start + end + 2
        let doubled_mid = (start + end + 2) as u128;
        let pos_in_tie = sorted[start..=end].iter().filter(|(_, a)| *a).count() as u128;
        doubled_rank_sum += doubled_mid * pos_in_tie;
        start = end + 1;
    }
    let (p, n) = (positives as u128, negatives as u128);
    // 2U = 2R - p(p+1)
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * n) as f64)
}

/// `Σ wᵢvᵢ / Σ wᵢ`.
pub fn stratified_weighted_average(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    let weighted: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    Ok(weighted / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntityPrediction;
    use proptest::prelude::*;

    fn set(rows: &[(f64, bool)]) -> PredictionSet {
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(s, a))| EntityPrediction::new(format!("e{i}"), 10, s, a).unwrap())
            .collect();
        PredictionSet::new("t", records).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let all = set(&[(1.0, true), (1.0, true), (1.0, true)]);
        assert_eq!(confusion_at_threshold(&all, 0.5).unwrap(), ConfusionCounts::new(3, 0, 0, 0));
        let sep = set(&[(0.9, true), (0.4, false)]);
        assert_eq!(confusion_at_threshold(&sep, 0.5).unwrap(), ConfusionCounts::new(1, 0, 1, 0));
        let inv = set(&[(0.9, false), (0.4, true)]);
        assert_eq!(confusion_at_threshold(&inv, 0.5).unwrap(), ConfusionCounts::new(0, 1, 0, 1));
        // boundary: score equal to the threshold is positive
        let edge = set(&[(0.5, true)]);
        assert_eq!(confusion_at_threshold(&edge, 0.5).unwrap().tp, 1);
        assert!(confusion_at_threshold(&edge, 1.5).is_err());
    }

    #[test]
    fn precision_recall_f1() {
        let perfect = ConfusionCounts::new(1, 0, 0, 0);
        assert_eq!(precision(&perfect).value, 1.0);
        assert_eq!(recall(&perfect).value, 1.0);
        assert_eq!(f1(&perfect).value, 1.0);

        let c = ConfusionCounts::new(2, 1, 0, 1);
        assert!((precision(&c).value - 2.0 / 3.0).abs() < 1e-12);
        assert!((recall(&c).value - 2.0 / 3.0).abs() < 1e-12);
        assert!((f1(&c).value - 2.0 / 3.0).abs() < 1e-12);

        let none = ConfusionCounts::new(0, 0, 0, 3);
        let p = precision(&none);
        assert_eq!((p.value, p.undefined), (0.0, true));
        assert_eq!(recall(&none), MetricValue { value: 0.0, undefined: false });
        assert_eq!(f1(&none).value, 0.0);
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&ConfusionCounts::new(1, 0, 1, 0)).value, 1.0);
        let m = mcc(&ConfusionCounts::new(50, 10, 30, 10));
        assert!((m.value - 1400.0 / 2400.0).abs() < 1e-12);
        assert_eq!(mcc(&ConfusionCounts::new(0, 1, 0, 1)).value, -1.0);
        let degenerate = mcc(&ConfusionCounts::new(3, 0, 0, 0));
        assert!(degenerate.undefined);
        assert_eq!(degenerate.value, 0.0);
    }

    #[test]
    fn gmeasure_examples() {
        assert_eq!(gmeasure(&ConfusionCounts::new(4, 0, 5, 0)).value, 1.0);
        let g = gmeasure(&ConfusionCounts::new(1, 1, 3, 1));
        assert!((g.value - 0.6).abs() < 1e-12);
        assert_eq!(gmeasure(&ConfusionCounts::new(0, 2, 2, 3)).value, 0.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&set(&[(0.9, true), (0.1, false)])).unwrap(), 1.0);
        let a = auc(&set(&[(0.8, true), (0.4, true), (0.6, false), (0.2, false)])).unwrap();
        assert_eq!(a, 0.75);
        assert_eq!(auc(&set(&[(0.5, true), (0.5, false)])).unwrap(), 0.5);
        assert_eq!(auc(&set(&[(0.5, true), (0.7, true)])), Err(Error::SingleClass));
    }

    #[test]
    fn inspection_ratio_examples() {
        assert_eq!(inspection_ratio(&ConfusionCounts::new(2, 3, 4, 1)).unwrap(), 0.3);
        assert_eq!(inspection_ratio(&ConfusionCounts::new(0, 3, 4, 0)).unwrap(), 0.0);
        assert_eq!(inspection_ratio(&ConfusionCounts::new(2, 0, 0, 5)).unwrap(), 1.0);
        assert!(inspection_ratio(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn weighted_average_examples() {
        assert!((stratified_weighted_average(&[1.0, 0.0], &[10.0, 90.0]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(stratified_weighted_average(&[0.2, 0.4], &[3.0, 3.0]).unwrap(), 0.30000000000000004);
        assert_eq!(stratified_weighted_average(&[0.7], &[5.0]).unwrap(), 0.7);
        assert!(stratified_weighted_average(&[0.7], &[0.0]).is_err());
        assert!(stratified_weighted_average(&[0.7, 0.1], &[1.0]).is_err());
        assert!(stratified_weighted_average(&[0.7], &[-1.0]).is_err());
    }

    /// Trapezoidal area under the ROC obtained by sweeping every distinct score.
    fn roc_sweep_auc(scored: &[(f64, bool)]) -> f64 {
        let pos = scored.iter().filter(|s| s.1).count() as f64;
        let neg = scored.len() as f64 - pos;
        let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (mut prev_fpr, mut prev_tpr, mut area) = (0.0, 0.0, 0.0);
        for t in thresholds {
            let tp = scored.iter().filter(|s| s.1 && s.0 >= t).count() as f64;
            let fp = scored.iter().filter(|s| !s.1 && s.0 >= t).count() as f64;
            let (fpr, tpr) = (fp / neg, tp / pos);
            area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
            prev_fpr = fpr;
            prev_tpr = tpr;
        }
        area
    }

    fn arb_scored() -> impl Strategy<Value = Vec<(f64, bool)>> {
        // coarse scores to force ties
        prop::collection::vec((0u8..=10, any::<bool>()), 2..40)
            .prop_map(|v| v.into_iter().map(|(s, a)| (f64::from(s) / 10.0, a)).collect())
            .prop_filter("both classes", |v: &Vec<(f64, bool)>| {
                v.iter().any(|s| s.1) && v.iter().any(|s| !s.1)
            })
    }

    proptest! {
        #[test]
        fn auc_matches_roc_sweep(scored in arb_scored()) {
            let a = auc_from_scores(&scored).unwrap();
            prop_assert!((a - roc_sweep_auc(&scored)).abs() < 1e-12);
        }

        #[test]
        fn auc_flips_with_labels(scored in arb_scored()) {
            let flipped: Vec<_> = scored.iter().map(|&(s, a)| (s, !a)).collect();
            let sum = auc_from_scores(&scored).unwrap() + auc_from_scores(&flipped).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auc_ignores_monotone_maps(scored in arb_scored()) {
            let mapped: Vec<_> = scored.iter().map(|&(s, a)| (s * s * 0.5 + 0.1, a)).collect();
            prop_assert_eq!(auc_from_scores(&scored).unwrap(), auc_from_scores(&mapped).unwrap());
        }

        #[test]
        fn counts_partition_the_set(scored in arb_scored(), t in 0.0f64..=1.0) {
            let s = set(&scored);
            prop_assert_eq!(confusion_at_threshold(&s, t).unwrap().total() as usize, s.len());
        }

        #[test]
        fn metric_ranges(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            let c = ConfusionCounts::new(tp, fp, tn, fn_);
            for m in [precision(&c), recall(&c), f1(&c), gmeasure(&c)] {
                prop_assert!((0.0..=1.0).contains(&m.value));
            }
            prop_assert!((-1.0..=1.0).contains(&mcc(&c).value));
            if c.total() > 0 {
                prop_assert!((0.0..=1.0).contains(&inspection_ratio(&c).unwrap()));
            }
        }
    }
}
