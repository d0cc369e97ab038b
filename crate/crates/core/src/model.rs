//! Prediction records, deterministic rankings and LOC inspection budgets.
//!
//! Every metric in the crate reduces to "sort the entities by some key, then
//! walk the list while spending a LOC budget". This module owns both halves so
//! that tie-breaking and boundary handling are identical everywhere:
//!
//! - ties are broken by ascending entity id (byte order);
//! - an entity that would cross the budget is not inspected, and nothing after
//!   it is either (the inspected set is always a prefix).

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::{Error, Result};

/// Relative slack applied to LOC budgets so that exact percentages such as
/// 20% of 200 LOC are not lost to floating-point rounding.
pub const BUDGET_SLACK: f64 = 1e-9;

/// One predicted entity (file, class, method or commit).
#[derive(Debug, Clone, PartialEq)]
pub struct EntityPrediction {
    pub id: String,
    /// Size in LOC, at least 1.
    pub size: u64,
    /// Predicted probability of being defective, in `[0, 1]`.
    pub score: f64,
    /// Ground truth.
    pub actual: bool,
    /// LOC touched in the release, when known.
    pub touched_size: Option<u64>,
}

impl EntityPrediction {
    pub fn new(id: impl Into<String>, size: u64, score: f64, actual: bool) -> Result<Self> {
        let entity = Self {
            id: id.into(),
            size,
            score,
            actual,
            touched_size: None,
        };
        entity.validate()?;
        Ok(entity)
    }

    pub fn with_touched(mut self, touched: u64) -> Self {
        self.touched_size = Some(touched);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 1 {
            return Err(Error::InvalidEntity {
                id: self.id.clone(),
                reason: "size must be at least 1 LOC".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidEntity {
                id: self.id.clone(),
                reason: format!("score {} outside [0, 1]", self.score),
            });
        }
        Ok(())
    }
}

/// A named collection of predictions: one classifier applied to one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    name: String,
    records: Vec<EntityPrediction>,
    total_loc: u64,
}

impl PredictionSet {
    pub fn new(name: impl Into<String>, records: Vec<EntityPrediction>) -> Result<Self> {
        let name = name.into();
        if records.is_empty() {
            return Err(Error::EmptySet(name));
        }
        let mut seen = HashSet::with_capacity(records.len());
        let mut total_loc = 0u64;
        for record in &records {
            record.validate()?;
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateId(record.id.clone()));
            }
            total_loc = total_loc.checked_add(record.size).ok_or_else(|| {
                Error::invalid(format!("total LOC of `{name}` overflows"))
            })?;
        }
        Ok(Self {
            name,
            records,
            total_loc,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[EntityPrediction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_loc(&self) -> u64 {
        self.total_loc
    }

    pub fn defective_count(&self) -> usize {
        self.records.iter().filter(|r| r.actual).count()
    }

    pub fn rank(&self, policy: RankingPolicy) -> Ranking {
        rank(self, policy)
    }

    /// Same entities under a new name and new scores (aligned with `records`).
    pub fn with_scores(&self, name: impl Into<String>, scores: &[f64]) -> Result<Self> {
        if scores.len() != self.records.len() {
            return Err(Error::invalid(format!(
                "expected {} scores, got {}",
                self.records.len(),
                scores.len()
            )));
        }
        let records = self
            .records
            .iter()
            .zip(scores)
            .map(|(r, &score)| EntityPrediction { score, ..r.clone() })
            .collect();
        Self::new(name, records)
    }
}

/// Ordering key used to rank a [`PredictionSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankingPolicy {
    /// Highest predicted probability first (PofB, IFA, PCI).
    ScoreDescending,
    /// Highest predicted probability per LOC first (NPofB, Popt's predicted curve).
    ScoreDensityDescending,
    /// Highest actual defects per LOC first (Popt's optimal curve).
    ActualDensityDescending,
}

/// Entities in inspection order with running LOC and defect totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    order: Vec<usize>,
    ids: Vec<String>,
    cumulative_loc: Vec<u64>,
    cumulative_defectives: Vec<usize>,
}

impl Ranking {
    /// Entity ids in inspection order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Indices into the originating set's records, in inspection order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn cumulative_loc(&self) -> &[u64] {
        &self.cumulative_loc
    }

    pub fn cumulative_defectives(&self) -> &[usize] {
        &self.cumulative_defectives
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn total_loc(&self) -> u64 {
        self.cumulative_loc.last().copied().unwrap_or(0)
    }

    pub fn total_defectives(&self) -> usize {
        self.cumulative_defectives.last().copied().unwrap_or(0)
    }

    /// Whether the entity at `position` is actually defective.
    pub fn is_defective_at(&self, position: usize) -> bool {
        let before = if position == 0 {
            0
        } else {
            self.cumulative_defectives[position - 1]
        };
        self.cumulative_defectives[position] > before
    }

    /// Number of leading entities that fit entirely in `x`% of the LOC.
    pub fn prefix_len(&self, x: f64) -> Result<usize> {
        check_percent(x)?;
        let budget = x / 100.0 * self.total_loc() as f64;
        let limit = budget * (1.0 + BUDGET_SLACK);
        Ok(self
            .cumulative_loc
            .partition_point(|&loc| loc as f64 <= limit))
    }

    /// Number of defective entities among the first `x`% of the LOC.
    pub fn defectives_within(&self, x: f64) -> Result<usize> {
        let len = self.prefix_len(x)?;
        Ok(if len == 0 {
            0
        } else {
            self.cumulative_defectives[len - 1]
        })
    }

    /// Ids of the entities fully inspected within `x`% of the LOC.
    pub fn inspection_prefix(&self, x: f64) -> Result<Vec<&str>> {
        let len = self.prefix_len(x)?;
        Ok(self.ids[..len].iter().map(String::as_str).collect())
    }
}

pub(crate) fn check_percent(x: f64) -> Result<()> {
    if (0.0..=100.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::PercentOutOfRange(x))
    }
}

/// Rank a set under `policy`; ties go to the smaller id.
pub fn rank(set: &PredictionSet, policy: RankingPolicy) -> Ranking {
    let records = set.records();
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        let key = match policy {
            RankingPolicy::ScoreDescending => rb.score.total_cmp(&ra.score),
            RankingPolicy::ScoreDensityDescending => {
                cmp_density(rb.score, rb.size, ra.score, ra.size)
            }
            RankingPolicy::ActualDensityDescending => cmp_density(
                f64::from(u8::from(rb.actual)),
                rb.size,
                f64::from(u8::from(ra.actual)),
                ra.size,
            ),
        };
        key.then_with(|| ra.id.cmp(&rb.id))
    });

    let mut ids = Vec::with_capacity(order.len());
    let mut cumulative_loc = Vec::with_capacity(order.len());
    let mut cumulative_defectives = Vec::with_capacity(order.len());
    let (mut loc, mut defectives) = (0u64, 0usize);
    for &i in &order {
        let r = &records[i];
        loc += r.size;
        defectives += usize::from(r.actual);
        ids.push(r.id.clone());
        cumulative_loc.push(loc);
        cumulative_defectives.push(defectives);
    }
    Ranking {
        order,
        ids,
        cumulative_loc,
        cumulative_defectives,
    }
}

/// Compare `score_a / size_a` with `score_b / size_b` exactly.
///
/// Cross-multiplies in integer arithmetic over the f64 mantissas, so equal
/// sizes reduce to a plain score comparison and the order is total.
pub fn cmp_density(score_a: f64, size_a: u64, score_b: f64, size_b: u64) -> Ordering {
    let (ma, ea) = decompose(score_a);
    let (mb, eb) = decompose(score_b);
    cmp_scaled(
        u128::from(ma) * u128::from(size_b),
        ea,
        u128::from(mb) * u128::from(size_a),
        eb,
    )
}

/// Non-negative finite f64 as `mantissa * 2^exponent`.
fn decompose(value: f64) -> (u64, i32) {
    debug_assert!(value >= 0.0 && value.is_finite());
    let bits = value.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

fn cmp_scaled(ma: u128, ea: i32, mb: u128, eb: i32) -> Ordering {
    match (ma == 0, mb == 0) {
        (true, true) => return Ordering::Equal,
        (true, false) => return Ordering::Less,
        (false, true) => return Ordering::Greater,
        _ => {}
    }
    let la = 128 - ma.leading_zeros() as i32 + ea;
    let lb = 128 - mb.leading_zeros() as i32 + eb;
    if la != lb {
        return la.cmp(&lb);
    }
    // Same magnitude: align exponents; the shifted value has at most the
    // other operand's bit length, so it fits.
    match ea.cmp(&eb) {
        Ordering::Greater => (ma << (ea - eb) as u32).cmp(&mb),
        Ordering::Less => ma.cmp(&(mb << (eb - ea) as u32)),
        Ordering::Equal => ma.cmp(&mb),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entity(id: &str, size: u64, score: f64, actual: bool) -> EntityPrediction {
        EntityPrediction::new(id, size, score, actual).unwrap()
    }

    fn f1() -> PredictionSet {
        PredictionSet::new(
            "f1",
            vec![
                entity("A", 100, 0.9, true),
                entity("B", 50, 0.8, false),
                entity("C", 30, 0.6, true),
                entity("D", 20, 0.95, false),
            ],
        )
        .unwrap()
    }

    #[test]
    fn score_descending_orders_by_score() {
        let set = PredictionSet::new(
            "s",
            vec![entity("B", 10, 0.1, false), entity("A", 10, 0.9, true)],
        )
        .unwrap();
        assert_eq!(set.rank(RankingPolicy::ScoreDescending).ids(), ["A", "B"]);
    }

    #[test]
    fn density_order_matches_hand_computation() {
        // densities: A 0.009, B 0.016, C 0.02, D 0.0475
        let r = f1().rank(RankingPolicy::ScoreDensityDescending);
        assert_eq!(r.ids(), ["D", "C", "B", "A"]);
        assert_eq!(r.cumulative_loc(), [20, 50, 100, 200]);
        assert_eq!(r.cumulative_defectives(), [0, 1, 1, 2]);
    }

    #[test]
    fn equal_scores_fall_back_to_id() {
        let set = PredictionSet::new(
            "s",
            vec![
                entity("c", 5, 0.5, false),
                entity("a", 7, 0.5, false),
                entity("b", 1, 0.5, true),
            ],
        )
        .unwrap();
        assert_eq!(set.rank(RankingPolicy::ScoreDescending).ids(), ["a", "b", "c"]);
    }

    #[test]
    fn actual_density_puts_small_defectives_first() {
        let r = f1().rank(RankingPolicy::ActualDensityDescending);
        assert_eq!(r.ids(), ["C", "A", "B", "D"]);
    }

    #[test]
    fn prefix_budget_boundaries() {
        let r = f1().rank(RankingPolicy::ScoreDescending);
        assert_eq!(r.ids(), ["D", "A", "B", "C"]);
        assert!(r.inspection_prefix(0.0).unwrap().is_empty());
        assert_eq!(r.inspection_prefix(100.0).unwrap().len(), 4);
        assert_eq!(r.inspection_prefix(20.0).unwrap(), ["D"]);
        // exactly 120 of 200 LOC
        assert_eq!(r.inspection_prefix(60.0).unwrap(), ["D", "A"]);
        // B would fit at 85% (170 LOC) but the prefix ends at the crossing entity
        assert_eq!(r.inspection_prefix(84.0).unwrap(), ["D", "A"]);
        assert_eq!(r.inspection_prefix(85.0).unwrap(), ["D", "A", "B"]);
    }

    #[test]
    fn out_of_range_percent_is_rejected() {
        let r = f1().rank(RankingPolicy::ScoreDescending);
        assert_eq!(r.prefix_len(-1.0), Err(Error::PercentOutOfRange(-1.0)));
        assert!(r.prefix_len(100.5).is_err());
        assert!(r.prefix_len(f64::NAN).is_err());
    }

    #[test]
    fn set_validation() {
        assert!(matches!(
            PredictionSet::new("e", vec![]),
            Err(Error::EmptySet(_))
        ));
        assert!(EntityPrediction::new("z", 0, 0.5, true).is_err());
        assert!(EntityPrediction::new("z", 1, 1.5, true).is_err());
        assert!(EntityPrediction::new("z", 1, f64::NAN, true).is_err());
        let dup = PredictionSet::new(
            "d",
            vec![entity("x", 1, 0.1, true), entity("x", 2, 0.2, false)],
        );
        assert_eq!(dup, Err(Error::DuplicateId("x".into())));
    }

    #[test]
    fn exact_density_comparison() {
        assert_eq!(cmp_density(0.9, 100, 0.8, 50), Ordering::Less);
        assert_eq!(cmp_density(0.5, 2, 0.25, 1), Ordering::Equal);
        assert_eq!(cmp_density(0.0, 1, 0.0, 7), Ordering::Equal);
        assert_eq!(cmp_density(0.0, 1, 1e-300, 1 << 40), Ordering::Less);
        // 0.1*3 and 0.3 are different doubles; the comparison must see that
        assert_eq!(cmp_density(0.1, 1, 0.3, 3), (0.1f64 * 3.0).total_cmp(&0.3));
        assert_eq!(cmp_density(f64::MIN_POSITIVE / 4.0, 1, f64::MIN_POSITIVE / 8.0, 1), Ordering::Greater);
    }

    fn arb_set() -> impl Strategy<Value = PredictionSet> {
        prop::collection::vec((1u64..60, 0.0f64..=1.0, any::<bool>()), 1..15).prop_map(|rows| {
            let records = rows
                .into_iter()
                .enumerate()
                .map(|(i, (size, score, actual))| {
                    entity(&format!("e{i:02}"), size, score, actual)
                })
                .collect();
            PredictionSet::new("p", records).unwrap()
        })
    }

    proptest! {
        #[test]
        fn rank_is_a_permutation(set in arb_set()) {
            for policy in [
                RankingPolicy::ScoreDescending,
                RankingPolicy::ScoreDensityDescending,
                RankingPolicy::ActualDensityDescending,
            ] {
                let r = set.rank(policy);
                let mut got: Vec<_> = r.ids().to_vec();
                let mut want: Vec<_> = set.records().iter().map(|e| e.id.clone()).collect();
                got.sort();
                want.sort();
                prop_assert_eq!(got, want);
                prop_assert!(r.cumulative_loc().windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(r.total_loc(), set.total_loc());
                prop_assert_eq!(&r, &set.rank(policy));
            }
        }

        #[test]
        fn prefix_is_monotone_in_budget(set in arb_set(), a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
            let r = set.rank(RankingPolicy::ScoreDescending);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(r.prefix_len(lo).unwrap() <= r.prefix_len(hi).unwrap());
        }

        #[test]
        fn score_order_survives_monotone_maps(set in arb_set(), power in 0.2f64..5.0) {
            let mapped: Vec<f64> = set.records().iter().map(|e| e.score.powf(power)).collect();
            let other = set.with_scores("m", &mapped).unwrap();
            // powf can merge nearly-equal scores, so only compare when it kept them apart
            let distinct = |s: &PredictionSet| {
                let mut v: Vec<f64> = s.records().iter().map(|e| e.score).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len()
            };
            prop_assume!(distinct(&set) == distinct(&other));
            prop_assert_eq!(
                set.rank(RankingPolicy::ScoreDescending).ids().to_vec(),
                other.rank(RankingPolicy::ScoreDescending).ids().to_vec()
            );
        }

        #[test]
        fn density_order_survives_power_of_two_rescaling(set in arb_set(), k in 1i32..20) {
            let factor = 2f64.powi(-k);
            let scaled: Vec<f64> = set.records().iter().map(|e| e.score * factor).collect();
            let other = set.with_scores("s", &scaled).unwrap();
            prop_assert_eq!(
                set.rank(RankingPolicy::ScoreDensityDescending).ids().to_vec(),
                other.rank(RankingPolicy::ScoreDensityDescending).ids().to_vec()
            );
        }

        #[test]
        fn equal_sizes_give_identical_score_and_density_orders(
            scores in prop::collection::vec(0.0f64..=1.0, 1..20),
            size in 1u64..1000,
        ) {
            let records = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| entity(&format!("{i}"), size, s, i % 2 == 0))
                .collect();
            let set = PredictionSet::new("eq", records).unwrap();
            prop_assert_eq!(
                set.rank(RankingPolicy::ScoreDescending).ids().to_vec(),
                set.rank(RankingPolicy::ScoreDensityDescending).ids().to_vec()
            );
        }

        #[test]
        fn density_cmp_agrees_with_division_when_far_apart(
            sa in 0.0f64..=1.0, za in 1u64..10_000, sb in 0.0f64..=1.0, zb in 1u64..10_000
        ) {
            let (da, db) = (sa / za as f64, sb / zb as f64);
            prop_assume!((da - db).abs() > 1e-12 * da.max(db));
            prop_assert_eq!(cmp_density(sa, za, sb, zb), da.total_cmp(&db));
        }
    }
}
