//! Scoring static application security testing tools (SASTTs) on a labelled
//! test suite such as Juliet.
//!
//! Every test case is a `bad` (vulnerable) or `good` (fixed) variant of some
//! CWE. A tool's finding on a case is mapped to TP/FP/TN/FN by comparing the
//! CWE it reports with the case's CWE; a report naming some *other* CWE counts
//! as "not flagged". Findings the mapping could not resolve (`?`) are tallied
//! separately and kept out of every metric denominator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::classification::{self, ConfusionCounts};
use crate::effort;
use crate::model::{EntityPrediction, PredictionSet};
use crate::{Error, Result};

/// Exhaustive subset search is used up to this many tools.
pub const COVERAGE_EXHAUSTIVE_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Bad,
    Good,
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bad" => Ok(Polarity::Bad),
            "good" => Ok(Polarity::Good),
            other => Err(Error::invalid(format!("polarity must be `bad` or `good`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SastTestCase {
    /// `File$Method` style identifier.
    pub case_id: String,
    pub cwe_id: u32,
    pub polarity: Polarity,
}

impl SastTestCase {
    pub fn new(case_id: impl Into<String>, cwe_id: u32, polarity: Polarity) -> Result<Self> {
        if cwe_id == 0 {
            return Err(Error::invalid("CWE id must be positive"));
        }
        Ok(Self {
            case_id: case_id.into(),
            cwe_id,
            polarity,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictedCwe {
    /// The tool reported nothing.
    None,
    Cwe(u32),
    /// The report could not be mapped to a CWE.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolFinding {
    pub case_id: String,
    pub predicted: PredictedCwe,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolProfile {
    pub tool: String,
    /// CWEs the tool's documentation claims to detect.
    pub expected_cwes: BTreeSet<u32>,
}

impl ToolProfile {
    pub fn new(tool: impl Into<String>, expected_cwes: impl IntoIterator<Item = u32>) -> Result<Self> {
        let tool = tool.into();
        if tool.trim().is_empty() {
            return Err(Error::invalid("tool name must not be empty"));
        }
        Ok(Self {
            tool,
            expected_cwes: expected_cwes.into_iter().collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
    Unknown,
}

pub fn classify_outcome(case: &SastTestCase, finding: &ToolFinding) -> Result<Outcome> {
    if case.case_id != finding.case_id {
        return Err(Error::invalid(format!(
            "finding for `{}` matched against case `{}`",
            finding.case_id, case.case_id
        )));
    }
    let hit = match finding.predicted {
        PredictedCwe::Unknown => return Ok(Outcome::Unknown),
        PredictedCwe::None => false,
        PredictedCwe::Cwe(c) => c == case.cwe_id,
    };
    Ok(match (case.polarity, hit) {
        (Polarity::Bad, true) => Outcome::TruePositive,
        (Polarity::Bad, false) => Outcome::FalseNegative,
        (Polarity::Good, false) => Outcome::TrueNegative,
        (Polarity::Good, true) => Outcome::FalsePositive,
    })
}

/// Outcomes for one CWE.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CweTally {
    pub counts: ConfusionCounts,
    pub unknown: u64,
    /// `(case_id, flagged, bad)` for every classified (non-Unknown) case.
    pub cases: Vec<(String, bool, bool)>,
}

impl CweTally {
    pub fn classified(&self) -> u64 {
        self.counts.total()
    }
}

/// Classify every case; cases without a finding count as "no report".
pub fn per_cwe_confusion(cases: &[SastTestCase], findings: &[ToolFinding]) -> Result<BTreeMap<u32, CweTally>> {
    let mut by_case: HashMap<&str, &ToolFinding> = HashMap::with_capacity(findings.len());
    for f in findings {
        if by_case.insert(f.case_id.as_str(), f).is_some() {
            return Err(Error::DuplicateId(f.case_id.clone()));
        }
    }
    let mut case_ids = HashMap::with_capacity(cases.len());
    for c in cases {
        if case_ids.insert(c.case_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateId(c.case_id.clone()));
        }
    }
    let mut dangling: Vec<String> = findings
        .iter()
        .filter(|f| !case_ids.contains_key(f.case_id.as_str()))
        .map(|f| f.case_id.clone())
        .collect();
    if !dangling.is_empty() {
        dangling.sort();
        return Err(Error::DanglingReference { kind: "case", ids: dangling });
    }

    let mut out: BTreeMap<u32, CweTally> = BTreeMap::new();
    for case in cases {
        let finding = by_case.get(case.case_id.as_str()).map_or_else(
            || ToolFinding {
                case_id: case.case_id.clone(),
                predicted: PredictedCwe::None,
            },
            |f| (*f).clone(),
        );
        let tally = out.entry(case.cwe_id).or_default();
        let outcome = classify_outcome(case, &finding)?;
        let c = &mut tally.counts;
        match outcome {
            Outcome::TruePositive => c.tp += 1,
            Outcome::FalsePositive => c.fp += 1,
            Outcome::TrueNegative => c.tn += 1,
            Outcome::FalseNegative => c.fn_ += 1,
            Outcome::Unknown => {
                tally.unknown += 1;
                continue;
            }
        }
        let flagged = matches!(outcome, Outcome::TruePositive | Outcome::FalsePositive);
        tally
            .cases
            .push((case.case_id.clone(), flagged, case.polarity == Polarity::Bad));
    }
    for tally in out.values_mut() {
        tally.cases.sort();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CweCoverage {
    /// Expected CWEs: claimed by the documentation.
    pub ecwe: BTreeSet<u32>,
    /// Actual CWEs: expected ones with at least one true positive.
    pub acwe: BTreeSet<u32>,
    pub not_actual: BTreeSet<u32>,
}

pub fn ecwe_acwe(profile: &ToolProfile, per_cwe: &BTreeMap<u32, CweTally>) -> CweCoverage {
    let ecwe = profile.expected_cwes.clone();
    let (acwe, not_actual): (BTreeSet<u32>, BTreeSet<u32>) = ecwe
        .iter()
        .partition(|c| per_cwe.get(c).is_some_and(|t| t.counts.tp >= 1));
    CweCoverage { ecwe, acwe, not_actual }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccuracyMetric {
    Precision,
    Recall,
    F1,
    NPofB20,
}

impl AccuracyMetric {
    pub const ALL: [AccuracyMetric; 4] = [
        AccuracyMetric::Precision,
        AccuracyMetric::Recall,
        AccuracyMetric::F1,
        AccuracyMetric::NPofB20,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AccuracyMetric::Precision => "Precision",
            AccuracyMetric::Recall => "Recall",
            AccuracyMetric::F1 => "F1",
            AccuracyMetric::NPofB20 => "NPofB20",
        }
    }
}

/// Per-CWE value of `metric`, or `None` when it is undefined for that CWE.
///
/// NPofB20 ranks cases by flagged (1) / not flagged (0) with unit size,
/// ties broken by case id.
pub fn cwe_metric(tally: &CweTally, metric: AccuracyMetric) -> Option<f64> {
    match metric {
        AccuracyMetric::Precision => Some(classification::precision(&tally.counts).value),
        AccuracyMetric::Recall => Some(classification::recall(&tally.counts).value),
        AccuracyMetric::F1 => Some(classification::f1(&tally.counts).value),
        AccuracyMetric::NPofB20 => {
            let records = tally
                .cases
                .iter()
                .map(|(id, flagged, bad)| EntityPrediction {
                    id: id.clone(),
                    size: 1,
                    score: if *flagged { 1.0 } else { 0.0 },
                    actual: *bad,
                    touched_size: None,
                })
                .collect();
            let set = PredictionSet::new("cwe", records).ok()?;
            effort::npofb(&set, 20.0).ok()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedAccuracy {
    pub value: f64,
    /// CWEs left out because the metric was undefined for them.
    pub skipped: usize,
}

/// Average of the per-CWE metric weighted by each CWE's classified case count.
pub fn weighted_accuracy(per_cwe: &BTreeMap<u32, CweTally>, metric: AccuracyMetric) -> Result<WeightedAccuracy> {
    let mut values = Vec::new();
    let mut weights = Vec::new();
    let mut skipped = 0;
    for tally in per_cwe.values().filter(|t| t.classified() > 0) {
        match cwe_metric(tally, metric) {
            Some(v) => {
                values.push(v);
                weights.push(tally.classified() as f64);
            }
            None => skipped += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::invalid(format!("no CWE with a defined {}", metric.name())));
    }
    Ok(WeightedAccuracy {
        value: classification::stratified_weighted_average(&values, &weights)?,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageGrowth {
    /// `(k, most distinct CWEs covered by any k tools)` for k = 1..=k_max.
    pub points: Vec<(usize, usize)>,
    /// True when the greedy approximation was used (too many tools to search).
    pub greedy: bool,
}

/// Most distinct CWEs reachable by combining k tools, for each k ≤ `k_max`.
pub fn coverage_growth(tools: &[(String, BTreeSet<u32>)], k_max: usize) -> Result<CoverageGrowth> {
    if k_max > tools.len() {
        return Err(Error::invalid(format!(
            "k_max {k_max} exceeds the {} tools available",
            tools.len()
        )));
    }
    let universe: Vec<u32> = tools
        .iter()
        .flat_map(|(_, s)| s.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let words = universe.len().div_ceil(64).max(1);
    let bitsets: Vec<Vec<u64>> = tools
        .iter()
        .map(|(_, set)| {
            let mut bits = vec![0u64; words];
            for cwe in set {
                let i = universe.binary_search(cwe).expect("cwe in universe");
                bits[i / 64] |= 1 << (i % 64);
            }
            bits
        })
        .collect();

    if tools.len() <= COVERAGE_EXHAUSTIVE_MAX {
        let mut best = vec![0usize; tools.len() + 1];
        let mut stack = vec![vec![0u64; words]];
        exhaustive(&bitsets, 0, 0, &mut stack, &mut best);
        Ok(CoverageGrowth {
            points: (1..=k_max).map(|k| (k, best[k])).collect(),
            greedy: false,
        })
    } else {
        let mut covered = vec![0u64; words];
        let mut used = vec![false; tools.len()];
        let mut points = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let (pick, _) = (0..tools.len())
                .filter(|&t| !used[t])
                .map(|t| (t, popcount_union(&covered, &bitsets[t])))
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("k_max <= tools");
            used[pick] = true;
            for (c, b) in covered.iter_mut().zip(&bitsets[pick]) {
                *c |= b;
            }
            points.push((k, popcount(&covered)));
        }
        Ok(CoverageGrowth { points, greedy: true })
    }
}

fn popcount(bits: &[u64]) -> usize {
    bits.iter().map(|w| w.count_ones() as usize).sum()
}

fn popcount_union(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x | y).count_ones() as usize).sum()
}

/// Depth-first walk over all subsets; `stack` holds the running unions.
fn exhaustive(bitsets: &[Vec<u64>], next: usize, chosen: usize, stack: &mut Vec<Vec<u64>>, best: &mut [usize]) {
    let current = stack.last().expect("root union");
    let covered = popcount(current);
    if covered > best[chosen] {
        best[chosen] = covered;
    }
    for t in next..bitsets.len() {
        let union: Vec<u64> = stack
            .last()
            .expect("root union")
            .iter()
            .zip(&bitsets[t])
            .map(|(a, b)| a | b)
            .collect();
        stack.push(union);
        exhaustive(bitsets, t + 1, chosen + 1, stack, best);
        stack.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn case(id: &str, cwe: u32, polarity: Polarity) -> SastTestCase {
        SastTestCase::new(id, cwe, polarity).unwrap()
    }

    fn finding(id: &str, predicted: PredictedCwe) -> ToolFinding {
        ToolFinding {
            case_id: id.into(),
            predicted,
        }
    }

    #[test]
    fn branch_table() {
        let bad = case("CWE209_bad$bad", 209, Polarity::Bad);
        let good = case("CWE209_good$goodG2B", 209, Polarity::Good);
        let outcome = |c: &SastTestCase, p| classify_outcome(c, &finding(&c.case_id, p)).unwrap();
        assert_eq!(outcome(&bad, PredictedCwe::Cwe(209)), Outcome::TruePositive);
        assert_eq!(outcome(&bad, PredictedCwe::None), Outcome::FalseNegative);
        assert_eq!(outcome(&bad, PredictedCwe::Cwe(89)), Outcome::FalseNegative);
        assert_eq!(outcome(&good, PredictedCwe::Cwe(89)), Outcome::TrueNegative);
        assert_eq!(outcome(&good, PredictedCwe::None), Outcome::TrueNegative);
        assert_eq!(outcome(&good, PredictedCwe::Cwe(209)), Outcome::FalsePositive);
        assert_eq!(outcome(&good, PredictedCwe::Unknown), Outcome::Unknown);
        assert_eq!(outcome(&bad, PredictedCwe::Unknown), Outcome::Unknown);
        assert!(classify_outcome(&bad, &finding("other", PredictedCwe::None)).is_err());
    }

    fn suite() -> Vec<SastTestCase> {
        vec![
            case("a_bad", 209, Polarity::Bad),
            case("a_good", 209, Polarity::Good),
            case("b_bad", 89, Polarity::Bad),
            case("b_good", 89, Polarity::Good),
        ]
    }

    #[test]
    fn perfect_and_silent_tools() {
        let perfect = vec![finding("a_bad", PredictedCwe::Cwe(209)), finding("b_bad", PredictedCwe::Cwe(89))];
        let per = per_cwe_confusion(&suite(), &perfect).unwrap();
        for tally in per.values() {
            assert_eq!(tally.counts, ConfusionCounts::new(1, 0, 1, 0));
        }
        let per = per_cwe_confusion(&suite(), &[]).unwrap();
        for tally in per.values() {
            assert_eq!(tally.counts, ConfusionCounts::new(0, 0, 1, 1));
        }
    }

    #[test]
    fn findings_must_reference_cases() {
        let err = per_cwe_confusion(&suite(), &[finding("zzz", PredictedCwe::None)]).unwrap_err();
        assert_eq!(err, Error::DanglingReference { kind: "case", ids: vec!["zzz".into()] });
        let dup = vec![finding("a_bad", PredictedCwe::None), finding("a_bad", PredictedCwe::Unknown)];
        assert!(per_cwe_confusion(&suite(), &dup).is_err());
    }

    #[test]
    fn ecwe_acwe_examples() {
        let per = per_cwe_confusion(&suite(), &[finding("a_bad", PredictedCwe::Cwe(209))]).unwrap();
        let cov = ecwe_acwe(&ToolProfile::new("t", [209]).unwrap(), &per);
        assert_eq!(cov.acwe, BTreeSet::from([209]));
        let cov = ecwe_acwe(&ToolProfile::new("t", [209, 89]).unwrap(), &per);
        assert_eq!(cov.not_actual, BTreeSet::from([89]));
        // a claimed CWE absent from the suite is never actual
        let cov = ecwe_acwe(&ToolProfile::new("t", [78]).unwrap(), &per);
        assert!(cov.acwe.is_empty());
        assert!(ToolProfile::new(" ", [1]).is_err());
    }

    #[test]
    fn weighted_recall_example() {
        let mut cases = Vec::new();
        let mut findings = Vec::new();
        for i in 0..10 {
            cases.push(case(&format!("x{i}"), 1, Polarity::Bad));
            findings.push(finding(&format!("x{i}"), PredictedCwe::Cwe(1)));
        }
        for i in 0..90 {
            cases.push(case(&format!("y{i}"), 2, Polarity::Bad));
        }
        let per = per_cwe_confusion(&cases, &findings).unwrap();
        let w = weighted_accuracy(&per, AccuracyMetric::Recall).unwrap();
        assert!((w.value - 0.1).abs() < 1e-12);

        let single: BTreeMap<u32, CweTally> = per.iter().take(1).map(|(k, v)| (*k, v.clone())).collect();
        assert_eq!(weighted_accuracy(&single, AccuracyMetric::Recall).unwrap().value, 1.0);
        assert!(weighted_accuracy(&BTreeMap::new(), AccuracyMetric::F1).is_err());
    }

    #[test]
    fn npofb20_on_binary_findings() {
        // 10 unit-size cases of one CWE: 5 bad, tool flags 2 bad and 1 good.
        // Flagged first (ids a_, b_, c_), so the 2-case budget admits a0 and b0.
        let mut cases = Vec::new();
        let mut findings = Vec::new();
        for i in 0..5 {
            cases.push(case(&format!("bad{i}"), 7, Polarity::Bad));
            cases.push(case(&format!("good{i}"), 7, Polarity::Good));
        }
        findings.push(finding("bad3", PredictedCwe::Cwe(7)));
        findings.push(finding("bad4", PredictedCwe::Cwe(7)));
        findings.push(finding("good0", PredictedCwe::Cwe(7)));
        let per = per_cwe_confusion(&cases, &findings).unwrap();
        let v = cwe_metric(&per[&7], AccuracyMetric::NPofB20).unwrap();
        assert_eq!(v, 2.0 / 5.0);
        // a CWE with only good cases has no NPofB
        let per = per_cwe_confusion(&[case("g", 9, Polarity::Good)], &[]).unwrap();
        assert_eq!(cwe_metric(&per[&9], AccuracyMetric::NPofB20), None);
    }

    #[test]
    fn coverage_growth_examples() {
        let tools = |sets: &[&[u32]]| -> Vec<(String, BTreeSet<u32>)> {
            sets.iter()
                .enumerate()
                .map(|(i, s)| (format!("t{i}"), s.iter().copied().collect()))
                .collect()
        };
        let g = coverage_growth(&tools(&[&[1], &[2], &[3]]), 3).unwrap();
        assert_eq!(g.points, vec![(1, 1), (2, 2), (3, 3)]);
        let g = coverage_growth(&tools(&[&[1, 2], &[1, 2], &[1, 2]]), 3).unwrap();
        assert_eq!(g.points, vec![(1, 2), (2, 2), (3, 2)]);
        assert!(coverage_growth(&tools(&[&[1]]), 2).is_err());
        let big: Vec<Vec<u32>> = (0..22).map(|i| vec![i, i + 100]).collect();
        let refs: Vec<&[u32]> = big.iter().map(Vec::as_slice).collect();
        let g = coverage_growth(&tools(&refs), 3).unwrap();
        assert!(g.greedy);
        assert_eq!(g.points, vec![(1, 2), (2, 4), (3, 6)]);
    }

    proptest! {
        #[test]
        fn outcomes_partition_the_suite(
            rows in prop::collection::vec((1u32..5, any::<bool>(), 0u8..7), 1..60)
        ) {
            let mut cases = Vec::new();
            let mut findings = Vec::new();
            for (i, (cwe, bad, pred)) in rows.iter().enumerate() {
                let id = format!("c{i}");
                cases.push(case(&id, *cwe, if *bad { Polarity::Bad } else { Polarity::Good }));
                let predicted = match pred {
                    0 => None,
                    1 => Some(PredictedCwe::None),
                    2 => Some(PredictedCwe::Unknown),
                    p => Some(PredictedCwe::Cwe(u32::from(*p) - 2)),
                };
                if let Some(p) = predicted {
                    findings.push(finding(&id, p));
                }
            }
            let per = per_cwe_confusion(&cases, &findings).unwrap();
            let total: u64 = per.values().map(|t| t.counts.total() + t.unknown).sum();
            prop_assert_eq!(total as usize, cases.len());

            let profile = ToolProfile::new("t", 1..6).unwrap();
            let cov = ecwe_acwe(&profile, &per);
            prop_assert!(cov.acwe.is_subset(&cov.ecwe));

            if let Ok(w) = weighted_accuracy(&per, AccuracyMetric::Recall) {
                let vals: Vec<f64> = per.values().filter(|t| t.classified() > 0)
                    .map(|t| classification::recall(&t.counts).value).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(w.value >= lo - 1e-12 && w.value <= hi + 1e-12);
            }
        }
    }
}
