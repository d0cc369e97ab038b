//! Lifting commit-level (JIT) predictions to methods or classes.
//!
//! Each entity gets three candidate scores: its own prediction (Direct), the
//! maximum over the commits that touched it (MaxC) and their sum (SumC). The
//! Combined score is the median of the selected candidates.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::model::PredictionSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CommitPrediction {
    pub commit_id: String,
    pub score: f64,
}

impl CommitPrediction {
    pub fn new(commit_id: impl Into<String>, score: f64) -> Result<Self> {
        let commit_id = commit_id.into();
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!(
                "commit `{commit_id}` score {score} outside [0, 1]"
            )));
        }
        Ok(Self { commit_id, score })
    }
}

/// Commit → entities it touched.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TouchMap {
    edges: BTreeMap<String, BTreeSet<String>>,
}

impl TouchMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, commit_id: impl Into<String>, entity_id: impl Into<String>) {
        self.edges
            .entry(commit_id.into())
            .or_default()
            .insert(entity_id.into());
    }

    pub fn touches(&self, commit_id: &str, entity_id: &str) -> bool {
        self.edges
            .get(commit_id)
            .is_some_and(|entities| entities.contains(entity_id))
    }

    pub fn commits(&self) -> impl Iterator<Item = &str> {
        self.edges.keys().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges
            .iter()
            .flat_map(|(c, es)| es.iter().map(move |e| (c.as_str(), e.as_str())))
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Entity → scores of the commits (present in `commits`) that touched it,
    /// sorted ascending so downstream sums do not depend on input order.
    fn scores_by_entity<'a>(&'a self, commits: &[CommitPrediction]) -> HashMap<&'a str, Vec<f64>> {
        let mut out: HashMap<&str, Vec<f64>> = HashMap::new();
        for commit in commits {
            if let Some(entities) = self.edges.get(&commit.commit_id) {
                for entity in entities {
                    out.entry(entity.as_str()).or_default().push(commit.score);
                }
            }
        }
        for scores in out.values_mut() {
            scores.sort_by(f64::total_cmp);
        }
        out
    }
}

impl<C: Into<String>, E: Into<String>> FromIterator<(C, E)> for TouchMap {
    fn from_iter<I: IntoIterator<Item = (C, E)>>(iter: I) -> Self {
        let mut map = TouchMap::new();
        for (c, e) in iter {
            map.insert(c, e);
        }
        map
    }
}

fn touching_scores(entity_id: &str, commits: &[CommitPrediction], touch: &TouchMap) -> Vec<f64> {
    let mut scores: Vec<f64> = commits
        .iter()
        .filter(|c| touch.touches(&c.commit_id, entity_id))
        .map(|c| c.score)
        .collect();
    scores.sort_by(f64::total_cmp);
    scores
}

/// Highest score among commits touching the entity; `None` when untouched.
pub fn maxc(entity_id: &str, commits: &[CommitPrediction], touch: &TouchMap) -> Option<f64> {
    touching_scores(entity_id, commits, touch).last().copied()
}

/// Sum of the scores of commits touching the entity; `None` when untouched.
pub fn sumc(entity_id: &str, commits: &[CommitPrediction], touch: &TouchMap) -> Option<f64> {
    let scores = touching_scores(entity_id, commits, touch);
    (!scores.is_empty()).then(|| scores.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Direct,
    MaxC,
    SumC,
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Source::Direct),
            "maxc" => Ok(Source::MaxC),
            "sumc" => Ok(Source::SumC),
            other => Err(Error::invalid(format!("unknown score source `{other}`"))),
        }
    }
}

/// Which candidate scores enter the median.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Selection {
    /// Every candidate that is present.
    #[default]
    AllPresent,
    Only(BTreeSet<Source>),
}

impl Selection {
    pub fn only(sources: impl IntoIterator<Item = Source>) -> Result<Self> {
        let set: BTreeSet<Source> = sources.into_iter().collect();
        if set.is_empty() {
            return Err(Error::invalid("empty score selection"));
        }
        Ok(Selection::Only(set))
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Median of the selected candidate scores.
pub fn combine(direct: f64, maxc: Option<f64>, sumc: Option<f64>, selection: &Selection) -> Result<f64> {
    let mut values = Vec::with_capacity(3);
    match selection {
        Selection::AllPresent => {
            values.push(direct);
            values.extend(maxc);
            values.extend(sumc);
        }
        Selection::Only(sources) => {
            for source in sources {
                let value = match source {
                    Source::Direct => Some(direct),
                    Source::MaxC => maxc,
                    Source::SumC => sumc,
                };
                values.push(value.ok_or_else(|| {
                    Error::invalid(format!("{source:?} selected but absent"))
                })?);
            }
        }
    }
    Ok(median(&mut values).expect("selection is non-empty"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedScore {
    pub entity_id: String,
    pub direct: f64,
    pub maxc: Option<f64>,
    pub sumc: Option<f64>,
    /// Median before any rescaling.
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSet {
    /// Entities carrying the (possibly rescaled) combined score.
    pub set: PredictionSet,
    pub scores: Vec<CombinedScore>,
    /// Divisor applied to every combined score, 1 when nothing exceeded 1.
    pub scale: f64,
}

impl CombinedSet {
    pub fn rescaled(&self) -> bool {
        self.scale != 1.0
    }
}

fn validate_inputs(entities: &PredictionSet, commits: &[CommitPrediction], touch: &TouchMap) -> Result<()> {
    let mut commit_ids = HashSet::with_capacity(commits.len());
    for c in commits {
        if !commit_ids.insert(c.commit_id.as_str()) {
            return Err(Error::DuplicateId(c.commit_id.clone()));
        }
    }
    let dangling: Vec<String> = touch
        .commits()
        .filter(|c| !commit_ids.contains(c))
        .map(str::to_owned)
        .collect();
    if !dangling.is_empty() {
        return Err(Error::DanglingReference { kind: "commit", ids: dangling });
    }
    let entity_ids: HashSet<&str> = entities.records().iter().map(|e| e.id.as_str()).collect();
    let unknown: BTreeSet<String> = touch
        .edges()
        .filter(|(_, e)| !entity_ids.contains(e))
        .map(|(_, e)| e.to_owned())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::DanglingReference {
            kind: "entity",
            ids: unknown.into_iter().collect(),
        });
    }
    Ok(())
}

/// Smallest power of two that is at least `max`.
fn power_of_two_ceiling(max: f64) -> f64 {
    let mut scale = 1.0;
    while scale < max {
        scale *= 2.0;
    }
    scale
}

/// Replace each entity's score with its Combined score.
///
/// Untouched entities keep their direct score. When any Combined value
/// exceeds 1 (possible through SumC) every score is divided by the same
/// power of two, which is exact in floating point and so leaves every
/// ranking unchanged. The results are rank scores, not probabilities.
pub fn combine_set(
    entities: &PredictionSet,
    commits: &[CommitPrediction],
    touch: &TouchMap,
    selection: &Selection,
) -> Result<CombinedSet> {
    validate_inputs(entities, commits, touch)?;
    let by_entity = touch.scores_by_entity(commits);

    let mut scores = Vec::with_capacity(entities.len());
    for record in entities.records() {
        let touching = by_entity.get(record.id.as_str());
        let maxc = touching.and_then(|s| s.last().copied());
        let sumc = touching.map(|s| s.iter().sum::<f64>());
        let combined = if touching.is_none() {
            record.score
        } else {
            combine(record.score, maxc, sumc, selection)?
        };
        scores.push(CombinedScore {
            entity_id: record.id.clone(),
            direct: record.score,
            maxc,
            sumc,
            combined,
        });
    }

    let max = scores.iter().map(|s| s.combined).fold(0.0, f64::max);
    let scale = if max > 1.0 { power_of_two_ceiling(max) } else { 1.0 };
    let rescaled: Vec<f64> = scores.iter().map(|s| s.combined / scale).collect();
    let set = entities.with_scores(entities.name(), &rescaled)?;
    Ok(CombinedSet { set, scores, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityPrediction, RankingPolicy};
    use proptest::prelude::*;

    fn commits(rows: &[(&str, f64)]) -> Vec<CommitPrediction> {
        rows.iter()
            .map(|&(id, s)| CommitPrediction::new(id, s).unwrap())
            .collect()
    }

    fn entities(rows: &[(&str, f64)]) -> PredictionSet {
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(id, s))| EntityPrediction::new(id, 10 + i as u64, s, i % 2 == 0).unwrap())
            .collect();
        PredictionSet::new("m", records).unwrap()
    }

    #[test]
    fn maxc_and_sumc() {
        let cs = commits(&[("c1", 0.2), ("c2", 0.7), ("c3", 0.4), ("c4", 0.3)]);
        let touch: TouchMap = [("c1", "m"), ("c2", "m"), ("c3", "m"), ("c4", "n")]
            .into_iter()
            .collect();
        assert_eq!(maxc("m", &cs, &touch), Some(0.7));
        assert!((sumc("m", &cs, &touch).unwrap() - 1.3).abs() < 1e-12);
        assert_eq!(maxc("n", &cs, &touch), Some(0.3));
        assert_eq!(sumc("n", &cs, &touch), Some(0.3));
        assert_eq!(maxc("z", &cs, &touch), None);
        assert_eq!(sumc("z", &cs, &touch), None);
    }

    #[test]
    fn combine_examples() {
        let all = Selection::AllPresent;
        assert_eq!(combine(0.2, Some(0.9), Some(1.4), &all).unwrap(), 0.9);
        assert_eq!(combine(0.5, Some(0.5), Some(0.5), &all).unwrap(), 0.5);
        let pair = Selection::only([Source::Direct, Source::MaxC]).unwrap();
        assert!((combine(0.2, Some(0.6), None, &pair).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(combine(0.3, None, None, &all).unwrap(), 0.3);
        let sum_only = Selection::only([Source::SumC]).unwrap();
        assert!(combine(0.3, Some(0.2), None, &sum_only).is_err());
        assert!(Selection::only([]).is_err());
    }

    #[test]
    fn untouched_entities_keep_direct_scores() {
        let set = entities(&[("a", 0.31), ("b", 0.77), ("c", 0.05)]);
        let out = combine_set(&set, &commits(&[("c1", 0.9)]), &TouchMap::new(), &Selection::AllPresent).unwrap();
        assert_eq!(out.set, set);
        assert!(!out.rescaled());
    }

    #[test]
    fn dominant_sumc_ranks_first_after_rescale() {
        let set = entities(&[("a", 0.9), ("b", 0.8), ("c", 0.1)]);
        let cs = commits(&[("c1", 1.0), ("c2", 1.0), ("c3", 0.1)]);
        let touch: TouchMap = [("c1", "c"), ("c2", "c"), ("c3", "a")].into_iter().collect();
        let out = combine_set(&set, &cs, &touch, &Selection::AllPresent).unwrap();
        // c: median(0.1, 1.0, 2.0) = 1.0 ; a: median(0.9, 0.1, 0.1) = 0.1 ; b untouched 0.8
        let raw: Vec<f64> = out.scores.iter().map(|s| s.combined).collect();
        assert_eq!(raw, vec![0.1, 0.8, 1.0]);
        assert!(!out.rescaled());

        let only_sum = Selection::only([Source::SumC]).unwrap();
        let out = combine_set(&set, &cs, &touch, &only_sum).unwrap();
        assert!(out.rescaled());
        assert_eq!(out.scale, 2.0);
        assert_eq!(out.set.rank(RankingPolicy::ScoreDescending).ids()[0], "c");
        assert_eq!(out.set.records()[2].score, 1.0);
    }

    #[test]
    fn zero_commits_yield_median_with_zeros() {
        let set = entities(&[("a", 0.9), ("b", 0.4)]);
        let cs = commits(&[("c1", 0.0), ("c2", 0.0)]);
        let touch: TouchMap = [("c1", "a"), ("c2", "a"), ("c2", "b")].into_iter().collect();
        let out = combine_set(&set, &cs, &touch, &Selection::AllPresent).unwrap();
        for s in &out.scores {
            let mut v = vec![s.direct, 0.0, 0.0];
            assert_eq!(s.combined, median(&mut v).unwrap());
        }
    }

    #[test]
    fn dangling_references_are_reported() {
        let set = entities(&[("a", 0.9)]);
        let touch: TouchMap = [("ghost", "a"), ("c1", "nobody")].into_iter().collect();
        let err = combine_set(&set, &commits(&[("c1", 0.5)]), &touch, &Selection::AllPresent).unwrap_err();
        assert_eq!(err, Error::DanglingReference { kind: "commit", ids: vec!["ghost".into()] });
        let touch: TouchMap = [("c1", "nobody")].into_iter().collect();
        let err = combine_set(&set, &commits(&[("c1", 0.5)]), &touch, &Selection::AllPresent).unwrap_err();
        assert_eq!(err, Error::DanglingReference { kind: "entity", ids: vec!["nobody".into()] });
    }

    proptest! {
        #[test]
        fn median_is_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=5.0) {
            let m = combine(a, Some(b), Some(c), &Selection::AllPresent).unwrap();
            prop_assert!(m >= a.min(b).min(c) && m <= a.max(b).max(c));
        }

        #[test]
        fn rescaling_keeps_order_and_commit_order_is_irrelevant(
            direct in prop::collection::vec(0.0f64..=1.0, 1..12),
            commit_scores in prop::collection::vec(0.0f64..=1.0, 0..20),
            edges in prop::collection::vec((0usize..20, 0usize..12), 0..40),
        ) {
            let rows: Vec<(String, f64)> = direct.iter().enumerate().map(|(i, &s)| (format!("e{i:02}"), s)).collect();
            let set = PredictionSet::new(
                "p",
                rows.iter().map(|(id, s)| EntityPrediction::new(id.clone(), 7, *s, true).unwrap()).collect(),
            ).unwrap();
            let cs: Vec<CommitPrediction> = commit_scores.iter().enumerate()
                .map(|(i, &s)| CommitPrediction::new(format!("c{i}"), s).unwrap()).collect();
            let touch: TouchMap = edges.iter()
                .filter(|(c, e)| *c < cs.len() && *e < rows.len())
                .map(|&(c, e)| (format!("c{c}"), format!("e{e:02}")))
                .collect();
            let out = combine_set(&set, &cs, &touch, &Selection::AllPresent).unwrap();
            for s in &out.scores {
                if let (Some(m), Some(su)) = (s.maxc, s.sumc) {
                    prop_assert!(m <= su + 1e-12);
                }
            }
            // exact order preservation
            let final_scores: Vec<f64> = out.set.records().iter().map(|r| r.score).collect();
            for i in 0..out.scores.len() {
                for j in 0..out.scores.len() {
                    prop_assert_eq!(
                        out.scores[i].combined.total_cmp(&out.scores[j].combined),
                        final_scores[i].total_cmp(&final_scores[j])
                    );
                }
            }
            let mut reversed = cs.clone();
            reversed.reverse();
            prop_assert_eq!(out, combine_set(&set, &reversed, &touch, &Selection::AllPresent).unwrap());
        }
    }
}
