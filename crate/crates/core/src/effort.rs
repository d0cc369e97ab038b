//! Effort-aware metrics.
//!
//! LOC is the effort proxy throughout. PofB and its density-normalised twin
//! NPofB differ only in the ranking key; both count defective entities inside
//! an inspection budget. Popt, Norm(Popt) and Peffort integrate a
//! cost-effectiveness curve in which each entity's defect credit accrues
//! linearly across its LOC.

use crate::model::{PredictionSet, Ranking, RankingPolicy};
use crate::{Error, Result};

/// Budget grid averaged by [`average_pofb`] and [`average_npofb`].
pub const AVERAGE_GRID: [f64; 11] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];

/// Budgets reported by default (0 and 100 are constant and omitted).
pub const REPORT_GRID: [f64; 9] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0];

/// Window used by Norm(Popt), as a LOC fraction.
pub const NORM_POPT_WINDOW: f64 = 0.20;

/// Piecewise-linear cumulative defects-vs-LOC curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortCurve {
    points: Vec<(f64, f64)>,
}

impl EffortCurve {
    pub fn from_ranking(ranking: &Ranking, metric: &'static str) -> Result<Self> {
        let total_loc = ranking.total_loc() as f64;
        let total_defects = ranking.total_defectives();
        if total_defects == 0 {
            return Err(Error::NoDefectives { metric });
        }
        let total_defects = total_defects as f64;
        let mut points = Vec::with_capacity(ranking.len() + 1);
        points.push((0.0, 0.0));
        points.extend(
            ranking
                .cumulative_loc()
                .iter()
                .zip(ranking.cumulative_defectives())
                .map(|(&loc, &def)| (loc as f64 / total_loc, def as f64 / total_defects)),
        );
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn area(&self) -> f64 {
        self.area_up_to(1.0)
    }

    /// Area under the curve over `[0, limit]`.
    pub fn area_up_to(&self, limit: f64) -> f64 {
        let mut area = 0.0;
        for w in self.points.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x0 >= limit {
                break;
            }
            if x1 <= limit {
                area += (x1 - x0) * (y0 + y1) / 2.0;
            } else {
                let y_cut = y0 + (y1 - y0) * (limit - x0) / (x1 - x0);
                area += (limit - x0) * (y0 + y_cut) / 2.0;
                break;
            }
        }
        area
    }
}

fn fraction_found(set: &PredictionSet, policy: RankingPolicy, x: f64, metric: &'static str) -> Result<f64> {
    let total = set.defective_count();
    if total == 0 {
        return Err(Error::NoDefectives { metric });
    }
    let found = set.rank(policy).defectives_within(x)?;
    Ok(found as f64 / total as f64)
}

/// Share of defective entities found in the top `x`% of LOC, ranked by score.
pub fn pofb(set: &PredictionSet, x: f64) -> Result<f64> {
    fraction_found(set, RankingPolicy::ScoreDescending, x, "PofB")
}

/// As [`pofb`], ranked by score / size.
pub fn npofb(set: &PredictionSet, x: f64) -> Result<f64> {
    fraction_found(set, RankingPolicy::ScoreDensityDescending, x, "NPofB")
}

fn average_over_grid(set: &PredictionSet, metric: fn(&PredictionSet, f64) -> Result<f64>) -> Result<f64> {
    let mut sum = 0.0;
    for x in AVERAGE_GRID {
        sum += metric(set, x)?;
    }
    Ok(sum / AVERAGE_GRID.len() as f64)
}

pub fn average_pofb(set: &PredictionSet) -> Result<f64> {
    average_over_grid(set, pofb)
}

pub fn average_npofb(set: &PredictionSet) -> Result<f64> {
    average_over_grid(set, npofb)
}

fn curves(set: &PredictionSet, metric: &'static str) -> Result<(EffortCurve, EffortCurve)> {
    let optimal = EffortCurve::from_ranking(&set.rank(RankingPolicy::ActualDensityDescending), metric)?;
    let predicted = EffortCurve::from_ranking(&set.rank(RankingPolicy::ScoreDensityDescending), metric)?;
    Ok((optimal, predicted))
}

/// `1 − (area(optimal) − area(predicted))`.
pub fn popt(set: &PredictionSet) -> Result<f64> {
    let (optimal, predicted) = curves(set, "Popt")?;
    Ok(1.0 - (optimal.area() - predicted.area()))
}

/// Popt restricted to the first 20% of LOC, rescaled by the window width.
pub fn norm_popt(set: &PredictionSet) -> Result<f64> {
    let (optimal, predicted) = curves(set, "Norm(Popt)")?;
    let gap = optimal.area_up_to(NORM_POPT_WINDOW) - predicted.area_up_to(NORM_POPT_WINDOW);
    Ok(1.0 - gap / NORM_POPT_WINDOW)
}

/// Raw area under the predicted (score-density) curve.
///
/// Only described in prose in the literature this tool follows; this reading
/// keeps the Popt machinery but drops the optimal-curve subtraction.
pub fn peffort(set: &PredictionSet) -> Result<f64> {
    let ranking = set.rank(RankingPolicy::ScoreDensityDescending);
    Ok(EffortCurve::from_ranking(&ranking, "Peffort")?.area())
}

/// Clean entities ranked (by score) above the first defective one.
pub fn ifa(set: &PredictionSet) -> Result<usize> {
    let ranking = set.rank(RankingPolicy::ScoreDescending);
    (0..ranking.len())
        .find(|&i| ranking.is_defective_at(i))
        .ok_or(Error::NoDefectives { metric: "IFA" })
}

/// PCI@x / PMI@x / PFI@x: share of entities inspected within `x`% of LOC.
pub fn proportion_inspected(set: &PredictionSet, x: f64) -> Result<f64> {
    let inspected = set.rank(RankingPolicy::ScoreDescending).prefix_len(x)?;
    Ok(inspected as f64 / set.len() as f64)
}

/// `(normalized − base) / base`.
pub fn relative_gain(base: f64, normalized: f64) -> Result<f64> {
    if base == 0.0 {
        return Err(Error::GainUndefined);
    }
    Ok((normalized - base) / base)
}
