//! Nonparametric tests, effect sizes and multiple-comparison corrections used
//! to compare classifiers and metric variants.
//!
//! Small samples get exact p-values (sign enumeration for Wilcoxon,
//! permutation enumeration for Spearman); larger ones fall back to normal or
//! Student-t approximations. [`TestResult::method`] records which path ran.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::{Error, Result};

/// Largest sample for which Wilcoxon uses the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 20;
/// Hard ceiling for any 2ⁿ enumeration.
pub const ENUMERATION_CAP: usize = 25;
/// Largest sample for which Spearman uses exact permutation enumeration.
pub const SPEARMAN_EXACT_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Approximation,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Approximation => "approximation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub n_effective: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectSize {
    pub value: f64,
    pub label: &'static str,
}

/// Interpretation tables for effect sizes and agreement statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Table {
    CliffsDelta,
    Spearman,
    CohensD,
    Kappa,
}

/// Label a value with the given table. Lower bounds are inclusive.
///
/// Cliff's delta, Spearman's rho and Cohen's d are read by magnitude; kappa
/// keeps its sign since negative kappa has its own row.
pub fn interpret(value: f64, table: Table) -> &'static str {
    match table {
        Table::CliffsDelta => match value.abs() {
            v if v >= 0.43 => "Large",
            v if v >= 0.28 => "Medium",
            v if v >= 0.11 => "Small",
            _ => "negligible",
        },
        Table::Spearman => match value.abs() {
            v if v >= 1.0 => "perfect",
            v if v >= 0.8 => "very strong",
            v if v >= 0.6 => "moderate",
            _ => "fair",
        },
        Table::CohensD => match value.abs() {
            v if v >= 0.80 => "Very Large",
            v if v >= 0.50 => "Large",
            v if v >= 0.20 => "Medium",
            v if v >= 0.01 => "Small",
            _ => "Very small",
        },
        Table::Kappa => match value {
            v if v >= 0.8 => "Excellent agreement",
            v if v >= 0.6 => "Good agreement",
            v if v >= 0.4 => "Discrete agreement",
            v if v >= 0.0 => "Poor agreement",
            _ => "No agreement",
        },
    }
}

/// Ranks with ties averaged, doubled so they stay integral; also returns the
/// tie-group sizes.
pub fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let doubled = (start + end + 2) as u64;
        for &i in &order[start..=end] {
            ranks[i] = doubled;
        }
        ties.push((end - start + 1) as u64);
        start = end + 1;
    }
    (ranks, ties)
}

/// Average ranks (1-based).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    doubled_midranks(values).0.into_iter().map(|r| r as f64 / 2.0).collect()
}

fn tie_term(ties: &[u64]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn two_sided_normal(z: f64) -> f64 {
    (2.0 * standard_normal().sf(z.abs())).min(1.0)
}

/// Paired two-sided Wilcoxon signed-rank test on `(a, b)` pairs.
///
/// Zero differences are dropped; the statistic is W+, the rank sum of the
/// positive differences `a − b`.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<TestResult> {
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::NoInformativePairs);
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("non-finite difference"));
    }
    let n = diffs.len();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = doubled_midranks(&magnitudes);
    let w_plus_doubled: u64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let statistic = w_plus_doubled as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX.min(ENUMERATION_CAP) {
        let counts = signed_rank_distribution(&ranks);
        let total: u64 = 1 << n;
        let w = w_plus_doubled as usize;
        let lower: u64 = counts[..=w].iter().sum();
        let upper: u64 = counts[w..].iter().sum();
        let p_value = (2.0 * lower.min(upper) as f64 / total as f64).min(1.0);
        return Ok(TestResult {
            statistic,
            p_value,
            method: Method::Exact,
            n_effective: n,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    Ok(TestResult {
        statistic,
        p_value: two_sided_normal(z),
        method: Method::Approximation,
        n_effective: n,
    })
}

/// Number of sign assignments giving each doubled W+ value.
fn signed_rank_distribution(doubled_ranks: &[u64]) -> Vec<u64> {
    let max: usize = doubled_ranks.iter().sum::<u64>() as usize;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn require_non_empty(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("samples must be non-empty"));
    }
    Ok(())
}

/// Cliff's delta over all cross-sample pairs: P(x > y) − P(x < y).
pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<EffectSize> {
    require_non_empty(x, y)?;
    let mut greater = 0i64;
    let mut less = 0i64;
    for &a in x {
        for &b in y {
            if a > b {
                greater += 1;
            } else if a < b {
                less += 1;
            }
        }
    }
    let value = (greater - less) as f64 / (x.len() * y.len()) as f64;
    Ok(EffectSize {
        value,
        label: interpret(value, Table::CliffsDelta),
    })
}

/// Within-pair dominance: share of pairs with `a > b` minus share with `a < b`.
pub fn paired_cliffs_delta(pairs: &[(f64, f64)]) -> Result<EffectSize> {
    if pairs.is_empty() {
        return Err(Error::invalid("samples must be non-empty"));
    }
    let score: i64 = pairs
        .iter()
        .map(|(a, b)| match a.partial_cmp(b) {
            Some(std::cmp::Ordering::Greater) => 1,
            Some(std::cmp::Ordering::Less) => -1,
            _ => 0,
        })
        .sum();
    let value = score as f64 / pairs.len() as f64;
    Ok(EffectSize {
        value,
        label: interpret(value, Table::CliffsDelta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub method: Method,
    pub label: &'static str,
}

/// Spearman's rank correlation with a two-sided p-value.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("Spearman needs at least 3 observations"));
    }
    let (rx, _) = doubled_midranks(x);
    let (ry, _) = doubled_midranks(y);
    let centred = |r: &[u64]| -> Vec<i64> { r.iter().map(|&v| v as i64 - (n as i64 + 1)).collect() };
    let (cx, cy) = (centred(&rx), centred(&ry));
    let sxx: i64 = cx.iter().map(|v| v * v).sum();
    let syy: i64 = cy.iter().map(|v| v * v).sum();
    if sxx == 0 || syy == 0 {
        return Err(Error::ZeroVariance("rho"));
    }
    let sxy: i64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    let (sxy2, sxxyy) = (i128::from(sxy) * i128::from(sxy), i128::from(sxx) * i128::from(syy));
    let rho = if sxy2 == sxxyy {
        sxy.signum() as f64
    } else {
        (sxy as f64 / (sxx as f64 * syy as f64).sqrt()).clamp(-1.0, 1.0)
    };

    let (p_value, method) = if n <= SPEARMAN_EXACT_MAX {
        (permutation_p(&cx, &cy, sxy), Method::Exact)
    } else {
        let df = (n - 2) as f64;
        let p = if rho.abs() >= 1.0 {
            0.0
        } else {
            let t = rho * (df / (1.0 - rho * rho)).sqrt();
            let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
            (2.0 * dist.sf(t.abs())).min(1.0)
        };
        (p, Method::Approximation)
    };
    Ok(Correlation {
        rho,
        p_value,
        method,
        label: interpret(rho, Table::Spearman),
    })
}

/// Share of the n! rearrangements of `cy` whose |Σ cx·cy| reaches the observed one.
fn permutation_p(cx: &[i64], cy: &[i64], observed: i64) -> f64 {
    let n = cx.len();
    let target = observed.abs();
    let mut perm = cy.to_vec();
    let mut sum = observed;
    let mut hits: u64 = u64::from(sum.abs() >= target);
    let mut total: u64 = 1;
    // Heap's algorithm; each step is one swap, so the dot product updates in O(1).
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            sum += (cx[i] - cx[j]) * (perm[j] - perm[i]);
            perm.swap(i, j);
            hits += u64::from(sum.abs() >= target);
            total += 1;
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// |mean(x) − mean(y)| over the pooled standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<EffectSize> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid("Cohen's d needs at least 2 values per sample"));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled = ((n1 - 1.0) * sample_variance(x) + (n2 - 1.0) * sample_variance(y)) / (n1 + n2 - 2.0);
    if pooled.is_nan() || pooled <= 0.0 {
        return Err(Error::ZeroVariance("Cohen's d"));
    }
    let value = (mean(x) - mean(y)).abs() / pooled.sqrt();
    Ok(EffectSize {
        value,
        label: interpret(value, Table::CohensD),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjusted {
    pub adjusted_p: f64,
    pub reject: bool,
}

/// Holm–Bonferroni step-down procedure; results follow input order.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<Adjusted>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));

    let mut out = vec![
        Adjusted {
            adjusted_p: 1.0,
            reject: false,
        };
        m
    ];
    let mut running_max: f64 = 0.0;
    let mut still_rejecting = true;
    for (k, &i) in order.iter().enumerate() {
        let factor = (m - k) as f64;
        let p = p_values[i];
        still_rejecting &= p <= alpha / factor;
        running_max = running_max.max((factor * p).min(1.0));
        out[i] = Adjusted {
            adjusted_p: running_max,
            reject: still_rejecting,
        };
    }
    Ok(out)
}

/// Bonferroni-adjusted two-sided p-values of Dunn's all-pairs test.
#[derive(Debug, Clone, PartialEq)]
pub struct DunnMatrix {
    pub z: Vec<Vec<f64>>,
    pub p_adjusted: Vec<Vec<f64>>,
}

pub fn dunn_all_pairs(groups: &[Vec<f64>]) -> Result<DunnMatrix> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::invalid("Dunn's test needs at least 2 groups"));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::invalid("every group needs at least one value"));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let n = pooled.len() as f64;

    let mut mean_ranks = Vec::with_capacity(k);
    let mut offset = 0;
    for g in groups {
        let sum: u64 = ranks[offset..offset + g.len()].iter().sum();
        mean_ranks.push(sum as f64 / 2.0 / g.len() as f64);
        offset += g.len();
    }

    let spread = n * (n + 1.0) / 12.0 - tie_term(&ties) / (12.0 * (n - 1.0));
    let comparisons = (k * (k - 1) / 2) as f64;
    let mut z = vec![vec![0.0; k]; k];
    let mut p_adjusted = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let se = (spread * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64)).sqrt();
            let zij = if se > 0.0 {
                (mean_ranks[i] - mean_ranks[j]) / se
            } else {
                0.0
            };
            let p = (two_sided_normal(zij) * comparisons).min(1.0);
            z[i][j] = zij;
            z[j][i] = -zij;
            p_adjusted[i][j] = p;
            p_adjusted[j][i] = p;
        }
    }
    Ok(DunnMatrix { z, p_adjusted })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub kappa: f64,
    pub label: &'static str,
    /// Chance agreement was 1 (both raters constant and equal); kappa set to 1.
    pub degenerate: bool,
}

/// Cohen's kappa between two raters.
pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<Kappa> {
    if a.len() != b.len() {
        return Err(Error::invalid("raters labelled different numbers of items"));
    }
    if a.is_empty() {
        return Err(Error::invalid("no rated items"));
    }
    // integer form: (N*agreed - sum(row*col)) / (N^2 - sum(row*col))
    let n = a.len() as u128;
    let agreed = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut margins: HashMap<&T, (u128, u128)> = HashMap::new();
    for x in a {
        margins.entry(x).or_default().0 += 1;
    }
    for y in b {
        margins.entry(y).or_default().1 += 1;
    }
    let chance: u128 = margins.values().map(|(ca, cb)| ca * cb).sum();
    if chance == n * n {
        return Ok(Kappa {
            kappa: 1.0,
            label: interpret(1.0, Table::Kappa),
            degenerate: true,
        });
    }
    let numerator = (n * agreed) as i128 - chance as i128;
    let denominator = (n * n - chance) as i128;
    let kappa = numerator as f64 / denominator as f64;
    Ok(Kappa {
        kappa,
        label: interpret(kappa, Table::Kappa),
        degenerate: false,
    })
}
