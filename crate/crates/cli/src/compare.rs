//! `compare`: statistical comparison of report rows.
//!
//! Sources named `classifier@dataset` are grouped by classifier and paired by
//! dataset. With `--baseline` the two metric columns are paired row by row
//! instead, and per dataset the classifier rankings under both metrics are
//! compared (same best classifier, Spearman's rho).

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::{Args, ValueEnum};

use defeval_core::pipeline::{self, Cell, MetricReport};
use defeval_core::stats;

use crate::{parse_file, usage, write_output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestKind {
    Wilcoxon,
    Dunn,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report CSV produced by `metrics`.
    report: PathBuf,
    #[arg(long)]
    metric: String,
    #[arg(long, value_enum, default_value = "wilcoxon")]
    test: TestKind,
    /// Pair `--metric` against this metric instead of comparing classifiers.
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Cliff's delta from within-pair dominance instead of all cross pairs.
    #[arg(long)]
    within_pair: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn split_source(source: &str) -> (&str, &str) {
    source.split_once('@').unwrap_or((source, ""))
}

fn require_column(reports: &[MetricReport], metric: &str) -> Result<()> {
    match reports.first() {
        Some(r) if r.get(metric).is_some() => Ok(()),
        Some(_) => Err(usage(format!("report has no `{metric}` column"))),
        None => Err(anyhow!("report has no rows")),
    }
}

fn value(report: &MetricReport, metric: &str) -> Option<f64> {
    report.get(metric).and_then(Cell::value)
}

fn effect(pairs: &[(f64, f64)], within_pair: bool) -> defeval_core::Result<stats::EffectSize> {
    if within_pair {
        return stats::paired_cliffs_delta(pairs);
    }
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    stats::cliffs_delta(&a, &b)
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

pub fn run(args: CompareArgs) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(format!("--alpha {} outside (0, 1)", args.alpha)));
    }
    let reports = parse_file(&args.report, pipeline::parse_report)?;
    require_column(&reports, &args.metric)?;
    let text = match (&args.baseline, args.test) {
        (Some(_), TestKind::Dunn) => return Err(usage("--baseline pairs two metrics; use --test wilcoxon")),
        (Some(baseline), TestKind::Wilcoxon) => {
            require_column(&reports, baseline)?;
            against_baseline(&reports, &args.metric, baseline, args.within_pair)?
        }
        (None, TestKind::Wilcoxon) => classifier_pairs(&reports, &args.metric, args.alpha, args.within_pair)?,
        (None, TestKind::Dunn) => dunn(&reports, &args.metric)?,
    };
    write_output(args.out.as_deref(), &text)
}

/// classifier -> dataset -> value, skipping NA cells.
fn by_classifier<'a>(reports: &'a [MetricReport], metric: &str) -> BTreeMap<&'a str, BTreeMap<&'a str, f64>> {
    let mut out: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in reports {
        let (classifier, dataset) = split_source(&r.source);
        match value(r, metric) {
            Some(v) => {
                out.entry(classifier).or_default().insert(dataset, v);
            }
            None => eprintln!("note: `{}` has no {metric} value; skipped", r.source),
        }
    }
    out
}

fn classifier_pairs(reports: &[MetricReport], metric: &str, alpha: f64, within_pair: bool) -> Result<String> {
    let groups = by_classifier(reports, metric);
    let names: Vec<&str> = groups.keys().copied().collect();
    if names.len() < 2 {
        return Err(anyhow!("need at least two classifiers with {metric} values"));
    }
    struct Row<'a> {
        a: &'a str,
        b: &'a str,
        n: usize,
        test: Option<stats::TestResult>,
        delta: Option<stats::EffectSize>,
    }
    let mut rows = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let pairs: Vec<(f64, f64)> = groups[a]
                .iter()
                .filter_map(|(d, va)| groups[b].get(d).map(|vb| (*va, *vb)))
                .collect();
            rows.push(Row {
                a,
                b,
                n: pairs.len(),
                test: stats::wilcoxon_signed_rank(&pairs).ok(),
                delta: effect(&pairs, within_pair).ok(),
            });
        }
    }
    let p: Vec<f64> = rows.iter().filter_map(|r| r.test.map(|t| t.p_value)).collect();
    let mut adjusted = stats::holm_bonferroni(&p, alpha)?.into_iter();

    let mut out = String::from("a,b,n,statistic,p_value,method,p_holm,reject,cliffs_delta,effect\n");
    for r in rows {
        out.push_str(&format!("{},{},{},", r.a, r.b, r.n));
        match r.test {
            Some(t) => {
                let adj = adjusted.next().expect("one adjustment per test");
                out.push_str(&format!(
                    "{},{},{},{},{},",
                    f(t.statistic),
                    f(t.p_value),
                    t.method,
                    f(adj.adjusted_p),
                    adj.reject
                ));
            }
            None => out.push_str("NA,NA,NA,NA,NA,"),
        }
        match r.delta {
            Some(d) => out.push_str(&format!("{},{}\n", f(d.value), d.label)),
            None => out.push_str("NA,NA\n"),
        }
    }
    Ok(out)
}

fn against_baseline(reports: &[MetricReport], metric: &str, baseline: &str, within_pair: bool) -> Result<String> {
    let pairs: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| Some((value(r, metric)?, value(r, baseline)?)))
        .collect();
    let t = stats::wilcoxon_signed_rank(&pairs)?;
    let d = effect(&pairs, within_pair)?;
    let mut out = String::from("metric,baseline,n,statistic,p_value,method,cliffs_delta,effect\n");
    out.push_str(&format!(
        "{metric},{baseline},{},{},{},{},{},{}\n",
        pairs.len(),
        f(t.statistic),
        f(t.p_value),
        t.method,
        f(d.value),
        d.label
    ));

    // does each metric pick the same best classifier on each dataset?
    let mut datasets: BTreeMap<&str, Vec<MetricReport>> = BTreeMap::new();
    for r in reports {
        if value(r, metric).is_some() && value(r, baseline).is_some() {
            datasets.entry(split_source(&r.source).1).or_default().push(r.clone());
        }
    }
    let mut agreements = Vec::new();
    let mut lines = String::new();
    for (dataset, rows) in datasets.iter().filter(|(_, rows)| rows.len() >= 2) {
        let a = pipeline::rank_classifiers(rows, metric)?;
        let b = pipeline::rank_classifiers(rows, baseline)?;
        let same = pipeline::best_agreement(&a, &b)?;
        agreements.push(same);
        let xs: Vec<f64> = rows.iter().filter_map(|r| value(r, metric)).collect();
        let ys: Vec<f64> = rows.iter().filter_map(|r| value(r, baseline)).collect();
        let rho = stats::spearman_rho(&xs, &ys).map_or_else(|_| "NA".to_owned(), |c| f(c.rho));
        lines.push_str(&format!(
            "{dataset},{},{},{same},{rho}\n",
            split_source(&a[0]).0,
            split_source(&b[0]).0
        ));
    }
    if let Ok(share) = pipeline::agreement_proportion(&agreements) {
        out.push_str(&format!("\ndataset,best_by_{metric},best_by_{baseline},same_best,spearman_rho\n"));
        out.push_str(&lines);
        out.push_str(&format!("ALL,,,{},\n", f(share)));
    }
    Ok(out)
}

fn dunn(reports: &[MetricReport], metric: &str) -> Result<String> {
    let groups = by_classifier(reports, metric);
    let names: Vec<&str> = groups.keys().copied().collect();
    let values: Vec<Vec<f64>> = groups.values().map(|g| g.values().copied().collect()).collect();
    let m = stats::dunn_all_pairs(&values)?;
    let mut out = String::from("a,b,z,p_adjusted\n");
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            out.push_str(&format!("{},{},{},{}\n", names[i], names[j], f(m.z[i][j]), f(m.p_adjusted[i][j])));
        }
    }
    Ok(out)
}
