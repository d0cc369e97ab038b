//! `sastt`: per-tool accuracy and CWE coverage on a labelled suite.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;

use defeval_core::pipeline::{self, Cell, MetricReport};
use defeval_core::sastt::{self, AccuracyMetric, SastTestCase, ToolFinding};

use crate::{parse_file, stem, usage, write_output};

#[derive(Debug, Args)]
pub struct SastArgs {
    /// Findings per tool (`case_id,cwe_id,polarity,predicted_cwe`); the file
    /// name is the tool name. Repeat for several tools.
    #[arg(long, required = true)]
    findings: Vec<PathBuf>,
    /// Full suite (`case_id,cwe_id,polarity`); cases absent from a findings
    /// file count as not flagged.
    #[arg(long)]
    cases: Option<PathBuf>,
    /// Claimed CWEs (`tool,cwe_id`).
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-CWE counts and metrics here.
    #[arg(long)]
    per_cwe: Option<PathBuf>,
    /// Write the most distinct ACWEs reachable by k tools here.
    #[arg(long)]
    growth: Option<PathBuf>,
}

fn merge_suite(suite: &mut BTreeMap<String, SastTestCase>, cases: Vec<SastTestCase>) -> Result<()> {
    for case in cases {
        match suite.get(&case.case_id) {
            Some(known) if *known != case => {
                return Err(anyhow!("case `{}` is labelled differently across files", case.case_id))
            }
            Some(_) => {}
            None => {
                suite.insert(case.case_id.clone(), case);
            }
        }
    }
    Ok(())
}

fn fmt_option(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

pub fn run(args: SastArgs) -> Result<()> {
    let mut suite = BTreeMap::new();
    if let Some(path) = &args.cases {
        merge_suite(&mut suite, parse_file(path, pipeline::parse_cases)?)?;
    }
    let mut tools: Vec<(String, Vec<ToolFinding>)> = Vec::new();
    for path in &args.findings {
        let (cases, findings) = parse_file(path, pipeline::parse_sastt)?;
        merge_suite(&mut suite, cases)?;
        let name = stem(path);
        if tools.iter().any(|(t, _)| *t == name) {
            return Err(usage(format!("two findings files share the tool name `{name}`")));
        }
        tools.push((name, findings));
    }
    let profiles = match &args.profile {
        Some(path) => parse_file(path, pipeline::parse_profiles)?,
        None => Vec::new(),
    };
    let suite: Vec<SastTestCase> = suite.into_values().collect();

    let mut reports = Vec::new();
    let mut per_cwe_out = String::from("tool,cwe,tp,fp,tn,fn,unknown,precision,recall,f1,npofb20\n");
    let mut acwes = Vec::new();
    for (tool, findings) in &tools {
        let per_cwe = sastt::per_cwe_confusion(&suite, findings)?;
        let mut r = MetricReport::new(tool.clone());
        for metric in AccuracyMetric::ALL {
            match sastt::weighted_accuracy(&per_cwe, metric) {
                Ok(w) => {
                    r.push(metric.name(), Cell::Value(w.value));
                    if w.skipped > 0 {
                        r.flag(format!("{}:skipped={}", metric.name(), w.skipped));
                    }
                }
                Err(_) => {
                    r.push(metric.name(), Cell::Errored);
                    r.flag(format!("{}:error", metric.name()));
                }
            }
        }
        let total = per_cwe.values().fold((0, 0, 0, 0, 0), |acc, t| {
            (acc.0 + t.counts.tp, acc.1 + t.counts.fp, acc.2 + t.counts.tn, acc.3 + t.counts.fn_, acc.4 + t.unknown)
        });
        for (name, v) in [("TP", total.0), ("FP", total.1), ("TN", total.2), ("FN", total.3), ("Unknown", total.4)] {
            r.push(name, Cell::Value(v as f64));
        }
        if !profiles.is_empty() {
            match profiles.iter().find(|p| p.tool == *tool) {
                Some(profile) => {
                    let cov = sastt::ecwe_acwe(profile, &per_cwe);
                    r.push("ECWE", Cell::Value(cov.ecwe.len() as f64));
                    r.push("ACWE", Cell::Value(cov.acwe.len() as f64));
                    acwes.push((tool.clone(), cov.acwe));
                }
                None => {
                    r.push("ECWE", Cell::Errored);
                    r.push("ACWE", Cell::Errored);
                    r.flag("ECWE:no-profile");
                }
            }
        }
        for (cwe, tally) in &per_cwe {
            let c = &tally.counts;
            let metric = |m| fmt_option(sastt::cwe_metric(tally, m));
            per_cwe_out.push_str(&format!(
                "{tool},{cwe},{},{},{},{},{},{},{},{},{}\n",
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                tally.unknown,
                metric(AccuracyMetric::Precision),
                metric(AccuracyMetric::Recall),
                metric(AccuracyMetric::F1),
                metric(AccuracyMetric::NPofB20),
            ));
        }
        reports.push(r);
    }

    if let Some(path) = &args.per_cwe {
        write_output(Some(path), &per_cwe_out)?;
    }
    if let Some(path) = &args.growth {
        if acwes.is_empty() {
            return Err(usage("--growth needs --profile entries for the scored tools"));
        }
        let growth = sastt::coverage_growth(&acwes, acwes.len())?;
        let mut text = String::from("k,max_unique_acwe\n");
        for (k, covered) in &growth.points {
            text.push_str(&format!("{k},{covered}\n"));
        }
        if growth.greedy {
            eprintln!("note: {} tools; coverage growth is a greedy lower bound", acwes.len());
        }
        write_output(Some(path), &text)?;
    }
    write_output(args.out.as_deref(), &pipeline::emit_report(&reports))
}
