//! Metric reports, classifier rankings and the report CSV format.

use std::cmp::Ordering;

use super::parse;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    Errored,
}

impl Cell {
    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            Cell::Errored => None,
        }
    }
}

/// Metric values for one source (usually one prediction file).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub source: String,
    /// In column order.
    pub metrics: Vec<(String, Cell)>,
    /// Free-form markers such as `Precision:undefined` or `AUC:error`.
    pub flags: Vec<String>,
}

impl MetricReport {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, metric: impl Into<String>, cell: Cell) {
        self.metrics.push((metric.into(), cell));
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        self.flags.push(flag.into());
    }

    pub fn get(&self, metric: &str) -> Option<Cell> {
        self.metrics.iter().find(|(m, _)| m == metric).map(|(_, c)| *c)
    }
}

fn format_value(v: f64) -> String {
    let s = format!("{v:.6}");
    // never print a negative zero
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}

/// CSV text: `source,<metrics of the first report>,flags`, values with six
/// decimals, `NA` for errored or absent cells, flags joined by `;`.
pub fn emit_report(reports: &[MetricReport]) -> String {
    let columns: Vec<&str> = reports
        .first()
        .map(|r| r.metrics.iter().map(|(m, _)| m.as_str()).collect())
        .unwrap_or_default();
    let mut out = String::from("source");
    for c in &columns {
        out.push(',');
        out.push_str(c);
    }
    out.push_str(",flags\n");
    for r in reports {
        out.push_str(&r.source);
        for c in &columns {
            out.push(',');
            match r.get(c) {
                Some(Cell::Value(v)) => out.push_str(&format_value(v)),
                _ => out.push_str("NA"),
            }
        }
        out.push(',');
        out.push_str(&r.flags.join(";"));
        out.push('\n');
    }
    out
}

/// Inverse of [`emit_report`].
pub fn parse_report(text: &str) -> Result<Vec<MetricReport>> {
    let table = parse::read_table(text)?;
    let width = table.header.len();
    if width < 2 || table.header[0] != "source" || table.header[width - 1] != "flags" {
        return Err(Error::Parse {
            line: table.header_line,
            column: 1,
            message: "report header must be `source,<metrics>,flags`".into(),
        });
    }
    let metrics = &table.header[1..width - 1];
    table
        .rows
        .iter()
        .map(|row| {
            let mut report = MetricReport::new(row.get(0));
            for (i, name) in metrics.iter().enumerate() {
                let raw = row.get(i + 1);
                let cell = if raw == "NA" {
                    Cell::Errored
                } else {
                    Cell::Value(raw.parse().map_err(|_| row.parse_error(i + 2, format!("`{raw}` is not a number")))?)
                };
                report.push(name.clone(), cell);
            }
            report.flags = row
                .get(width - 1)
                .split(';')
                .filter(|f| !f.is_empty())
                .map(str::to_owned)
                .collect();
            Ok(report)
        })
        .collect()
}

/// Sources ordered by `metric`, best (largest) first, ties by name.
pub fn rank_classifiers(reports: &[MetricReport], metric: &str) -> Result<Vec<String>> {
    let mut scored = reports
        .iter()
        .map(|r| match r.get(metric) {
            Some(Cell::Value(v)) if !v.is_nan() => Ok((r.source.as_str(), v)),
            _ => Err(Error::invalid(format!("`{}` has no value for {metric}", r.source))),
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0)));
    Ok(scored.into_iter().map(|(s, _)| s.to_owned()).collect())
}

/// Whether both rankings put the same classifier first.
pub fn best_agreement(a: &[String], b: &[String]) -> Result<bool> {
    match (a.first(), b.first()) {
        (Some(x), Some(y)) => Ok(x == y),
        _ => Err(Error::invalid("rankings must be non-empty")),
    }
}

pub fn agreement_proportion(agreements: &[bool]) -> Result<f64> {
    if agreements.is_empty() {
        return Err(Error::invalid("no ranking pairs"));
    }
    Ok(agreements.iter().filter(|&&a| a).count() as f64 / agreements.len() as f64)
}
