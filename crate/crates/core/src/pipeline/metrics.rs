//! The per-file metric battery behind the `metrics` report.

use super::report::{Cell, MetricReport};
use crate::classification::{self, MetricValue};
use crate::effort;
use crate::{PredictionSet, Result};

/// Budgets for the PofB/NPofB columns when none are requested.
pub const DEFAULT_BUDGETS: [u32; 9] = [10, 20, 30, 40, 50, 60, 70, 80, 90];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricOptions {
    /// Classification threshold; positive iff score >= threshold.
    pub threshold: f64,
    /// LOC percentages for the PofB and NPofB columns.
    pub budgets: Vec<u32>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            budgets: DEFAULT_BUDGETS.to_vec(),
        }
    }
}

/// Column names in emission order.
pub fn metric_columns(options: &MetricOptions) -> Vec<String> {
    let mut cols: Vec<String> = ["Precision", "Recall", "F1", "MCC", "Gmeasure", "AUC"]
        .map(String::from)
        .to_vec();
    cols.extend(options.budgets.iter().map(|x| format!("PofB{x}")));
    cols.extend(options.budgets.iter().map(|x| format!("NPofB{x}")));
    cols.extend(
        ["AveragePofB", "NAveragePofB", "Popt", "Norm(Popt)", "Peffort", "IFA", "PCI@20"].map(String::from),
    );
    cols
}

fn push_flagged(report: &mut MetricReport, name: &str, v: MetricValue) {
    if v.undefined {
        report.flag(format!("{name}:undefined"));
    }
    report.push(name, Cell::Value(v.value));
}

fn push_result(report: &mut MetricReport, name: &str, v: Result<f64>) {
    match v {
        Ok(v) => report.push(name, Cell::Value(v)),
        Err(_) => {
            report.push(name, Cell::Errored);
            report.flag(format!("{name}:error"));
        }
    }
}

/// Every metric for one prediction set; metrics that cannot be computed
/// become `NA` cells with a `<metric>:error` flag.
pub fn metric_report(set: &PredictionSet, options: &MetricOptions) -> Result<MetricReport> {
    let c = classification::confusion_at_threshold(set, options.threshold)?;
    let mut r = MetricReport::new(set.name());
    push_flagged(&mut r, "Precision", classification::precision(&c));
    push_flagged(&mut r, "Recall", classification::recall(&c));
    push_flagged(&mut r, "F1", classification::f1(&c));
    push_flagged(&mut r, "MCC", classification::mcc(&c));
    push_flagged(&mut r, "Gmeasure", classification::gmeasure(&c));
    push_result(&mut r, "AUC", classification::auc(set));
    for &x in &options.budgets {
        push_result(&mut r, &format!("PofB{x}"), effort::pofb(set, f64::from(x)));
    }
    for &x in &options.budgets {
        push_result(&mut r, &format!("NPofB{x}"), effort::npofb(set, f64::from(x)));
    }
    push_result(&mut r, "AveragePofB", effort::average_pofb(set));
    push_result(&mut r, "NAveragePofB", effort::average_npofb(set));
    push_result(&mut r, "Popt", effort::popt(set));
    push_result(&mut r, "Norm(Popt)", effort::norm_popt(set));
    push_result(&mut r, "Peffort", effort::peffort(set));
    push_result(&mut r, "IFA", effort::ifa(set).map(|v| v as f64));
    push_result(&mut r, "PCI@20", effort::proportion_inspected(set, 20.0));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::EntityPrediction;

    #[test]
    fn columns_match_report_order() {
        let set = PredictionSet::new(
            "f",
            vec![
                EntityPrediction::new("a", 100, 0.9, true).unwrap(),
                EntityPrediction::new("b", 50, 0.2, false).unwrap(),
            ],
        )
        .unwrap();
        let options = MetricOptions::default();
        let r = metric_report(&set, &options).unwrap();
        let names: Vec<&str> = r.metrics.iter().map(|(m, _)| m.as_str()).collect();
        assert_eq!(names, metric_columns(&options));
        assert!(r.flags.is_empty());
        assert_eq!(r.get("AUC"), Some(Cell::Value(1.0)));
    }

    #[test]
    fn clean_set_marks_errors() {
        let set = PredictionSet::new("c", vec![EntityPrediction::new("a", 1, 0.1, false).unwrap()]).unwrap();
        let r = metric_report(&set, &MetricOptions::default()).unwrap();
        assert_eq!(r.get("PofB10"), Some(Cell::Errored));
        assert!(r.flags.iter().any(|f| f == "AUC:error"));
        assert!(r.flags.iter().any(|f| f == "Precision:undefined"));
    }
}
