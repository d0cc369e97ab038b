//! File formats, release splits, classifier ranking and report emission.

mod metrics;
mod parse;
mod report;
mod split;

pub use parse::{
    parse_bool, parse_cases, parse_commits, parse_predictions, parse_profiles, parse_sastt, parse_touchmap,
    read_table, Row, Table, PREDICTION_HEADER,
};
pub use report::{
    agreement_proportion, best_agreement, emit_report, parse_report, rank_classifiers, Cell, MetricReport,
};
pub use split::{ordered_split, parse_release_table, partition_by_touched, walk_forward, Fold, Release, ReleaseTable};
pub use metrics::{metric_columns, metric_report, MetricOptions, DEFAULT_BUDGETS};
