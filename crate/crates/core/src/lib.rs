//! Evaluation toolkit for defect and vulnerability prediction.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: prediction records, deterministic rankings and LOC inspection budgets.
//! - [`classification`]: confusion-matrix metrics and rank-based AUC.
//! - [`effort`]: effort-aware metrics (PofB, NPofB, Popt, IFA, ...).
//! - [`jit`]: lifting commit-level scores to methods or classes.
//! - [`stats`]: nonparametric tests, effect sizes and multiple-comparison corrections.
//! - [`sastt`]: scoring static-analysis tools against labelled test suites.
//! - [`pipeline`]: file formats, dataset splits, classifier ranking and CSV reports.

pub mod classification;
pub mod effort;
mod error;
pub mod jit;
pub mod model;
pub mod pipeline;
pub mod sastt;
pub mod stats;

pub use error::{Error, Result};
pub use model::{EntityPrediction, PredictionSet, Ranking, RankingPolicy};
