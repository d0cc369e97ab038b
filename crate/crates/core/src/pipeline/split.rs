//! Release-ordered dataset splits.

use std::collections::HashMap;

use super::parse::{self, Row, Table};
use crate::model::EntityPrediction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Release {
    pub release_id: String,
    /// Temporal position; strictly increasing along a project's release list.
    pub ordinal: i64,
    pub records: Vec<EntityPrediction>,
    /// Source rows, kept so splits can be written back out unchanged.
    pub rows: Vec<Row>,
}

/// A prediction table grouped by release, in ordinal order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseTable {
    pub header: Vec<String>,
    pub releases: Vec<Release>,
}

impl ReleaseTable {
    /// CSV text of the given releases under the original header.
    pub fn to_csv<'a>(&self, releases: impl IntoIterator<Item = &'a Release>) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for release in releases {
            for row in &release.rows {
                out.push_str(&row.fields.join(","));
                out.push('\n');
            }
        }
        out
    }
}

/// Group a prediction table by `release_column`.
///
/// Ordinals are the release values themselves when every one is an integer,
/// otherwise the order in which releases first appear.
pub fn parse_release_table(text: &str, release_column: &str) -> Result<ReleaseTable> {
    let table: Table = parse::read_table(text)?;
    let col = table.column(release_column).ok_or_else(|| Error::Parse {
        line: table.header_line,
        column: 1,
        message: format!("missing release column `{release_column}`"),
    })?;
    let records = parse::entities_from_table(&table)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Vec<EntityPrediction>, Vec<Row>)> = HashMap::new();
    for (row, record) in table.rows.iter().zip(records) {
        let id = row.get(col);
        if id.is_empty() {
            return Err(row.parse_error(col + 1, "empty release id"));
        }
        let group = groups.entry(id.to_owned()).or_insert_with(|| {
            order.push(id.to_owned());
            (Vec::new(), Vec::new())
        });
        group.0.push(record);
        group.1.push(row.clone());
    }

    let numeric: Option<Vec<i64>> = order.iter().map(|id| id.parse().ok()).collect();
    let ordinals = match numeric {
        Some(values) => values,
        None => (0..order.len() as i64).collect(),
    };
    let mut releases: Vec<Release> = order
        .into_iter()
        .zip(ordinals)
        .map(|(release_id, ordinal)| {
            let (records, rows) = groups.remove(&release_id).expect("grouped above");
            Release {
                release_id,
                ordinal,
                records,
                rows,
            }
        })
        .collect();
    releases.sort_by_key(|r| r.ordinal);
    if let Some(w) = releases.windows(2).find(|w| w[0].ordinal == w[1].ordinal) {
        return Err(Error::invalid(format!(
            "releases `{}` and `{}` share ordinal {}",
            w[0].release_id, w[1].release_id, w[0].ordinal
        )));
    }
    Ok(ReleaseTable {
        header: table.header,
        releases,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold<'a> {
    pub train: Vec<&'a Release>,
    pub test: Vec<&'a Release>,
    /// The requested boundary was moved to keep both sides non-empty.
    pub adjusted: bool,
}

fn check_ordered(releases: &[Release]) -> Result<()> {
    if releases.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 releases, got {}", releases.len())));
    }
    if let Some(w) = releases.windows(2).find(|w| w[0].ordinal >= w[1].ordinal) {
        return Err(Error::invalid(format!(
            "releases out of order: `{}` before `{}`",
            w[0].release_id, w[1].release_id
        )));
    }
    Ok(())
}

/// Train on releases 1..n-1, test on release n, for n = 2..=N.
pub fn walk_forward(releases: &[Release]) -> Result<Vec<Fold<'_>>> {
    check_ordered(releases)?;
    Ok((1..releases.len())
        .map(|n| Fold {
            train: releases[..n].iter().collect(),
            test: vec![&releases[n]],
            adjusted: false,
        })
        .collect())
}

/// First `ceil(fraction * N)` releases train, the rest test.
pub fn ordered_split(releases: &[Release], train_fraction: f64) -> Result<Fold<'_>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    check_ordered(releases)?;
    let n = releases.len();
    let wanted = (train_fraction * n as f64 - 1e-9).ceil() as usize;
    let cut = wanted.clamp(1, n - 1);
    Ok(Fold {
        train: releases[..cut].iter().collect(),
        test: releases[cut..].iter().collect(),
        adjusted: cut != wanted,
    })
}

/// Split on `touched_size == 0`, preserving input order on both sides.
pub fn partition_by_touched(records: &[EntityPrediction]) -> Result<(Vec<EntityPrediction>, Vec<EntityPrediction>)> {
    let mut touched = Vec::new();
    let mut untouched = Vec::new();
    for r in records {
        match r.touched_size {
            None => {
                return Err(Error::InvalidEntity {
                    id: r.id.clone(),
                    reason: "touched LOC missing".into(),
                })
            }
            Some(0) => untouched.push(r.clone()),
            Some(_) => touched.push(r.clone()),
        }
    }
    Ok((touched, untouched))
}
