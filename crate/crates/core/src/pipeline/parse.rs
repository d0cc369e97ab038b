//! Readers for the comma-separated input formats.
//!
//! All formats share the same lexical rules: UTF-8, LF or CRLF line endings,
//! a mandatory header row, comma delimiter, no quoting, surrounding whitespace
//! trimmed, blank lines ignored. Errors carry 1-based line and column.

use std::collections::HashMap;

use crate::jit::{CommitPrediction, TouchMap};
use crate::model::{EntityPrediction, PredictionSet};
use crate::sastt::{Polarity, PredictedCwe, SastTestCase, ToolFinding, ToolProfile};
use crate::{Error, Result};

pub const PREDICTION_HEADER: [&str; 4] = ["id", "size", "probability", "actual"];
pub const TOUCHED_COLUMN: &str = "loc_touched";
pub const COMMIT_HEADER: [&str; 2] = ["commit_id", "probability"];
pub const TOUCH_HEADER: [&str; 2] = ["commit_id", "entity_id"];
pub const SASTT_HEADER: [&str; 4] = ["case_id", "cwe_id", "polarity", "predicted_cwe"];
pub const CASES_HEADER: [&str; 3] = ["case_id", "cwe_id", "polarity"];
pub const PROFILE_HEADER: [&str; 2] = ["tool", "cwe_id"];

/// One data row with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

impl Row {
    pub fn parse_error(&self, column: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    /// Field at 0-based `index`; rows are width-checked before they are handed out.
    pub fn get(&self, index: usize) -> &str {
        &self.fields[index]
    }
}

/// Header plus data rows of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub header_line: usize,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Split `text` into a header and rows of exactly the header's width.
pub fn read_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header: Option<(usize, Vec<String>)> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                column: 1,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        match &header {
            None => header = Some((line, fields)),
            Some((_, h)) => {
                if fields.len() != h.len() {
                    return Err(Error::Parse {
                        line,
                        column: fields.len().min(h.len()) + 1,
                        message: format!("expected {} fields, found {}", h.len(), fields.len()),
                    });
                }
                rows.push(Row { line, fields });
            }
        }
    }
    let (header_line, header) = header.ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: "missing header row".into(),
    })?;
    Ok(Table {
        header,
        header_line,
        rows,
    })
}

fn expect_header(table: &Table, expected: &[&str]) -> Result<()> {
    if table.header.iter().map(String::as_str).eq(expected.iter().copied()) {
        return Ok(());
    }
    let column = table
        .header
        .iter()
        .zip(expected)
        .position(|(a, b)| a != b)
        .unwrap_or(expected.len().min(table.header.len()))
        + 1;
    Err(Error::Parse {
        line: table.header_line,
        column,
        message: format!("header must be `{}`", expected.join(",")),
    })
}

fn non_empty<'a>(row: &'a Row, index: usize, what: &str) -> Result<&'a str> {
    let value = row.get(index);
    if value.is_empty() {
        return Err(row.parse_error(index + 1, format!("empty {what}")));
    }
    Ok(value)
}

fn parse_u64(row: &Row, index: usize, what: &str) -> Result<u64> {
    row.get(index)
        .parse()
        .map_err(|_| row.parse_error(index + 1, format!("{what} `{}` is not a non-negative integer", row.get(index))))
}

fn parse_probability(row: &Row, index: usize) -> Result<f64> {
    let raw = row.get(index);
    let value: f64 = raw
        .parse()
        .map_err(|_| row.parse_error(index + 1, format!("probability `{raw}` is not a number")))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(row.parse_error(index + 1, format!("probability {raw} outside [0, 1]")));
    }
    Ok(value)
}

fn parse_cwe(row: &Row, index: usize) -> Result<u32> {
    let raw = row.get(index);
    let digits = raw
        .strip_prefix("CWE-")
        .or_else(|| raw.strip_prefix("CWE"))
        .unwrap_or(raw);
    match digits.parse::<u32>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(row.parse_error(index + 1, format!("`{raw}` is not a CWE id"))),
    }
}

pub fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn check_unique<'a>(seen: &mut HashMap<&'a str, usize>, id: &'a str, row: &Row, column: usize) -> Result<()> {
    if let Some(first) = seen.insert(id, row.line) {
        return Err(row.parse_error(column, format!("duplicate id `{id}` (first on line {first})")));
    }
    Ok(())
}

/// Entity from the prediction columns of `row`; `touched` is the index of
/// `loc_touched` when present.
pub fn entity_from_row(row: &Row, cols: [usize; 4], touched: Option<usize>) -> Result<EntityPrediction> {
    let [id, size, probability, actual] = cols;
    let id_value = non_empty(row, id, "id")?;
    let size_value = parse_u64(row, size, "size")?;
    if size_value < 1 {
        return Err(row.parse_error(size + 1, "size must be at least 1"));
    }
    let score = parse_probability(row, probability)?;
    let actual_value = parse_bool(row.get(actual))
        .ok_or_else(|| row.parse_error(actual + 1, format!("actual `{}` is not a boolean", row.get(actual))))?;
    let mut entity = EntityPrediction::new(id_value, size_value, score, actual_value)?;
    if let Some(t) = touched {
        entity = entity.with_touched(parse_u64(row, t, "loc_touched")?);
    }
    Ok(entity)
}

/// Entities from a table whose header contains the prediction columns
/// (extra columns are ignored), with duplicate ids rejected.
pub fn entities_from_table(table: &Table) -> Result<Vec<EntityPrediction>> {
    let mut cols = [0; 4];
    for (slot, name) in cols.iter_mut().zip(PREDICTION_HEADER) {
        *slot = table.column(name).ok_or_else(|| Error::Parse {
            line: table.header_line,
            column: 1,
            message: format!("missing column `{name}`"),
        })?;
    }
    let touched = table.column(TOUCHED_COLUMN);
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        check_unique(&mut seen, row.get(cols[0]), row, cols[0] + 1)?;
        out.push(entity_from_row(row, cols, touched)?);
    }
    Ok(out)
}

/// `id,size,probability,actual[,loc_touched]`.
pub fn parse_predictions(name: &str, text: &str) -> Result<PredictionSet> {
    let table = read_table(text)?;
    let [a, b, c, d] = PREDICTION_HEADER;
    let with_touched = [a, b, c, d, TOUCHED_COLUMN];
    let expected: &[&str] = if table.header.len() == 5 { &with_touched } else { &PREDICTION_HEADER };
    expect_header(&table, expected)?;
    let records = entities_from_table(&table)?;
    if records.is_empty() {
        return Err(Error::EmptySet(name.to_owned()));
    }
    PredictionSet::new(name, records)
}

/// `commit_id,probability`.
pub fn parse_commits(text: &str) -> Result<Vec<CommitPrediction>> {
    let table = read_table(text)?;
    expect_header(&table, &COMMIT_HEADER)?;
    table
        .rows
        .iter()
        .map(|row| {
            let id = non_empty(row, 0, "commit id")?;
            CommitPrediction::new(id, parse_probability(row, 1)?)
        })
        .collect()
}

/// `commit_id,entity_id`.
pub fn parse_touchmap(text: &str) -> Result<TouchMap> {
    let table = read_table(text)?;
    expect_header(&table, &TOUCH_HEADER)?;
    let mut map = TouchMap::new();
    for row in &table.rows {
        map.insert(non_empty(row, 0, "commit id")?, non_empty(row, 1, "entity id")?);
    }
    Ok(map)
}

fn parse_polarity(row: &Row, index: usize) -> Result<Polarity> {
    row.get(index).parse().map_err(|_| {
        row.parse_error(index + 1, format!("polarity must be `bad` or `good`, got `{}`", row.get(index)))
    })
}

fn case_from_row(row: &Row) -> Result<SastTestCase> {
    let id = non_empty(row, 0, "case id")?;
    SastTestCase::new(id, parse_cwe(row, 1)?, parse_polarity(row, 2)?)
}

/// `case_id,cwe_id,polarity,predicted_cwe`; an empty prediction means the tool
/// reported nothing and `?` means the report could not be mapped.
pub fn parse_sastt(text: &str) -> Result<(Vec<SastTestCase>, Vec<ToolFinding>)> {
    let table = read_table(text)?;
    expect_header(&table, &SASTT_HEADER)?;
    let mut seen = HashMap::new();
    let mut cases = Vec::with_capacity(table.rows.len());
    let mut findings = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        check_unique(&mut seen, row.get(0), row, 1)?;
        let case = case_from_row(row)?;
        let predicted = match row.get(3) {
            "" => PredictedCwe::None,
            "?" => PredictedCwe::Unknown,
            _ => PredictedCwe::Cwe(parse_cwe(row, 3)?),
        };
        findings.push(ToolFinding {
            case_id: case.case_id.clone(),
            predicted,
        });
        cases.push(case);
    }
    Ok((cases, findings))
}

/// `case_id,cwe_id,polarity`: the full suite, including cases without findings.
pub fn parse_cases(text: &str) -> Result<Vec<SastTestCase>> {
    let table = read_table(text)?;
    expect_header(&table, &CASES_HEADER)?;
    let mut seen = HashMap::new();
    table
        .rows
        .iter()
        .map(|row| {
            check_unique(&mut seen, row.get(0), row, 1)?;
            case_from_row(row)
        })
        .collect()
}

/// `tool,cwe_id`, one row per claimed CWE; returns one profile per tool in
/// order of first appearance.
pub fn parse_profiles(text: &str) -> Result<Vec<ToolProfile>> {
    let table = read_table(text)?;
    expect_header(&table, &PROFILE_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut cwes: HashMap<String, Vec<u32>> = HashMap::new();
    for row in &table.rows {
        let tool = non_empty(row, 0, "tool")?;
        let cwe = parse_cwe(row, 1)?;
        cwes.entry(tool.to_owned())
            .or_insert_with(|| {
                order.push(tool.to_owned());
                Vec::new()
            })
            .push(cwe);
    }
    order
        .into_iter()
        .map(|tool| {
            let set = cwes.remove(&tool).unwrap_or_default();
            ToolProfile::new(tool, set)
        })
        .collect()
}
