//! CSV rows and the JSON run summary.
//!
//! Column order is the field order of each row struct. Floats are written in
//! shortest round-trip form, so data rows are byte-identical across runs with
//! the same seed and parse back to the same values.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::config::ExperimentConfig;
use super::Sign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub side: usize,
    pub theta: f64,
    pub eta: f64,
    pub sign: Sign,
    pub replica: u64,
    pub seed: u64,
    pub count: usize,
    pub tau: f64,
    /// `η 2√(2/π) log N`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateRow {
    pub side: usize,
    pub eta: f64,
    pub replica: u64,
    pub seed: u64,
    pub count: usize,
    pub threshold: f64,
    pub stopped_at: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremesRow {
    pub side: usize,
    pub theta: f64,
    pub replica: u64,
    pub seed: u64,
    pub max_norm: f64,
    pub min_norm: f64,
    pub min_local_time: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionsRow {
    pub side: usize,
    pub theta: f64,
    pub eta: f64,
    pub depth: usize,
    pub r0: f64,
    pub rho: f64,
    pub replica: u64,
    pub seed: u64,
    pub centers: usize,
    pub reached_budget: usize,
    pub successful: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub side: usize,
    pub t: f64,
    pub replicas: usize,
    pub seed: u64,
    pub value: f64,
    /// Empty for report-only rows.
    pub bound: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenRow {
    /// `center` or `off_center`.
    pub kind: String,
    pub side: usize,
    pub radius: f64,
    pub distance: f64,
    pub green: f64,
    pub reference: f64,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub kind: String,
    pub side: usize,
    pub theta: f64,
    pub eta: f64,
    pub replica: u64,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowSet {
    Census(Vec<CensusRow>),
    Late(Vec<LateRow>),
    Extremes(Vec<ExtremesRow>),
    Excursions(Vec<ExcursionsRow>),
    Checks(Vec<CheckRow>),
    Green(Vec<GreenRow>),
    Exponents(Vec<ExponentRow>),
}

fn csv_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

macro_rules! each_rowset {
    ($self:expr, $rows:ident => $body:expr) => {
        match $self {
            RowSet::Census($rows) => $body,
            RowSet::Late($rows) => $body,
            RowSet::Extremes($rows) => $body,
            RowSet::Excursions($rows) => $body,
            RowSet::Checks($rows) => $body,
            RowSet::Green($rows) => $body,
            RowSet::Exponents($rows) => $body,
        }
    };
}

impl RowSet {
    pub fn len(&self) -> usize {
        each_rowset!(self, rows => rows.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// RFC 4180 CSV with a header row. An empty set writes nothing.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        each_rowset!(self, rows => csv_rows(rows, w))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        each_rowset!(self, rows => serde_json::to_writer_pretty(w, rows)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeed {
    pub side: usize,
    pub seed: u64,
}

/// JSON summary; keys appear in field order, map keys sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub suite: String,
    pub config: ExperimentConfig,
    /// Per-side seeds; replica `r` of a cell uses stream `r`.
    pub seeds: Vec<CellSeed>,
    pub rows: usize,
    pub fitted: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    pub invariants_ok: bool,
}
