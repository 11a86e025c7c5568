use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["experiment", "stage", "key", "value", "notes"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Audit,
    Approx,
    Solve,
    Regularity,
    Error,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Audit => "audit",
            Stage::Approx => "approx",
            Stage::Solve => "solve",
            Stage::Regularity => "regularity",
            Stage::Error => "error",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "audit" => Stage::Audit,
            "approx" => Stage::Approx,
            "solve" => Stage::Solve,
            "regularity" => Stage::Regularity,
            "error" => Stage::Error,
            other => return Err(Error::ReportParse(format!("unknown stage `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub stage: Stage,
    pub key: String,
    /// Numbers use the shortest representation that round-trips.
    pub value: String,
    pub notes: String,
}

impl ReportRow {
    pub fn new(experiment: &str, stage: Stage, key: impl Into<String>, value: impl Into<String>, notes: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), stage, key: key.into(), value: value.into(), notes: notes.into() }
    }

    pub fn num(experiment: &str, stage: Stage, key: impl Into<String>, value: f64, notes: impl Into<String>) -> Self {
        Self::new(experiment, stage, key, value.to_string(), notes)
    }

    pub fn flag(experiment: &str, stage: Stage, key: impl Into<String>, value: bool, notes: impl Into<String>) -> Self {
        Self::new(experiment, stage, key, value.to_string(), notes)
    }

    /// The value as a number, if it is one.
    pub fn as_f64(&self) -> Option<f64> {
        self.value.parse().ok()
    }
}

/// Sorts rows by `(stage, key)`.
pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| (a.stage, &a.key).cmp(&(b.stage, &b.key)));
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([r.experiment.as_str(), r.stage.as_str(), &r.key, &r.value, &r.notes])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(f))
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::ReportParse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(ReportRow {
            experiment: rec[0].to_string(),
            stage: rec[1].parse()?,
            key: rec[2].to_string(),
            value: rec[3].to_string(),
            notes: rec[4].to_string(),
        });
    }
    Ok(rows)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    parse_csv(std::fs::File::open(path)?)
}
