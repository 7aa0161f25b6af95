//! Learning-curve CSV files.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::harness::stats::{standard_error, AggregateCurve};
use crate::harness::RunRecord;

pub const HEADER: [&str; 7] = [
    "total_steps",
    "generation",
    "eval_mean",
    "eval_median",
    "ci68",
    "reuse_fraction",
    "epsilon",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub total_steps: u64,
    pub generation: u64,
    pub eval_mean: f64,
    pub eval_median: f64,
    pub ci68: f64,
    pub reuse_fraction: f64,
    pub epsilon: f64,
}

impl CsvRow {
    fn fields(&self) -> [String; 7] {
        // `{}` on f64 prints the shortest string that parses back exactly
        [
            self.total_steps.to_string(),
            self.generation.to_string(),
            self.eval_mean.to_string(),
            self.eval_median.to_string(),
            self.ci68.to_string(),
            self.reuse_fraction.to_string(),
            self.epsilon.to_string(),
        ]
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

fn write_rows<W: Write>(rows: impl Iterator<Item = CsvRow>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an aggregate curve, one row per checkpoint.
pub fn emit_csv<W: Write>(curve: &AggregateCurve, out: W) -> Result<()> {
    write_rows(
        curve.points.iter().map(|p| CsvRow {
            total_steps: p.total_steps,
            generation: p.generation,
            eval_mean: p.eval_mean,
            eval_median: p.eval_median,
            ci68: p.ci68,
            reuse_fraction: p.reuse_fraction,
            epsilon: p.epsilon,
        }),
        out,
    )
}

/// Writes the reports of a single run; `ci68` is taken over its episodes.
pub fn emit_run_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    write_rows(
        records.iter().map(|r| CsvRow {
            total_steps: r.total_steps,
            generation: r.generation,
            eval_mean: r.eval_mean,
            eval_median: r.eval_median(),
            ci68: standard_error(&r.episode_returns),
            reuse_fraction: r.reuse_fraction,
            epsilon: r.epsilon,
        }),
        out,
    )
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().ne(HEADER) {
        return Err(Error::Csv(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| Error::Csv(format!("row {}: bad `{}` value `{}`", line + 1, HEADER[i], field(i)));
        let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad(i));
        let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        rows.push(CsvRow {
            total_steps: int(0)?,
            generation: int(1)?,
            eval_mean: float(2)?,
            eval_median: float(3)?,
            ci68: float(4)?,
            reuse_fraction: float(5)?,
            epsilon: float(6)?,
        });
    }
    Ok(rows)
}
