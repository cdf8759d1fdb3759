// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion and output.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, Trim, WriterBuilder};
use var_cpd::TimeSeries;

use crate::error::{CliError, Result};

/// Reads a series from `path`, or from stdin when `path` is `-`.
///
/// A first row in which no cell parses as a number is taken as a header.
pub fn load_csv(path: &Path) -> Result<TimeSeries> {
    let name = path.display().to_string();
    let mut text = String::new();
    if name == "-" {
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::io(path, e))?;
    } else {
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| CliError::io(path, e))?;
    }
    parse_csv(&text, &name)
}

pub fn parse_csv(text: &str, name: &str) -> Result<TimeSeries> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            path: name.to_string(),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::Ragged {
                path: name.to_string(),
                line,
                expected,
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (j, cell) in record.iter().enumerate() {
            let bad = |reason: String| CliError::BadCell {
                path: name.to_string(),
                line,
                column: j + 1,
                reason,
            };
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value {cell:?}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::EmptyInput {
            path: name.to_string(),
        });
    }
    Ok(TimeSeries::from_rows(&rows)?)
}

/// Writes `series` with an `x1,...,xp` header. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(series: &TimeSeries, out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    let wrap = |e: csv::Error| CliError::Parse {
        path: "output".into(),
        reason: e.to_string(),
    };
    w.write_record((1..=series.p()).map(|j| format!("x{j}")))
        .map_err(wrap)?;
    for row in series.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io("output", e))?;
    Ok(())
}
