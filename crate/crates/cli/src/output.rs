//! Result tables, written as CSV or JSON with round-trip-safe floats.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use fqlens_core::error::{Error, Result};

/// Table serialization format.
#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One table field.
pub enum Cell {
    Str(String),
    Float(f64),
    Int(u64),
    /// Absent value: empty in CSV, `null` in JSON.
    Empty,
}

/// A long-format result table with a fixed column set.
pub struct Table {
    /// A one-line semantics note, emitted as a `#` comment line in CSV and
    /// a `note` field in JSON.
    pub note: Option<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

/// 17 significant digits: enough to reconstruct the exact double.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            note: None,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let fail = |e: csv::Error| Error::Format(format!("writing CSV: {e}"));
        if let Some(note) = &self.note {
            writeln!(w, "# {note}").map_err(|e| Error::Format(format!("writing CSV: {e}")))?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|c| match c {
                Cell::Str(s) => s.clone(),
                Cell::Float(v) => fmt_float(*v),
                Cell::Int(n) => n.to_string(),
                Cell::Empty => String::new(),
            }))
            .map_err(fail)?;
        }
        csv.flush().map_err(|e| Error::Format(format!("writing CSV: {e}")))?;
        Ok(())
    }

    fn write_json(&self, mut w: impl Write) -> Result<()> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .zip(row)
                    .map(|(col, cell)| {
                        let value = match cell {
                            Cell::Str(s) => serde_json::Value::from(s.as_str()),
                            Cell::Float(v) => serde_json::Number::from_f64(*v)
                                .map_or(serde_json::Value::Null, serde_json::Value::Number),
                            Cell::Int(n) => serde_json::Value::from(*n),
                            Cell::Empty => serde_json::Value::Null,
                        };
                        (col.to_string(), value)
                    })
                    .collect::<serde_json::Map<String, serde_json::Value>>()
                    .into()
            })
            .collect();
        let doc = match &self.note {
            Some(note) => serde_json::json!({ "note": note, "rows": rows }),
            None => serde_json::json!({ "rows": rows }),
        };
        serde_json::to_writer_pretty(&mut w, &doc)
            .map_err(|e| Error::Format(format!("writing JSON: {e}")))?;
        w.write_all(b"\n")
            .map_err(|e| Error::Format(format!("writing JSON: {e}")))?;
        Ok(())
    }

    /// Writes the table to `out`, or to stdout when `out` is `None`.
    pub fn write(&self, format: OutputFormat, out: Option<&Path>) -> Result<()> {
        match out {
            Some(path) => {
                let file = File::create(path).map_err(|e| Error::io(path, e))?;
                match format {
                    OutputFormat::Csv => self.write_csv(file),
                    OutputFormat::Json => self.write_json(file),
                }
            }
            None => {
                let stdout = io::stdout().lock();
                match format {
                    OutputFormat::Csv => self.write_csv(stdout),
                    OutputFormat::Json => self.write_json(stdout),
                }
            }
        }
    }
}
