use crate::error::CliResult;
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn sink(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_csv(out: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Rows as an array of objects keyed by the header.
pub fn rows_to_json(header: &[&str], rows: &[Vec<String>]) -> serde_json::Value {
    let items = rows
        .iter()
        .map(|row| {
            let obj = header
                .iter()
                .zip(row)
                .map(|(k, v)| {
                    let value = match v.parse::<f64>() {
                        Ok(x) if x.is_finite() => serde_json::json!(x),
                        _ => match v.as_str() {
                            "true" => serde_json::Value::Bool(true),
                            "false" => serde_json::Value::Bool(false),
                            "" => serde_json::Value::Null,
                            s => serde_json::Value::String(s.to_string()),
                        },
                    };
                    (k.to_string(), value)
                })
                .collect::<serde_json::Map<_, _>>();
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(items)
}

/// Table output in the requested format.
pub fn write_table(out: Option<&Path>, format: Format, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    match format {
        Format::Csv => write_csv(out, header, rows),
        Format::Json => write_json(out, &rows_to_json(header, rows)),
    }
}
