//! CSV tables of floats. Values are written with 17 significant digits.

use crate::error::{CliError, Result};
use crate::json::fmt_f64;

/// Writes rows under `header`.
pub fn write(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    into_string(w)
}

/// Writes `(eigenvalue, multiplicity)` rows; multiplicities stay integers.
pub fn write_levels(rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "multiplicity"])?;
    for row in rows {
        w.write_record([fmt_f64(row[0]), format!("{}", row[1] as u64)])?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Input(e.to_string()))
}

/// Reads the first two columns of a CSV with a header row.
pub fn read_pairs(bytes: &[u8]) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Input(format!("row {}: column {} is not a number", line + 2, i + 1)))
        };
        out.push((get(0)?, get(1)?));
    }
    Ok(out)
}
