//! Small numeric CSV tables with fixed headers.
//!
//! Parse failures carry the 1-based line number of the offending row.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Reads a CSV whose header must equal `header` exactly.
pub fn read_columns<R: Read>(reader: R, source: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse { path: source.to_path_buf(), line, message };

    let found = csv.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let row = record
            .iter()
            .zip(header)
            .map(|(field, name)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("`{name}`: `{field}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_columns_file(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_columns(file, path, header)
}

/// Two-column convenience wrapper around [`read_columns_file`].
pub fn read_pairs_file(path: &Path, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    Ok(read_columns_file(path, &header)?.into_iter().map(|r| (r[0], r[1])).collect())
}

/// Writes rows with a header; `{}` formatting keeps the shortest round-trip
/// representation of every value.
pub fn write_columns<W: Write>(writer: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> std::io::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(header)?;
    for row in rows {
        csv.write_record(row.iter().map(|v| v.to_string()))?;
    }
    csv.flush()
}

pub fn write_columns_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_columns(std::io::BufWriter::new(file), header, rows).map_err(|e| Error::io(path, e))
}
