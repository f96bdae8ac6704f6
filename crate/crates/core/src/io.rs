//! File formats.
//!
//! Matrices are headerless UTF-8 CSV with one row per feature and one column
//! per sample. Label files hold one nonnegative integer per line. Every write
//! goes to a temporary file in the target directory that is then renamed.

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

fn parse_error(path: &Path, row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message: message.into(),
    }
}

/// Reads a matrix from CSV text. Rows and columns in errors are 1-based.
pub fn parse_matrix_csv(text: &str, path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(rows + 1);
            parse_error(path, row, 0, e.to_string())
        })?;
        let row = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_error(
                    path,
                    row,
                    record.len().min(w) + 1,
                    format!("row {row} has {} cells, expected {w}", record.len()),
                ));
            }
            Some(_) => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(
                    path,
                    row,
                    c + 1,
                    format!("row {row}: cannot parse {cell:?} as a number"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    row,
                    c + 1,
                    format!("row {row}: non-finite value {cell:?}"),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = match width {
        Some(w) if rows > 0 => w,
        _ => return Err(parse_error(path, 1, 0, "file contains no matrix rows")),
    };
    Ok(DenseMatrix::from_row_slice(rows, cols, &values))
}

/// Loads a data matrix; each column is one data point.
pub fn ingest_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    parse_matrix_csv(&read_to_string(path)?, path)
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let l = t.parse().map_err(|_| {
            parse_error(
                path,
                i + 1,
                1,
                format!("line {}: {t:?} is not a nonnegative integer", i + 1),
            )
        })?;
        labels.push(l);
    }
    if labels.is_empty() {
        return Err(parse_error(path, 1, 0, "label file is empty"));
    }
    Ok(labels)
}

pub fn ingest_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    parse_labels(&read_to_string(path)?, path)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// CSV text for a matrix; values use the shortest representation that parses back exactly.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}

pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    write_atomic(path, text.as_bytes())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = to_json_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Serializes rows of a table with a header line taken from the field names.
pub fn write_csv_table<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Serialization(e.to_string()))?;
    write_atomic(path, &bytes)
}
