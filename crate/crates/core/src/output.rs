//! Plain-text artifacts: CSV tables with fixed headers and pretty JSON
//! reports. Numbers are written with Rust's shortest round-trip formatting,
//! so identical inputs give byte-identical files.

use serde::Serialize;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const TRACES_HEADER: [&str; 6] = ["k", "E", "lambda", "theta", "x", "dx"];
pub const NORMS_HEADER: [&str; 5] = ["L", "E", "lambda", "theta", "norm_sq"];
pub const MARGINS_HEADER: [&str; 7] = ["k", "E", "lambda", "theta", "lhs", "rhs", "relative_margin"];
pub const BANDS_HEADER: [&str; 5] = ["k", "lambda", "band_index", "E_lo", "E_hi"];
pub const GROWTH_HEADER: [&str; 3] = ["lambda", "k", "min_abs_dx"];
pub const DYNAMICS_HEADER: [&str; 7] = ["lambda", "theta", "T", "L", "mass", "edge_mass", "valid"];
pub const WORDS_HEADER: [&str; 5] = ["k", "length", "height", "s_k", "b_k"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot encode {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot encode {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("row {row} of {path} has {got} fields, header has {expected}")]
    RowWidth { path: PathBuf, row: usize, got: usize, expected: usize },
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e16)` so tiny and huge values stay compact.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Writes `header` then `rows` as CSV. Every row must match the header width.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for (i, row) in rows.into_iter().enumerate() {
        let fields: Vec<R::Item> = row.into_iter().collect();
        if fields.len() != header.len() {
            return Err(OutputError::RowWidth {
                path: path.to_path_buf(),
                row: i + 1,
                got: fields.len(),
                expected: header.len(),
            });
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| OutputError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}
