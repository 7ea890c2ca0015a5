//! CSV matrices and atomic file output.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Relative asymmetry accepted when reading a symmetric matrix.
pub const SYMMETRY_RTOL: f64 = 1e-9;

/// Reads a headerless, comma-separated numeric matrix.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    parse_matrix_csv(file, &path.display().to_string())
}

pub fn parse_matrix_csv(reader: impl std::io::Read, label: &str) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("{label}: line {}: `{f}` is not a number", line + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{label}: no data")));
    }
    let ncols = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::dim(format!(
            "{label}: line {} has {} fields, expected {ncols}",
            i + 1,
            rows[i].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{label}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Reads a square matrix, checks symmetry and averages it with its transpose.
pub fn read_symmetric_csv(path: &Path) -> Result<SymmetricMatrix> {
    SymmetricMatrix::from_dense(read_matrix_csv(path)?, SYMMETRY_RTOL)
}

/// Formats a matrix as CSV with round-trip float formatting.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 20);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    atomic_write(path, matrix_csv(m).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-17, 7.0]);
        let back = parse_matrix_csv(matrix_csv(&m).as_bytes(), "mem").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_ragged_and_asymmetric() {
        assert!(parse_matrix_csv("1,2\n3\n".as_bytes(), "mem").is_err());
        let m = parse_matrix_csv("0,1\n2,0\n".as_bytes(), "mem").unwrap();
        assert!(SymmetricMatrix::from_dense(m, SYMMETRY_RTOL).is_err());
    }
}
