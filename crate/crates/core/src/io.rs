//! Plain CSV matrices: one row per line, comma separated, no header.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Matrix, Result};

pub fn parse_matrix(text: &str, source: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                path: source.to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: idx + 1,
                    message: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 0,
            message: "empty matrix".into(),
        });
    }
    let cols = rows[0].len();
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, &path.display().to_string())
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    write_text(path, &format_matrix(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_matrices_print_without_decimals() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, -2.0]);
        assert_eq!(format_matrix(&m), "1,0\n0.5,-2\n");
        assert_eq!(parse_matrix(&format_matrix(&m), "t").unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_matrix("1,2\n3\n", "m.csv").unwrap_err();
        assert!(err.to_string().contains("m.csv: line 2"), "{err}");
        assert!(parse_matrix("", "m.csv").is_err());
        assert!(parse_matrix("a,b\n", "m.csv").is_err());
    }
}
