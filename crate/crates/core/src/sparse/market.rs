//! Matrix Market coordinate format (real, general).

use std::io::{BufRead, Write};

use super::SparseMatrix;
use crate::error::{MhdError, Result};

pub const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write_matrix_market(a: &SparseMatrix, mut out: impl Write) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{} {} {}", a.n_rows, a.n_cols, a.nnz())?;
    for i in 0..a.n_rows {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

pub fn read_matrix_market(input: impl BufRead) -> Result<SparseMatrix> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| MhdError::Parse("empty Matrix Market file".into()))??;
    let lower = header.to_ascii_lowercase();
    let fields: Vec<&str> = lower.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(MhdError::Parse(format!("unsupported Matrix Market header: {header}")));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(MhdError::Parse(format!("unsupported field type {}", fields[3])));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(MhdError::Parse(format!("unsupported symmetry {other}"))),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let bad = || MhdError::Parse(format!("line {}: cannot parse '{t}'", lineno + 2));
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(bad());
                }
                let p: Vec<usize> = parts.iter().map(|s| s.parse().map_err(|_| bad())).collect::<Result<_>>()?;
                size = Some((p[0], p[1], p[2]));
                triplets.reserve(p[2]);
            }
            Some((m, n, _)) => {
                if parts.len() != 3 {
                    return Err(bad());
                }
                let i: usize = parts[0].parse().map_err(|_| bad())?;
                let j: usize = parts[1].parse().map_err(|_| bad())?;
                let v: f64 = parts[2].parse().map_err(|_| bad())?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(MhdError::Parse(format!("entry ({i}, {j}) out of range")));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| MhdError::Parse("missing size line".into()))?;
    let expected = if symmetric { None } else { Some(nnz) };
    if let Some(e) = expected {
        if triplets.len() != e {
            return Err(MhdError::Parse(format!("expected {e} entries, found {}", triplets.len())));
        }
    }
    SparseMatrix::from_triplets(m, n, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let a = SparseMatrix::from_triplets(3, 4, &[(0, 0, 1.0 / 3.0), (1, 3, -2.5e-17), (2, 1, 7.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(HEADER));
        let b = read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_matrix_market(std::io::Cursor::new("hello\n")).is_err());
        let bad = format!("{HEADER}\n2 2 1\n3 1 1.0\n");
        assert!(read_matrix_market(std::io::Cursor::new(bad)).is_err());
    }
}
