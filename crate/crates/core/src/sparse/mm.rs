//! Matrix Market coordinate I/O (`real general` only).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{CsrMatrix, Result, SparseError};

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Writes `a` with 1-based indices and 17 significant digits per value.
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a `coordinate real general` file. Duplicate coordinates are rejected;
/// explicit zeros are dropped.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| SparseError::MalformedHeader("empty input".into()))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(SparseError::MalformedHeader(header));
    }
    if tokens[2] != "coordinate" {
        return Err(SparseError::MalformedHeader(format!(
            "format `{}` (only coordinate is supported)",
            tokens[2]
        )));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(SparseError::UnsupportedField(tokens[3].clone()));
    }
    if tokens[4] != "general" {
        return Err(SparseError::UnsupportedSymmetry(tokens[4].clone()));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parse_err = |msg: &str| SparseError::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err("expected `rows cols nnz`"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err("bad size field"));
                size = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
                triplets.reserve(size.unwrap().2);
            }
            Some((n_rows, n_cols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err("expected `row col value`"));
                }
                let i: usize = fields[0].parse().map_err(|_| parse_err("bad row index"))?;
                let j: usize = fields[1].parse().map_err(|_| parse_err("bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| parse_err("bad value"))?;
                if i == 0 || j == 0 || i > n_rows || j > n_cols {
                    return Err(SparseError::IndexOutOfRange {
                        row: i,
                        col: j,
                        n_rows,
                        n_cols,
                    });
                }
                triplets.push((i - 1, j - 1, v));
            }
        }
    }
    let (n_rows, n_cols, nnz) =
        size.ok_or_else(|| SparseError::MalformedHeader("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(SparseError::Parse {
            line: 0,
            msg: format!("expected {nnz} entries, found {}", triplets.len()),
        });
    }
    triplets.sort_by_key(|&(i, j, _)| (i, j));
    for w in triplets.windows(2) {
        if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
            return Err(SparseError::DuplicateEntry {
                row: w[0].0 + 1,
                col: w[0].1 + 1,
            });
        }
    }
    let mut row_ptr = vec![0usize; n_rows + 1];
    let mut col_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    for &(i, j, v) in &triplets {
        if v != 0.0 {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
    }
    for i in 0..n_rows {
        row_ptr[i + 1] += row_ptr[i];
    }
    CsrMatrix::new(n_rows, n_cols, row_ptr, col_idx, values)
}

pub fn mm_write(path: impl AsRef<Path>, a: &CsrMatrix) -> Result<()> {
    write_matrix_market(a, BufWriter::new(File::create(path)?))
}

pub fn mm_read(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    read_matrix_market(BufReader::new(File::open(path)?))
}
