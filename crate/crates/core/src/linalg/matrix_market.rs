//! Matrix Market coordinate format (real, general, 1-indexed).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub fn write_matrix_market(a: &SparseMatrix) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz());
    for (r, c, v) in a.triplets() {
        let _ = writeln!(out, "{} {} {:e}", r + 1, c + 1, v);
    }
    out
}

pub fn save_matrix_market(a: &SparseMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, write_matrix_market(a))?;
    Ok(())
}

pub fn load_matrix_market(path: &Path) -> Result<SparseMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_market(&text, path)
}

/// Parses coordinate real/integer matrices; `symmetric` storage is expanded.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<SparseMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let header_lc = header.to_ascii_lowercase();
    if !header_lc.starts_with("%%matrixmarket matrix coordinate") {
        return Err(err(1, "expected '%%MatrixMarket matrix coordinate' header".into()));
    }
    if header_lc.contains("complex") || header_lc.contains("pattern") {
        return Err(err(1, "only real or integer coordinate matrices are supported".into()));
    }
    let symmetric = header_lc.contains("symmetric");

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(err(lineno, "size line needs 'rows cols entries'".into()));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| err(lineno, e.to_string()));
                size = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(err(lineno, "entry line needs 'row col value'".into()));
                }
                let r: usize = fields[0].parse().map_err(|_| err(lineno, "bad row index".into()))?;
                let c: usize = fields[1].parse().map_err(|_| err(lineno, "bad column index".into()))?;
                let v: f64 = fields[2].parse().map_err(|_| err(lineno, "bad value".into()))?;
                if r == 0 || c == 0 || r > rows || c > cols {
                    return Err(err(lineno, format!("index ({r}, {c}) outside {rows}x{cols}")));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (rows, cols, declared) = size.ok_or_else(|| err(1, "missing size line".into()))?;
    let stored = if symmetric {
        triplets.iter().filter(|(r, c, _)| r >= c).count()
    } else {
        triplets.len()
    };
    if stored != declared {
        return Err(err(
            text.lines().count(),
            format!("declared {declared} entries, found {stored}"),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}
