//! Reader for `MLORAS-FIXTURE v1` parity fixtures.
//!
//! ```text
//! MLORAS-FIXTURE v1
//! weights <file name, relative to the fixture>
//! nodes <n>
//! delta <overlap>
//! owner <n subdomain ids>
//! features <n values>
//! edges <count>
//! <p> <q> <a_pq> <mask 0|1> <expected output>     (CSR order)
//! end
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone)]
pub struct GnnFixture {
    pub weights_file: String,
    pub matrix: SparseMatrix,
    pub owner: Vec<usize>,
    pub delta: usize,
    pub features: Vec<f64>,
    /// CSR order of `matrix`.
    pub mask: Vec<bool>,
    pub expected: Vec<f64>,
}

pub fn parse_fixture(text: &str, path: &Path) -> Result<GnnFixture> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let mut keyed = |key: &str| -> Result<(usize, Vec<String>)> {
        let (no, line) = lines.next().ok_or_else(|| err(0, format!("missing `{key}` line")))?;
        let mut f = line.split_whitespace();
        if f.next() != Some(key) {
            return Err(err(no, format!("expected `{key}`, found {line:?}")));
        }
        Ok((no, f.map(str::to_string).collect()))
    };
    let (no, magic) = keyed("MLORAS-FIXTURE")?;
    if magic != ["v1"] {
        return Err(err(no, "unsupported fixture version".into()));
    }
    let (_, weights) = keyed("weights")?;
    let weights_file = weights.join(" ");
    let parse_usize = |no: usize, s: &str| s.parse::<usize>().map_err(|e| err(no, format!("{s:?}: {e}")));
    let parse_f64 = |no: usize, s: &str| s.parse::<f64>().map_err(|e| err(no, format!("{s:?}: {e}")));
    let (no, nodes) = keyed("nodes")?;
    let n = parse_usize(no, nodes.first().map_or("", String::as_str))?;
    let (no, delta) = keyed("delta")?;
    let delta = parse_usize(no, delta.first().map_or("", String::as_str))?;
    let (no, owner) = keyed("owner")?;
    let owner = owner.iter().map(|s| parse_usize(no, s)).collect::<Result<Vec<_>>>()?;
    let (no2, features) = keyed("features")?;
    let features = features.iter().map(|s| parse_f64(no2, s)).collect::<Result<Vec<_>>>()?;
    if owner.len() != n || features.len() != n {
        return Err(err(no, format!("owner/features must list {n} nodes")));
    }
    let (no, count) = keyed("edges")?;
    let count = parse_usize(no, count.first().map_or("", String::as_str))?;
    let mut triplets = Vec::with_capacity(count);
    let mut mask = Vec::with_capacity(count);
    let mut expected = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, line) = lines.next().ok_or_else(|| err(0, "truncated edge list".into()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err(no, format!("edge line needs 5 fields, found {}", f.len())));
        }
        let (p, q) = (parse_usize(no, f[0])?, parse_usize(no, f[1])?);
        if let Some(&(pp, qq, _)) = triplets.last() {
            if (pp, qq) >= (p, q) {
                return Err(err(no, "edges must be listed in row-major order without repeats".into()));
            }
        }
        triplets.push((p, q, parse_f64(no, f[2])?));
        mask.push(match f[3] {
            "0" => false,
            "1" => true,
            other => return Err(err(no, format!("mask must be 0 or 1, found {other:?}"))),
        });
        expected.push(parse_f64(no, f[4])?);
    }
    match lines.next() {
        Some((_, "end")) => {}
        Some((no, line)) => return Err(err(no, format!("expected `end`, found {line:?}"))),
        None => return Err(err(0, "missing `end`".into())),
    }
    Ok(GnnFixture {
        weights_file,
        matrix: SparseMatrix::from_triplets(n, n, &triplets)?,
        owner,
        delta,
        features,
        mask,
        expected,
    })
}
