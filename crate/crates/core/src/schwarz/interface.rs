use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::partition::{InterfacePattern, Restriction};

/// Values of `L_i` on its pattern, one per directed edge (not symmetrized).
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMatrix {
    pub pattern: InterfacePattern,
    /// `values[k]` belongs to `pattern.edges[k]`.
    pub values: Vec<f64>,
}

impl InterfaceMatrix {
    pub fn zeros(pattern: InterfacePattern) -> Self {
        let values = vec![0.0; pattern.edges.len()];
        Self { pattern, values }
    }

    /// `alpha` on every self-loop, zero elsewhere.
    pub fn classical(pattern: InterfacePattern, alpha: f64) -> Self {
        let values = pattern
            .edges
            .iter()
            .map(|&(p, q)| if p == q { alpha } else { 0.0 })
            .collect();
        Self { pattern, values }
    }

    pub fn new(pattern: InterfacePattern, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.edges.len() {
            return Err(Error::DimensionMismatch {
                context: "interface values",
                expected: pattern.edges.len(),
                found: values.len(),
            });
        }
        Ok(Self { pattern, values })
    }

    /// Value at global `(p, q)`, zero off the pattern.
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.pattern
            .edges
            .binary_search(&(p, q))
            .map_or(0.0, |k| self.values[k])
    }

    /// `L_i` in the local numbering of `restriction`.
    pub fn local_matrix(&self, subdomain: usize, restriction: &Restriction) -> Result<SparseMatrix> {
        if self.values.len() != self.pattern.edges.len() {
            return Err(Error::InvalidInterface {
                subdomain,
                message: format!(
                    "{} values for {} pattern edges",
                    self.values.len(),
                    self.pattern.edges.len()
                ),
            });
        }
        let mut triplets = Vec::with_capacity(self.values.len());
        for (&(p, q), &v) in self.pattern.edges.iter().zip(&self.values) {
            if !v.is_finite() {
                return Err(Error::InvalidInterface {
                    subdomain,
                    message: format!("non-finite value at ({p}, {q})"),
                });
            }
            let lookup = |g: usize| {
                restriction.nodes.binary_search(&g).map_err(|_| Error::InvalidInterface {
                    subdomain,
                    message: format!("node {g} is not in the subdomain"),
                })
            };
            triplets.push((lookup(p)?, lookup(q)?, v));
        }
        SparseMatrix::from_triplets(restriction.len(), restriction.len(), &triplets)
    }
}

/// `i p q value` lines for every subdomain's interface matrix.
pub fn interface_values_text(mats: &[InterfaceMatrix]) -> String {
    let mut s = String::new();
    for (i, m) in mats.iter().enumerate() {
        for (&(p, q), v) in m.pattern.edges.iter().zip(&m.values) {
            writeln!(s, "{i} {p} {q} {v:e}").unwrap();
        }
    }
    s
}

/// Reads `i p q value` lines onto the given patterns; unlisted slots stay zero.
pub fn parse_interface_values(text: &str, patterns: &[InterfacePattern]) -> Result<Vec<InterfaceMatrix>> {
    let mut mats: Vec<InterfaceMatrix> = patterns.iter().cloned().map(InterfaceMatrix::zeros).collect();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::InvalidConfig(format!("interface line {}: {message}", lineno + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", f.len())));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let (i, p, q) = (idx(f[0])?, idx(f[1])?, idx(f[2])?);
        let v: f64 = f[3].parse().map_err(|e| bad(format!("{:?}: {e}", f[3])))?;
        let m = mats.get_mut(i).ok_or_else(|| bad(format!("subdomain {i} does not exist")))?;
        let k = m
            .pattern
            .edges
            .binary_search(&(p, q))
            .map_err(|_| bad(format!("({p}, {q}) is not in the pattern of subdomain {i}")))?;
        m.values[k] = v;
    }
    Ok(mats)
}
