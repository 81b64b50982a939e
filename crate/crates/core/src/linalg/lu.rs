//! Direct sparse solver: reverse Cuthill-McKee reordering followed by a banded
//! LU factorization with partial pivoting.
//!
//! Subdomain matrices are small and mesh-like, so after RCM their bandwidth is
//! modest and the band storage stays close to the true fill of a general sparse LU.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Cached LU factors of a square sparse matrix.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    /// `perm[k]` is the original index placed at position `k`.
    perm: Vec<usize>,
    lower: usize,
    upper: usize,
    /// Row `i` holds columns `i - lower ..= i + lower + upper`.
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl LuFactor {
    /// Factors `a`. `name` identifies the matrix in singular-pivot errors.
    pub fn new(a: &SparseMatrix, name: &str) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.n_rows(),
                cols: a.n_cols(),
            });
        }
        let n = a.n_rows();
        let perm = reverse_cuthill_mckee(a);
        let mut inverse = vec![0usize; n];
        for (k, &g) in perm.iter().enumerate() {
            inverse[g] = k;
        }

        let (mut lower, mut upper) = (0usize, 0usize);
        for (r, c, _) in a.triplets() {
            let (pr, pc) = (inverse[r], inverse[c]);
            if pr > pc {
                lower = lower.max(pr - pc);
            } else {
                upper = upper.max(pc - pr);
            }
        }

        let width = 2 * lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for (r, c, v) in a.triplets() {
            let (pr, pc) = (inverse[r], inverse[c]);
            band[pr * width + (pc + lower - pr)] += v;
        }

        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut factor = Self {
            n,
            perm,
            lower,
            upper,
            band,
            pivots: vec![0; n],
        };
        factor.factorize(scale, name)?;
        Ok(factor)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        2 * self.lower + self.upper + 1
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width() + (col + self.lower - row)
    }

    fn factorize(&mut self, scale: f64, name: &str) -> Result<()> {
        let n = self.n;
        let kl = self.lower;
        let reach = kl + self.upper;
        let tiny = scale * 1e-14;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut pivot = k;
            let mut best = self.band[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.band[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularMatrix {
                    matrix: name.to_string(),
                    row: self.perm[k],
                });
            }
            self.pivots[k] = pivot;
            let last_col = (k + reach).min(n - 1);
            if pivot != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(pivot, j));
                    self.band.swap(a, b);
                }
            }
            let diag = self.band[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.band[ik] / diag;
                self.band[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let (src, dst) = (self.idx(k, j), self.idx(i, j));
                    self.band[dst] -= l * self.band[src];
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` with the cached factors.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "LU solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Solves into `x`; lengths must equal [`LuFactor::dim`].
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let kl = self.lower;
        let reach = kl + self.upper;
        let mut y: Vec<f64> = self.perm.iter().map(|&g| b[g]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    y[i] -= self.band[self.idx(i, k)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = y[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                acc -= self.band[self.idx(k, j)] * y[j];
            }
            y[k] = acc / self.band[self.idx(k, k)];
        }
        for (k, &g) in self.perm.iter().enumerate() {
            x[g] = y[k];
        }
    }

    /// Multiply-add count of one solve, used by the scaling checks.
    pub fn solve_flops(&self) -> usize {
        self.n * (2 * self.lower + self.upper + 1)
    }
}

/// Solves `A x = b` directly.
pub fn sparse_lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "sparse_lu_solve right-hand side",
            expected: a.n_rows(),
            found: b.len(),
        });
    }
    LuFactor::new(a, "A")?.solve(b)
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern, component by component.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let adj = a.adjacency();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut start = seed;
    let mut eccentricity = 0;
    for _ in 0..8 {
        let levels = bfs_levels(start, adj);
        let max_level = levels.iter().filter_map(|l| *l).max().unwrap_or(0);
        if max_level <= eccentricity && eccentricity > 0 {
            break;
        }
        eccentricity = max_level;
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(max_level))
            .map(|(i, _)| i)
            .min_by_key(|&i| (degree[i], i))
            .unwrap_or(start);
        if candidate == start {
            break;
        }
        start = candidate;
    }
    start
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    level[start] = Some(0);
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        let next = level[v].unwrap() + 1;
        for &u in &adj[v] {
            if level[u].is_none() {
                level[u] = Some(next);
                queue.push_back(u);
            }
        }
    }
    level
}
