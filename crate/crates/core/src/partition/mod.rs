//! Subdomains: non-overlapping owner sets, overlap dilation, restriction
//! operators and interface edge patterns.

mod graph;

use std::fmt::Write as _;
use std::path::Path;

pub use graph::{
    lloyd_aggregate, lloyd_from_centers, matrix_edges, modified_bellman_ford, Aggregation,
    LloydOptions, NearestCenters,
};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    owner: Vec<usize>,
    overlapped: Vec<Vec<usize>>,
    delta: usize,
    pub warnings: Vec<String>,
}

impl Partition {
    /// Non-overlapping partition; subdomain ids must be `0..S` with none empty.
    pub fn from_owner(owner: Vec<usize>) -> Result<Self> {
        if owner.is_empty() {
            return Err(Error::InvalidPartition("no nodes".into()));
        }
        let s = owner.iter().max().unwrap() + 1;
        let mut sets = vec![Vec::new(); s];
        for (v, &o) in owner.iter().enumerate() {
            sets[o].push(v);
        }
        if let Some(i) = sets.iter().position(Vec::is_empty) {
            return Err(Error::InvalidPartition(format!("subdomain {i} is empty")));
        }
        Ok(Self {
            owner,
            overlapped: sets,
            delta: 0,
            warnings: Vec::new(),
        })
    }

    /// Lloyd aggregation of the matrix graph.
    pub fn lloyd(a: &SparseMatrix, opts: &LloydOptions) -> Result<Self> {
        let agg = lloyd_aggregate(a, opts)?;
        let mut p = Self::from_owner(agg.owner)?;
        p.warnings = agg.warnings;
        Ok(p)
    }

    /// Two subdomains of an `n x n` lattice split by column: columns `< n / 2`
    /// form subdomain 0.
    pub fn half_split(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidPartition(format!("half split needs n >= 2, got {n}")));
        }
        Self::from_owner((0..n * n).map(|v| usize::from(v % n >= n / 2)).collect())
    }

    pub fn n_nodes(&self) -> usize {
        self.owner.len()
    }

    pub fn n_subdomains(&self) -> usize {
        self.overlapped.len()
    }

    pub fn owner(&self) -> &[usize] {
        &self.owner
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Nodes of `D_i^0`, ascending.
    pub fn owned(&self, i: usize) -> Vec<usize> {
        (0..self.owner.len()).filter(|&v| self.owner[v] == i).collect()
    }

    /// Nodes of `D_i^delta`, ascending.
    pub fn overlapped(&self, i: usize) -> &[usize] {
        &self.overlapped[i]
    }

    /// Dilates every subdomain `delta` more times along the nonzeros of `a`.
    pub fn extend_overlap(&self, a: &SparseMatrix, delta: usize) -> Result<Self> {
        if a.n_rows() != self.n_nodes() || !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "overlap matrix",
                expected: self.n_nodes(),
                found: a.n_rows(),
            });
        }
        let n = self.n_nodes();
        let mut mark = vec![usize::MAX; n];
        let overlapped = self
            .overlapped
            .iter()
            .enumerate()
            .map(|(i, set)| {
                let mut current = set.clone();
                for v in &current {
                    mark[*v] = i;
                }
                for _ in 0..delta {
                    let mut added = Vec::new();
                    for &k in &current {
                        let (cols, vals) = a.row(k);
                        for (&j, &x) in cols.iter().zip(vals) {
                            if x != 0.0 && mark[j] != i {
                                mark[j] = i;
                                added.push(j);
                            }
                        }
                    }
                    if added.is_empty() {
                        break;
                    }
                    current.extend(added);
                }
                for v in &current {
                    mark[*v] = usize::MAX;
                }
                current.sort_unstable();
                current
            })
            .collect();
        Ok(Self {
            owner: self.owner.clone(),
            overlapped,
            delta: self.delta + delta,
            warnings: self.warnings.clone(),
        })
    }

    /// `owner <node> <subdomain>` lines, then `subdomain <i>: <nodes>` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# subdomains {} delta {}", self.n_subdomains(), self.delta).unwrap();
        for (v, o) in self.owner.iter().enumerate() {
            writeln!(s, "owner {v} {o}").unwrap();
        }
        for (i, set) in self.overlapped.iter().enumerate() {
            let list: Vec<String> = set.iter().map(usize::to_string).collect();
            writeln!(s, "subdomain {i}: {}", list.join(" ")).unwrap();
        }
        s
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Restriction `R_i` onto `D_i^delta` (ascending node order) together with
/// the mask that turns it into `R~_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub nodes: Vec<usize>,
    /// `owned[k]` is true when `nodes[k]` belongs to `D_i^0`.
    pub owned: Vec<bool>,
}

impl Restriction {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&v| x[v]).collect()
    }

    /// `out += R^T y`, or `R~^T y` when `restricted`.
    pub fn prolong_add(&self, y: &[f64], out: &mut [f64], restricted: bool) {
        for (k, &v) in self.nodes.iter().enumerate() {
            if !restricted || self.owned[k] {
                out[v] += y[k];
            }
        }
    }

    pub fn matrix(&self, n: usize) -> SparseMatrix {
        let t: Vec<_> = self.nodes.iter().enumerate().map(|(k, &v)| (k, v, 1.0)).collect();
        SparseMatrix::from_triplets(self.nodes.len(), n, &t).expect("indices in range")
    }

    pub fn restricted_matrix(&self, n: usize) -> SparseMatrix {
        let t: Vec<_> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|&(k, _)| self.owned[k])
            .map(|(k, &v)| (k, v, 1.0))
            .collect();
        SparseMatrix::from_triplets(self.nodes.len(), n, &t).expect("indices in range")
    }
}

pub fn build_restrictions(partition: &Partition) -> Vec<Restriction> {
    (0..partition.n_subdomains())
        .map(|i| {
            let nodes = partition.overlapped(i).to_vec();
            let owned = nodes.iter().map(|&v| partition.owner()[v] == i).collect();
            Restriction { nodes, owned }
        })
        .collect()
}

/// Nodes of `D_i^delta` touching the outside, and the edges an interface matrix may occupy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterfacePattern {
    /// Global node ids, ascending.
    pub boundary_nodes: Vec<usize>,
    /// Global `(p, q)` pairs, sorted, self-pairs included.
    pub edges: Vec<(usize, usize)>,
}

impl InterfacePattern {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Interface patterns of every subdomain. Nodes in `domain_boundary` never appear.
pub fn extract_interface(
    partition: &Partition,
    a: &SparseMatrix,
    domain_boundary: &[usize],
) -> Result<Vec<InterfacePattern>> {
    let n = partition.n_nodes();
    if a.n_rows() != n || !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "interface matrix",
            expected: n,
            found: a.n_rows(),
        });
    }
    let mut on_dirichlet = vec![false; n];
    for &v in domain_boundary {
        if v >= n {
            return Err(Error::InvalidPartition(format!("boundary node {v} out of range")));
        }
        on_dirichlet[v] = true;
    }
    let mut inside = vec![false; n];
    let mut is_boundary = vec![false; n];
    let mut patterns = Vec::with_capacity(partition.n_subdomains());
    for i in 0..partition.n_subdomains() {
        let set = partition.overlapped(i);
        for &v in set {
            inside[v] = true;
        }
        let boundary_nodes: Vec<usize> = set
            .iter()
            .copied()
            .filter(|&p| {
                let (cols, vals) = a.row(p);
                !on_dirichlet[p]
                    && cols.iter().zip(vals).any(|(&q, &x)| x != 0.0 && !inside[q])
            })
            .collect();
        for &p in &boundary_nodes {
            is_boundary[p] = true;
        }
        let mut edges = Vec::new();
        for &p in &boundary_nodes {
            let (cols, vals) = a.row(p);
            let mut has_self = false;
            for (&q, &x) in cols.iter().zip(vals) {
                if q == p {
                    has_self = true;
                    edges.push((p, p));
                } else if x != 0.0 && is_boundary[q] {
                    edges.push((p, q));
                }
            }
            if !has_self {
                edges.push((p, p));
            }
        }
        // Keep the pattern symmetric even if `a` is not structurally symmetric.
        let mut sym: Vec<(usize, usize)> = edges.iter().flat_map(|&(p, q)| [(p, q), (q, p)]).collect();
        sym.sort_unstable();
        sym.dedup();
        for &p in &boundary_nodes {
            is_boundary[p] = false;
        }
        for &v in set {
            inside[v] = false;
        }
        patterns.push(InterfacePattern {
            boundary_nodes,
            edges: sym,
        });
    }
    Ok(patterns)
}

/// `i p q` lines listing every pattern slot.
pub fn interface_text(patterns: &[InterfacePattern]) -> String {
    let mut s = String::new();
    for (i, pat) in patterns.iter().enumerate() {
        for &(p, q) in &pat.edges {
            writeln!(s, "{i} {p} {q}").unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, make_structured_grid, ProblemSpec};

    fn path_matrix(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn grid(n: usize) -> SparseMatrix {
        assemble(&make_structured_grid(n).unwrap(), &ProblemSpec::helmholtz(1.0))
            .unwrap()
            .matrix
    }

    #[test]
    fn overlap_on_path() {
        let p = Partition::from_owner(vec![0, 0, 1, 1, 1]).unwrap();
        let a = path_matrix(5);
        assert_eq!(p.extend_overlap(&a, 0).unwrap(), p);
        let q = p.extend_overlap(&a, 1).unwrap();
        assert_eq!(q.overlapped(0), &[0, 1, 2]);
        assert_eq!(q.overlapped(1), &[1, 2, 3, 4]);
        assert_eq!(q.delta(), 1);
    }

    #[test]
    fn restrictions_on_path_sum_to_identity() {
        let a = path_matrix(5);
        let p = Partition::from_owner(vec![0, 0, 1, 1, 1]).unwrap().extend_overlap(&a, 1).unwrap();
        let r = build_restrictions(&p);
        let mut sum = SparseMatrix::zeros(5, 5);
        for ri in &r {
            let term = ri.restricted_matrix(5).transpose().matmul(&ri.matrix(5)).unwrap();
            sum = sum.add(&term).unwrap();
        }
        assert_eq!(sum.to_dense(), SparseMatrix::identity(5).to_dense());
    }

    #[test]
    fn zero_overlap_restrictions_coincide() {
        let p = Partition::from_owner(vec![1, 0, 1, 0]).unwrap();
        for r in build_restrictions(&p) {
            assert!(r.owned.iter().all(|&o| o));
            assert_eq!(r.matrix(4), r.restricted_matrix(4));
        }
    }

    #[test]
    fn half_split_three_by_three() {
        let a = grid(3);
        let p = Partition::half_split(3).unwrap().extend_overlap(&a, 1).unwrap();
        assert_eq!(p.owned(0), vec![0, 3, 6]);
        assert_eq!(p.overlapped(0), &[0, 1, 3, 4, 6, 7]);
        assert_eq!(p.overlapped(1).len(), 9);
        let pats = extract_interface(&p, &a, &[]).unwrap();
        assert_eq!(pats[0].boundary_nodes, vec![1, 4, 7]);
        assert_eq!(
            pats[0].edges,
            vec![(1, 1), (1, 4), (4, 1), (4, 4), (4, 7), (7, 4), (7, 7)]
        );
        assert!(pats[1].is_empty());
    }

    #[test]
    fn domain_boundary_nodes_are_excluded() {
        let a = grid(3);
        let p = Partition::half_split(3).unwrap().extend_overlap(&a, 1).unwrap();
        let pats = extract_interface(&p, &a, &[1, 7]).unwrap();
        assert_eq!(pats[0].boundary_nodes, vec![4]);
        assert_eq!(pats[0].edges, vec![(4, 4)]);
    }

    #[test]
    fn single_subdomain_has_no_interface() {
        let a = grid(4);
        let p = Partition::from_owner(vec![0; 16]).unwrap().extend_overlap(&a, 2).unwrap();
        assert!(extract_interface(&p, &a, &[]).unwrap().iter().all(InterfacePattern::is_empty));
    }

    #[test]
    fn empty_subdomain_rejected() {
        assert!(Partition::from_owner(vec![0, 2, 2]).is_err());
    }

    #[test]
    fn text_export_lists_owner_and_sets() {
        let p = Partition::from_owner(vec![0, 1]).unwrap();
        let t = p.to_text();
        assert!(t.contains("owner 1 1\n"));
        assert!(t.contains("subdomain 0: 0\n"));
    }
}
