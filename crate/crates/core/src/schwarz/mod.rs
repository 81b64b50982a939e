//! Subdomain matrices, interface matrices and the Jacobi / additive Schwarz /
//! RAS / ORAS preconditioner actions.

mod interface;

use rayon::prelude::*;

pub use interface::{interface_values_text, parse_interface_values, InterfaceMatrix};

use crate::discretize::{Discretization, LinearSystem};
use crate::error::{Error, Result};
use crate::linalg::{LuFactor, SparseMatrix};
use crate::partition::{build_restrictions, Partition, Restriction};

/// `A_i^delta`: the principal submatrix of `a` on the restriction's nodes.
pub fn subdomain_galerkin(a: &SparseMatrix, restriction: &Restriction) -> SparseMatrix {
    a.principal_submatrix(&restriction.nodes)
}

/// Subdomain matrix rediscretized with a natural boundary condition on the
/// internal interface.
///
/// Finite elements: only elements whose free vertices all lie in the subdomain
/// are assembled. Otherwise: the Galerkin block with each diagonal reduced by
/// `|a_pj|` for every neighbour `j` outside the subdomain.
pub fn subdomain_neumann(system: &LinearSystem, restriction: &Restriction) -> SparseMatrix {
    let a = &system.matrix;
    let nodes = &restriction.nodes;
    match &system.discretization {
        Discretization::FiniteElement { elements } => {
            let mut local = vec![usize::MAX; a.n_rows()];
            for (k, &g) in nodes.iter().enumerate() {
                local[g] = k;
            }
            let mut triplets = Vec::new();
            for el in elements {
                let inside = el
                    .rows
                    .iter()
                    .all(|r| r.is_none_or(|r| local[r] != usize::MAX));
                if !inside {
                    continue;
                }
                for x in 0..3 {
                    let Some(r) = el.rows[x] else { continue };
                    for y in 0..3 {
                        if let Some(c) = el.rows[y] {
                            triplets.push((local[r], local[c], el.local[x][y]));
                        }
                    }
                }
            }
            // Nodes whose every element straddles the interface would leave an empty row.
            for k in 0..nodes.len() {
                triplets.push((k, k, 0.0));
            }
            SparseMatrix::from_triplets(nodes.len(), nodes.len(), &triplets)
                .expect("local indices in range")
        }
        Discretization::FiniteDifference { .. } | Discretization::Algebraic => {
            let mut index = vec![usize::MAX; a.n_rows()];
            for (k, &g) in nodes.iter().enumerate() {
                index[g] = k;
            }
            let mut triplets = Vec::new();
            for (k, &g) in nodes.iter().enumerate() {
                let (cols, vals) = a.row(g);
                let mut dropped = 0.0;
                for (&c, &v) in cols.iter().zip(vals) {
                    if index[c] != usize::MAX {
                        triplets.push((k, index[c], v));
                    } else {
                        dropped += v.abs();
                    }
                }
                triplets.push((k, k, -dropped));
            }
            SparseMatrix::from_triplets(nodes.len(), nodes.len(), &triplets)
                .expect("local indices in range")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Jacobi,
    AdditiveSchwarz,
    Ras,
    Oras,
}

/// Which subdomain matrix `L_i` is added to in ORAS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubdomainBlocks {
    #[default]
    Neumann,
    Galerkin,
}

#[derive(Debug, Clone)]
pub struct Preconditioner {
    variant: Variant,
    n: usize,
    restrictions: Vec<Restriction>,
    factors: Vec<LuFactor>,
    inv_diag: Vec<f64>,
}

impl Preconditioner {
    /// `M = diag(A)^{-1}`.
    pub fn jacobi(system: &LinearSystem) -> Result<Self> {
        let diag = system.matrix.diagonal();
        if let Some(row) = diag.iter().position(|&d| d == 0.0) {
            return Err(Error::SingularMatrix {
                matrix: "Jacobi diagonal".into(),
                row,
            });
        }
        Ok(Self {
            variant: Variant::Jacobi,
            n: diag.len(),
            restrictions: Vec::new(),
            factors: Vec::new(),
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }

    pub fn additive_schwarz(system: &LinearSystem, partition: &Partition) -> Result<Self> {
        Self::galerkin(Variant::AdditiveSchwarz, system, partition)
    }

    pub fn ras(system: &LinearSystem, partition: &Partition) -> Result<Self> {
        Self::galerkin(Variant::Ras, system, partition)
    }

    fn galerkin(variant: Variant, system: &LinearSystem, partition: &Partition) -> Result<Self> {
        check_partition(system, partition)?;
        let restrictions = build_restrictions(partition);
        let factors = restrictions
            .iter()
            .enumerate()
            .map(|(i, r)| factor(&subdomain_galerkin(&system.matrix, r), i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant,
            n: system.dim(),
            restrictions,
            factors,
            inv_diag: Vec::new(),
        })
    }

    /// ORAS with `A~_i = A_i + L_i`, one interface matrix per subdomain.
    pub fn oras(
        system: &LinearSystem,
        partition: &Partition,
        interfaces: &[InterfaceMatrix],
        blocks: SubdomainBlocks,
    ) -> Result<Self> {
        check_partition(system, partition)?;
        if interfaces.len() != partition.n_subdomains() {
            return Err(Error::DimensionMismatch {
                context: "interface matrices",
                expected: partition.n_subdomains(),
                found: interfaces.len(),
            });
        }
        let restrictions = build_restrictions(partition);
        let factors = restrictions
            .iter()
            .zip(interfaces)
            .enumerate()
            .map(|(i, (r, l))| {
                let base = match blocks {
                    SubdomainBlocks::Neumann => subdomain_neumann(system, r),
                    SubdomainBlocks::Galerkin => subdomain_galerkin(&system.matrix, r),
                };
                let tilde = if l.pattern.is_empty() {
                    base
                } else {
                    base.add(&l.local_matrix(i, r)?)?
                };
                factor(&tilde, i)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant: Variant::Oras,
            n: system.dim(),
            restrictions,
            factors,
            inv_diag: Vec::new(),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn restrictions(&self) -> &[Restriction] {
        &self.restrictions
    }

    /// `M r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.apply_into(r, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        if r.len() != self.n || out.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "preconditioner apply",
                expected: self.n,
                found: if r.len() != self.n { r.len() } else { out.len() },
            });
        }
        if self.variant == Variant::Jacobi {
            for ((o, x), d) in out.iter_mut().zip(r).zip(&self.inv_diag) {
                *o = x * d;
            }
            return Ok(());
        }
        let local: Vec<Vec<f64>> = self
            .restrictions
            .par_iter()
            .zip(&self.factors)
            .map(|(res, lu)| {
                let rhs = res.restrict(r);
                let mut x = vec![0.0; rhs.len()];
                lu.solve_into(&rhs, &mut x);
                x
            })
            .collect();
        out.fill(0.0);
        let restricted = self.variant != Variant::AdditiveSchwarz;
        for (res, x) in self.restrictions.iter().zip(&local) {
            res.prolong_add(x, out, restricted);
        }
        Ok(())
    }

    /// Multiply-add count of one `apply`.
    pub fn apply_flops(&self) -> usize {
        if self.variant == Variant::Jacobi {
            return self.n;
        }
        self.factors
            .iter()
            .zip(&self.restrictions)
            .map(|(f, r)| f.solve_flops() + 2 * r.len())
            .sum()
    }
}

fn check_partition(system: &LinearSystem, partition: &Partition) -> Result<()> {
    if partition.n_nodes() != system.dim() {
        return Err(Error::DimensionMismatch {
            context: "partition size",
            expected: system.dim(),
            found: partition.n_nodes(),
        });
    }
    Ok(())
}

fn factor(m: &SparseMatrix, subdomain: usize) -> Result<LuFactor> {
    LuFactor::new(m, &format!("subdomain {subdomain}")).map_err(|e| match e {
        Error::SingularMatrix { row, .. } => Error::SingularSubdomain { subdomain, row },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{
        assemble, make_structured_grid, make_unstructured_mesh, p1_element_matrices, Mesh,
        MeshKind, ProblemSpec,
    };
    use crate::linalg::DenseMatrix;
    use crate::partition::{extract_interface, LloydOptions};

    fn grid_system(n: usize) -> LinearSystem {
        assemble(&make_structured_grid(n).unwrap(), &ProblemSpec::helmholtz(1.0)).unwrap()
    }

    fn operator(m: &Preconditioner) -> DenseMatrix {
        let n = m.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                m.apply(&e).unwrap()
            })
            .collect();
        DenseMatrix::from_columns(n, &cols)
    }

    #[test]
    fn galerkin_of_identity_is_identity() {
        let r = Restriction {
            nodes: vec![1, 3, 4],
            owned: vec![true; 3],
        };
        assert_eq!(subdomain_galerkin(&SparseMatrix::identity(6), &r), SparseMatrix::identity(3));
    }

    #[test]
    fn galerkin_half_split_block() {
        let sys = grid_system(3);
        let p = Partition::half_split(3).unwrap().extend_overlap(&sys.matrix, 1).unwrap();
        let r = &build_restrictions(&p)[0];
        let block = subdomain_galerkin(&sys.matrix, r).to_dense();
        let d = 4.0 * 16.0 + 1.0;
        let o = -16.0;
        // nodes 0 1 3 4 6 7
        let expected = [
            [d, o, o, 0., 0., 0.],
            [o, d, 0., o, 0., 0.],
            [o, 0., d, o, o, 0.],
            [0., o, o, d, 0., o],
            [0., 0., o, 0., d, o],
            [0., 0., 0., o, o, d],
        ];
        for i in 0..6 {
            for j in 0..6 {
                assert!((block[(i, j)] - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn neumann_whole_domain_equals_matrix() {
        for sys in [
            grid_system(5),
            assemble(&make_unstructured_mesh(2, 120).unwrap(), &ProblemSpec::helmholtz(1.0)).unwrap(),
        ] {
            let r = Restriction {
                nodes: (0..sys.dim()).collect(),
                owned: vec![true; sys.dim()],
            };
            let m = subdomain_neumann(&sys, &r);
            assert!(m.to_dense().max_abs_diff(&sys.matrix.to_dense()) < 1e-12);
        }
    }

    #[test]
    fn neumann_one_dimensional_closure() {
        let (h2, eta) = (16.0, 1.0);
        let mut t = Vec::new();
        for i in 0..6 {
            t.push((i, i, 2.0 * h2 + eta));
            if i + 1 < 6 {
                t.push((i, i + 1, -h2));
                t.push((i + 1, i, -h2));
            }
        }
        let sys = LinearSystem::from_matrix(SparseMatrix::from_triplets(6, 6, &t).unwrap(), vec![0.0; 6])
            .unwrap();
        let r = Restriction {
            nodes: vec![0, 1, 2],
            owned: vec![true; 3],
        };
        let m = subdomain_neumann(&sys, &r);
        assert_eq!(m.get(2, 2), h2 + eta);
        assert_eq!(m.get(0, 0), 2.0 * h2 + eta);
    }

    #[test]
    fn neumann_single_triangle_is_element_matrix() {
        let mesh = Mesh {
            kind: MeshKind::Triangulation,
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.4, 0.3], [0.7, 0.6]],
            triangles: vec![],
            boundary: vec![true, true, true, true, false, false],
            warnings: vec![],
        };
        // Two interior nodes; the subdomain {4} sees only elements whose free vertices are {4}.
        let triangles = vec![
            [0, 1, 4],
            [1, 3, 5],
            [1, 5, 4],
            [3, 2, 5],
            [2, 4, 5],
            [2, 0, 4],
        ];
        let mesh = Mesh { triangles, ..mesh };
        mesh.validate().unwrap();
        let sys = assemble(&mesh, &ProblemSpec::helmholtz(2.0)).unwrap();
        let r = Restriction {
            nodes: vec![0],
            owned: vec![true],
        };
        let m = subdomain_neumann(&sys, &r);
        let mut expected = 0.0;
        for t in [[0, 1, 4], [2, 0, 4]] {
            let p = t.map(|v| mesh.nodes[v]);
            let (k, ms) = p1_element_matrices(p, 1.0, 2.0);
            expected += k[2][2] + ms[2][2];
        }
        assert!((m.get(0, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn jacobi_inverts_diagonal() {
        let sys = LinearSystem::from_matrix(SparseMatrix::from_diagonal(&[2.0, 4.0]), vec![0.0; 2]).unwrap();
        let m = Preconditioner::jacobi(&sys).unwrap();
        assert_eq!(m.apply(&[1.0, 1.0]).unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn oras_galerkin_equals_ras() {
        let sys = grid_system(8);
        let p = Partition::lloyd(&sys.matrix, &LloydOptions::new(0.06, 4))
            .unwrap()
            .extend_overlap(&sys.matrix, 1)
            .unwrap();
        let pats = extract_interface(&p, &sys.matrix, &[]).unwrap();
        let zero: Vec<_> = pats.into_iter().map(InterfaceMatrix::zeros).collect();
        let ras = Preconditioner::ras(&sys, &p).unwrap();
        let oras = Preconditioner::oras(&sys, &p, &zero, SubdomainBlocks::Galerkin).unwrap();
        assert!(operator(&ras).max_abs_diff(&operator(&oras)) < 1e-12);
    }

    #[test]
    fn oras_neumann_zero_interface_is_valid() {
        let sys = grid_system(10);
        let p = Partition::half_split(10).unwrap().extend_overlap(&sys.matrix, 1).unwrap();
        let pats = extract_interface(&p, &sys.matrix, &[]).unwrap();
        let zero: Vec<_> = pats.into_iter().map(InterfaceMatrix::zeros).collect();
        Preconditioner::oras(&sys, &p, &zero, SubdomainBlocks::Neumann).unwrap();
    }

    #[test]
    fn singular_interface_names_subdomain() {
        let mut t = Vec::new();
        for i in 0..4 {
            t.push((i, i, 2.5));
            if i + 1 < 4 {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(4, 4, &t).unwrap();
        let sys = LinearSystem::from_matrix(a.clone(), vec![0.0; 4]).unwrap();
        let p = Partition::from_owner(vec![0, 0, 1, 1]).unwrap();
        let pats = extract_interface(&p, &a, &[]).unwrap();
        assert_eq!(pats[1].edges, vec![(2, 2)]);
        let mut mats: Vec<_> = pats.into_iter().map(InterfaceMatrix::zeros).collect();
        // Neumann block [[1.5, -1], [-1, 2.5]]; this shift makes it singular.
        mats[1].values[0] = -1.1;
        match Preconditioner::oras(&sys, &p, &mats, SubdomainBlocks::Neumann) {
            Err(Error::SingularSubdomain { subdomain, .. }) => assert_eq!(subdomain, 1),
            other => panic!("expected a singular subdomain, got {other:?}"),
        }
    }

    #[test]
    fn single_subdomain_is_exact_inverse() {
        let sys = grid_system(6);
        let p = Partition::from_owner(vec![0; 36]).unwrap();
        let m = Preconditioner::ras(&sys, &p).unwrap();
        let ma = operator(&m).matmul(&sys.matrix.to_dense()).unwrap();
        assert!(ma.max_abs_diff(&DenseMatrix::identity(36)) < 1e-10);
    }

    #[test]
    fn ras_matches_dense_sum_on_path() {
        let mut t = Vec::new();
        for i in 0..5 {
            t.push((i, i, 2.5));
            if i + 1 < 5 {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(5, 5, &t).unwrap();
        let sys = LinearSystem::from_matrix(a.clone(), vec![0.0; 5]).unwrap();
        let p = Partition::from_owner(vec![0, 0, 1, 1, 1]).unwrap().extend_overlap(&a, 1).unwrap();
        let m = Preconditioner::ras(&sys, &p).unwrap();
        let mut expected = DenseMatrix::zeros(5, 5);
        for r in build_restrictions(&p) {
            let block = subdomain_galerkin(&a, &r).to_dense();
            let inv = block.inverse().unwrap();
            let rt = r.restricted_matrix(5).transpose().to_dense();
            let rm = r.matrix(5).to_dense();
            let term = rt.matmul(&inv).unwrap().matmul(&rm).unwrap();
            expected = expected.add(&term).unwrap();
        }
        assert!(operator(&m).max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn apply_is_linear() {
        let sys = grid_system(7);
        let p = Partition::half_split(7).unwrap().extend_overlap(&sys.matrix, 2).unwrap();
        let m = Preconditioner::additive_schwarz(&sys, &p).unwrap();
        let r: Vec<f64> = (0..49).map(|i| (i as f64 * 0.37).sin()).collect();
        let scaled: Vec<f64> = r.iter().map(|x| -3.5 * x).collect();
        let a = m.apply(&r).unwrap();
        let b = m.apply(&scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((-3.5 * x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
        assert!(m.apply(&[1.0]).is_err());
    }
}
