//! Five-point finite differences on structured grids and P1 finite elements on
//! triangulations, with Dirichlet nodes eliminated from the system.

use std::fmt;
use std::sync::Arc;

use super::mesh::{Mesh, MeshKind};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Scalar diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `left` for `x < at`, `right` otherwise.
    StepX { left: f64, right: f64, at: f64 },
}

impl Coefficient {
    /// 1000 on `0 < x < 0.5`, 1 on `0.5 <= x < 1`.
    pub fn discontinuous() -> Self {
        Coefficient::StepX {
            left: 1000.0,
            right: 1.0,
            at: 0.5,
        }
    }

    pub fn eval(&self, x: f64, _y: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::StepX { left, right, at } => {
                if x < at {
                    left
                } else {
                    right
                }
            }
        }
    }

    fn min_value(&self) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::StepX { left, right, .. } => left.min(right),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pde {
    /// `(eta - Laplacian) u = f`
    Helmholtz { eta: f64 },
    /// `-div(kappa grad u) = f`
    PoissonDiscontinuous { kappa: Coefficient },
}

impl Pde {
    fn diffusion(&self, x: f64, y: f64) -> f64 {
        match self {
            Pde::Helmholtz { .. } => 1.0,
            Pde::PoissonDiscontinuous { kappa } => kappa.eval(x, y),
        }
    }

    fn shift(&self) -> f64 {
        match self {
            Pde::Helmholtz { eta } => *eta,
            Pde::PoissonDiscontinuous { .. } => 0.0,
        }
    }
}

/// Right-hand side or boundary data.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// One value per mesh node.
    Nodal(Vec<f64>),
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn function(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Function(Arc::new(f))
    }

    fn at_node(&self, mesh: &Mesh, i: usize) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Nodal(v) => v[i],
            ScalarField::Function(f) => f(mesh.nodes[i][0], mesh.nodes[i][1]),
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "Constant({c})"),
            ScalarField::Nodal(v) => write!(f, "Nodal(len {})", v.len()),
            ScalarField::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub pde: Pde,
    pub rhs: ScalarField,
    pub dirichlet: ScalarField,
}

impl ProblemSpec {
    /// Homogeneous Helmholtz problem.
    pub fn helmholtz(eta: f64) -> Self {
        Self {
            pde: Pde::Helmholtz { eta },
            rhs: ScalarField::Constant(0.0),
            dirichlet: ScalarField::Constant(0.0),
        }
    }

    pub fn poisson_discontinuous(kappa: Coefficient) -> Self {
        Self {
            pde: Pde::PoissonDiscontinuous { kappa },
            rhs: ScalarField::Constant(0.0),
            dirichlet: ScalarField::Constant(0.0),
        }
    }

    pub fn with_rhs(mut self, rhs: ScalarField) -> Self {
        self.rhs = rhs;
        self
    }

    pub fn with_dirichlet(mut self, g: ScalarField) -> Self {
        self.dirichlet = g;
        self
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        match self.pde {
            Pde::Helmholtz { eta } if !(eta > 0.0) => {
                return Err(Error::InvalidProblem(format!("Helmholtz shift must be > 0, got {eta}")))
            }
            Pde::PoissonDiscontinuous { kappa } if !(kappa.min_value() > 0.0) => {
                return Err(Error::InvalidProblem("diffusion coefficient must be > 0".into()))
            }
            _ => {}
        }
        for (name, field) in [("rhs", &self.rhs), ("dirichlet", &self.dirichlet)] {
            if let ScalarField::Nodal(v) = field {
                if v.len() != mesh.nodes.len() {
                    return Err(Error::InvalidProblem(format!(
                        "{name} has {} values for {} mesh nodes",
                        v.len(),
                        mesh.nodes.len()
                    )));
                }
            }
        }
        if matches!(mesh.kind, MeshKind::StructuredGrid { .. })
            && matches!(self.dirichlet, ScalarField::Nodal(_))
        {
            return Err(Error::InvalidProblem(
                "structured grids have no boundary nodes; give Dirichlet data as a function".into(),
            ));
        }
        Ok(())
    }
}

/// Local 3x3 matrix of one triangle together with its rows in the global system.
#[derive(Debug, Clone)]
pub struct ElementBlock {
    /// Global row of each vertex, `None` for eliminated Dirichlet vertices.
    pub rows: [Option<usize>; 3],
    pub local: [[f64; 3]; 3],
}

/// What produced a [`LinearSystem`]; subdomain re-discretization depends on it.
#[derive(Debug, Clone)]
pub enum Discretization {
    FiniteDifference { n: usize, h: f64 },
    FiniteElement { elements: Vec<ElementBlock> },
    Algebraic,
}

/// `A x = b` after Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Mesh node of each matrix row.
    pub free_nodes: Vec<usize>,
    pub discretization: Discretization,
}

impl LinearSystem {
    /// Wraps a bare matrix; rows map to themselves.
    pub fn from_matrix(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.n_rows(),
                cols: matrix.n_cols(),
            });
        }
        if rhs.len() != matrix.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "right-hand side",
                expected: matrix.n_rows(),
                found: rhs.len(),
            });
        }
        Ok(Self {
            free_nodes: (0..matrix.n_rows()).collect(),
            matrix,
            rhs,
            discretization: Discretization::Algebraic,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Same operator, new right-hand side.
    pub fn with_rhs(&self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "right-hand side",
                expected: self.dim(),
                found: rhs.len(),
            });
        }
        Ok(Self {
            rhs,
            ..self.clone()
        })
    }
}

/// P1 stiffness (scaled by `kappa`) and mass (scaled by `eta`) of one triangle.
pub fn p1_element_matrices(
    p: [[f64; 2]; 3],
    kappa: f64,
    eta: f64,
) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = p[j][1] - p[k][1];
        c[i] = p[k][0] - p[j][0];
    }
    let mut stiffness = [[0.0; 3]; 3];
    let mut mass = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            stiffness[i][j] = kappa * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
            mass[i][j] = eta * area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (stiffness, mass)
}

/// Assembles the system for `spec` on `mesh`.
pub fn assemble(mesh: &Mesh, spec: &ProblemSpec) -> Result<LinearSystem> {
    spec.validate(mesh)?;
    match mesh.kind {
        MeshKind::StructuredGrid { n } => Ok(assemble_fd(mesh, n, spec)),
        MeshKind::Triangulation => assemble_fe(mesh, spec),
    }
}

fn assemble_fd(mesh: &Mesh, n: usize, spec: &ProblemSpec) -> LinearSystem {
    let h = 1.0 / (n as f64 + 1.0);
    let inv_h2 = 1.0 / (h * h);
    let shift = spec.pde.shift();
    let mut triplets = Vec::with_capacity(5 * n * n);
    let mut rhs = vec![0.0; n * n];
    let g = |x: f64, y: f64| match &spec.dirichlet {
        ScalarField::Constant(c) => *c,
        ScalarField::Function(f) => f(x, y),
        ScalarField::Nodal(_) => unreachable!("rejected in validate"),
    };
    for j in 0..n {
        for i in 0..n {
            let row = i + j * n;
            let (x, y) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
            let mut diag = shift;
            let neighbors = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
            for (di, dj) in neighbors {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                let (nx, ny) = ((ni + 1) as f64 * h, (nj + 1) as f64 * h);
                let c = spec.pde.diffusion(0.5 * (x + nx), 0.5 * (y + ny)) * inv_h2;
                diag += c;
                if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                    rhs[row] += c * g(nx, ny);
                } else {
                    triplets.push((row, ni as usize + nj as usize * n, -c));
                }
            }
            triplets.push((row, row, diag));
            rhs[row] += spec.rhs.at_node(mesh, row);
        }
    }
    LinearSystem {
        matrix: SparseMatrix::from_triplets(n * n, n * n, &triplets).expect("in range"),
        rhs,
        free_nodes: (0..n * n).collect(),
        discretization: Discretization::FiniteDifference { n, h },
    }
}

fn assemble_fe(mesh: &Mesh, spec: &ProblemSpec) -> Result<LinearSystem> {
    mesh.validate()?;
    let n_nodes = mesh.nodes.len();
    let mut row_of = vec![None; n_nodes];
    let mut free_nodes = Vec::new();
    for i in 0..n_nodes {
        if !mesh.boundary[i] {
            row_of[i] = Some(free_nodes.len());
            free_nodes.push(i);
        }
    }
    let n = free_nodes.len();
    if n == 0 {
        return Err(Error::InvalidMesh("mesh has no interior nodes".into()));
    }
    let f: Vec<f64> = (0..n_nodes).map(|i| spec.rhs.at_node(mesh, i)).collect();
    let g: Vec<f64> = (0..n_nodes)
        .map(|i| if mesh.boundary[i] { spec.dirichlet.at_node(mesh, i) } else { 0.0 })
        .collect();

    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    let mut rhs = vec![0.0; n];
    let mut elements = Vec::with_capacity(mesh.triangles.len());
    for t in &mesh.triangles {
        let p = t.map(|v| mesh.nodes[v]);
        let centroid = [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ];
        let kappa = spec.pde.diffusion(centroid[0], centroid[1]);
        let (stiffness, mass) = p1_element_matrices(p, kappa, spec.pde.shift());
        let (_, unit_mass) = p1_element_matrices(p, 1.0, 1.0);
        let mut local = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                local[a][b] = stiffness[a][b] + mass[a][b];
            }
        }
        let rows = t.map(|v| row_of[v]);
        for a in 0..3 {
            let Some(r) = rows[a] else { continue };
            for b in 0..3 {
                rhs[r] += unit_mass[a][b] * f[t[b]];
                match rows[b] {
                    Some(c) => triplets.push((r, c, local[a][b])),
                    None => rhs[r] -= local[a][b] * g[t[b]],
                }
            }
        }
        elements.push(ElementBlock { rows, local });
    }
    Ok(LinearSystem {
        matrix: SparseMatrix::from_triplets(n, n, &triplets)?,
        rhs,
        free_nodes,
        discretization: Discretization::FiniteElement { elements },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{make_structured_grid, make_unstructured_mesh};
    use crate::linalg::sparse_lu_solve;
    use std::f64::consts::PI;

    #[test]
    fn five_point_entries_n2() {
        let sys = assemble(&make_structured_grid(2).unwrap(), &ProblemSpec::helmholtz(1.0)).unwrap();
        assert!((sys.matrix.get(0, 0) - 37.0).abs() < 1e-12);
        assert!((sys.matrix.get(0, 1) + 9.0).abs() < 1e-12);
        assert!((sys.matrix.get(0, 2) + 9.0).abs() < 1e-12);
        assert_eq!(sys.matrix.get(0, 3), 0.0);
    }

    #[test]
    fn reference_triangle_stiffness() {
        let (k, m) = p1_element_matrices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1.0, 0.0);
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
                assert_eq!(m[i][j], 0.0);
            }
        }
    }

    #[test]
    fn interior_row_sums_equal_shift() {
        let eta = 2.5;
        let n = 6;
        let sys = assemble(&make_structured_grid(n).unwrap(), &ProblemSpec::helmholtz(eta)).unwrap();
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let s: f64 = sys.matrix.row(i + j * n).1.iter().sum();
                assert!((s - eta).abs() < 1e-9, "{s}");
            }
        }
    }

    #[test]
    fn assembled_matrices_are_symmetric_positive_definite() {
        let meshes = [
            make_structured_grid(8).unwrap(),
            make_unstructured_mesh(3, 200).unwrap(),
        ];
        let specs = [
            ProblemSpec::helmholtz(1.0),
            ProblemSpec::poisson_discontinuous(Coefficient::discontinuous()),
        ];
        for mesh in &meshes {
            for spec in &specs {
                let sys = assemble(mesh, spec).unwrap();
                assert!(sys.matrix.max_asymmetry() < 1e-12 * sys.matrix.max_abs().max(1.0));
                let ev = sys.matrix.to_dense().symmetric_eigenvalues().unwrap();
                assert!(ev[0] > 0.0, "smallest eigenvalue {}", ev[0]);
            }
        }
    }

    #[test]
    fn patch_test_reproduces_constant() {
        let mesh = make_unstructured_mesh(9, 150).unwrap();
        let spec = ProblemSpec::poisson_discontinuous(Coefficient::Constant(1.0))
            .with_dirichlet(ScalarField::Constant(3.25));
        let sys = assemble(&mesh, &spec).unwrap();
        let x = sparse_lu_solve(&sys.matrix, &sys.rhs).unwrap();
        assert!(x.iter().all(|v| (v - 3.25).abs() < 1e-10));
    }

    #[test]
    fn manufactured_solution_converges_second_order() {
        let eta = 1.0;
        let mut errors = Vec::new();
        for n in [10, 20, 40] {
            let mesh = make_structured_grid(n).unwrap();
            let spec = ProblemSpec::helmholtz(eta).with_rhs(ScalarField::function(move |x, y| {
                (eta + 2.0 * PI * PI) * (PI * x).sin() * (PI * y).sin()
            }));
            let sys = assemble(&mesh, &spec).unwrap();
            let u = sparse_lu_solve(&sys.matrix, &sys.rhs).unwrap();
            let err = mesh
                .nodes
                .iter()
                .zip(&u)
                .map(|(p, v)| (v - (PI * p[0]).sin() * (PI * p[1]).sin()).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        for w in errors.windows(2) {
            assert!(w[0] / w[1] >= 3.5, "{errors:?}");
        }
    }

    #[test]
    fn inhomogeneous_dirichlet_on_grid_is_folded_into_rhs() {
        // Linear data is reproduced exactly by the five-point stencil with eta small.
        let mesh = make_structured_grid(5).unwrap();
        let spec = ProblemSpec::poisson_discontinuous(Coefficient::Constant(1.0))
            .with_dirichlet(ScalarField::function(|x, y| 1.0 + 2.0 * x - y));
        let sys = assemble(&mesh, &spec).unwrap();
        let u = sparse_lu_solve(&sys.matrix, &sys.rhs).unwrap();
        for (p, v) in mesh.nodes.iter().zip(&u) {
            assert!((v - (1.0 + 2.0 * p[0] - p[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_coefficients_are_rejected() {
        let mesh = make_structured_grid(3).unwrap();
        assert!(assemble(&mesh, &ProblemSpec::helmholtz(0.0)).is_err());
        assert!(assemble(
            &mesh,
            &ProblemSpec::poisson_discontinuous(Coefficient::Constant(-1.0))
        )
        .is_err());
        let bad = ProblemSpec::helmholtz(1.0).with_rhs(ScalarField::Nodal(vec![0.0; 3]));
        assert!(assemble(&mesh, &bad).is_err());
    }
}
