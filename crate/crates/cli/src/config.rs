use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use oras_core::discretize::{
    assemble, import_mesh, make_structured_grid, make_unstructured_mesh, Coefficient, LinearSystem, Mesh, MeshKind,
    ProblemSpec,
};
use oras_core::gnn::{infer_interfaces, GnnWeights};
use oras_core::partition::{extract_interface, LloydOptions, Partition};
use oras_core::schwarz::{parse_interface_values, InterfaceMatrix, Preconditioner, SubdomainBlocks};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PdeKind {
    #[default]
    Helmholtz,
    /// `-div(kappa grad u) = f` with kappa 1000 / 1 / 0.5 across `x = 0.5`.
    PoissonDiscontinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Split {
    /// Lloyd aggregation with `--ratio`.
    #[default]
    Lloyd,
    /// Two subdomains split by column; structured grids only.
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    Jacobi,
    #[serde(rename = "as")]
    #[value(name = "as")]
    AdditiveSchwarz,
    #[default]
    Ras,
    OrasClassical,
    OrasOptimized,
    Mloras,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Jacobi => "jacobi",
            Method::AdditiveSchwarz => "as",
            Method::Ras => "ras",
            Method::OrasClassical => "oras_classical",
            Method::OrasOptimized => "oras_optimized",
            Method::Mloras => "mloras",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SolverKind {
    Stationary,
    #[default]
    Fgmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Rhs {
    /// `b = 0`; the exact solution is zero.
    Zero,
    /// `b = 1`; no exact solution is reported.
    Ones,
    /// `b = A u*` with `u* = sin(8 pi x) + sin(8 pi y)`.
    #[default]
    Sine8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Uniform on the unit sphere, seeded by `--x0-seed`.
    #[default]
    Random,
    Zero,
}

/// One experiment: problem, partition, method, solver and loss settings.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Row label in suite output.
    #[arg(long)]
    pub name: Option<String>,

    #[arg(long, value_enum, default_value_t = PdeKind::Helmholtz)]
    pub pde: PdeKind,
    /// Helmholtz shift.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,

    /// Structured `N x N` grid of interior points.
    #[arg(long, conflicts_with_all = ["generate", "mesh"])]
    pub grid: Option<usize>,
    /// Generated unstructured mesh with about this many nodes.
    #[arg(long, conflicts_with = "mesh")]
    pub generate: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub mesh_seed: u64,
    /// Mesh file in the text mesh format.
    #[arg(long)]
    pub mesh: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Split::Lloyd)]
    pub split: Split,
    /// Subdomains per node for Lloyd aggregation.
    #[arg(long, default_value_t = 0.015)]
    pub ratio: f64,
    #[arg(long, default_value_t = 1)]
    pub delta: usize,
    #[arg(long, default_value_t = 0)]
    pub partition_seed: u64,

    #[arg(long, value_enum, default_value_t = Method::Ras)]
    pub method: Method,
    /// Robin coefficient for `oras_classical`.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Interface values file for `oras_optimized`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Weight file for `mloras`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Use Galerkin subdomain blocks `R A R^T` instead of Neumann blocks for ORAS.
    #[arg(long)]
    pub galerkin: bool,

    #[arg(long, value_enum, default_value_t = SolverKind::Fgmres)]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Run exactly `--max-iter` iterations without a convergence test.
    #[arg(long)]
    pub fixed_steps: bool,

    #[arg(long, value_enum, default_value_t = Rhs::Sine8)]
    pub rhs: Rhs,
    #[arg(long, value_enum, default_value_t = InitialGuess::Random)]
    pub x0: InitialGuess,
    #[arg(long, default_value_t = 0)]
    pub x0_seed: u64,

    /// Stationary iterations inside the stochastic loss.
    #[arg(long, default_value_t = 4)]
    pub loss_k: usize,
    /// Samples in the stochastic loss.
    #[arg(long, default_value_t = 500)]
    pub loss_m: usize,
    #[arg(long, default_value_t = 0)]
    pub loss_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: None,
            pde: PdeKind::Helmholtz,
            eta: 1.0,
            grid: None,
            generate: None,
            mesh_seed: 0,
            mesh: None,
            split: Split::Lloyd,
            ratio: 0.015,
            delta: 1,
            partition_seed: 0,
            method: Method::Ras,
            alpha: 0.0,
            params: None,
            weights: None,
            galerkin: false,
            solver: SolverKind::Fgmres,
            tol: 1e-12,
            max_iter: 1000,
            fixed_steps: false,
            rhs: Rhs::Sine8,
            x0: InitialGuess::Random,
            x0_seed: 0,
            loss_k: 4,
            loss_m: 500,
            loss_seed: 0,
        }
    }
}

/// Assembled problem with node coordinates for plotting.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub system: LinearSystem,
    pub exact: Option<Vec<f64>>,
    /// Coordinates of the free nodes, in system order.
    pub coords: Vec<[f64; 2]>,
}

/// Preconditioner plus the interface matrices it was built from, if any.
pub struct Built {
    pub preconditioner: Preconditioner,
    pub interfaces: Option<Vec<InterfaceMatrix>>,
}

impl ExperimentConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let source = match (self.grid, self.generate, &self.mesh) {
                (Some(n), _, _) => format!("grid{n}"),
                (_, Some(n), _) => format!("gen{n}s{}", self.mesh_seed),
                (_, _, Some(p)) => p.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned()),
                _ => "unset".into(),
            };
            format!("{source}-{}", self.method.label())
        })
    }

    /// Checks field ranges and cross-field requirements.
    pub fn validate(&self) -> CliResult<()> {
        let sources = [self.grid.is_some(), self.generate.is_some(), self.mesh.is_some()];
        match sources.iter().filter(|&&s| s).count() {
            1 => {}
            0 => return Err(CliError::Config("one of --grid, --generate or --mesh is required".into())),
            _ => return Err(CliError::Config("--grid, --generate and --mesh are mutually exclusive".into())),
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Config(format!("--tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CliError::Config("--max-iter must be >= 1".into()));
        }
        if self.split == Split::Half && self.grid.is_none() {
            return Err(CliError::Config("--split half needs a structured --grid".into()));
        }
        if self.split == Split::Lloyd && !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(CliError::Config(format!("--ratio must lie in (0, 1], got {}", self.ratio)));
        }
        let need = |field: &Option<PathBuf>, flag: &str| -> CliResult<()> {
            match field {
                Some(p) if p.exists() => Ok(()),
                Some(p) => Err(CliError::Config(format!("{flag} {} does not exist", p.display()))),
                None => Err(CliError::Config(format!("method {} needs {flag}", self.method.label()))),
            }
        };
        match self.method {
            Method::OrasOptimized => need(&self.params, "--params")?,
            Method::Mloras => need(&self.weights, "--weights")?,
            _ => {}
        }
        if let Some(p) = &self.mesh {
            if !p.exists() {
                return Err(CliError::Config(format!("--mesh {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Makes relative file paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.mesh, &mut self.params, &mut self.weights].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn build_mesh(&self) -> CliResult<Mesh> {
        Ok(match (self.grid, self.generate, &self.mesh) {
            (Some(n), _, _) => make_structured_grid(n)?,
            (_, Some(n), _) => make_unstructured_mesh(self.mesh_seed, n)?,
            (_, _, Some(path)) => import_mesh(path)?,
            _ => return Err(CliError::Config("no mesh source".into())),
        })
    }

    pub fn build_problem(&self) -> CliResult<Problem> {
        self.validate()?;
        let mesh = self.build_mesh()?;
        let spec = match self.pde {
            PdeKind::Helmholtz => ProblemSpec::helmholtz(self.eta),
            PdeKind::PoissonDiscontinuous => ProblemSpec::poisson_discontinuous(Coefficient::discontinuous()),
        };
        let system = assemble(&mesh, &spec)?;
        let coords: Vec<[f64; 2]> = system.free_nodes.iter().map(|&v| mesh.nodes[v]).collect();
        let n = system.dim();
        let (rhs, exact) = match self.rhs {
            Rhs::Zero => (vec![0.0; n], Some(vec![0.0; n])),
            Rhs::Ones => (vec![1.0; n], None),
            Rhs::Sine8 => {
                let u: Vec<f64> = coords
                    .iter()
                    .map(|&[x, y]| (8.0 * PI * x).sin() + (8.0 * PI * y).sin())
                    .collect();
                (system.matrix.spmv(&u)?, Some(u))
            }
        };
        let system = system.with_rhs(rhs)?;
        Ok(Problem {
            mesh,
            system,
            exact,
            coords,
        })
    }

    pub fn build_partition(&self, problem: &Problem) -> CliResult<Partition> {
        let a = &problem.system.matrix;
        let base = match self.split {
            Split::Half => match problem.mesh.kind {
                MeshKind::StructuredGrid { n } => Partition::half_split(n)?,
                MeshKind::Triangulation => {
                    return Err(CliError::Config("--split half needs a structured --grid".into()))
                }
            },
            Split::Lloyd => Partition::lloyd(a, &LloydOptions::new(self.ratio, self.partition_seed))?,
        };
        Ok(base.extend_overlap(a, self.delta)?)
    }

    pub fn blocks(&self) -> SubdomainBlocks {
        if self.galerkin {
            SubdomainBlocks::Galerkin
        } else {
            SubdomainBlocks::Neumann
        }
    }

    pub fn build_preconditioner(&self, problem: &Problem, partition: &Partition) -> CliResult<Built> {
        let system = &problem.system;
        let oras = |interfaces: Vec<InterfaceMatrix>| -> CliResult<Built> {
            Ok(Built {
                preconditioner: Preconditioner::oras(system, partition, &interfaces, self.blocks())?,
                interfaces: Some(interfaces),
            })
        };
        let plain = |p: Preconditioner| Built {
            preconditioner: p,
            interfaces: None,
        };
        match self.method {
            Method::Jacobi => Ok(plain(Preconditioner::jacobi(system)?)),
            Method::AdditiveSchwarz => Ok(plain(Preconditioner::additive_schwarz(system, partition)?)),
            Method::Ras => Ok(plain(Preconditioner::ras(system, partition)?)),
            Method::OrasClassical => {
                let patterns = extract_interface(partition, &system.matrix, &[])?;
                oras(patterns.into_iter().map(|p| InterfaceMatrix::classical(p, self.alpha)).collect())
            }
            Method::OrasOptimized => {
                let path = self.params.as_ref().expect("validated");
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let patterns = extract_interface(partition, &system.matrix, &[])?;
                oras(parse_interface_values(&text, &patterns)?)
            }
            Method::Mloras => {
                let weights = GnnWeights::load(self.weights.as_ref().expect("validated"))?;
                let (interfaces, _) = infer_interfaces(&weights, system, partition)?;
                oras(interfaces)
            }
        }
    }
}
