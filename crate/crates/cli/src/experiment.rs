use std::path::Path;

use oras_core::krylov::{error_propagation_power, fgmres, stationary_solve, SolveOptions, SolveReport};
use oras_core::linalg::{norm2, DENSE_ORACLE_LIMIT};
use oras_core::partition::Partition;
use oras_core::schwarz::{InterfaceMatrix, Preconditioner};
use oras_core::spectral::{frobenius_loss, sphere_sample, stochastic_loss, LossConfig};
use serde::Serialize;

use crate::config::{ExperimentConfig, InitialGuess, Problem, SolverKind};
use crate::error::{CliError, CliResult};
use crate::svg;

/// Tolerance used for the iterations-to-convergence metric.
pub const METRIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub method: String,
    pub solver: String,
    pub n: usize,
    pub subdomains: usize,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub final_relres: f64,
    pub final_error: Option<f64>,
    /// FGMRES iterations to a relative residual of 1e-12.
    pub fgmres_iterations: usize,
    pub fgmres_converged: bool,
    /// `||x_10 - u*||` after 10 stationary iterations.
    pub stationary_error_10: Option<f64>,
    /// `||x_10 - u*||` after 10 FGMRES steps.
    pub fgmres_error_10: Option<f64>,
    /// `||T^10 x0|| / ||x0||`.
    pub stationary_reduction_10: f64,
    /// `||T||_F`, only for `n <= 2000`.
    pub frobenius: Option<f64>,
    pub stochastic_loss: f64,
    pub radius_estimate: f64,
    pub warnings: Vec<String>,
}

pub struct ExperimentOutcome {
    pub summary: Summary,
    pub report: SolveReport,
    pub problem: Problem,
    pub partition: Partition,
    pub interfaces: Option<Vec<InterfaceMatrix>>,
}

impl ExperimentOutcome {
    /// Whether the main solve met its stopping rule.
    pub fn succeeded(&self, cfg: &ExperimentConfig) -> bool {
        !self.report.diverged && (cfg.fixed_steps || self.report.converged)
    }
}

pub fn initial_guess(cfg: &ExperimentConfig, n: usize) -> Vec<f64> {
    match cfg.x0 {
        InitialGuess::Random => sphere_sample(n, cfg.x0_seed, 0),
        InitialGuess::Zero => vec![0.0; n],
    }
}

fn solve(
    kind: SolverKind,
    problem: &Problem,
    m: &Preconditioner,
    x0: &[f64],
    opts: &SolveOptions,
) -> CliResult<SolveReport> {
    let (_, report) = match kind {
        SolverKind::Stationary => stationary_solve(&problem.system, m, x0, opts)?,
        SolverKind::Fgmres => fgmres(&problem.system, m, x0, opts)?,
    };
    Ok(report)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentOutcome> {
    let problem = cfg.build_problem()?;
    let partition = cfg.build_partition(&problem)?;
    let built = cfg.build_preconditioner(&problem, &partition)?;
    let m = &built.preconditioner;
    let n = problem.system.dim();
    let x0 = initial_guess(cfg, n);

    let with_exact = |opts: SolveOptions| match &problem.exact {
        Some(u) => opts.with_exact(u.clone()),
        None => opts,
    };
    let tol = if cfg.fixed_steps { f64::MIN_POSITIVE } else { cfg.tol };
    let report = solve(cfg.solver, &problem, m, &x0, &with_exact(SolveOptions::new(cfg.max_iter, tol)))?;
    let to_tol = solve(
        SolverKind::Fgmres,
        &problem,
        m,
        &x0,
        &SolveOptions::new(cfg.max_iter, METRIC_TOL),
    )?;
    let ten = with_exact(SolveOptions::new(10, f64::MIN_POSITIVE));
    let stationary_10 = solve(SolverKind::Stationary, &problem, m, &x0, &ten)?;
    let fgmres_10 = solve(SolverKind::Fgmres, &problem, m, &x0, &ten)?;
    let probe = if norm2(&x0) > 0.0 { x0.clone() } else { sphere_sample(n, cfg.x0_seed, 0) };
    let reduction = norm2(&error_propagation_power(&problem.system, m, &probe, 10)?) / norm2(&probe);
    let frobenius = if n <= DENSE_ORACLE_LIMIT {
        Some(frobenius_loss(&problem.system, m)?)
    } else {
        None
    };
    let loss = stochastic_loss(
        &problem.system,
        m,
        &LossConfig::new(cfg.loss_k, cfg.loss_m, cfg.loss_seed)?,
    )?;

    let mut warnings = problem.mesh.warnings.clone();
    warnings.extend(partition.warnings.iter().cloned());
    let summary = Summary {
        name: cfg.label(),
        method: cfg.method.label().into(),
        solver: match cfg.solver {
            SolverKind::Stationary => "stationary".into(),
            SolverKind::Fgmres => "fgmres".into(),
        },
        n,
        subdomains: partition.n_subdomains(),
        iterations: report.iterations,
        converged: report.converged,
        diverged: report.diverged,
        final_relres: report.final_residual(),
        final_error: report.final_error(),
        fgmres_iterations: to_tol.iterations,
        fgmres_converged: to_tol.converged,
        stationary_error_10: stationary_10.final_error(),
        fgmres_error_10: fgmres_10.final_error(),
        stationary_reduction_10: reduction,
        frobenius,
        stochastic_loss: loss.value,
        radius_estimate: loss.radius_estimate,
        warnings,
    };
    Ok(ExperimentOutcome {
        summary,
        report,
        problem,
        partition,
        interfaces: built.interfaces,
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `convergence.csv`, `summary.json` and the SVG plots into `dir`.
pub fn write_artifacts(outcome: &ExperimentOutcome, dir: &Path) -> CliResult<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("convergence.csv"), outcome.report.to_csv())?;
    let json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), json + "\n")?;
    let mut series = vec![("relative residual", outcome.report.residual_history.clone())];
    if !outcome.report.error_history.is_empty() {
        series.push(("error", outcome.report.error_history.clone()));
    }
    write_file(&dir.join("convergence.svg"), svg::line_plot("iteration", &series))?;
    write_file(
        &dir.join("partition.svg"),
        svg::partition_plot(&outcome.problem.coords, &outcome.partition),
    )?;
    if let Some(interfaces) = &outcome.interfaces {
        write_file(
            &dir.join("interface_heatmap.svg"),
            svg::interface_heatmap(&outcome.problem.coords, interfaces),
        )?;
    }
    Ok(())
}
