//! Command-line surface of the `oras` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use oras_core::discretize::{assemble, import_mesh, make_structured_grid, make_unstructured_mesh, ProblemSpec};
use oras_core::gnn::{infer_interfaces, GnnConfig, GnnWeights};
use oras_core::krylov::assemble_error_propagation;
use oras_core::linalg::DENSE_ORACLE_LIMIT;
use oras_core::optimize::{optimize_interfaces, OptimizeOptions};
use oras_core::partition::{extract_interface, interface_text, lloyd_aggregate, LloydOptions, Partition};
use oras_core::schwarz::{interface_values_text, Preconditioner, SubdomainBlocks};
use oras_core::spectral::{gelfand_convergence_probe, probe_csv, stochastic_loss, LossConfig};

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, CliResult, EXIT_NOT_CONVERGED};
use crate::experiment::{ensure_dir, run_experiment, write_artifacts, write_file};
use crate::suite::{load_manifest, run_suite, suite_csv};
use crate::svg;

#[derive(Debug, Parser)]
#[command(name = "oras", version, about = "Optimized restricted additive Schwarz experiments")]
pub struct Cli {
    /// Directory for output artifacts.
    #[arg(long, global = true, env = "ORAS_OUT_DIR", default_value = "oras-out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or import meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Partition a problem and write the partition and interface pattern.
    Partition(ExperimentConfig),
    /// Solve one problem and write convergence artifacts.
    Solve(ExperimentConfig),
    /// Evaluate the stochastic loss, optionally against the dense spectral radius.
    Loss(LossArgs),
    /// Minimize the stochastic loss over the interface values.
    Optimize(OptimizeArgs),
    /// Predict interface values with a trained network.
    Infer(ExperimentConfig),
    /// Run every experiment in a TOML manifest.
    Suite {
        manifest: PathBuf,
    },
    /// Measure setup cost against problem size.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
pub enum MeshCommand {
    /// Write a random convex-polygon mesh.
    Gen {
        /// Target node count.
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// File name inside the output directory.
        #[arg(long, default_value = "mesh.txt")]
        file: String,
    },
    /// Validate a mesh file and write its normalized form.
    Import {
        path: PathBuf,
        #[arg(long, default_value = "mesh.txt")]
        file: String,
    },
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[command(flatten)]
    pub cfg: ExperimentConfig,
    /// Also compare `max(Y)^(1/K)` with the dense spectral radius for these K.
    #[arg(long, value_delimiter = ',')]
    pub probe_k: Vec<usize>,
    /// Sample counts for `--probe-k`.
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    pub probe_m: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub cfg: ExperimentConfig,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub fd_step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Structured grid sizes `N`; each run has `N^2` unknowns.
    #[arg(long, value_delimiter = ',', default_value = "32,100,316")]
    pub grids: Vec<usize>,
    #[arg(long, default_value_t = 0.015)]
    pub ratio: f64,
    #[arg(long, default_value_t = 1)]
    pub delta: usize,
    /// Weight file; a fixed synthetic network of the default shape otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

/// Deterministic non-trivial weights for timing runs.
pub fn synthetic_weights() -> GnnWeights {
    GnnWeights::from_fn(GnnConfig::default(), |name, shape, k| {
        let salt = name.len() as f64;
        ((k as f64 + salt) * 0.618).sin() / (*shape.last().unwrap() as f64).sqrt()
    })
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> CliResult<i32> {
    let out = cli.out;
    match cli.command {
        Command::Mesh(cmd) => mesh(cmd, &out),
        Command::Partition(cfg) => partition(&cfg, &out),
        Command::Solve(cfg) => solve(&cfg, &out),
        Command::Loss(args) => loss(&args, &out),
        Command::Optimize(args) => optimize(&args, &out),
        Command::Infer(cfg) => infer(&cfg, &out),
        Command::Suite { manifest } => suite(&manifest, &out),
        Command::Bench(args) => bench(&args, &out),
    }
}

fn mesh(cmd: MeshCommand, out: &Path) -> CliResult<i32> {
    let (mesh, file) = match cmd {
        MeshCommand::Gen { nodes, seed, file } => (make_unstructured_mesh(seed, nodes)?, file),
        MeshCommand::Import { path, file } => (import_mesh(&path)?, file),
    };
    ensure_dir(out)?;
    let path = out.join(file);
    mesh.export(&path)?;
    for w in &mesh.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} nodes, {} triangles, {} boundary nodes",
        path.display(),
        mesh.num_nodes(),
        mesh.triangles.len(),
        mesh.boundary_nodes().len()
    );
    Ok(0)
}

fn partition(cfg: &ExperimentConfig, out: &Path) -> CliResult<i32> {
    let problem = cfg.build_problem()?;
    let partition = cfg.build_partition(&problem)?;
    let patterns = extract_interface(&partition, &problem.system.matrix, &[])?;
    ensure_dir(out)?;
    partition.export(out.join("partition.txt"))?;
    write_file(&out.join("interface.txt"), interface_text(&patterns))?;
    write_file(&out.join("partition.svg"), svg::partition_plot(&problem.coords, &partition))?;
    let sizes: Vec<usize> = (0..partition.n_subdomains()).map(|i| partition.overlapped(i).len()).collect();
    println!(
        "{} subdomains over {} nodes; overlapped sizes {}..{}; {} interface entries",
        partition.n_subdomains(),
        partition.n_nodes(),
        sizes.iter().min().unwrap_or(&0),
        sizes.iter().max().unwrap_or(&0),
        patterns.iter().map(|p| p.edges.len()).sum::<usize>()
    );
    Ok(0)
}

fn solve(cfg: &ExperimentConfig, out: &Path) -> CliResult<i32> {
    let outcome = run_experiment(cfg)?;
    write_artifacts(&outcome, out)?;
    print!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes") + "\n");
    if outcome.succeeded(cfg) {
        Ok(0)
    } else {
        eprintln!(
            "not converged: relative residual {:e} after {} iterations",
            outcome.report.final_residual(),
            outcome.report.iterations
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn loss(args: &LossArgs, out: &Path) -> CliResult<i32> {
    let cfg = &args.cfg;
    let problem = cfg.build_problem()?;
    let partition = cfg.build_partition(&problem)?;
    let built = cfg.build_preconditioner(&problem, &partition)?;
    let est = stochastic_loss(
        &problem.system,
        &built.preconditioner,
        &LossConfig::new(cfg.loss_k, cfg.loss_m, cfg.loss_seed)?,
    )?;
    println!(
        "loss {:e} (K={}, m={}, seed={}); radius estimate {:.6}",
        est.value, cfg.loss_k, cfg.loss_m, cfg.loss_seed, est.radius_estimate
    );
    if !args.probe_k.is_empty() {
        let n = problem.system.dim();
        if n > DENSE_ORACLE_LIMIT {
            return Err(CliError::Config(format!(
                "--probe-k needs a dense error propagator; n = {n} exceeds {DENSE_ORACLE_LIMIT}"
            )));
        }
        let t = assemble_error_propagation(&problem.system, &built.preconditioner)?;
        let rows = gelfand_convergence_probe(&t, &args.probe_k, &args.probe_m, cfg.loss_seed)?;
        ensure_dir(out)?;
        write_file(&out.join("probe.csv"), probe_csv(&rows))?;
        if let Some(r) = rows.first() {
            println!("spectral radius {:.6}", r.radius);
        }
    }
    Ok(0)
}

fn optimize(args: &OptimizeArgs, out: &Path) -> CliResult<i32> {
    let cfg = &args.cfg;
    if matches!(cfg.method, Method::OrasOptimized | Method::Mloras) {
        return Err(CliError::Config("optimize starts from zero interface values; drop --method".into()));
    }
    let problem = cfg.build_problem()?;
    let partition = cfg.build_partition(&problem)?;
    let patterns = extract_interface(&partition, &problem.system.matrix, &[])?;
    let opts = OptimizeOptions {
        iterations: args.iterations,
        lr: args.lr,
        fd_step: args.fd_step,
        blocks: cfg.blocks(),
        seed: args.seed,
        ..Default::default()
    };
    let loss_cfg = LossConfig::new(cfg.loss_k, cfg.loss_m, cfg.loss_seed)?;
    let start = Instant::now();
    let result = optimize_interfaces(&problem.system, &partition, &patterns, &loss_cfg, &opts)?;
    let interfaces = result.params.to_interfaces(&patterns, &result.params.values);
    ensure_dir(out)?;
    write_file(&out.join("interface_values.txt"), interface_values_text(&interfaces))?;
    let mut history = String::from("iteration,loss\n");
    for (t, v) in result.history.iter().enumerate() {
        writeln!(history, "{},{}", t + 1, v).unwrap();
    }
    write_file(&out.join("optimize_history.csv"), history)?;
    write_file(&out.join("interface_heatmap.svg"), svg::interface_heatmap(&problem.coords, &interfaces))?;
    println!(
        "loss {:e} -> {:e} over {} iterations ({:.1?}); {} interface values",
        result.initial_loss,
        result.loss,
        result.history.len(),
        start.elapsed(),
        result.params.len()
    );
    Ok(0)
}

fn infer(cfg: &ExperimentConfig, out: &Path) -> CliResult<i32> {
    let Some(path) = &cfg.weights else {
        return Err(CliError::Config("infer needs --weights".into()));
    };
    if !path.exists() {
        return Err(CliError::Config(format!("--weights {} does not exist", path.display())));
    }
    let weights = GnnWeights::load(path)?;
    let problem = cfg.build_problem()?;
    let partition = cfg.build_partition(&problem)?;
    let start = Instant::now();
    let (interfaces, fwd) = infer_interfaces(&weights, &problem.system, &partition)?;
    let elapsed = start.elapsed();
    ensure_dir(out)?;
    write_file(&out.join("interface_values.txt"), interface_values_text(&interfaces))?;
    write_file(&out.join("interface_heatmap.svg"), svg::interface_heatmap(&problem.coords, &interfaces))?;
    println!(
        "{} interface values for {} subdomains; {} multiply-adds in {:.1?}",
        interfaces.iter().map(|m| m.values.len()).sum::<usize>(),
        interfaces.len(),
        fwd.flops,
        elapsed
    );
    Ok(0)
}

fn suite(manifest: &Path, out: &Path) -> CliResult<i32> {
    let configs = load_manifest(manifest)?;
    for cfg in &configs {
        // catch missing files before any row starts
        if let Err(e) = cfg.validate() {
            return Err(CliError::Config(format!("{}: {e}", cfg.label())));
        }
    }
    let rows = run_suite(&configs);
    ensure_dir(out)?;
    let path = out.join("suite.csv");
    write_file(&path, suite_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    for r in rows.iter().filter(|r| r.result.is_err()) {
        eprintln!("{} failed: {}", r.name, r.result.as_ref().unwrap_err());
    }
    println!("{} rows ({} failed) -> {}", rows.len(), failed, path.display());
    Ok(0)
}

fn bench(args: &BenchArgs, out: &Path) -> CliResult<i32> {
    let weights = match &args.weights {
        Some(p) => GnnWeights::load(p)?,
        None => synthetic_weights(),
    };
    let mut csv = String::from("n,subdomains,relaxations,gnn_flops,apply_flops,total_ops,ops_per_node,seconds\n");
    for &grid in &args.grids {
        let start = Instant::now();
        let mesh = make_structured_grid(grid)?;
        let system = assemble(&mesh, &ProblemSpec::helmholtz(1.0))?;
        let n = system.dim();
        let agg = lloyd_aggregate(&system.matrix, &LloydOptions::new(args.ratio, 0))?;
        let relaxations = agg.relaxations;
        let partition = Partition::from_owner(agg.owner)?.extend_overlap(&system.matrix, args.delta)?;
        let (interfaces, fwd) = infer_interfaces(&weights, &system, &partition)?;
        let m = Preconditioner::oras(&system, &partition, &interfaces, SubdomainBlocks::Neumann)?;
        m.apply(&system.rhs)?;
        let total = relaxations + fwd.flops + m.apply_flops() as u64;
        let secs = start.elapsed().as_secs_f64();
        writeln!(
            csv,
            "{n},{},{relaxations},{},{},{total},{:.1},{secs:.3}",
            partition.n_subdomains(),
            fwd.flops,
            m.apply_flops(),
            total as f64 / n as f64
        )
        .unwrap();
        eprintln!("n={n}: {total} ops in {secs:.2}s");
    }
    ensure_dir(out)?;
    write_file(&out.join("scaling.csv"), &csv)?;
    print!("{csv}");
    Ok(0)
}
