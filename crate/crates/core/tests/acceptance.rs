//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use oras_core::discretize::{
    assemble, make_structured_grid, make_unstructured_mesh, Coefficient, LinearSystem, ProblemSpec,
};
use oras_core::gnn::{
    build_graph_input, forward, graph_input_from_patterns, infer_interfaces, parse_fixture, GnnConfig, GnnWeights,
};
use oras_core::krylov::{assemble_error_propagation, assemble_preconditioner, fgmres, stationary_solve, SolveOptions};
use oras_core::linalg::{DenseMatrix, SparseMatrix};
use oras_core::optimize::{optimize_interfaces, OptimizeOptions};
use oras_core::partition::{build_restrictions, extract_interface, lloyd_aggregate, LloydOptions, Partition};
use oras_core::schwarz::{InterfaceMatrix, Preconditioner, SubdomainBlocks};
use oras_core::spectral::{gelfand_convergence_probe, sphere_sample, stochastic_loss_dense, LossConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian_matrix(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let values = (0..n * n)
        .map(|_| {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos() / (n as f64).sqrt()
        })
        .collect();
    DenseMatrix::from_row_major(n, n, values).unwrap()
}

/// Random `T` rescaled to spectral radius `target`.
fn random_t(n: usize, target: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let g = gaussian_matrix(n, rng);
    let rho = g.spectral_radius().unwrap();
    let values = g.values().iter().map(|v| v * target / rho).collect();
    DenseMatrix::from_row_major(n, n, values).unwrap()
}

fn helmholtz_grid(n: usize) -> LinearSystem {
    assemble(&make_structured_grid(n).unwrap(), &ProblemSpec::helmholtz(1.0)).unwrap()
}

fn permute(a: &SparseMatrix, perm: &[usize]) -> SparseMatrix {
    let t: Vec<_> = a.triplets().map(|(r, c, v)| (perm[r], perm[c], v)).collect();
    SparseMatrix::from_triplets(a.n_rows(), a.n_cols(), &t).unwrap()
}

fn theorem1_estimator() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m_list = [10, 100, 1000, 10_000];
    let mut worst_rel = 0.0f64;
    let mut mean_gap = [0.0; 4];
    let mut mean_abs = [0.0; 4];
    for trial in 0..10 {
        let target = rng.random_range(0.3..0.95);
        let t = random_t(50, target, &mut rng);
        let rows = gelfand_convergence_probe(&t, &[64], &m_list, 100 + trial).unwrap();
        for (k, row) in rows.iter().enumerate() {
            mean_gap[k] += (row.radius - row.estimate) / 10.0;
            mean_abs[k] += row.gap / 10.0;
        }
        let last = rows.last().unwrap();
        worst_rel = worst_rel.max(last.gap / last.radius);
    }
    // gap is signed (rho - estimate); |gap| is bounded separately above
    let monotone = mean_gap.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = start.elapsed();
    outcome(
        worst_rel < 0.05 && monotone && elapsed < Duration::from_secs(60),
        format!(
            "max |gap|/rho at K=64, m=1e4: {worst_rel:.4} (< 0.05); mean gap over m: {:.4?}; mean |gap|: {:.4?}; {:.1?}",
            mean_gap, mean_abs, elapsed
        ),
    )
}

fn lower_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut violations = 0;
    let mut closest = f64::INFINITY;
    for trial in 0..100 {
        let n = rng.random_range(2..40);
        let k = rng.random_range(1..20);
        let t = random_t(n, rng.random_range(0.1..1.5), &mut rng);
        let est = stochastic_loss_dense(&t, &LossConfig::new(k, 200, trial).unwrap()).unwrap();
        let bound = t.power(k).unwrap().operator_norm().unwrap();
        if est.value > bound {
            violations += 1;
        }
        closest = closest.min((bound - est.value) / bound);
    }
    outcome(
        violations == 0,
        format!("{violations} violations of max(Y) <= ||T^K|| in 100 triples; smallest relative slack {closest:.2e}"),
    )
}

fn lemma_root_difference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let x = 10f64.powf(rng.random_range(-8.0..8.0));
        let y = x * rng.random::<f64>();
        let k = rng.random_range(1..=64) as f64;
        let excess = x.powf(1.0 / k) - y.powf(1.0 / k) - (x - y).powf(1.0 / k);
        worst = worst.max(excess);
        if excess > 1e-12 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 1e4 triples; largest excess {worst:.2e}"),
    )
}

fn ras_equals_galerkin_oras() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    let mut largest_n = 0;
    for problem in 0..20u64 {
        let system = match problem % 3 {
            0 => helmholtz_grid(rng.random_range(5..=14)),
            1 => {
                let mesh = make_unstructured_mesh(problem, rng.random_range(60..200)).unwrap();
                assemble(&mesh, &ProblemSpec::helmholtz(rng.random_range(0.5..5.0))).unwrap()
            }
            _ => {
                let mesh = make_unstructured_mesh(problem, rng.random_range(60..200)).unwrap();
                assemble(&mesh, &ProblemSpec::poisson_discontinuous(Coefficient::discontinuous())).unwrap()
            }
        };
        let n = system.dim();
        largest_n = largest_n.max(n);
        let partition = Partition::lloyd(&system.matrix, &LloydOptions::new(rng.random_range(0.03..0.1), problem))
            .unwrap()
            .extend_overlap(&system.matrix, rng.random_range(1..=2))
            .unwrap();
        let patterns = extract_interface(&partition, &system.matrix, &[]).unwrap();
        let zeros: Vec<_> = patterns.into_iter().map(InterfaceMatrix::zeros).collect();
        let ras = assemble_preconditioner(&Preconditioner::ras(&system, &partition).unwrap()).unwrap();
        let oras = Preconditioner::oras(&system, &partition, &zeros, SubdomainBlocks::Galerkin).unwrap();
        let oras = assemble_preconditioner(&oras).unwrap();
        worst = worst.max(ras.max_abs_diff(&oras));
    }
    outcome(
        worst <= 1e-12 && largest_n <= 200,
        format!("max entry difference {worst:.2e} over 20 problems (largest n = {largest_n})"),
    )
}

fn partition_of_unity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut failures = 0;
    for trial in 0..50u64 {
        let system = if trial % 2 == 0 {
            helmholtz_grid(rng.random_range(6..30))
        } else {
            let mesh = make_unstructured_mesh(trial, rng.random_range(80..400)).unwrap();
            assemble(&mesh, &ProblemSpec::helmholtz(1.0)).unwrap()
        };
        let n = system.dim();
        let partition = Partition::lloyd(&system.matrix, &LloydOptions::new(rng.random_range(0.01..0.2), trial))
            .unwrap()
            .extend_overlap(&system.matrix, rng.random_range(0..=3))
            .unwrap();
        let mut sum = SparseMatrix::zeros(n, n);
        for r in build_restrictions(&partition) {
            let term = r.restricted_matrix(n).transpose().matmul(&r.matrix(n)).unwrap();
            sum = sum.add(&term).unwrap();
        }
        let exact = (0..n).all(|i| {
            let (cols, vals) = sum.row(i);
            cols.iter().zip(vals).all(|(&c, &v)| if c == i { v == 1.0 } else { v == 0.0 }) && cols.contains(&i)
        });
        if !exact {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} of 50 Lloyd partitions break sum R~^T R = I"))
}

fn brute_force_desk_scale() -> Outcome {
    let start = Instant::now();
    let system = helmholtz_grid(10);
    let b: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 / 11.0 - 0.5).collect();
    let system = system.with_rhs(b).unwrap();
    let partition = Partition::half_split(10).unwrap().extend_overlap(&system.matrix, 1).unwrap();
    let patterns = extract_interface(&partition, &system.matrix, &[]).unwrap();
    let cfg = LossConfig::default();
    let result = optimize_interfaces(&system, &partition, &patterns, &cfg, &OptimizeOptions::default()).unwrap();
    let interfaces = result.params.to_interfaces(&patterns, &result.params.values);
    let ras = Preconditioner::ras(&system, &partition).unwrap();
    let oras = Preconditioner::oras(&system, &partition, &interfaces, SubdomainBlocks::Neumann).unwrap();
    let rho = |m: &Preconditioner| assemble_error_propagation(&system, m).unwrap().spectral_radius().unwrap();
    let iterations = |m: &Preconditioner| {
        let (_, report) = fgmres(&system, m, &[0.0; 100], &SolveOptions::new(200, 1e-12)).unwrap();
        report.iterations
    };
    let (rho_ras, rho_oras) = (rho(&ras), rho(&oras));
    let (it_ras, it_oras) = (iterations(&ras), iterations(&oras));
    let elapsed = start.elapsed();
    outcome(
        rho_oras <= 0.9 * rho_ras && it_oras < it_ras && elapsed < Duration::from_secs(600),
        format!(
            "rho RAS {rho_ras:.4} -> ORAS {rho_oras:.4}; FGMRES iterations {it_ras} -> {it_oras}; loss {:.3e} -> {:.3e}; {:.1?}",
            result.initial_loss, result.loss, elapsed
        ),
    )
}

fn solution_plot_errors() -> (Outcome, Outcome) {
    let start = Instant::now();
    let n = 100;
    let mesh = make_structured_grid(n).unwrap();
    let system = assemble(&mesh, &ProblemSpec::helmholtz(1.0)).unwrap();
    let exact: Vec<f64> = system
        .free_nodes
        .iter()
        .map(|&v| {
            let [x, y] = mesh.nodes[v];
            (8.0 * PI * x).sin() + (8.0 * PI * y).sin()
        })
        .collect();
    let system = system.with_rhs(system.matrix.spmv(&exact).unwrap()).unwrap();
    let partition = Partition::lloyd(&system.matrix, &LloydOptions::new(0.015, 0))
        .unwrap()
        .extend_overlap(&system.matrix, 1)
        .unwrap();
    let ras = Preconditioner::ras(&system, &partition).unwrap();
    let x0 = sphere_sample(n * n, 2024, 0);
    let opts = SolveOptions::new(10, f64::MIN_POSITIVE).with_exact(exact);
    let (_, stationary) = stationary_solve(&system, &ras, &x0, &opts).unwrap();
    let (_, krylov) = fgmres(&system, &ras, &x0, &opts).unwrap();
    let elapsed = start.elapsed();
    let within = |v: f64, target: f64| (v - target).abs() <= 0.15 * target;
    let e_s = stationary.final_error().unwrap();
    let e_k = krylov.final_error().unwrap();
    let in_time = elapsed < Duration::from_secs(120);
    (
        outcome(
            within(e_s, 6.526) && in_time,
            format!("stationary RAS 10-iteration error {e_s:.3} (target 6.526 +/- 15%); {:.1?}", elapsed),
        ),
        outcome(
            within(e_k, 0.146) && in_time,
            format!("FGMRES+RAS 10-step error {e_k:.3} (target 0.146 +/- 15%)"),
        ),
    )
}

fn scaling() -> Outcome {
    let weights = GnnWeights::from_fn(GnnConfig::default(), |name, shape, k| {
        let salt = name.len() as f64;
        ((k as f64 + salt) * 0.618).sin() / (*shape.last().unwrap() as f64).sqrt()
    });
    let mut points = Vec::new();
    let mut lines = Vec::new();
    for grid in [32, 100, 316] {
        let start = Instant::now();
        let system = helmholtz_grid(grid);
        let n = system.dim();
        let agg = lloyd_aggregate(&system.matrix, &LloydOptions::new(0.015, 0)).unwrap();
        let partition = Partition::from_owner(agg.owner).unwrap().extend_overlap(&system.matrix, 1).unwrap();
        let (interfaces, gnn) = infer_interfaces(&weights, &system, &partition).unwrap();
        let oras = Preconditioner::oras(&system, &partition, &interfaces, SubdomainBlocks::Neumann).unwrap();
        oras.apply(&system.rhs).unwrap();
        let ops = agg.relaxations as f64 + gnn.flops as f64 + oras.apply_flops() as f64;
        points.push((n as f64, ops));
        lines.push(format!("n={n}: {ops:.3e} ops ({:.1?})", start.elapsed()));
    }
    let k = points.len() as f64;
    let (mx, my) = (
        points.iter().map(|p| p.0).sum::<f64>() / k,
        points.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    let per_node: Vec<f64> = points.iter().map(|p| p.1 / p.0).collect();
    let c = per_node.iter().copied().fold(0.0, f64::max);
    let spread = c / per_node.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        r2 > 0.98 && spread < 1.5,
        format!(
            "{}; linear fit R^2 {r2:.5}; ops <= {c:.3e} n (per-node spread {spread:.3})",
            lines.join(", ")
        ),
    )
}

fn gnn_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let config = GnnConfig::default();
    let weights = GnnWeights::from_fn(config, |name, shape, k| {
        let salt = name.bytes().map(u64::from).sum::<u64>() as f64;
        ((k as f64 * 0.731 + salt).sin() + 0.1) / (*shape.last().unwrap() as f64).sqrt()
    });
    let zeros = GnnWeights::zeros(config);
    let (mut worst_perm, mut zero_fail, mut mask_fail) = (0.0f64, 0, 0);
    for g in 0..20u64 {
        let mesh = make_unstructured_mesh(g + 500, rng.random_range(40..160)).unwrap();
        let system = assemble(&mesh, &ProblemSpec::helmholtz(rng.random_range(0.5..3.0))).unwrap();
        let n = system.dim();
        // at least two subdomains so the interface pattern is non-empty
        let ratio = rng.random_range(0.03..0.15f64).max(2.5 / n as f64);
        let partition = Partition::lloyd(&system.matrix, &LloydOptions::new(ratio, g)).unwrap();
        let delta = rng.random_range(1..=2);
        let overlapped = partition.extend_overlap(&system.matrix, delta).unwrap();
        let input = build_graph_input(&system, &overlapped).unwrap();
        let out = forward(&weights, &input).unwrap().edge_values;

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let a_perm = permute(&system.matrix, &perm);
        let mut owner_perm = vec![0; n];
        for v in 0..n {
            owner_perm[perm[v]] = partition.owner()[v];
        }
        let p_perm = Partition::from_owner(owner_perm).unwrap().extend_overlap(&a_perm, delta).unwrap();
        let patterns = extract_interface(&p_perm, &a_perm, &[]).unwrap();
        let input_perm = graph_input_from_patterns(&a_perm, patterns).unwrap();
        let out_perm = forward(&weights, &input_perm).unwrap().edge_values;
        for (e, (p, q, _)) in input.graph.triplets().enumerate() {
            let e_perm = input_perm.edge_index(perm[p], perm[q]).unwrap();
            worst_perm = worst_perm.max((out[e] - out_perm[e_perm]).abs());
        }

        if forward(&zeros, &input).unwrap().edge_values.iter().any(|&v| v != 0.0) {
            zero_fail += 1;
        }

        let mut on_pattern = vec![false; input.n_edges()];
        for pat in &input.patterns {
            for &(p, q) in &pat.edges {
                on_pattern[input.edge_index(p, q).unwrap()] = true;
            }
        }
        let support_ok = input.mask == on_pattern
            && out.iter().zip(&on_pattern).all(|(&v, &m)| m || v == 0.0)
            && out.iter().zip(&on_pattern).any(|(&v, &m)| m && v != 0.0);
        if !support_ok {
            mask_fail += 1;
        }
    }
    outcome(
        worst_perm <= 1e-10 && zero_fail == 0 && mask_fail == 0,
        format!(
            "20 graphs: permutation deviation {worst_perm:.2e}; zero-weight failures {zero_fail}; mask failures {mask_fail}"
        ),
    )
}

fn fixture_parity() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let path = dir.join("gnn_parity.fixture");
    let fixture = parse_fixture(&std::fs::read_to_string(&path).unwrap(), &path).unwrap();
    let weights = GnnWeights::load(dir.join(&fixture.weights_file)).unwrap();
    let n = fixture.matrix.n_rows();
    let system = LinearSystem::from_matrix(fixture.matrix.clone(), vec![0.0; n]).unwrap();
    let partition = Partition::from_owner(fixture.owner.clone())
        .unwrap()
        .extend_overlap(&system.matrix, fixture.delta)
        .unwrap();
    let out = forward(&weights, &build_graph_input(&system, &partition).unwrap()).unwrap();
    let worst = out
        .edge_values
        .iter()
        .zip(&fixture.expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("{n}-node fixture, max per-edge deviation {worst:.2e}"))
}

fn report(name: &str, o: Outcome, failed: &mut usize, total: &mut usize) {
    println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    *failed += usize::from(!o.pass);
    *total += 1;
}

fn main() {
    let (mut failed, mut total) = (0, 0);
    let mut check = |name: &str, o: Outcome| report(name, o, &mut failed, &mut total);
    check("theorem-1 estimator convergence", theorem1_estimator());
    check("lower bound max(Y) <= ||T^K||", lower_bound());
    check("root-difference inequality", lemma_root_difference());
    check("RAS equals ORAS with Galerkin blocks", ras_equals_galerkin_oras());
    check("partition of unity", partition_of_unity());
    let (stationary, krylov) = solution_plot_errors();
    check("solution plot: stationary RAS error", stationary);
    check("solution plot: FGMRES+RAS error", krylov);
    check("GNN equivariance, zero weights, mask", gnn_properties());
    check("reference forward parity", fixture_parity());
    check("linear scaling of partition + GNN + apply", scaling());
    check("10x10 brute-force ORAS beats RAS", brute_force_desk_scale());
    println!("acceptance: {} passed, {failed} failed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
