//! Shared problem builders for the benchmarks.

use oras_core::discretize::{assemble, make_structured_grid, make_unstructured_mesh, LinearSystem, ProblemSpec};
use oras_core::gnn::{GnnConfig, GnnWeights};
use oras_core::partition::{LloydOptions, Partition};

/// Helmholtz (`eta = 1`) on an `n x n` finite-difference grid.
pub fn grid_problem(n: usize) -> LinearSystem {
    assemble(&make_structured_grid(n).unwrap(), &ProblemSpec::helmholtz(1.0)).unwrap()
}

/// Helmholtz on a generated mesh with about `nodes` nodes.
pub fn mesh_problem(nodes: usize, seed: u64) -> LinearSystem {
    assemble(&make_unstructured_mesh(seed, nodes).unwrap(), &ProblemSpec::helmholtz(1.0)).unwrap()
}

/// Lloyd partition with one layer of overlap.
pub fn overlapped_partition(system: &LinearSystem, ratio: f64) -> Partition {
    Partition::lloyd(&system.matrix, &LloydOptions::new(ratio, 0))
        .unwrap()
        .extend_overlap(&system.matrix, 1)
        .unwrap()
}

pub fn synthetic_weights(config: GnnConfig) -> GnnWeights {
    GnnWeights::from_fn(config, |name, shape, k| {
        let salt = name.len() as f64;
        ((k as f64 + salt) * 0.618).sin() / (*shape.last().unwrap() as f64).sqrt()
    })
}
