//! Stochastic spectral-radius loss `max_j ||T^K x_j||` over random unit
//! vectors, the Frobenius-norm loss, and the Gelfand convergence probe.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretize::LinearSystem;
use crate::error::{Error, Result};
use crate::krylov::{apply_error_propagation, error_propagation_power};
use crate::linalg::{norm2, DenseMatrix};
use crate::schwarz::Preconditioner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossConfig {
    /// Stationary steps per sample.
    pub k: usize,
    /// Number of samples.
    pub m: usize,
    pub seed: u64,
}

impl LossConfig {
    pub fn new(k: usize, m: usize, seed: u64) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::InvalidConfig(format!("loss needs K >= 1 and m >= 1, got K={k} m={m}")));
        }
        Ok(Self { k, m, seed })
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { k: 4, m: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEstimate {
    /// `max(samples)`.
    pub value: f64,
    /// `||T^K x_j||` for each sample.
    pub samples: Vec<f64>,
    /// `value^(1/K)`.
    pub radius_estimate: f64,
}

impl LossEstimate {
    fn from_samples(samples: Vec<f64>, k: usize) -> Self {
        let value = samples.iter().copied().fold(0.0f64, f64::max);
        let value = if samples.iter().any(|s| s.is_nan()) { f64::INFINITY } else { value };
        Self {
            value,
            radius_estimate: value.powf(1.0 / k as f64),
            samples,
        }
    }

    /// Sentinel for a preconditioner that could not be built.
    pub fn infinite(m: usize) -> Self {
        Self {
            value: f64::INFINITY,
            samples: vec![f64::INFINITY; m],
            radius_estimate: f64::INFINITY,
        }
    }
}

/// Sample `j` of a seeded unit-sphere draw; independent of every other sample.
pub fn sphere_sample(n: usize, seed: u64, j: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    loop {
        let mut x = Vec::with_capacity(n + 1);
        while x.len() < n {
            // Box-Muller; 1 - u keeps the logarithm finite.
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            let t = std::f64::consts::TAU * u2;
            x.push(r * t.cos());
            x.push(r * t.sin());
        }
        x.truncate(n);
        let norm = norm2(&x);
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
            return x;
        }
    }
}

/// `m` independent uniform samples from the unit sphere in `R^n`.
pub fn sample_unit_sphere(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..m).into_par_iter().map(|j| sphere_sample(n, seed, j)).collect()
}

/// `max_j ||T^K x_j||` with `T = I - M A`.
pub fn stochastic_loss(system: &LinearSystem, m: &Preconditioner, cfg: &LossConfig) -> Result<LossEstimate> {
    let n = system.dim();
    let samples = (0..cfg.m)
        .into_par_iter()
        .map(|j| {
            let x = sphere_sample(n, cfg.seed, j);
            error_propagation_power(system, m, &x, cfg.k).map(|y| norm2(&y))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LossEstimate::from_samples(samples, cfg.k))
}

/// Loss of a preconditioner build, with failed builds mapped to the infinite sentinel.
pub fn loss_or_infinite(
    system: &LinearSystem,
    built: Result<Preconditioner>,
    cfg: &LossConfig,
) -> LossEstimate {
    match built.and_then(|m| stochastic_loss(system, &m, cfg)) {
        Ok(est) => est,
        Err(_) => LossEstimate::infinite(cfg.m),
    }
}

/// Same estimator for an explicit dense `T`: forms `T^K` once.
pub fn stochastic_loss_dense(t: &DenseMatrix, cfg: &LossConfig) -> Result<LossEstimate> {
    let tk = t.power(cfg.k)?;
    let n = t.n_rows();
    let samples = (0..cfg.m)
        .into_par_iter()
        .map(|j| norm2(&tk.matvec(&sphere_sample(n, cfg.seed, j)).expect("square")))
        .collect();
    Ok(LossEstimate::from_samples(samples, cfg.k))
}

/// `||T||_F`, one column of `T` at a time.
pub fn frobenius_loss(system: &LinearSystem, m: &Preconditioner) -> Result<f64> {
    let n = system.dim();
    let sum: f64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            apply_error_propagation(system, m, &e).map(|c| c.iter().map(|v| v * v).sum::<f64>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub radius: f64,
    pub estimate: f64,
    /// `|radius - estimate|`.
    pub gap: f64,
}

/// `|rho(T) - max(Y)^(1/K)|` for every `(K, m)` pair.
pub fn gelfand_convergence_probe(
    t: &DenseMatrix,
    k_list: &[usize],
    m_list: &[usize],
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    let radius = t.spectral_radius()?;
    let mut rows = Vec::new();
    for &k in k_list {
        let tk = t.power(k)?;
        let n = t.n_rows();
        let m_max = m_list.iter().copied().max().unwrap_or(0);
        let norms: Vec<f64> = (0..m_max)
            .into_par_iter()
            .map(|j| norm2(&tk.matvec(&sphere_sample(n, seed, j)).expect("square")))
            .collect();
        for &m in m_list {
            if k == 0 || m == 0 {
                return Err(Error::InvalidConfig("probe needs K >= 1 and m >= 1".into()));
            }
            let est = norms[..m].iter().copied().fold(0.0f64, f64::max).powf(1.0 / k as f64);
            rows.push(ProbeRow {
                k,
                m,
                seed,
                radius,
                estimate: est,
                gap: (radius - est).abs(),
            });
        }
    }
    Ok(rows)
}

/// `K,m,seed,gap` rows.
pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut s = String::from("K,m,seed,gap\n");
    for r in rows {
        writeln!(s, "{},{},{},{:e}", r.k, r.m, r.seed, r.gap).unwrap();
    }
    s
}
