//! Direct ("brute force") optimization of every interface value with Adam and
//! central finite-difference gradients of the stochastic loss.

use rayon::prelude::*;

use crate::discretize::LinearSystem;
use crate::error::{Error, Result};
use crate::krylov::assemble_error_propagation;
use crate::linalg::{DenseMatrix, DENSE_ORACLE_LIMIT};
use crate::partition::{InterfacePattern, Partition};
use crate::schwarz::{InterfaceMatrix, Preconditioner, SubdomainBlocks};
use crate::spectral::{loss_or_infinite, sphere_sample, LossConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    if params.len() != state.m.len() || grad.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            context: "adam step",
            expected: state.m.len(),
            found: if params.len() != state.m.len() { params.len() } else { grad.len() },
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {i}")));
    }
    state.t += 1;
    let c1 = 1.0 - state.beta1.powi(state.t as i32);
    let c2 = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Central differences; a probe returning `+inf` falls back to the one-sided
/// difference from the centre value.
pub fn fd_gradient<F>(objective: F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be > 0, got {h}")));
    }
    let center = objective(params);
    if !center.is_finite() {
        return Err(Error::NonFinite("objective at the current parameters".into()));
    }
    (0..params.len())
        .into_par_iter()
        .map(|i| {
            let mut p = params.to_vec();
            p[i] = params[i] + h;
            let plus = objective(&p);
            p[i] = params[i] - h;
            let minus = objective(&p);
            match (plus.is_finite(), minus.is_finite()) {
                (true, true) => Ok((plus - minus) / (2.0 * h)),
                (true, false) => Ok((plus - center) / h),
                (false, true) => Ok((center - minus) / h),
                (false, false) => Err(Error::NonFinite(format!(
                    "objective at both probes of coordinate {i}"
                ))),
            }
        })
        .collect()
}

/// Flat parameter vector over the union of all interface patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceParams {
    pub values: Vec<f64>,
    /// `(subdomain, p, q)` of each entry.
    pub layout: Vec<(usize, usize, usize)>,
}

impl InterfaceParams {
    pub fn zeros(patterns: &[InterfacePattern]) -> Self {
        let layout: Vec<_> = patterns
            .iter()
            .enumerate()
            .flat_map(|(i, pat)| pat.edges.iter().map(move |&(p, q)| (i, p, q)))
            .collect();
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Splits `values` (same layout) into per-subdomain interface matrices.
    pub fn to_interfaces(&self, patterns: &[InterfacePattern], values: &[f64]) -> Vec<InterfaceMatrix> {
        let mut offset = 0;
        patterns
            .iter()
            .map(|pat| {
                let len = pat.edges.len();
                let m = InterfaceMatrix {
                    pattern: pat.clone(),
                    values: values[offset..offset + len].to_vec(),
                };
                offset += len;
                m
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub iterations: usize,
    /// Adam learning rate in units of `scale`.
    pub lr: f64,
    /// Finite-difference step in units of `scale`.
    pub fd_step: f64,
    /// Parameters are `values / scale`; `None` uses the mean diagonal of `A`.
    pub scale: Option<f64>,
    pub blocks: SubdomainBlocks,
    pub seed: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            iterations: 500,
            lr: 0.01,
            fd_step: 1e-4,
            scale: None,
            blocks: SubdomainBlocks::Neumann,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    /// Best interface values found (unscaled).
    pub params: InterfaceParams,
    /// Loss of `params` at the evaluation seed.
    pub loss: f64,
    /// Loss of the zero start at the evaluation seed.
    pub initial_loss: f64,
    /// Evaluation-seed loss after every iteration.
    pub history: Vec<f64>,
}

/// Stochastic loss of interface values on a fixed problem, with the sample
/// matrix cached per seed so every probe sees the same random vectors.
pub struct InterfaceLoss<'a> {
    system: &'a LinearSystem,
    partition: &'a Partition,
    patterns: &'a [InterfacePattern],
    layout: InterfaceParams,
    blocks: SubdomainBlocks,
    k: usize,
    m: usize,
}

impl<'a> InterfaceLoss<'a> {
    pub fn new(
        system: &'a LinearSystem,
        partition: &'a Partition,
        patterns: &'a [InterfacePattern],
        k: usize,
        m: usize,
        blocks: SubdomainBlocks,
    ) -> Self {
        Self {
            system,
            partition,
            patterns,
            layout: InterfaceParams::zeros(patterns),
            blocks,
            k,
            m,
        }
    }

    pub fn preconditioner(&self, values: &[f64]) -> Result<Preconditioner> {
        let mats = self.layout.to_interfaces(self.patterns, values);
        Preconditioner::oras(self.system, self.partition, &mats, self.blocks)
    }

    /// Samples as columns of an `n x m` matrix.
    pub fn samples(&self, seed: u64) -> DenseMatrix {
        let n = self.system.dim();
        let cols: Vec<Vec<f64>> = (0..self.m).map(|j| sphere_sample(n, seed, j)).collect();
        DenseMatrix::from_columns(n, &cols)
    }

    /// `max_j ||T^K x_j||`, or `+inf` when `A~_i` is singular.
    pub fn eval(&self, values: &[f64], samples: Option<&DenseMatrix>, seed: u64) -> f64 {
        let cfg = LossConfig {
            k: self.k,
            m: self.m,
            seed,
        };
        let built = self.preconditioner(values);
        let (Some(x), Ok(m)) = (samples, built.as_ref()) else {
            return loss_or_infinite(self.system, built, &cfg).value;
        };
        let Ok(t) = assemble_error_propagation(self.system, m) else {
            return f64::INFINITY;
        };
        let mut y = x.clone();
        for _ in 0..self.k {
            y = t.matmul(&y).expect("square");
        }
        let worst = (0..y.n_cols())
            .map(|j| y.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        if worst.is_finite() { worst } else { f64::INFINITY }
    }
}

fn step_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Minimizes the stochastic loss over every interface value, starting from zero.
pub fn optimize_interfaces(
    system: &LinearSystem,
    partition: &Partition,
    patterns: &[InterfacePattern],
    cfg: &LossConfig,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    let loss = InterfaceLoss::new(system, partition, patterns, cfg.k, cfg.m, opts.blocks);
    let mut params = InterfaceParams::zeros(patterns);
    let dense = system.dim() <= DENSE_ORACLE_LIMIT;
    let eval_samples = dense.then(|| loss.samples(cfg.seed));
    let initial_loss = loss.eval(&params.values, eval_samples.as_ref(), cfg.seed);
    if params.is_empty() {
        return Ok(OptimizeResult {
            params,
            loss: initial_loss,
            initial_loss,
            history: Vec::new(),
        });
    }
    if !initial_loss.is_finite() {
        return Err(Error::NonFinite("loss at zero interface values".into()));
    }
    let scale = opts.scale.unwrap_or_else(|| {
        let d = system.matrix.diagonal();
        d.iter().map(|v| v.abs()).sum::<f64>() / d.len() as f64
    });
    let mut theta = vec![0.0; params.len()];
    let mut adam = AdamState::new(theta.len(), opts.lr);
    let mut best = (initial_loss, theta.clone());
    let mut history = Vec::with_capacity(opts.iterations);
    for t in 0..opts.iterations {
        let seed = step_seed(cfg.seed, t);
        let samples = dense.then(|| loss.samples(seed));
        let objective = |th: &[f64]| {
            let v: Vec<f64> = th.iter().map(|x| x * scale).collect();
            loss.eval(&v, samples.as_ref(), seed)
        };
        let grad = fd_gradient(objective, &theta, opts.fd_step)?;
        adam_step(&mut adam, &mut theta, &grad)?;
        let values: Vec<f64> = theta.iter().map(|x| x * scale).collect();
        let current = loss.eval(&values, eval_samples.as_ref(), cfg.seed);
        history.push(current);
        if current < best.0 {
            best = (current, theta.clone());
        }
    }
    params.values = best.1.iter().map(|x| x * scale).collect();
    Ok(OptimizeResult {
        params,
        loss: best.0,
        initial_loss,
        history,
    })
}
