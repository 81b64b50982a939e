//! Stationary Richardson iteration, flexible GMRES, and the error-propagation
//! operator `T = I - M A`.

use std::fmt::Write as _;

use crate::discretize::LinearSystem;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, DenseMatrix, SparseMatrix, DENSE_ORACLE_LIMIT};
use crate::schwarz::Preconditioner;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Stop once the relative residual is at or below this.
    pub tol: f64,
    /// True solution; enables the error history.
    pub exact: Option<Vec<f64>>,
}

impl SolveOptions {
    pub fn new(max_iter: usize, tol: f64) -> Self {
        Self {
            max_iter,
            tol,
            exact: None,
        }
    }

    pub fn with_exact(mut self, exact: Vec<f64>) -> Self {
        self.exact = Some(exact);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    /// `||b - A x_k|| / ||b||`, starting with the initial guess. When `b = 0` the
    /// initial residual norm is used as the scale instead.
    pub residual_history: Vec<f64>,
    /// `||x_k - x*||` when the exact solution was supplied.
    pub error_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

impl SolveReport {
    /// `iter,relres,error` rows; the error column is empty without an exact solution.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,relres,error\n");
        for (k, r) in self.residual_history.iter().enumerate() {
            match self.error_history.get(k) {
                Some(e) => writeln!(s, "{k},{r:e},{e:e}").unwrap(),
                None => writeln!(s, "{k},{r:e},").unwrap(),
            }
        }
        s
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }

    pub fn final_error(&self) -> Option<f64> {
        self.error_history.last().copied()
    }
}

const DIVERGENCE_FACTOR: f64 = 1e12;

fn check_dims(system: &LinearSystem, m: &Preconditioner, x0: &[f64], opts: &SolveOptions) -> Result<()> {
    let n = system.dim();
    for (context, found) in [
        ("preconditioner", m.dim()),
        ("initial guess", x0.len()),
        ("exact solution", opts.exact.as_ref().map_or(n, Vec::len)),
    ] {
        if found != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                found,
            });
        }
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    Ok(())
}

fn residual(a: &SparseMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.spmv_into(x, r).expect("dimensions checked");
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn error_norm(x: &[f64], exact: &[f64]) -> f64 {
    x.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Richardson iteration `x <- x + M (b - A x)`.
pub fn stationary_solve(
    system: &LinearSystem,
    m: &Preconditioner,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(system, m, x0, opts)?;
    let n = system.dim();
    let a = &system.matrix;
    let b = &system.rhs;
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    residual(a, b, &x, &mut r);
    let r0 = norm2(&r);
    let scale = match norm2(b) {
        s if s > 0.0 => s,
        _ if r0 > 0.0 => r0,
        _ => 1.0,
    };
    let mut report = SolveReport::default();
    report.residual_history.push(r0 / scale);
    if let Some(e) = &opts.exact {
        report.error_history.push(error_norm(&x, e));
    }
    report.converged = r0 / scale <= opts.tol;
    while !report.converged && report.iterations < opts.max_iter {
        m.apply_into(&r, &mut z)?;
        axpy(1.0, &z, &mut x);
        residual(a, b, &x, &mut r);
        report.iterations += 1;
        let rel = norm2(&r) / scale;
        report.residual_history.push(rel);
        if let Some(e) = &opts.exact {
            report.error_history.push(error_norm(&x, e));
        }
        if !rel.is_finite() || norm2(&r) > DIVERGENCE_FACTOR * r0.max(f64::MIN_POSITIVE) {
            report.diverged = true;
            break;
        }
        report.converged = rel <= opts.tol;
    }
    Ok((x, report))
}

/// Right-preconditioned flexible GMRES without restarts. Basis vectors are
/// orthogonalized by modified Gram-Schmidt with one reorthogonalization pass.
pub fn fgmres(
    system: &LinearSystem,
    m: &Preconditioner,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(system, m, x0, opts)?;
    let n = system.dim();
    let a = &system.matrix;
    let b = &system.rhs;
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    residual(a, b, &x, &mut r);
    let beta = norm2(&r);
    let scale = match norm2(b) {
        s if s > 0.0 => s,
        _ if beta > 0.0 => beta,
        _ => 1.0,
    };
    let mut report = SolveReport::default();
    report.residual_history.push(beta / scale);
    if let Some(e) = &opts.exact {
        report.error_history.push(error_norm(&x, e));
    }
    if beta / scale <= opts.tol || beta == 0.0 {
        report.converged = true;
        return Ok((x, report));
    }

    let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
    let mut z: Vec<Vec<f64>> = Vec::new();
    // Column k of the Hessenberg matrix, already rotated.
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut w = vec![0.0; n];

    let max_iter = opts.max_iter.min(n.max(1) * 2);
    for k in 0..max_iter {
        let zk = m.apply(&v[k])?;
        a.spmv_into(&zk, &mut w)?;
        z.push(zk);
        let w_norm0 = norm2(&w);
        let mut col = vec![0.0; k + 2];
        for _pass in 0..2 {
            for (j, vj) in v.iter().enumerate() {
                let c = dot(&w, vj);
                col[j] += c;
                axpy(-c, vj, &mut w);
            }
        }
        let h_next = norm2(&w);
        col[k + 1] = h_next;

        for j in 0..k {
            let t = cs[j] * col[j] + sn[j] * col[j + 1];
            col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
            col[j] = t;
        }
        let denom = col[k].hypot(col[k + 1]);
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[k] / denom, col[k + 1] / denom) };
        col[k] = denom;
        col[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[k]);
        g[k] *= c;
        h.push(col);

        report.iterations = k + 1;
        let rel = g[k + 1].abs() / scale;
        report.residual_history.push(rel);
        let breakdown = h_next <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE);
        let done = rel <= opts.tol || breakdown || k + 1 == max_iter;
        if opts.exact.is_some() || done {
            let xk = update(&x, &h, &g, &z);
            if let Some(e) = &opts.exact {
                report.error_history.push(error_norm(&xk, e));
            }
            if done {
                x = xk;
                report.converged = rel <= opts.tol || breakdown;
                break;
            }
        }
        if !rel.is_finite() {
            report.diverged = true;
            x = update(&x, &h, &g, &z);
            break;
        }
        v.push(w.iter().map(|wi| wi / h_next).collect());
    }
    Ok((x, report))
}

/// `x0 + Z y` with `y` solving the rotated triangular system.
fn update(x0: &[f64], h: &[Vec<f64>], g: &[f64], z: &[Vec<f64>]) -> Vec<f64> {
    let k = h.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    let mut x = x0.to_vec();
    for (yj, zj) in y.iter().zip(z) {
        axpy(*yj, zj, &mut x);
    }
    x
}

/// One application of `T = I - M A`.
pub fn apply_error_propagation(system: &LinearSystem, m: &Preconditioner, x: &[f64]) -> Result<Vec<f64>> {
    let ax = system.matrix.spmv(x)?;
    let mut out = m.apply(&ax)?;
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi - *o;
    }
    Ok(out)
}

/// `T^k x`.
pub fn error_propagation_power(
    system: &LinearSystem,
    m: &Preconditioner,
    x: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    if x.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            context: "error propagation",
            expected: system.dim(),
            found: x.len(),
        });
    }
    let mut cur = x.to_vec();
    for _ in 0..k {
        cur = apply_error_propagation(system, m, &cur)?;
    }
    Ok(cur)
}

/// Dense `T`, column by column.
pub fn assemble_error_propagation(system: &LinearSystem, m: &Preconditioner) -> Result<DenseMatrix> {
    let n = system.dim();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::DenseTooLarge {
            n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(apply_error_propagation(system, m, &e)?);
        e[j] = 0.0;
    }
    Ok(DenseMatrix::from_columns(n, &cols))
}

/// Dense `M`, column by column.
pub fn assemble_preconditioner(m: &Preconditioner) -> Result<DenseMatrix> {
    let n = m.dim();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::DenseTooLarge {
            n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(m.apply(&e)?);
        e[j] = 0.0;
    }
    Ok(DenseMatrix::from_columns(n, &cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, make_structured_grid, ProblemSpec};
    use crate::partition::Partition;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> LinearSystem {
        assemble(&make_structured_grid(n).unwrap(), &ProblemSpec::helmholtz(1.0)).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn exact_precond(sys: &LinearSystem) -> Preconditioner {
        Preconditioner::ras(sys, &Partition::from_owner(vec![0; sys.dim()]).unwrap()).unwrap()
    }

    fn identity_precond(n: usize) -> Preconditioner {
        let sys = LinearSystem::from_matrix(SparseMatrix::identity(n), vec![0.0; n]).unwrap();
        Preconditioner::jacobi(&sys).unwrap()
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let sys = grid(6).with_rhs(random_vec(36, 1)).unwrap();
        let m = exact_precond(&sys);
        let x0 = vec![0.0; 36];
        let (_, rep) = stationary_solve(&sys, &m, &x0, &SolveOptions::new(10, 1e-10)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        let (_, rep) = fgmres(&sys, &m, &x0, &SolveOptions::new(10, 1e-12)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn homogeneous_stationary_errors_follow_powers_of_t() {
        let sys = grid(8).with_rhs(vec![0.0; 64]).unwrap();
        let p = Partition::half_split(8).unwrap().extend_overlap(&sys.matrix, 1).unwrap();
        let m = Preconditioner::ras(&sys, &p).unwrap();
        let x0 = random_vec(64, 2);
        let opts = SolveOptions::new(6, 1e-300).with_exact(vec![0.0; 64]);
        let (_, rep) = stationary_solve(&sys, &m, &x0, &opts).unwrap();
        let t = assemble_error_propagation(&sys, &m).unwrap();
        let tnorm = t.operator_norm().unwrap();
        for k in 0..=6 {
            let tk = error_propagation_power(&sys, &m, &x0, k).unwrap();
            assert!((norm2(&tk) - rep.error_history[k]).abs() < 1e-12);
            if k > 0 {
                assert!(rep.error_history[k] <= tnorm * rep.error_history[k - 1] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn power_matches_dense_assembly() {
        let sys = grid(7);
        let p = Partition::half_split(7).unwrap().extend_overlap(&sys.matrix, 1).unwrap();
        let m = Preconditioner::ras(&sys, &p).unwrap();
        let x = random_vec(49, 5);
        assert_eq!(error_propagation_power(&sys, &m, &x, 0).unwrap(), x);
        let t3 = assemble_error_propagation(&sys, &m).unwrap().power(3).unwrap();
        let dense = t3.matvec(&x).unwrap();
        let iter = error_propagation_power(&sys, &m, &x, 3).unwrap();
        for (a, b) in dense.iter().zip(&iter) {
            assert!((a - b).abs() < 1e-10);
        }
        let zero = error_propagation_power(&sys, &exact_precond(&sys), &x, 1).unwrap();
        assert!(norm2(&zero) < 1e-10);
    }

    /// Minimal-residual solution over an explicitly orthonormalized Krylov space.
    fn krylov_least_squares_residuals(a: &DMatrix<f64>, b: &DVector<f64>, steps: usize) -> Vec<f64> {
        let n = b.len();
        let mut out = Vec::new();
        for k in 1..=steps {
            let mut basis = DMatrix::<f64>::zeros(n, k);
            let mut v = b.clone();
            for j in 0..k {
                basis.set_column(j, &v);
                v = a * v;
            }
            let q = basis.qr().q();
            let aq = a * &q;
            let y = aq.clone().svd(true, true).solve(b, 1e-14).unwrap();
            out.push((b - aq * y).norm() / b.norm());
        }
        out
    }

    #[test]
    fn fgmres_with_identity_matches_least_squares_oracle() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + rng.random::<f64>()));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                if j != i {
                    let v = rng.random_range(-0.5..0.5);
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let b = random_vec(n, 10);
        let sys = LinearSystem::from_matrix(a.clone(), b.clone()).unwrap();
        let (_, rep) = fgmres(&sys, &identity_precond(n), &vec![0.0; n], &SolveOptions::new(12, 1e-300)).unwrap();
        let ad = a.to_dense();
        let dm = DMatrix::from_row_slice(n, n, ad.values());
        let oracle = krylov_least_squares_residuals(&dm, &DVector::from_vec(b), 12);
        for k in 0..12 {
            assert!(
                (rep.residual_history[k + 1] - oracle[k]).abs() < 1e-10,
                "step {k}: {} vs {}",
                rep.residual_history[k + 1],
                oracle[k]
            );
        }
    }

    #[test]
    fn fgmres_identity_converges_within_n() {
        let sys = grid(5).with_rhs(random_vec(25, 3)).unwrap();
        let (x, rep) = fgmres(&sys, &identity_precond(25), &[0.0; 25], &SolveOptions::new(100, 1e-12)).unwrap();
        assert!(rep.converged && rep.iterations <= 25);
        for w in rep.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let mut r = vec![0.0; 25];
        residual(&sys.matrix, &sys.rhs, &x, &mut r);
        assert!(norm2(&r) / norm2(&sys.rhs) < 1e-10);
    }

    #[test]
    fn stationary_reports_divergence() {
        let sys = LinearSystem::from_matrix(SparseMatrix::from_diagonal(&[1.0, 1.0]), vec![1.0, 1.0]).unwrap();
        // M = 3 I gives T = -2 I.
        let jac = Preconditioner::jacobi(
            &LinearSystem::from_matrix(SparseMatrix::from_diagonal(&[1.0 / 3.0; 2]), vec![0.0; 2]).unwrap(),
        )
        .unwrap();
        let (_, rep) = stationary_solve(&sys, &jac, &[0.0, 0.0], &SolveOptions::new(100, 1e-12)).unwrap();
        assert!(rep.diverged && !rep.converged);
    }

    #[test]
    fn csv_layout() {
        let rep = SolveReport {
            residual_history: vec![1.0, 0.5],
            error_history: vec![2.0, 1.0],
            iterations: 1,
            converged: false,
            diverged: false,
        };
        assert_eq!(rep.to_csv(), "iter,relres,error\n0,1e0,2e0\n1,5e-1,1e0\n");
    }
}
