//! Small dense matrices and the dense eigenvalue oracles.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest dimension accepted by the dense eigenvalue and singular value oracles.
pub const DENSE_ORACLE_LIMIT: usize = 2000;

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                context: "dense matrix values",
                expected: n_rows * n_cols,
                found: values.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix column by column.
    pub fn from_columns(n_rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(n_rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                context: "dense matvec",
                expected: self.n_cols,
                found: x.len(),
            });
        }
        Ok((0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                context: "dense matmul",
                expected: self.n_cols,
                found: other.n_rows,
            });
        }
        let product = self.to_nalgebra() * other.to_nalgebra();
        Ok(Self::from_nalgebra(&product))
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                context: "dense add",
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values,
        })
    }

    /// Inverse via nalgebra's LU; intended for small oracle computations.
    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.require_square()?;
        self.require_oracle_size()?;
        let inv = self.to_nalgebra().try_inverse().ok_or_else(|| Error::SingularMatrix {
            matrix: "dense matrix".into(),
            row: 0,
        })?;
        Ok(Self::from_nalgebra(&inv))
    }

    /// `self^k` by repeated multiplication; `k = 0` gives the identity.
    pub fn power(&self, k: usize) -> Result<DenseMatrix> {
        self.require_square()?;
        let base = self.to_nalgebra();
        let mut acc = DMatrix::<f64>::identity(self.n_rows, self.n_rows);
        for _ in 0..k {
            acc = &base * acc;
        }
        Ok(Self::from_nalgebra(&acc))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    fn require_square(&self) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::NotSquare {
                rows: self.n_rows,
                cols: self.n_cols,
            });
        }
        Ok(())
    }

    fn require_oracle_size(&self) -> Result<()> {
        let n = self.n_rows.max(self.n_cols);
        if n > DENSE_ORACLE_LIMIT {
            return Err(Error::DenseTooLarge {
                n,
                limit: DENSE_ORACLE_LIMIT,
            });
        }
        Ok(())
    }

    /// All eigenvalues as `(re, im)` pairs.
    pub fn eigenvalues(&self) -> Result<Vec<(f64, f64)>> {
        self.require_square()?;
        self.require_oracle_size()?;
        if self.n_rows == 0 {
            return Ok(Vec::new());
        }
        let m = faer::Mat::<f64>::from_fn(self.n_rows, self.n_cols, |i, j| self[(i, j)]);
        let eig = m.eigenvalues().map_err(|_| Error::EigenFailure(self.n_rows))?;
        Ok(eig.into_iter().map(|z| (z.re, z.im)).collect())
    }

    /// Spectral radius `max |lambda_i|`.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .map(|(re, im)| re.hypot(im))
            .fold(0.0, f64::max))
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.require_oracle_size()?;
        let svd = self.to_nalgebra().svd(false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }

    /// Operator 2-norm (largest singular value).
    pub fn operator_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_square()?;
        self.require_oracle_size()?;
        let m = self.to_nalgebra();
        let sym = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.values)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let mut d = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                d[(i, j)] = m[(i, j)];
            }
        }
        d
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.n_cols + j]
    }
}

/// Dense spectral radius; see [`DenseMatrix::spectral_radius`].
pub fn dense_spectral_radius(a: &DenseMatrix) -> Result<f64> {
    a.spectral_radius()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::from_row_major(n, n, v).unwrap()
    }

    /// Independent oracle: `rho = lim ||A^(2^k)||^(1/2^k)`, by normalized repeated squaring.
    fn radius_by_repeated_squaring(a: &DenseMatrix, squarings: u32) -> f64 {
        let n = a.n_rows();
        let mut b = a.values().to_vec();
        let mut log_scale = 0.0;
        let mut exponent = 1.0f64;
        for _ in 0..squarings {
            let s = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if s == 0.0 {
                return 0.0;
            }
            b.iter_mut().for_each(|v| *v /= s);
            log_scale += s.ln() / exponent;
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let bik = b[i * n + k];
                    for j in 0..n {
                        c[i * n + j] += bik * b[k * n + j];
                    }
                }
            }
            b = c;
            exponent *= 2.0;
        }
        let s = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        (log_scale + s.ln() / exponent).exp()
    }

    #[test]
    fn diagonal_radius() {
        let a = DenseMatrix::from_diagonal(&[0.5, -0.9]);
        assert!((a.spectral_radius().unwrap() - 0.9).abs() < 1e-14);
    }

    #[test]
    fn nilpotent_radius_is_zero() {
        let a = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(a.spectral_radius().unwrap().abs() < 1e-14);
    }

    #[test]
    fn non_square_is_rejected() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(a.spectral_radius(), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn oversized_request_errors() {
        let a = DenseMatrix::zeros(DENSE_ORACLE_LIMIT + 1, DENSE_ORACLE_LIMIT + 1);
        assert!(matches!(
            a.spectral_radius(),
            Err(Error::DenseTooLarge { .. })
        ));
    }

    #[test]
    fn random_radius_matches_repeated_squaring() {
        for seed in 0..5 {
            let a = random_dense(20, seed);
            let rho = a.spectral_radius().unwrap();
            let oracle = radius_by_repeated_squaring(&a, 40);
            assert!(
                (rho - oracle).abs() < 1e-6 * rho.max(1.0),
                "seed {seed}: {rho} vs {oracle}"
            );
        }
    }

    #[test]
    fn radius_bounded_by_frobenius_norm() {
        for seed in 0..20 {
            let a = random_dense(15, 100 + seed);
            assert!(a.spectral_radius().unwrap() <= a.frobenius_norm());
        }
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let a = DenseMatrix::from_diagonal(&[3.0, -4.0, 1.0]);
        assert!((a.operator_norm().unwrap() - 4.0).abs() < 1e-12);
    }
}
