//! Small dense matrix primitives for the condition checks: symmetric part,
//! matrix measure induced by the Euclidean norm, spectral norm and singular
//! value extremes.
//!
//! Everything here targets tiny matrices (3x3 closed-loop blocks, a handful
//! of rows in tests), so storage is plain row-major and the symmetric
//! eigenproblem is solved by cyclic Jacobi rotations. There is deliberately
//! no sparse or large-scale path.

use crate::error::{Error, Result};

/// Convergence threshold on the off-diagonal Frobenius mass, relative to the
/// matrix scale with a floor of 1 so O(1) matrices converge to 1e-12 absolute.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense row-major matrix of `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension {
                context: format!("matrix dimensions must be >= 1, got {rows}x{cols}"),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: format!(
                    "expected {} entries for a {rows}x{cols} matrix, got {}",
                    rows * cols,
                    data.len()
                ),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "matrix entries".into() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a square matrix from nested row arrays.
    pub fn from_rows<const N: usize>(rows: [[f64; N]; N]) -> Result<Self> {
        Self::new(N, N, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        self.data[i * self.cols + j] = value;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension {
                context: format!(
                    "cannot multiply {}x{} by {}x{}",
                    self.rows, self.cols, rhs.rows, rhs.cols
                ),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension {
                context: format!(
                    "cannot add {}x{} and {}x{}",
                    self.rows, self.cols, rhs.rows, rhs.cols
                ),
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn max_abs_diff(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.rows, rhs.rows);
        assert_eq!(self.cols, rhs.cols);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn require_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NonSquare { rows: self.rows, cols: self.cols });
        }
        Ok(())
    }
}

/// (A + A^T)/2. Exactly symmetric by construction: the (i,j) and (j,i)
/// entries are written from the same computed value.
pub fn symmetric_part(a: &Matrix) -> Result<Matrix> {
    a.require_square()?;
    let n = a.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        s.set(i, i, a.get(i, i));
        for j in (i + 1)..n {
            let v = (a.get(i, j) + a.get(j, i)) / 2.0;
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    Ok(s)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// The caller must pass a symmetric matrix; `symmetric_part` produces one
/// exactly. Convergence is declared when the off-diagonal Frobenius mass
/// drops below `1e-12 * max(1, ||A||_F)`.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    a.require_square()?;
    let n = a.rows();
    let mut m = a.clone();
    let scale = m.frobenius_norm().max(1.0);
    let tol = JACOBI_TOL * scale;

    let off_diag_mass = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j) * m.get(i, j);
                }
            }
        }
        s.sqrt()
    };

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diag_mass(&m) <= tol {
            let mut eigs: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
            eigs.sort_by(f64::total_cmp);
            return Ok(eigs);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= f64::EPSILON * scale {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/columns p and q
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
            }
        }
    }

    let off = off_diag_mass(&m);
    if off <= tol {
        let mut eigs: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
        eigs.sort_by(f64::total_cmp);
        return Ok(eigs);
    }
    Err(Error::EigenConvergence { sweeps: JACOBI_MAX_SWEEPS, off_diag: off, n })
}

/// Matrix measure induced by the Euclidean norm: the largest eigenvalue of
/// the symmetric part.
pub fn matrix_measure_2(a: &Matrix) -> Result<f64> {
    let eigs = symmetric_eigenvalues(&symmetric_part(a)?)?;
    Ok(*eigs.last().expect("eigenvalue list is non-empty"))
}

/// Spectral norm: largest singular value, computed as the square root of the
/// largest eigenvalue of A^T A.
pub fn spectral_norm_2(a: &Matrix) -> Result<f64> {
    let ata = a.transpose().matmul(a)?;
    let eigs = symmetric_eigenvalues(&symmetric_part(&ata)?)?;
    let max = eigs.last().expect("eigenvalue list is non-empty");
    Ok(max.max(0.0).sqrt())
}

/// Smallest and largest singular value of a square matrix.
pub fn singular_value_extremes(a: &Matrix) -> Result<(f64, f64)> {
    a.require_square()?;
    let ata = a.transpose().matmul(a)?;
    let eigs = symmetric_eigenvalues(&symmetric_part(&ata)?)?;
    let min = eigs.first().expect("eigenvalue list is non-empty");
    let max = eigs.last().expect("eigenvalue list is non-empty");
    Ok((min.max(0.0).sqrt(), max.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed-form eigenvalues of a symmetric 2x2 matrix, independent of the
    /// Jacobi path.
    fn eig2_closed_form(a: f64, b: f64, d: f64) -> (f64, f64) {
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }

    /// Largest eigenvalue of a symmetric PSD matrix by power iteration on the
    /// Rayleigh quotient; independent oracle for the spectral norm.
    fn power_iteration_lambda_max(m: &Matrix) -> f64 {
        let n = m.rows();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.37).collect();
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let mut w = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    w[i] += m.get(i, j) * v[j];
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for x in &mut w {
                *x /= norm;
            }
            let mut quotient = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quotient += w[i] * m.get(i, j) * w[j];
                }
            }
            if (quotient - lambda).abs() <= 1e-14 * quotient.abs().max(1.0) {
                return quotient;
            }
            lambda = quotient;
            v = w;
        }
        lambda
    }

    fn random_matrix(rng: &mut crate::rng::SplitMix64, n: usize, scale: f64) -> Matrix {
        let data = (0..n * n).map(|_| rng.next_symmetric() * scale).collect();
        Matrix::new(n, n, data).unwrap()
    }

    #[test]
    fn symmetric_part_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(symmetric_part(&i2).unwrap(), i2);

        let a = Matrix::from_rows([[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let expected = Matrix::from_rows([[0.0, 0.5], [0.5, 0.0]]).unwrap();
        assert_eq!(symmetric_part(&a).unwrap(), expected);

        let b = Matrix::from_rows([[1.0, 2.0], [4.0, 3.0]]).unwrap();
        let expected = Matrix::from_rows([[1.0, 3.0], [3.0, 3.0]]).unwrap();
        assert_eq!(symmetric_part(&b).unwrap(), expected);
    }

    #[test]
    fn symmetric_part_rejects_non_square() {
        let a = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(symmetric_part(&a), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn symmetric_part_idempotent_exactly() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for _ in 0..200 {
            let a = random_matrix(&mut rng, 3, 5.0);
            let s = symmetric_part(&a).unwrap();
            assert_eq!(symmetric_part(&s).unwrap(), s);
        }
    }

    #[test]
    fn matrix_measure_examples() {
        assert_eq!(matrix_measure_2(&Matrix::zeros(2, 2)).unwrap(), 0.0);
        assert_relative_eq!(matrix_measure_2(&Matrix::identity(3)).unwrap(), 1.0, epsilon = 1e-12);

        // eigenvalues of [[0,0.5],[0.5,0]] are +-0.5 by the closed-form oracle
        let a = Matrix::from_rows([[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let (lo, hi) = eig2_closed_form(0.0, 0.5, 0.0);
        assert_relative_eq!(lo, -0.5, epsilon = 1e-15);
        assert_relative_eq!(hi, 0.5, epsilon = 1e-15);
        assert_relative_eq!(matrix_measure_2(&a).unwrap(), hi, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_examples() {
        assert_relative_eq!(spectral_norm_2(&Matrix::identity(2)).unwrap(), 1.0, epsilon = 1e-12);

        let d = Matrix::from_rows([[2.0, 0.0], [0.0, -3.0]]).unwrap();
        assert_relative_eq!(spectral_norm_2(&d).unwrap(), 3.0, epsilon = 1e-12);

        // brute-force oracle: A^T A = [[0,0],[0,1]], max eigenvalue 1
        let a = Matrix::from_rows([[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let ata = a.transpose().matmul(&a).unwrap();
        let (_, hi) = eig2_closed_form(ata.get(0, 0), ata.get(0, 1), ata.get(1, 1));
        assert_relative_eq!(spectral_norm_2(&a).unwrap(), hi.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(spectral_norm_2(&a).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_value_extreme_examples() {
        assert_eq!(singular_value_extremes(&Matrix::identity(3)).unwrap(), (1.0, 1.0));

        let d = Matrix::from_rows([[0.5, 0.0], [0.0, 4.0]]).unwrap();
        let (lo, hi) = singular_value_extremes(&d).unwrap();
        assert_relative_eq!(lo, 0.5, epsilon = 1e-12);
        assert_relative_eq!(hi, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_singular_values_multiply_to_one() {
        // unit upper-triangular transform has det 1, so the product of all
        // three singular values must be 1
        let t = Matrix::from_rows([
            [1.0, 0.3, 0.0],
            [0.0, 1.0, -0.4],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        let ata = t.transpose().matmul(&t).unwrap();
        let eigs = symmetric_eigenvalues(&symmetric_part(&ata).unwrap()).unwrap();
        let product: f64 = eigs.iter().map(|l| l.max(0.0).sqrt()).product();
        assert_relative_eq!(product, 1.0, epsilon = 1e-10);

        let (lo, hi) = singular_value_extremes(&t).unwrap();
        assert!(lo <= 1.0 && 1.0 <= hi);
        assert_relative_eq!(lo, eigs[0].sqrt(), epsilon = 1e-12);
        assert_relative_eq!(hi, eigs[2].sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn measure_bounded_by_spectral_norm() {
        let mut rng = crate::rng::SplitMix64::new(7);
        for k in 0..1000 {
            let n = 1 + (k % 4);
            let a = random_matrix(&mut rng, n, 10.0);
            let mu = matrix_measure_2(&a).unwrap();
            let norm = spectral_norm_2(&a).unwrap();
            assert!(mu <= norm + 1e-9, "mu2 {mu} exceeded norm {norm}");
        }
    }

    #[test]
    fn measure_subadditive_and_homogeneous() {
        let mut rng = crate::rng::SplitMix64::new(8);
        for _ in 0..1000 {
            let a = random_matrix(&mut rng, 3, 4.0);
            let b = random_matrix(&mut rng, 3, 4.0);
            let mu_sum = matrix_measure_2(&a.add(&b).unwrap()).unwrap();
            let mu_a = matrix_measure_2(&a).unwrap();
            let mu_b = matrix_measure_2(&b).unwrap();
            assert!(mu_sum <= mu_a + mu_b + 1e-9);

            let c = rng.next_unit() * 3.0;
            let mu_scaled = matrix_measure_2(&a.scale(c)).unwrap();
            assert_relative_eq!(mu_scaled, c * mu_a, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn spectral_norm_matches_power_iteration_oracle() {
        let mut rng = crate::rng::SplitMix64::new(9);
        for k in 0..200 {
            let n = 1 + (k % 4);
            let a = random_matrix(&mut rng, n, 3.0);
            let ata = a.transpose().matmul(&a).unwrap();
            let oracle = power_iteration_lambda_max(&ata).max(0.0).sqrt();
            let norm = spectral_norm_2(&a).unwrap();
            assert_relative_eq!(norm, oracle, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0, f64::INFINITY, 0.0, 0.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(Matrix::new(0, 3, vec![]).is_err());
        assert!(Matrix::new(3, 0, vec![]).is_err());
    }
}
