//! Square root of symmetric positive definite matrices by coupled
//! Newton-Schulz iteration.
//!
//! The input is scaled to unit Frobenius norm so every eigenvalue lies in
//! `(0, 1]`, where the iteration
//!
//! ```text
//! T     = (3I - Z Y) / 2
//! Y_k+1 = Y T          (-> A^{1/2})
//! Z_k+1 = T Z          (-> A^{-1/2})
//! ```
//!
//! converges from `Y_0 = A`, `Z_0 = I`. The result is rescaled by the square
//! root of the norm.
//!
//! The residual `|Y^2 - A|` is blind to errors along tiny eigenvalues, so
//! convergence also requires `Z Y` to reach the identity: each eigenvalue of
//! `Z Y` is the squared relative accuracy of the matching eigenvalue of `Y`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 100;
/// Relative residual `|Y^2 - A| / |A|` below which iteration stops.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// RMS deviation of `Z Y` from the identity required alongside the residual.
pub const IDENTITY_GAP_TOLERANCE: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// Consecutive increases of the identity gap, above [`DIVERGENCE_FLOOR`], that count as divergence.
const DIVERGENCE_STREAK: usize = 3;
const DIVERGENCE_FLOOR: f64 = 1e-6;
/// Below this identity gap an increase means round-off has taken over.
const ROUNDOFF_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SqrtResult {
    pub root: DMatrix<f64>,
    /// Newton-Schulz updates performed (0 when a closed form applied).
    pub iterations: usize,
    /// Final relative residual `|Y^2 - A| / |A|` of the normalized problem.
    pub residual: f64,
}

pub fn matrix_sqrt(a: &DMatrix<f64>, max_iterations: usize) -> Result<SqrtResult> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Shape(format!(
            "square root needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("matrix has non-finite entries".into()));
    }
    let norm = a.norm();
    if (a - a.transpose()).norm() > SYMMETRY_TOLERANCE * norm {
        return Err(Error::Parameter("matrix is not symmetric".into()));
    }
    if norm == 0.0 {
        return Ok(SqrtResult {
            root: DMatrix::zeros(n, n),
            iterations: 0,
            residual: 0.0,
        });
    }

    let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
    if is_diagonal {
        if let Some(i) = (0..n).find(|&i| a[(i, i)] < 0.0) {
            return Err(Error::Parameter(format!(
                "matrix is not positive semidefinite (diagonal entry {} = {})",
                i,
                a[(i, i)]
            )));
        }
        return Ok(SqrtResult {
            root: DMatrix::from_fn(n, n, |i, j| if i == j { a[(i, i)].sqrt() } else { 0.0 }),
            iterations: 0,
            residual: 0.0,
        });
    }

    let target = (a + a.transpose()) * (0.5 / norm);
    let identity = DMatrix::<f64>::identity(n, n);
    let mut y = target.clone();
    let mut z = identity.clone();
    let residual_of = |y: &DMatrix<f64>| (y * y - &target).norm();

    let mut best = (f64::INFINITY, f64::INFINITY, y.clone());
    let mut previous = f64::INFINITY;
    let mut streak = 0usize;
    let mut iterations = 0usize;
    loop {
        let zy = &z * &y;
        let residual = residual_of(&y);
        let gap = (&identity - &zy).norm() / (n as f64).sqrt();
        if !residual.is_finite() || !gap.is_finite() {
            return Err(Error::Convergence {
                iterations,
                residual,
            });
        }
        if gap < best.1 {
            best = (residual, gap, y.clone());
        }
        if (residual < RESIDUAL_TOLERANCE && gap < IDENTITY_GAP_TOLERANCE) || iterations >= max_iterations {
            break;
        }
        if gap >= previous {
            if gap < ROUNDOFF_FLOOR {
                break;
            }
            streak += 1;
            if streak >= DIVERGENCE_STREAK && gap > DIVERGENCE_FLOOR {
                return Err(Error::Convergence {
                    iterations,
                    residual,
                });
            }
        } else {
            streak = 0;
        }
        previous = gap;

        let t = (&identity * 3.0 - zy) * 0.5;
        y = &y * &t;
        z = &t * &z;
        iterations += 1;
    }

    let (residual, _, y) = best;
    let root = (&y + y.transpose()) * (0.5 * norm.sqrt());
    Ok(SqrtResult {
        root,
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eigen_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
        let e = SymmetricEigen::new(a.clone());
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
        &e.eigenvectors * d * e.eigenvectors.transpose()
    }

    #[test]
    fn identity_is_fixed() {
        let r = matrix_sqrt(&DMatrix::identity(5, 5), DEFAULT_ITERATIONS).unwrap();
        assert_eq!(r.root, DMatrix::identity(5, 5));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn diagonal_closed_form() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let r = matrix_sqrt(&a, DEFAULT_ITERATIONS).unwrap();
        assert!((r.root[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((r.root[(1, 1)] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn dense_spd_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 16;
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
        let r = matrix_sqrt(&a, DEFAULT_ITERATIONS).unwrap();
        let oracle = eigen_sqrt(&a);
        assert!((&r.root - &oracle).norm() / oracle.norm() < 1e-6);
        assert!(r.iterations > 0 && r.iterations < DEFAULT_ITERATIONS);
        assert!(r.residual < RESIDUAL_TOLERANCE);
    }

    #[test]
    fn non_symmetric_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(matrix_sqrt(&a, 100), Err(Error::Parameter(_))));
    }

    #[test]
    fn indefinite_matrix_reports_divergence() {
        // eigenvalues 3 and -1: the iteration cannot settle
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(matrix_sqrt(&a, 100), Err(Error::Convergence { .. })));
    }

    #[test]
    fn zero_matrix() {
        let r = matrix_sqrt(&DMatrix::zeros(3, 3), 100).unwrap();
        assert_eq!(r.root, DMatrix::zeros(3, 3));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = matrix_sqrt(&a, 2).unwrap();
        assert_eq!(r.iterations, 2);
        assert!(r.residual > RESIDUAL_TOLERANCE);
    }
}
