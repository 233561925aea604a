use nalgebra::DMatrix;

use crate::Vector;

/// Default relative tolerance on singular values for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

pub fn singular_values(m: &DMatrix<f64>) -> Vector {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vector::zeros(0);
    }
    m.singular_values()
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `A u ≈ b`.
pub fn least_squares(a: &DMatrix<f64>, b: &Vector) -> Vector {
    if a.ncols() == 0 {
        return Vector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (RANK_TOL * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("svd computed with both factors")
}

/// Kronecker product `a ⊗ I_n`.
pub fn kron_identity(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() * n, a.ncols() * n);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            if v != 0.0 {
                for k in 0..n {
                    out[(i * n + k, j * n + k)] = v;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_duplicated_rows() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(numerical_rank(&m, RANK_TOL), 1);
        assert_eq!(numerical_rank(&DMatrix::zeros(2, 2), RANK_TOL), 0);
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), RANK_TOL), 3);
    }

    #[test]
    fn min_norm_least_squares() {
        // underdetermined: x + y = 2 → (1, 1)
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let u = least_squares(&a, &Vector::from_column_slice(&[2.0]));
        assert!((u - Vector::from_column_slice(&[1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn kron_layout() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let k = kron_identity(&a, 2);
        let expected = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        assert_eq!(k, expected);
    }
}
