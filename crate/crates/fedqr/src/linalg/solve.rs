use super::matrix::DenseMatrix;
use super::{LinalgError, Scalar};

/// Tolerance under which a pivot or squared column norm is treated as zero:
/// `1e-12 * max(rows, cols) * ||A||_inf`, floored at `1e-12` so the all-tiny
/// matrix still gets a nonzero threshold.
pub fn rank_tolerance<F: Scalar>(a: &DenseMatrix<F>) -> F {
    let dim = F::from_f64(a.rows().max(a.cols()) as f64);
    let base = F::from_f64(1e-12);
    base * (dim * a.max_abs()).max(F::one())
}

/// Solves `R x = y` for upper-triangular `R` by back substitution.
pub fn back_substitute<F: Scalar>(
    r: &DenseMatrix<F>,
    y: &[F],
) -> Result<Vec<F>, LinalgError> {
    let m = r.rows();
    if r.cols() != m {
        return Err(LinalgError::NotSquare {
            rows: m,
            cols: r.cols(),
        });
    }
    if y.len() != m {
        return Err(LinalgError::ShapeMismatch {
            expected: m,
            got: y.len(),
        });
    }
    let tol = rank_tolerance(r);
    let mut x = vec![F::zero(); m];
    for i in (0..m).rev() {
        let mut acc = y[i];
        for j in i + 1..m {
            acc -= r[(i, j)] * x[j];
        }
        let d = r[(i, i)];
        if d.abs() <= tol {
            return Err(LinalgError::SingularDiagonal { index: i });
        }
        x[i] = acc / d;
    }
    Ok(x)
}

/// Solves `R^T x = y` for upper-triangular `R`, i.e. a forward substitution
/// on the implicit lower-triangular transpose. Together with
/// [`back_substitute`] this inverts `R^T R` without forming it.
pub fn back_substitute_transpose<F: Scalar>(
    r: &DenseMatrix<F>,
    y: &[F],
) -> Result<Vec<F>, LinalgError> {
    let m = r.rows();
    if r.cols() != m {
        return Err(LinalgError::NotSquare {
            rows: m,
            cols: r.cols(),
        });
    }
    if y.len() != m {
        return Err(LinalgError::ShapeMismatch {
            expected: m,
            got: y.len(),
        });
    }
    let tol = rank_tolerance(r);
    let mut x = vec![F::zero(); m];
    for i in 0..m {
        let mut acc = y[i];
        for j in 0..i {
            acc -= r[(j, i)] * x[j];
        }
        let d = r[(i, i)];
        if d.abs() <= tol {
            return Err(LinalgError::SingularDiagonal { index: i });
        }
        x[i] = acc / d;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::householder_qr;
    use crate::synth;

    #[test]
    fn solves_hand_system() {
        // R = [[2, 1], [0, 3]], y = (5, 6) -> x = (1.5, 2).
        let r = DenseMatrix::<f64>::from_rows(2, 2, vec![2.0, 1.0, 0.0, 3.0]).unwrap();
        let x = back_substitute(&r, &[5.0, 6.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-15);
        assert!((x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn transpose_solve_hand_system() {
        // R^T = [[2, 0], [1, 3]], y = (4, 7) -> x = (2, 5/3).
        let r = DenseMatrix::<f64>::from_rows(2, 2, vec![2.0, 1.0, 0.0, 3.0]).unwrap();
        let x = back_substitute_transpose(&r, &[4.0, 7.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert!((x[1] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_singular_diagonal() {
        let r = DenseMatrix::from_rows(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            back_substitute(&r, &[1.0, 1.0]).unwrap_err(),
            LinalgError::SingularDiagonal { index: 1 }
        );
        assert_eq!(
            back_substitute_transpose(&r, &[1.0, 1.0]).unwrap_err(),
            LinalgError::SingularDiagonal { index: 1 }
        );
    }

    #[test]
    fn rejects_shape_mismatch() {
        let r = DenseMatrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            back_substitute(&r, &[1.0]),
            Err(LinalgError::ShapeMismatch { expected: 2, got: 1 })
        ));
        let rect = DenseMatrix::from_rows(2, 3, vec![1.0; 6]).unwrap();
        assert!(matches!(
            back_substitute(&rect, &[1.0, 1.0]),
            Err(LinalgError::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn round_trips_against_qr() {
        let a = synth::gaussian_matrix(40, 5, 7);
        let qr = householder_qr(&a).unwrap();
        let x_true: Vec<f64> = (0..5).map(|i| (i as f64) - 2.0).collect();
        let b = a.mat_vec(&x_true).unwrap();
        // y = Q^T b, then R x = y.
        let y = qr.q.transpose().mat_vec(&b).unwrap();
        let x = back_substitute(&qr.r, &y).unwrap();
        for i in 0..5 {
            assert!((x[i] - x_true[i]).abs() < 1e-10, "component {i}");
        }
    }

    #[test]
    fn transpose_then_forward_inverts_gram_matrix() {
        // (R^T R) z = e_i solved by two triangular solves equals the direct
        // inverse column.
        let r = DenseMatrix::<f64>::from_rows(3, 3, vec![2.0, 1.0, -1.0, 0.0, 1.5, 0.5, 0.0, 0.0, 3.0])
            .unwrap();
        let rtr = r.transpose().matmul(&r).unwrap();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            let w = back_substitute_transpose(&r, &e).unwrap();
            let z = back_substitute(&r, &w).unwrap();
            let back = rtr.mat_vec(&z).unwrap();
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((back[j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn tolerance_scales_with_magnitude() {
        let small = DenseMatrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let big = DenseMatrix::from_rows(2, 2, vec![1e6, 0.0, 0.0, 1e6]).unwrap();
        assert!(rank_tolerance(&big) > rank_tolerance(&small));
        assert!(rank_tolerance(&small) >= 1e-12);
    }
}
