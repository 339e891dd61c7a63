//! Centralized baselines computed by entirely different routes than the
//! federated pipelines, used to cross-check them in tests and reports.
//!
//! The least-squares baseline goes through the normal equations and Gaussian
//! elimination rather than any QR path, so agreement with [`fed_linreg`] is
//! evidence about the protocol, not a tautology.
//!
//! [`fed_linreg`]: crate::apps::fed_linreg

use crate::apps::RegressionReport;
use crate::federation::FedError;
use crate::linalg::{householder_qr, rank_tolerance, small_svd, LinalgError};
use crate::stats::two_sided_p_value;
use crate::Matrix;

/// Solves `G x = rhs_k` for every right-hand side by Gaussian elimination
/// with partial pivoting, consuming `G` as workspace.
fn gauss_solve(mut g: Matrix, mut rhs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, FedError> {
    let d = g.rows();
    let tol = rank_tolerance(&g);
    for col in 0..d {
        let mut pivot = col;
        for row in col + 1..d {
            if g[(row, col)].abs() > g[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if g[(pivot, col)].abs() <= tol {
            return Err(LinalgError::SingularDiagonal { index: col }.into());
        }
        if pivot != col {
            for c in 0..d {
                let tmp = g[(pivot, c)];
                g[(pivot, c)] = g[(col, c)];
                g[(col, c)] = tmp;
            }
            for v in rhs.iter_mut() {
                v.swap(pivot, col);
            }
        }
        for row in col + 1..d {
            let factor = g[(row, col)] / g[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for c in col..d {
                g[(row, c)] -= factor * g[(col, c)];
            }
            for v in rhs.iter_mut() {
                v[row] -= factor * v[col];
            }
        }
    }
    for v in rhs.iter_mut() {
        for col in (0..d).rev() {
            let mut acc = v[col];
            for c in col + 1..d {
                acc -= g[(col, c)] * v[c];
            }
            v[col] = acc / g[(col, col)];
        }
    }
    Ok(rhs)
}

/// Ordinary least squares via the normal equations `A^T A x = A^T b`.
///
/// Uses the same summary definitions as the federated fit: `dof` counts the
/// original feature columns, `mss` is the squared norm of the fitted values,
/// and `r_squared = mss / (mss + rss)`. The coefficient covariance comes
/// from inverting `A^T A` during the same elimination.
pub fn ols_fit(a: &Matrix, b: &[f64], intercept: bool) -> Result<RegressionReport, FedError> {
    if b.len() != a.rows() {
        return Err(FedError::SizeMismatch {
            expected: a.rows(),
            got: b.len(),
        });
    }
    let n = a.rows();
    let features = a.cols();
    if n <= features + 1 {
        return Err(FedError::DofExhausted { rows: n, features });
    }
    let design = if intercept {
        Matrix::from_fn(n, features + 1, |i, j| if j == 0 { 1.0 } else { a[(i, j - 1)] })
    } else {
        a.clone()
    };
    let d = design.cols();

    let dt = design.transpose();
    let gram = dt.matmul(&design)?;
    let atb = dt.mat_vec(b)?;

    let mut rhs = Vec::with_capacity(d + 1);
    rhs.push(atb);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        rhs.push(e);
    }
    let solved = gauss_solve(gram, rhs)?;
    let x = solved[0].clone();

    let fitted = design.mat_vec(&x)?;
    let rss: f64 = fitted.iter().zip(b).map(|(f, y)| (f - y) * (f - y)).sum();
    let mss: f64 = fitted.iter().map(|f| f * f).sum();
    let dof = n - features - 1;
    let sigma2 = rss / dof as f64;

    let std_errors: Vec<f64> = (0..d).map(|j| (sigma2 * solved[j + 1][j]).sqrt()).collect();
    let t_stats: Vec<f64> = x
        .iter()
        .zip(&std_errors)
        .map(|(xi, se)| xi / se)
        .collect();
    let p_values: Vec<f64> = t_stats
        .iter()
        .map(|t| two_sided_p_value(*t, dof as f64))
        .collect();

    Ok(RegressionReport {
        coefficients: x,
        std_errors,
        t_stats,
        p_values,
        r_squared: mss / (mss + rss),
        rss,
        mss,
        dof,
    })
}

/// Principal directions and singular values of a tall matrix.
///
/// Compresses through a Householder QR first because the Jacobi SVD wants a
/// square input; `R` has the same right singular structure as `A`. Returns
/// the top `k` directions as columns and the matching singular values.
pub fn centralized_pca(a: &Matrix, k: usize) -> Result<(Matrix, Vec<f64>), FedError> {
    let m = a.cols();
    if k == 0 || k > m {
        return Err(FedError::ComponentsOutOfRange { k, max: m });
    }
    let qr = householder_qr(a)?;
    let svd = small_svd(&qr.r)?;
    let v = Matrix::from_fn(m, k, |i, j| svd.v[(i, j)]);
    Ok((v, svd.sigma[..k].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn straight_line_closed_form() {
        let a = Matrix::from_fn(4, 1, |i, _| i as f64);
        let b: Vec<f64> = (0..4).map(|i| 1.0 + 2.0 * i as f64).collect();
        let fit = ols_fit(&a, &b, true).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() <= 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() <= 1e-12);
        assert!(fit.rss <= 1e-20);
        assert_eq!(fit.dof, 2);
    }

    #[test]
    fn solution_satisfies_the_normal_equations() {
        let a = synth::gaussian_matrix(25, 3, 60);
        let noise = synth::gaussian_matrix(25, 1, 160);
        let b: Vec<f64> = (0..25)
            .map(|i| a[(i, 0)] - 0.5 * a[(i, 1)] + 0.2 * noise[(i, 0)])
            .collect();
        let fit = ols_fit(&a, &b, true).unwrap();
        let design = Matrix::from_fn(25, 4, |i, j| if j == 0 { 1.0 } else { a[(i, j - 1)] });
        let fitted = design.mat_vec(&fit.coefficients).unwrap();
        let residual: Vec<f64> = fitted.iter().zip(&b).map(|(f, y)| y - f).collect();
        let gradient = design.transpose().mat_vec(&residual).unwrap();
        for g in gradient {
            assert!(g.abs() <= 1e-8, "normal equations violated by {g}");
        }
    }

    #[test]
    fn duplicate_columns_are_singular() {
        let base = synth::gaussian_matrix(10, 1, 61);
        let a = Matrix::from_fn(10, 2, |i, _| base[(i, 0)]);
        let err = ols_fit(&a, &vec![1.0; 10], false).unwrap_err();
        assert!(matches!(
            err,
            FedError::Linalg(LinalgError::SingularDiagonal { .. })
        ));
    }

    #[test]
    fn pca_directions_reconstruct_the_data() {
        let a = synth::gaussian_matrix(30, 4, 62);
        let (v, sigma) = centralized_pca(&a, 4).unwrap();
        let gram = v.transpose().matmul(&v).unwrap();
        assert!(gram.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-10);
        assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
        let recon = a.matmul(&v).unwrap().matmul(&v.transpose()).unwrap();
        let err = recon.sub(&a).unwrap().frobenius_norm();
        assert!(err <= 1e-8 * a.frobenius_norm());
    }
}
