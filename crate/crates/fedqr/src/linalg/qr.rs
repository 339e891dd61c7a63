use super::matrix::{DenseMatrix, QrFactorization};
use super::solve::rank_tolerance;
use super::{LinalgError, Scalar};

/// Values produced by one Householder reflection.
///
/// `u` and `beta` are expressed in units of the max-scaled column
/// `a / max_elem`; the reflector `I - beta * u * u^T` itself is scale
/// invariant and is applied to the unscaled data.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholderStep<F> {
    /// Reflection vector of the scaled column, `u = a_scaled + sgn(a_1) * ||a_scaled||_2 * e_1`.
    pub u: Vec<F>,
    /// `2 / (u^T u)`.
    pub beta: F,
    /// Infinity norm of the reflected column before scaling.
    pub max_elem: F,
    /// Two-norm of the scaled column.
    pub scaled_norm: F,
    /// Sign convention applied to the leading element (`+1` for zero).
    pub lead_sign: F,
}

/// Sign function with `sgn(0) = +1`, the convention used when choosing the
/// reflection direction.
fn sgn<F: Scalar>(v: F) -> F {
    if v < F::zero() {
        -F::one()
    } else {
        F::one()
    }
}

/// Applies one Householder reflection in place.
///
/// The reflection direction is computed from column `col` of `a`, scaled by
/// its infinity norm for overflow safety, and the resulting reflector is
/// applied to all columns `col..`. Afterwards column `col` is
/// `(-sgn(a_1) * scaled_norm * max_elem, 0, ..., 0)` below row 0 up to
/// rounding; rows above `col` are not touched because callers pass the
/// working submatrix implicitly via `row0`.
///
/// `row0` is the first row of the active submatrix; rows before it are left
/// alone.
pub fn householder_reflection<F: Scalar>(
    a: &mut DenseMatrix<F>,
    row0: usize,
    col: usize,
) -> Result<HouseholderStep<F>, LinalgError> {
    let n = a.rows();
    let m = a.cols();
    assert!(row0 < n && col < m, "reflection start out of range");
    let height = n - row0;

    let mut max_elem = F::zero();
    for r in row0..n {
        max_elem = max_elem.max(a[(r, col)].abs());
    }
    if max_elem == F::zero() {
        return Err(LinalgError::ZeroColumn { col });
    }

    // Direction from the scaled column; the scaling only stabilizes u.
    let mut u: Vec<F> = (row0..n).map(|r| a[(r, col)] / max_elem).collect();
    let scaled_norm = u.iter().map(|&v| v * v).sum::<F>().sqrt();
    let lead_sign = sgn(u[0]);
    u[0] += lead_sign * scaled_norm;
    let utu = u.iter().map(|&v| v * v).sum::<F>();
    let beta = F::from_f64(2.0) / utu;

    // A <- A - beta * u * (u^T A), over the active columns of the unscaled data.
    for j in col..m {
        let mut proj = F::zero();
        for (k, &uv) in u.iter().enumerate() {
            proj += uv * a[(row0 + k, j)];
        }
        let scale = beta * proj;
        for (k, &uv) in u.iter().enumerate() {
            a[(row0 + k, j)] -= scale * uv;
        }
    }
    // The reflected column is exactly +-norm * e_1 in exact arithmetic; pin
    // the zeros so downstream triangularity is bit-true.
    for r in row0 + 1..n {
        a[(r, col)] = F::zero();
    }
    let _ = height;

    Ok(HouseholderStep {
        u,
        beta,
        max_elem,
        scaled_norm,
        lead_sign,
    })
}

/// Householder QR of a tall matrix (`rows >= cols`).
///
/// Returns the reduced factorization. The diagonal of `r` carries the
/// algorithm's sign convention (`-sgn(lead) * norm`); use
/// [`normalize_qr_signs`] before comparing against another algorithm.
pub fn householder_qr<F: Scalar>(a: &DenseMatrix<F>) -> Result<QrFactorization<F>, LinalgError> {
    let n = a.rows();
    let m = a.cols();
    if n < m {
        return Err(LinalgError::DimensionMismatch {
            left_rows: n,
            left_cols: m,
            right_rows: m,
            right_cols: m,
        });
    }
    let mut r = a.clone();
    let mut q = DenseMatrix::<F>::identity(n);

    // A square matrix needs no reflection on its last column (height-1
    // submatrix); a tall one does.
    let steps = if n == m { m - 1 } else { m };
    for c in 0..steps {
        let step = match householder_reflection(&mut r, c, c) {
            Ok(s) => s,
            Err(LinalgError::ZeroColumn { col }) => {
                return Err(LinalgError::RankDeficient { col })
            }
            Err(e) => return Err(e),
        };
        // Q <- Q * H, accumulated on the right so Q ends as H_0 ... H_k.
        for i in 0..n {
            let mut proj = F::zero();
            for (k, &uv) in step.u.iter().enumerate() {
                proj += q[(i, c + k)] * uv;
            }
            let scale = step.beta * proj;
            for (k, &uv) in step.u.iter().enumerate() {
                q[(i, c + k)] -= scale * uv;
            }
        }
    }

    let mut r_out = DenseMatrix::<F>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            r_out[(i, j)] = r[(i, j)];
        }
    }
    let q_out = DenseMatrix::from_fn(n, m, |i, j| q[(i, j)]);
    Ok(QrFactorization { q: q_out, r: r_out })
}

/// Rotation parameters `(c, s)` that zero the second coordinate of
/// `(x_pivot, x_target)`.
///
/// The degenerate pair `(0, 0)` maps to the identity rotation `(1, 0)`:
/// there is nothing to zero and no direction to prefer.
pub fn givens_params<F: Scalar>(x_pivot: F, x_target: F) -> (F, F) {
    let h = x_pivot.hypot(x_target);
    if h == F::zero() {
        return (F::one(), F::zero());
    }
    (x_pivot / h, x_target / h)
}

/// Applies the plane rotation `(c, s)` to rows `i` and `j` in place:
///
/// ```text
/// row_i' =  c * row_i + s * row_j
/// row_j' = -s * row_i + c * row_j
/// ```
///
/// The second line uses the orthogonal form (minus sign), which keeps
/// `J^T J = I`.
pub fn apply_givens<F: Scalar>(
    a: &mut DenseMatrix<F>,
    i: usize,
    j: usize,
    c: F,
    s: F,
) -> Result<(), LinalgError> {
    let n = a.rows();
    if i >= j || j >= n {
        return Err(LinalgError::IndexOutOfRange { i, j, rows: n });
    }
    for col in 0..a.cols() {
        let vi = a[(i, col)];
        let vj = a[(j, col)];
        a[(i, col)] = c * vi + s * vj;
        a[(j, col)] = c * vj - s * vi;
    }
    Ok(())
}

/// Givens QR of a tall matrix: rotations zero sub-diagonal entries column by
/// column, bottom row last within each column.
pub fn givens_qr<F: Scalar>(a: &DenseMatrix<F>) -> Result<QrFactorization<F>, LinalgError> {
    let n = a.rows();
    let m = a.cols();
    if n < m {
        return Err(LinalgError::DimensionMismatch {
            left_rows: n,
            left_cols: m,
            right_rows: m,
            right_cols: m,
        });
    }
    let mut r = a.clone();
    // Rotations are accumulated into G = J_k ... J_1; Q is G^T.
    let mut g = DenseMatrix::<F>::identity(n);
    for col in 0..m {
        for row in col + 1..n {
            if r[(row, col)] == F::zero() {
                continue;
            }
            let (c, s) = givens_params(r[(col, col)], r[(row, col)]);
            apply_givens(&mut r, col, row, c, s)?;
            apply_givens(&mut g, col, row, c, s)?;
            r[(row, col)] = F::zero();
        }
    }
    let mut r_out = DenseMatrix::<F>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            r_out[(i, j)] = r[(i, j)];
        }
    }
    // Q = G^T reduced to its first m columns.
    let q_out = DenseMatrix::from_fn(n, m, |i, j| g[(j, i)]);
    Ok(QrFactorization { q: q_out, r: r_out })
}

/// Classical Gram-Schmidt QR.
///
/// Returns the factorization together with the squared norms
/// `n_j = u_j^T u_j` of the unnormalized basis vectors; the federated
/// variant aggregates exactly these values, so the oracle exposes them.
///
/// Residual coefficients are formed as `(u_j^T a_i) / n_j` and R entries as
/// `(u_j^T a_i) / sqrt(n_j)`, one division per entry, matching the division
/// placement of the federated protocol so the two agree to rounding.
pub fn gram_schmidt_qr<F: Scalar>(
    a: &DenseMatrix<F>,
) -> Result<(QrFactorization<F>, Vec<F>), LinalgError> {
    let n = a.rows();
    let m = a.cols();
    if n < m {
        return Err(LinalgError::DimensionMismatch {
            left_rows: n,
            left_cols: m,
            right_rows: m,
            right_cols: m,
        });
    }
    let tol = rank_tolerance(a);
    let mut u: Vec<Vec<F>> = Vec::with_capacity(m);
    let mut norms: Vec<F> = Vec::with_capacity(m);

    for i in 0..m {
        let a_i = a.col(i);
        let mut u_i = a_i.clone();
        for j in 0..i {
            let num: F = u[j].iter().zip(&a_i).map(|(&x, &y)| x * y).sum();
            let coeff = num / norms[j];
            for (t, &uj) in u[j].iter().enumerate() {
                u_i[t] -= coeff * uj;
            }
        }
        let n_i: F = u_i.iter().map(|&v| v * v).sum();
        if n_i <= tol {
            return Err(LinalgError::RankDeficient { col: i });
        }
        u.push(u_i);
        norms.push(n_i);
    }

    let mut q = DenseMatrix::<F>::zeros(n, m);
    for j in 0..m {
        let inv = norms[j].sqrt().recip();
        for t in 0..n {
            q[(t, j)] = u[j][t] * inv;
        }
    }
    let mut r = DenseMatrix::<F>::zeros(m, m);
    for i in 0..m {
        let a_i = a.col(i);
        for j in 0..=i {
            let num: F = u[j].iter().zip(&a_i).map(|(&x, &y)| x * y).sum();
            r[(j, i)] = num / norms[j].sqrt();
        }
    }
    Ok((QrFactorization { q, r }, norms))
}

/// Flips signs so every diagonal entry of `r` is non-negative, negating the
/// matching column of `q` and row of `r` together. Lets factorizations from
/// different algorithms be compared entrywise.
pub fn normalize_qr_signs<F: Scalar>(qr: &mut QrFactorization<F>) {
    let m = qr.r.rows();
    for k in 0..m {
        if qr.r[(k, k)] < F::zero() {
            for j in 0..qr.r.cols() {
                qr.r[(k, j)] = -qr.r[(k, j)];
            }
            for i in 0..qr.q.rows() {
                qr.q[(i, k)] = -qr.q[(i, k)];
            }
        }
    }
}
