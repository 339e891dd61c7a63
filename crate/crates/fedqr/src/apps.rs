//! Analytics built on top of the federated QR core: column standardization,
//! principal components, and ordinary least squares.
//!
//! All three run over a [`Session`] so their traffic lands in the same
//! transcript as the factorization itself, keeping the label census
//! meaningful end to end.

use crate::federation::{FedError, PartitionedDataset, Session};
use crate::linalg::{back_substitute, back_substitute_transpose, gram_schmidt_qr, small_svd};
use crate::qr::fed_gram_schmidt;
use crate::stats::two_sided_p_value;
use crate::Matrix;

/// Variance this far below the column's mean square (floored at one) is
/// treated as zero; standardizing such a column would divide by noise.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Standardizes every column to zero mean and unit sample variance using a
/// single aggregation round.
///
/// Clients send per-column sums (`ct/sum`) and sums of squares (`ct/sumsq`);
/// the broadcast totals give mean and variance with the usual `n - 1`
/// denominator, and each client rescales its own rows locally. Applying the
/// protocol to already standardized data reproduces it exactly, up to
/// rounding.
pub fn fed_center(
    session: &mut Session,
    data: &PartitionedDataset,
) -> Result<PartitionedDataset, FedError> {
    let n = data.total_rows();
    if n < 2 {
        return Err(FedError::TooFewRows { needed: 2, got: n });
    }
    let m = data.cols();

    let mut sum_parts = Vec::with_capacity(data.client_count());
    let mut sumsq_parts = Vec::with_capacity(data.client_count());
    for block in data.blocks() {
        let mut sums = vec![0.0; m];
        let mut sumsqs = vec![0.0; m];
        for i in 0..block.rows() {
            for j in 0..m {
                let x = block[(i, j)];
                sums[j] += x;
                sumsqs[j] += x * x;
            }
        }
        sum_parts.push(sums);
        sumsq_parts.push(sumsqs);
    }
    let sums = session.aggregate_vectors("ct/sum", &sum_parts)?;
    let sumsqs = session.aggregate_vectors("ct/sumsq", &sumsq_parts)?;
    session.barrier();

    let nf = n as f64;
    let mut means = vec![0.0; m];
    let mut scales = vec![0.0; m];
    for j in 0..m {
        means[j] = sums[j] / nf;
        let var = (sumsqs[j] - nf * means[j] * means[j]) / (nf - 1.0);
        if var <= VARIANCE_FLOOR * (sumsqs[j] / nf).max(1.0) {
            return Err(FedError::ZeroVariance { col: j });
        }
        scales[j] = var.sqrt();
    }

    let blocks = data
        .blocks()
        .iter()
        .map(|block| {
            Matrix::from_fn(block.rows(), m, |i, j| (block[(i, j)] - means[j]) / scales[j])
        })
        .collect();
    PartitionedDataset::from_blocks(blocks)
}

/// Output of [`fed_pca`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcaReport {
    /// Client `s`'s rows of the data projected onto the principal directions,
    /// `A^s V`. Stacked in client order this equals `U Sigma` of the truncated
    /// SVD, so `stack(u_blocks) * v^T` reconstructs the stacked data when all
    /// components are kept.
    pub u_blocks: Vec<Matrix>,
    /// Principal directions as columns, `m x k`.
    pub v: Matrix,
    /// Singular values of the stacked data, non-increasing, length `k`.
    pub sigma: Vec<f64>,
}

/// Federated PCA through local QR compression.
///
/// Each client reduces its block to the local triangular factor `R^s`, whose
/// Gram matrix equals that of the block. The `R^s` are orthogonalized with
/// [`fed_gram_schmidt`] as if they were data, and the resulting global
/// triangle feeds a deterministic SVD that every party evaluates
/// identically. Only the factorization's own labels hit the wire, so the
/// round count is that of the inner QR: `2 m`.
///
/// Requires every local block to have at least `m` rows and full column
/// rank; the compression step fails otherwise.
pub fn fed_pca(
    session: &mut Session,
    data: &PartitionedDataset,
    k: usize,
) -> Result<PcaReport, FedError> {
    let m = data.cols();
    if k == 0 || k > m {
        return Err(FedError::ComponentsOutOfRange { k, max: m });
    }

    let mut r_blocks = Vec::with_capacity(data.client_count());
    for block in data.blocks() {
        let (qr, _) = gram_schmidt_qr(block)?;
        r_blocks.push(qr.r);
    }
    let compressed = PartitionedDataset::from_blocks(r_blocks)?;
    let fed = fed_gram_schmidt(session, &compressed)?;

    // The global triangle satisfies R~^T R~ = A^T A, so its right singular
    // vectors are the principal directions of the stacked data.
    let svd = small_svd(&fed.r)?;
    let v = Matrix::from_fn(m, k, |i, j| svd.v[(i, j)]);
    let sigma = svd.sigma[..k].to_vec();

    let mut u_blocks = Vec::with_capacity(data.client_count());
    for block in data.blocks() {
        u_blocks.push(block.matmul(&v)?);
    }
    Ok(PcaReport { u_blocks, v, sigma })
}

/// Gram matrix `R^T R` of the data underlying a triangular factor.
///
/// For the `R` of any QR factorization of `A` this equals `A^T A`, which is
/// the scatter matrix of the data; divided by `n - 1` it is the covariance
/// of centered data. The parties can evaluate it from the public `R` alone.
pub fn covariance_from_r(r: &Matrix) -> Matrix {
    r.transpose()
        .matmul(r)
        .expect("R^T R dimensions agree for any matrix")
}

/// Output of [`fed_linreg`]: the usual OLS summary, identical at every
/// party.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    /// Fitted coefficients in design-column order (intercept first when one
    /// was requested).
    pub coefficients: Vec<f64>,
    /// Standard errors, `sqrt(sigma^2 * diag((R^T R)^-1))`.
    pub std_errors: Vec<f64>,
    /// `coefficients / std_errors`, elementwise.
    pub t_stats: Vec<f64>,
    /// Two-sided p-values of the t statistics at `dof` degrees of freedom.
    pub p_values: Vec<f64>,
    /// `mss / (mss + rss)`.
    pub r_squared: f64,
    /// Residual sum of squares.
    pub rss: f64,
    /// Model sum of squares, the squared norm of the fitted values.
    pub mss: f64,
    /// `n - features - 1`, counting the original feature columns whether or
    /// not an intercept was added.
    pub dof: usize,
}

/// Federated ordinary least squares through the QR of the design matrix.
///
/// After [`fed_gram_schmidt`] on the (optionally intercept-extended) design,
/// clients aggregate `Q^T b` (`lr/qtb`), the aggregator back-substitutes and
/// broadcasts the coefficients (`lr/coef`), and a final round aggregates the
/// residual and model sums of squares (`lr/rss`, `lr/mss`). Standard errors
/// come from `(R^T R)^-1`, computed from the public triangle by every
/// party. Total rounds: `2 d + 3` for `d` design columns.
pub fn fed_linreg(
    session: &mut Session,
    data: &PartitionedDataset,
    responses: &[Vec<f64>],
    intercept: bool,
) -> Result<RegressionReport, FedError> {
    let s_count = data.client_count();
    if responses.len() != s_count {
        return Err(FedError::InputCount {
            expected: s_count,
            got: responses.len(),
        });
    }
    for (s, (block, b)) in data.blocks().iter().zip(responses).enumerate() {
        if b.len() != block.rows() {
            return Err(FedError::ResponseMismatch {
                client: s,
                expected: block.rows(),
                got: b.len(),
            });
        }
    }
    let n = data.total_rows();
    let features = data.cols();
    if n <= features + 1 {
        return Err(FedError::DofExhausted { rows: n, features });
    }

    let extended;
    let design: &PartitionedDataset = if intercept {
        let blocks = data
            .blocks()
            .iter()
            .map(|block| {
                Matrix::from_fn(block.rows(), block.cols() + 1, |i, j| {
                    if j == 0 {
                        1.0
                    } else {
                        block[(i, j - 1)]
                    }
                })
            })
            .collect();
        extended = PartitionedDataset::from_blocks(blocks)?;
        &extended
    } else {
        data
    };
    let d = design.cols();

    let fed = fed_gram_schmidt(session, design)?;

    let qtb_parts: Vec<Vec<f64>> = fed
        .q_blocks
        .iter()
        .zip(responses)
        .map(|(q, b)| {
            (0..d)
                .map(|j| (0..q.rows()).map(|i| q[(i, j)] * b[i]).sum())
                .collect()
        })
        .collect();
    let qtb = session.aggregate_vectors("lr/qtb", &qtb_parts)?;
    session.barrier();

    let x = back_substitute(&fed.r, &qtb)?;
    session.aggregator_broadcast("lr/coef", x.clone());
    session.barrier();

    let mut rss_parts = Vec::with_capacity(s_count);
    let mut mss_parts = Vec::with_capacity(s_count);
    for (block, b) in design.blocks().iter().zip(responses) {
        let fitted = block.mat_vec(&x)?;
        let rss: f64 = fitted.iter().zip(b).map(|(f, y)| (f - y) * (f - y)).sum();
        let mss: f64 = fitted.iter().map(|f| f * f).sum();
        rss_parts.push(vec![rss]);
        mss_parts.push(vec![mss]);
    }
    let rss = session.aggregate_vectors("lr/rss", &rss_parts)?[0];
    let mss = session.aggregate_vectors("lr/mss", &mss_parts)?[0];
    session.barrier();

    let dof = n - features - 1;
    let sigma2 = rss / dof as f64;

    // Column i of (R^T R)^-1 solves R^T R z = e_i, split into two triangular
    // solves against the public R.
    let mut cov_diag = vec![0.0; d];
    for (i, slot) in cov_diag.iter_mut().enumerate() {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let w = back_substitute_transpose(&fed.r, &e)?;
        let z = back_substitute(&fed.r, &w)?;
        *slot = z[i];
    }

    let std_errors: Vec<f64> = cov_diag.iter().map(|c| (sigma2 * c).sqrt()).collect();
    let t_stats: Vec<f64> = x
        .iter()
        .zip(&std_errors)
        .map(|(xi, se)| xi / se)
        .collect();
    let p_values: Vec<f64> = t_stats
        .iter()
        .map(|t| two_sided_p_value(*t, dof as f64))
        .collect();
    let r_squared = mss / (mss + rss);

    Ok(RegressionReport {
        coefficients: x,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        rss,
        mss,
        dof,
    })
}
