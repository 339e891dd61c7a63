use super::matrix::DenseMatrix;
use super::{LinalgError, Scalar};

/// Singular value decomposition `A = U diag(sigma) V^T` of a small square
/// matrix. Singular values are sorted descending; `u` and `v` are square
/// with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd<F> {
    pub u: DenseMatrix<F>,
    pub sigma: Vec<F>,
    pub v: DenseMatrix<F>,
}

const MAX_SWEEPS: usize = 30;

/// One-sided Jacobi SVD for small square matrices (intended for `d <= 64`;
/// the aggregation step that calls this works on `d x d` summaries, never on
/// raw data).
///
/// Columns of a working copy `W = A V` are orthogonalized pairwise by plane
/// rotations accumulated into `V`; at convergence `sigma_j = ||w_j||` and
/// `u_j = w_j / sigma_j`. Zero singular values get their `u` columns from an
/// orthonormal completion, so `U` is always a full basis.
pub fn small_svd<F: Scalar>(a: &DenseMatrix<F>) -> Result<Svd<F>, LinalgError> {
    let d = a.rows();
    if a.cols() != d {
        return Err(LinalgError::NotSquare {
            rows: d,
            cols: a.cols(),
        });
    }
    let mut w = a.clone();
    let mut v = DenseMatrix::<F>::identity(d);
    let threshold = F::from_f64(1e-14);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let mut alpha = F::zero();
                let mut beta = F::zero();
                let mut gamma = F::zero();
                for i in 0..d {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma.abs() <= threshold * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rutishauser's stable rotation.
                let zeta = (beta - alpha) / (F::from_f64(2.0) * gamma);
                let t = {
                    let s = if zeta < F::zero() { -F::one() } else { F::one() };
                    s / (zeta.abs() + (F::one() + zeta * zeta).sqrt())
                };
                let c = (F::one() + t * t).sqrt().recip();
                let s = c * t;
                for i in 0..d {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..d {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    let mut sigmas: Vec<F> = (0..d)
        .map(|j| (0..d).map(|i| w[(i, j)] * w[(i, j)]).sum::<F>().sqrt())
        .collect();
    order.sort_by(|&x, &y| sigmas[y].partial_cmp(&sigmas[x]).expect("finite norms"));

    let mut u = DenseMatrix::<F>::zeros(d, d);
    let mut v_out = DenseMatrix::<F>::zeros(d, d);
    let mut sigma_out = Vec::with_capacity(d);
    let zero_cut = F::from_f64(1e-300);
    for (slot, &j) in order.iter().enumerate() {
        let s = sigmas[j];
        sigma_out.push(s);
        for i in 0..d {
            v_out[(i, slot)] = v[(i, j)];
        }
        if s > zero_cut {
            for i in 0..d {
                u[(i, slot)] = w[(i, j)] / s;
            }
        }
    }
    sigmas.clear();

    // Fill the columns of U left empty by zero singular values with an
    // orthonormal completion, so U^T U = I regardless of rank.
    for slot in 0..d {
        let norm: F = (0..d).map(|i| u[(i, slot)] * u[(i, slot)]).sum::<F>().sqrt();
        if norm > F::from_f64(0.5) {
            continue;
        }
        for basis in 0..d {
            let mut cand = vec![F::zero(); d];
            cand[basis] = F::one();
            for k in 0..d {
                if k == slot {
                    continue;
                }
                let proj: F = (0..d).map(|i| u[(i, k)] * cand[i]).sum();
                for i in 0..d {
                    let delta = proj * u[(i, k)];
                    cand[i] -= delta;
                }
            }
            let cn: F = cand.iter().map(|&x| x * x).sum::<F>().sqrt();
            if cn > F::from_f64(0.5) {
                for i in 0..d {
                    u[(i, slot)] = cand[i] / cn;
                }
                break;
            }
        }
    }

    Ok(Svd {
        u,
        sigma: sigma_out,
        v: v_out,
    })
}
