use crate::federation::{FedError, PartitionedDataset, Session};
use crate::linalg::LinalgError;
use crate::Matrix;

/// Output of [`fed_gram_schmidt`]: per-client orthonormal blocks plus the
/// global quantities every party ends up holding.
#[derive(Debug, Clone, PartialEq)]
pub struct FedQrResult {
    /// Client `s`'s rows of Q; stacking them in client order gives the
    /// orthonormal factor of the stacked data.
    pub q_blocks: Vec<Matrix>,
    /// Global upper-triangular factor, identical at every party.
    pub r: Matrix,
    /// Aggregated squared norms `n_1..n_d` of the unnormalized orthogonal
    /// directions; the values broadcast under `gs/norm`.
    pub u_norms: Vec<f64>,
    /// Aggregated residual coefficients: entry `(j, i)` with `j < i` is the
    /// projection coefficient of column `i` onto direction `j` (the values
    /// broadcast under `gs/resid`). Strictly upper triangular.
    pub residual_table: Matrix,
}

/// Federated Gram-Schmidt QR with simultaneous computation of R.
///
/// Each column is processed in two aggregation rounds. With the norms
/// `n_1..n_{i-1}` of earlier directions already global, clients divide
/// locally and send, in a single round, their contributions to R column
/// `i-1` (label `gs/rcol`) and the projection residuals of column `i`
/// (label `gs/resid`); after orthogonalizing locally they aggregate the new
/// direction's squared norm (label `gs/norm`) in a second round. The
/// per-client data, orthogonal directions and Q blocks never leave the
/// clients, so the aggregator observes exactly the three label families and
/// nothing else. Total rounds: `2·d`.
///
/// Deficiency is judged on the aggregated norms against the largest norm
/// seen so far, making the check independent of the data's scale.
pub fn fed_gram_schmidt(
    session: &mut Session,
    data: &PartitionedDataset,
) -> Result<FedQrResult, FedError> {
    let s_count = data.client_count();
    if session.n_clients() != s_count {
        return Err(FedError::InputCount {
            expected: session.n_clients(),
            got: s_count,
        });
    }
    let d = data.cols();
    let n = data.total_rows();
    if d == 0 {
        return Err(FedError::Linalg(LinalgError::EmptyMatrix { rows: n, cols: d }));
    }
    if n < d {
        return Err(FedError::TallRequired { rows: n, cols: d });
    }

    // Orthogonal directions u^s, strictly client-local state.
    let mut u: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(d); s_count];
    let mut u_norms: Vec<f64> = Vec::with_capacity(d);
    let mut r = Matrix::zeros(d, d);
    let mut residual_table = Matrix::zeros(d, d);

    // The first direction is the first column itself; only the squared norm
    // is exchanged.
    for (s, cols) in u.iter_mut().enumerate() {
        cols.push(data.block(s).col(0));
    }
    aggregate_norm(session, &u, &mut u_norms, 0)?;

    for i in 1..d {
        // One round carries both parameter families: the finished R column
        // i-1 and the residuals needed to orthogonalize column i. All
        // divisors are norms aggregated in earlier rounds.
        let rcol_parts: Vec<Vec<f64>> = (0..s_count)
            .map(|s| {
                let a_prev = data.block(s).col(i - 1);
                (0..i)
                    .map(|l| local_dot(&u[s][l], &a_prev) / u_norms[l].sqrt())
                    .collect()
            })
            .collect();
        let resid_parts: Vec<Vec<f64>> = (0..s_count)
            .map(|s| {
                let a_cur = data.block(s).col(i);
                (0..i)
                    .map(|j| local_dot(&u[s][j], &a_cur) / u_norms[j])
                    .collect()
            })
            .collect();
        let rcol = session.aggregate_vectors("gs/rcol", &rcol_parts)?;
        let resid = session.aggregate_vectors("gs/resid", &resid_parts)?;
        session.barrier();
        for l in 0..i {
            r[(l, i - 1)] = rcol[l];
            residual_table[(l, i)] = resid[l];
        }

        // Orthogonalize locally against every earlier direction, using the
        // broadcast coefficients.
        for (s, cols) in u.iter_mut().enumerate() {
            let mut next = data.block(s).col(i);
            for (j, coeff) in resid.iter().enumerate() {
                for (x, &uj) in next.iter_mut().zip(&cols[j]) {
                    *x -= coeff * uj;
                }
            }
            cols.push(next);
        }
        aggregate_norm(session, &u, &mut u_norms, i)?;
    }

    // Last column of R, diagonal included; n_d became global in the final
    // loop round.
    let rcol_parts: Vec<Vec<f64>> = (0..s_count)
        .map(|s| {
            let a_last = data.block(s).col(d - 1);
            (0..d)
                .map(|l| local_dot(&u[s][l], &a_last) / u_norms[l].sqrt())
                .collect()
        })
        .collect();
    let rcol = session.aggregate_vectors("gs/rcol", &rcol_parts)?;
    session.barrier();
    for l in 0..d {
        r[(l, d - 1)] = rcol[l];
    }

    let q_blocks: Vec<Matrix> = u
        .iter()
        .map(|cols| {
            let rows = cols[0].len();
            Matrix::from_fn(rows, d, |t, l| cols[l][t] / u_norms[l].sqrt())
        })
        .collect();

    Ok(FedQrResult {
        q_blocks,
        r,
        u_norms,
        residual_table,
    })
}

/// One aggregation round for the squared norm of direction `i`, with the
/// scale-free deficiency check on the global value.
fn aggregate_norm(
    session: &mut Session,
    u: &[Vec<Vec<f64>>],
    u_norms: &mut Vec<f64>,
    i: usize,
) -> Result<(), FedError> {
    let parts: Vec<Vec<f64>> = u
        .iter()
        .map(|cols| vec![local_dot(&cols[i], &cols[i])])
        .collect();
    let n_i = session.aggregate_vectors("gs/norm", &parts)?[0];
    session.barrier();
    let scale = u_norms.iter().fold(1.0f64, |m, &v| m.max(v)).max(n_i);
    if n_i <= 1e-24 * scale {
        return Err(FedError::Linalg(LinalgError::RankDeficient { col: i }));
    }
    u_norms.push(n_i);
    Ok(())
}

fn local_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::AggregationMode;
    use crate::linalg::gram_schmidt_qr;
    use crate::synth;

    fn run(
        a: &Matrix,
        sizes: &[usize],
        mode: AggregationMode,
        seed: u64,
    ) -> (FedQrResult, crate::federation::Transcript, usize) {
        let data = PartitionedDataset::partition_rows(a, sizes).unwrap();
        let mut session = Session::new(mode, sizes.len(), seed);
        let result = fed_gram_schmidt(&mut session, &data).unwrap();
        let (transcript, rounds) = session.finish();
        (result, transcript, rounds)
    }

    #[test]
    fn identity_input_reproduces_identity() {
        let a = Matrix::identity(4);
        for mode in [AggregationMode::Clear, AggregationMode::Smpc] {
            let (res, _, rounds) = run(&a, &[2, 2], mode, 3);
            assert_eq!(rounds, 8);
            let q = Matrix::vstack(&res.q_blocks).unwrap();
            assert!(q.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-12);
            assert!(res.r.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-12);
            assert_eq!(res.u_norms, vec![1.0; 4]);
        }
    }

    #[test]
    fn matches_centralized_oracle() {
        let a = synth::gaussian_matrix(200, 10, 42);
        let (res, _, _) = run(&a, &synth::even_sizes(200, 5), AggregationMode::Clear, 7);
        let (oracle, _) = gram_schmidt_qr(&a).unwrap();
        assert!(res.r.sub(&oracle.r).unwrap().frobenius_norm() <= 1e-10);
        let q = Matrix::vstack(&res.q_blocks).unwrap();
        assert!(q.sub(&oracle.q).unwrap().frobenius_norm() <= 1e-10);
    }

    #[test]
    fn factorization_reproduces_input() {
        let a = synth::gaussian_matrix(60, 6, 9);
        let (res, _, _) = run(&a, &[10, 25, 25], AggregationMode::Clear, 1);
        let q = Matrix::vstack(&res.q_blocks).unwrap();
        let qr = q.matmul(&res.r).unwrap();
        let rel = qr.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(rel <= 1e-12, "relative residual {rel}");

        // Orthonormality of the stacked Q.
        let qtq = q.transpose().matmul(&q).unwrap();
        assert!(qtq.sub(&Matrix::identity(6)).unwrap().max_abs() <= 1e-10);

        // R is exactly zero below the diagonal.
        for i in 0..6 {
            for j in 0..i {
                assert_eq!(res.r[(i, j)], 0.0);
            }
        }
        assert!(res.u_norms.iter().all(|&n| n > 0.0));
    }

    #[test]
    fn single_column_works() {
        let a = Matrix::from_rows(3, 1, vec![3.0, 0.0, 4.0]).unwrap();
        let (res, _, rounds) = run(&a, &[2, 1], AggregationMode::Clear, 5);
        assert_eq!(rounds, 2);
        assert!((res.r[(0, 0)] - 5.0).abs() <= 1e-12);
        assert_eq!(res.u_norms, vec![25.0]);
        let q = Matrix::vstack(&res.q_blocks).unwrap();
        assert!((q[(0, 0)] - 0.6).abs() <= 1e-12);
        assert!((q[(2, 0)] - 0.8).abs() <= 1e-12);
    }

    #[test]
    fn smpc_census_is_three_labels_and_no_raw() {
        let a = synth::gaussian_matrix(40, 4, 11);
        let (_, transcript, rounds) = run(&a, &[20, 20], AggregationMode::Smpc, 13);
        assert_eq!(rounds, 8);
        let census: Vec<String> = transcript.aggregator_label_census().into_iter().collect();
        assert_eq!(census, vec!["gs/norm", "gs/rcol", "gs/resid"]);
        assert!(transcript.aggregator_raw_labels().is_empty());
    }

    #[test]
    fn smpc_result_close_to_clear_result() {
        let a = synth::gaussian_matrix(50, 5, 21);
        let sizes = [25, 25];
        let (clear, _, _) = run(&a, &sizes, AggregationMode::Clear, 2);
        let (smpc, _, _) = run(&a, &sizes, AggregationMode::Smpc, 2);
        let dr = clear.r.sub(&smpc.r).unwrap().max_abs();
        assert!(dr <= 5.0 * 2f64.powi(-30), "R quantization gap {dr}");
    }

    #[test]
    fn partition_invariance() {
        let a = synth::gaussian_matrix(80, 6, 33);
        let (one, _, _) = run(&a, &[80], AggregationMode::Clear, 1);
        let (five, _, _) = run(&a, &synth::even_sizes(80, 5), AggregationMode::Clear, 1);
        let dq = Matrix::vstack(&one.q_blocks)
            .unwrap()
            .sub(&Matrix::vstack(&five.q_blocks).unwrap())
            .unwrap()
            .max_abs();
        let dr = one.r.sub(&five.r).unwrap().max_abs();
        assert!(dq <= 1e-12 && dr <= 1e-12, "dq {dq}, dr {dr}");
    }

    #[test]
    fn dependent_columns_are_rank_deficient() {
        let mut a = synth::gaussian_matrix(20, 3, 17);
        for t in 0..20 {
            a[(t, 2)] = 2.0 * a[(t, 0)];
        }
        let data = PartitionedDataset::partition_rows(&a, &[10, 10]).unwrap();
        let mut session = Session::new(AggregationMode::Clear, 2, 1);
        assert_eq!(
            fed_gram_schmidt(&mut session, &data).unwrap_err(),
            FedError::Linalg(LinalgError::RankDeficient { col: 2 })
        );
    }

    #[test]
    fn wide_matrix_is_rejected() {
        let a = synth::gaussian_matrix(3, 5, 1);
        let data = PartitionedDataset::partition_rows(&a, &[3]).unwrap();
        let mut session = Session::new(AggregationMode::Clear, 1, 1);
        assert_eq!(
            fed_gram_schmidt(&mut session, &data).unwrap_err(),
            FedError::TallRequired { rows: 3, cols: 5 }
        );
    }

    #[test]
    fn residual_table_matches_normal_equations() {
        // The residual coefficient (j, i) is the projection of column i on
        // direction j: u_j . a_i / n_j, computable from the oracle's Q and R.
        let a = synth::gaussian_matrix(30, 4, 55);
        let (res, _, _) = run(&a, &[15, 15], AggregationMode::Clear, 3);
        let (oracle, u_norms) = gram_schmidt_qr(&a).unwrap();
        for i in 1..4 {
            for j in 0..i {
                // q_j . a_i = r[j, i]; u_j = q_j * sqrt(n_j).
                let expect = oracle.r[(j, i)] / u_norms[j].sqrt();
                assert!(
                    (res.residual_table[(j, i)] - expect).abs() <= 1e-10,
                    "coefficient ({j},{i})"
                );
            }
        }
    }
}
