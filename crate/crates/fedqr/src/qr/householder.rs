use crate::federation::{FedError, PartitionedDataset, Session};
use crate::linalg::LinalgError;
use crate::Matrix;

/// Output of [`fed_householder`].
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholderResult {
    /// Global m×m upper-triangular factor, broadcast in the final round.
    pub r: Matrix,
    /// Each client's working block after the last reflection: its rows of
    /// the implicitly stacked `[R; 0]`.
    pub blocks: Vec<Matrix>,
}

/// Federated Householder triangularization (R only).
///
/// Per column, four rounds: the global scale as a max of local maxima
/// (`hh/max`, plaintext by nature), the squared norm of the scaled column
/// (`hh/norm`, aggregated), the oracle step where every client uploads its
/// piece of the reflector vector and the aggregator publishes the outer
/// product's diagonal and first column plus the scaling factor
/// (`hh/u`, `hh/uut_diag`, `hh/uut_anchor`, `hh/beta`), and the reflection
/// itself via the aggregated row vector `uᵀW` (`hh/w`). A final round
/// assembles and broadcasts R from the finished rows (`hh/r`). Total
/// rounds: `4·steps + 1`.
///
/// The outer product is published as its diagonal plus first column rather
/// than the full n² matrix; that pair carries the same information (squared
/// entries and relative signs) at linear size. Even in smpc mode the
/// `hh/max` and `hh/u` exchanges stay in clear: no additive scheme computes
/// a maximum or an outer product, which is precisely why this prototype is
/// unsuitable for private deployment.
pub fn fed_householder(
    session: &mut Session,
    data: &PartitionedDataset,
) -> Result<HouseholderResult, FedError> {
    let s_count = data.client_count();
    if session.n_clients() != s_count {
        return Err(FedError::InputCount {
            expected: session.n_clients(),
            got: s_count,
        });
    }
    let n = data.total_rows();
    let m = data.cols();
    if m == 0 {
        return Err(FedError::Linalg(LinalgError::EmptyMatrix { rows: n, cols: m }));
    }
    if n < m {
        return Err(FedError::TallRequired { rows: n, cols: m });
    }

    // Row layout is public protocol metadata (each client knows which global
    // rows it holds); publishing it keeps the transcript self-describing.
    let mut layout = vec![n as f64, m as f64];
    layout.extend(data.offsets().iter().map(|&o| o as f64));
    session.aggregator_broadcast("hh/layout", layout);

    let mut blocks: Vec<Matrix> = data.blocks().to_vec();
    let offsets = data.offsets().to_vec();
    let steps = if n > m { m } else { m - 1 };

    for c in 0..steps {
        // Round 1: global infinity norm of the column, max of local maxima.
        let maxima: Vec<f64> = (0..s_count)
            .map(|s| {
                active(offsets[s], blocks[s].rows(), c)
                    .map(|r| blocks[s][(r, c)].abs())
                    .fold(0.0f64, f64::max)
            })
            .collect();
        let scale = session.aggregate_max("hh/max", &maxima)?;
        session.barrier();
        if scale == 0.0 {
            return Err(FedError::Linalg(LinalgError::ZeroColumn { col: c }));
        }

        // Round 2: squared norm of the scaled column.
        let scaled: Vec<Vec<f64>> = (0..s_count)
            .map(|s| {
                active(offsets[s], blocks[s].rows(), c)
                    .map(|r| blocks[s][(r, c)] / scale)
                    .collect()
            })
            .collect();
        let norm_parts: Vec<Vec<f64>> = scaled
            .iter()
            .map(|w| vec![w.iter().map(|x| x * x).sum()])
            .collect();
        let nu = session.aggregate_vectors("hh/norm", &norm_parts)?[0].sqrt();
        session.barrier();

        // Round 3, the oracle step: clients upload their reflector pieces;
        // the lead owner has folded in the +/- nu term that avoids
        // cancellation.
        let (lead_owner, _) = data.owner_of(c);
        let mut u_parts = scaled;
        let lead_sign = if u_parts[lead_owner][0] < 0.0 { -1.0 } else { 1.0 };
        u_parts[lead_owner][0] += lead_sign * nu;
        for (s, u) in u_parts.iter().enumerate() {
            session.send_to_aggregator("hh/u", s, u.clone());
        }
        let u_stacked: Vec<f64> = u_parts.iter().flatten().copied().collect();
        let utu: f64 = u_stacked.iter().map(|x| x * x).sum();
        let beta = 2.0 / utu;
        session.aggregator_broadcast(
            "hh/uut_diag",
            u_stacked.iter().map(|x| x * x).collect(),
        );
        session.aggregator_broadcast(
            "hh/uut_anchor",
            u_stacked.iter().map(|x| x * u_stacked[0]).collect(),
        );
        session.aggregator_broadcast("hh/beta", vec![beta]);
        session.barrier();

        // Round 4: the reflection. uᵀW restricted to the trailing columns
        // is a sum of per-client products, so this aggregation is additive.
        let w_parts: Vec<Vec<f64>> = (0..s_count)
            .map(|s| {
                let rows = active(offsets[s], blocks[s].rows(), c);
                (c..m)
                    .map(|j| {
                        rows.clone()
                            .zip(&u_parts[s])
                            .map(|(r, &ur)| ur * blocks[s][(r, j)])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let w = session.aggregate_vectors("hh/w", &w_parts)?;
        session.barrier();
        for s in 0..s_count {
            let rows = active(offsets[s], blocks[s].rows(), c);
            for (r, &ur) in rows.zip(&u_parts[s]) {
                for j in c..m {
                    blocks[s][(r, j)] -= beta * ur * w[j - c];
                }
            }
        }
    }

    // Final round: owners of the top m global rows upload them; the
    // aggregator assembles R, pinning the eliminated entries to exact zero,
    // and broadcasts it.
    let mut r = Matrix::zeros(m, m);
    for s in 0..s_count {
        let first = offsets[s];
        if first >= m {
            continue;
        }
        let last = (first + blocks[s].rows()).min(m);
        let rows: Vec<f64> = (0..last - first)
            .flat_map(|lr| blocks[s].row(lr).iter().copied())
            .collect();
        session.send_to_aggregator("hh/r", s, rows.clone());
        for (lr, global) in (first..last).enumerate() {
            for j in global..m {
                r[(global, j)] = blocks[s][(lr, j)];
            }
        }
    }
    let flat: Vec<f64> = r.data().to_vec();
    session.aggregator_broadcast("hh/r", flat);
    session.barrier();

    Ok(HouseholderResult { r, blocks })
}

/// Local indices of a block's rows whose global index is at least `c`.
fn active(offset: usize, rows: usize, c: usize) -> std::ops::Range<usize> {
    c.saturating_sub(offset).min(rows)..rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::AggregationMode;
    use crate::linalg::householder_qr;
    use crate::synth;

    fn run(
        a: &Matrix,
        sizes: &[usize],
        mode: AggregationMode,
    ) -> (HouseholderResult, crate::federation::Transcript, usize) {
        let data = PartitionedDataset::partition_rows(a, sizes).unwrap();
        let mut session = Session::new(mode, sizes.len(), 19);
        let result = fed_householder(&mut session, &data).unwrap();
        let (transcript, rounds) = session.finish();
        (result, transcript, rounds)
    }

    #[test]
    fn four_rounds_per_column_plus_assembly() {
        let a = synth::gaussian_matrix(30, 4, 2);
        let (_, _, rounds) = run(&a, &[15, 15], AggregationMode::Clear);
        assert_eq!(rounds, 4 * 4 + 1);

        // Square input skips the last column's reflection.
        let b = synth::gaussian_matrix(4, 4, 3);
        let (_, _, rounds) = run(&b, &[2, 2], AggregationMode::Clear);
        assert_eq!(rounds, 4 * 3 + 1);
    }

    #[test]
    fn identity_input_gives_signed_identity() {
        let a = Matrix::identity(5);
        let (res, _, _) = run(&a, &[3, 2], AggregationMode::Clear);
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (res.r[(i, j)].abs() - expect).abs() <= 1e-12,
                    "entry ({i},{j}) = {}",
                    res.r[(i, j)]
                );
            }
        }
    }

    #[test]
    fn matches_centralized_oracle_up_to_row_signs() {
        let a = synth::gaussian_matrix(100, 5, 41);
        let (res, _, _) = run(&a, &[50, 50], AggregationMode::Clear);
        let oracle = householder_qr(&a).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!(
                    (res.r[(i, j)].abs() - oracle.r[(i, j)].abs()).abs() <= 1e-10,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn blocks_stack_to_r_over_zeros() {
        let a = synth::gaussian_matrix(20, 3, 8);
        let (res, _, _) = run(&a, &[7, 13], AggregationMode::Clear);
        let stacked = Matrix::vstack(&res.blocks).unwrap();
        for i in 0..20 {
            for j in 0..3 {
                let expect = if i < 3 { res.r[(i, j)] } else { 0.0 };
                assert!((stacked[(i, j)] - expect).abs() <= 1e-9, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn smpc_mode_still_leaks_the_oracle_step() {
        let a = synth::gaussian_matrix(24, 3, 5);
        let (_, transcript, _) = run(&a, &[12, 12], AggregationMode::Smpc);
        let raw = transcript.aggregator_raw_labels();
        assert!(raw.contains("hh/u.raw"));
        assert!(raw.contains("hh/max.raw"));
        // The additive aggregations do go through shares.
        assert!(!raw.contains("hh/norm.raw"));
        assert!(!raw.contains("hh/w.raw"));
    }

    #[test]
    fn zero_column_is_rejected() {
        let mut a = synth::gaussian_matrix(10, 3, 6);
        for r in 0..10 {
            a[(r, 1)] = 0.0;
        }
        let data = PartitionedDataset::partition_rows(&a, &[5, 5]).unwrap();
        let mut session = Session::new(AggregationMode::Clear, 2, 1);
        assert_eq!(
            fed_householder(&mut session, &data).unwrap_err(),
            FedError::Linalg(LinalgError::ZeroColumn { col: 1 })
        );
    }
}
