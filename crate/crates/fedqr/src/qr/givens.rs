use std::collections::BTreeSet;

use crate::federation::{FedError, PartitionedDataset, Session};
use crate::linalg::{givens_params, LinalgError};
use crate::Matrix;

/// Ground truth for one cross-client rotation, kept by the simulation for
/// scoring reconstruction attacks. None of this is consulted by the attacks
/// themselves; they work from transcript views alone.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossRotation {
    pub col: usize,
    /// Global row indices of the rotated pair.
    pub pivot_row: usize,
    pub target_row: usize,
    pub pivot_owner: usize,
    pub target_owner: usize,
    pub cos: f64,
    pub sin: f64,
    /// Full rows as they were immediately before the rotation.
    pub pivot_row_before: Vec<f64>,
    pub target_row_before: Vec<f64>,
}

/// Output of [`fed_givens`].
#[derive(Debug, Clone, PartialEq)]
pub struct GivensResult {
    /// Global m×m upper-triangular factor, broadcast in the final round.
    pub r: Matrix,
    /// Each client's working block after the last rotation.
    pub blocks: Vec<Matrix>,
    /// Every cross-client rotation that was executed, in protocol order.
    pub rotations: Vec<CrossRotation>,
}

/// Federated Givens triangularization (R only).
///
/// Clients first zero everything reachable with their own rows (local
/// sweeps, no communication), then report the remaining sub-diagonal
/// nonzero positions (`gv/nz`). Every surviving pair spans two clients and
/// costs four rounds: the aggregator announces the pair (`gv/pair`), the two
/// owners upload the pivot-column values (`gv/xi`, `gv/xj`; this is the
/// oracle step, since no additive scheme can turn two private values into
/// rotation parameters), the aggregator returns cos and sin (`gv/cs`), and
/// the owners exchange sin-scaled full rows through the aggregator
/// (`gv/srow`) and rotate. A final round assembles and broadcasts R (`gv/r`).
///
/// Pairs are processed in (column, row) lexicographic order with the pivot
/// always the diagonal row, so transcripts are deterministic. Fill-in from
/// a rotation is tracked conservatively by the aggregator: both touched rows
/// count as potentially dense from the eliminated column on. A structural
/// nonzero that turns out to be exactly zero yields a sin of 0; the
/// rotation is still exchanged, and reconstruction attacks must skip it
/// because no information flows.
///
/// With a single client the whole factorization is local: zero rounds.
pub fn fed_givens(
    session: &mut Session,
    data: &PartitionedDataset,
) -> Result<GivensResult, FedError> {
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

    let mut blocks: Vec<Matrix> = data.blocks().to_vec();
    for block in &mut blocks {
        local_sweep(block);
    }

    let mut rotations = Vec::new();

    if s_count > 1 {
        // Surviving sub-diagonal structure, reported once.
        let mut subdiag: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (s, block) in blocks.iter().enumerate() {
            let offset = data.offsets()[s];
            let mut report = Vec::new();
            for lr in 0..block.rows() {
                for j in 0..m.min(offset + lr) {
                    if block[(lr, j)] != 0.0 {
                        subdiag.insert((offset + lr, j));
                        report.push((offset + lr) as f64);
                        report.push(j as f64);
                    }
                }
            }
            session.send_to_aggregator("gv/nz", s, report);
        }
        session.barrier();

        // Aggregator-side fill-in bookkeeping: row r may be nonzero from
        // column dense_from[r] on after it joined a rotation there.
        let mut dense_from = vec![usize::MAX; n];
        for c in 0..m {
            let targets: Vec<usize> = (c + 1..n)
                .filter(|&j| subdiag.contains(&(j, c)) || dense_from[j] <= c)
                .collect();
            for j in targets {
                let (po, pl) = data.owner_of(c);
                let (to, tl) = data.owner_of(j);
                if po == to {
                    // Both rows live at one client: silent local rotation.
                    rotate_local(&mut blocks[po], pl, tl, c);
                } else {
                    let rot =
                        cross_rotate(session, &mut blocks, c, j, (po, pl), (to, tl))?;
                    rotations.push(rot);
                }
                dense_from[c] = dense_from[c].min(c);
                dense_from[j] = dense_from[j].min(c);
            }
        }
    }

    // Assemble R from the finished top rows and broadcast it. A lone client
    // already holds everything, so no exchange happens.
    let mut r = Matrix::zeros(m, m);
    for s in 0..s_count {
        let first = data.offsets()[s];
        if first >= m {
            continue;
        }
        let last = (first + blocks[s].rows()).min(m);
        for (lr, global) in (first..last).enumerate() {
            for j in global..m {
                r[(global, j)] = blocks[s][(lr, j)];
            }
        }
        if s_count > 1 {
            let rows: Vec<f64> = (0..last - first)
                .flat_map(|lr| blocks[s].row(lr).iter().copied())
                .collect();
            session.send_to_aggregator("gv/r", s, rows);
        }
    }
    if s_count > 1 {
        session.aggregator_broadcast("gv/r", r.data().to_vec());
        session.barrier();
    }

    Ok(GivensResult {
        r,
        blocks,
        rotations,
    })
}

/// Local pre-sweep: triangularize a block using only its own rows.
fn local_sweep(block: &mut Matrix) {
    let steps = block.rows().min(block.cols());
    for c in 0..steps {
        for j in c + 1..block.rows() {
            if block[(j, c)] != 0.0 {
                rotate_local(block, c, j, c);
            }
        }
    }
}

/// Applies one rotation to two rows of the same block, zeroing (target, col).
fn rotate_local(block: &mut Matrix, pivot: usize, target: usize, col: usize) {
    let (cos, sin) = givens_params(block[(pivot, col)], block[(target, col)]);
    for k in 0..block.cols() {
        let p = block[(pivot, k)];
        let t = block[(target, k)];
        block[(pivot, k)] = cos * p + sin * t;
        block[(target, k)] = cos * t - sin * p;
    }
    block[(target, col)] = 0.0;
}

/// The four-round cross-client rotation.
fn cross_rotate(
    session: &mut Session,
    blocks: &mut [Matrix],
    c: usize,
    j: usize,
    (po, pl): (usize, usize),
    (to, tl): (usize, usize),
) -> Result<CrossRotation, FedError> {
    let pivot_before = blocks[po].row(pl).to_vec();
    let target_before = blocks[to].row(tl).to_vec();

    // Round 1: announce the pair to its two owners.
    session.aggregator_send("gv/pair", po, vec![c as f64, j as f64]);
    session.aggregator_send("gv/pair", to, vec![c as f64, j as f64]);
    session.barrier();

    // Round 2, the oracle step: both pivot-column values in clear.
    let x_p = pivot_before[c];
    let x_t = target_before[c];
    session.send_to_aggregator("gv/xi", po, vec![x_p]);
    session.send_to_aggregator("gv/xj", to, vec![x_t]);
    session.barrier();

    // Round 3: rotation parameters back to the owners.
    let (cos, sin) = givens_params(x_p, x_t);
    session.aggregator_send("gv/cs", po, vec![cos, sin]);
    session.aggregator_send("gv/cs", to, vec![cos, sin]);
    session.barrier();

    // Round 4: sin-scaled full rows through the aggregator, then rotate.
    let scaled_pivot: Vec<f64> = pivot_before.iter().map(|&v| sin * v).collect();
    let scaled_target: Vec<f64> = target_before.iter().map(|&v| sin * v).collect();
    session.send_to_aggregator("gv/srow", po, scaled_pivot.clone());
    session.send_to_aggregator("gv/srow", to, scaled_target.clone());
    session.aggregator_send("gv/srow", po, scaled_target.clone());
    session.aggregator_send("gv/srow", to, scaled_pivot.clone());
    for (k, &st) in scaled_target.iter().enumerate() {
        blocks[po][(pl, k)] = cos * pivot_before[k] + st;
    }
    for (k, &sp) in scaled_pivot.iter().enumerate() {
        blocks[to][(tl, k)] = cos * target_before[k] - sp;
    }
    blocks[to][(tl, c)] = 0.0;
    session.barrier();

    Ok(CrossRotation {
        col: c,
        pivot_row: c,
        target_row: j,
        pivot_owner: po,
        target_owner: to,
        cos,
        sin,
        pivot_row_before: pivot_before,
        target_row_before: target_before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::AggregationMode;
    use crate::linalg::givens_qr;
    use crate::synth;

    fn run(
        a: &Matrix,
        sizes: &[usize],
    ) -> (GivensResult, crate::federation::Transcript, usize) {
        let data = PartitionedDataset::partition_rows(a, sizes).unwrap();
        let mut session = Session::new(AggregationMode::Clear, sizes.len(), 23);
        let result = fed_givens(&mut session, &data).unwrap();
        let (transcript, rounds) = session.finish();
        (result, transcript, rounds)
    }

    #[test]
    fn hand_case_single_cross_rotation() {
        let a = Matrix::from_rows(2, 1, vec![3.0, 4.0]).unwrap();
        let (res, _, rounds) = run(&a, &[1, 1]);
        assert_eq!(res.rotations.len(), 1);
        let rot = &res.rotations[0];
        assert!((rot.cos - 0.6).abs() <= 1e-15);
        assert!((rot.sin - 0.8).abs() <= 1e-15);
        assert!((res.r[(0, 0)] - 5.0).abs() <= 1e-12);
        // Structure report, four rotation rounds, assembly.
        assert_eq!(rounds, 6);
    }

    #[test]
    fn single_client_is_fully_local() {
        let a = synth::gaussian_matrix(12, 3, 4);
        let (res, transcript, rounds) = run(&a, &[12]);
        assert_eq!(rounds, 0);
        assert!(transcript.is_empty());
        assert!(res.rotations.is_empty());
        let oracle = givens_qr(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((res.r[(i, j)].abs() - oracle.r[(i, j)].abs()).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn matches_centralized_oracle_up_to_row_signs() {
        let a = synth::gaussian_matrix(40, 4, 31);
        let (res, _, _) = run(&a, &[20, 20]);
        let oracle = givens_qr(&a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (res.r[(i, j)].abs() - oracle.r[(i, j)].abs()).abs() <= 1e-10,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn identity_needs_no_cross_rotations() {
        let a = Matrix::identity(4);
        let (res, _, rounds) = run(&a, &[2, 2]);
        assert!(res.rotations.is_empty());
        // Structure report and assembly still happen.
        assert_eq!(rounds, 2);
        assert!(res.r.sub(&Matrix::identity(4)).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn blocks_stack_to_r_over_zeros() {
        let a = synth::gaussian_matrix(15, 3, 9);
        let (res, _, _) = run(&a, &[5, 5, 5]);
        let stacked = Matrix::vstack(&res.blocks).unwrap();
        for i in 0..15 {
            for j in 0..3 {
                let expect = if i < 3 { res.r[(i, j)] } else { 0.0 };
                assert!((stacked[(i, j)] - expect).abs() <= 1e-9, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn three_clients_expected_rotation_owners() {
        let a = synth::gaussian_matrix(9, 2, 14);
        let (res, _, _) = run(&a, &[3, 3, 3]);
        // Pivots for both columns sit in client 0, so every cross rotation
        // pairs client 0 with a later client.
        assert!(!res.rotations.is_empty());
        for rot in &res.rotations {
            assert_eq!(rot.pivot_owner, 0);
            assert!(rot.target_owner > 0);
            assert_eq!(rot.pivot_row, rot.col);
            assert!(rot.target_row > rot.col);
        }
    }

    #[test]
    fn rotation_count_follows_fill_in() {
        // 2 clients, both blocks dense 5x3: after local sweeps the second
        // client holds a 3x3 triangle. Column 0 pairs once, and fill-in
        // makes columns 1 and 2 pair with every previously touched row.
        let a = synth::gaussian_matrix(10, 3, 77);
        let (res, _, _) = run(&a, &[5, 5]);
        assert_eq!(res.rotations.len(), 1 + 2 + 3);
    }
}
