//! Reconstruction attacks against recorded protocol transcripts.
//!
//! Each attack replays what one curious party can compute from its own view
//! of a finished run: [`attack_householder`] rebuilds every other client's
//! input from the reflection-vector exchange, [`attack_givens`] recovers the
//! peer row of every rotation the attacker joined, and
//! [`attack_triangular_cascade`] unwinds the Gram-Schmidt aggregates when the
//! inputs are stacked upper-triangular blocks. Reconstruction consumes only
//! the attacker's transcript view; the true values are passed in solely to
//! score the result.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::federation::{
    AggregationMode, PartitionedDataset, Payload, Principal, Transcript, TranscriptEntry,
};
use crate::qr::CrossRotation;
use crate::smpc::{FieldElement, FieldParams};
use crate::Matrix;

/// Outcome of one reconstruction, scored elementwise against the truth.
///
/// `reference` is never consulted while reconstructing; it exists so the
/// report can quantify how close the attacker got.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    /// The party (or parties) whose data was reconstructed.
    pub target: String,
    pub reconstructed: Matrix,
    pub reference: Matrix,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

impl AttackReport {
    fn new(target: String, reconstructed: Matrix, reference: Matrix) -> Self {
        assert_eq!(reconstructed.rows(), reference.rows());
        assert_eq!(reconstructed.cols(), reference.cols());
        let count = reconstructed.data().len();
        let mut max = 0.0f64;
        let mut sum = 0.0f64;
        for (a, b) in reconstructed.data().iter().zip(reference.data()) {
            let diff = (a - b).abs();
            max = max.max(diff);
            sum += diff;
        }
        let mean = if count == 0 { 0.0 } else { sum / count as f64 };
        AttackReport {
            target,
            reconstructed,
            reference,
            max_abs_error: max,
            mean_abs_error: mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("transcript is missing required entries for label {label:?}")]
    MissingTranscriptLabel { label: String },
    #[error("attack preconditions unmet: {reason}")]
    WrongMode { reason: String },
    #[error("every rotation visible to the attacker has sin = 0, nothing flows")]
    ZeroSineParameter,
    #[error("attacker's first active element is zero in column {column}, no sign anchor")]
    SignAnchorZero { column: usize },
    #[error("norm radicand {radicand:e} for client {client} column {column} is below -1e-9")]
    NegativeRadicand {
        client: usize,
        column: usize,
        radicand: f64,
    },
}

fn missing(label: &str) -> AttackError {
    AttackError::MissingTranscriptLabel {
        label: label.to_owned(),
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// All broadcast payloads under `label`, in transcript order.
fn broadcast_series<'a>(view: &[&'a TranscriptEntry], label: &str) -> Vec<&'a [f64]> {
    view.iter()
        .filter(|e| e.receiver == Principal::Broadcast && e.label == label)
        .filter_map(|e| e.payload.as_reals())
        .collect()
}

/// Payloads of clear messages sent by `client` under `{base}.raw`, in order.
fn own_raw_series<'a>(
    view: &[&'a TranscriptEntry],
    client: usize,
    base: &str,
) -> Vec<&'a [f64]> {
    let label = format!("{base}.raw");
    view.iter()
        .filter(|e| e.sender == Principal::Client(client) && e.label == label)
        .filter_map(|e| e.payload.as_reals())
        .collect()
}

// ---------------------------------------------------------------------------
// Householder

/// Full input reconstruction from a Householder transcript.
///
/// Per column the attacker reads scale and norm from the `hh/max` and
/// `hh/norm` broadcasts, takes magnitudes from the `hh/uut_diag` broadcast,
/// and orients them with `hh/uut_anchor`: the anchor entry at its own first
/// active row has the sign of (own lead) x (global lead), and its own lead is
/// in its `hh/u` upload, so the global lead sign follows, and with it every
/// other entry's sign. Undoing the lead adjustment yields the scaled working
/// column, and reverse-applying the already recovered reflections (each is
/// its own inverse) yields the original column. An attacker whose first
/// active element is zero cannot orient the column; that surfaces as
/// [`AttackError::SignAnchorZero`] rather than guessing another anchor.
///
/// The report covers every row the attacker does not own; `reference` is the
/// original partition, used for scoring only.
pub fn attack_householder(
    t: &Transcript,
    attacker: usize,
    reference: &PartitionedDataset,
) -> Result<AttackReport, AttackError> {
    let view = t.client_view(attacker);
    let (full, offsets) = recover_householder(&view, attacker)?;

    assert_eq!(offsets, reference.offsets(), "layout disagrees with reference");
    assert_eq!(full.rows(), reference.total_rows());
    assert_eq!(full.cols(), reference.cols());

    let n = full.rows();
    let own_start = offsets[attacker];
    let own_end = offsets
        .get(attacker + 1)
        .copied()
        .unwrap_or(n);
    let victim_rows: Vec<usize> = (0..n).filter(|&i| i < own_start || i >= own_end).collect();

    let reconstructed = Matrix::from_fn(victim_rows.len(), full.cols(), |i, j| {
        full[(victim_rows[i], j)]
    });
    let stacked = reference.stack();
    let truth = Matrix::from_fn(victim_rows.len(), full.cols(), |i, j| {
        stacked[(victim_rows[i], j)]
    });
    let target = (0..offsets.len())
        .filter(|&s| s != attacker)
        .map(|s| Principal::Client(s).to_string())
        .collect::<Vec<_>>()
        .join(",");
    Ok(AttackReport::new(target, reconstructed, truth))
}

fn recover_householder(
    view: &[&TranscriptEntry],
    attacker: usize,
) -> Result<(Matrix, Vec<usize>), AttackError> {
    let layouts = broadcast_series(view, "hh/layout");
    let layout = layouts.first().ok_or_else(|| missing("hh/layout"))?;
    if layout.len() < 3 {
        return Err(missing("hh/layout"));
    }
    let n = layout[0] as usize;
    let m = layout[1] as usize;
    let offsets: Vec<usize> = layout[2..].iter().map(|&v| v as usize).collect();
    let steps = if n > m { m } else { m - 1 };

    let scales = broadcast_series(view, "hh/max");
    let norms = broadcast_series(view, "hh/norm");
    let diags = broadcast_series(view, "hh/uut_diag");
    let anchors = broadcast_series(view, "hh/uut_anchor");
    let betas = broadcast_series(view, "hh/beta");
    let own_us = own_raw_series(view, attacker, "hh/u");
    for (label, len) in [
        ("hh/max", scales.len()),
        ("hh/norm", norms.len()),
        ("hh/uut_diag", diags.len()),
        ("hh/uut_anchor", anchors.len()),
        ("hh/beta", betas.len()),
        ("hh/u", own_us.len()),
    ] {
        if len != steps {
            return Err(missing(label));
        }
    }
    let r_flat = *broadcast_series(view, "hh/r")
        .first()
        .ok_or_else(|| missing("hh/r"))?;
    if r_flat.len() != m * m {
        return Err(missing("hh/r"));
    }

    let own_start = offsets[attacker];
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(m);

    for c in 0..steps {
        let active = n - c;
        let diag = diags[c];
        let anchor = anchors[c];
        if diag.len() != active || anchor.len() != active {
            return Err(missing("hh/uut_diag"));
        }
        let own = own_us[c];
        if own.is_empty() {
            return Err(AttackError::SignAnchorZero { column: c });
        }
        let own_lead = own[0];
        if own_lead == 0.0 {
            return Err(AttackError::SignAnchorZero { column: c });
        }
        // Global row of the attacker's first active element.
        let g = own_start.max(c);
        let lead_sign = sgn(anchor[g - c]) * sgn(own_lead);
        if lead_sign == 0.0 {
            return Err(AttackError::SignAnchorZero { column: c });
        }

        let mut u: Vec<f64> = (0..active)
            .map(|t| sgn(anchor[t]) * lead_sign * diag[t].sqrt())
            .collect();
        for (k, &v) in own.iter().enumerate() {
            u[g - c + k] = v;
        }

        // The reflection vector is the scaled column with the lead element
        // pushed away from zero by the 2-norm; subtract that back out.
        let nu = norms[c][0].sqrt();
        let scale = scales[c][0];
        let mut col = vec![0.0; n];
        for (t, row) in col.iter_mut().enumerate().take(c) {
            *row = r_flat[t * m + c];
        }
        for t in 0..active {
            col[c + t] = scale * u[t];
        }
        col[c] -= scale * lead_sign * nu;

        unwind_reflections(&mut col, c, &us, &betas);
        us.push(u);
        columns.push(col);
    }

    // Columns past the last reflection are finished rows of R already.
    for c in steps..m {
        let mut col = vec![0.0; n];
        for (t, row) in col.iter_mut().enumerate() {
            *row = r_flat[t * m + c];
        }
        unwind_reflections(&mut col, steps, &us, &betas);
        columns.push(col);
    }

    Ok((
        Matrix::from_fn(n, m, |i, j| columns[j][i]),
        offsets,
    ))
}

/// Applies reflections `upto-1 .. 0` to `col`; each is an involution, so this
/// is exactly the inverse of the forward pass.
fn unwind_reflections(col: &mut [f64], upto: usize, us: &[Vec<f64>], betas: &[&[f64]]) {
    for j in (0..upto).rev() {
        let u = &us[j];
        let beta = betas[j][0];
        let dot: f64 = u.iter().zip(col[j..].iter()).map(|(a, b)| a * b).sum();
        for (t, uv) in u.iter().enumerate() {
            col[j + t] -= beta * uv * dot;
        }
    }
}

// ---------------------------------------------------------------------------
// Givens

/// Peer-row recovery from the rotations the attacker joined.
///
/// For a rotation with parameters (cos, sin) the row update is
/// `own_after = cos*own_before ± sin*peer_before`, so the sin-scaled peer row
/// the aggregator forwards is exactly `±(own_after - cos*own_before)`; one
/// division by sin recovers the peer's pre-rotation row. A sin of zero means
/// the forwarded row is identically zero and the pair is skipped; if every
/// visible rotation is skipped the attack reports
/// [`AttackError::ZeroSineParameter`].
///
/// `rotations` is the simulation's ground-truth log, used only to label the
/// targets and score the reconstruction.
pub fn attack_givens(
    t: &Transcript,
    attacker: usize,
    rotations: &[CrossRotation],
) -> Result<AttackReport, AttackError> {
    let view = t.client_view(attacker);
    let me = Principal::Client(attacker);

    let params: Vec<&[f64]> = view
        .iter()
        .filter(|e| e.sender == Principal::Aggregator && e.receiver == me && e.label == "gv/cs")
        .filter_map(|e| e.payload.as_reals())
        .collect();
    let peer_rows: Vec<&[f64]> = view
        .iter()
        .filter(|e| e.sender == Principal::Aggregator && e.receiver == me && e.label == "gv/srow")
        .filter_map(|e| e.payload.as_reals())
        .collect();
    if params.is_empty() {
        return Err(missing("gv/cs"));
    }
    if params.len() != peer_rows.len() {
        return Err(missing("gv/srow"));
    }

    let mut recovered: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for (i, (cs, scaled)) in params.iter().zip(&peer_rows).enumerate() {
        let sin = cs[1];
        if sin == 0.0 {
            continue;
        }
        recovered.push(scaled.iter().map(|&v| v / sin).collect());
        kept.push(i);
    }
    if recovered.is_empty() {
        return Err(AttackError::ZeroSineParameter);
    }

    // Scoring: align the attacker's rotations with the ground-truth log.
    let joined: Vec<&CrossRotation> = rotations
        .iter()
        .filter(|r| r.pivot_owner == attacker || r.target_owner == attacker)
        .collect();
    assert_eq!(
        joined.len(),
        params.len(),
        "ground-truth log disagrees with the transcript"
    );
    let cols = recovered[0].len();
    let reconstructed = Matrix::from_fn(recovered.len(), cols, |i, j| recovered[i][j]);
    let truth = Matrix::from_fn(recovered.len(), cols, |i, j| {
        let rot = joined[kept[i]];
        if rot.pivot_owner == attacker {
            rot.target_row_before[j]
        } else {
            rot.pivot_row_before[j]
        }
    });
    let peers: BTreeSet<usize> = kept
        .iter()
        .map(|&i| {
            let rot = joined[i];
            if rot.pivot_owner == attacker {
                rot.target_owner
            } else {
                rot.pivot_owner
            }
        })
        .collect();
    let target = peers
        .into_iter()
        .map(|s| Principal::Client(s).to_string())
        .collect::<Vec<_>>()
        .join(",");
    Ok(AttackReport::new(target, reconstructed, truth))
}

// ---------------------------------------------------------------------------
// Triangular cascade

/// Who is running the cascade reconstruction.
///
/// The aggregator needs clear aggregation to see per-client contributions; a
/// client works in either mode but only against exactly one other party,
/// because it recovers the peer's contribution by subtracting its own from
/// each aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeAttacker {
    Aggregator,
    Client(usize),
}

/// Reconstructs every other party's upper-triangular input block (and its
/// orthonormal factor) from a Gram-Schmidt transcript over stacked
/// upper-triangular blocks.
///
/// Sparsity drives the cascade: a triangular block's column `i` has entries
/// only in rows `0..=i`, so the per-client squared first norm pins the first
/// diagonal, each residual contribution times the global norm gives one inner
/// product with one new unknown, and the per-client norm of the
/// orthogonalized column pins the next diagonal. Diagonal entries come out of
/// a square root, so their sign is unrecoverable; the attack takes the
/// positive root, which flips the sign of every row whose true diagonal was
/// negative. Rounding can push a radicand slightly negative; values in
/// `[-1e-9, 0)` are clamped to zero and anything lower is reported as
/// [`AttackError::NegativeRadicand`].
///
/// `field` is the public fixed-point configuration (needed to read the
/// attacker's own share uploads under secure aggregation), and `true_r` /
/// `true_q` are the per-client truths for scoring, with the party count taken
/// from their length. Reports come in client order, each client's input block
/// first and its orthonormal block second; a client attacker reports only on
/// its peer.
pub fn attack_triangular_cascade(
    t: &Transcript,
    attacker: CascadeAttacker,
    field: &FieldParams,
    true_r: &[Matrix],
    true_q: &[Matrix],
) -> Result<Vec<AttackReport>, AttackError> {
    let s_count = true_r.len();
    assert_eq!(true_q.len(), s_count, "reference lists disagree");

    match attacker {
        CascadeAttacker::Aggregator => {
            if t.mode() != AggregationMode::Clear {
                return Err(AttackError::WrongMode {
                    reason: "secure aggregation hides per-client contributions from the \
                             aggregator"
                        .to_owned(),
                });
            }
        }
        CascadeAttacker::Client(k) => {
            if s_count != 2 || k >= 2 {
                return Err(AttackError::WrongMode {
                    reason: "a client can only subtract its own contribution when exactly \
                             two parties share each aggregate"
                        .to_owned(),
                });
            }
        }
    }

    let view = match attacker {
        CascadeAttacker::Aggregator => t.aggregator_view(),
        CascadeAttacker::Client(k) => t.client_view(k),
    };

    let global_norms: Vec<f64> = {
        let series = broadcast_series(&view, "gs/norm");
        if series.is_empty() {
            return Err(missing("gs/norm"));
        }
        series.iter().map(|p| p[0]).collect()
    };
    let d = global_norms.len();
    let global_resid: Vec<Vec<f64>> = broadcast_series(&view, "gs/resid")
        .iter()
        .map(|p| p.to_vec())
        .collect();
    if global_resid.len() + 1 != d {
        return Err(missing("gs/resid"));
    }

    // Per attacked client: its norm contributions and residual contributions.
    let contributions: Vec<(usize, Vec<f64>, Vec<Vec<f64>>)> = match attacker {
        CascadeAttacker::Aggregator => (0..s_count)
            .map(|s| {
                let norms: Vec<f64> = own_raw_series(&view, s, "gs/norm")
                    .iter()
                    .map(|p| p[0])
                    .collect();
                let resids: Vec<Vec<f64>> = own_raw_series(&view, s, "gs/resid")
                    .iter()
                    .map(|p| p.to_vec())
                    .collect();
                (s, norms, resids)
            })
            .collect(),
        CascadeAttacker::Client(k) => {
            let own_norms = own_scalar_series(&view, k, "gs/norm", t.mode(), field, s_count)?;
            let own_resids = own_vector_series(&view, k, "gs/resid", t.mode(), field, s_count)?;
            if own_norms.len() != d || own_resids.len() + 1 != d {
                return Err(missing("gs/norm"));
            }
            let peer = 1 - k;
            let norms: Vec<f64> = global_norms
                .iter()
                .zip(&own_norms)
                .map(|(g, o)| g - o)
                .collect();
            let resids: Vec<Vec<f64>> = global_resid
                .iter()
                .zip(&own_resids)
                .map(|(g, o)| g.iter().zip(o).map(|(gv, ov)| gv - ov).collect())
                .collect();
            vec![(peer, norms, resids)]
        }
    };

    let mut reports = Vec::new();
    for (s, norms, resids) in contributions {
        if norms.len() != d || resids.len() + 1 != d {
            return Err(missing("gs/norm"));
        }
        let (t_hat, q_hat) =
            reconstruct_triangular_block(s, &norms, &resids, &global_norms, &global_resid)?;
        let target = Principal::Client(s).to_string();
        reports.push(AttackReport::new(target.clone(), t_hat, true_r[s].clone()));
        reports.push(AttackReport::new(target, q_hat, true_q[s].clone()));
    }
    Ok(reports)
}

/// One client's scalar contribution per aggregate call under `base`: read
/// directly in clear mode, or by field-summing the client's own outgoing
/// shares (which reassemble its encoded input) under secure aggregation.
fn own_scalar_series(
    view: &[&TranscriptEntry],
    client: usize,
    base: &str,
    mode: AggregationMode,
    field: &FieldParams,
    s_count: usize,
) -> Result<Vec<f64>, AttackError> {
    Ok(own_vector_series(view, client, base, mode, field, s_count)?
        .iter()
        .map(|v| v[0])
        .collect())
}

fn own_vector_series(
    view: &[&TranscriptEntry],
    client: usize,
    base: &str,
    mode: AggregationMode,
    field: &FieldParams,
    s_count: usize,
) -> Result<Vec<Vec<f64>>, AttackError> {
    match mode {
        AggregationMode::Clear => Ok(own_raw_series(view, client, base)
            .iter()
            .map(|p| p.to_vec())
            .collect()),
        AggregationMode::Smpc => {
            let label = format!("{base}.share");
            let sent: Vec<&TranscriptEntry> = view
                .iter()
                .filter(|e| e.sender == Principal::Client(client) && e.label == label)
                .copied()
                .collect();
            if sent.len() % s_count != 0 {
                return Err(missing(&label));
            }
            sent.chunks(s_count)
                .map(|group| {
                    let len = group[0].payload.len();
                    (0..len)
                        .map(|j| {
                            let mut acc = FieldElement(0);
                            for e in group {
                                match &e.payload {
                                    Payload::Fields(v) => acc = field.add(acc, v[j]),
                                    Payload::Reals(_) => return Err(missing(&label)),
                                }
                            }
                            Ok(field.decode(acc))
                        })
                        .collect()
                })
                .collect()
        }
    }
}

fn reconstruct_triangular_block(
    client: usize,
    norms: &[f64],
    resids: &[Vec<f64>],
    global_norms: &[f64],
    global_resid: &[Vec<f64>],
) -> Result<(Matrix, Matrix), AttackError> {
    let d = norms.len();
    let mut t_hat = Matrix::zeros(d, d);
    // Orthogonal directions of the attacked block, rebuilt as we go.
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(d);

    t_hat[(0, 0)] = norms[0].max(0.0).sqrt();
    let mut u0 = vec![0.0; d];
    u0[0] = t_hat[(0, 0)];
    u.push(u0);

    for i in 1..d {
        // Each residual contribution times the global norm is an inner
        // product with exactly one unknown beyond the rows already solved.
        for j in 0..i {
            let num = resids[i - 1][j] * global_norms[j];
            let prior: f64 = (0..j).map(|t| u[j][t] * t_hat[(t, i)]).sum();
            t_hat[(j, i)] = (num - prior) / u[j][j];
        }
        let mut ui = vec![0.0; d];
        for t in 0..i {
            let correction: f64 = (0..i).map(|j| global_resid[i - 1][j] * u[j][t]).sum();
            ui[t] = t_hat[(t, i)] - correction;
        }
        let radicand = norms[i] - ui.iter().take(i).map(|v| v * v).sum::<f64>();
        if radicand < -1e-9 {
            return Err(AttackError::NegativeRadicand {
                client,
                column: i,
                radicand,
            });
        }
        t_hat[(i, i)] = radicand.max(0.0).sqrt();
        ui[i] = t_hat[(i, i)];
        u.push(ui);
    }

    let q_hat = Matrix::from_fn(d, d, |t, l| u[l][t] / global_norms[l].sqrt());
    Ok((t_hat, q_hat))
}
