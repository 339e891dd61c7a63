//! End-to-end acceptance checks for the whole workspace.
//!
//! Each test covers one numbered criterion and prints a single verdict line
//! (`criterion N: PASS/FAIL (...)`) before asserting, so a full run under
//! `--nocapture` reads as a checklist. Timed criteria share a lock; their
//! budgets assume they are not fighting sibling tests for cores.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use fedqr::apps::fed_pca;
use fedqr::attacks::{
    attack_givens, attack_householder, attack_triangular_cascade, AttackError, CascadeAttacker,
};
use fedqr::federation::{AggregationMode, PartitionedDataset, Session};
use fedqr::linalg::{givens_qr, gram_schmidt_qr, householder_qr};
use fedqr::qr::{fed_givens, fed_gram_schmidt, fed_householder};
use fedqr::reference::centralized_pca;
use fedqr::smpc::{secure_sum, FieldElement, FieldParams};
use fedqr::synth;
use fedqr::Matrix;

static TIMED: Mutex<()> = Mutex::new(());

fn verdict(criterion: usize, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {word} ({detail})");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Largest elementwise difference of absolute values, for comparisons where
/// a sign is not recoverable.
fn magnitude_delta(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.abs() - y.abs()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn c1_federated_qr_matches_centralized_qr() {
    let _guard = TIMED.lock().unwrap();
    let start = Instant::now();
    let mut worst_q = 0.0f64;
    let mut worst_r = 0.0f64;
    for seed in [1u64, 2, 3] {
        let a = synth::gaussian_matrix(500, 8, seed);
        let data = PartitionedDataset::even_split(&a, 5).unwrap();
        let mut session = Session::new(AggregationMode::Smpc, 5, seed);
        let fed = fed_gram_schmidt(&mut session, &data).unwrap();
        let (central, _) = gram_schmidt_qr(&a).unwrap();
        let q_fed = Matrix::vstack(&fed.q_blocks).unwrap();
        worst_q = worst_q.max(q_fed.sub(&central.q).unwrap().frobenius_norm());
        worst_r = worst_r.max(fed.r.sub(&central.r).unwrap().frobenius_norm());
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        worst_q <= 1e-11 && worst_r <= 1e-11 && elapsed < Duration::from_secs(5),
        &format!(
            "500x8, 5 clients, secure aggregation, 3 seeds: worst Q delta {worst_q:.3e}, \
             worst R delta {worst_r:.3e}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn c2_householder_transcript_reconstruction() {
    let _guard = TIMED.lock().unwrap();
    let start = Instant::now();
    let mut worst_mean = 0.0f64;
    for seed in 1..=10u64 {
        let a = synth::gaussian_matrix(5000, 10, seed);
        let data = PartitionedDataset::even_split(&a, 2).unwrap();
        let mut session = Session::new(AggregationMode::Clear, 2, seed);
        fed_householder(&mut session, &data).unwrap();
        let (transcript, _) = session.finish();
        let report = attack_householder(&transcript, 0, &data).unwrap();
        worst_mean = worst_mean.max(report.mean_abs_error);
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        worst_mean <= 1e-12 && elapsed < Duration::from_secs(30),
        &format!(
            "5000x10, 2 clients, 10 seeds: worst mean reconstruction error {worst_mean:.3e}, \
             {elapsed:.2?}"
        ),
    );
}

#[test]
fn c3_givens_transcript_reconstruction() {
    let _guard = TIMED.lock().unwrap();
    let start = Instant::now();
    let mut worst_mean = 0.0f64;
    for seed in 1..=10u64 {
        let a = synth::gaussian_matrix(5000, 10, seed);
        let data = PartitionedDataset::even_split(&a, 2).unwrap();
        let mut session = Session::new(AggregationMode::Clear, 2, seed);
        let run = fed_givens(&mut session, &data).unwrap();
        let (transcript, _) = session.finish();
        let report = attack_givens(&transcript, 0, &run.rotations).unwrap();
        worst_mean = worst_mean.max(report.mean_abs_error);
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        worst_mean <= 1e-12 && elapsed < Duration::from_secs(60),
        &format!(
            "5000x10, 2 clients, 10 seeds: worst mean reconstruction error {worst_mean:.3e}, \
             {elapsed:.2?}"
        ),
    );
}

#[test]
fn c4_triangular_cascade_and_its_preconditions() {
    // Positive case: three upper-triangular blocks, clear aggregation.
    let blocks: Vec<Matrix> = (0..3)
        .map(|s| synth::random_upper_triangular(6, 40 + s as u64))
        .collect();
    let data = PartitionedDataset::from_blocks(blocks).unwrap();
    let mut session = Session::new(AggregationMode::Clear, 3, 7);
    let field = session.field().clone();
    let run = fed_gram_schmidt(&mut session, &data).unwrap();
    let (transcript, _) = session.finish();
    let reports = attack_triangular_cascade(
        &transcript,
        CascadeAttacker::Aggregator,
        &field,
        data.blocks(),
        &run.q_blocks,
    )
    .unwrap();
    assert_eq!(reports.len(), 6, "one input and one Q report per client");
    let mut worst_r = 0.0f64;
    let mut worst_q = 0.0f64;
    for (i, report) in reports.iter().enumerate() {
        if i % 2 == 0 {
            worst_r = worst_r.max(report.max_abs_error);
        } else {
            worst_q = worst_q.max(magnitude_delta(&report.reconstructed, &report.reference));
        }
    }

    // Negative control: general blocks under secure aggregation must refuse.
    let a = synth::gaussian_matrix(18, 6, 11);
    let general = PartitionedDataset::even_split(&a, 3).unwrap();
    let mut session = Session::new(AggregationMode::Smpc, 3, 11);
    let run = fed_gram_schmidt(&mut session, &general).unwrap();
    let (transcript, _) = session.finish();
    let refused = matches!(
        attack_triangular_cascade(
            &transcript,
            CascadeAttacker::Aggregator,
            &field,
            general.blocks(),
            &run.q_blocks,
        ),
        Err(AttackError::WrongMode { .. })
    );

    verdict(
        4,
        worst_r <= 1e-8 && worst_q <= 1e-8 && refused,
        &format!(
            "3 clients, 6x6 triangles: worst input error {worst_r:.3e}, worst |Q| error \
             {worst_q:.3e}, secure-mode refusal {refused}"
        ),
    );
}

#[test]
fn c5_regression_on_a_csv_matches_the_oracle() {
    // A diabetes-sized table: 442 observations, 10 features, one response.
    let rows = 442;
    let cols = 10;
    let features = synth::gaussian_matrix(rows, cols, 51);
    let noise = synth::gaussian_matrix(rows, 1, 52);
    let weights = [2.0, -1.5, 1.0, -0.5, 3.0, 0.0, 1.25, -2.0, 0.75, -1.0];

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let mut file = std::fs::File::create(&path).unwrap();
    let header: Vec<String> = (0..cols).map(|j| format!("f{j}")).collect();
    writeln!(file, "{},y", header.join(",")).unwrap();
    for i in 0..rows {
        let mut y = 0.35 + 0.05 * noise[(i, 0)];
        for (j, w) in weights.iter().enumerate() {
            y += w * features[(i, j)];
        }
        let cells: Vec<String> = (0..cols).map(|j| format!("{}", features[(i, j)])).collect();
        writeln!(file, "{},{y}", cells.join(",")).unwrap();
    }
    drop(file);

    let out = Command::new(env!("CARGO_BIN_EXE_fedqr"))
        .args([
            "linreg",
            "--input",
            path.to_str().unwrap(),
            "--response",
            "y",
            "--clients",
            "5",
            "--intercept",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "linreg run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = String::from_utf8(out.stdout).unwrap();
    let value = |key: &str| -> f64 {
        let prefix = format!("linreg.{key}=");
        report
            .lines()
            .find_map(|l| l.strip_prefix(&prefix))
            .unwrap_or_else(|| panic!("{key} missing from report"))
            .parse()
            .unwrap()
    };
    let coef_gap = value("coef_gap");
    let r_squared_gap = value("r_squared_gap");
    let p_gap = value("p_gap");
    verdict(
        5,
        coef_gap <= 1e-9 && r_squared_gap <= 1e-12 && p_gap <= 0.03,
        &format!(
            "442x10 CSV split 5 ways: coefficient gap {coef_gap:.3e}, r-squared gap \
             {r_squared_gap:.3e}, p-value gap {p_gap:.3e}"
        ),
    );
}

#[test]
fn c6_secure_sum_is_field_exact_and_tightly_decoded() {
    let params = FieldParams::default_params();
    let mut rng = synth::seeded_rng(60);
    let bound_unit = (2.0f64).powi(-(params.frac_bits as i32));
    let len = 8;
    let mut trials = 0usize;
    let mut worst_rel_to_bound = 0.0f64;

    for (parties, count) in [(2usize, 334usize), (3, 333), (5, 333)] {
        for t in 0..count {
            let seed = 6_000 + trials as u64;
            let raw = synth::gaussian_matrix(parties, len, seed);
            let per_party: Vec<Vec<f64>> = (0..parties)
                .map(|s| raw.row(s).iter().map(|v| 100.0 * v).collect())
                .collect();

            // Field level: the share path must land on exactly the field sum
            // of the encodings, element by element.
            for e in 0..len {
                let mut expected = FieldElement(0);
                let mut partials = vec![FieldElement(0); parties];
                for values in &per_party {
                    let enc = params.encode(values[e]).unwrap();
                    expected = params.add(expected, enc);
                    let shares = params.make_shares(enc, parties, &mut rng).unwrap();
                    for (p, share) in shares.into_iter().enumerate() {
                        partials[p] = params.add(partials[p], share);
                    }
                }
                let via_shares = params.sum(&partials);
                assert_eq!(via_shares.0, expected.0, "share path drifted in trial {t}");
            }

            // Real level: decoded sum within parties * 2^-frac_bits per element.
            let decoded = secure_sum(&params, &per_party, &mut rng).unwrap();
            let bound = parties as f64 * bound_unit;
            for e in 0..len {
                let plain: f64 = per_party.iter().map(|v| v[e]).sum();
                let err = (decoded[e] - plain).abs();
                assert!(err <= bound, "decode error {err:.3e} above {bound:.3e}");
                worst_rel_to_bound = worst_rel_to_bound.max(err / bound);
            }
            trials += 1;
        }
    }

    // Transcript audit: secure sessions never put a raw value at the
    // aggregator, whatever the party count.
    let mut raw_free = true;
    for (parties, seed) in [(2usize, 61u64), (3, 62), (5, 63)] {
        let a = synth::gaussian_matrix(4 * parties, 3, seed);
        let data = PartitionedDataset::even_split(&a, parties).unwrap();
        let mut session = Session::new(AggregationMode::Smpc, parties, seed);
        fed_gram_schmidt(&mut session, &data).unwrap();
        let (transcript, _) = session.finish();
        raw_free &= transcript.aggregator_raw_labels().is_empty();
    }

    verdict(
        6,
        trials == 1000 && raw_free,
        &format!(
            "{trials} trials over 2/3/5 parties: field sums bit-exact, worst decode error at \
             {:.1}% of bound, raw-free aggregator view {raw_free}",
            100.0 * worst_rel_to_bound
        ),
    );
}

#[test]
fn c7_federated_pca_matches_centralized_svd() {
    let a = synth::gaussian_matrix(100, 5, 70);
    let k = 5;
    let data = PartitionedDataset::even_split(&a, 4).unwrap();
    let mut session = Session::new(AggregationMode::Smpc, 4, 70);
    let pca = fed_pca(&mut session, &data, k).unwrap();
    let (v_ref, _) = centralized_pca(&a, k).unwrap();

    // Right singular vectors, aligned per column by sign.
    let mut v_delta = 0.0f64;
    for j in 0..k {
        let dot: f64 = (0..a.cols()).map(|i| pca.v[(i, j)] * v_ref[(i, j)]).sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..a.cols() {
            v_delta = v_delta.max((sign * pca.v[(i, j)] - v_ref[(i, j)]).abs());
        }
    }

    // Full-rank reconstruction through the per-client score blocks.
    let scores = Matrix::vstack(&pca.u_blocks).unwrap();
    let recon = scores.matmul(&pca.v.transpose()).unwrap();
    let rel = recon.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm();

    verdict(
        7,
        v_delta <= 1e-8 && rel <= 1e-8,
        &format!(
            "100x5 split 4 ways: direction delta {v_delta:.3e}, relative reconstruction \
             {rel:.3e}"
        ),
    );
}

#[test]
fn c8_secure_gram_schmidt_census_is_three_labels() {
    let want: BTreeSet<String> = ["gs/norm", "gs/rcol", "gs/resid"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut violations = 0usize;
    for seed in 0..100u64 {
        let a = synth::gaussian_matrix(20, 4, 800 + seed);
        let data = PartitionedDataset::even_split(&a, 3).unwrap();
        let mut session = Session::new(AggregationMode::Smpc, 3, seed);
        fed_gram_schmidt(&mut session, &data).unwrap();
        let (transcript, _) = session.finish();
        if transcript.aggregator_label_census() != want {
            violations += 1;
        }
    }
    verdict(
        8,
        violations == 0,
        &format!("100 seeded secure runs: {violations} census violations"),
    );
}

#[test]
fn c9_three_factorizations_agree_on_magnitudes() {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let a = synth::gaussian_matrix(30, 6, 900 + seed);
        let hh = householder_qr(&a).unwrap();
        let gv = givens_qr(&a).unwrap();
        let (gs, _) = gram_schmidt_qr(&a).unwrap();
        worst = worst.max(magnitude_delta(&hh.r, &gv.r));
        worst = worst.max(magnitude_delta(&hh.r, &gs.r));
        worst = worst.max(magnitude_delta(&gv.r, &gs.r));
    }
    verdict(
        9,
        worst <= 1e-9,
        &format!("50 random 30x6 inputs: worst |R| disagreement {worst:.3e}"),
    );
}
