//! fedqr: run the federated QR protocols, the applications built on them,
//! and the transcript reconstruction attacks, emitting deterministic
//! reports.

mod ingest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedqr::apps::{fed_center, fed_linreg, fed_pca};
use fedqr::attacks::{
    attack_givens, attack_householder, attack_triangular_cascade, AttackError, CascadeAttacker,
};
use fedqr::federation::{AggregationMode, FedError, PartitionedDataset, Session};
use fedqr::linalg::{gram_schmidt_qr, LinalgError};
use fedqr::qr::{fed_givens, fed_gram_schmidt, fed_householder};
use fedqr::smpc::{secure_sum, FieldParams, SmpcError};
use fedqr::{reference, synth, Matrix};

use ingest::load_csv;
use report::{float, Report};

#[derive(Parser)]
#[command(
    name = "fedqr",
    version,
    about = "Federated QR decomposition: protocols, applications, attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Federated Gram-Schmidt QR, with deltas against the centralized oracle
    Qr(Common),
    /// Reconstruction of peer rows by client 0 from a Householder run
    AttackHouseholder(Common),
    /// Reconstruction of peer rows by client 0 from a Givens run
    AttackGivens(Common),
    /// Aggregator reconstruction of upper-triangular client blocks from a
    /// clear-mode Gram-Schmidt run
    AttackCascade(Common),
    /// Federated standardization and principal component analysis
    Pca(PcaArgs),
    /// Federated linear regression with inference statistics and deltas
    /// against the normal-equations oracle
    Linreg(LinregArgs),
    /// Secure-sum round trip: field exactness and fixed-point decode error
    SmpcDemo(Common),
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    rows: usize,
    cols: usize,
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| "expected ROWSxCOLS, e.g. 500x8".to_string())?;
        let rows = r.trim().parse().map_err(|_| format!("bad row count {r:?}"))?;
        let cols = c.trim().parse().map_err(|_| format!("bad column count {c:?}"))?;
        if rows == 0 || cols == 0 {
            return Err("rows and cols must both be positive".to_string());
        }
        Ok(Shape { rows, cols })
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Clear,
    Smpc,
}

impl ModeArg {
    fn to_mode(self) -> AggregationMode {
        match self {
            ModeArg::Clear => AggregationMode::Clear,
            ModeArg::Smpc => AggregationMode::Smpc,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModeArg::Clear => "clear",
            ModeArg::Smpc => "smpc",
        }
    }
}

#[derive(Args)]
struct Common {
    /// Numeric CSV with a header row
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Seeded standard Gaussian data instead of a file, e.g. 500x8
    #[arg(long)]
    synthetic: Option<Shape>,
    /// Clients the rows are split across, as evenly as possible
    #[arg(long, default_value_t = 5)]
    clients: usize,
    /// How client contributions are aggregated
    #[arg(long, value_enum, default_value_t = ModeArg::Smpc)]
    mode: ModeArg,
    /// Seed for synthetic data and share randomness
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fixed-point fractional bits of the share encoding
    #[arg(long, default_value_t = 40)]
    frac_bits: u32,
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PcaArgs {
    #[command(flatten)]
    common: Common,
    /// Principal components to keep (default: all columns)
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct LinregArgs {
    #[command(flatten)]
    common: Common,
    /// Name of the response column in the CSV header
    #[arg(long)]
    response: Option<String>,
    /// Prepend a constant column to the design matrix
    #[arg(long)]
    intercept: bool,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Qr(c)
            | Command::AttackHouseholder(c)
            | Command::AttackGivens(c)
            | Command::AttackCascade(c)
            | Command::SmpcDemo(c) => c,
            Command::Pca(a) => &a.common,
            Command::Linreg(a) => &a.common,
        }
    }
}

#[derive(Debug)]
enum CliError {
    /// The request itself is unusable: exit code 2.
    Config(String),
    /// The data defeated the numerics: exit code 3.
    Numerical(String),
    /// An attack's preconditions are unmet: exit code 4.
    Precondition(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Precondition(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Precondition(m) => m,
        }
    }
}

fn fed_error(e: FedError) -> CliError {
    let text = e.to_string();
    match &e {
        FedError::Linalg(l) => match l {
            LinalgError::RankDeficient { .. }
            | LinalgError::ZeroColumn { .. }
            | LinalgError::SingularDiagonal { .. }
            | LinalgError::NonFinite { .. } => CliError::Numerical(text),
            _ => CliError::Config(text),
        },
        FedError::Smpc(s) => match s {
            SmpcError::MagnitudeOverflow { .. } | SmpcError::NonFiniteValue => {
                CliError::Numerical(text)
            }
            _ => CliError::Config(text),
        },
        FedError::ZeroVariance { .. } => CliError::Numerical(text),
        _ => CliError::Config(text),
    }
}

fn attack_error(e: AttackError) -> CliError {
    CliError::Precondition(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = cli.command.common().output.clone();
    match run(&cli.command) {
        Ok(text) => match output {
            Some(path) => match std::fs::write(&path, &text) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    ExitCode::from(2)
                }
            },
            None => {
                print!("{text}");
                ExitCode::SUCCESS
            }
        },
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: &Command) -> Result<String, CliError> {
    let report = match command {
        Command::Qr(c) => cmd_qr(c),
        Command::AttackHouseholder(c) => cmd_attack_householder(c),
        Command::AttackGivens(c) => cmd_attack_givens(c),
        Command::AttackCascade(c) => cmd_attack_cascade(c),
        Command::Pca(a) => cmd_pca(a),
        Command::Linreg(a) => cmd_linreg(a),
        Command::SmpcDemo(c) => cmd_smpc_demo(c),
    }?;
    Ok(report.render())
}

struct Source {
    matrix: Matrix,
    descriptor: String,
}

fn resolve_source(common: &Common) -> Result<Source, CliError> {
    match (&common.input, common.synthetic) {
        (Some(path), None) => {
            let (matrix, _) = load_csv(path, true, None).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Source {
                matrix,
                descriptor: format!("csv {}", path.display()),
            })
        }
        (None, Some(shape)) => {
            if shape.rows < shape.cols {
                return Err(CliError::Config(format!(
                    "synthetic data must have rows >= cols, got {shape}"
                )));
            }
            Ok(Source {
                matrix: synth::gaussian_matrix(shape.rows, shape.cols, common.seed),
                descriptor: format!("synthetic {shape}"),
            })
        }
        (None, None) => Err(CliError::Config(
            "give a data source: --input PATH or --synthetic ROWSxCOLS".to_string(),
        )),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    }
}

fn make_session(common: &Common) -> Result<Session, CliError> {
    if common.clients == 0 {
        return Err(CliError::Config("--clients must be at least 1".to_string()));
    }
    let field =
        FieldParams::new(127, common.frac_bits).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Session::with_field(
        common.mode.to_mode(),
        common.clients,
        common.seed,
        field,
    ))
}

fn split(matrix: &Matrix, common: &Common) -> Result<PartitionedDataset, CliError> {
    PartitionedDataset::even_split(matrix, common.clients).map_err(fed_error)
}

fn base_config(rep: &mut Report, common: &Common, source: &str) {
    rep.config("source", source);
    rep.config("clients", common.clients);
    rep.config("mode", common.mode.name());
    rep.config("seed", common.seed);
    rep.config("frac_bits", common.frac_bits);
}

fn frob_delta(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).expect("matching shapes").frobenius_norm()
}

fn census_line(transcript: &fedqr::federation::Transcript) -> String {
    transcript
        .aggregator_label_census()
        .into_iter()
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_qr(common: &Common) -> Result<Report, CliError> {
    let source = resolve_source(common)?;
    let data = split(&source.matrix, common)?;
    let mut session = make_session(common)?;
    let fed = fed_gram_schmidt(&mut session, &data).map_err(fed_error)?;
    let (transcript, rounds) = session.finish();

    let (oracle, _) = gram_schmidt_qr(&source.matrix).map_err(|e| fed_error(e.into()))?;
    let q_fed = Matrix::vstack(&fed.q_blocks).expect("blocks share the column count");

    let mut rep = Report::new("qr");
    base_config(&mut rep, common, &source.descriptor);
    rep.metric("rows", "rows", source.matrix.rows());
    rep.metric("cols", "cols", source.matrix.cols());
    rep.metric("rounds", "aggregation rounds", rounds);
    rep.metric(
        "q_delta",
        "frobenius |Q_fed - Q_central|",
        float(frob_delta(&q_fed, &oracle.q)),
    );
    rep.metric(
        "r_delta",
        "frobenius |R_fed - R_central|",
        float(frob_delta(&fed.r, &oracle.r)),
    );
    rep.metric("census", "aggregator label census", census_line(&transcript));
    rep.metric(
        "raw_at_aggregator",
        "raw labels at aggregator",
        transcript.aggregator_raw_labels().len(),
    );
    Ok(rep)
}

fn attack_report(
    rep: &mut Report,
    attack: &fedqr::attacks::AttackReport,
    rounds: usize,
) {
    rep.metric("target", "reconstructed rows of", &attack.target);
    rep.metric(
        "rows_recovered",
        "rows recovered",
        attack.reconstructed.rows(),
    );
    rep.metric("rounds", "aggregation rounds", rounds);
    rep.metric("max_abs_error", "max |error|", float(attack.max_abs_error));
    rep.metric(
        "mean_abs_error",
        "mean |error|",
        float(attack.mean_abs_error),
    );
}

fn cmd_attack_householder(common: &Common) -> Result<Report, CliError> {
    let source = resolve_source(common)?;
    let data = split(&source.matrix, common)?;
    let mut session = make_session(common)?;
    fed_householder(&mut session, &data).map_err(fed_error)?;
    let (transcript, rounds) = session.finish();
    let attack = attack_householder(&transcript, 0, &data).map_err(attack_error)?;

    let mut rep = Report::new("attack-householder");
    base_config(&mut rep, common, &source.descriptor);
    rep.config("attacker", "client 0");
    attack_report(&mut rep, &attack, rounds);
    Ok(rep)
}

fn cmd_attack_givens(common: &Common) -> Result<Report, CliError> {
    let source = resolve_source(common)?;
    let data = split(&source.matrix, common)?;
    let mut session = make_session(common)?;
    let run = fed_givens(&mut session, &data).map_err(fed_error)?;
    let (transcript, rounds) = session.finish();
    let attack = attack_givens(&transcript, 0, &run.rotations).map_err(attack_error)?;

    let mut rep = Report::new("attack-givens");
    base_config(&mut rep, common, &source.descriptor);
    rep.config("attacker", "client 0");
    attack_report(&mut rep, &attack, rounds);
    Ok(rep)
}

/// Largest gap between the entrywise magnitudes of two matrices; the cascade
/// recovers Q only up to the sign freedom of the factorization.
fn magnitude_delta(a: &Matrix, b: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            worst = worst.max((a[(i, j)].abs() - b[(i, j)].abs()).abs());
        }
    }
    worst
}

fn cmd_attack_cascade(common: &Common) -> Result<Report, CliError> {
    let (data, descriptor) = match (&common.input, common.synthetic) {
        (Some(path), None) => {
            let (matrix, _) =
                load_csv(path, true, None).map_err(|e| CliError::Config(e.to_string()))?;
            (split(&matrix, common)?, format!("csv {}", path.display()))
        }
        (None, Some(shape)) => {
            if shape.rows != shape.cols {
                return Err(CliError::Config(format!(
                    "cascade blocks are square triangles; give --synthetic NxN, got {shape}"
                )));
            }
            let blocks: Vec<Matrix> = (0..common.clients)
                .map(|s| synth::random_upper_triangular(shape.cols, common.seed + 1 + s as u64))
                .collect();
            let data = PartitionedDataset::from_blocks(blocks).map_err(fed_error)?;
            (data, format!("synthetic triangular blocks {shape}"))
        }
        (None, None) => {
            return Err(CliError::Config(
                "give a data source: --input PATH or --synthetic NxN".to_string(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };

    let mut session = make_session(common)?;
    let field = session.field().clone();
    let run = fed_gram_schmidt(&mut session, &data).map_err(fed_error)?;
    let (transcript, rounds) = session.finish();

    // Scoring references: the attack recovers each client's raw input block
    // and its rows of the global orthonormal factor.
    let true_r = data.blocks().to_vec();
    let reports = attack_triangular_cascade(
        &transcript,
        CascadeAttacker::Aggregator,
        &field,
        &true_r,
        &run.q_blocks,
    )
    .map_err(attack_error)?;

    let mut rep = Report::new("attack-cascade");
    base_config(&mut rep, common, &descriptor);
    rep.config("attacker", "aggregator");
    rep.metric("rounds", "aggregation rounds", rounds);
    let mut worst_r: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    for (s, pair) in reports.chunks_exact(2).enumerate() {
        let r_err = pair[0].max_abs_error;
        let q_err = magnitude_delta(&pair[1].reconstructed, &pair[1].reference);
        worst_r = worst_r.max(r_err);
        worst_q = worst_q.max(q_err);
        rep.metric(
            &format!("r_max_error_{s}"),
            &format!("{} R max |error|", pair[0].target),
            float(r_err),
        );
        rep.metric(
            &format!("q_max_error_{s}"),
            &format!("{} |Q| max |error|", pair[1].target),
            float(q_err),
        );
    }
    rep.metric("worst_r_error", "worst R error", float(worst_r));
    rep.metric("worst_q_error", "worst |Q| error", float(worst_q));
    Ok(rep)
}

fn cmd_pca(args: &PcaArgs) -> Result<Report, CliError> {
    let common = &args.common;
    let source = resolve_source(common)?;
    let data = split(&source.matrix, common)?;
    let mut session = make_session(common)?;
    let centered = fed_center(&mut session, &data).map_err(fed_error)?;
    let k = args.k.unwrap_or_else(|| source.matrix.cols());
    let pca = fed_pca(&mut session, &centered, k).map_err(fed_error)?;
    let (transcript, rounds) = session.finish();

    let stacked = Matrix::vstack(&pca.u_blocks).expect("blocks share the column count");
    let recon = stacked
        .matmul(&pca.v.transpose())
        .expect("projection shapes agree");
    let standardized = centered.stack();
    let rel = frob_delta(&recon, &standardized) / standardized.frobenius_norm();

    let mut rep = Report::new("pca");
    base_config(&mut rep, common, &source.descriptor);
    rep.config("components", k);
    rep.metric("rows", "rows", source.matrix.rows());
    rep.metric("cols", "cols", source.matrix.cols());
    rep.metric("rounds", "aggregation rounds", rounds);
    for (i, sv) in pca.sigma.iter().enumerate() {
        rep.metric(
            &format!("sigma_{i}"),
            &format!("singular value {i}"),
            float(*sv),
        );
    }
    rep.metric(
        "recon_rel_error",
        "relative reconstruction error",
        float(rel),
    );
    rep.metric("census", "aggregator label census", census_line(&transcript));
    Ok(rep)
}

fn cmd_linreg(args: &LinregArgs) -> Result<Report, CliError> {
    let common = &args.common;
    let (matrix, response, descriptor) = match (&common.input, common.synthetic) {
        (Some(path), None) => {
            let name = args.response.as_deref().ok_or_else(|| {
                CliError::Config("--response NAME is required with --input".to_string())
            })?;
            let (matrix, response) = load_csv(path, true, Some(name))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let response = response.expect("a found response column yields a vector");
            (
                matrix,
                response,
                format!("csv {} response {name}", path.display()),
            )
        }
        (None, Some(shape)) => {
            if args.response.is_some() {
                return Err(CliError::Config(
                    "--response only applies to --input".to_string(),
                ));
            }
            if shape.rows < shape.cols {
                return Err(CliError::Config(format!(
                    "synthetic data must have rows >= cols, got {shape}"
                )));
            }
            let matrix = synth::gaussian_matrix(shape.rows, shape.cols, common.seed);
            let noise = synth::gaussian_matrix(shape.rows, 1, common.seed.wrapping_add(1));
            // Planted response with alternating unit weights and mild noise,
            // so the oracle comparison is exercised away from r^2 = 1.
            let response: Vec<f64> = (0..shape.rows)
                .map(|i| {
                    let signal: f64 = (0..shape.cols)
                        .map(|j| if j % 2 == 0 { matrix[(i, j)] } else { -matrix[(i, j)] })
                        .sum();
                    signal + 0.1 * noise[(i, 0)]
                })
                .collect();
            (matrix, response, format!("synthetic {shape} planted response"))
        }
        (None, None) => {
            return Err(CliError::Config(
                "give a data source: --input PATH or --synthetic ROWSxCOLS".to_string(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };

    let data = split(&matrix, common)?;
    let responses: Vec<Vec<f64>> = data
        .offsets()
        .iter()
        .zip(data.blocks())
        .map(|(off, block)| response[*off..*off + block.rows()].to_vec())
        .collect();
    let mut session = make_session(common)?;
    let fed = fed_linreg(&mut session, &data, &responses, args.intercept).map_err(fed_error)?;
    let (transcript, rounds) = session.finish();
    let oracle = reference::ols_fit(&matrix, &response, args.intercept).map_err(fed_error)?;

    let coef_gap: f64 = fed
        .coefficients
        .iter()
        .zip(&oracle.coefficients)
        .map(|(a, b)| (a - b).abs())
        .sum();
    let p_gap: f64 = fed
        .p_values
        .iter()
        .zip(&oracle.p_values)
        .map(|(a, b)| (a - b).abs())
        .sum();

    let mut rep = Report::new("linreg");
    base_config(&mut rep, common, &descriptor);
    rep.config("intercept", args.intercept);
    rep.metric("rows", "rows", matrix.rows());
    rep.metric("cols", "feature columns", matrix.cols());
    rep.metric("rounds", "aggregation rounds", rounds);
    for j in 0..fed.coefficients.len() {
        let label = if args.intercept {
            if j == 0 {
                "intercept".to_string()
            } else {
                format!("x{}", j - 1)
            }
        } else {
            format!("x{j}")
        };
        rep.metric(
            &format!("coef_{j}"),
            &format!("{label} coefficient"),
            float(fed.coefficients[j]),
        );
        rep.metric(
            &format!("se_{j}"),
            &format!("{label} std error"),
            float(fed.std_errors[j]),
        );
        rep.metric(
            &format!("t_{j}"),
            &format!("{label} t statistic"),
            float(fed.t_stats[j]),
        );
        rep.metric(
            &format!("p_{j}"),
            &format!("{label} p-value"),
            float(fed.p_values[j]),
        );
    }
    rep.metric("r_squared", "r squared", float(fed.r_squared));
    rep.metric("rss", "residual sum of squares", float(fed.rss));
    rep.metric("mss", "model sum of squares", float(fed.mss));
    rep.metric("dof", "degrees of freedom", fed.dof);
    rep.metric("coef_gap", "sum |coef - oracle|", float(coef_gap));
    rep.metric(
        "r_squared_gap",
        "|r squared - oracle|",
        float((fed.r_squared - oracle.r_squared).abs()),
    );
    rep.metric("p_gap", "sum |p - oracle|", float(p_gap));
    rep.metric("census", "aggregator label census", census_line(&transcript));
    Ok(rep)
}

fn cmd_smpc_demo(common: &Common) -> Result<Report, CliError> {
    if common.input.is_some() {
        return Err(CliError::Config(
            "smpc-demo generates its own trials; drop --input".to_string(),
        ));
    }
    if common.clients < 2 {
        return Err(CliError::Config(
            "secret sharing needs at least 2 clients".to_string(),
        ));
    }
    let shape = common.synthetic.unwrap_or(Shape { rows: 100, cols: 4 });
    let field =
        FieldParams::new(127, common.frac_bits).map_err(|e| CliError::Config(e.to_string()))?;
    let per_client: Vec<Matrix> = (0..common.clients)
        .map(|s| synth::gaussian_matrix(shape.rows, shape.cols, common.seed.wrapping_add(s as u64)))
        .collect();

    let mut rng = synth::seeded_rng(common.seed);
    let mut max_err: f64 = 0.0;
    for t in 0..shape.rows {
        let parts: Vec<Vec<f64>> = per_client.iter().map(|m| m.row(t).to_vec()).collect();
        let secure = secure_sum(&field, &parts, &mut rng)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        for (j, got) in secure.iter().enumerate() {
            let plain: f64 = parts.iter().map(|p| p[j]).sum();
            max_err = max_err.max((got - plain).abs());
        }
    }
    let bound = common.clients as f64 * (common.frac_bits as f64 * -1.0).exp2();

    // One transcripted aggregation so the report can show what the
    // aggregator observes in the selected mode.
    let mut session = make_session(common)?;
    let parts: Vec<Vec<f64>> = per_client.iter().map(|m| m.row(0).to_vec()).collect();
    session
        .aggregate_vectors("demo/sum", &parts)
        .map_err(fed_error)?;
    session.barrier();
    let (transcript, _) = session.finish();

    let mut rep = Report::new("smpc-demo");
    base_config(&mut rep, common, &format!("synthetic trials {shape}"));
    rep.metric("trials", "secure-sum trials", shape.rows);
    rep.metric("length", "vector length", shape.cols);
    rep.metric("max_decode_error", "max decode error", float(max_err));
    rep.metric(
        "per_element_bound",
        "per-element bound S*2^-frac_bits",
        float(bound),
    );
    rep.metric("bound_satisfied", "bound satisfied", max_err <= bound);
    rep.metric("census", "aggregator label census", census_line(&transcript));
    rep.metric(
        "raw_at_aggregator",
        "raw labels at aggregator",
        transcript.aggregator_raw_labels().len(),
    );
    Ok(rep)
}
