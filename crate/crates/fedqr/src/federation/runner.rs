//! Uniform front door for the federated protocols: pick one, hand over a
//! partitioned dataset, get the outputs plus the full transcript back.

use std::collections::BTreeMap;

use super::{AggregationMode, FedError, PartitionedDataset, Session, Transcript};
use crate::apps::{fed_linreg, fed_pca};
use crate::qr::{fed_givens, fed_gram_schmidt, fed_householder};
use crate::Matrix;

/// The registered protocols [`run_rounds`] can execute.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    GramSchmidt,
    Householder,
    Givens,
    Pca {
        components: usize,
    },
    LinearRegression {
        /// One response vector per client, aligned with its block rows.
        responses: Vec<Vec<f64>>,
        intercept: bool,
    },
}

/// Everything a protocol run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    /// One matrix per client, in client order. Stacking them always gives a
    /// quantity with the dataset's full row count: Q blocks, triangularized
    /// working blocks, projections, or fitted values.
    pub per_client_outputs: Vec<Matrix>,
    /// Named global quantities every party ends up holding, `r` and friends.
    pub global_outputs: BTreeMap<String, Matrix>,
    pub transcript: Transcript,
    /// Synchronization barriers executed.
    pub round_count: usize,
}

fn row_vector(values: &[f64]) -> Matrix {
    Matrix::from_rows(1, values.len(), values.to_vec()).expect("non-empty row vector")
}

/// Runs `protocol` over `data` in a fresh [`Session`] and packages the
/// result. Deterministic: the same protocol, data, mode and seed produce a
/// bit-identical transcript.
pub fn run_rounds(
    protocol: &Protocol,
    data: &PartitionedDataset,
    mode: AggregationMode,
    seed: u64,
) -> Result<ProtocolOutcome, FedError> {
    let mut session = Session::new(mode, data.client_count(), seed);
    let mut globals = BTreeMap::new();
    let per_client_outputs = match protocol {
        Protocol::GramSchmidt => {
            let res = fed_gram_schmidt(&mut session, data)?;
            globals.insert("r".to_string(), res.r);
            globals.insert("norms".to_string(), row_vector(&res.u_norms));
            globals.insert("residuals".to_string(), res.residual_table);
            res.q_blocks
        }
        Protocol::Householder => {
            let res = fed_householder(&mut session, data)?;
            globals.insert("r".to_string(), res.r);
            res.blocks
        }
        Protocol::Givens => {
            let res = fed_givens(&mut session, data)?;
            globals.insert("r".to_string(), res.r);
            res.blocks
        }
        Protocol::Pca { components } => {
            let res = fed_pca(&mut session, data, *components)?;
            globals.insert("v".to_string(), res.v);
            globals.insert("sigma".to_string(), row_vector(&res.sigma));
            res.u_blocks
        }
        Protocol::LinearRegression {
            responses,
            intercept,
        } => {
            let report = fed_linreg(&mut session, data, responses, *intercept)?;
            globals.insert("coefficients".to_string(), row_vector(&report.coefficients));
            globals.insert("std_errors".to_string(), row_vector(&report.std_errors));
            globals.insert("t_stats".to_string(), row_vector(&report.t_stats));
            globals.insert("p_values".to_string(), row_vector(&report.p_values));
            globals.insert(
                "summary".to_string(),
                row_vector(&[report.r_squared, report.rss, report.mss, report.dof as f64]),
            );
            // Per-client fitted values, so the row-conservation property
            // holds for this protocol too.
            let x = &report.coefficients;
            data.blocks()
                .iter()
                .map(|block| {
                    Matrix::from_fn(block.rows(), 1, |i, _| {
                        let mut acc = if *intercept { x[0] } else { 0.0 };
                        let weights = if *intercept { &x[1..] } else { &x[..] };
                        for (j, w) in weights.iter().enumerate() {
                            acc += w * block[(i, j)];
                        }
                        acc
                    })
                })
                .collect()
        }
    };
    let (transcript, round_count) = session.finish();
    Ok(ProtocolOutcome {
        per_client_outputs,
        global_outputs: globals,
        transcript,
        round_count,
    })
}
