use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::transcript::{Payload, Principal, Transcript, TranscriptEntry};
use super::FedError;
use crate::smpc::{FieldElement, FieldParams};

/// How client contributions travel to the aggregator.
///
/// In `Clear` mode every client sends its summand as plaintext. In `Smpc`
/// mode the summand is encoded into the prime field, split into additive
/// shares, and only share sums ever reach the aggregator, so no single
/// message reveals a client's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    Clear,
    Smpc,
}

/// One federated round-based computation: a star of `n_clients` clients
/// around an aggregator, exchanging labelled messages that are recorded in a
/// [`Transcript`].
///
/// The simulation is in-process and single-threaded. A "round" is the unit
/// of synchronisation: all messages recorded between two [`Session::barrier`]
/// calls belong to the same round and are considered concurrent.
pub struct Session {
    mode: AggregationMode,
    field: FieldParams,
    n_clients: usize,
    rng: ChaCha20Rng,
    transcript: Transcript,
    round: usize,
}

impl Session {
    /// Opens a session with the default 127-bit field.
    pub fn new(mode: AggregationMode, n_clients: usize, seed: u64) -> Self {
        Self::with_field(mode, n_clients, seed, FieldParams::default_params())
    }

    pub fn with_field(
        mode: AggregationMode,
        n_clients: usize,
        seed: u64,
        field: FieldParams,
    ) -> Self {
        assert!(n_clients >= 1, "need at least one client");
        Session {
            mode,
            field,
            n_clients,
            rng: ChaCha20Rng::seed_from_u64(seed),
            transcript: Transcript::new(mode),
            round: 0,
        }
    }

    pub fn mode(&self) -> AggregationMode {
        self.mode
    }

    pub fn n_clients(&self) -> usize {
        self.n_clients
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn field(&self) -> &FieldParams {
        &self.field
    }

    fn log(&mut self, sender: Principal, receiver: Principal, label: String, payload: Payload) {
        self.transcript.record(TranscriptEntry {
            round: self.round,
            sender,
            receiver,
            label,
            payload,
        });
    }

    /// Sums one vector per client elementwise and broadcasts the total.
    ///
    /// Clear mode sends each summand as `{label}.raw`. Smpc mode runs the
    /// three-phase secure sum: `{label}.share` between clients,
    /// `{label}.partial` up to the aggregator, decoded total broadcast under
    /// the bare label. Either way the caller gets the broadcast value.
    pub fn aggregate_vectors(
        &mut self,
        label: &str,
        per_client: &[Vec<f64>],
    ) -> Result<Vec<f64>, FedError> {
        self.aggregate_vectors_with(label, per_client, |v| v)
    }

    /// Like [`Session::aggregate_vectors`], but the aggregator applies
    /// `transform` to the decoded total before broadcasting, so clients only
    /// ever see the transformed value.
    pub fn aggregate_vectors_with<T>(
        &mut self,
        label: &str,
        per_client: &[Vec<f64>],
        transform: T,
    ) -> Result<Vec<f64>, FedError>
    where
        T: FnOnce(Vec<f64>) -> Vec<f64>,
    {
        let len = self.validate_inputs(label, per_client)?;
        let total = match self.mode {
            AggregationMode::Clear => {
                for (s, values) in per_client.iter().enumerate() {
                    self.log(
                        Principal::Client(s),
                        Principal::Aggregator,
                        format!("{label}.raw"),
                        Payload::Reals(values.clone()),
                    );
                }
                let mut total = vec![0.0; len];
                for values in per_client {
                    for (t, v) in total.iter_mut().zip(values) {
                        *t += v;
                    }
                }
                total
            }
            AggregationMode::Smpc => self.secure_sum_logged(label, per_client)?,
        };
        let out = transform(total);
        self.aggregator_broadcast(label, out.clone());
        Ok(out)
    }

    /// Three-phase secure sum with every message recorded.
    fn secure_sum_logged(
        &mut self,
        label: &str,
        per_client: &[Vec<f64>],
    ) -> Result<Vec<f64>, FedError> {
        let n = self.n_clients;
        let len = per_client[0].len();
        let zero = FieldElement(0);

        // Phase 1: each client splits every element into n shares and sends
        // share t to client t (keeping its own share is logged too, so the
        // transcript is the complete communication pattern).
        let mut partial = vec![vec![zero; len]; n];
        for (s, values) in per_client.iter().enumerate() {
            let mut outgoing = vec![Vec::with_capacity(len); n];
            for &v in values {
                let encoded = self.field.encode(v)?;
                let shares = self.field.make_shares(encoded, n, &mut self.rng)?;
                for (t, share) in shares.into_iter().enumerate() {
                    outgoing[t].push(share);
                }
            }
            for (t, shares) in outgoing.into_iter().enumerate() {
                for (acc, share) in partial[t].iter_mut().zip(&shares) {
                    *acc = self.field.add(*acc, *share);
                }
                self.log(
                    Principal::Client(s),
                    Principal::Client(t),
                    format!("{label}.share"),
                    Payload::Fields(shares),
                );
            }
        }

        // Phase 2: each client forwards the sum of the shares it received.
        for t in 0..n {
            let sums = partial[t].clone();
            self.log(
                Principal::Client(t),
                Principal::Aggregator,
                format!("{label}.partial"),
                Payload::Fields(sums),
            );
        }

        // Phase 3: the aggregator adds the partials; the share randomness
        // cancels and the field total decodes to the plain sum.
        let mut total = vec![zero; len];
        for sums in &partial {
            for (acc, s) in total.iter_mut().zip(sums) {
                *acc = self.field.add(*acc, *s);
            }
        }
        Ok(total.into_iter().map(|e| self.field.decode(e)).collect())
    }

    /// Elementwise maximum of one scalar per client.
    ///
    /// Maxima are not additively shareable, so this exchange is plaintext in
    /// both modes; protocols that rely on it leak the exchanged magnitudes by
    /// construction.
    pub fn aggregate_max(
        &mut self,
        label: &str,
        per_client: &[f64],
    ) -> Result<f64, FedError> {
        if per_client.len() != self.n_clients {
            return Err(FedError::InputCount {
                expected: self.n_clients,
                got: per_client.len(),
            });
        }
        for (s, &v) in per_client.iter().enumerate() {
            self.log(
                Principal::Client(s),
                Principal::Aggregator,
                format!("{label}.raw"),
                Payload::Reals(vec![v]),
            );
        }
        let max = per_client.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.aggregator_broadcast(label, vec![max]);
        Ok(max)
    }

    /// Plaintext upload from one client, outside any secure sum.
    pub fn send_to_aggregator(&mut self, label: &str, client: usize, values: Vec<f64>) {
        self.log(
            Principal::Client(client),
            Principal::Aggregator,
            format!("{label}.raw"),
            Payload::Reals(values),
        );
    }

    /// Directed message from the aggregator to a single client.
    pub fn aggregator_send(&mut self, label: &str, client: usize, values: Vec<f64>) {
        self.log(
            Principal::Aggregator,
            Principal::Client(client),
            label.to_string(),
            Payload::Reals(values),
        );
    }

    /// Message from the aggregator to every client.
    pub fn aggregator_broadcast(&mut self, label: &str, values: Vec<f64>) {
        self.log(
            Principal::Aggregator,
            Principal::Broadcast,
            label.to_string(),
            Payload::Reals(values),
        );
    }

    /// Ends the current round; everything recorded afterwards belongs to the
    /// next one.
    pub fn barrier(&mut self) {
        self.round += 1;
    }

    /// Closes the session, returning the transcript and the number of
    /// completed rounds.
    pub fn finish(self) -> (Transcript, usize) {
        (self.transcript, self.round)
    }

    fn validate_inputs(&self, _label: &str, per_client: &[Vec<f64>]) -> Result<usize, FedError> {
        if per_client.len() != self.n_clients {
            return Err(FedError::InputCount {
                expected: self.n_clients,
                got: per_client.len(),
            });
        }
        let len = per_client[0].len();
        for (client, values) in per_client.iter().enumerate() {
            if values.len() != len {
                return Err(FedError::UnevenVectors {
                    client,
                    expected: len,
                    got: values.len(),
                });
            }
        }
        Ok(len)
    }
}
