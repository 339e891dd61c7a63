//! Additive secret sharing over a prime field, with fixed-point encoding of
//! reals.
//!
//! The aggregation protocols only ever *add* secret values, so the entire
//! field arithmetic needed here is modular addition and negation. Shares of
//! a value `x` are `S - 1` uniform field elements plus one balancing
//! element; any proper subset of shares is uniformly distributed and
//! carries no information about `x`.
//!
//! Reals are encoded as `round(x * 2^frac_bits) mod p`, negatives in the
//! upper half of the field. With the default 40 fractional bits the
//! round-trip error of a single value is at most `2^-41`, and a sum of `S`
//! encoded values decodes to the true sum within `S * 2^-41 + 2^-41`.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SmpcError {
    #[error("no prime found with {bits} bits")]
    NoPrime { bits: u32 },
    #[error("prime must have 8..=127 bits, got {bits}")]
    PrimeBitsOutOfRange { bits: u32 },
    #[error("value {value} exceeds encodable magnitude {limit}")]
    MagnitudeOverflow { value: f64, limit: f64 },
    #[error("cannot encode non-finite value")]
    NonFiniteValue,
    #[error("secret sharing needs at least 2 parties, got {got}")]
    TooFewParties { got: usize },
}

/// An element of the prime field, always reduced mod `p`.
///
/// Equality and ordering are on the canonical representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldElement(pub u128);

/// Field and encoding parameters shared by all parties of a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldParams {
    /// Field modulus, prime, at most 127 bits so that `a + b` never
    /// overflows u128.
    pub prime: u128,
    /// Fixed-point fractional bits.
    pub frac_bits: u32,
}

/// Deterministic Miller-Rabin on u128. The witness set covers every prime
/// below 3317044064679887385961981 (more than 2^127), so the answer is
/// exact, not probabilistic, for the sizes used here.
fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &[2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let mut x = pow_mod(a % n, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `(a * b) mod m` by add-and-double; safe because `m < 2^127` keeps every
/// intermediate sum below 2^128.
fn mul_mod(mut a: u128, mut b: u128, m: u128) -> u128 {
    debug_assert!(m.leading_zeros() >= 1, "modulus must leave one spare bit");
    a %= m;
    let mut acc = 0u128;
    while b > 0 {
        if b & 1 == 1 {
            acc = add_mod_raw(acc, a, m);
        }
        a = add_mod_raw(a, a, m);
        b >>= 1;
    }
    acc
}

fn pow_mod(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1u128 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

#[inline]
fn add_mod_raw(a: u128, b: u128, m: u128) -> u128 {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

impl FieldParams {
    /// Largest prime below `2^bits`, paired with the given fixed-point
    /// precision. `bits` is capped at 127 to keep additions overflow-free.
    pub fn new(bits: u32, frac_bits: u32) -> Result<Self, SmpcError> {
        if !(8..=127).contains(&bits) {
            return Err(SmpcError::PrimeBitsOutOfRange { bits });
        }
        let top = (1u128 << bits) - 1;
        let mut candidate = top;
        // A prime gap of 10^4 below 2^127 would be far beyond anything
        // known; the scan terminates in practice within a few hundred steps.
        for _ in 0..100_000 {
            if is_prime(candidate) {
                if frac_bits >= 120 || (1u128 << (frac_bits + 2)) >= candidate {
                    return Err(SmpcError::PrimeBitsOutOfRange { bits });
                }
                return Ok(FieldParams {
                    prime: candidate,
                    frac_bits,
                });
            }
            candidate -= 1;
        }
        Err(SmpcError::NoPrime { bits })
    }

    /// The default parameters: p = 2^127 - 1 (a Mersenne prime) and 40
    /// fractional bits.
    pub fn default_params() -> Self {
        FieldParams {
            prime: (1u128 << 127) - 1,
            frac_bits: 40,
        }
    }

    /// Largest representable magnitude, `2^frac_bits`. Values at or above
    /// this cannot be encoded.
    pub fn max_encodable_magnitude(&self) -> f64 {
        (1u128 << self.frac_bits) as f64
    }

    /// Fixed-point encoding: `round(v * 2^frac_bits)`, negatives wrapped to
    /// `p - |.|`.
    pub fn encode(&self, v: f64) -> Result<FieldElement, SmpcError> {
        if !v.is_finite() {
            return Err(SmpcError::NonFiniteValue);
        }
        let limit = self.max_encodable_magnitude();
        if v.abs() >= limit {
            return Err(SmpcError::MagnitudeOverflow { value: v, limit });
        }
        let scaled = (v * (1u64 << self.frac_bits) as f64).round();
        let mag = scaled.abs() as u128;
        if scaled < 0.0 {
            Ok(FieldElement((self.prime - mag) % self.prime))
        } else {
            Ok(FieldElement(mag % self.prime))
        }
    }

    /// Inverse of [`encode`](Self::encode). Elements in the upper half of
    /// the field decode as negatives.
    pub fn decode(&self, e: FieldElement) -> f64 {
        let half = self.prime / 2;
        let scale = (1u64 << self.frac_bits) as f64;
        if e.0 > half {
            -(((self.prime - e.0) as f64) / scale)
        } else {
            (e.0 as f64) / scale
        }
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(add_mod_raw(a.0, b.0, self.prime))
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.0 == 0 {
            FieldElement(0)
        } else {
            FieldElement(self.prime - a.0)
        }
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    /// Uniform field element via rejection sampling on the bit width of
    /// `p`; rejection keeps the distribution exactly uniform.
    pub fn random_element(&self, rng: &mut ChaCha20Rng) -> FieldElement {
        let bits = 128 - self.prime.leading_zeros();
        let mask = if bits == 128 {
            u128::MAX
        } else {
            (1u128 << bits) - 1
        };
        loop {
            let raw = ((rng.gen::<u64>() as u128) << 64 | rng.gen::<u64>() as u128) & mask;
            if raw < self.prime {
                return FieldElement(raw);
            }
        }
    }

    /// Splits `value` into `count` additive shares that sum to it mod `p`.
    /// Every proper subset of the output is uniform. A single "share" would
    /// be the secret itself, so fewer than two parties is rejected.
    pub fn make_shares(
        &self,
        value: FieldElement,
        count: usize,
        rng: &mut ChaCha20Rng,
    ) -> Result<Vec<FieldElement>, SmpcError> {
        if count < 2 {
            return Err(SmpcError::TooFewParties { got: count });
        }
        let mut shares: Vec<FieldElement> = (0..count - 1)
            .map(|_| self.random_element(rng))
            .collect();
        let partial = shares
            .iter()
            .fold(FieldElement(0), |acc, &s| self.add(acc, s));
        shares.push(self.sub(value, partial));
        Ok(shares)
    }

    /// Sums a slice of elements in the field.
    pub fn sum(&self, elems: &[FieldElement]) -> FieldElement {
        elems
            .iter()
            .fold(FieldElement(0), |acc, &e| self.add(acc, e))
    }
}

/// Reference three-phase secure sum over one real vector per party.
///
/// Phase 1: party `s` encodes its vector and deals one share of every
/// element to each party. Phase 2: each party adds the shares it holds into
/// a partial sum. Phase 3: the partials are added and decoded. The share
/// randomness cancels exactly, so the result does not depend on `rng`; it
/// equals the field sum of the encodings, decoded.
///
/// This is the protocol in its plainest form. Federated sessions run the
/// same phases but record every message in a transcript.
pub fn secure_sum(
    params: &FieldParams,
    per_party: &[Vec<f64>],
    rng: &mut ChaCha20Rng,
) -> Result<Vec<f64>, SmpcError> {
    let n = per_party.len();
    if n < 2 {
        return Err(SmpcError::TooFewParties { got: n });
    }
    let len = per_party[0].len();
    assert!(
        per_party.iter().all(|v| v.len() == len),
        "all parties must contribute equally long vectors"
    );
    let mut partials = vec![vec![FieldElement(0); len]; n];
    for values in per_party {
        for (e, &v) in values.iter().enumerate() {
            let shares = params.make_shares(params.encode(v)?, n, rng)?;
            for (t, share) in shares.into_iter().enumerate() {
                partials[t][e] = params.add(partials[t][e], share);
            }
        }
    }
    let mut total = vec![FieldElement(0); len];
    for partial in &partials {
        for (acc, &s) in total.iter_mut().zip(partial) {
            *acc = params.add(*acc, s);
        }
    }
    Ok(total.into_iter().map(|e| params.decode(e)).collect())
}
