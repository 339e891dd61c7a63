//! Deterministic synthetic data for tests, benchmarks and the CLI's
//! `--synthetic` mode.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Matrix;

/// Seeded RNG used everywhere randomness is needed; one stream type keeps
/// runs reproducible across platforms.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Matrix of iid standard normal entries, row major, fully determined by the
/// seed.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Matrix::from_rows(rows, cols, data).expect("generated data is finite")
}

/// Upper-triangular matrix with diagonal entries drawn uniformly from
/// `[0.5, 2.5]` (strictly positive) and off-diagonal entries standard
/// normal. Used as well-conditioned ground truth where a positive diagonal
/// is part of the setup.
pub fn random_upper_triangular(dim: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    let mut m = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                m[(i, j)] = rng.gen_range(0.5..2.5);
            } else {
                m[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
    }
    m
}

/// Splits `total` rows into `parts` contiguous chunk sizes as evenly as
/// possible, earlier chunks taking the remainder.
pub fn even_sizes(total: usize, parts: usize) -> Vec<usize> {
    assert!(parts > 0 && parts <= total, "need 1..=total parts");
    let base = total / parts;
    let extra = total % parts;
    (0..parts)
        .map(|i| if i < extra { base + 1 } else { base })
        .collect()
}
