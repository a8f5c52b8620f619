//! Seeded random instances for tests, property suites and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{operator_norm, Matrix, Subspace, Vector};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard normal entries.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniformly distributed `k`-dimensional subspace of `R^d` (almost surely of
/// exact rank `k`).
pub fn random_subspace<R: Rng>(rng: &mut R, d: usize, k: usize) -> Subspace {
    assert!(k <= d, "subspace rank exceeds ambient dimension");
    if k == 0 {
        return Subspace::trivial(d);
    }
    loop {
        let s = Subspace::span(&random_matrix(rng, d, k)).expect("finite gaussian matrix");
        if s.rank() == k {
            return s;
        }
    }
}

/// Random symmetric PSD matrix `G G^T / n`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    &g * g.transpose() / n.max(1) as f64
}

/// Gaussian matrix rescaled to spectral norm `norm`.
pub fn random_matrix_with_norm<R: Rng>(rng: &mut R, rows: usize, cols: usize, norm: f64) -> Matrix {
    let g = random_matrix(rng, rows, cols);
    let s = operator_norm(&g);
    if s == 0.0 {
        g
    } else {
        g * (norm / s)
    }
}

/// Random symmetric PSD matrix with spectral norm `norm`.
pub fn random_psd_with_norm<R: Rng>(rng: &mut R, n: usize, norm: f64) -> Matrix {
    let p = random_psd(rng, n);
    let s = operator_norm(&p);
    if s == 0.0 {
        p
    } else {
        p * (norm / s)
    }
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Uniform integer draw from `lo..=hi`.
pub fn uniform_int<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}
