//! Fixtures shared by unit tests.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::layout::{BlockLayout, MaskedMatrix};
use crate::linalg::{frobenius, mul, sub};

pub fn random(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57);
    let mut out = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    out
}

/// Contiguous layout with `X = ΘΦᵀ + noise·E`; returns the masked matrix and Θ.
pub fn low_rank_instance(
    group_sizes: &[usize],
    block_sizes: &[usize],
    indicator: &[[u8; 3]],
    r: usize,
    noise: f64,
    seed: u64,
) -> (MaskedMatrix, Mat<f64>) {
    let ind: Vec<Vec<bool>> = indicator
        .iter()
        .map(|row| row[..block_sizes.len()].iter().map(|&v| v == 1).collect())
        .collect();
    let layout = BlockLayout::contiguous(group_sizes, block_sizes, ind).unwrap();
    let theta = random(layout.n, r, seed);
    let phi = random(layout.p, r, seed + 1000);
    let e = random(layout.n, layout.p, seed + 2000);
    let signal = mul(theta.as_ref(), phi.as_ref().transpose());
    let full = Mat::from_fn(layout.n, layout.p, |i, j| signal[(i, j)] + noise * e[(i, j)]);
    (MaskedMatrix::from_complete(&full, layout).unwrap(), theta)
}

/// ‖P_a − P_b‖_F via explicit projectors (small inputs only).
pub fn projector_distance(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let pa = mul(a.as_ref(), a.as_ref().transpose());
    let pb = mul(b.as_ref(), b.as_ref().transpose());
    frobenius(sub(pa.as_ref(), pb.as_ref()).as_ref())
}
