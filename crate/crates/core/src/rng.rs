//! Seeded randomness. Every stochastic routine takes an explicit `u64`
//! seed and builds its own ChaCha8 stream, so results never depend on
//! call order across modules.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child seed for stream `index` of `master` (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws an index from `p` by inversion. Falls back to the last index with
/// positive mass if rounding leaves `u` past the cumulative total.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            acc += pi;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Flat Dirichlet(1, ..., 1) draw via normalized exponentials.
pub fn dirichlet_ones<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n)
        .map(|_| {
            // random() is in [0, 1); shift to (0, 1] so ln never sees zero.
            let u: f64 = 1.0 - rng.random::<f64>();
            -libm::log(u)
        })
        .collect();
    let total: f64 = e.iter().sum();
    if total > 0.0 {
        e.into_iter().map(|x| x / total).collect()
    } else {
        let mut v = alloc::vec![0.0; n];
        v[0] = 1.0;
        v
    }
}

/// Dirichlet draw placed on `k` distinct random coordinates of an `n`-vector.
pub fn sparse_dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<f64> {
    let k = k.clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let w = dirichlet_ones(rng, k);
    let mut out = alloc::vec![0.0; n];
    for (i, &slot) in idx[..k].iter().enumerate() {
        out[slot] = w[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_respects_zero_mass() {
        let mut rng = seeded(1);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&mut rng, &[0.0, 1.0, 0.0]), 1);
        }
    }

    #[test]
    fn dirichlet_rows_are_distributions() {
        let mut rng = seeded(2);
        for n in 1..10 {
            let p = dirichlet_ones(&mut rng, n);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let q = sparse_dirichlet(&mut rng, n, 2);
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(q.iter().filter(|x| **x > 0.0).count() <= 2);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
