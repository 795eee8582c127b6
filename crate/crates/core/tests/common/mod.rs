#![allow(dead_code)]

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wigner_gup::{
    xi_vector, FockDensityMatrix, GaussianState, HalfInt, MomentMatrix, SymplecticMap, XiVector,
    C64,
};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Unit-determinant map with every entry in `[-2, 2]`.
pub fn random_symplectic(rng: &mut ChaCha8Rng) -> SymplecticMap {
    loop {
        let (a, b, cc): (f64, f64, f64) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        if a.abs() < 1e-3 {
            continue;
        }
        let d = (1.0 + b * cc) / a;
        if d.abs() <= 2.0 {
            return SymplecticMap::new(a, b, cc, d).unwrap();
        }
    }
}

/// Gaussian with covariance `spread * (hbar/2) S S^T` and a random mean,
/// `spread` drawn from the given range. `spread = 1` is a pure state; below
/// 1 it is unphysical.
pub fn random_gaussian(
    rng: &mut ChaCha8Rng,
    hbar: f64,
    spread: RangeInclusive<f64>,
) -> GaussianState {
    let spread = rng.gen_range(spread);
    let s = random_symplectic(rng).as_matrix();
    let v = s * s.transpose() * (hbar / 2.0 * spread);
    let mean = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    GaussianState::new(mean, [[v[(0, 0)], v[(0, 1)]], [v[(0, 1)], v[(1, 1)]]]).unwrap()
}

/// Smallest eigenvalue of a hermitian matrix, straight from nalgebra.
pub fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    (0..dim)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Mixture of up to four random pure states in `2..=max_dim` levels.
pub fn random_density_matrix(rng: &mut ChaCha8Rng, max_dim: usize) -> FockDensityMatrix {
    let dim = rng.gen_range(2..=max_dim);
    let rank = rng.gen_range(1..=dim.min(4));
    let states: Vec<(f64, Vec<C64>)> = (0..rank)
        .map(|_| (rng.gen_range(0.05..1.0), random_vector(rng, dim)))
        .collect();
    FockDensityMatrix::mixture(&states).unwrap()
}

/// Hermitian matrix shaped like `M_J` with unit `(0,0)` entry. Starts from a
/// positive definite Gram matrix and lowers a random set of blocks by a
/// multiple of the shift that would make it singular, so roughly half the
/// samples are infeasible.
pub fn random_structured_matrix(rng: &mut ChaCha8Rng, top: HalfInt) -> MomentMatrix {
    let xi = xi_vector(top);
    let n = xi.len();
    let b = DMatrix::from_fn(n, n, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let mut gram = &b * b.adjoint();
    let g00 = gram[(0, 0)].re;
    gram /= c(g00, 0.0);

    let blocks: Vec<bool> = loop {
        let pick: Vec<bool> = (0..top.twice()).map(|_| rng.gen_bool(0.5)).collect();
        if pick.iter().any(|&x| x) {
            break pick;
        }
    };
    let mut shift = DMatrix::<C64>::zeros(n, n);
    for (k, &on) in blocks.iter().enumerate() {
        if on {
            let j2 = k as u32 + 1;
            let start = XiVector::block_offset(j2);
            for i in start..start + j2 as usize + 1 {
                shift[(i, i)] = c(1.0, 0.0);
            }
        }
    }
    let shifted = |lam: f64| &gram - &shift * c(lam, 0.0);
    // the minimum eigenvalue decreases monotonically in the shift
    let (mut lo, mut hi) = (0.0, 1.0);
    while min_eigenvalue(&shifted(hi)) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_eigenvalue(&shifted(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = loop {
        let u: f64 = rng.gen_range(-0.5..0.5);
        if u.abs() > 0.01 {
            break u;
        }
    };
    MomentMatrix::from_entries(top, shifted(lo * (1.0 + u))).unwrap()
}
