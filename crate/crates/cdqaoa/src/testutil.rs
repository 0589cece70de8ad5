//! Shared oracles for unit tests: Pauli strings, independent matrix
//! exponentials, and small fixture instances.

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::operators::{DenseOperator, SymmetryTag};
use crate::spin_model::SpinInstance;

pub fn pauli(which: char) -> Mat<Complex64> {
    let z = Complex64::ZERO;
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let rows = match which {
        'I' => [[one, z], [z, one]],
        'X' => [[z, one], [one, z]],
        'Y' => [[z, -i], [i, z]],
        'Z' => [[one, z], [z, -one]],
        _ => panic!("unknown Pauli {which}"),
    };
    Mat::from_fn(2, 2, |r, c| rows[r][c])
}

pub fn kron(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Tensor product of per-site operators, site 0 first in the slice and least
/// significant in the basis index.
pub fn kron_chain(site_ops: &[Mat<Complex64>]) -> Mat<Complex64> {
    let mut acc = Mat::from_fn(1, 1, |_, _| Complex64::new(1.0, 0.0));
    for op in site_ops {
        acc = kron(op, &acc);
    }
    acc
}

/// Matrix exponential by scaling-and-squaring with a Taylor series.
/// Independent of the eigendecomposition route used by the library.
pub fn expm_series(m: &Mat<Complex64>) -> Mat<Complex64> {
    let dim = m.nrows();
    let norm: f64 = (0..dim)
        .map(|j| (0..dim).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new(1.0 / f64::from(2u32.pow(squarings) as u32), 0.0);
    let scaled = Mat::from_fn(dim, dim, |i, j| m[(i, j)] * scale);
    let mut result = Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::ZERO
        }
    });
    let mut term = result.clone();
    for k in 1..=24u32 {
        term = &term * &scaled;
        let inv = Complex64::new(1.0 / f64::from(k), 0.0);
        term = Mat::from_fn(dim, dim, |i, j| term[(i, j)] * inv);
        result = result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn random_hermitian(dim: usize, seed: u64) -> DenseOperator {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut m = Mat::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }
    let herm = Mat::from_fn(dim, dim, |i, j| {
        (m[(i, j)] + m[(j, i)].conj()) * Complex64::new(0.5, 0.0)
    });
    DenseOperator::new(herm, SymmetryTag::Hermitian).expect("hermitian by construction")
}

pub fn single_edge(j: f64) -> SpinInstance {
    SpinInstance {
        n_spins: 2,
        seed: 0,
        couplings: vec![j],
        instance_id: "edge".into(),
    }
}
