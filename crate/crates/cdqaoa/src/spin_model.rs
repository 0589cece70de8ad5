//! Random fully-connected Ising instances and their exact classical spectra.
//!
//! An instance is a set of couplings `J_ij` for all unordered pairs `i < j`,
//! drawn uniformly from `[-1, 1]`. The target Hamiltonian is diagonal in the
//! computational basis, so the full spectrum is obtained by enumerating all
//! `2^N` spin assignments. Bit convention: bit `k` of a basis index `b` maps
//! to the spin value `z_k = +1` for bit 0 and `z_k = -1` for bit 1.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance used to cluster floating-point-degenerate levels.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-9;

/// A random fully-connected Ising instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinInstance {
    pub n_spins: usize,
    pub seed: u64,
    /// Couplings in row-major `i < j` order: `(0,1), (0,2), ..., (N-2,N-1)`.
    pub couplings: Vec<f64>,
    pub instance_id: String,
}

impl SpinInstance {
    /// Hilbert-space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    /// Index into `couplings` for the pair `(i, j)` with `i < j`.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n_spins);
        i * self.n_spins - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[self.pair_index(i, j)]
    }

    /// Checks the coupling count and range invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n_spins < 2 {
            return Err(Error::InvalidSize {
                got: self.n_spins,
                min: 2,
            });
        }
        let expected = self.n_spins * (self.n_spins - 1) / 2;
        if self.couplings.len() != expected {
            return Err(Error::BadCouplings {
                expected,
                got: self.couplings.len(),
            });
        }
        if let Some(&j) = self.couplings.iter().find(|j| !(-1.0..=1.0).contains(*j)) {
            return Err(Error::BadConfig(format!("coupling {j} outside [-1, 1]")));
        }
        Ok(())
    }
}

/// One clustered energy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub multiplicity: usize,
}

/// Clustered classical spectrum of an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    /// Distinct levels in ascending energy order.
    pub levels: Vec<Level>,
    pub e_min: f64,
    pub e_max: f64,
    /// Gap between the two lowest distinct levels.
    pub gap: f64,
    /// Basis indices of the ground manifold, ascending.
    pub ground_states: Vec<usize>,
    /// Basis indices grouped per level, ascending within each level.
    pub level_states: Vec<Vec<usize>>,
}

impl Spectrum {
    pub fn ground_multiplicity(&self) -> usize {
        self.levels[0].multiplicity
    }
}

/// Draws a fully-connected instance with couplings uniform in `[-1, 1]`.
///
/// The PRNG is a ChaCha12 stream seeded with `seed` alone, so regeneration
/// from `(n_spins, seed)` is bit-for-bit reproducible and each instance of an
/// ensemble owns an independent stream.
pub fn generate_instance(n_spins: usize, seed: u64) -> Result<SpinInstance> {
    if n_spins < 2 {
        return Err(Error::InvalidSize {
            got: n_spins,
            min: 2,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-1.0f64, 1.0).expect("valid range");
    let n_pairs = n_spins * (n_spins - 1) / 2;
    let couplings = (0..n_pairs).map(|_| dist.sample(&mut rng)).collect();
    Ok(SpinInstance {
        n_spins,
        seed,
        couplings,
        instance_id: format!("N{n_spins}-s{seed}"),
    })
}

/// Energy of every computational basis state under `H_T = sum_{i<j} J_ij z_i z_j`.
pub fn diagonal_energies(instance: &SpinInstance) -> Vec<f64> {
    let dim = instance.dim();
    let mut energies = vec![0.0f64; dim];
    let mut idx = 0;
    for i in 0..instance.n_spins {
        for j in (i + 1)..instance.n_spins {
            let j_ij = instance.couplings[idx];
            idx += 1;
            for (b, e) in energies.iter_mut().enumerate() {
                // z_i z_j = +1 when bits i and j agree, -1 otherwise.
                let anti = ((b >> i) ^ (b >> j)) & 1;
                *e += if anti == 1 { -j_ij } else { j_ij };
            }
        }
    }
    energies
}

/// Clusters the sorted energies into distinct levels and extracts the gap.
///
/// Consecutive sorted energies closer than `cluster_tol` fall into the same
/// level. Fails with [`Error::DegenerateSpectrum`] when only one level exists
/// (e.g. all couplings zero), since the gap is undefined there.
pub fn spectrum(instance: &SpinInstance, cluster_tol: f64) -> Result<Spectrum> {
    if cluster_tol <= 0.0 {
        return Err(Error::BadTolerance(cluster_tol));
    }
    instance.validate()?;
    let energies = diagonal_energies(instance);
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| {
        energies[a]
            .partial_cmp(&energies[b])
            .expect("finite energies")
            .then(a.cmp(&b))
    });

    let mut levels: Vec<Level> = Vec::new();
    let mut level_states: Vec<Vec<usize>> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for &b in &order {
        let e = energies[b];
        if levels.is_empty() || e - prev > cluster_tol {
            levels.push(Level {
                energy: e,
                multiplicity: 0,
            });
            level_states.push(Vec::new());
        }
        let last = levels.len() - 1;
        levels[last].multiplicity += 1;
        level_states[last].push(b);
        prev = e;
    }
    for states in &mut level_states {
        states.sort_unstable();
    }
    if levels.len() < 2 {
        return Err(Error::DegenerateSpectrum);
    }
    let e_min = energies[order[0]];
    let e_max = energies[*order.last().expect("nonempty")];
    Ok(Spectrum {
        gap: levels[1].energy - levels[0].energy,
        e_min,
        e_max,
        ground_states: level_states[0].clone(),
        levels,
        level_states,
    })
}
