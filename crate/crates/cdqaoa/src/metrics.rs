//! Quality measures of an optimized state: residual energy, ground-manifold
//! fidelity and per-level overlap.
//!
//! The target Hamiltonian is diagonal, so every clustered level is spanned by
//! computational basis states and all overlaps reduce to sums of basis
//! probabilities. This makes the fidelity exact for any even ground
//! degeneracy without choosing a basis inside the manifold.

use serde::{Deserialize, Serialize};

use crate::ansatz::{StateVector, Variant};
use crate::spin_model::Spectrum;
use crate::{Error, Result};

/// One evaluated `(instance, variant, depth)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub instance_id: String,
    pub seed: u64,
    pub variant: Variant,
    /// Circuit depth `p`.
    pub depth: usize,
    /// Spectral gap of the instance.
    pub gap: f64,
    /// Gap-zone index, filled by the harness after zone binning.
    pub zone: Option<usize>,
    pub best_cost: f64,
    pub residual_energy: f64,
    pub fidelity: f64,
    /// Probability on the first excited clustered level.
    pub excited_probability: f64,
}

/// Normalized distance from the ground energy,
/// `(E - E_min) / (E_max - E_min)`.
///
/// Values inside `[-1e-12, 0)` are roundoff and clip to zero; anything more
/// negative is a real inconsistency and is returned as-is for the caller's
/// invariant checks to catch.
pub fn residual_energy(energy: f64, spectrum: &Spectrum) -> Result<f64> {
    let width = spectrum.e_max - spectrum.e_min;
    if width <= 0.0 {
        return Err(Error::UndefinedNormalization);
    }
    let eps = (energy - spectrum.e_min) / width;
    if (-1e-12..0.0).contains(&eps) {
        Ok(0.0)
    } else {
        Ok(eps)
    }
}

/// Total probability on the ground manifold.
pub fn fidelity_ground_manifold(state: &StateVector, spectrum: &Spectrum) -> f64 {
    spectrum
        .ground_states
        .iter()
        .map(|&b| state.amplitudes[b].norm_sqr())
        .sum()
}

/// Total probability on the basis states of one clustered level.
pub fn excited_overlap(state: &StateVector, spectrum: &Spectrum, level_index: usize) -> Result<f64> {
    let states = spectrum
        .level_states
        .get(level_index)
        .ok_or(Error::LevelOutOfRange {
            index: level_index,
            levels: spectrum.level_states.len(),
        })?;
    Ok(states.iter().map(|&b| state.amplitudes[b].norm_sqr()).sum())
}

/// Evaluates all measures of one optimized state.
pub fn evaluate_state(
    state: &StateVector,
    spectrum: &Spectrum,
    energy: f64,
) -> Result<(f64, f64, f64)> {
    let residual = residual_energy(energy, spectrum)?;
    let fidelity = fidelity_ground_manifold(state, spectrum);
    let excited = excited_overlap(state, spectrum, 1)?;
    Ok((residual, fidelity, excited))
}
