//! Statevector simulation of QAOA and its counterdiabatic variants on random
//! fully-connected Ising instances.
//!
//! The crate generates ensembles of instances with couplings uniform in
//! `[-1, 1]`, computes their exact classical spectra, optimizes three nested
//! ansatz variants (plain QAOA, QAOA-CD with a first-order counterdiabatic
//! layer, QAOA-2CD with a second-order correction) by multistart gradient
//! descent, and aggregates residual energies and ground-state fidelities,
//! optionally resolved by spectral-gap zones.
//!
//! ```
//! use cdqaoa::{generate_instance, spectrum, AnsatzContext, Variant, VariationalParams};
//!
//! let inst = generate_instance(5, 42)?;
//! let spec = spectrum(&inst, 1e-9)?;
//! assert!(spec.gap > 0.0);
//!
//! let ctx = AnsatzContext::new(&inst, Variant::Qaoa)?;
//! let params = VariationalParams::zeros(Variant::Qaoa, 1);
//! // at zero angles the state is still the mixer ground state
//! assert!(ctx.cost(&params)?.abs() < 1e-12);
//! # Ok::<(), cdqaoa::Error>(())
//! ```

mod error;

pub mod ansatz;
pub mod harness;
pub mod metrics;
pub mod operators;
pub mod optimizer;
pub mod spin_model;

#[cfg(test)]
pub(crate) mod testutil;

pub use ansatz::{
    initial_state, AnsatzContext, ParamFamily, StateVector, Variant, VariationalParams,
};
pub use error::{Error, Result};
pub use harness::{
    disorder_stats, gap_histogram, landscape_scan, read_record_log, run_ensemble,
    run_ensemble_logged, steps_to_threshold, zone_binning, EnsembleConfig, EnsembleRun,
    EnsembleStats, FailedRun, GroupStats, LandscapeScan, ZoneAssignment,
};
pub use metrics::{
    excited_overlap, fidelity_ground_manifold, residual_energy, MetricRecord,
};
pub use operators::{DenseOperator, OperatorCache, SymmetryTag};
pub use optimizer::{
    minimize_variational, minimize_with_embedding, minimize_with_starts, OptimizationResult,
    OptimizerConfig,
    RestartRecord,
};
pub use spin_model::{
    diagonal_energies, generate_instance, spectrum, Level, SpinInstance, Spectrum,
    DEFAULT_CLUSTER_TOL,
};

/// Runs the guide's code blocks as doc-tests so book and crate stay in sync.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/instances.md")]
    pub struct Instances;
    #[doc = include_str!("../../../book/src/ansatz.md")]
    pub struct Ansatz;
    #[doc = include_str!("../../../book/src/optimization.md")]
    pub struct Optimization;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
