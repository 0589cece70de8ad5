//! Multistart local optimization of the variational energy.
//!
//! Each restart draws a starting point uniformly from a per-family box and
//! runs a projected L-BFGS descent with box bounds a configurable multiple of
//! the init box. Restarts draw their starting points from one sequential
//! ChaCha12 stream, so a run with more restarts reproduces all points of a
//! run with fewer ones, and the whole procedure is deterministic in the
//! `(optimizer seed, instance seed, variant, depth)` tuple.

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzContext, ParamFamily, Variant, VariationalParams};
use crate::{Error, Result};

mod lbfgs;

pub use lbfgs::{LbfgsOutcome, LbfgsSettings};

/// Settings of the multistart search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of random starting points per `(instance, variant, depth)`.
    pub restarts: usize,
    /// Half-width of the init box for the mixer and phase angles.
    pub angle_init_half_width: f64,
    /// Half-width of the init box for the first-order correction coefficients.
    pub cd_init_half_width: f64,
    /// Half-width of the init box for the second-order correction coefficients.
    pub second_order_init_half_width: f64,
    /// Solver box bounds are the init box scaled by this factor.
    pub bound_scale: f64,
    /// Convergence threshold on the projected-gradient infinity norm.
    pub grad_tol: f64,
    /// Iteration cap per restart.
    pub max_iters: usize,
    /// Stream seed mixed with the instance seed, variant and depth.
    pub seed: u64,
    /// Seed each depth and variant from the best lower point when available.
    pub warm_start_embedding: bool,
    /// Keep the iterate sequence of the winning restart.
    pub record_trajectory: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            angle_init_half_width: std::f64::consts::PI,
            cd_init_half_width: 1.0,
            second_order_init_half_width: 1.0,
            bound_scale: 1.0,
            grad_tol: 1e-9,
            max_iters: 1000,
            seed: 0,
            warm_start_embedding: true,
            record_trajectory: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::BadConfig("restarts must be at least 1".into()));
        }
        if !(self.angle_init_half_width > 0.0
            && self.cd_init_half_width > 0.0
            && self.second_order_init_half_width > 0.0
            && self.bound_scale >= 1.0
            && self.grad_tol > 0.0
            && self.max_iters > 0)
        {
            return Err(Error::BadConfig(
                "optimizer widths, bound scale, tolerance and iteration cap must be positive"
                    .into(),
            ));
        }
        Ok(())
    }

    fn init_half_width(&self, f: ParamFamily) -> f64 {
        match f {
            ParamFamily::Beta | ParamFamily::Gamma => self.angle_init_half_width,
            ParamFamily::Alpha => self.cd_init_half_width,
            ParamFamily::Delta | ParamFamily::Zeta => self.second_order_init_half_width,
        }
    }

    /// Solver lower and upper bounds in flat parameter layout.
    pub fn bounds(&self, variant: Variant, depth: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lower = Vec::with_capacity(variant.param_count(depth));
        for f in variant.families() {
            let w = self.bound_scale * self.init_half_width(*f);
            lower.extend(std::iter::repeat(-w).take(depth));
        }
        let upper: Vec<f64> = lower.iter().map(|l| -l).collect();
        (lower, upper)
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartRecord {
    pub start: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// True when the descent hit non-finite values and was abandoned.
    pub failed: bool,
    /// True for the extra descent seeded from an embedded lower variant.
    pub warm_started: bool,
}

/// Best point found across all restarts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub variant: Variant,
    pub depth: usize,
    pub best_params: VariationalParams,
    pub best_cost: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartRecord>,
    /// Iterate sequence of the winning restart when trajectory recording is on.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic stream seed for one `(config, instance, variant, depth)` cell.
pub fn stream_seed(config_seed: u64, instance_seed: u64, variant: Variant, depth: usize) -> u64 {
    let variant_tag = match variant {
        Variant::Qaoa => 1u64,
        Variant::QaoaCd => 2,
        Variant::Qaoa2Cd => 3,
    };
    let mut state = config_seed;
    let mut out = splitmix64(&mut state);
    state ^= instance_seed;
    out ^= splitmix64(&mut state);
    state ^= variant_tag.wrapping_mul(0xd6e8feb86659fd93);
    out ^= splitmix64(&mut state);
    state ^= depth as u64;
    out ^ splitmix64(&mut state)
}

struct VariationalObjective<'a> {
    ctx: &'a AnsatzContext,
    depth: usize,
}

impl lbfgs::Objective for VariationalObjective<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        let params = VariationalParams::from_flat(self.ctx.variant, self.depth, x)
            .expect("flat layout fixed by caller");
        self.ctx.cost(&params).map_or(f64::NAN, |e| e)
    }

    fn value_grad(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        let params = VariationalParams::from_flat(self.ctx.variant, self.depth, x)
            .expect("flat layout fixed by caller");
        self.ctx
            .cost_and_gradient(&params)
            .map_or((f64::NAN, vec![f64::NAN; x.len()]), |r| r)
    }
}

/// Runs the multistart search for one `(instance, variant, depth)` cell.
pub fn minimize_variational(
    ctx: &AnsatzContext,
    depth: usize,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    minimize_with_starts(ctx, depth, config, &[])
}

/// Like [`minimize_variational`] but adds a descent seeded from the best
/// point of the predecessor variant at the same depth, embedded with the new
/// angle family at zero. The embedded start evaluates to exactly the parent's
/// best energy, so the richer variant can only match or improve it.
pub fn minimize_with_embedding(
    ctx: &AnsatzContext,
    depth: usize,
    config: &OptimizerConfig,
    parent: &OptimizationResult,
) -> Result<OptimizationResult> {
    if parent.depth != depth {
        return Err(Error::EmbeddingDepth {
            parent: parent.depth,
            child: depth,
        });
    }
    let embedded = parent.best_params.embed_into(ctx.variant)?;
    minimize_with_starts(ctx, depth, config, &[embedded.to_flat()])
}

/// Like [`minimize_variational`] but with caller-supplied extra starting
/// points (flat layout) descended in addition to the random ones; they are
/// marked `warm_started` in the restart records. Useful for chaining depths:
/// a depth `p-1` optimum padded with a zero step evaluates to the same cost
/// at depth `p`, so the deeper circuit can only match or improve it.
pub fn minimize_with_starts(
    ctx: &AnsatzContext,
    depth: usize,
    config: &OptimizerConfig,
    extra_starts: &[Vec<f64>],
) -> Result<OptimizationResult> {
    config.validate()?;
    if depth == 0 {
        return Err(Error::BadDepth);
    }
    let variant = ctx.variant;
    let n_params = variant.param_count(depth);
    let (lower, upper) = config.bounds(variant, depth);

    use rand::distr::{Distribution, Uniform};
    use rand::SeedableRng;
    let seed = stream_seed(config.seed, ctx.instance.seed, variant, depth);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut family_dists = Vec::new();
    for f in variant.families() {
        let w = config.init_half_width(*f);
        family_dists.push(Uniform::new_inclusive(-w, w).expect("valid range"));
    }

    let settings = LbfgsSettings {
        grad_tol: config.grad_tol,
        max_iters: config.max_iters,
        ..LbfgsSettings::default()
    };

    let mut restarts = Vec::with_capacity(config.restarts + extra_starts.len());
    let mut best: Option<(usize, f64, Vec<f64>, Option<Vec<Vec<f64>>>)> = None;

    let run_start = |start: Vec<f64>,
                         warm: bool,
                         index: usize,
                         restarts: &mut Vec<RestartRecord>,
                         best: &mut Option<(usize, f64, Vec<f64>, Option<Vec<Vec<f64>>>)>| {
        let mut objective = VariationalObjective { ctx, depth };
        let outcome = lbfgs::minimize(
            &mut objective,
            &start,
            &lower,
            &upper,
            &settings,
            config.record_trajectory,
        );
        let failed = !outcome.cost.is_finite();
        restarts.push(RestartRecord {
            start,
            cost: outcome.cost,
            iterations: outcome.iterations,
            converged: outcome.converged,
            failed,
            warm_started: warm,
        });
        if !failed && best.as_ref().is_none_or(|(_, c, _, _)| outcome.cost < *c) {
            *best = Some((index, outcome.cost, outcome.point, outcome.trajectory));
        }
    };

    for r in 0..config.restarts {
        let mut start = Vec::with_capacity(n_params);
        for (fi, _) in variant.families().iter().enumerate() {
            for _ in 0..depth {
                start.push(family_dists[fi].sample(&mut rng));
            }
        }
        run_start(start, false, r, &mut restarts, &mut best);
    }
    for (e, start) in extra_starts.iter().enumerate() {
        run_start(
            start.clone(),
            true,
            config.restarts + e,
            &mut restarts,
            &mut best,
        );
    }

    let (best_restart, best_cost, best_flat, trajectory) =
        best.ok_or(Error::AllRestartsFailed(restarts.len()))?;
    Ok(OptimizationResult {
        variant,
        depth,
        best_params: VariationalParams::from_flat(variant, depth, &best_flat)?,
        best_cost,
        best_restart,
        restarts,
        trajectory,
    })
}
