//! Disorder-ensemble orchestration: run all `(instance, variant, depth)`
//! cells, aggregate disorder statistics, resolve them by spectral-gap zones,
//! and derive the steps-to-threshold table, gap histogram and p=1 landscape
//! scans.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzContext, Variant, VariationalParams};
use crate::metrics::{evaluate_state, MetricRecord};
use crate::optimizer::{
    minimize_variational, minimize_with_embedding, OptimizationResult, OptimizerConfig,
};
use crate::spin_model::{generate_instance, spectrum, Spectrum, DEFAULT_CLUSTER_TOL};
use crate::{Error, Result};

/// Full description of one ensemble experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_spins: usize,
    pub n_instances: usize,
    pub p_max: usize,
    pub variants: Vec<Variant>,
    /// Instance `i` draws its couplings from seed `base_seed + i`.
    pub base_seed: u64,
    pub optimizer: OptimizerConfig,
    pub zone_count: usize,
    pub cluster_tol: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_spins: 5,
            n_instances: 100,
            p_max: 10,
            variants: vec![Variant::Qaoa, Variant::QaoaCd, Variant::Qaoa2Cd],
            base_seed: 0,
            optimizer: OptimizerConfig::default(),
            zone_count: 3,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_max == 0 {
            return Err(Error::BadDepth);
        }
        if self.variants.is_empty() {
            return Err(Error::BadConfig("no variants selected".into()));
        }
        if self.zone_count == 0 {
            return Err(Error::BadConfig("zone_count must be at least 1".into()));
        }
        if self.n_instances < self.zone_count {
            return Err(Error::TooFewInstances {
                instances: self.n_instances,
                zones: self.zone_count,
            });
        }
        self.optimizer.validate()
    }
}

/// A cell whose optimization failed; enumerated, never silently dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedRun {
    pub instance_id: String,
    pub variant: Variant,
    pub depth: usize,
    pub message: String,
}

/// Zone assignment of an instance set by sorted spectral gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoneAssignment {
    /// Zone index per instance_id.
    pub zones: BTreeMap<String, usize>,
    /// `[min gap, max gap]` realized per zone.
    pub boundaries: Vec<(f64, f64)>,
    pub cardinalities: Vec<usize>,
}

/// Records plus enumerated failures of one ensemble run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub records: Vec<MetricRecord>,
    pub failures: Vec<FailedRun>,
    pub zone_assignment: ZoneAssignment,
}

/// Splits instances, sorted by gap ascending (ties by instance_id), into
/// `zone_count` contiguous sets of equal cardinality; a remainder goes to the
/// lowest zones.
pub fn zone_binning(gaps: &[(String, f64)], zone_count: usize) -> Result<ZoneAssignment> {
    if zone_count == 0 {
        return Err(Error::BadConfig("zone_count must be at least 1".into()));
    }
    if gaps.len() < zone_count {
        return Err(Error::TooFewInstances {
            instances: gaps.len(),
            zones: zone_count,
        });
    }
    let mut sorted: Vec<&(String, f64)> = gaps.iter().collect();
    sorted.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("finite gaps")
            .then_with(|| a.0.cmp(&b.0))
    });
    let base = sorted.len() / zone_count;
    let remainder = sorted.len() % zone_count;
    let mut zones = BTreeMap::new();
    let mut boundaries = Vec::with_capacity(zone_count);
    let mut cardinalities = Vec::with_capacity(zone_count);
    let mut cursor = 0usize;
    for z in 0..zone_count {
        let size = base + usize::from(z < remainder);
        let members = &sorted[cursor..cursor + size];
        cursor += size;
        boundaries.push((members[0].1, members[size - 1].1));
        cardinalities.push(size);
        for (id, _) in members {
            zones.insert(id.clone(), z);
        }
    }
    Ok(ZoneAssignment {
        zones,
        boundaries,
        cardinalities,
    })
}

fn optimize_cell(
    ctx: &AnsatzContext,
    depth: usize,
    config: &OptimizerConfig,
    parents: &BTreeMap<(Variant, usize), OptimizationResult>,
) -> Result<OptimizationResult> {
    if config.warm_start_embedding {
        if let Some(pred) = ctx.variant.predecessor() {
            if let Some(parent) = parents.get(&(pred, depth)) {
                return minimize_with_embedding(ctx, depth, config, parent);
            }
        }
    }
    minimize_variational(ctx, depth, config)
}

fn evaluate_cell(
    ctx: &AnsatzContext,
    spec: &Spectrum,
    result: &OptimizationResult,
    zone: usize,
) -> Result<MetricRecord> {
    let state = ctx.prepare_state(&result.best_params)?;
    let (residual, fidelity, excited) = evaluate_state(&state, spec, result.best_cost)?;
    Ok(MetricRecord {
        instance_id: ctx.instance.instance_id.clone(),
        seed: ctx.instance.seed,
        variant: ctx.variant,
        depth: result.depth,
        gap: spec.gap,
        zone: Some(zone),
        best_cost: result.best_cost,
        residual_energy: residual,
        fidelity,
        excited_probability: excited,
    })
}

/// Runs the whole ensemble in memory. Per-cell optimization errors become
/// [`FailedRun`] entries instead of aborting.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleRun> {
    run_ensemble_filtered(config, |_, _, _| false)
}

/// Like [`run_ensemble`] but skips cells for which `done` returns true,
/// enabling resumption from a partial record log.
pub fn run_ensemble_filtered(
    config: &EnsembleConfig,
    done: impl Fn(&str, Variant, usize) -> bool + Sync,
) -> Result<EnsembleRun> {
    run_ensemble_with_sink(config, done, |_| Ok(()))
}

/// Core driver: optionally skips completed cells and hands every fresh record
/// to `sink` as soon as it exists (the append hook of the record log).
///
/// Instance jobs are independent and run on the current rayon pool; the sink
/// is the only shared resource and receives one locked call per record.
/// In-memory record order is by instance, then variant, then depth,
/// regardless of worker count.
pub fn run_ensemble_with_sink(
    config: &EnsembleConfig,
    done: impl Fn(&str, Variant, usize) -> bool + Sync,
    sink: impl FnMut(&MetricRecord) -> Result<()> + Send,
) -> Result<EnsembleRun> {
    use rayon::prelude::*;

    config.validate()?;
    let instances: Vec<_> = (0..config.n_instances)
        .map(|i| generate_instance(config.n_spins, config.base_seed + i as u64))
        .collect::<Result<_>>()?;
    let spectra: Vec<Spectrum> = instances
        .iter()
        .map(|inst| spectrum(inst, config.cluster_tol))
        .collect::<Result<_>>()?;
    let gaps: Vec<(String, f64)> = instances
        .iter()
        .zip(&spectra)
        .map(|(inst, spec)| (inst.instance_id.clone(), spec.gap))
        .collect();
    let zone_assignment = zone_binning(&gaps, config.zone_count)?;

    // nesting order, so embedding parents exist before their children
    let mut variants = config.variants.clone();
    variants.sort();
    variants.dedup();

    let sink = std::sync::Mutex::new(sink);
    let per_instance: Vec<(Vec<MetricRecord>, Vec<FailedRun>)> = instances
        .par_iter()
        .zip(&spectra)
        .map(|(inst, spec)| -> Result<(Vec<MetricRecord>, Vec<FailedRun>)> {
            let zone = zone_assignment.zones[&inst.instance_id];
            let mut records = Vec::new();
            let mut failures = Vec::new();
            let mut results: BTreeMap<(Variant, usize), OptimizationResult> = BTreeMap::new();
            for &variant in &variants {
                let ctx = AnsatzContext::new(inst, variant)?;
                for depth in 1..=config.p_max {
                    if done(&inst.instance_id, variant, depth) {
                        continue;
                    }
                    match optimize_cell(&ctx, depth, &config.optimizer, &results) {
                        Ok(result) => {
                            let record = evaluate_cell(&ctx, spec, &result, zone)?;
                            sink.lock().expect("sink lock")(&record)?;
                            records.push(record);
                            results.insert((variant, depth), result);
                        }
                        Err(e) => failures.push(FailedRun {
                            instance_id: inst.instance_id.clone(),
                            variant,
                            depth,
                            message: e.to_string(),
                        }),
                    }
                }
            }
            Ok((records, failures))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_instance {
        records.extend(r);
        failures.extend(f);
    }
    Ok(EnsembleRun {
        records,
        failures,
        zone_assignment,
    })
}

/// CSV row of the record log.
#[derive(Debug, Serialize, Deserialize)]
struct LogRow {
    instance_id: String,
    seed: u64,
    variant: String,
    p: usize,
    gap: f64,
    zone: usize,
    best_cost: f64,
    residual_energy: f64,
    fidelity: f64,
    excited_probability: f64,
}

impl LogRow {
    fn from_record(r: &MetricRecord) -> Self {
        Self {
            instance_id: r.instance_id.clone(),
            seed: r.seed,
            variant: r.variant.label().to_string(),
            p: r.depth,
            gap: r.gap,
            zone: r.zone.unwrap_or(0),
            best_cost: r.best_cost,
            residual_energy: r.residual_energy,
            fidelity: r.fidelity,
            excited_probability: r.excited_probability,
        }
    }

    fn into_record(self) -> Result<MetricRecord> {
        Ok(MetricRecord {
            instance_id: self.instance_id,
            seed: self.seed,
            variant: Variant::parse(&self.variant)?,
            depth: self.p,
            gap: self.gap,
            zone: Some(self.zone),
            best_cost: self.best_cost,
            residual_energy: self.residual_energy,
            fidelity: self.fidelity,
            excited_probability: self.excited_probability,
        })
    }
}

/// Reads an existing record log; a missing file is an empty log.
pub fn read_record_log(path: &Path) -> Result<Vec<MetricRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut records = Vec::new();
    for row in reader.deserialize::<LogRow>() {
        let row = row.map_err(|e| Error::BadRecordLog(e.to_string()))?;
        records.push(row.into_record()?);
    }
    Ok(records)
}

/// Runs the ensemble with an append-only CSV log at `path`, skipping cells
/// the log already contains. Every record is flushed as soon as it is
/// computed, so an interrupted run resumes where it stopped.
pub fn run_ensemble_logged(config: &EnsembleConfig, path: &Path) -> Result<EnsembleRun> {
    let existing = read_record_log(path)?;
    let completed: std::collections::BTreeSet<(String, Variant, usize)> = existing
        .iter()
        .map(|r| (r.instance_id.clone(), r.variant, r.depth))
        .collect();

    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let needs_header = existing.is_empty() && file.metadata()?.len() == 0;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(needs_header)
        .from_writer(file);

    let mut run = run_ensemble_with_sink(
        config,
        |id, variant, depth| completed.contains(&(id.to_string(), variant, depth)),
        |record| {
            writer.serialize(LogRow::from_record(record))?;
            writer.flush()?;
            Ok(())
        },
    )?;
    writer.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;

    // merge resumed records so callers always see the full ensemble
    run.records.extend(existing);
    run.records
        .sort_by(|a, b| (a.seed, a.variant, a.depth).cmp(&(b.seed, b.variant, b.depth)));
    Ok(run)
}

/// Mean and population standard deviation (divisor `n`) of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub count: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub mean_residual: f64,
    pub std_residual: f64,
}

fn population_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn group_stats(records: &[&MetricRecord]) -> GroupStats {
    let fid: Vec<f64> = records.iter().map(|r| r.fidelity).collect();
    let res: Vec<f64> = records.iter().map(|r| r.residual_energy).collect();
    let (mean_fidelity, std_fidelity) = population_stats(&fid);
    let (mean_residual, std_residual) = population_stats(&res);
    GroupStats {
        count: records.len(),
        mean_fidelity,
        std_fidelity,
        mean_residual,
        std_residual,
    }
}

/// Disorder averages per `(variant, p)` and per `(variant, p, zone)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub overall: BTreeMap<(Variant, usize), GroupStats>,
    pub per_zone: BTreeMap<(Variant, usize, usize), GroupStats>,
    pub zone_boundaries: Vec<(f64, f64)>,
}

impl EnsembleStats {
    pub fn zone_count(&self) -> usize {
        self.zone_boundaries.len()
    }
}

/// Aggregates a record set. Fails on an empty set; zone boundaries are taken
/// from `zone_assignment` when given, otherwise recomputed from the records'
/// zone labels and gaps.
pub fn disorder_stats(
    records: &[MetricRecord],
    zone_assignment: Option<&ZoneAssignment>,
) -> Result<EnsembleStats> {
    if records.is_empty() {
        return Err(Error::MissingData("no records".into()));
    }
    let mut overall_groups: BTreeMap<(Variant, usize), Vec<&MetricRecord>> = BTreeMap::new();
    let mut zone_groups: BTreeMap<(Variant, usize, usize), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        overall_groups.entry((r.variant, r.depth)).or_default().push(r);
        if let Some(z) = r.zone {
            zone_groups.entry((r.variant, r.depth, z)).or_default().push(r);
        }
    }
    let overall = overall_groups
        .into_iter()
        .map(|(k, v)| (k, group_stats(&v)))
        .collect();
    let per_zone: BTreeMap<_, _> = zone_groups
        .into_iter()
        .map(|(k, v)| (k, group_stats(&v)))
        .collect();

    let zone_boundaries = match zone_assignment {
        Some(za) => za.boundaries.clone(),
        None => {
            let max_zone = records.iter().filter_map(|r| r.zone).max().unwrap_or(0);
            (0..=max_zone)
                .map(|z| {
                    let gaps: Vec<f64> = records
                        .iter()
                        .filter(|r| r.zone == Some(z))
                        .map(|r| r.gap)
                        .collect();
                    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                })
                .collect()
        }
    };
    Ok(EnsembleStats {
        overall,
        per_zone,
        zone_boundaries,
    })
}

/// Smallest depth at which the zone-mean fidelity reaches `1 - tolerance`,
/// per `(variant, zone)`. `None` means not reached up to `p_max`.
pub fn steps_to_threshold(
    stats: &EnsembleStats,
    tolerance: f64,
    p_max: usize,
) -> BTreeMap<(Variant, usize), Option<usize>> {
    let threshold = 1.0 - tolerance;
    let mut table = BTreeMap::new();
    for &(variant, depth, zone) in stats.per_zone.keys() {
        let _ = (depth,);
        table.entry((variant, zone)).or_insert(None);
    }
    for ((variant, zone), entry) in table.iter_mut() {
        *entry = (1..=p_max).find(|&p| {
            stats
                .per_zone
                .get(&(*variant, p, *zone))
                .is_some_and(|g| g.mean_fidelity >= threshold)
        });
    }
    table
}

/// Histogram of spectral gaps with bins `[k w, (k+1) w)` starting at zero.
pub fn gap_histogram(gaps: &[f64], bin_width: f64) -> Result<Vec<usize>> {
    if bin_width <= 0.0 {
        return Err(Error::BadBinWidth(bin_width));
    }
    let mut counts = Vec::new();
    for &g in gaps {
        let bin = (g / bin_width).floor() as usize;
        if bin >= counts.len() {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    Ok(counts)
}

/// Depth-one QAOA energy surface over a `(gamma, beta)` grid, with the
/// winning optimizer descent path overlaid when requested.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeScan {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    /// `grid[gi][bi]` is the energy at `(gammas[gi], betas[bi])`.
    pub grid: Vec<Vec<f64>>,
    /// `(gamma, beta)` iterates of the winning restart.
    pub trajectory: Option<Vec<(f64, f64)>>,
    /// `(gamma, beta, energy)` of the optimizer's best point.
    pub optimum: Option<(f64, f64, f64)>,
}

impl LandscapeScan {
    pub fn grid_min(&self) -> f64 {
        self.grid
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn linspace(range: (f64, f64), steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (steps as f64 - 1.0))
        .collect()
}

/// Scans the p=1 QAOA landscape of one instance.
pub fn landscape_scan(
    instance: &crate::SpinInstance,
    grid_size: usize,
    gamma_range: (f64, f64),
    beta_range: (f64, f64),
    optimizer: Option<&OptimizerConfig>,
) -> Result<LandscapeScan> {
    if grid_size < 2 {
        return Err(Error::BadGridSize(grid_size));
    }
    let ctx = AnsatzContext::new(instance, Variant::Qaoa)?;
    let gammas = linspace(gamma_range, grid_size);
    let betas = linspace(beta_range, grid_size);
    let mut grid = Vec::with_capacity(grid_size);
    for &gamma in &gammas {
        let mut row = Vec::with_capacity(grid_size);
        for &beta in &betas {
            let mut params = VariationalParams::zeros(Variant::Qaoa, 1);
            params.gamma[0] = gamma;
            params.beta[0] = beta;
            row.push(ctx.cost(&params)?);
        }
        grid.push(row);
    }

    let (trajectory, optimum) = match optimizer {
        Some(base) => {
            let config = OptimizerConfig {
                record_trajectory: true,
                ..base.clone()
            };
            let result = minimize_variational(&ctx, 1, &config)?;
            let path = result.trajectory.as_ref().map(|points| {
                points
                    .iter()
                    .map(|x| {
                        let p = VariationalParams::from_flat(Variant::Qaoa, 1, x)
                            .expect("trajectory points share the flat layout");
                        (p.gamma[0], p.beta[0])
                    })
                    .collect()
            });
            let best = (
                result.best_params.gamma[0],
                result.best_params.beta[0],
                result.best_cost,
            );
            (path, Some(best))
        }
        None => (None, None),
    };
    Ok(LandscapeScan {
        gammas,
        betas,
        grid,
        trajectory,
        optimum,
    })
}
