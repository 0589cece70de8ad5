//! Command-line driver for ensemble experiments.
//!
//! Every subcommand writes its outputs under
//! `<output_dir>/<subcommand>/<config-hash>/`, where the hash digests the
//! effective configuration. Rerunning an identical invocation therefore
//! lands in the same directory and reproduces the same files; timestamps are
//! confined to `metadata.json`.
//!
//! Exit codes: 0 success, 2 usage errors, 3 configuration errors, 4 runtime
//! errors. Failures print a single machine-readable JSON line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use cdqaoa::{
    disorder_stats, gap_histogram, landscape_scan, read_record_log, run_ensemble_logged,
    spectrum, steps_to_threshold, EnsembleConfig, OptimizerConfig, Variant,
};

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "cdqaoa", version, about = "Ensemble experiments comparing QAOA with its counterdiabatic variants on random Ising instances")]
struct Cli {
    /// Root directory for all outputs
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// Worker threads for instance-level parallelism (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Serialize)]
struct InstanceSet {
    /// Number of spins per instance
    #[arg(long, default_value_t = 5)]
    n_spins: usize,
    /// Number of instances
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Seed of the first instance; instance i uses seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances and write them as JSON files
    Gen(InstanceSet),
    /// Compute and write the exact spectrum of each instance
    Spectrum {
        #[command(flatten)]
        set: InstanceSet,
        /// Clustering tolerance for degenerate levels
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Run an ensemble, appending to a resumable record log
    Run {
        /// JSON file with the full ensemble configuration
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override: number of spins
        #[arg(long)]
        n_spins: Option<usize>,
        /// Override: number of instances
        #[arg(long)]
        count: Option<usize>,
        /// Override: base seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override: maximal circuit depth
        #[arg(long)]
        p_max: Option<usize>,
        /// Override: comma-separated variants (qaoa, cd, 2cd)
        #[arg(long)]
        variants: Option<String>,
        /// Override: optimizer restarts per cell
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Disorder means and standard deviations per (variant, p)
    Stats {
        /// Record log written by `run`
        #[arg(long)]
        log: PathBuf,
    },
    /// Zone boundaries and per-zone statistics
    Zones {
        #[arg(long)]
        log: PathBuf,
    },
    /// Minimal depth reaching fidelity 1 - tolerance, per (variant, zone)
    Steps {
        #[arg(long)]
        log: PathBuf,
        /// Fidelity tolerance defining the threshold
        #[arg(long, default_value_t = 1e-2)]
        tolerance: f64,
    },
    /// Histogram of spectral gaps
    Hist {
        #[arg(long)]
        log: PathBuf,
        /// Width of the histogram bins
        #[arg(long, default_value_t = 0.1)]
        bin_width: f64,
    },
    /// Depth-one QAOA energy surface of one instance with descent path
    Landscape {
        /// Number of spins
        #[arg(long, default_value_t = 5)]
        n_spins: usize,
        /// Instance seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid points per axis
        #[arg(long, default_value_t = 64)]
        grid_size: usize,
        /// Phase-angle range as "lo,hi"
        #[arg(long, default_value = "-3.141592653589793,3.141592653589793")]
        gamma_range: String,
        /// Mixer-angle range as "lo,hi"
        #[arg(long, default_value = "-3.141592653589793,3.141592653589793")]
        beta_range: String,
        /// Optimizer restarts for the overlaid trajectory
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
}

/// Errors carrying their intended process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<cdqaoa::Error> for CliError {
    fn from(e: cdqaoa::Error) -> Self {
        match &e {
            cdqaoa::Error::BadConfig(_)
            | cdqaoa::Error::InvalidSize { .. }
            | cdqaoa::Error::UnknownVariant(_)
            | cdqaoa::Error::BadDepth
            | cdqaoa::Error::TooFewInstances { .. }
            | cdqaoa::Error::BadGridSize(_)
            | cdqaoa::Error::BadBinWidth(_)
            | cdqaoa::Error::BadTolerance(_) => CliError::config(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            return fail(CliError::config(format!("invalid worker count: {e}")));
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({"error": e.message, "exit_code": e.code})
    );
    ExitCode::from(e.code)
}

/// Creates `<output_dir>/<subcommand>/<12-hex-digest>/` for a serialized
/// effective configuration and records the invocation metadata there.
fn prepare_dir<T: Serialize>(
    output_dir: &Path,
    subcommand: &str,
    effective: &T,
) -> CliResult<PathBuf> {
    let canonical = serde_json::to_string(effective)?;
    let digest = Sha256::digest(canonical.as_bytes());
    let hash: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    let dir = output_dir.join(subcommand).join(hash);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.json"), format!("{canonical}\n"))?;
    let metadata = serde_json::json!({
        "subcommand": subcommand,
        "argv": std::env::args().collect::<Vec<_>>(),
        "created_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    std::fs::write(
        dir.join("metadata.json"),
        format!("{}\n", serde_json::to_string_pretty(&metadata)?),
    )?;
    Ok(dir)
}

fn parse_range(text: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    let err = || CliError::config(format!("range {text:?} is not of the form \"lo,hi\""));
    if parts.len() != 2 {
        return Err(err());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| err())?;
    if !(lo < hi) {
        return Err(err());
    }
    Ok((lo, hi))
}

fn parse_variants(text: &str) -> CliResult<Vec<Variant>> {
    text.split(',')
        .map(|s| Variant::parse(s).map_err(CliError::from))
        .collect()
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Gen(set) => cmd_gen(&cli.output_dir, set),
        Command::Spectrum { set, tolerance } => cmd_spectrum(&cli.output_dir, set, *tolerance),
        Command::Run {
            config,
            n_spins,
            count,
            seed,
            p_max,
            variants,
            restarts,
        } => {
            let mut ensemble = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        CliError::config(format!("cannot read {}: {e}", path.display()))
                    })?;
                    serde_json::from_str(&text).map_err(|e| {
                        CliError::config(format!("malformed config {}: {e}", path.display()))
                    })?
                }
                None => EnsembleConfig::default(),
            };
            if let Some(n) = n_spins {
                ensemble.n_spins = *n;
            }
            if let Some(c) = count {
                ensemble.n_instances = *c;
            }
            if let Some(s) = seed {
                ensemble.base_seed = *s;
            }
            if let Some(p) = p_max {
                ensemble.p_max = *p;
            }
            if let Some(v) = variants {
                ensemble.variants = parse_variants(v)?;
            }
            if let Some(r) = restarts {
                ensemble.optimizer.restarts = *r;
            }
            ensemble.validate().map_err(|e| CliError::config(e.to_string()))?;
            cmd_run(&cli.output_dir, &ensemble)
        }
        Command::Stats { log } => cmd_stats(&cli.output_dir, log),
        Command::Zones { log } => cmd_zones(&cli.output_dir, log),
        Command::Steps { log, tolerance } => cmd_steps(&cli.output_dir, log, *tolerance),
        Command::Hist { log, bin_width } => cmd_hist(&cli.output_dir, log, *bin_width),
        Command::Landscape {
            n_spins,
            seed,
            grid_size,
            gamma_range,
            beta_range,
            restarts,
        } => cmd_landscape(
            &cli.output_dir,
            *n_spins,
            *seed,
            *grid_size,
            parse_range(gamma_range)?,
            parse_range(beta_range)?,
            *restarts,
        ),
    }
}

fn generate_set(set: &InstanceSet) -> CliResult<Vec<cdqaoa::SpinInstance>> {
    (0..set.count)
        .map(|i| cdqaoa::generate_instance(set.n_spins, set.seed + i as u64).map_err(Into::into))
        .collect()
}

fn cmd_gen(output_dir: &Path, set: &InstanceSet) -> CliResult<()> {
    let dir = prepare_dir(output_dir, "gen", set)?;
    for inst in generate_set(set)? {
        let path = dir.join(format!("instance-{}.json", inst.instance_id));
        std::fs::write(&path, format!("{}\n", serde_json::to_string_pretty(&inst)?))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_spectrum(output_dir: &Path, set: &InstanceSet, tolerance: f64) -> CliResult<()> {
    #[derive(Serialize)]
    struct Effective<'a> {
        set: &'a InstanceSet,
        tolerance: f64,
    }
    let dir = prepare_dir(output_dir, "spectrum", &Effective { set, tolerance })?;
    for inst in generate_set(set)? {
        let spec = spectrum(&inst, tolerance)?;
        let path = dir.join(format!("spectrum-{}.json", inst.instance_id));
        std::fs::write(&path, format!("{}\n", serde_json::to_string_pretty(&spec)?))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_run(output_dir: &Path, config: &EnsembleConfig) -> CliResult<()> {
    let dir = prepare_dir(output_dir, "run", config)?;
    let log_path = dir.join("records.csv");
    let before = read_record_log(&log_path)?.len();
    let run = run_ensemble_logged(config, &log_path)?;
    std::fs::write(
        dir.join("failures.json"),
        format!("{}\n", serde_json::to_string_pretty(&run.failures)?),
    )?;
    std::fs::write(
        dir.join("zones.json"),
        format!("{}\n", serde_json::to_string_pretty(&run.zone_assignment)?),
    )?;
    println!(
        "{} records ({} new, {} failures) -> {}",
        run.records.len(),
        run.records.len() - before,
        run.failures.len(),
        log_path.display()
    );
    Ok(())
}

fn load_log(log: &Path) -> CliResult<Vec<cdqaoa::MetricRecord>> {
    if !log.exists() {
        return Err(CliError::config(format!(
            "record log {} does not exist",
            log.display()
        )));
    }
    let records = read_record_log(log)?;
    if records.is_empty() {
        return Err(CliError::runtime(format!(
            "record log {} holds no records",
            log.display()
        )));
    }
    Ok(records)
}

#[derive(Serialize)]
struct LogInvocation<'a> {
    log: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bin_width: Option<f64>,
}

fn cmd_stats(output_dir: &Path, log: &Path) -> CliResult<()> {
    let records = load_log(log)?;
    let stats = disorder_stats(&records, None)?;
    let dir = prepare_dir(
        output_dir,
        "stats",
        &LogInvocation {
            log,
            tolerance: None,
            bin_width: None,
        },
    )?;
    let csv_path = dir.join("stats.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "variant",
        "p",
        "count",
        "mean_fidelity",
        "std_fidelity",
        "mean_residual",
        "std_residual",
    ])?;
    for ((variant, p), g) in &stats.overall {
        w.write_record([
            variant.label().to_string(),
            p.to_string(),
            g.count.to_string(),
            format!("{:.6}", g.mean_fidelity),
            format!("{:.6}", g.std_fidelity),
            format!("{:.6}", g.mean_residual),
            format!("{:.6}", g.std_residual),
        ])?;
    }
    w.flush()?;
    write_stats_json(&dir, &stats)?;
    println!("{}", csv_path.display());
    Ok(())
}

fn write_stats_json(dir: &Path, stats: &cdqaoa::EnsembleStats) -> CliResult<()> {
    let overall: Vec<_> = stats
        .overall
        .iter()
        .map(|((variant, p), g)| {
            serde_json::json!({
                "variant": variant.label(), "p": p,
                "count": g.count,
                "fidelity": {"mean": g.mean_fidelity, "std": g.std_fidelity},
                "residual": {"mean": g.mean_residual, "std": g.std_residual},
            })
        })
        .collect();
    let per_zone: Vec<_> = stats
        .per_zone
        .iter()
        .map(|((variant, p, zone), g)| {
            serde_json::json!({
                "variant": variant.label(), "p": p, "zone": zone,
                "count": g.count,
                "fidelity": {"mean": g.mean_fidelity, "std": g.std_fidelity},
                "residual": {"mean": g.mean_residual, "std": g.std_residual},
            })
        })
        .collect();
    let body = serde_json::json!({
        "overall": overall,
        "per_zone": per_zone,
        "zone_boundaries": stats.zone_boundaries,
    });
    std::fs::write(
        dir.join("stats.json"),
        format!("{}\n", serde_json::to_string_pretty(&body)?),
    )?;
    Ok(())
}

fn cmd_zones(output_dir: &Path, log: &Path) -> CliResult<()> {
    let records = load_log(log)?;
    let stats = disorder_stats(&records, None)?;
    let dir = prepare_dir(
        output_dir,
        "zones",
        &LogInvocation {
            log,
            tolerance: None,
            bin_width: None,
        },
    )?;
    let csv_path = dir.join("zones.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "variant",
        "p",
        "zone",
        "gap_min",
        "gap_max",
        "count",
        "mean_fidelity",
        "std_fidelity",
        "mean_residual",
        "std_residual",
    ])?;
    for ((variant, p, zone), g) in &stats.per_zone {
        let (lo, hi) = stats.zone_boundaries[*zone];
        w.write_record([
            variant.label().to_string(),
            p.to_string(),
            zone.to_string(),
            format!("{lo:.6}"),
            format!("{hi:.6}"),
            g.count.to_string(),
            format!("{:.6}", g.mean_fidelity),
            format!("{:.6}", g.std_fidelity),
            format!("{:.6}", g.mean_residual),
            format!("{:.6}", g.std_residual),
        ])?;
    }
    w.flush()?;
    write_stats_json(&dir, &stats)?;
    println!("{}", csv_path.display());
    Ok(())
}

fn cmd_steps(output_dir: &Path, log: &Path, tolerance: f64) -> CliResult<()> {
    let records = load_log(log)?;
    let p_max = records.iter().map(|r| r.depth).max().unwrap_or(1);
    let stats = disorder_stats(&records, None)?;
    let table = steps_to_threshold(&stats, tolerance, p_max);
    let dir = prepare_dir(
        output_dir,
        "steps",
        &LogInvocation {
            log,
            tolerance: Some(tolerance),
            bin_width: None,
        },
    )?;
    let csv_path = dir.join("steps.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["variant", "zone", "steps"])?;
    let mut rows = Vec::new();
    for ((variant, zone), steps) in &table {
        let shown = match steps {
            Some(p) => p.to_string(),
            None => format!(">{p_max}"),
        };
        w.write_record([variant.label().to_string(), zone.to_string(), shown.clone()])?;
        rows.push(serde_json::json!({
            "variant": variant.label(), "zone": zone, "steps": steps, "display": shown,
        }));
    }
    w.flush()?;
    let body = serde_json::json!({"tolerance": tolerance, "p_max": p_max, "table": rows});
    std::fs::write(
        dir.join("steps.json"),
        format!("{}\n", serde_json::to_string_pretty(&body)?),
    )?;
    println!("{}", csv_path.display());
    Ok(())
}

fn cmd_hist(output_dir: &Path, log: &Path, bin_width: f64) -> CliResult<()> {
    let records = load_log(log)?;
    // one gap per instance, not per record
    let mut seen = std::collections::BTreeSet::new();
    let mut gaps = Vec::new();
    for r in &records {
        if seen.insert(r.instance_id.clone()) {
            gaps.push(r.gap);
        }
    }
    let hist = gap_histogram(&gaps, bin_width)?;
    let dir = prepare_dir(
        output_dir,
        "hist",
        &LogInvocation {
            log,
            tolerance: None,
            bin_width: Some(bin_width),
        },
    )?;
    let csv_path = dir.join("hist.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["bin_start", "bin_end", "count"])?;
    for (i, count) in hist.iter().enumerate() {
        w.write_record([
            format!("{:.6}", i as f64 * bin_width),
            format!("{:.6}", (i + 1) as f64 * bin_width),
            count.to_string(),
        ])?;
    }
    w.flush()?;
    println!("{}", csv_path.display());
    Ok(())
}

fn cmd_landscape(
    output_dir: &Path,
    n_spins: usize,
    seed: u64,
    grid_size: usize,
    gamma_range: (f64, f64),
    beta_range: (f64, f64),
    restarts: usize,
) -> CliResult<()> {
    #[derive(Serialize)]
    struct Effective {
        n_spins: usize,
        seed: u64,
        grid_size: usize,
        gamma_range: (f64, f64),
        beta_range: (f64, f64),
        restarts: usize,
    }
    let dir = prepare_dir(
        output_dir,
        "landscape",
        &Effective {
            n_spins,
            seed,
            grid_size,
            gamma_range,
            beta_range,
            restarts,
        },
    )?;
    let inst = cdqaoa::generate_instance(n_spins, seed)?;
    let optimizer = OptimizerConfig {
        restarts,
        seed,
        ..OptimizerConfig::default()
    };
    let scan = landscape_scan(&inst, grid_size, gamma_range, beta_range, Some(&optimizer))?;

    let grid_path = dir.join("grid.csv");
    let mut w = csv::Writer::from_path(&grid_path)?;
    w.write_record(["gamma", "beta", "energy"])?;
    for (gi, gamma) in scan.gammas.iter().enumerate() {
        for (bi, beta) in scan.betas.iter().enumerate() {
            w.write_record([
                format!("{gamma:.8}"),
                format!("{beta:.8}"),
                format!("{:.10}", scan.grid[gi][bi]),
            ])?;
        }
    }
    w.flush()?;

    let traj_path = dir.join("trajectory.csv");
    let mut w = csv::Writer::from_path(&traj_path)?;
    w.write_record(["gamma", "beta"])?;
    if let Some(traj) = &scan.trajectory {
        for (gamma, beta) in traj {
            w.write_record([format!("{gamma:.8}"), format!("{beta:.8}")])?;
        }
    }
    w.flush()?;

    let summary = serde_json::json!({
        "instance_id": inst.instance_id,
        "grid_min": scan.grid_min(),
        "optimum": scan.optimum.map(|(g, b, e)| serde_json::json!({
            "gamma": g, "beta": b, "energy": e,
        })),
    });
    std::fs::write(
        dir.join("summary.json"),
        format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    println!("{}", grid_path.display());
    Ok(())
}
