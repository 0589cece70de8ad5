//! Reproduces the depth-one method comparison: disorder means of fidelity
//! and residual energy for QAOA, QAOA-CD and QAOA-2CD over a random N=5
//! ensemble. Run with `cargo run --release --example comparison_table [n]`.

use cdqaoa::{
    disorder_stats, run_ensemble, EnsembleConfig, OptimizerConfig, Variant,
};

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    let config = EnsembleConfig {
        n_instances: n,
        p_max: 1,
        optimizer: OptimizerConfig {
            warm_start_embedding: false,
            ..OptimizerConfig::default()
        },
        ..EnsembleConfig::default()
    };
    let run = run_ensemble(&config).expect("ensemble");
    let stats = disorder_stats(&run.records, Some(&run.zone_assignment)).expect("stats");

    println!("N=5, n={n}, p=1, {} restarts per cell", config.optimizer.restarts);
    println!("{:>8}  {:>13}  {:>13}", "variant", "fidelity", "residual");
    for variant in [Variant::Qaoa, Variant::QaoaCd, Variant::Qaoa2Cd] {
        let g = stats.overall[&(variant, 1)];
        println!(
            "{:>8}  {:.3} +- {:.3}  {:.3} +- {:.3}",
            variant.label(),
            g.mean_fidelity,
            g.std_fidelity,
            g.mean_residual,
            g.std_residual
        );
    }
}
