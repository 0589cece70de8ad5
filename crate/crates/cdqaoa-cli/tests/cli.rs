use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cdqaoa"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("spawn cdqaoa")
}

fn find_file(root: &Path, name: &str) -> PathBuf {
    fn walk(dir: &Path, name: &str, hits: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, name, hits);
            } else if path.file_name().is_some_and(|f| f == name) {
                hits.push(path);
            }
        }
    }
    let mut hits = Vec::new();
    walk(root, name, &mut hits);
    assert_eq!(hits.len(), 1, "expected exactly one {name} under {root:?}");
    hits.remove(0)
}

#[test]
fn gen_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = run_in(dir, &["gen", "--n-spins", "4", "--count", "3", "--seed", "7"]);
        assert!(out.status.success());
    }
    for seed in 7..10 {
        let name = format!("instance-N4-s{seed}.json");
        let fa = std::fs::read(find_file(a.path(), &name)).unwrap();
        let fb = std::fs::read(find_file(b.path(), &name)).unwrap();
        assert_eq!(fa, fb);
    }
}

#[test]
fn spectrum_writes_valid_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["spectrum", "--n-spins", "4", "--count", "1", "--seed", "3"],
    );
    assert!(out.status.success());
    let body = std::fs::read_to_string(find_file(dir.path(), "spectrum-N4-s3.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert!(value["gap"].as_f64().unwrap() > 0.0);
    assert!(value["e_min"].as_f64().unwrap() < value["e_max"].as_f64().unwrap());
}

#[test]
fn run_resumes_without_new_records() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run", "--n-spins", "4", "--count", "3", "--seed", "11", "--p-max", "1", "--variants",
        "qaoa", "--restarts", "3",
    ];
    let first = run_in(dir.path(), &args);
    assert!(first.status.success());
    let stdout = String::from_utf8(first.stdout).unwrap();
    assert!(stdout.contains("3 records (3 new, 0 failures)"), "{stdout}");

    let second = run_in(dir.path(), &args);
    assert!(second.status.success());
    let stdout = String::from_utf8(second.stdout).unwrap();
    assert!(stdout.contains("3 records (0 new, 0 failures)"), "{stdout}");

    let log = find_file(dir.path(), "records.csv");
    let content = std::fs::read_to_string(log).unwrap();
    assert_eq!(content.lines().count(), 4, "header plus one row per cell");
}

#[test]
fn stats_pipeline_reads_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "run", "--n-spins", "4", "--count", "3", "--seed", "2", "--p-max", "2",
            "--variants", "qaoa,cd", "--restarts", "2",
        ],
    );
    assert!(out.status.success());
    let log = find_file(dir.path(), "records.csv");
    let log_str = log.to_str().unwrap();

    for sub in ["stats", "zones", "steps", "hist"] {
        let out = run_in(dir.path(), &[sub, "--log", log_str]);
        assert!(out.status.success(), "{sub} failed");
    }
    let stats = std::fs::read_to_string(find_file(dir.path(), "stats.csv")).unwrap();
    assert!(stats.contains("QAOA,1,3,"));
    assert!(stats.contains("QAOA-CD,2,3,"));
    let steps = std::fs::read_to_string(find_file(dir.path(), "steps.csv")).unwrap();
    assert!(steps.lines().count() > 1);
    let hist = std::fs::read_to_string(find_file(dir.path(), "hist.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 3, "histogram counts instances, not records");
}

#[test]
fn landscape_outputs_grid_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["landscape", "--n-spins", "3", "--seed", "5", "--grid-size", "11"],
    );
    assert!(out.status.success());
    let grid = std::fs::read_to_string(find_file(dir.path(), "grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 11 * 11);
    let traj = std::fs::read_to_string(find_file(dir.path(), "trajectory.csv")).unwrap();
    assert!(traj.lines().count() >= 2);
    let summary = std::fs::read_to_string(find_file(dir.path(), "summary.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let grid_min = value["grid_min"].as_f64().unwrap();
    let best = value["optimum"]["energy"].as_f64().unwrap();
    assert!(grid_min >= best - 1e-9);
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "n_spins": 4,
        "n_instances": 3,
        "p_max": 3,
        "variants": ["Qaoa"],
        "base_seed": 1,
        "optimizer": {
            "restarts": 2,
            "angle_init_half_width": std::f64::consts::PI,
            "cd_init_half_width": std::f64::consts::PI, "second_order_init_half_width": 1.0,
            "bound_scale": 2.0,
            "grad_tol": 1e-9,
            "max_iters": 1000,
            "seed": 0,
            "warm_start_embedding": true,
            "record_trajectory": false
        },
        "zone_count": 3,
        "cluster_tol": 1e-9
    });
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    // override p_max down to 1 so only 3 cells run
    let out = run_in(
        dir.path(),
        &["run", "--config", path.to_str().unwrap(), "--p-max", "1"],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("3 records"), "{stdout}");
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    // usage error: unknown flag
    let out = bin().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // config error: instance too small
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["run", "--n-spins", "1", "--count", "3", "--p-max", "1"],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    let line: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(line["exit_code"], 3);

    // config error: unreadable config file
    let out = run_in(dir.path(), &["run", "--config", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(3));

    // runtime error: empty record log
    let empty = dir.path().join("empty.csv");
    std::fs::write(
        &empty,
        "instance_id,seed,variant,p,gap,zone,best_cost,residual_energy,fidelity,excited_probability\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["stats", "--log", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    // config error: missing log
    let out = run_in(dir.path(), &["stats", "--log", "/no/such/log.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_documents_every_flag() {
    for sub in [
        "gen",
        "spectrum",
        "run",
        "stats",
        "zones",
        "steps",
        "hist",
        "landscape",
    ] {
        let out = bin().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("--output-dir"));
    }
}
