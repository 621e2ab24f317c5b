//! End-to-end runs of the `uavgrid` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use uavgrid_core::forecaster::{
    checkpoint, write_series_csv, Activation, Architecture, Forecaster, HourlySeries, LstmModel, Scaler, FEATURES,
};
use uavgrid_core::rng::content_hash;

fn uavgrid(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavgrid"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small sweeps so each simulate call stays around a second.
fn small_sweeps(dir: &Path) -> PathBuf {
    let p = dir.join("sweeps.json");
    fs::write(
        &p,
        r#"{"extra_users":[0,350,700],"altitudes_m":[150,450],"coverage_hours":[16,40],
            "fleet_sizes":[0,5,10],"densities":[0.5,1.5,4],"horizon":336}"#,
    )
    .unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const CSVS: [&str; 4] = [
    "outage_per_week.csv",
    "throughput_vs_extra_users.csv",
    "coverage_vs_density.csv",
    "mtbo_vs_fleet.csv",
];

#[test]
fn simulate_writes_results_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let sweeps = small_sweeps(tmp.path());
    let o = uavgrid(
        &[
            "simulate",
            "--sweeps",
            sweeps.to_str().unwrap(),
            "--out",
            "run",
            "--trace",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = tmp.path().join("run");
    for f in CSVS
        .iter()
        .chain(&["energy_ledger.csv", "summary.json", "trace.ndjson", "config.json"])
    {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let m = json(&run.join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert!(m["finished_unix_s"].as_u64().is_some());
    let cfg_bytes = fs::read(run.join("config.json")).unwrap();
    assert_eq!(m["config_sha256"].as_str().unwrap(), content_hash(&cfg_bytes));

    let weeks = fs::read_to_string(run.join("outage_per_week.csv")).unwrap();
    assert_eq!(
        weeks.lines().next().unwrap(),
        "week,outage_hours,station_hours,outage_pct"
    );
    assert_eq!(weeks.lines().count(), 1 + 8);
    let fleet = fs::read_to_string(run.join("mtbo_vs_fleet.csv")).unwrap();
    assert_eq!(fleet.lines().count(), 1 + 3);
    let trace_lines = fs::read_to_string(run.join("trace.ndjson")).unwrap().lines().count();
    assert_eq!(trace_lines, 8 * 168);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let sweeps = small_sweeps(tmp.path());
    for out in ["a", "b"] {
        let o = uavgrid(
            &[
                "simulate",
                "--seed",
                "7",
                "--sweeps",
                sweeps.to_str().unwrap(),
                "--out",
                out,
            ],
            tmp.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in CSVS.iter().chain(&["energy_ledger.csv", "summary.json", "config.json"]) {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    let o = uavgrid(
        &[
            "simulate",
            "--seed",
            "8",
            "--sweeps",
            sweeps.to_str().unwrap(),
            "--out",
            "c",
            "--sweep",
            "fleet",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    assert_ne!(
        fs::read(tmp.path().join("a/energy_ledger.csv")).unwrap(),
        fs::read(tmp.path().join("c/energy_ledger.csv")).unwrap()
    );
    assert!(!tmp.path().join("c/coverage_vs_density.csv").exists());
}

#[test]
fn no_uav_flag_runs_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let sweeps = small_sweeps(tmp.path());
    let o = uavgrid(
        &[
            "simulate",
            "--no-uav",
            "--sweeps",
            sweeps.to_str().unwrap(),
            "--sweep",
            "fleet",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(&tmp.path().join("r/summary.json"));
    assert_eq!(s["run"]["fleet_size"], 0);
    assert_eq!(s["run"]["dispatches"], 0);
    assert_eq!(
        fs::read_to_string(tmp.path().join("r/mtbo_vs_fleet.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
}

#[test]
fn input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = uavgrid(&["simulate", "--config", "nope.json", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
    assert!(!tmp.path().join("r").exists(), "nothing written on a config error");

    fs::write(tmp.path().join("bad.json"), r#"{"n_uavs": 3, "bogus": 1}"#).unwrap();
    let o = uavgrid(&["simulate", "--config", "bad.json", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = uavgrid(&["train", "--out", "t"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--synthetic"));

    let o = uavgrid(&["simulate", "--solar", "missing.csv", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn occupied_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let sweeps = small_sweeps(tmp.path());
    fs::create_dir(tmp.path().join("r")).unwrap();
    fs::write(tmp.path().join("r/keep.txt"), "x").unwrap();
    let args = [
        "simulate",
        "--sweeps",
        sweeps.to_str().unwrap(),
        "--sweep",
        "fleet",
        "--out",
        "r",
    ];
    let o = uavgrid(&args, tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&uavgrid(&forced, tmp.path())), 0);
}

#[test]
fn corrupted_checkpoint_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("model.json"),
        r#"{"format":"uavgrid-lstm","version":1,"weights":[1,2"#,
    )
    .unwrap();
    let o = uavgrid(&["evaluate", "--model", "model.json", "--synthetic"], tmp.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let o = uavgrid(&["simulate", "--model", "model.json", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let o = uavgrid(
        &["retrain", "--model", "model.json", "--synthetic", "--out", "r2"],
        tmp.path(),
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    fs::write(tmp.path().join("state.json"), "[]").unwrap();
    let o = uavgrid(
        &["train", "--synthetic", "--resume", "state.json", "--out", "t"],
        tmp.path(),
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

/// A series whose expenditure is generated by the model's own one-step
/// predictions is forecast perfectly.
#[test]
fn evaluate_scores_a_self_generated_series_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let window = 6;
    let arch = Architecture {
        input_dim: FEATURES,
        hidden_units: 5,
        dense_layers: vec![4],
        activation: Activation::Tanh,
        dropout_rate: 0.0,
        forget_bias: 1.0,
    };
    let model = LstmModel::new(arch, 3).unwrap();
    let hours = 96;
    let users: Vec<f64> = (0..hours).map(|t| 100.0 + 50.0 * ((t % 24) as f64 / 24.0)).collect();
    let mut series = HourlySeries {
        start_hour: 0,
        users,
        energy_j: (0..hours).map(|t| 2.0e5 + 1.0e4 * (t % 7) as f64).collect(),
    };
    let scaler = Scaler::fit(&series, window + 4).unwrap();
    let f = Forecaster {
        model,
        scaler,
        window_hours: window,
    };
    for t in window..hours {
        series.energy_j[t] = f.predict(&series, t).unwrap();
    }
    write_series_csv(&tmp.path().join("series.csv"), &series).unwrap();
    checkpoint::save(&f, &tmp.path().join("model.json")).unwrap();

    let o = uavgrid(
        &[
            "evaluate",
            "--model",
            "model.json",
            "--data",
            "series.csv",
            "--out",
            "m.json",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = json(&tmp.path().join("m.json"));
    assert_eq!(m["samples"], hours - window);
    assert!(m["rmse"].as_f64().unwrap() < 1e-6, "{m}");
    assert!(m["r2"].as_f64().unwrap() > 1.0 - 1e-12, "{m}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("R2"));
}

#[test]
fn train_smoke_resume_and_retrain() {
    let tmp = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let o = uavgrid(
        &[
            "train",
            "--synthetic",
            "--generations",
            "2",
            "--population",
            "4",
            "--out",
            "t",
        ],
        tmp.path(),
    );
    let took = start.elapsed();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(took.as_secs_f64() < 60.0, "train took {took:?}");
    let t = tmp.path().join("t");
    for f in [
        "best_genome.json",
        "model.json",
        "history.csv",
        "ga_state.json",
        "summary.json",
        "manifest.json",
    ] {
        assert!(t.join(f).is_file(), "missing {f}");
    }
    let history = fs::read_to_string(t.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 2);
    let state = json(&t.join("ga_state.json"));
    assert_eq!(state["generation"], 2);
    assert_eq!(state["finished"], true);

    // Resuming the final state only re-finishes, reproducing the artifacts.
    fs::copy(t.join("ga_state.json"), tmp.path().join("state.json")).unwrap();
    let o = uavgrid(
        &[
            "train",
            "--synthetic",
            "--generations",
            "2",
            "--population",
            "4",
            "--resume",
            "state.json",
            "--out",
            "t2",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["best_genome.json", "model.json", "history.csv"] {
        assert_eq!(
            fs::read(t.join(f)).unwrap(),
            fs::read(tmp.path().join("t2").join(f)).unwrap(),
            "{f}"
        );
    }

    let o = uavgrid(
        &["evaluate", "--model", "t/model.json", "--synthetic", "--out", "m.json"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = uavgrid(
        &[
            "retrain",
            "--model",
            "t/model.json",
            "--synthetic",
            "--epochs",
            "15",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(&tmp.path().join("r/summary.json"));
    let after = s["after"]["r2"].as_f64().unwrap();
    assert!(after > 0.7, "retrained R2 {after}");
    let o = uavgrid(
        &["evaluate", "--model", "r/model.json", "--synthetic", "--out", "m2.json"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(json(&tmp.path().join("m2.json"))["r2"].as_f64().unwrap() > 0.7);
}
