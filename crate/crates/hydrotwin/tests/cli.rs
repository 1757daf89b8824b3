//! End-to-end CLI workflows on a small plan: every subcommand, the exit
//! code contract, and byte-identical reruns.

use std::fs;
use std::path::Path;

use hydrotwin::cli::{run, EXIT_IO, EXIT_OK, EXIT_PARSE, EXIT_RUNTIME};

fn cli(args: &[&str]) -> u8 {
    let mut argv = vec!["hydrotwin".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(&argv)
}

fn write_small_plan(path: &Path) {
    fs::write(
        path,
        "u1 = 40,55,70,85\nu2 = 30,60,90\nmultipliers = 0.6,0.7,0.8,0.9,1.1,1.2,1.3,1.4\ndead_band = 0.09\nseed = 11\n",
    )
    .unwrap();
}

#[test]
fn simulate_prints_six_decimal_process_vector() {
    assert_eq!(cli(&["simulate", "--u1", "0", "--u2", "50"]), EXIT_OK);
    assert_eq!(cli(&["simulate", "--u1", "54", "--u2", "100"]), EXIT_OK);
    assert_eq!(
        cli(&["simulate", "--u1", "54", "--u2", "100", "--theta", "4=3.5"]),
        EXIT_OK
    );
}

#[test]
fn out_of_range_setpoint_is_a_usage_error() {
    assert_eq!(cli(&["simulate", "--u1", "150", "--u2", "50"]), EXIT_PARSE);
    assert_eq!(cli(&["simulate", "--u1", "50", "--u2", "-1"]), EXIT_PARSE);
    assert_eq!(
        cli(&["simulate", "--u1", "50", "--u2", "50", "--theta", "7=1"]),
        EXIT_PARSE
    );
    assert_eq!(cli(&["simulate", "--u1", "abc", "--u2", "50"]), EXIT_PARSE);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(cli(&["frobnicate"]), EXIT_PARSE);
}

#[test]
fn config_dump_parses_back() {
    for kind in ["loop", "plan", "thresholds"] {
        assert_eq!(cli(&["config", "--kind", kind]), EXIT_OK);
    }
    assert_eq!(cli(&["config", "--kind", "nonsense"]), EXIT_PARSE);
}

#[test]
fn full_workflow_runs_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.cfg");
    write_small_plan(&plan);
    let data = dir.path().join("data.csv");
    let models = dir.path().join("models");
    let metrics = dir.path().join("metrics");

    assert_eq!(
        cli(&["gen", "--plan", plan.to_str().unwrap(), "--out", data.to_str().unwrap()]),
        EXIT_OK
    );
    assert!(data.exists());
    assert!(dir.path().join("data.csv.manifest").exists());

    assert_eq!(
        cli(&[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out-dir",
            models.to_str().unwrap(),
            "--seed",
            "11",
        ]),
        EXIT_OK
    );
    for file in [
        "tree.model",
        "svr_class1.model",
        "svr_class2.model",
        "svr_class3.model",
        "svr_class4.model",
        "svr_class5.model",
        "manifest.txt",
    ] {
        assert!(models.join(file).exists(), "missing {file}");
    }

    assert_eq!(
        cli(&[
            "eval",
            "--data",
            data.to_str().unwrap(),
            "--models",
            models.to_str().unwrap(),
            "--seed",
            "11",
            "--out-dir",
            metrics.to_str().unwrap(),
        ]),
        EXIT_OK
    );
    let localization = fs::read_to_string(metrics.join("localization.csv")).unwrap();
    assert!(localization.starts_with("classification,truth,count,percent"));
    let estimation = fs::read_to_string(metrics.join("estimation.csv")).unwrap();
    assert!(estimation.starts_with("class,count,median_pct,p90_pct"));

    // A scenario over the trained models.
    let spec = dir.path().join("scenario.cfg");
    fs::write(
        &spec,
        "setpoint = 0,55,60\nevent = 3,2,1.52\nreset = 8\nnoise_percent = 0\nseed = 5\nmax_steps = 12\n",
    )
    .unwrap();
    let out = dir.path().join("scenario_out");
    assert_eq!(
        cli(&[
            "scenario",
            "--spec",
            spec.to_str().unwrap(),
            "--models",
            models.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]),
        EXIT_OK
    );
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().count() == 13, "header plus one line per step");
    let summary = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(summary.contains("events_injected = 1"));

    // Rerunning gen and train with the same inputs reproduces the artifacts
    // byte for byte (manifests carry timestamps and are excluded).
    let data2 = dir.path().join("data2.csv");
    assert_eq!(
        cli(&["gen", "--plan", plan.to_str().unwrap(), "--out", data2.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(fs::read(&data).unwrap(), fs::read(&data2).unwrap());

    let models2 = dir.path().join("models2");
    assert_eq!(
        cli(&[
            "train",
            "--data",
            data2.to_str().unwrap(),
            "--out-dir",
            models2.to_str().unwrap(),
            "--seed",
            "11",
        ]),
        EXIT_OK
    );
    for file in ["tree.model", "svr_class1.model", "svr_class5.model"] {
        assert_eq!(
            fs::read(models.join(file)).unwrap(),
            fs::read(models2.join(file)).unwrap(),
            "{file} differs between reruns"
        );
    }
}

#[test]
fn missing_files_map_to_io_or_parse_codes() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("absent.csv");
    assert_eq!(
        cli(&["train", "--data", absent.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]),
        EXIT_IO
    );

    let junk = dir.path().join("junk.csv");
    fs::write(&junk, "not,a,dataset\n").unwrap();
    assert_eq!(
        cli(&["train", "--data", junk.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]),
        EXIT_PARSE
    );
}

#[test]
fn scenario_schedule_violation_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.cfg");
    write_small_plan(&plan);
    let data = dir.path().join("data.csv");
    let models = dir.path().join("models");
    assert_eq!(
        cli(&["gen", "--plan", plan.to_str().unwrap(), "--out", data.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(
        cli(&[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out-dir",
            models.to_str().unwrap(),
            "--seed",
            "11",
        ]),
        EXIT_OK
    );
    // The first event is sub-threshold and never resolves; the second must
    // be rejected as overlapping.
    let spec = dir.path().join("overlap.cfg");
    fs::write(
        &spec,
        "setpoint = 0,55,60\nevent = 1,1,4.51\nevent = 3,2,1.6\nnoise_percent = 0\nseed = 5\nmax_steps = 8\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        cli(&[
            "scenario",
            "--spec",
            spec.to_str().unwrap(),
            "--models",
            models.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]),
        EXIT_RUNTIME
    );
}

#[test]
fn binary_entry_point_works() {
    // The installed binary behaves like the in-process driver.
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_hydrotwin"))
        .args(["simulate", "--u1", "0", "--u2", "50"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("p1 = 3.000000"));
    assert!(stdout.contains("fl = 0.000000"));

    let output = std::process::Command::new(env!("CARGO_BIN_EXE_hydrotwin"))
        .args(["simulate", "--u1", "150", "--u2", "50"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
