use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use serde_json::Value;
use stftsr::stft::{fourier_moments, stft_coefficients};
use stftsr::{DiscreteMeasure, Domain, StftMeasurements, WindowParams};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stftsr"))
        .args(args)
        .current_dir(dir)
        .env_remove("STFTSR_SEED")
        .env_remove("STFTSR_CONFIG")
        .env_remove("STFTSR_OUTPUT_DIR")
        .env_remove("STFTSR_THREADS")
        .env_remove("STFTSR_LOG_LEVEL")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn single_atom() -> DiscreteMeasure {
    DiscreteMeasure::from_atoms(Domain::Torus, [(0.35, Complex64::new(1.5, -2.0))]).unwrap()
}

// f_c = 10 keeps recovery fast; σ = 1/(4 f_c) with strict truncation is the CLI default.
fn small_params() -> WindowParams {
    WindowParams::with_strict_truncation(1.0 / 40.0, 10).unwrap()
}

#[test]
fn certify_single_atom() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["certify", "--random", "1", "0.1"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(&dir.path().join("certificate_report.json"));
    assert_eq!(report["passed"], Value::Bool(true));
    for key in [
        "max_interpolation_residual",
        "max_derivative_residual",
        "sup_off_support",
        "margin",
        "grid_spacing",
    ] {
        assert!(report.get(key).is_some(), "{key}");
    }
}

#[test]
fn certify_separated_support_and_write_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "certify",
            "--random",
            "5",
            "0.024",
            "--sigma",
            "0.005",
            "--certificate",
            "cert.json",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cert = json(&dir.path().join("cert.json"));
    assert_eq!(cert["support"].as_array().unwrap().len(), 5);
    for key in ["signs", "alpha", "beta", "params"] {
        assert!(cert.get(key).is_some(), "{key}");
    }
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["certify", "--support", "[0.1, oops]"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("JSON"), "{}", stderr(&out));

    let out = run(
        &["certify", "--support", "[0.0, 1e-12]", "--signs", "[[1,0],[1,0]]"],
        dir.path(),
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let out = run(
        &[
            "certify",
            "--support",
            "[0.0, 0.004, 0.008]",
            "--signs",
            "[[1,0],[-1,0],[1,0]]",
            "--report",
            "close.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert_eq!(json(&dir.path().join("close.json"))["passed"], Value::Bool(false));

    let out = run(&["certify", "--support", "[0.1]", "--signs", "[[2,0]]"], dir.path());
    assert_eq!(code(&out), 1);
    // Support given in a file.
    fs::write(dir.path().join("support.json"), "[0.2, 0.5]").unwrap();
    let out = run(&["certify", "--support", "support.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn usage_errors_are_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["certify", "--bogus"], dir.path())), 1);
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 1);
    assert_eq!(
        code(&run(
            &["--log-level", "loud", "certify", "--random", "1", "0.1"],
            dir.path()
        )),
        1
    );
    assert_eq!(
        code(&run(
            &["certify", "--random", "1", "0.1", "--support", "[0.1]"],
            dir.path()
        )),
        1
    );
    assert_eq!(code(&run(&["--help"], dir.path())), 0);
}

#[test]
fn recover_single_atom() {
    let dir = tempfile::tempdir().unwrap();
    let y = stft_coefficients(&single_atom(), &small_params()).unwrap();
    fs::write(dir.path().join("y.csv"), y.to_csv().unwrap()).unwrap();
    let out = run(&["recover", "--measurements", "y.csv", "--fc", "10"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let result = json(&dir.path().join("recovery.json"));
    let atoms = result["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert!((atoms[0]["t"].as_f64().unwrap() - 0.35).abs() < 1e-8);
    assert!((atoms[0]["re"].as_f64().unwrap() - 1.5).abs() < 1e-6);
    assert!((atoms[0]["im"].as_f64().unwrap() + 2.0).abs() < 1e-6);
    for key in ["dual_objective", "primal_tv", "duality_gap", "diagnostics"] {
        assert!(result.get(key).is_some(), "{key}");
    }
}

#[test]
fn recover_rejects_corrupted_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let mut y = stft_coefficients(&single_atom(), &small_params()).unwrap();
    let v = y.get(3, -2);
    y.set(3, -2, v * 1.01);
    fs::write(dir.path().join("y.csv"), y.to_csv().unwrap()).unwrap();
    let out = run(
        &["recover", "--measurements", "y.csv", "--fc", "10", "--out", "r.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("corrupted"), "{}", stderr(&out));
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn recover_zero_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let y = StftMeasurements::zeros(small_params());
    fs::write(dir.path().join("y.csv"), y.to_csv().unwrap()).unwrap();
    let out = run(&["recover", "--measurements", "y.csv", "--fc", "10"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let result = json(&dir.path().join("recovery.json"));
    assert!(result["atoms"].as_array().unwrap().is_empty());
    assert_eq!(result["primal_tv"].as_f64(), Some(0.0));
}

#[test]
fn recover_fourier_mode() {
    let dir = tempfile::tempdir().unwrap();
    let u = fourier_moments(&single_atom(), 10).unwrap();
    fs::write(dir.path().join("u.csv"), u.to_csv().unwrap()).unwrap();
    let out = run(
        &["recover", "--measurements", "u.csv", "--mode", "fourier", "--fc", "10"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        json(&dir.path().join("recovery.json"))["atoms"]
            .as_array()
            .unwrap()
            .len(),
        1
    );

    let out = run(
        &["recover", "--measurements", "u.csv", "--mode", "fourier", "--fc", "12"],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
    let out = run(&["recover", "--measurements", "missing.csv"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn bench_tiny_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--seed",
        "11",
        "bench",
        "--preset",
        "paper-figure",
        "--delta-fc",
        "2.0,2.4",
        "--trials",
        "2",
    ];
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let mut full: Vec<&str> = vec!["--output-dir", sub];
        full.extend(args);
        let out = run(&full, dir.path());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let base = dir.path().join(sub);
        let trials = fs::read_to_string(base.join("trials.csv")).unwrap();
        let aggregate = fs::read_to_string(base.join("aggregate.csv")).unwrap();
        let svg = fs::read_to_string(base.join("success_rate.svg")).unwrap();
        assert!(trials.starts_with("delta,mode,seed,success,support_error,atoms,wall_time_s\n"));
        assert_eq!(trials.lines().count(), 1 + 2 * 2 * 2);
        assert!(aggregate.starts_with("delta,mode,trials,successes,rate\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(!base.join("trials.csv.partial").exists());
        outputs.push((trials, aggregate, svg));
    }
    assert_eq!(outputs[0], outputs[1]);

    // A different seed changes the sampled instances.
    let out = run(
        &[
            "--output-dir",
            "c",
            "--seed",
            "12",
            "bench",
            "--preset",
            "paper-figure",
            "--delta-fc",
            "2.0,2.4",
            "--trials",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_ne!(
        fs::read_to_string(dir.path().join("c/trials.csv")).unwrap(),
        outputs[0].0
    );
}

#[test]
fn bench_config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "seed = 5\noutput_dir = \"from-file\"\n\n[bench]\npreset = \"paper-figure\"\ndelta_fc_grid = [2.4]\ntrials_per_point = 1\nmodes = [\"fourier\"]\n",
    )
    .unwrap();
    let out = run(&["--config", "run.toml", "bench"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trials = fs::read_to_string(dir.path().join("from-file/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 2);
    assert!(trials.contains(",fourier,"));

    // Environment overrides the file, flags override the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_stftsr"))
        .args(["--config", "run.toml", "--output-dir", "flag", "bench"])
        .env("STFTSR_OUTPUT_DIR", "env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("flag/trials.csv").exists());
    assert!(!dir.path().join("env").exists());

    fs::write(dir.path().join("bad.toml"), "mystery = 1\n").unwrap();
    assert_eq!(code(&run(&["--config", "bad.toml", "bench"], dir.path())), 1);
    assert_eq!(
        code(&run(&["bench", "--trials", "0", "--delta-fc", "2.0"], dir.path())),
        1
    );
}

#[test]
fn invert_examples() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), single_atom().to_json().unwrap()).unwrap();
    let out = run(
        &["invert", "--measure", "m.json", "--t", "0.35", "--F", "100"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let values: Vec<f64> = stdout(&out).split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert!((values[0] - 1.5).abs() < 1e-6 && (values[1] + 2.0).abs() < 1e-6);

    let out = run(
        &["invert", "--measure", "m.json", "--t", "0.6", "--F", "400"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let values: Vec<f64> = stdout(&out).split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert!(values[0].hypot(values[1]) < 1e-2 * 2.5);

    assert_eq!(
        code(&run(
            &["invert", "--measure", "m.json", "--t", "0.3", "--F", "0"],
            dir.path()
        )),
        1
    );
    fs::write(dir.path().join("bad.json"), "{\"atoms\": 3}").unwrap();
    assert_eq!(
        code(&run(
            &["invert", "--measure", "bad.json", "--t", "0.3", "--F", "10"],
            dir.path()
        )),
        1
    );
}
