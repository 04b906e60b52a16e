//! End-to-end tests of the `hitchin-glue` binary: every flag, the config file, exit codes and
//! the thread cap.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hitchin_glue::geometry::Field2D;
use hitchin_glue::poisson::{modes_to_field, RadialGrid};
use num_complex::Complex64;
use serde_json::Value;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hitchin-glue-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    run_with_env(args, &[])
}

fn run_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hitchin-glue"));
    cmd.args(args).env_remove("HITCHIN_GLUE_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let idx = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[idx].clone()).collect()
}

fn help(sub: &str) -> String {
    let out = run(&[sub, "--help"]);
    assert_eq!(code(&out), 0);
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn help_documents_every_flag() {
    let common = ["--config", "--seed", "--strict", "--out"];
    let subcommands: [(&str, &[&str]); 6] = [
        ("model-check", &["--alpha", "--c-re", "--c-im", "--R", "--n-tau", "--modes", "--samples"]),
        ("wolf-validate", &["--ell", "--n-tau", "--refinements"]),
        (
            "poisson-solve",
            &["--delta", "--delta-prime", "--delta-dprime", "--modes", "--samples", "--radial-nodes", "--r-min", "--input"],
        ),
        (
            "build-approx",
            &[
                "--R", "--fixture", "--delta", "--amplitude", "--ell", "--n-tau", "--modes", "--cap-length", "--delta-prime",
                "--delta-dprime",
            ],
        ),
        (
            "spectrum",
            &[
                "--sweep", "--background", "--alpha", "--c-re", "--c-im", "--delta", "--amplitude", "--ell", "--n-tau",
                "--modes", "--cap-length", "--eigen-count", "--tol", "--no-dirac",
            ],
        ),
        (
            "glue",
            &[
                "--R", "--fixture", "--delta", "--amplitude", "--ell", "--n-tau", "--modes", "--cap-length", "--delta-prime",
                "--delta-dprime", "--tol", "--max-iterations", "--epsilon",
            ],
        ),
    ];
    for (sub, flags) in subcommands {
        let text = help(sub);
        for flag in common.iter().chain(flags.iter()) {
            assert!(text.contains(&format!("{flag} ")) || text.contains(&format!("{flag}\n")), "{sub} help lacks {flag}");
        }
    }
    let top = run(&["--help"]);
    assert_eq!(code(&top), 0);
    let text = String::from_utf8(top.stdout).unwrap();
    assert!(text.contains("HITCHIN_GLUE_THREADS"));
    for sub in ["model-check", "wolf-validate", "poisson-solve", "build-approx", "spectrum", "glue"] {
        assert!(text.contains(sub));
    }
}

#[test]
fn usage_errors_exit_with_config_code() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["model-check", "--no-such-flag"])), 2);
    assert_eq!(code(&run(&["model-check", "--n-tau", "many"])), 2);
    assert_eq!(code(&run(&["spectrum", "--sweep", "0.1,0.01", "--background", "nowhere"])), 2);
}

#[test]
fn model_check_uses_model_and_grid_flags() {
    let dir = scratch_dir("model");
    let out = run(&[
        "model-check", "--alpha", "-0.3", "--c-re", "0.2", "--c-im", "-0.4", "--R", "0.2", "--n-tau", "65", "--modes", "4",
        "--samples", "10", "--seed", "3", "--strict", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let row = read_json(&dir.join("model_check.json"));
    assert_eq!(row["params"]["alpha"].as_f64(), Some(-0.3));
    assert_eq!(row["params"]["C"]["re"].as_f64(), Some(0.2));
    assert_eq!(row["params"]["C"]["im"].as_f64(), Some(-0.4));
    assert_eq!(row["R"].as_f64(), Some(0.2));
    assert_eq!(row["n_tau"].as_i64(), Some(65));
    assert_eq!(row["n_theta_modes"].as_i64(), Some(4));
    assert_eq!(row["pointwise_samples"].as_i64(), Some(10));
    assert_eq!(row["pass"], true);
}

#[test]
fn model_check_writes_to_stdout_without_out() {
    let row = stdout_json(&run(&["model-check", "--n-tau", "65"]));
    assert!(row["max_residual"].as_f64().unwrap() <= 1e-13);
}

#[test]
fn zero_model_constant_is_a_config_error() {
    assert_eq!(code(&run(&["model-check", "--c-re", "0", "--c-im", "0"])), 2);
}

#[test]
fn wolf_validate_uses_its_flags() {
    let row = stdout_json(&run(&["wolf-validate", "--ell", "0.4", "--n-tau", "129", "--refinements", "2"]));
    assert_eq!(row["params"]["ell"].as_f64(), Some(0.4));
    assert_eq!(row["grids"], serde_json::json!([129, 257, 513]));
    let slope = row["slopes"]["higgs_distance_slope"].as_f64().unwrap();
    assert!((slope - 0.4).abs() < 0.06, "{slope}");
}

#[test]
fn strict_turns_a_failed_check_into_exit_one() {
    let args = ["wolf-validate", "--ell", "0.4", "--n-tau", "129", "--refinements", "2"];
    assert_eq!(code(&run(&args)), 0);
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(code(&run(&strict)), 1);
}

#[test]
fn poisson_study_uses_its_flags_and_seed() {
    let base = [
        "poisson-solve", "--delta", "0.6", "--delta-prime", "0.45", "--delta-dprime", "0.4", "--modes", "3", "--samples", "5",
        "--radial-nodes", "2001", "--r-min", "1e-5",
    ];
    let text = |seed: &str| {
        let mut args = base.to_vec();
        args.extend(["--seed", seed]);
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let first = text("1");
    let rows = csv_rows(&first);
    assert_eq!(column(&rows, "mode"), ["1", "2", "3"]);
    assert!(column(&rows, "samples").iter().all(|s| s == "5"));
    assert!(column(&rows, "radial_nodes").iter().all(|s| s == "2001"));
    assert!(column(&rows, "r_min").iter().all(|s| s.parse::<f64>().unwrap() == 1e-5));
    assert!(column(&rows, "delta").iter().all(|s| s.parse::<f64>().unwrap() == 0.6));
    assert!(column(&rows, "delta_prime").iter().all(|s| s.parse::<f64>().unwrap() == 0.45));
    assert_eq!(text("1"), first);
    assert_ne!(text("2"), first);
}

#[test]
fn inconsistent_weights_are_a_config_error() {
    assert_eq!(code(&run(&["poisson-solve", "--delta", "0.3", "--delta-prime", "0.5", "--modes", "1"])), 2);
}

#[test]
fn poisson_input_file_is_solved_and_written() {
    let dir = scratch_dir("poisson-input");
    let grid = RadialGrid::new(1e-5, 1001).unwrap();
    let profile = grid.sample(|r| Complex64::new(r.powf(0.9) * (1.0 - r), 0.0));
    let h = modes_to_field(&[-1, 0, 1], &[profile.clone(), profile.clone(), profile]);
    let input = dir.join("rhs.json");
    h.write_json(&input).unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "poisson-solve", "--input", input.to_str().unwrap(), "--r-min", "1e-5", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let u = Field2D::read_json(&out_dir.join("solution.json")).unwrap();
    assert_eq!((u.n_tau, u.n_theta_modes), (1001, 1));
    Field2D::read_json(&out_dir.join("solution_r_du.json")).unwrap();
    let rows = csv_rows(&std::fs::read_to_string(out_dir.join("poisson.csv")).unwrap());
    assert_eq!(column(&rows, "mode"), ["-1", "0", "1"]);

    assert_eq!(code(&run(&["poisson-solve", "--input", input.to_str().unwrap()])), 2);
    let missing = dir.join("missing.json");
    assert_eq!(code(&run(&["poisson-solve", "--input", missing.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 2);
}

#[test]
fn build_approx_uses_fixture_and_grid_flags() {
    let dir = scratch_dir("approx");
    let out = run(&[
        "build-approx", "--R", "0.3,0.2", "--fixture", "radial", "--delta", "0.6", "--amplitude", "0.2", "--n-tau", "201",
        "--modes", "4", "--cap-length", "1.5", "--delta-prime", "0.45", "--delta-dprime", "0.4", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_json(&dir.join("build_approx.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["fixture"], "radial");
    assert_eq!(rows[0]["delta"].as_f64(), Some(0.6));
    assert_eq!(rows[0]["amplitude"].as_f64(), Some(0.2));
    assert_eq!(rows[1]["R"].as_f64(), Some(0.2));
    assert_eq!(rows[1]["n_tau"].as_i64(), Some(201));
    assert_eq!(rows[1]["cap_length"].as_f64(), Some(1.5));
    assert_eq!(rows[1]["delta_dprime"].as_f64(), Some(0.4));
    assert!(rows[0]["slope_so_far"].is_null());
    assert!(rows[1]["slope_so_far"].is_f64());
    for idx in 0..2 {
        for part in ["a_tau", "a_theta", "phi"] {
            Field2D::read_json(&dir.join(format!("approx_{idx}_{part}.json"))).unwrap();
        }
    }
}

#[test]
fn build_approx_accepts_the_wolf_fixture() {
    let out = run(&["build-approx", "--R", "0.2", "--fixture", "wolf", "--ell", "0.6", "--n-tau", "201"]);
    let rows = stdout_json(&out);
    assert_eq!(rows[0]["fixture"], "wolf");
    assert_eq!(rows[0]["ell"].as_f64(), Some(0.6));
    assert!(rows[0]["sup_outside_annulus"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn too_few_angular_modes_is_a_config_error() {
    assert_eq!(code(&run(&["build-approx", "--modes", "2", "--n-tau", "201"])), 2);
}

#[test]
fn spectrum_flat_background_with_all_spectral_flags() {
    let dir = scratch_dir("spectrum");
    let out = run(&[
        "spectrum", "--sweep", "0.1,0.03", "--background", "flat", "--n-tau", "65", "--modes", "4", "--cap-length", "1",
        "--eigen-count", "2", "--tol", "1e-7", "--no-dirac", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&std::fs::read_to_string(dir.join("spectrum.csv")).unwrap());
    assert_eq!(column(&rows, "background"), ["flat", "flat"]);
    assert!(column(&rows, "sigma_min").iter().all(String::is_empty), "--no-dirac skips the Dirac operator");
    assert!(column(&rows, "cap_length").iter().all(|s| s.parse::<f64>().unwrap() == 1.0));
    assert!(column(&rows, "n_tau").iter().all(|s| s == "65"));
    for (lambda, reference) in column(&rows, "lambda1").iter().zip(column(&rows, "dirichlet_reference")) {
        let (lambda, reference): (f64, f64) = (lambda.parse().unwrap(), reference.parse().unwrap());
        assert!((lambda / reference - 1.0).abs() < 0.02);
    }
}

#[test]
fn spectrum_backgrounds_and_model_flags() {
    let model = run(&[
        "spectrum", "--sweep", "0.1,0.05", "--background", "model", "--alpha", "0.1", "--c-re", "0.3", "--c-im", "0.2",
        "--n-tau", "65",
    ]);
    assert_eq!(code(&model), 0, "{}", String::from_utf8_lossy(&model.stderr));
    let model_text = String::from_utf8(model.stdout).unwrap();
    let rows = csv_rows(&model_text);
    assert!(column(&rows, "sigma_min").iter().all(|s| s.parse::<f64>().unwrap() > 0.0));
    let other = run(&["spectrum", "--sweep", "0.1,0.05", "--background", "model", "--n-tau", "65"]);
    assert_ne!(String::from_utf8(other.stdout).unwrap(), model_text);

    for (background, extra) in [("wolf", ["--ell", "0.6"]), ("approx", ["--delta", "0.6"])] {
        let mut args = vec!["spectrum", "--sweep", "0.1,0.05", "--background", background, "--n-tau", "65"];
        args.extend(extra);
        if background == "approx" {
            args.extend(["--amplitude", "0.1"]);
        }
        let out = run(&args);
        assert_eq!(code(&out), 0, "{background}: {}", String::from_utf8_lossy(&out.stderr));
        let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
        assert_eq!(column(&rows, "background"), [background, background]);
    }
}

#[test]
fn spectrum_sweep_errors_are_config_errors() {
    assert_eq!(code(&run(&["spectrum"])), 2);
    assert_eq!(code(&run(&["spectrum", "--sweep", ""])), 2);
    assert_eq!(code(&run(&["spectrum", "--sweep", "0.1"])), 2);
    assert_eq!(code(&run(&["spectrum", "--sweep", "0.1,abc"])), 2);
    assert_eq!(code(&run(&["spectrum", "--sweep", "0.1,1.5"])), 2);
}

#[test]
fn glue_writes_fields_and_uses_corrector_flags() {
    let dir = scratch_dir("glue");
    let out = run(&[
        "glue", "--R", "0.2", "--fixture", "radial", "--delta", "0.5", "--amplitude", "0.3", "--n-tau", "201", "--modes",
        "4", "--cap-length", "2", "--delta-prime", "0.4", "--delta-dprime", "0.35", "--tol", "1e-6", "--max-iterations",
        "20", "--epsilon", "0.2", "--seed", "5", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let row = read_json(&dir.join("glue.json"));
    assert_eq!(row["stop_tol"].as_f64(), Some(1e-6));
    assert!(row["residual_after"].as_f64().unwrap() <= 1e-6);
    assert_eq!(row["seed"].as_i64(), Some(5));
    let t = row["T"].as_f64().unwrap();
    let expected_sigma = 1.0 / (row["constant_C"].as_f64().unwrap() * t.powf(2.2));
    approx::assert_relative_eq!(row["sigma_R"].as_f64().unwrap(), expected_sigma, max_relative = 1e-12);
    for prefix in ["approx", "glued"] {
        for part in ["a_tau", "a_theta", "phi"] {
            Field2D::read_json(&dir.join(format!("{prefix}_{part}.json"))).unwrap();
        }
    }
    Field2D::read_json(&dir.join("gamma.json")).unwrap();
}

#[test]
fn glue_accepts_the_wolf_fixture() {
    let row = stdout_json(&run(&["glue", "--R", "0.2", "--fixture", "wolf", "--ell", "0.6", "--n-tau", "201"]));
    assert_eq!(row["fixture"], "wolf");
    assert_eq!(row["residual_drop_pass"], true);
}

#[test]
fn glue_iteration_cap_is_a_numeric_failure() {
    assert_eq!(code(&run(&["glue", "--R", "0.2", "--n-tau", "201", "--tol", "1e-300", "--max-iterations", "3"])), 3);
    assert_eq!(code(&run(&["glue", "--R", "0.2", "--n-tau", "201", "--max-iterations", "0"])), 2);
    assert_eq!(code(&run(&["glue", "--R", "0.2", "--n-tau", "201", "--epsilon", "-1"])), 2);
}

#[test]
fn config_file_supplies_values_and_flags_override_it() {
    let dir = scratch_dir("config");
    let config = dir.join("config.json");
    std::fs::write(&config, r#"{"R": 0.2, "n_tau": 65, "samples": 7, "alpha": -0.1, "strict": true}"#).unwrap();
    let row = stdout_json(&run(&["model-check", "--config", config.to_str().unwrap()]));
    assert_eq!(row["R"].as_f64(), Some(0.2));
    assert_eq!(row["n_tau"].as_i64(), Some(65));
    assert_eq!(row["pointwise_samples"].as_i64(), Some(7));
    assert_eq!(row["params"]["alpha"].as_f64(), Some(-0.1));
    let row = stdout_json(&run(&["model-check", "--config", config.to_str().unwrap(), "--R", "0.3", "--alpha", "0.2"]));
    assert_eq!(row["R"].as_f64(), Some(0.3));
    assert_eq!(row["params"]["alpha"].as_f64(), Some(0.2));
    assert_eq!(row["n_tau"].as_i64(), Some(65));

    let sweep = dir.join("sweep.json");
    std::fs::write(&sweep, r#"{"sweep": [0.1, 0.05], "background": "flat", "n_tau": 65, "no_dirac": true}"#).unwrap();
    let out = run(&["spectrum", "--config", sweep.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&String::from_utf8(out.stdout).unwrap()).len(), 3);
}

#[test]
fn bad_config_files_are_config_errors() {
    let dir = scratch_dir("bad-config");
    let unknown = dir.join("unknown.json");
    std::fs::write(&unknown, r#"{"no_such_key": 1}"#).unwrap();
    assert_eq!(code(&run(&["model-check", "--config", unknown.to_str().unwrap()])), 2);
    let malformed = dir.join("malformed.json");
    std::fs::write(&malformed, "{not json").unwrap();
    assert_eq!(code(&run(&["model-check", "--config", malformed.to_str().unwrap()])), 2);
    let nested = dir.join("nested.json");
    std::fs::write(&nested, r#"{"R": {"value": 0.1}}"#).unwrap();
    assert_eq!(code(&run(&["model-check", "--config", nested.to_str().unwrap()])), 2);
    let missing = dir.join("missing.json");
    assert_eq!(code(&run(&["model-check", "--config", missing.to_str().unwrap()])), 2);
}

#[test]
fn thread_cap_is_validated_and_does_not_change_output() {
    let args = ["poisson-solve", "--modes", "4", "--samples", "5", "--radial-nodes", "1001"];
    let one = run_with_env(&args, &[("HITCHIN_GLUE_THREADS", "1")]);
    let three = run_with_env(&args, &[("HITCHIN_GLUE_THREADS", "3")]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, three.stdout);
    assert_eq!(code(&run_with_env(&args, &[("HITCHIN_GLUE_THREADS", "0")])), 2);
    assert_eq!(code(&run_with_env(&args, &[("HITCHIN_GLUE_THREADS", "many")])), 2);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let text = String::from_utf8(run(&["model-check", "--n-tau", "65"]).stdout).unwrap();
    assert!(text.contains("\"R\": 1.0000000000000001e-1"));
}
