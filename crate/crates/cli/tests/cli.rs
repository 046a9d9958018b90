use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rmab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const TWO_STATE: &str = r#"
states  = ["a", "b"]
gamma   = "1/2"
alpha   = "1/2"
rewards = [["0", "1"], ["0", "0"]]
kernel0 = [["1", "0"], ["0", "1"]]
kernel1 = [["1", "0"], ["1/2", "1/2"]]
initial = [1, 1]
"#;

fn write_instance(dir: &Path, body: &str) -> String {
    let path = dir.join("instance.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn whittle_indices_for_the_benchmark() {
    let v = json(&rmab(&["--instance", "builtin:benchmark", "whittle"]));
    assert_eq!(v["indexable"], true);
    let got: Vec<f64> = v["indices"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (g, want) in got.iter().zip([-0.25, 0.25, 0.4, -0.4]) {
        assert!((g - want).abs() < 1e-6, "{got:?}");
    }
}

#[test]
fn whittle_witness_for_slow_steady() {
    let v = json(&rmab(&["--instance", "builtin:slow-steady", "whittle"]));
    assert_eq!(v["indexable"], false);
    let w = &v["witness"];
    assert!(w["lambda_lo"].as_f64().unwrap() < w["lambda_hi"].as_f64().unwrap());
    assert!(w["state"].is_string());
}

#[test]
fn solve_lp_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), TWO_STATE);
    let out_dir = dir.path().join("out");
    let v = json(&rmab(&["--instance", &path, "--out", out_dir.to_str().unwrap(), "solve-lp", "--T", "2"]));
    assert_eq!(v["T"], 2);
    // both periods pull the half mass sitting in a
    let value = v["per_arm_value"].as_f64().unwrap();
    assert!((value - (0.5 * 0.5 + 0.5 * 0.25)).abs() < 1e-12, "{value}");
    assert_eq!(v["upper_bound"].as_f64().unwrap(), 2.0 * value);
    let csv = fs::read_to_string(out_dir.join("occupation.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,state,action,x"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn oracle_reports_the_exact_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_instance(dir.path(), TWO_STATE);
    let v = json(&rmab(&["--instance", &path, "oracle"]));
    let (v_star, ub) = (v["V_star"].as_f64().unwrap(), v["lp_upper_bound"].as_f64().unwrap());
    assert!(v_star <= ub + 1e-8);
    assert!(v["fb_exact"].as_f64().unwrap() <= v_star + 1e-8);
    assert_eq!(v["guards"]["count_states"], 3);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_instance(dir.path(), &TWO_STATE.replace(r#"["1", "0"], ["0", "1"]"#, r#"["1", "1"], ["0", "1"]"#));
    let cases: Vec<Vec<&str>> = vec![
        vec!["--instance", &bad, "solve-lp"],
        vec!["repro", "no-such-experiment"],
        vec!["--instance", "builtin:benchmark", "--N", "600", "oracle"],
        vec!["--instance", "builtin:benchmark", "--N", "60", "simulate", "--reps", "2", "--record-diffusion"],
        vec!["--instance", "builtin:benchmark", "--N", "0", "simulate", "--reps", "2"],
        vec!["solve-lp", "--bogus-flag"],
    ];
    for args in cases {
        let out = rmab(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn simulate_writes_csv_and_diffusion() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = rmab(&[
        "--instance", "builtin:benchmark", "--N", "60", "--out", out_dir,
        "simulate", "--reps", "20", "--record-diffusion",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let header = stdout.lines().next().unwrap();
    for col in ["N", "policy", "stderr", "ci95", "lp_upper_bound", "gap", "reps", "seed", "T", "T_sim"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    let diffusion = fs::read_to_string(dir.path().join("diffusion.csv")).unwrap();
    assert!(diffusion.starts_with("t,mean_abs_ztilde,stderr,bound_2t_S2"));
}

#[test]
fn sweep_output_does_not_depend_on_threads() {
    let run = |threads: &str| {
        let out = rmab(&[
            "--instance", "builtin:benchmark", "--threads", threads,
            "sweep", "--Ns", "60,600", "--reps", "50",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let one = run("1");
    assert!(!one.is_empty());
    assert_eq!(one, run("3"));
}
