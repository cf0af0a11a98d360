use std::process::{Command, Output};

use serde_json::Value;

fn dw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dw")).args(args).output().expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = dw(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_header(text: &str) -> &str {
    text.lines().next().unwrap()
}

#[test]
fn odd_particle_number_is_a_validation_error() {
    let out = dw(&["bh", "--N", "3", "--state", "fock"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`N`"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_values_name_their_key() {
    for (args, key) in [
        (vec!["hartree", "--lambda", "abc"], "lambda"),
        (vec!["hartree", "--lambda", "-1"], "lambda"),
        (vec!["bog", "--grid-n", "8"], "grid.n"),
        (vec!["bh", "--N", "10", "--state", "squeezed:1"], "state"),
        (vec!["bh-scan", "--N", "10", "--T-log-range", "1,2"], "T_log_range"),
        (vec!["compare", "--N", "10", "--epsilon", "1.5"], "epsilon"),
        (vec!["hartree", "--tol", "0"], "tol"),
    ] {
        let out = dw(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(&format!("`{key}`")), "{args:?}: {}", stderr(&out));
    }
    let out = dw(&["bh", "--N", "10", "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "lambda = 1\nmystery = 3\n").unwrap();
    let out = dw(&["hartree", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`mystery`"), "{}", stderr(&out));

    // a key that exists, but not for this command
    std::fs::write(&path, "modes = 8\n").unwrap();
    let out = dw(&["bh", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`modes`"));

    // unknown flags are rejected by the parser with the same code
    assert_eq!(dw(&["bh", "--bogus", "1"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_one() {
    // converges, but the box cuts the minimizer off
    let out = dw(&["hartree", "--halfwidth", "3", "--grid-n", "512"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("box too small"));
    let out = dw(&["hartree", "--max-iter", "1", "--grid-n", "512"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no convergence"));
}

#[test]
fn theorem_json_schema() {
    let text = ok_stdout(&["theorem", "--N", "20", "--lambda", "1", "--grid-n", "512", "--out", "json"]);
    assert!(text.starts_with("{\n  \"dw_version\": "), "{text}");
    let v: Value = serde_json::from_str(&text).unwrap();
    for k in ["energy_per_particle", "e_H_term", "e_B_term", "Delta_N"] {
        assert!(v[k].is_number(), "{k}");
    }
    let delta = v["Delta_N"].as_f64().unwrap();
    assert!((delta - (1.0 - 1.0 / 19.0)).abs() < 1e-15);
    let total = v["e_H_term"].as_f64().unwrap() + v["e_B_term"].as_f64().unwrap();
    assert_eq!(total, v["energy_per_particle"].as_f64().unwrap());
}

#[test]
fn compare_json_schema() {
    let v = json(&["compare", "--N", "10", "--lambda", "1", "--L", "6", "--grid-n", "1024"]);
    for k in ["E_loc", "E_dloc", "T", "U"] {
        assert!(v[k].is_number(), "{k}");
    }
    assert!(["localized", "delocalized"].contains(&v["winner"].as_str().unwrap()));
    assert!(v["criterion_pass"].is_boolean());
    let winner_loc = v["E_loc"].as_f64().unwrap() < v["E_dloc"].as_f64().unwrap();
    assert_eq!(winner_loc, v["winner"] == "localized");
}

#[test]
fn hartree_profile_and_csv() {
    let v = json(&["hartree", "--lambda", "0", "--grid-n", "300", "--profile"]);
    let x = v["x"].as_array().unwrap();
    let u = v["u"].as_array().unwrap();
    assert_eq!(x.len(), 300);
    assert_eq!(u.len(), 300);
    assert!(json(&["hartree", "--lambda", "0", "--grid-n", "300"]).get("x").is_none());

    let text = ok_stdout(&["hartree", "--lambda", "0", "--grid-n", "300", "--out", "csv"]);
    assert_eq!(csv_header(&text), "x,u");
    assert_eq!(text.lines().count(), 301);
    // 17 significant digits
    let first = text.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(first.split('e').next().unwrap().trim_start_matches('-').len(), 18);
}

#[test]
fn perturbed_hartree_reports_both_solves() {
    let v = json(&["hartree", "--lambda", "1", "--grid-n", "1024", "--perturb", "0.5,2,0.5"]);
    let de = v["delta_e"].as_f64().unwrap();
    assert!(de > 0.0);
    let reference = v["e_H_reference"].as_f64().unwrap();
    assert!((reference - de - v["e_H"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(dw(&["hartree", "--perturb", "0.5,2"]).status.code(), Some(2));
}

#[test]
fn tunnel_and_scan_csv_columns() {
    let text = ok_stdout(&["tunnel", "--s", "2", "--lambda", "1", "--L-list", "4,6", "--grid-n", "1024", "--out", "csv"]);
    assert_eq!(csv_header(&text), "L,overlap,T,two_route_gap,agmon,log_ratio");
    assert_eq!(text.lines().count(), 3);

    let text = ok_stdout(&["bh-scan", "--N", "100", "--U", "1", "--T-log-range", "-4,3,8", "--out", "csv"]);
    assert_eq!(csv_header(&text), "T,ratio_T_over_U,var_Nminus,Jx,energy,regime");
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[0].ends_with("Fock"));
    assert!(rows[3].ends_with("Josephson"));
    assert!(rows[7].ends_with("Rabi"));
}

#[test]
fn bog_json_fields() {
    let v = json(&["bog", "--lambda", "1", "--modes", "8", "--grid-n", "1024"]);
    for k in ["e_B", "tr_gamma", "tr_V_rho", "quasifree_defect"] {
        assert!(v[k].is_number(), "{k}");
    }
    assert_eq!(v["frequencies"].as_array().unwrap().len(), 8);
    assert!(v["e_B"].as_f64().unwrap() <= 0.0);
}

#[test]
fn split_table_and_single_point() {
    let text = ok_stdout(&["split", "--N", "20", "--lambda", "1", "--grid-n", "512", "--out", "csv"]);
    assert_eq!(csv_header(&text), "n,E_loc");
    assert_eq!(text.lines().count(), 22);
    let v = json(&["split", "--N", "20", "--lambda", "1", "--grid-n", "512"]);
    assert_eq!(v["argmin_n"], 10);
    assert_eq!(v["rows"].as_array().unwrap().len(), 21);
}

#[test]
fn sweep_with_empty_list_is_header_only() {
    let text = ok_stdout(&["sweep", "tunnel", "--L", ""]);
    assert_eq!(text, "L,overlap,T,two_route_gap,agmon,log_ratio,status\n");
}

#[test]
fn sweep_keeps_going_past_a_failing_point() {
    let text = ok_stdout(&["sweep", "tunnel", "--L", "4,12", "--halfwidth", "10", "--grid-n", "1024"]);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("4,") && rows[0].ends_with(",ok"), "{}", rows[0]);
    assert!(rows[1].starts_with("12,"));
    assert!(!rows[1].ends_with(",ok"));
    assert!(rows[1].contains("box too small"));
}

#[test]
fn sweep_cartesian_and_zip() {
    let text = ok_stdout(&["sweep", "bh", "--N", "20", "--T", "-1,-0.1", "--sigma", "1,2,3"]);
    assert_eq!(csv_header(&text), "T,sigma,energy,mean_Nminus,var_Nminus,Jx,Jy,Jz,regime,status");
    assert_eq!(text.lines().count(), 7);
    let zipped = ok_stdout(&["sweep", "bh", "--N", "20", "--T", "-1,-0.1,-0.01", "--sigma", "1,2,3", "--zip"]);
    assert_eq!(zipped.lines().count(), 4);
    let second: Vec<&str> = zipped.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(&second[..2], ["-1.0000000000000001e-1", "2"]);

    let out = dw(&["sweep", "bh", "--N", "20", "--T", "-1,-0.1", "--sigma", "1,2,3", "--zip"]);
    assert_eq!(out.status.code(), Some(2));
    // lists only on sweep keys
    let out = dw(&["sweep", "bog", "--lambda", "0.5,1", "--modes", "4,8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`modes`"));
    // and bh-scan is not a sweep target
    assert_eq!(dw(&["sweep", "bh-scan"]).status.code(), Some(2));
}

#[test]
fn sweep_point_errors_include_validation() {
    let text = ok_stdout(&["sweep", "bh", "--N", "10", "--n", "5,11"]);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows[0].ends_with(",ok"));
    assert!(rows[1].contains("`n0`"), "{}", rows[1]);
}

#[test]
fn sweep_json_rows() {
    let v = json(&["sweep", "theorem", "--N", "10", "--lambda", "0,1", "--grid-n", "512", "--out", "json"]);
    assert_eq!(v["target"], "theorem");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["lambda"], 0);
    assert_eq!(rows[0]["status"], "ok");
    assert_eq!(rows[0]["e_B_term"].as_f64(), Some(0.0));
}

#[test]
fn config_files_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("run.toml");
    std::fs::write(&toml, "N = 40\nT = -0.5\nU = 2.0\nstate = \"coherent\"\n").unwrap();
    let js = dir.path().join("run.json");
    std::fs::write(&js, r#"{"N": 40, "T": -0.5, "U": 2.0, "state": "coherent"}"#).unwrap();

    let from_toml = ok_stdout(&["bh", "--config", toml.to_str().unwrap()]);
    let from_json = ok_stdout(&["bh", "--config", js.to_str().unwrap()]);
    let from_flags = ok_stdout(&["bh", "--N", "40", "--T", "-0.5", "--U", "2", "--state", "coherent"]);
    assert_eq!(from_toml, from_json);
    assert_eq!(from_toml, from_flags);

    let v: Value = serde_json::from_str(&ok_stdout(&["bh", "--config", toml.to_str().unwrap(), "--U", "0"])).unwrap();
    assert_eq!(v["U"].as_f64(), Some(0.0));
    assert_eq!(v["N"], 40);
    assert_eq!(v["state"], "coherent");

    // nested tables map onto dotted keys
    let nested = dir.path().join("model.toml");
    std::fs::write(&nested, "lambda = 0\n[trap]\ns = 2\n[grid]\nn = 400\n").unwrap();
    let a = ok_stdout(&["hartree", "--config", nested.to_str().unwrap()]);
    let b = ok_stdout(&["hartree", "--lambda", "0", "--s", "2", "--grid-n", "400"]);
    assert_eq!(a, b);
}

#[test]
fn output_file_and_logging_stay_off_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = Command::new(env!("CARGO_BIN_EXE_dw"))
        .args(["bh", "--N", "10", "--output", path.to_str().unwrap()])
        .env("DW_LOG", "debug")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "bh");

    let out = Command::new(env!("CARGO_BIN_EXE_dw"))
        .args(["hartree", "--lambda", "1", "--grid-n", "512"])
        .env("DW_LOG", "debug")
        .output()
        .unwrap();
    assert!(serde_json::from_slice::<Value>(&out.stdout).is_ok());
    assert!(stderr(&out).contains("hartree"));
}

#[test]
fn outputs_are_deterministic() {
    let runs: [&[&str]; 4] = [
        &["tunnel", "--L-list", "4,5,6", "--grid-n", "1024", "--out", "csv"],
        &["split", "--N", "20", "--grid-n", "512"],
        &["sweep", "compare", "--N", "10", "--L", "4,6,8", "--grid-n", "1024"],
        &["bh-scan", "--N", "200", "--out", "json"],
    ];
    for args in runs {
        let one = ok_stdout(&[args, &["--jobs", "1"]].concat());
        let many = ok_stdout(&[args, &["--jobs", "8"]].concat());
        let again = ok_stdout(args);
        assert_eq!(one, many, "{args:?}");
        assert_eq!(one, again, "{args:?}");
    }
}
