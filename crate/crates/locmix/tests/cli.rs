use std::process::{Command, Output};
use std::time::Instant;

use locmix::formats::GroupJson;
use locmix::report::*;
use locmix_core::fuchsian::GroupPresentation;

const HALF_SHIFT: &str = r#"{"states":["0","1"],"transition":[[1,1],[1,1]],
  "r":[[0.6931471805599453,0.6931471805599453],[0.6931471805599453,0.6931471805599453]],
  "f":[[0],[1]]}"#;

fn locmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locmix")).args(args).env_remove("LOCMIX_THREADS").output().unwrap()
}

fn ok(args: &[&str]) -> (String, String) {
    let out = locmix(args);
    let (so, se) = (String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap());
    assert!(out.status.success(), "{args:?} failed: {se}");
    (so, se)
}

fn code(args: &[&str]) -> i32 {
    locmix(args).status.code().unwrap()
}

#[test]
fn invariants_for_the_presets() {
    let (out, _) = ok(&["invariants"]);
    let r = InvariantsReport::from_json(&out).unwrap();
    assert_eq!((r.p, r.h, r.d), (2, 0, 2));
    assert!((r.c - 3.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-9);
    assert!(r.exact);
    assert_eq!(r.provenance.command, "invariants");
    assert_eq!(r.provenance.config_hash.len(), 16);

    let (out, _) = ok(&["invariants", "--phi", "[[1,0]]"]);
    let r = InvariantsReport::from_json(&out).unwrap();
    assert_eq!((r.p, r.h), (1, 0));
    assert!((r.c - 1.0 / std::f64::consts::TAU).abs() < 1e-12);

    let (out, _) = ok(&["invariants", "--preset", "punctured_torus"]);
    let r = InvariantsReport::from_json(&out).unwrap();
    assert_eq!((r.p, r.h), (0, 2));
    assert!(!r.exact);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["invariants", "--phi", "[[1,0"]), 2);
    assert_eq!(code(&["invariants", "--phi", "[[1,0,0]]"]), 2);
    assert_eq!(code(&["invariants", "--preset", "nope"]), 2);
    assert_eq!(code(&["invariants", "--preset", "punctured_torus", "--exact"]), 3);
    assert_eq!(code(&["invariants", "--group", "/nonexistent/group.json"]), 1);
    assert_eq!(code(&["orbit-count", "--t-grid", "1:8", "--budget", "100"]), 4);
    assert_eq!(
        code(&["symbolic", "--shift", HALF_SHIFT, "qsum", "--t", "40", "--max-nodes", "10"]),
        4
    );
}

#[test]
fn gram_matrix_makes_the_constant_exact() {
    let (out, _) = ok(&["invariants", "--preset", "punctured_torus", "--gram", r#"{"q":[[1,0],[0,1]]}"#, "--exact"]);
    let r = InvariantsReport::from_json(&out).unwrap();
    assert!(r.exact && r.c > 0.0);
    assert_eq!(code(&["invariants", "--preset", "punctured_torus", "--gram", r#"{"q":[[1,2],[2,1]]}"#]), 2);
}

#[test]
fn orbit_count_table() {
    let (csv, json) = ok(&["orbit-count", "--phi", "[[1,0]]", "--t-grid", "1:2"]);
    let (comments, header, rows) = parse_csv(&csv).unwrap();
    assert!(comments[0].starts_with("locmix "));
    assert!(comments.iter().any(|c| c.starts_with("config=")));
    assert_eq!(&header[..2], ["T", "N"]);
    assert_eq!(rows, vec![vec![1.0, 1.0], vec![2.0, 3.0]]);
    let r = CountReport::from_json(&json).unwrap();
    assert!(r.fit.is_none() && r.fit_error.is_some());
    assert_eq!(r.predicted_exponent, 1.0);
}

#[test]
fn csv_cells_carry_seventeen_digits() {
    let (csv, _) = ok(&["orbit-count", "--phi", "[[1,0]]", "--t-grid", "2:7", "--alphas", "0,1"]);
    let (_, header, rows) = parse_csv(&csv).unwrap();
    assert_eq!(header, ["T", "N", "model_0", "model_1"]);
    let line = csv.lines().last().unwrap();
    let model = line.split(',').nth(2).unwrap();
    let mantissa = model.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{model}");
    assert_eq!(rows.len(), 6);
}

#[test]
fn outputs_go_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    let (so, se) = ok(&[
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "geodesics",
        "--phi",
        "[[1,0]]",
        "--class",
        "0",
        "--t-grid",
        "3:7",
    ]);
    assert!(so.is_empty() && se.is_empty());
    let (_, header, rows) = parse_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(header[0], "T");
    assert_eq!(rows.len(), 5);
    let r = CountReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(r.experiment, "geodesic");
    assert_eq!(r.predicted_exponent, 2.0);
}

#[test]
fn group_files_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("torus.json");
    let g = GroupJson::from_presentation(&GroupPresentation::punctured_torus());
    std::fs::write(&path, serde_json::to_string(&g).unwrap()).unwrap();
    let (from_file, _) = ok(&["invariants", "--group", path.to_str().unwrap()]);
    let (from_preset, _) = ok(&["invariants", "--preset", "punctured_torus"]);
    let a = InvariantsReport::from_json(&from_file).unwrap();
    let b = InvariantsReport::from_json(&from_preset).unwrap();
    assert_eq!((a.p, a.h, a.c, a.residues), (b.p, b.h, b.c, b.residues));
}

#[test]
fn matrix_coefficients_are_reproducible() {
    let args = ["matrix-coeff", "--phi", "[[1,0]]", "--t-grid", "2,3", "--samples", "4000", "--seed", "9"];
    let (a, ja) = ok(&args);
    let (b, _) = ok(&args);
    let single: Vec<&str> = ["--threads", "1"].into_iter().chain(args).collect();
    let (c, _) = ok(&single);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let (_, header, rows) = parse_csv(&a).unwrap();
    assert_eq!(header, ["t", "estimate", "stderr", "discarded"]);
    assert!(rows.iter().all(|r| r[1] > 0.0 && r[2] > 0.0));
    let r = MixingReport::from_json(&ja).unwrap();
    assert_eq!(r.provenance.seed, Some(9));
    assert_eq!(r.predicted_exponent, 1.0);

    let (d, _) = ok(&["matrix-coeff", "--phi", "[[1,0]]", "--t-grid", "2,3", "--samples", "4000", "--seed", "10"]);
    assert_ne!(a, d);
}

#[test]
fn symbolic_commands() {
    let (out, _) = ok(&["symbolic", "--shift", HALF_SHIFT, "qsum", "--t", "2.0794415416798357", "--xi", "1"]);
    let r = QsumReport::from_json(&out).unwrap();
    assert!((r.q - 0.375).abs() < 1e-12, "{}", r.q);

    let (out, _) = ok(&["symbolic", "--shift", HALF_SHIFT, "gibbs"]);
    let r = GibbsReport::from_json(&out).unwrap();
    assert!(r.rho.iter().all(|v| (v - 0.5).abs() < 1e-12));

    let (out, _) = ok(&["symbolic", "--shift", HALF_SHIFT, "pressure"]);
    let r = PressureReport::from_json(&out).unwrap();
    assert!((r.lambda - 1.0).abs() < 1e-12 && r.pressure.abs() < 1e-12);

    let (out, _) = ok(&["symbolic", "--shift", HALF_SHIFT, "it-check", "--t", "3", "--xi1", "1", "--xi2", "0"]);
    let r = ItReport::from_json(&out).unwrap();
    assert!(r.agree);

    let (csv, json) = ok(&["symbolic", "--shift", HALF_SHIFT, "llt", "--t-grid", "10,20"]);
    assert_eq!(parse_csv(&csv).unwrap().2.len(), 2);
    LltReport::from_json(&json).unwrap();
}

#[test]
fn dry_run_is_fast_and_reports_the_budget() {
    let start = Instant::now();
    let (out, _) = ok(&["--dry-run", "orbit-count", "--t-grid", "1:30"]);
    assert!(start.elapsed().as_secs() < 10);
    let r = DryRunReport::from_json(&out).unwrap();
    assert_eq!(r.unit, "ball_elements");
    assert!(!r.within_budget);
    let (out, _) = ok(&["--dry-run", "matrix-coeff", "--samples", "1e9"]);
    DryRunReport::from_json(&out).unwrap();
}

#[test]
fn reports_reject_tampering() {
    let (out, _) = ok(&["invariants"]);
    let mut v: serde_json::Value = serde_json::from_str(&out).unwrap();
    v["c"] = serde_json::json!(-1.0);
    assert!(InvariantsReport::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&out).unwrap();
    v["extra"] = serde_json::json!(1);
    assert!(InvariantsReport::from_json(&v.to_string()).is_err());
}
