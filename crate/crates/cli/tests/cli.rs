use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomforce")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap()
}

#[test]
fn verify_circle_reports_every_identity() {
    let out = run(&["verify", "--surface", "circle", "--a", "1", "--grids", "32,64,128"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let ids: Vec<&str> = v["verdicts"].as_array().unwrap().iter().map(|x| x["identity"].as_str().unwrap()).collect();
    for id in ["EQ3_MAIN", "EQ8_PP", "EQ10_SCALAR", "EQ11_F_SIMPL", "EQ13_G_SIMPL", "FG_DECOMP", "H_FORMS", "HERMITICITY"] {
        assert!(ids.contains(&id), "{id} missing");
    }
    for item in v["verdicts"].as_array().unwrap() {
        for key in ["identity", "grids", "residuals", "slope", "verdict", "notes"] {
            assert!(item.get(key).is_some(), "{key} missing");
        }
    }
    assert_eq!(v["hard_invariants"]["HERMITICITY"], "confirmed");
}

#[test]
fn same_config_gives_identical_bytes() {
    let args = ["fields", "--surface", "torus", "--R", "2", "--r", "0.5", "--count", "20", "--seed", "4"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    // every float carries 17 significant digits
    assert!(text.contains("e0") || text.contains("e-"));
    let other = run(&["fields", "--surface", "torus", "--R", "2", "--r", "0.5", "--count", "20", "--seed", "5"]);
    assert_ne!(text.as_bytes(), other.stdout.as_slice());
}

#[test]
fn csv_output_is_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fields.csv");
    let out = run(&[
        "fields", "--surface", "sphere", "--a", "1", "--sampling", "parametric", "--nu", "4", "--nv", "3", "--format", "csv",
        "--output", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains(','));
    assert_eq!(lines.count(), 12);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn exit_codes_and_diagnostics() {
    let out = run(&["parse", "x + * 2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "SyntaxError");

    let out = run(&["verify", "--colour", "blue"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "UsageError");

    let out = run(&["extrema", "--surface", "klein"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "UnknownSurface");

    let out = run(&["classical", "--surface", "sphere", "--a", "1", "--speed", "50", "--dt", "0.2", "--steps", "5"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["exit_code"], 2);

    let out = run(&["verify", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--grids"));
}

#[test]
fn force_examples() {
    let v = json(&run(&["force", "--surface", "sphere", "--a", "1e-8m", "--mass", "1e-30"]));
    assert_eq!(v["chi_g_pn"].as_f64(), Some(0.0));
    assert_eq!(v["vanishes"], true);

    let v = json(&run(&["force", "--surface", "generic", "--curvature-scale", "1e-8m", "--mass", "1e-30"]));
    let pn = v["force_pn"].as_f64().unwrap();
    assert!((pn - 1.1e-2).abs() < 0.02e-2, "{pn}");

    let out = run(&["force", "--surface", "generic", "--mass", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "surface = torus\nR = 2\nr = 1\nidentities = HERMITICITY,H_FORMS\ngrids = 16,32,64\n").unwrap();
    let out = run(&["verify", "--config", conf.to_str().unwrap(), "--identities", "HERMITICITY"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["surface"], "torus(R=2, r=1)");
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 1);
}

#[test]
fn parse_summary_and_report_merge() {
    let v = json(&run(&["parse", "sqrt(x^2 + y^2) - a"]));
    assert_eq!(v["parameters"][0], "a");
    assert_eq!(v["variables"].as_array().unwrap().len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("v.json");
    let out = run(&["verify", "--identities", "HERMITICITY,EQ11_F_SIMPL", "--output", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&run(&["report", first.to_str().unwrap()]));
    assert_eq!(v["verdict_tally"]["confirmed"], 1);
    assert_eq!(v["verdict_tally"]["refuted"], 1);
}

#[test]
fn ehrenfest_csv_header() {
    let out = run(&["ehrenfest", "--n", "128", "--steps", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,mean_p_1,mean_p_2,dmean_p_dt_1"));
    // header plus the interior steps where central differences exist
    assert_eq!(text.lines().count(), 10);
}
