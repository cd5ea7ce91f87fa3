use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landau-kit"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn run(cfg: &Path, out: &Path) -> Output {
    bin().arg("run").arg(cfg).arg("--out").arg(out).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_LINEAR: &str = r#"{
  "version": 1,
  "experiment": "linear",
  "grid": {"n_x": 8, "n_v": 512, "v_max": 8.0, "dt": 0.02, "t_final": 20.0},
  "initial": {"modes": [{"k": [1], "amplitude": 0.001}]},
  "linear": {"fit_t_min": 2.0}
}"#;

#[test]
fn list_includes_every_experiment() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["transport", "linear", "simulate", "echo", "penrose", "diagnose"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }

    let out = bin().args(["list", "--json"]).output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v["experiments"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 6);
    assert!(v["experiments"].as_array().unwrap().iter().all(|e| !e["description"].as_str().unwrap().is_empty()));
}

#[test]
fn linear_run_reports_damping_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "lin.json", SMALL_LINEAR);
    let out = tmp.path().join("out");
    let res = run(&cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["experiment"], "linear");
    let mode = &s["results"]["modes"][0];
    let rate = mode["fit"]["rate"].as_f64().unwrap();
    assert!((rate + 0.8513).abs() < 0.01, "{rate}");
    assert!((mode["root"]["re"].as_f64().unwrap() + 0.851330).abs() < 1e-5);
    for f in ["config.resolved.json", "density.ndjson", "summary.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let first_row: Value = serde_json::from_str(
        std::fs::read_to_string(out.join("density.ndjson")).unwrap().lines().next().unwrap(),
    )
    .unwrap();
    assert_eq!(first_row["t"], 0.0);
    assert!(first_row["rho"].as_array().unwrap().iter().any(|m| m["k"] == serde_json::json!([1])));
}

#[test]
fn resolved_config_reparses_to_the_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "lin.json", SMALL_LINEAR);
    let first = tmp.path().join("a");
    assert!(run(&cfg, &first).status.success());
    let resolved = first.join("config.resolved.json");
    let second = tmp.path().join("b");
    assert!(run(&resolved, &second).status.success());
    assert_eq!(
        std::fs::read(&resolved).unwrap(),
        std::fs::read(second.join("config.resolved.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(first.join("density.ndjson")).unwrap(),
        std::fs::read(second.join("density.ndjson")).unwrap()
    );
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (SMALL_LINEAR.replace(r#""grid": {"n_x": 8, "n_v": 512, "v_max": 8.0, "dt": 0.02, "t_final": 20.0},"#, ""), "grid"),
        (SMALL_LINEAR.replace("\"linear\",", "\"quantum\","), "experiment"),
        (SMALL_LINEAR.replace("\"version\": 1,", "\"version\": 1, \"colour\": 2,"), "colour"),
        (SMALL_LINEAR.replace("\"n_v\": 512", "\"n_v\": 500"), "n_v"),
        (SMALL_LINEAR.replace("\"k\": [1]", "\"k\": [7]"), "initial.modes[0].k"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), text);
        let res = run(&cfg, &tmp.path().join(format!("out{i}")));
        assert_eq!(res.status.code(), Some(2), "case {i}");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(field), "case {i}: `{field}` not in {err}");
    }
    let res = run(&tmp.path().join("missing.json"), &tmp.path().join("none"));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // a strong perturbation on a narrow velocity box pushes mass onto the boundary
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "blowup.json",
        r#"{
  "version": 1,
  "experiment": "simulate",
  "equilibrium": {"kind": "maxwellian", "density": 1.0, "temperature": 1.0},
  "grid": {"n_x": 8, "n_v": 64, "v_max": 3.0, "dt": 0.05, "t_final": 10.0},
  "initial": {"modes": [{"k": [1], "amplitude": 0.5}]},
  "boundary_limit": 1e-12,
  "simulate": {}
}"#,
    );
    let res = run(&cfg, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn penrose_subcommand_and_diagnose_dir() {
    let tmp = tempfile::tempdir().unwrap();
    // any config works: the experiment field is overridden
    let cfg = write(tmp.path(), "lin.json", SMALL_LINEAR);
    let out = tmp.path().join("pen");
    let res = bin().arg("penrose").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["experiment"], "penrose");
    assert_eq!(s["results"]["stable"], true);
    assert!(out.join("penrose.csv").is_file());

    let sim = tmp.path().join("sim");
    assert!(run(&config("simulate_conservation"), &sim).status.success());
    let res = bin().arg("diagnose").arg(&sim).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let d = read_json(&sim.join("diagnose.json"));
    assert!(d["conservation"]["mass_drift"].as_f64().unwrap() < 1e-12);
    assert!(d["conservation"]["energy_drift"].as_f64().unwrap() < 1e-8);
    assert!(d["density"]["samples"].as_u64().unwrap() > 10);

    let res = bin().arg("diagnose").arg(tmp.path()).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn checkpoint_resume_continues_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = r#"{
  "version": 1,
  "experiment": "simulate",
  "grid": {"n_x": 8, "n_v": 256, "v_max": 8.0, "dt": 0.05, "t_final": @T@},
  "initial": @INIT@,
  "output": {"checkpoint": true, "diagnostics_every": 1},
  "simulate": {}
}"#;
    let recipe = r#"{"modes": [{"k": [1], "amplitude": 0.01}]}"#;
    let full = write(tmp.path(), "full.json", &base.replace("@T@", "4.0").replace("@INIT@", recipe));
    let half = write(tmp.path(), "half.json", &base.replace("@T@", "2.0").replace("@INIT@", recipe));
    assert!(run(&full, &tmp.path().join("full")).status.success());
    assert!(run(&half, &tmp.path().join("half")).status.success());
    let ck = tmp.path().join("half").join("checkpoint.bin");
    let resume_initial = format!(r#"{{"checkpoint": {}}}"#, serde_json::to_string(&ck).unwrap());
    let resume = write(tmp.path(), "resume.json", &base.replace("@T@", "4.0").replace("@INIT@", &resume_initial));
    let res = run(&resume, &tmp.path().join("resume"));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let a = std::fs::read(tmp.path().join("full").join("checkpoint.bin")).unwrap();
    let b = std::fs::read(tmp.path().join("resume").join("checkpoint.bin")).unwrap();
    assert_eq!(a.len(), b.len());
    // header + state agree to round-off (the resumed run re-solves the field at t = 2)
    let floats = |v: &[u8]| -> Vec<f64> { v[36..].chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect() };
    let gap = floats(&a).iter().zip(floats(&b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-12, "{gap}");
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let res = bin().arg("list").env("LANDAU_KIT_THREADS", "zero").output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}
