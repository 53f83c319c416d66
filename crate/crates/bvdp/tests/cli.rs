use std::fs;
use std::path::Path;
use std::process::Command;

use bvdp::ledger::{read_csv, read_json, read_manifest, ReparamRow, StepRow, Status};

const SMALL_LOADED: &str = r#"
[mesh]
nx = 4
ny = 4

[loads.dirichlet]
profile = { kind = "ramp", slope = 1.0 }
matrix = [[1.0, 0.0], [0.0, 0.0]]

[time]
t_end = 0.6
tau = 2e-2

[reparam]
n_samples = 48

[diagnostics]
n_partition = 16
"#;

const STATIC: &str = r#"
[mesh]
nx = 4
ny = 4

[time]
t_end = 0.5
tau = 0.05

[reparam]
n_samples = 33
"#;

fn bvdp(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bvdp")).args(args).env("RUST_LOG", "warn").output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap(), text)
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(String::from).collect()
}

#[test]
fn static_run_is_ok_with_zero_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "static.toml", STATIC);
    let out = tmp.path().join("run");
    let (code, text) = bvdp(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.status, Status::Ok);
    assert!(m.summary.max_edb_residual <= 1e-10);
    let steps: Vec<StepRow> = read_csv(&out.join("steps.csv")).unwrap();
    assert_eq!(steps.len(), 11);
    assert!(steps.iter().all(|r| r.edb_residual <= 1e-10 && r.r_u <= 1e-10 && r.max_dz <= 0.0));
}

#[test]
fn ledger_files_follow_the_documented_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL_LOADED);
    let out = tmp.path().join("run");
    let (code, text) = bvdp(&["run", &cfg, "--out", out.to_str().unwrap(), "--eps", "2e-2"]);
    assert_eq!(code, 0, "{text}");
    let steps = [
        "t", "outer_iters", "r_u", "kkt_z", "kkt_p", "Q", "Phi", "work", "R_cum", "H_cum", "visc_cum", "conj_cum",
        "edb_residual",
    ];
    assert_eq!(header(&out.join("steps.csv"))[..steps.len()], steps);
    let reparam = ["s", "t", "tprime", "z_l1_rate", "p_l1_rate", "D", "Dstar", "norm_residual", "regime"];
    assert_eq!(header(&out.join("reparam.csv"))[..reparam.len()], reparam);
    let rows: Vec<ReparamRow> = read_csv(&out.join("reparam.csv")).unwrap();
    assert_eq!(rows.len(), 48);
    assert!(rows.iter().all(|r| r.regime == "A" || r.regime == "B"));
    assert!(rows.iter().any(|r| r.regime == "A"));

    let d = read_json(&out.join("diagnostics.json")).unwrap();
    for key in ["regimes", "cornerstone", "mediesci", "lower_inequality", "constants"] {
        assert!(d.get(key).is_some(), "missing {key}");
    }
    for key in ["K_C", "K_W", "m0_observed"] {
        assert!(d["constants"][key].is_number(), "missing constants.{key}");
    }
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.eps, 2e-2);
    let echoed = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.contains("eps = 0.02"));
}

#[test]
fn failed_step_keeps_a_partial_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_LOADED}\n[solver]\nmax_outer = 1\ntol_stag = 1e-300\nmax_halvings = 1\n");
    let cfg = write_config(tmp.path(), "tiny.toml", &text);
    let out = tmp.path().join("run");
    let (code, text) = bvdp(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.status, Status::FailedStep);
    assert!(m.failure.is_some());
    let steps: Vec<StepRow> = read_csv(&out.join("steps.csv")).unwrap();
    assert!(!steps.is_empty() && steps.len() < 31);
    assert!(!out.join("samples.bin").exists());
    assert_eq!(bvdp(&["check", out.to_str().unwrap()]).0, 3);
}

#[test]
fn config_errors_exit_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "[time]\ntau = -1.0\n");
    assert_eq!(bvdp(&["run", &bad]).0, 4);
    let unknown = write_config(tmp.path(), "unknown.toml", "[material]\nstiffness = 3.0\n");
    assert_eq!(bvdp(&["run", &unknown]).0, 4);
    let ok = write_config(tmp.path(), "ok.toml", STATIC);
    assert_eq!(bvdp(&["run", &ok, "--tau", "2.0"]).0, 4);
    let sweep = write_config(tmp.path(), "sweep.toml", "[sweep]\neps = [1e-2]\n");
    assert_eq!(bvdp(&["sweep", &sweep]).0, 4);
    assert_eq!(bvdp(&["run", tmp.path().join("missing.toml").to_str().unwrap()]).0, 1);
}

#[test]
fn check_reproduces_diagnostics_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL_LOADED);
    let out = tmp.path().join("run");
    assert_eq!(bvdp(&["run", &cfg, "--out", out.to_str().unwrap()]).0, 0);
    let before = read_json(&out.join("diagnostics.json")).unwrap();
    let (code, text) = bvdp(&["check", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code, 0, "{text}");
    assert_eq!(read_json(&out.join("diagnostics.json")).unwrap(), before);

    let steps = out.join("steps.csv");
    let text = fs::read_to_string(&steps).unwrap();
    fs::write(&steps, text.replacen("\n0.02,", "\n0.021,", 1)).unwrap();
    let (code, text) = bvdp(&["check", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{text}");
    assert!(text.contains("content hash"));
}

#[test]
fn sweep_with_repeated_eps_gives_identical_ledgers() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_LOADED}\n[sweep]\neps = [2e-2, 2e-2, 1e-2]\nshared_samples = 8\nworkers = 3\n");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let out = tmp.path().join("sweep");
    let (code, text) = bvdp(&["sweep", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let report = read_json(&out.join("sweep.json")).unwrap();
    let hashes = report["hashes"].as_array().unwrap();
    assert_eq!(hashes[0], hashes[1]);
    assert_ne!(hashes[1], hashes[2]);
    let diffs = report["differences"].as_array().unwrap();
    assert!(diffs[0].as_array().unwrap().iter().all(|d| d.as_f64() == Some(0.0)));
    let rows = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 8 * 3);

    // the same member run alone, with another worker count, hashes the same
    let single = tmp.path().join("single");
    let (code, _) = bvdp(&["run", &cfg, "--eps", "2e-2", "--workers", "1", "--out", single.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(serde_json::Value::String(read_manifest(&single).unwrap().hash), hashes[0]);
}
