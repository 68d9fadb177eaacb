use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn phasemod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasemod")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TWO_MODES: &str = r#"{
  "qubits": 2,
  "modes": [
    {"detuning_hz": -8500.0, "couplings": [1.0, 1.0], "nbar": 0.1},
    {"detuning_hz": 8212.5, "couplings": [0.8, -0.6], "nbar": 0.1}
  ]
}"#;

/// Designs the two-mode gate into `dir` and returns the design file.
fn design(dir: &Path, extra: &[&str]) -> String {
    let spectrum = write(dir, "spectrum.json", TWO_MODES);
    let out = dir.display().to_string();
    let mut args = vec!["design", &spectrum, "--gate-time", "80e-6", "--targets", "1:1,2:1", "--out", &out];
    args.extend_from_slice(extra);
    let result = phasemod(&args);
    assert!(result.status.success(), "{}", stderr(&result));
    dir.join("design.json").display().to_string()
}

#[test]
fn two_mode_design_has_four_segments() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &[]);
    let design = json(file.into());
    assert_eq!(design["gate"]["sequence"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(dir.path().join("sequence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("segment,start_s,duration_s,phase_rad"));
}

#[test]
fn explicit_ordering_reproduces_reference_phases() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &["--ordering", "1,2"]);
    let design = json(file.into());
    let phases: Vec<f64> =
        design["gate"]["sequence"].as_array().unwrap().iter().map(|s| s["phase_rad"].as_f64().unwrap()).collect();
    for (got, want) in phases.iter().zip([0.0, -1.34, -0.343, -1.68]) {
        let diff = (got / PI - want).rem_euclid(2.0);
        assert!(diff.min(2.0 - diff) <= 0.01, "phase {} vs {want}π", got / PI);
    }
}

#[test]
fn cancelling_spectrum_exits_with_no_solution() {
    let dir = TempDir::new().unwrap();
    let spectrum = write(
        dir.path(),
        "cancel.json",
        r#"{"qubits": 2, "modes": [
            {"detuning_hz": 10000, "couplings": [1, 1]},
            {"detuning_hz": 10000, "couplings": [1, -1]}]}"#,
    );
    let out = dir.path().display().to_string();
    let result =
        phasemod(&["design", &spectrum, "--gate-time", "1e-4", "--scheme", "standard", "--out", &out]);
    assert_eq!(result.status.code(), Some(2), "{}", stderr(&result));
    assert!(stderr(&result).contains("entangling area ≈ 0"));
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let spectrum = write(dir.path(), "bad.json", "{\n  \"qubits\": 2,\n  \"modes\": [\n    {\"detuning_hz\": oops}\n  ]\n}\n");
    let out = dir.path().display().to_string();
    let result = phasemod(&["design", &spectrum, "--gate-time", "1e-4", "--out", &out]);
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr(&result).contains("line 4"), "{}", stderr(&result));
}

#[test]
fn bad_ranges_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &[]);
    let out = dir.path().display().to_string();
    for range in [["0.5", "0.5"], ["1", "0"]] {
        let result = phasemod(&[
            "sweep", "--kind", "filter-function", "--gate", &file, "--from", range[0], "--to", range[1], "--out", &out,
        ]);
        assert_eq!(result.status.code(), Some(1));
    }
    let result = phasemod(&[
        "sweep", "--kind", "filter-function", "--gate", &file, "--from", "0", "--to", "1", "--log", "--out", &out,
    ]);
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn sweep_output_does_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let spectrum = write(dir.path(), "spectrum.json", TWO_MODES);
    let mut outputs = vec![];
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let out = out.display().to_string();
        let result = phasemod(&[
            "sweep", "--kind", "detuning", "--spectrum", &spectrum, "--gate-time", "80e-6", "--from", "-3000",
            "--to", "3000", "--points", "13", "--parallel", workers, "--out", &out,
        ]);
        assert!(result.status.success(), "{}", stderr(&result));
        outputs.push(fs::read(Path::new(&out).join("sweep_detuning.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 14);
}

#[test]
fn static_and_response_sweeps_write_curves() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &[]);
    let out = dir.path().display().to_string();
    let result = phasemod(&[
        "sweep", "--kind", "static-error", "--gate", &file, "--from", "-200", "--to", "200", "--points", "5", "--out",
        &out,
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    let csv = fs::read_to_string(dir.path().join("sweep_static_error.csv")).unwrap();
    let centre: f64 = csv.lines().nth(3).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(centre.abs() < 1e-20);

    let result = phasemod(&[
        "sweep", "--kind", "response", "--gate", &file, "--from", "0.1", "--to", "10", "--log", "--points", "4",
        "--depth-hz", "20", "--phase-grid", "8", "--out", &out,
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    let csv = fs::read_to_string(dir.path().join("sweep_response.csv")).unwrap();
    assert!(csv.starts_with("omega_taug_over_2pi,p1_mean,p1_min,p1_max,gap"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn trajectories_return_to_the_origin() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &[]);
    let out = dir.path().display().to_string();
    let result = phasemod(&["trajectory", &file, "--out", &out]);
    assert!(result.status.success(), "{}", stderr(&result));
    for k in 1..=2 {
        let csv = fs::read_to_string(dir.path().join(format!("trajectory_mode_{k}.csv"))).unwrap();
        let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert!((last[0] - 80e-6).abs() < 1e-18);
        assert!(last[1].hypot(last[2]) < 1e-12 * 80e-6, "mode {k} ends at {last:?}");
    }
}

#[test]
fn simulate_writes_observables() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &[]);
    let noise = write(dir.path(), "noise.json", r#"{"kind": "static_offset", "epsilon_hz": 50}"#);
    let out = dir.path().display().to_string();
    let result = phasemod(&["simulate", &file, "--noise", &noise, "--out", &out]);
    assert!(result.status.success(), "{}", stderr(&result));
    let obs = json(dir.path().join("observables.json"));
    for key in ["p0", "p1", "p2", "parity_contrast", "bell_fidelity"] {
        assert!(obs[key].is_f64(), "{key}");
    }
    assert_eq!(obs["per_mode_residual"].as_array().unwrap().len(), 2);
    assert_eq!(obs["diagnostics"]["engine"], "analytic");
    let total = obs["p0"].as_f64().unwrap() + obs["p1"].as_f64().unwrap() + obs["p2"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn fock_engine_agrees_with_the_analytic_one() {
    let dir = TempDir::new().unwrap();
    let spectrum = write(
        dir.path(),
        "one.json",
        r#"{"qubits": 2, "modes": [{"detuning_hz": 50000, "couplings": [1, 1], "nbar": 0.05}]}"#,
    );
    let out = dir.path().display().to_string();
    let result = phasemod(&["design", &spectrum, "--gate-time", "1e-4", "--scheme", "standard", "--out", &out]);
    assert!(result.status.success(), "{}", stderr(&result));
    let file = dir.path().join("design.json").display().to_string();
    let noise = write(dir.path(), "noise.json", r#"{"kind": "sinusoid", "depth_hz": 100, "omega_mod_hz": 20000}"#);
    let analytic = dir.path().join("a").display().to_string();
    let fock = dir.path().join("f").display().to_string();
    assert!(phasemod(&["simulate", &file, "--noise", &noise, "--out", &analytic]).status.success());
    let result = phasemod(&["simulate", &file, "--noise", &noise, "--engine", "fock", "--out", &fock]);
    assert!(result.status.success(), "{}", stderr(&result));
    let a = json(Path::new(&analytic).join("observables.json"));
    let f = json(Path::new(&fock).join("observables.json"));
    assert_eq!(f["diagnostics"]["engine"], "fock");
    assert!(f["diagnostics"]["reliable"].as_bool().unwrap());
    for key in ["p0", "p1", "p2", "bell_fidelity"] {
        let gap = (a[key].as_f64().unwrap() - f[key].as_f64().unwrap()).abs();
        assert!(gap < 1e-6, "{key}: {gap}");
    }
}

#[test]
fn truncated_fock_run_exits_unreliable_but_keeps_outputs() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &[]);
    let out = dir.path().join("f").display().to_string();
    let result = phasemod(&["simulate", &file, "--engine", "fock", "--cutoff", "5", "--out", &out]);
    assert_eq!(result.status.code(), Some(3), "{}", stderr(&result));
    assert!(stderr(&result).contains("unreliable"));
    let obs = json(Path::new(&out).join("observables.json"));
    assert_eq!(obs["diagnostics"]["reliable"], false);
    assert!(Path::new(&out).join("simulate.manifest.json").exists());
}

#[test]
fn bichromatic_export_format() {
    let dir = TempDir::new().unwrap();
    let file = design(dir.path(), &[]);
    let out = dir.path().display().to_string();
    let result = phasemod(&["export-bichromatic", &file, "--spin-phase", "-0.5", "--out", &out]);
    assert!(result.status.success(), "{}", stderr(&result));
    let csv = fs::read_to_string(dir.path().join("bichromatic.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("duration_s,phase_blue_rad,phase_red_rad"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        for field in row.split(',') {
            let (mantissa, _) = field.split_once('e').expect("scientific notation");
            assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17, "{field}");
        }
    }
}

#[test]
fn manifest_lists_outputs_and_stable_input_digests() {
    let dir = TempDir::new().unwrap();
    design(dir.path(), &[]);
    let first = json(dir.path().join("design.manifest.json"));
    design(dir.path(), &[]);
    let second = json(dir.path().join("design.manifest.json"));

    assert_eq!(first["command"], "design");
    let outputs: Vec<&str> = first["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert!(outputs.iter().any(|p| p.ends_with("design.json")));
    assert!(outputs.iter().any(|p| p.ends_with("sequence.csv")));
    for o in first["outputs"].as_array().unwrap() {
        let bytes = fs::read(o["path"].as_str().unwrap()).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
        assert_eq!(o["sha256"], second["outputs"].as_array().unwrap().iter().find(|x| x["path"] == o["path"]).unwrap()["sha256"]);
        assert!(!bytes.is_empty());
    }
    assert_eq!(first["inputs"], second["inputs"]);
    assert!(first["wall_time_s"].as_f64().unwrap() >= 0.0);
}
