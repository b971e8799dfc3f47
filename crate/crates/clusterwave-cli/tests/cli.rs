use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clusterwave")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{:?} failed: {}", args, String::from_utf8_lossy(&out.stderr));
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_csv_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["sweep", "--config", s(&fixture("sweep_fl.json")), "--out", s(dir.path())]);
    let got = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let want = std::fs::read_to_string(fixture("sweep_fl.golden.csv")).unwrap();
    let (got_lines, want_lines): (Vec<_>, Vec<_>) = (got.lines().collect(), want.lines().collect());
    assert_eq!(got_lines[0], want_lines[0]);
    assert_eq!(got_lines.len(), want_lines.len());
    for (g, w) in got_lines[1..].iter().zip(&want_lines[1..]) {
        for (a, b) in g.split(',').zip(w.split(',')) {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-300), "{x} vs {y}"),
                _ => assert_eq!(a, b),
            }
        }
    }
    let summary = read_json(&dir.path().join("sweep.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["command"], "sweep");
}

#[test]
fn reruns_are_byte_identical() {
    let cache = tempfile::tempdir().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("sweep3d.json");
    run_ok(&["sweep", "--config", s(&cfg), "--out", s(a.path()), "--cache", s(cache.path()), "--jobs", "1"]);
    run_ok(&["sweep", "--config", s(&cfg), "--out", s(b.path()), "--cache", s(cache.path()), "--jobs", "3"]);
    for name in ["sweep.csv", "sweep.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn single_particle_amplitude_is_the_incident_term() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["solve", "--config", s(&config("single3d.json")), "--out", s(dir.path()), "--born", "2"]);
    let doc = read_json(&dir.path().join("solve.json"));
    let u = &doc["u"][0];
    let q = &doc["solution"]["direct"]["q"][0];
    for part in 0..2 {
        let (a, b) = (u[part].as_f64().unwrap(), q[part].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }
    for sum in doc["solution"]["born"]["partial_sums"].as_array().unwrap() {
        assert_eq!(&sum[0], u);
    }
}

#[test]
fn bubble_resonance_uses_the_sphere_constant() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["resonances", "--config", s(&config("bubble.json")), "--out", s(dir.path())]);
    let doc = read_json(&dir.path().join("resonances.json"));
    let m = &doc["minnaert"];
    // Radius 1/2 sphere: Theta = (2/3) r^2; with a1 = delta^-2 the wavenumber is (12 pi / r^2)^(1/4).
    let theta = m["theta_reference"].as_f64().unwrap();
    assert!((theta - 2.0 / 3.0 * 0.25).abs() <= 1e-3 * theta);
    let k = m["k"].as_f64().unwrap();
    let expected = (48.0 * std::f64::consts::PI).powf(0.25);
    assert!((k - expected).abs() <= 1e-3 * expected);
}

#[test]
fn spectrum_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["spectrum", "--config", s(&config("single3d.json")), "--out", s(dir.path())]);
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n,eigenvalue,physical_eigenvalue,moment,moment_sq,excitable");
    assert_eq!(csv.lines().count(), 1 + 216);
    run_ok(&["spectrum", "--config", s(&config("single3d.json")), "--out", s(dir.path()), "--format", "json"]);
    let doc = read_json(&dir.path().join("spectrum.json"));
    assert_eq!(doc["command"], "spectrum");
    let values = doc["eigenvalues"].as_array().unwrap();
    assert!(values.windows(2).all(|w| w[0].as_f64() >= w[1].as_f64()));
}

#[test]
fn fit_reads_two_column_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("points.csv");
    let body: String = [0.1f64, 0.05, 0.02, 0.01, 0.005].iter().map(|d| format!("{d},{}\n", 2.0 * d.powf(1.5))).collect();
    std::fs::write(&input, format!("delta,value\n{body}")).unwrap();
    run_ok(&["fit", "--input", s(&input), "--out", s(dir.path())]);
    let doc = read_json(&dir.path().join("fit.json"));
    assert!((doc["slope"].as_f64().unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn failures_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--config", s(&fixture("overlap.json")), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("particles overlap: j=1,2"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    let out = run(&["solve", "--config", s(&dir.path().join("missing.json")), "--out", s(dir.path())]);
    assert!(!out.status.success());

    let input = dir.path().join("short.csv");
    std::fs::write(&input, "delta,value\n0.1,1\n0.01,2\n").unwrap();
    let out = run(&["fit", "--input", s(&input), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(!dir.path().join("fit.json").exists());

    // Sweep grid narrower than half a decade.
    let text = std::fs::read_to_string(fixture("sweep_fl.json")).unwrap().replace("[0.1, 0.05, 0.02, 0.01]", "[0.1, 0.09, 0.08, 0.07]");
    let cfg = dir.path().join("narrow.json");
    std::fs::write(&cfg, text).unwrap();
    let out = run(&["sweep", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn example_configs_parse() {
    for name in ["triangle3d.json", "single3d.json", "sweep3d.json", "sweep2d.toml", "bubble.json", "plasmonic.json"] {
        let text = std::fs::read_to_string(config(name)).unwrap();
        clusterwave::config::parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
