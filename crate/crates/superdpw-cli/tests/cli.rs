use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superdpw"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Config in a temp dir writing its output there too.
fn temp_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, format!("output_dir = \"{}\"\n{body}", dir.join("out").display())).unwrap();
    p
}

const ZERO: &str = r#"
model = "so(n+1)-sphere"
dim = 2
[grid]
nx = 9
ny = 9
extent = 0.5
[potential]
kind = "zero"
"#;

#[test]
fn zero_potential_passes_with_vanishing_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(dir.path(), ZERO);
    let out = run(&["run", cfg.to_str().unwrap(), "--emit-fields"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&dir.path().join("out/report.json"));
    assert_eq!(rep["passed"], Value::Bool(true));
    for c in rep["checks"].as_array().unwrap() {
        // stencil weights of a constant field cancel only up to rounding
        assert!(c["value"].as_f64().unwrap() < 1e-12, "{c}");
    }
    for f in ["frame.json", "frame.csv", "target.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("out/target.csv")).unwrap();
    assert!(csv.starts_with("x,y,component_index,grassmann_index_set,re,im\n"));

    // identity frame verifies clean
    let out = run(&["verify", dir.path().join("out/frame.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn zero_tolerance_names_the_failing_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(dir.path(), &ZERO.replace("kind = \"zero\"", "kind = \"random-normalized\""));
    let out = run(&["run", cfg.to_str().unwrap(), "--tol", "superharmonic=0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("superharmonic"), "{err}");
    let rep = read_json(&dir.path().join("out/report.json"));
    assert!(rep["failed"].as_array().unwrap().iter().any(|v| v == "superharmonic"));
}

#[test]
fn bundled_sphere_example_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let pot = configs().join("s2_potential.toml");
    let text = std::fs::read_to_string(configs().join("s2.toml"))
        .unwrap()
        .replace("\"s2_potential.toml\"", &format!("\"{}\"", pot.display()))
        .replace("output_dir = \"out/s2\"\n", "");
    let cfg = temp_config(dir.path(), &text);
    let out = run(&["run", cfg.to_str().unwrap(), "--emit-fields"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = read_json(&dir.path().join("out/report.json"));
    let frame = dir.path().join("out/frame.json");

    let vpath = dir.path().join("verify.json");
    let out = run(&["verify", frame.to_str().unwrap(), "--report", vpath.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let ver = read_json(&vpath);
    let (a, b) = (rep["checks"].as_array().unwrap(), ver["checks"].as_array().unwrap());
    for c in b {
        let orig = a.iter().find(|x| x["name"] == c["name"]).unwrap();
        let d = (orig["value"].as_f64().unwrap() - c["value"].as_f64().unwrap()).abs();
        assert!(d <= 1e-12, "{}: {d:e}", c["name"]);
    }

    // corrupt one coefficient of U
    let mut f: Value = read_json(&frame);
    let cell = &mut f["nodes"][200]["unitary"][0]["matrix"][0][1][0]["re"];
    *cell = Value::from(cell.as_f64().unwrap() + 0.05);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, f.to_string()).unwrap();
    let out = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cp2_example_passes() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("cp2.toml")).unwrap().replace("output_dir = \"out/cp2\"\n", "");
    let cfg = temp_config(dir.path(), &text);
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = read_json(&dir.path().join("out/report.json"));
    assert_eq!(rep["frames"]["primitive"]["u2_body"].as_f64(), Some(0.0));
}

#[test]
fn reports_are_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(dir.path(), &ZERO.replace("kind = \"zero\"", "kind = \"random-normalized\"\ndegree = 1"));
    let c = cfg.to_str().unwrap();
    let report = |seed: &str, name: &str| {
        let p = dir.path().join(name);
        let out = run(&["run", c, "--seed", seed, "--report", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        std::fs::read(p).unwrap()
    };
    let a = report("3", "a.json");
    let b = report("3", "b.json");
    let other = report("4", "c.json");
    assert_eq!(a, b);
    assert_ne!(a, other);
}

#[test]
fn convergence_of_body_potential() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("s2_body.toml")).unwrap().replace("output_dir = \"out/s2_body\"\n", "");
    let cfg = temp_config(dir.path(), &text);
    let out = run(&["convergence", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = read_json(&dir.path().join("out/convergence.json"));
    let c = &rep["convergence"];
    assert!(c["truncation_drift"].as_f64().unwrap() <= 1e-8);
    assert!(c["observed_order"].as_f64().unwrap() >= 3.5);
}

#[test]
fn soul_constant_potential_is_exact_at_every_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
model = "so(n+1)-sphere"
truncation = 3
[convergence]
n = 7
extent = 0.5
margin = 2
[potential]
kind = "normalized"
[[potential.eta]]
entries = [
  { row = 1, col = 2, coeff = [{ indices = [1], re = 0.5, im = 0.0 }, { indices = [2], re = 0.0, im = 0.7 }] },
  { row = 2, col = 1, coeff = [{ indices = [1], re = -0.5, im = 0.0 }, { indices = [2], re = 0.0, im = -0.7 }] },
]
"#;
    let cfg = temp_config(dir.path(), body);
    let out = run(&["convergence", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = read_json(&dir.path().join("out/convergence.json"));
    // coefficients come from equispaced circle samples, exact up to rounding
    assert!(rep["convergence"]["truncation_drift"].as_f64().unwrap() < 1e-14);
    assert_eq!(rep["exact"], Value::Bool(true));
}

#[test]
fn malformed_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = temp_config(dir.path(), "model = \"so(n+1)-sphere\"\n[grid]\nnx = \"many\"\n");
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");

    let cfg = temp_config(dir.path(), ZERO);
    let out = run(&["run", cfg.to_str().unwrap(), "--tol", "nonsense=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));

    let out = run(&["verify", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
