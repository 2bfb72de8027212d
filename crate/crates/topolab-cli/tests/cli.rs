use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topolab"))
}

fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn run(cmd: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    bin().arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).args(extra).output().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const POISSON: &str = r#"
[problem]
kind = "poisson"
f_in = 1.0
f_out = 0.0

[region]
holdall = "square"
omega_shapes = [{ kind = "disk", center = [0.3, 0.4], radius = 0.15 }]

[mesh]
n = 8
"#;

#[test]
fn minimal_solve_writes_one_row_per_vertex() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("solve", POISSON, tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/field.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,value"));
    // crisscross: (n+1)² corners plus n² centres
    assert_eq!(lines.count(), 81 + 64);
    let manifest = json(tmp.path().join("out/manifest.json"));
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(files, ["field.csv", "solve.json"]);
    assert!(manifest.get("started").is_some());
}

#[test]
fn nonpositive_conductivity_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = POISSON.replace("kind = \"poisson\"\nf_in = 1.0\nf_out = 0.0", "kind = \"transmission\"\nbeta_in = -1.0\nbeta_out = 1.0\nf = 1.0");
    let out = run("solve", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[InvalidConfig]") && err.contains("beta_in"), "{err}");
}

#[test]
fn syntax_errors_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("solve", &POISSON.replace("n = 8", "n = eight"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 12"));
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let digests = |name: &str| {
        let dir = tmp.path().join(name);
        fs::create_dir_all(&dir).unwrap();
        let out = run("solve", POISSON, &dir, &["--deterministic"]);
        assert!(out.status.success());
        fs::read(dir.join("out/manifest.json")).unwrap()
    };
    let a = digests("a");
    assert_eq!(a, digests("b"));
    assert!(!String::from_utf8(a).unwrap().contains("started"));
}

#[test]
fn region_independent_semilinear_data_give_zero_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(examples_dir().join("trivial-cancellation/config.toml")).unwrap();
    let out = run("state-derivative", &cfg, tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(tmp.path().join("out/comparison.json"));
    for route in ["quotient", "measure", "splitting"] {
        assert_eq!(report["routes"][route]["l1_norm"], 0.0);
        let csv = fs::read_to_string(tmp.path().join(format!("out/u0_{route}.csv"))).unwrap();
        for line in csv.lines().skip(1) {
            let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(v, 0.0);
        }
    }
}

#[test]
fn transmission_report_contains_dipole_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(examples_dir().join("transmission-dipole/config.toml"))
        .unwrap()
        .replace("n = 128", "n = 32")
        .replace("routes = [\"quotient\", \"splitting\"]", "routes = [\"splitting\"]");
    let out = run("state-derivative", &cfg, tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let k = &json(tmp.path().join("out/comparison.json"))["kernel"];
    assert!((k["c_beta"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-15);
    // ξ = sgn(β_out − β_in)/β_bg · π (1 + C_β) ∇u = −(2π/3) ∇u
    let g = k["background_gradient"].as_array().unwrap();
    let xi = k["xi"].as_array().unwrap();
    for i in 0..2 {
        let expect = -2.0 * std::f64::consts::PI / 3.0 * g[i].as_f64().unwrap();
        assert!((xi[i].as_f64().unwrap() - expect).abs() < 1e-12);
    }
}

#[test]
fn transmission_energy_adjoint_is_inadmissible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(examples_dir().join("energy-evaluation/config.toml"))
        .unwrap()
        .replace("n = 128", "n = 16")
        .replace("routes = [\"fd\"]", "routes = [\"adjoint\"]");
    let out = run("topo-derivative", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[InadmissibleRoute]"));
}

#[test]
fn rate_study_edge_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(examples_dir().join("rhs-lp-rate/config.toml")).unwrap();
    // p = 2 lies outside the range of the L^p estimate
    let out = run("rate-study", &base.replace("p = 4.0", "p = 2.0"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[UnsupportedCase]"));
    let flat = base.replace("f_in = 1.0", "f_in = 0.0");
    let out = run("rate-study", &flat.replace("n = 160", "n = 80"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2), "mesh check precedes the zero-signal shortcut");
    let out = run("rate-study", &flat, tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(tmp.path().join("out/rate.json"));
    assert_eq!(r["degenerate"], "zero signal");
    assert!(r["slope"].is_null());
}

#[test]
fn mismatched_command_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(examples_dir().join("mesh-info/config.toml")).unwrap();
    let out = run("solve", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn examples_run_at_smoke_resolution() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run-examples", "--smoke", "--deterministic", "--dir"])
        .arg(examples_dir())
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}\n{}", String::from_utf8_lossy(&out.stderr));
    let rate = json(tmp.path().join("rhs-lp-rate/rate.json"));
    assert!(rate["slope"].is_number());
    let k = json(tmp.path().join("kernel-transmission/kernel.json"));
    assert!((k["constants"]["c_beta"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-15);
    let green = json(tmp.path().join("disk-green/comparison.json"));
    assert_eq!(green["pass"], true);
}

#[test]
fn coverage_manifest_is_complete() {
    let dir = examples_dir();
    let manifest: toml::Table = fs::read_to_string(dir.join("coverage.toml")).unwrap().parse().unwrap();
    let topics = manifest["topics"].as_table().unwrap();
    let required = [
        "dilatation_and_topological_derivative",
        "topological_state_derivative",
        "rescaled_corrector",
        "three_dimensional_splitting",
        "limit_measures",
        "sign_rule",
        "semilinear_state_equation",
        "measure_data_solutions",
        "well_posedness_contracts",
        "semilinear_state_derivative",
        "green_superposition",
        "rhs_kernels",
        "log_corrector",
        "rhs_rates",
        "ball_improvement",
        "semilinear_splitting",
        "transmission_problem",
        "very_weak_transmission",
        "transmission_state_derivative",
        "polarisation_ball",
        "transmission_corrector",
        "transmission_rate",
        "semilinear_adjoint",
        "tracking_functionals",
        "transmission_adjoint",
    ];
    let mut referenced = BTreeSet::new();
    for t in required {
        let list = topics.get(t).and_then(|v| v.as_array()).unwrap_or_else(|| panic!("topic {t} missing"));
        assert!(!list.is_empty(), "{t}");
    }
    for (t, list) in topics {
        for e in list.as_array().unwrap() {
            let e = e.as_str().unwrap();
            assert!(dir.join(e).join("config.toml").is_file(), "{t}: {e} has no config");
            assert!(dir.join(e).join("README.md").is_file(), "{t}: {e} has no README");
            referenced.insert(e.to_string());
        }
    }
    for entry in fs::read_dir(&dir).unwrap() {
        let entry = entry.unwrap();
        if entry.path().is_dir() {
            let name = entry.file_name().to_string_lossy().into_owned();
            assert!(referenced.contains(&name), "{name} is not listed in coverage.toml");
        }
    }
}
