//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Rate and derivative criteria run the documented example configs through
//! the command-line binary and read its JSON; the remaining ones call the
//! library directly.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde_json::Value;

use topolab::fem::{norm, Difference, Discretization, Field, FieldLike, Nonlinearity, NormSpec, ProblemSpec};
use topolab::functionals::{adjoint, fd_oracle, topo_derivative_chain, topo_derivative_semilinear, topo_derivative_transmission_adjoint, FunctionalKind, FunctionalSpec};
use topolab::geometry::{dilation_average, limit_measure, Admissibility, InclusionSeed, OmegaShape, Region, SeedKind, Shape, DEFAULT_ARC_NODES};
use topolab::mesh::{HoldAll, Mesh};
use topolab::rates::DEFAULT_EPS;
use topolab::state_derivative::{
    control_derivative_superposition, green_column, semilinear_u0_measure, semilinear_u0_splitting,
    transmission_u0, Baseline, SplitField,
};
use topolab::Point;

const A1_MAX_REL_L1: f64 = 0.05;
const A1_MIN_RATIO: f64 = 1.5;
const SLOPE_TOL: f64 = 0.15;
const A5_MIN_SLOPE: f64 = 0.8;
const A6_MAX_FD_REL: f64 = 0.05;
const A6_MAX_CHAIN_REL: f64 = 0.01;
const A7_MAX_FD_REL: f64 = 0.10;
const A8_MAX_REL_L2: f64 = 1e-8;
const A9_MAX_ABS: f64 = 1e-10;
const A10_MAX_RATIO: f64 = 0.7;

type Outcome = Result<String, String>;

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn cli(command: &str, example: &str, out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_topolab"))
        .arg(command)
        .arg("--config")
        .arg(examples().join(example).join("config.toml"))
        .arg("--out")
        .arg(out)
        .arg("--deterministic")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&o.stderr).trim().to_string())
    }
}

fn read_json(path: PathBuf) -> Result<Value, String> {
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// G(x, y) = −(ln|x − y| − ln(|y| |x − y*|))/(2π) on the unit disk.
struct Images {
    y: Point,
}

impl FieldLike for Images {
    fn value(&self, _: usize, _: [f64; 3], x: Point) -> f64 {
        let y = self.y;
        let r2 = y[0] * y[0] + y[1] * y[1];
        let ys = [y[0] / r2, y[1] / r2];
        let d = (x[0] - y[0]).hypot(x[1] - y[1]);
        let ds = (x[0] - ys[0]).hypot(x[1] - ys[1]);
        -(d.ln() - (r2.sqrt() * ds).ln()) / (2.0 * PI)
    }

    fn gradient(&self, _: usize, _: Point) -> Point {
        [0.0; 2]
    }

    fn singularity(&self) -> Option<Point> {
        Some(self.y)
    }
}

fn a1() -> Outcome {
    let y = [0.3, 0.0];
    let region = Region::new(HoldAll::UnitDisk, vec![Shape::Disk { center: [-0.3, 0.2], radius: 0.2 }]).map_err(err)?;
    let mut errors = vec![];
    for rings in [32, 64] {
        let disc = Discretization::new(Mesh::unit_disk(rings));
        let lin = disc.linearize(&ProblemSpec::Poisson { f_in: 1.0, f_out: 0.0 }, &region, None).map_err(err)?;
        let g = green_column(&lin, y).map_err(err)?;
        let exact = Images { y };
        let m = &disc.mesh;
        errors.push(norm(m, &Difference(&g, &exact), &NormSpec::lp(1.0)) / norm(m, &exact, &NormSpec::lp(1.0)));
    }
    let ratio = errors[0] / errors[1];
    let msg = format!("rel L1 error {:.3e} at 64 rings (< {A1_MAX_REL_L1}), ratio 32->64 {ratio:.2} (>= {A1_MIN_RATIO})", errors[1]);
    if errors[1] < A1_MAX_REL_L1 && ratio >= A1_MIN_RATIO {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rate(example: &str, out: &Path, check: impl Fn(f64, f64) -> bool, bound: &str) -> Outcome {
    cli("rate-study", example, out)?;
    let r = read_json(out.join("rate.json"))?;
    let slope = r["slope"].as_f64().ok_or("no slope in report")?;
    let exponent = r["exponent"].as_f64().ok_or("no exponent in report")?;
    let errors: Vec<String> = r["errors"].as_array().ok_or("no errors")?.iter().map(|e| format!("{:.3e}", e.as_f64().unwrap_or(f64::NAN))).collect();
    let msg = format!("{example}: slope {slope:.4} ({bound}, theory {exponent:.4}), errors [{}]", errors.join(", "));
    if check(slope, exponent) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn window(slope: f64, exponent: f64) -> bool {
    (slope - exponent).abs() <= SLOPE_TOL
}

fn topo(example: &str, out: &Path) -> Result<(f64, f64, f64), String> {
    cli("topo-derivative", example, out)?;
    let r = read_json(out.join("topo.json"))?;
    let get = |k: &str| r["routes"][k].as_f64().ok_or(format!("route {k} missing"));
    Ok((get("adjoint")?, get("chain")?, get("fd")?))
}

fn a6(out: &Path) -> Outcome {
    let (adj, chain, fd) = topo("semilinear-adjoint", out)?;
    let (e_fd, e_chain) = (rel(adj, fd), rel(chain, adj));
    let msg = format!(
        "adjoint {adj:.6e}, fd {fd:.6e}: rel {e_fd:.2e} (< {A6_MAX_FD_REL}); chain {chain:.6e}: rel {e_chain:.2e} (< {A6_MAX_CHAIN_REL})"
    );
    if e_fd < A6_MAX_FD_REL && e_chain < A6_MAX_CHAIN_REL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a7(out: &Path) -> Outcome {
    let (adj, _, fd) = topo("transmission-adjoint", out)?;
    let e = rel(adj, fd);
    let msg = format!("formula {adj:.6e}, fd {fd:.6e}: rel {e:.2e} (< {A7_MAX_FD_REL})");
    if e < A7_MAX_FD_REL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn semilinear_spec() -> ProblemSpec {
    ProblemSpec::Semilinear { g_in: Nonlinearity::Arctan, g_out: Nonlinearity::Tanh { scale: 0.5 }, f_in: 1.0, f_out: 0.0 }
}

fn a8() -> Outcome {
    let mut worst: f64 = 0.0;
    for (spec, n) in [(semilinear_spec(), 12), (ProblemSpec::Semilinear { g_in: Nonlinearity::Logistic, g_out: Nonlinearity::Arctan, f_in: 0.5, f_out: 2.0 }, 10)] {
        let region = Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.5, 0.5], radius: 0.25 }]).map_err(err)?;
        let base = Baseline::new(Discretization::new(Mesh::unit_square(n)), spec, region).map_err(err)?;
        let h = Field::from_fn(base.mesh().clone(), |p| (PI * p[0]).sin() * (PI * p[1]).sin() + p[0]);
        let s = control_derivative_superposition(&base, &h).map_err(err)?;
        worst = worst.max(s.direct.sub(&s.superposed).norm_lp(2.0) / s.direct.norm_lp(2.0));
    }
    let msg = format!("relative L2 difference {worst:.2e} (< {A8_MAX_REL_L2:e})");
    if worst < A8_MAX_REL_L2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn split_max(f: &SplitField, probe: Point) -> f64 {
    f.regular.max_abs().max(f.singular.value(probe).abs())
}

fn a9() -> Outcome {
    let region = Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.3, 0.4], radius: 0.15 }]).map_err(err)?;
    let disc = Discretization::new(Mesh::unit_square(80));
    let probe = [0.7, 0.6];
    let mut worst: f64 = 0.0;
    let mut track = |v: f64| worst = worst.max(v.abs());

    let seed = InclusionSeed::new(SeedKind::Scaled { center: [0.7, 0.7], omega: OmegaShape::Ball }, &region).map_err(err)?;
    let flat_beta = ProblemSpec::Transmission { beta_in: 1.5, beta_out: 1.5, f: 1.0 };
    let base = Baseline::new(disc.clone(), flat_beta, region.clone()).map_err(err)?;
    let j = FunctionalSpec::new(FunctionalKind::L2Tracking, None).map_err(err)?;
    track(base.quotient(&seed, 0.1, Admissibility::Strict).map_err(err)?.max_abs());
    let u0 = transmission_u0(&base, &seed).map_err(err)?;
    track(split_max(&u0.field, probe));
    let p = adjoint(&base, &j).map_err(err)?;
    track(topo_derivative_transmission_adjoint(&base, &seed, &j, &p).map_err(err)?);
    track(topo_derivative_chain(&j, &flat_beta, &base.u0, &u0.field).map_err(err)?);
    track(fd_oracle(&base, &seed, &j, &[0.14, 0.1], Admissibility::Strict, 2).map_err(err)?.extrapolated);

    let flat = ProblemSpec::Semilinear { g_in: Nonlinearity::Arctan, g_out: Nonlinearity::Arctan, f_in: 1.0, f_out: 1.0 };
    let seed = InclusionSeed::new(SeedKind::Point { center: [0.7, 0.7] }, &region).map_err(err)?;
    let base = Baseline::new(disc, flat, region).map_err(err)?;
    track(base.quotient(&seed, 0.1, Admissibility::Strict).map_err(err)?.max_abs());
    let m = semilinear_u0_measure(&base, &seed).map_err(err)?;
    track(split_max(&m.field, probe));
    track(split_max(&semilinear_u0_splitting(&base, &seed).map_err(err)?.field, probe));
    let p = adjoint(&base, &j).map_err(err)?;
    track(topo_derivative_semilinear(&base, &seed, &p).map_err(err)?);
    track(topo_derivative_chain(&j, &flat, &base.u0, &m.field).map_err(err)?);
    track(fd_oracle(&base, &seed, &j, &[0.14, 0.1], Admissibility::Strict, 2).map_err(err)?.extrapolated);

    let msg = format!("largest |U_eps|, |U_0|, |DJ| over 11 quantities: {worst:.1e} (< {A9_MAX_ABS:e})");
    if worst < A9_MAX_ABS {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a10() -> Outcome {
    let phi = |x: Point| (1.3 * x[0]).exp() * (2.0 * x[1]).sin() + x[0] * x[0] * x[1];
    let region = Region::empty(HoldAll::UnitSquare);
    let mut worst: f64 = 0.0;
    let mut lines = vec![];
    for kind in [SeedKind::Point { center: [0.5, 0.5] }, SeedKind::Circle { center: [0.5, 0.5], radius: 0.25 }] {
        let seed = InclusionSeed::new(kind, &region).map_err(err)?;
        let target = limit_measure(&seed, DEFAULT_ARC_NODES).map_err(err)?.pair(phi);
        let e: Vec<f64> = DEFAULT_EPS
            .iter()
            .map(|&eps| dilation_average(&seed, eps, phi).map(|a| (a - target).abs()))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let ratios: Vec<f64> = e.windows(2).map(|w| w[1] / w[0]).collect();
        worst = ratios.iter().cloned().fold(worst, f64::max);
        let name = if matches!(kind, SeedKind::Point { .. }) { "point" } else { "circle" };
        lines.push(format!("{name} ratios [{}]", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")));
    }
    let msg = format!("{}; max {worst:.3} (<= {A10_MAX_RATIO})", lines.join("; "));
    if worst <= A10_MAX_RATIO {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Reruns a finished acceptance config and compares every produced file.
fn a11(runs: &[(&str, &str, PathBuf)], scratch: &Path) -> Outcome {
    let mut compared = 0;
    for (command, example, first) in runs {
        let second = scratch.join(format!("{example}-rerun"));
        cli(command, example, &second)?;
        let mut names: Vec<String> = fs::read_dir(first)
            .map_err(err)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in &names {
            let a = fs::read(first.join(name)).map_err(err)?;
            let b = fs::read(second.join(name)).map_err(|e| format!("{name}: {e}"))?;
            if a != b {
                return Err(format!("{example}/{name} differs between runs"));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across reruns"))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let s = scratch.path();
    let mut results: Vec<(&str, &str, Outcome, f64)> = vec![];
    let mut record = |id: &'static str, what: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, msg) = match &r {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("{id} {tag} [{what}] {msg} ({secs:.1}s)");
        results.push((id, what, r, secs));
    };

    record("A1", "disk Green function", &mut a1);
    record("A2", "L^p rate, rhs case", &mut || rate("rhs-lp-rate", &s.join("rhs-lp-rate"), window, "window 0.5 +- 0.15"));
    record("A3", "W^{1,p} rate, rhs case", &mut || rate("rhs-w1p-rate", &s.join("rhs-w1p-rate"), window, "window 1/3 +- 0.15"));
    record("A4", "transmission L^q rate", &mut || rate("transmission-rate", &s.join("transmission-rate"), window, "window 1/3 +- 0.15"));
    record("A5", "ball improvement", &mut || {
        rate("ball-improvement", &s.join("ball-improvement"), |slope, _| slope >= A5_MIN_SLOPE, "needs >= 0.8")
    });
    record("A6", "semilinear adjoint vs FD", &mut || a6(&s.join("semilinear-adjoint")));
    record("A7", "transmission adjoint formula vs FD", &mut || a7(&s.join("transmission-adjoint")));
    record("A8", "Green superposition", &mut a8);
    record("A9", "trivial cancellations", &mut a9);
    record("A10", "measure probes", &mut a10);
    let reruns = [
        ("rate-study", "rhs-lp-rate", s.join("rhs-lp-rate")),
        ("topo-derivative", "semilinear-adjoint", s.join("semilinear-adjoint")),
        ("topo-derivative", "transmission-adjoint", s.join("transmission-adjoint")),
    ];
    record("A11", "determinism", &mut || a11(&reruns, s));

    let failed: Vec<&str> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
