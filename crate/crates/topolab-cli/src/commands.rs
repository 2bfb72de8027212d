//! One function per subcommand.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde_json::{json, Value};

use topolab::fem::{norm, Difference, Field, NormSpec, ProblemSpec};
use topolab::functionals::{
    adjoint, fd_oracle, topo_derivative_chain, topo_derivative_semilinear, topo_derivative_transmission_adjoint, FunctionalSpec,
    TopoDerivativeReport,
};
use topolab::geometry::{perturb_region, sign_of, InclusionSeed, OmegaShape, SeedKind};
use topolab::kernels::{
    c_beta, dipole_vector_xi, log_corrector_b, polarisation_matrix_ball, singular_part_rhs, transmission_k_ball, volume_potential_k,
    KernelCase, KernelContext,
};
use topolab::rates::{epsilon_sweep, SweepConfig};
use topolab::state_derivative::{
    control_derivative_superposition, rescaled_corrector, rhs_linear_u0_splitting, semilinear_u0_measure, semilinear_u0_splitting,
    transmission_u0, Baseline, SplitField,
};

use crate::config::RunConfig;
use crate::output::{split_field_csv, table_csv, Output};
use crate::CliError;

/// What a command reports back to the examples runner.
pub type Summary = BTreeMap<String, Value>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn solve(cfg: &RunConfig, out: &mut Output, coarse: bool) -> Result<Summary, CliError> {
    let spec = cfg.problem()?;
    let region = cfg.region()?;
    let disc = cfg.discretization(coarse)?;
    let u = disc.solve(&spec, &region)?;
    out.write("field.csv", &u.to_csv())?;
    let summary: Summary = [
        ("n_vertices".to_string(), json!(u.values().len())),
        ("max_abs".into(), json!(u.max_abs())),
        ("l2_norm".into(), json!(u.norm_lp(2.0))),
        ("h".into(), json!(disc.mesh.h())),
    ]
    .into();
    out.write_json("solve.json", &json!({ "config_hash": cfg.hash(), "problem": spec, "result": summary }))?;
    Ok(summary)
}

pub fn mesh_info(cfg: &RunConfig, out: &mut Output, coarse: bool) -> Result<Summary, CliError> {
    let disc = cfg.discretization(coarse)?;
    let m = &disc.mesh;
    let (mut min_angle, mut max_angle) = (f64::INFINITY, 0.0f64);
    for t in 0..m.n_triangles() {
        let c = m.corners(t);
        for k in 0..3 {
            let (a, b, o) = (c[(k + 1) % 3], c[(k + 2) % 3], c[k]);
            let u = [a[0] - o[0], a[1] - o[1]];
            let v = [b[0] - o[0], b[1] - o[1]];
            let ang = (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]).to_degrees();
            min_angle = min_angle.min(ang);
            max_angle = max_angle.max(ang);
        }
    }
    let summary: Summary = [
        ("holdall".to_string(), json!(cfg.region.holdall)),
        ("n_vertices".into(), json!(m.n_vertices())),
        ("n_triangles".into(), json!(m.n_triangles())),
        ("n_boundary_vertices".into(), json!(m.boundary().iter().filter(|b| **b).count())),
        ("h".into(), json!(m.h())),
        ("area".into(), json!(m.total_area())),
        ("min_angle_deg".into(), json!(min_angle)),
        ("max_angle_deg".into(), json!(max_angle)),
    ]
    .into();
    let mut text = Vec::new();
    m.write_text(&mut text)?;
    out.write("mesh.txt", &String::from_utf8(text).expect("mesh text is ASCII"))?;
    out.write_json("mesh.json", &json!({ "config_hash": cfg.hash(), "mesh": summary }))?;
    Ok(summary)
}

/// Relative L¹ distance `‖a − b‖ / max(‖a‖, ‖b‖)`.
fn relative_l1(a: &SplitField, b: &SplitField) -> f64 {
    let l1 = NormSpec::lp(1.0);
    let m = a.mesh();
    let d = norm(m, &Difference(a, b), &l1);
    let s = norm(m, a, &l1).max(norm(m, b, &l1));
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

fn omega_of(seed: &InclusionSeed) -> OmegaShape {
    match seed.kind {
        SeedKind::Scaled { omega, .. } => omega,
        _ => OmegaShape::Ball,
    }
}

/// Closed-form constants of the expansion at the seed centre.
fn kernel_block(base: &Baseline, seed: &InclusionSeed, sign: f64) -> Result<Value, CliError> {
    let omega = omega_of(seed);
    Ok(match base.spec {
        ProblemSpec::Transmission { beta_in, beta_out, .. } => {
            let ctx = KernelContext::new(2, KernelCase::Transmission { beta_in, beta_out }, sign, omega)?;
            let g = base.u0.recover_gradient(seed.center(), Some(&base.region))?;
            json!({
                "c_beta": c_beta(&ctx)?,
                "polarisation_matrix": polarisation_matrix_ball(&ctx)?,
                "xi": dipole_vector_xi(&ctx, &g)?,
                "background_gradient": g,
            })
        }
        ProblemSpec::Poisson { f_in, f_out } if !matches!(seed.kind, SeedKind::Circle { .. }) => {
            let ctx = KernelContext::new(2, KernelCase::RhsPerturbation { f_in, f_out }, sign, omega)?;
            json!({ "log_corrector_b": log_corrector_b(&ctx)? })
        }
        _ => json!({}),
    })
}

pub fn state_derivative(cfg: &RunConfig, out: &mut Output, coarse: bool) -> Result<Summary, CliError> {
    let sd = cfg.state_derivative.as_ref().ok_or_else(|| invalid("missing [state_derivative]"))?;
    if sd.routes.is_empty() {
        return Err(invalid("state_derivative.routes must not be empty"));
    }
    let spec = cfg.problem()?;
    let region = cfg.region()?;
    let seed = cfg.seed(&region)?;
    let base = Baseline::new(cfg.discretization(coarse)?, spec, region.clone())?;
    let sign = sign_of(&region, &seed)?;

    let mut fields: BTreeMap<String, SplitField> = BTreeMap::new();
    for route in &sd.routes {
        let f = match route.as_str() {
            "quotient" => {
                let eps = sd.eps.ok_or_else(|| invalid("state_derivative.eps is required for the quotient route"))?;
                SplitField::nodal(base.quotient(&seed, eps, sd.admissibility)?)
            }
            "measure" => semilinear_u0_measure(&base, &seed)?.field,
            "splitting" => match spec {
                ProblemSpec::Poisson { .. } => rhs_linear_u0_splitting(&base, &seed)?.field,
                ProblemSpec::Semilinear { .. } => semilinear_u0_splitting(&base, &seed)?.field,
                ProblemSpec::Transmission { .. } => transmission_u0(&base, &seed)?.field,
            },
            r => return Err(invalid(format!("state_derivative.routes: unknown route {r:?}"))),
        };
        out.write(&format!("u0_{route}.csv"), &split_field_csv(&f))?;
        fields.insert(route.clone(), f);
    }

    let l1 = NormSpec::lp(1.0);
    let mut routes = serde_json::Map::new();
    for (name, f) in &fields {
        routes.insert(
            name.clone(),
            json!({
                "file": format!("u0_{name}.csv"),
                "l1_norm": norm(f.mesh(), f, &l1),
                "max_abs_regular": f.regular.max_abs(),
                "singular": f.singular,
            }),
        );
    }
    let names: Vec<&String> = fields.keys().collect();
    let mut pairwise = BTreeMap::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            pairwise.insert(format!("{a}/{b}"), relative_l1(&fields[*a], &fields[*b]));
        }
    }
    let worst = pairwise.values().cloned().fold(0.0, f64::max);
    let pass = sd.threshold.map(|t| worst < t);

    let mut report = json!({
        "config_hash": cfg.hash(),
        "problem": spec,
        "seed": seed.kind,
        "sign": sign,
        "routes": routes,
        "pairwise_relative_l1": pairwise,
        "threshold": sd.threshold,
        "pass": pass,
        "kernel": kernel_block(&base, &seed, sign)?,
    });

    if sd.superposition {
        let h = Field::from_fn(base.mesh().clone(), |p| (PI * p[0]).sin() * (PI * p[1]).sin());
        let s = control_derivative_superposition(&base, &h)?;
        let d = s.direct.sub(&s.superposed).norm_lp(2.0);
        let rel = if d == 0.0 { 0.0 } else { d / s.direct.norm_lp(2.0) };
        report["superposition"] = json!({ "relative_l2_difference": rel });
    }
    if let Some(c) = &sd.corrector {
        let eps = sd.eps.ok_or_else(|| invalid("state_derivative.eps is required for the corrector"))?;
        let perturbed = perturb_region(&region, &seed, eps, sd.admissibility)?;
        let ue = base.disc.solve(&spec, &perturbed)?;
        let k = rescaled_corrector(&ue, &base.u0, eps, seed.center(), c.exponent, &c.points);
        let rows: Vec<Vec<f64>> =
            c.points.iter().zip(&k).filter_map(|(z, v)| v.map(|v| vec![z[0], z[1], v])).collect();
        out.write("corrector.csv", &table_csv("z1,z2,value", &rows))?;
        report["corrector"] = json!({ "eps": eps, "exponent": c.exponent, "points_off_mesh": k.iter().filter(|v| v.is_none()).count() });
    }
    out.write_json("comparison.json", &report)?;

    let mut summary = Summary::new();
    summary.insert("max_pairwise_relative_l1".into(), json!(worst));
    if let Some(p) = pass {
        summary.insert("pass".into(), json!(p));
    }
    if let Some(k) = report["kernel"].get("c_beta") {
        summary.insert("c_beta".into(), k.clone());
    }
    Ok(summary)
}

pub fn rate_study(cfg: &RunConfig, out: &mut Output, coarse: bool) -> Result<Summary, CliError> {
    let rs = cfg.rate_study.as_ref().ok_or_else(|| invalid("missing [rate_study]"))?;
    let region = cfg.region()?;
    let sweep = SweepConfig {
        case_id: cfg.name.clone().unwrap_or_else(|| "rate-study".into()),
        spec: cfg.problem()?,
        seed: cfg.seed(&region)?,
        region,
        eps: rs.eps.clone(),
        norm: cfg.norm()?,
        puncture: rs.puncture,
        tolerance: rs.tolerance,
        admissibility: rs.admissibility,
    };
    let report = epsilon_sweep(&sweep, &cfg.discretization(coarse)?)?;
    out.write("rate.csv", &report.to_csv())?;
    let mut v = serde_json::to_value(&report)?;
    v["config_hash"] = json!(cfg.hash());
    out.write_json("rate.json", &v)?;
    let mut summary = Summary::new();
    summary.insert("slope".into(), json!(report.slope));
    summary.insert("exponent".into(), json!(report.exponent));
    summary.insert("pass".into(), json!(report.pass));
    if let Some(d) = &report.degenerate {
        summary.insert("degenerate".into(), json!(d));
    }
    Ok(summary)
}

pub fn topo_derivative(cfg: &RunConfig, out: &mut Output, coarse: bool) -> Result<Summary, CliError> {
    let td = cfg.topo_derivative.as_ref().ok_or_else(|| invalid("missing [topo_derivative]"))?;
    if td.routes.is_empty() {
        return Err(invalid("topo_derivative.routes must not be empty"));
    }
    let spec = cfg.problem()?;
    let region = cfg.region()?;
    let seed = cfg.seed(&region)?;
    let base = Baseline::new(cfg.discretization(coarse)?, spec, region)?;
    let (kind, u_ref) = cfg.functional_kind()?;
    let u_ref = (u_ref != 0.0).then(|| Field::from_fn(base.mesh().clone(), |_| u_ref));
    let j = FunctionalSpec::new(kind, u_ref)?;

    let mut report = TopoDerivativeReport {
        config_hash: Some(cfg.hash()),
        problem: match spec {
            ProblemSpec::Poisson { .. } => "poisson",
            ProblemSpec::Semilinear { .. } => "semilinear",
            ProblemSpec::Transmission { .. } => "transmission",
        }
        .into(),
        functional: j.name().into(),
        seed: Some(seed.kind),
        ..Default::default()
    };
    let transmission = matches!(spec, ProblemSpec::Transmission { .. });
    for route in &td.routes {
        match route.as_str() {
            "adjoint" => {
                let p = adjoint(&base, &j)?;
                let v = if transmission {
                    topo_derivative_transmission_adjoint(&base, &seed, &j, &p)?
                } else {
                    topo_derivative_semilinear(&base, &seed, &p)?
                };
                report.insert("adjoint", v);
            }
            "chain" => {
                let u0 = if transmission { transmission_u0(&base, &seed)? } else { semilinear_u0_measure(&base, &seed)? };
                report.insert("chain", topo_derivative_chain(&j, &spec, &base.u0, &u0.field)?);
            }
            "fd" => {
                let eps = td.fd_eps.as_ref().ok_or_else(|| invalid("topo_derivative.fd_eps is required for the fd route"))?;
                let fd = fd_oracle(&base, &seed, &j, eps, td.admissibility, td.fd_order)?;
                let rows: Vec<Vec<f64>> = fd.table.iter().map(|&(e, q)| vec![e, q]).collect();
                out.write("fd.csv", &table_csv("eps,quotient", &rows))?;
                report.table = fd.table;
                report.insert("fd", fd.extrapolated);
            }
            r => return Err(invalid(format!("topo_derivative.routes: unknown route {r:?}"))),
        }
    }
    let worst = report.pairwise_rel_diff.values().cloned().fold(0.0, f64::max);
    let pass = td.threshold.map(|t| worst < t);
    let mut v = serde_json::to_value(&report)?;
    v["threshold"] = json!(td.threshold);
    v["pass"] = json!(pass);
    out.write_json("topo.json", &v)?;
    let mut summary: Summary = report.routes.iter().map(|(k, v)| (format!("dj_{k}"), json!(v))).collect();
    summary.insert("max_pairwise_relative_difference".into(), json!(worst));
    if let Some(p) = pass {
        summary.insert("pass".into(), json!(p));
    }
    Ok(summary)
}

/// K, R and K − R along the first axis; the ball corrector for transmission.
pub fn kernel_table(cfg: &RunConfig, out: &mut Output, _coarse: bool) -> Result<Summary, CliError> {
    let kt = cfg.kernel_table.as_ref().ok_or_else(|| invalid("missing [kernel_table]"))?;
    let spec = cfg.problem()?;
    let point = |r: f64| {
        let mut x = vec![0.0; kt.dim];
        if let Some(first) = x.first_mut() {
            *first = r;
        }
        x
    };
    let mut summary = Summary::new();
    let (header, rows) = match spec {
        ProblemSpec::Poisson { f_in, f_out } => {
            let ctx = KernelContext::new(kt.dim, KernelCase::RhsPerturbation { f_in, f_out }, 1.0, kt.omega)?;
            summary.insert("omega_measure".into(), json!(ctx.omega_measure()));
            if kt.dim == 2 {
                summary.insert("log_corrector_b".into(), json!(log_corrector_b(&ctx)?));
            }
            let rows = kt
                .radii
                .iter()
                .map(|&r| {
                    let x = point(r);
                    let k = volume_potential_k(&ctx, &x)?;
                    let s = singular_part_rhs(&ctx, &x)? * ctx.omega_measure();
                    Ok(vec![r, k, s, k - s])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            ("r,k,r_singular,k_minus_r", rows)
        }
        ProblemSpec::Transmission { beta_in, beta_out, .. } => {
            let ctx = KernelContext::new(kt.dim, KernelCase::Transmission { beta_in, beta_out }, 1.0, kt.omega)?;
            summary.insert("c_beta".into(), json!(c_beta(&ctx)?));
            let g = point(1.0);
            let rows = kt
                .radii
                .iter()
                .map(|&r| {
                    let (k, dk) = transmission_k_ball(&ctx, &point(r), &g)?;
                    Ok(vec![r, k, dk[0]])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            ("r,k,dk_dx1", rows)
        }
        ProblemSpec::Semilinear { .. } => return Err(topolab::Error::UnsupportedCase("kernel tables for the semilinear class".into()).into()),
    };
    out.write("kernel.csv", &table_csv(header, &rows))?;
    out.write_json("kernel.json", &json!({ "config_hash": cfg.hash(), "dim": kt.dim, "omega": kt.omega, "constants": summary }))?;
    Ok(summary)
}
