//! Shape functionals, adjoint states and the topological derivative by
//! chain rule, adjoint formula and finite differences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fem::assemble::stiffness;
use crate::fem::{visit_points, Field, FieldLike, ProblemSpec};
use crate::geometry::{limit_measure, perturb_region, sign_of, Admissibility, InclusionSeed, OmegaShape, SeedKind, DEFAULT_ARC_NODES};
use crate::kernels::{c_beta, KernelCase, KernelContext};
use crate::mesh::{CutQuadrature, Mesh, QuadratureRule};
use crate::state_derivative::{measure_strength, Baseline};
use crate::{Error, Point, Result};

/// The integrand of a shape functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalKind {
    /// `∫ (u − u_ref)²`.
    L2Tracking,
    /// `∫ |u − u_ref|^r`, r > 2.
    LrTracking { r: f64 },
    /// `∫ |∇u − ∇u_ref|²`.
    GradTracking,
    /// `∫ β_Ω |∇u|²` (β ≡ 1 outside the transmission problem).
    Energy,
}

/// A functional with its reference state; `u_ref = None` means zero.
#[derive(Debug, Clone)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    pub u_ref: Option<Field>,
}

impl FunctionalSpec {
    pub fn new(kind: FunctionalKind, u_ref: Option<Field>) -> Result<Self> {
        if let FunctionalKind::LrTracking { r } = kind {
            if !(r > 2.0 && r.is_finite()) {
                return Err(Error::InvalidInput("lr tracking needs r > 2".into()));
            }
        }
        Ok(Self { kind, u_ref })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FunctionalKind::L2Tracking => "l2_tracking",
            FunctionalKind::LrTracking { .. } => "lr_tracking",
            FunctionalKind::GradTracking => "grad_tracking",
            FunctionalKind::Energy => "energy",
        }
    }

    /// `u − u_ref` as a field on the mesh of `u`.
    fn residual(&self, u: &Field) -> Field {
        match &self.u_ref {
            Some(r) => u.sub(r),
            None => u.clone(),
        }
    }

    /// F(d) for the pointwise kinds.
    fn pointwise(&self, d: f64) -> f64 {
        match self.kind {
            FunctionalKind::LrTracking { r } => d.abs().powf(r),
            _ => d * d,
        }
    }

    /// F′(d) for the pointwise kinds.
    fn pointwise_derivative(&self, d: f64) -> f64 {
        match self.kind {
            FunctionalKind::LrTracking { r } => r * d.abs().powf(r - 2.0) * d,
            _ => 2.0 * d,
        }
    }

    fn is_gradient_kind(&self) -> bool {
        matches!(self.kind, FunctionalKind::GradTracking | FunctionalKind::Energy)
    }
}

/// J(u) by the degree-4 rule; the energy uses β ≡ 1.
pub fn evaluate(j: &FunctionalSpec, u: &Field) -> f64 {
    let d = j.residual(u);
    let mesh = u.mesh();
    if j.is_gradient_kind() {
        let e = if j.kind == FunctionalKind::Energy { u } else { &d };
        return (0..mesh.n_triangles())
            .map(|t| {
                let g = e.grad_in(t);
                mesh.geom(t).area * (g[0] * g[0] + g[1] * g[1])
            })
            .sum();
    }
    let rule = QuadratureRule::dunavant4();
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let area = mesh.geom(t).area;
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            s += 2.0 * area * w * j.pointwise(d.eval_in(t, *l));
        }
    }
    s
}

/// J(u) for `problem`; the transmission energy weighs with β_Ω from `quad`.
pub fn evaluate_for(j: &FunctionalSpec, u: &Field, problem: &ProblemSpec, quad: Option<&CutQuadrature>) -> Result<f64> {
    match (j.kind, problem, quad) {
        (FunctionalKind::Energy, ProblemSpec::Transmission { beta_in, beta_out, .. }, Some(q)) => {
            let mesh = u.mesh();
            Ok((0..mesh.n_triangles())
                .map(|t| {
                    let g = u.grad_in(t);
                    let b: f64 = q.points(t).iter().map(|p| p.weight * if p.inside { *beta_in } else { *beta_out }).sum();
                    b * (g[0] * g[0] + g[1] * g[1])
                })
                .sum())
        }
        (FunctionalKind::Energy, ProblemSpec::Transmission { .. }, None) => {
            Err(Error::InvalidInput("the transmission energy needs the coefficient quadrature".into()))
        }
        _ => Ok(evaluate(j, u)),
    }
}

/// The load `F′(u)(φ_i)`.
pub fn derivative_load(j: &FunctionalSpec, u: &Field) -> Vec<f64> {
    let mesh = u.mesh();
    let d = j.residual(u);
    if j.is_gradient_kind() {
        let e = if j.kind == FunctionalKind::Energy { u } else { &d };
        let mut b = stiffness(mesh, |_| 1.0).mul_vec(e.values());
        b.iter_mut().for_each(|v| *v *= 2.0);
        return b;
    }
    let rule = QuadratureRule::dunavant4();
    let mut b = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.geom(t).area;
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            let c = 2.0 * area * w * j.pointwise_derivative(d.eval_in(t, *l));
            for k in 0..3 {
                b[tri[k]] += c * l[k];
            }
        }
    }
    b
}

/// The adjoint state: the linearized operator with right side −F′(u_Ω).
pub fn adjoint(base: &Baseline, j: &FunctionalSpec) -> Result<Field> {
    if matches!(base.spec, ProblemSpec::Transmission { .. }) && j.kind == FunctionalKind::Energy {
        return Err(Error::InadmissibleRoute("the transmission energy has no adjoint formula here".into()));
    }
    let lin = base.disc.linearize(&base.spec, &base.region, Some(&base.u0))?;
    let load: Vec<f64> = derivative_load(j, &base.u0).iter().map(|v| -v).collect();
    lin.solve(&load)
}

/// DJ = −sgn μ_E(W) with W = ((g_out − g_in)(u) + (f_in − f_out)) p.
pub fn topo_derivative_semilinear(base: &Baseline, seed: &InclusionSeed, p: &Field) -> Result<f64> {
    let sign = sign_of(&base.region, seed)?;
    let mu = limit_measure(seed, DEFAULT_ARC_NODES)?;
    let mut s = 0.0;
    for &(x, w) in &mu.atoms {
        s += w * measure_strength(&base.spec, base.u0.eval(x)?)? * p.eval(x)?;
    }
    Ok(-sign * s)
}

/// F′(u_Ω)(U₀) by quadrature.
pub fn topo_derivative_chain(j: &FunctionalSpec, problem: &ProblemSpec, u: &Field, u0: &dyn FieldLike) -> Result<f64> {
    if matches!(problem, ProblemSpec::Transmission { .. }) && j.kind != FunctionalKind::L2Tracking {
        return Err(Error::InadmissibleRoute(format!("{} has no chain rule for the transmission problem", j.name())));
    }
    let mesh: &Mesh = u.mesh();
    let d = j.residual(u);
    let e = if j.kind == FunctionalKind::Energy { u } else { &d };
    let gradient = j.is_gradient_kind();
    let mut s = 0.0;
    visit_points(mesh, u0, None, &mut |q| {
        if gradient {
            let g = e.grad_in(q.t);
            s += q.weight * 2.0 * (q.gradient[0] * g[0] + q.gradient[1] * g[1]);
        } else {
            s += q.weight * q.value * j.pointwise_derivative(d.eval_in(q.t, q.bary));
        }
    });
    Ok(s)
}

/// DJ = −sgn (β_out − β_in)(C_β + 1) ∇u_Ω(x₀)·∇p_Ω(x₀) for the ball.
pub fn topo_derivative_transmission_adjoint(base: &Baseline, seed: &InclusionSeed, j: &FunctionalSpec, p: &Field) -> Result<f64> {
    let ProblemSpec::Transmission { beta_in, beta_out, .. } = base.spec else {
        return Err(Error::UnsupportedCase("not a transmission problem".into()));
    };
    if j.kind != FunctionalKind::L2Tracking {
        return Err(Error::InadmissibleRoute(format!("{} has no transmission adjoint formula", j.name())));
    }
    let x0 = match seed.kind {
        SeedKind::Point { center } | SeedKind::Scaled { center, omega: OmegaShape::Ball } => center,
        _ => return Err(Error::UnsupportedSeed("transmission needs the ball".into())),
    };
    let sign = sign_of(&base.region, seed)?;
    let ctx = KernelContext::new(2, KernelCase::Transmission { beta_in, beta_out }, sign, OmegaShape::Ball)?;
    let c = c_beta(&ctx)?;
    let gu = base.u0.recover_gradient(x0, Some(&base.region))?;
    let gp = p.recover_gradient(x0, Some(&base.region))?;
    Ok(-ctx.signed_jump()? * (c + 1.0) * (gu[0] * gp[0] + gu[1] * gp[1]))
}

/// Quotients `(J(Ω(E_ε)) − J(Ω)) / |E_ε|` and their Richardson limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdOracle {
    pub table: Vec<(f64, f64)>,
    pub extrapolated: f64,
}

/// Assumed order of the quotient remainder `q(ε) − DJ`.
///
/// Point and circle seeds with smooth data give `O(ε² |ln ε|)`: the
/// average of a smooth function over a ball or annulus differs from its
/// limit pairing at second order.
pub const FD_REMAINDER_ORDER: i32 = 2;

/// Richardson extrapolation of the two smallest ε under a remainder of
/// order `order`.
pub fn richardson(table: &[(f64, f64)], order: i32) -> Result<f64> {
    let mut t = table.to_vec();
    t.sort_by(|a, b| a.0.total_cmp(&b.0));
    match t.as_slice() {
        [] => Err(Error::InvalidInput("empty quotient table".into())),
        [(_, q)] => Ok(*q),
        [(e2, q2), (e1, q1), ..] => {
            let (a, b) = (e1.powi(order), e2.powi(order));
            Ok((a * q2 - b * q1) / (a - b))
        }
    }
}

pub fn fd_oracle(
    base: &Baseline,
    seed: &InclusionSeed,
    j: &FunctionalSpec,
    eps: &[f64],
    policy: Admissibility,
    order: i32,
) -> Result<FdOracle> {
    for &e in eps {
        base.disc.check_resolution(e)?;
    }
    let energy_quad = |r: &crate::geometry::Region| -> Option<CutQuadrature> {
        (j.kind == FunctionalKind::Energy && matches!(base.spec, ProblemSpec::Transmission { .. })).then(|| base.disc.quadrature(r))
    };
    let j0 = evaluate_for(j, &base.u0, &base.spec, energy_quad(&base.region).as_ref())?;
    let mut table = Vec::with_capacity(eps.len());
    for &e in eps {
        let measure = seed.dilate_with(e, policy)?.measure;
        let ue = base.quotient(seed, e, policy)?;
        let u = base.u0.add(&ue.scaled(measure));
        let perturbed = perturb_region(&base.region, seed, e, policy)?;
        let je = evaluate_for(j, &u, &base.spec, energy_quad(&perturbed).as_ref())?;
        table.push((e, (je - j0) / measure));
    }
    Ok(FdOracle { extrapolated: richardson(&table, order)?, table })
}

/// All routes to DJ that were run for one configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopoDerivativeReport {
    pub config_hash: Option<String>,
    pub problem: String,
    pub functional: String,
    pub seed: Option<SeedKind>,
    pub routes: BTreeMap<String, f64>,
    pub table: Vec<(f64, f64)>,
    pub pairwise_rel_diff: BTreeMap<String, f64>,
}

impl TopoDerivativeReport {
    pub fn insert(&mut self, route: &str, value: f64) {
        self.routes.insert(route.to_string(), value);
        self.pairwise_rel_diff.clear();
        let names: Vec<&String> = self.routes.keys().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let (x, y) = (self.routes[*a], self.routes[*b]);
                self.pairwise_rel_diff.insert(format!("{a}/{b}"), relative_difference(x, y));
            }
        }
    }
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

/// `∫ u φ` for a smooth `φ` with the degree-4 rule.
pub fn integrate_against(u: &Field, phi: impl Fn(Point) -> f64) -> f64 {
    let mesh = u.mesh();
    let rule = QuadratureRule::dunavant4();
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let area = mesh.geom(t).area;
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            s += 2.0 * area * w * u.eval_in(t, *l) * phi(mesh.point_at(t, *l));
        }
    }
    s
}
