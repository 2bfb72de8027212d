//! Topological state derivatives: differential quotients U_ε and the limit
//! U₀ by measure-data solves and by fundamental-solution splittings.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fem::assemble::{load_from_points, lumped_mass, point_load};
use crate::fem::field::quadrisect;
use crate::fem::{resolution_check, Discretization, Field, FieldLike, Linearized, ProblemSpec};
pub use crate::fem::MIN_RESOLUTION;
use crate::geometry::{limit_measure, perturb_region, sign_of, Admissibility, InclusionSeed, OmegaShape, Region, SeedKind, Shape, DEFAULT_ARC_NODES};
use crate::kernels::{dipole_field, dipole_vector_xi, fundamental_gradient, fundamental_solution, KernelCase, KernelContext};
use crate::mesh::{barycentric, bary_to_point, Mesh, QuadratureRule};
use crate::{dist, Error, Point, Result};

/// Nodes of the trapezoid rule on circular interfaces.
pub const INTERFACE_ARC_NODES: usize = 512;

/// Fails with `MeshTooCoarse` unless `h ≤ ε/8` (up to rounding).
pub fn check_resolution(mesh: &Mesh, eps: f64) -> Result<()> {
    resolution_check(mesh.h(), eps, MIN_RESOLUTION)
}

/// Which construction produced a U₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    QuotientLimit,
    MeasureSolve,
    Splitting,
}

/// Analytic part of a split field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Singular {
    None,
    /// `coef · E(x − center)`.
    Log { center: Point, coef: f64 },
    /// `−xi · ∇E(x − center)`.
    Dipole { center: Point, xi: Point },
}

impl Singular {
    pub fn value(&self, x: Point) -> f64 {
        match *self {
            Singular::None => 0.0,
            Singular::Log { center, coef } => {
                let d = crate::sub(x, center);
                if crate::norm(d) < 1e-14 {
                    return 0.0;
                }
                coef * fundamental_solution(2, &d).unwrap_or(0.0)
            }
            Singular::Dipole { center, xi } => dipole_field(xi, crate::sub(x, center)).map(|v| v.0).unwrap_or(0.0),
        }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match *self {
            Singular::None => [0.0; 2],
            Singular::Log { center, coef } => {
                let g = fundamental_gradient(crate::sub(x, center)).unwrap_or([0.0; 2]);
                [coef * g[0], coef * g[1]]
            }
            Singular::Dipole { center, xi } => dipole_field(xi, crate::sub(x, center)).map(|v| v.1).unwrap_or([0.0; 2]),
        }
    }

    fn center(&self) -> Option<Point> {
        match *self {
            Singular::None => None,
            Singular::Log { center, .. } | Singular::Dipole { center, .. } => Some(center),
        }
    }
}

/// A P1 field plus an analytic singular part.
#[derive(Debug, Clone)]
pub struct SplitField {
    pub regular: Field,
    pub singular: Singular,
}

impl SplitField {
    pub fn nodal(regular: Field) -> Self {
        Self { regular, singular: Singular::None }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.regular.mesh()
    }

    /// Value off the mesh nodes.
    pub fn eval(&self, x: Point) -> Result<f64> {
        Ok(self.regular.eval(x)? + self.singular.value(x))
    }

    /// Nodal interpolant of the sum; a vertex at the singular point keeps
    /// the regular value only.
    pub fn interpolant(&self) -> Field {
        let m = self.regular.mesh().clone();
        let v = m.vertices().iter().zip(self.regular.values()).map(|(&x, r)| r + self.singular.value(x)).collect();
        Field::new(m, v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let singular = match self.singular {
            Singular::None => Singular::None,
            Singular::Log { center, coef } => Singular::Log { center, coef: s * coef },
            Singular::Dipole { center, xi } => Singular::Dipole { center, xi: [s * xi[0], s * xi[1]] },
        };
        Self { regular: self.regular.scaled(s), singular }
    }
}

impl FieldLike for SplitField {
    fn value(&self, t: usize, bary: [f64; 3], x: Point) -> f64 {
        self.regular.eval_in(t, bary) + self.singular.value(x)
    }

    fn gradient(&self, t: usize, x: Point) -> Point {
        let g = self.regular.grad_in(t);
        let s = self.singular.gradient(x);
        [g[0] + s[0], g[1] + s[1]]
    }

    fn singularity(&self) -> Option<Point> {
        self.singular.center()
    }
}

/// A U₀ with its provenance.
#[derive(Debug, Clone)]
pub struct StateDerivativeResult {
    pub field: SplitField,
    pub route: Route,
    pub seed: InclusionSeed,
    pub eps: Option<f64>,
    pub spec: ProblemSpec,
    pub sign: f64,
}

/// The unperturbed state, reused across ε.
pub struct Baseline {
    pub disc: Discretization,
    pub spec: ProblemSpec,
    pub region: Region,
    pub u0: Field,
}

impl Baseline {
    pub fn new(disc: Discretization, spec: ProblemSpec, region: Region) -> Result<Self> {
        let u0 = disc.solve(&spec, &region)?;
        Ok(Self { disc, spec, region, u0 })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.disc.mesh
    }

    /// U_ε = (u_{Ω(E_ε)} − u_Ω) / |E_ε|.
    pub fn quotient(&self, seed: &InclusionSeed, eps: f64, policy: Admissibility) -> Result<Field> {
        self.disc.check_resolution(eps)?;
        let measure = seed.dilate_with(eps, policy)?.measure;
        let perturbed = perturb_region(&self.region, seed, eps, policy)?;
        if self.spec.is_region_independent() {
            return Ok(Field::zeros(self.mesh().clone()));
        }
        let diff = match self.spec {
            ProblemSpec::Semilinear { g_in, g_out, .. } if !(g_in.is_zero() && g_out.is_zero()) => {
                self.disc.solve(&self.spec, &perturbed)?.sub(&self.u0)
            }
            _ => {
                // A_ε (u_ε − u₀) = b_ε − A_ε u₀ avoids cancellation.
                let lin = self.disc.linearize(&self.spec, &perturbed, None)?;
                let quad = lin.quadrature();
                let b = crate::fem::assemble::assemble_load(self.mesh(), quad, self.spec.f_in(), self.spec.f_out());
                let au = lin.matrix().mul_vec(self.u0.values());
                let rhs: Vec<f64> = b.iter().zip(&au).map(|(b, a)| b - a).collect();
                lin.solve(&rhs)?
            }
        };
        Ok(diff.scaled(1.0 / measure))
    }
}

/// U_ε on `mesh`; see [`Baseline::quotient`].
pub fn differential_quotient(
    disc: &Discretization,
    spec: &ProblemSpec,
    region: &Region,
    seed: &InclusionSeed,
    eps: f64,
    policy: Admissibility,
) -> Result<Field> {
    disc.check_resolution(eps)?;
    Baseline::new(disc.clone(), *spec, region.clone())?.quotient(seed, eps, policy)
}

/// Pointwise strength `(g_out − g_in)(u) + (f_in − f_out)` of the limit load.
pub fn measure_strength(spec: &ProblemSpec, u: f64) -> Result<f64> {
    let (g_in, g_out, f_in, f_out) =
        spec.as_semilinear().ok_or_else(|| Error::UnsupportedCase("transmission has no measure route".into()))?;
    Ok(g_out.value(u) - g_in.value(u) + f_in - f_out)
}

/// U₀ from the linearized system with the limit measure on the right.
pub fn semilinear_u0_measure(base: &Baseline, seed: &InclusionSeed) -> Result<StateDerivativeResult> {
    measure_strength(&base.spec, 0.0)?;
    let sign = sign_of(&base.region, seed)?;
    let mu = limit_measure(seed, DEFAULT_ARC_NODES)?;
    let lin = base.disc.linearize(&base.spec, &base.region, Some(&base.u0))?;
    let mut load = vec![0.0; base.mesh().n_vertices()];
    for &(x, w) in &mu.atoms {
        let s = sign * measure_strength(&base.spec, base.u0.eval(x)?)?;
        point_load(base.mesh(), x, w * s, &mut load)?;
    }
    Ok(StateDerivativeResult {
        field: SplitField::nodal(lin.solve(&load)?),
        route: Route::MeasureSolve,
        seed: *seed,
        eps: None,
        spec: base.spec,
        sign,
    })
}

fn point_seed_center(seed: &InclusionSeed) -> Result<Point> {
    match seed.kind {
        SeedKind::Point { center } | SeedKind::Scaled { center, .. } => Ok(center),
        SeedKind::Circle { .. } => Err(Error::UnsupportedSeed("splitting needs a point seed".into())),
    }
}

/// U₀ = sgn (f_in − f_out) E(x − x₀) + v with v harmonic and v = −R on ∂D.
pub fn rhs_linear_u0_splitting(base: &Baseline, seed: &InclusionSeed) -> Result<StateDerivativeResult> {
    let (f_in, f_out) = match base.spec {
        ProblemSpec::Poisson { f_in, f_out } => (f_in, f_out),
        ProblemSpec::Semilinear { g_in, g_out, f_in, f_out } if g_in.is_zero() && g_out.is_zero() => (f_in, f_out),
        _ => return Err(Error::UnsupportedCase("rhs splitting needs a linear source problem".into())),
    };
    let x0 = point_seed_center(seed)?;
    let sign = sign_of(&base.region, seed)?;
    let singular = Singular::Log { center: x0, coef: sign * (f_in - f_out) };
    let mesh = base.mesh();
    let lin = base.disc.linearize(&base.spec, &base.region, None)?;
    let v = harmonic_corrector(&lin, mesh, &singular, &vec![0.0; mesh.n_vertices()])?;
    Ok(StateDerivativeResult {
        field: SplitField { regular: v, singular },
        route: Route::Splitting,
        seed: *seed,
        eps: None,
        spec: base.spec,
        sign,
    })
}

fn harmonic_corrector(lin: &Linearized, mesh: &Mesh, singular: &Singular, load: &[f64]) -> Result<Field> {
    let boundary: Vec<f64> = mesh
        .vertices()
        .iter()
        .zip(mesh.boundary())
        .map(|(&x, &b)| if b { -singular.value(x) } else { 0.0 })
        .collect();
    lin.solve_with_boundary(load, &boundary)
}

/// Semilinear splitting: U₀ = R + v with R = sgn·S·E(x − x₀),
/// S = (g_out − g_in)(u(x₀)) + (f_in − f_out), and
/// −Δv + ∂ρ v = −∂ρ R, v = −R on ∂D.
pub fn semilinear_u0_splitting(base: &Baseline, seed: &InclusionSeed) -> Result<StateDerivativeResult> {
    let (g_in, g_out, _, _) =
        base.spec.as_semilinear().ok_or_else(|| Error::UnsupportedCase("semilinear splitting".into()))?;
    let x0 = point_seed_center(seed)?;
    let sign = sign_of(&base.region, seed)?;
    let mesh = base.mesh().clone();
    if base.region.boundary_distance(x0) < 2.0 * mesh.h() {
        return Err(Error::PatchTouchesInterface(x0[0], x0[1]));
    }
    let strength = measure_strength(&base.spec, base.u0.eval(x0)?)?;
    let singular = Singular::Log { center: x0, coef: sign * strength };
    let lin = base.disc.linearize(&base.spec, &base.region, Some(&base.u0))?;
    let u0 = &base.u0;
    let w = |inside: bool, u: f64| if inside { g_in.derivative(u) } else { g_out.derivative(u) };
    let mut load = load_from_points(&mesh, lin.quadrature(), |t, q| {
        if near_singular(&mesh, t, x0) {
            0.0
        } else {
            -w(q.inside, u0.eval_in(t, q.bary)) * singular.value(q.x)
        }
    });
    let inside_x0 = base.region.contains(x0);
    singular_load(&mesh, x0, &mut load, |t, bary, x| -w(inside_x0, u0.eval_in(t, bary)) * singular.value(x));
    let v = harmonic_corrector(&lin, &mesh, &singular, &load)?;
    Ok(StateDerivativeResult {
        field: SplitField { regular: v, singular },
        route: Route::Splitting,
        seed: *seed,
        eps: None,
        spec: base.spec,
        sign,
    })
}

fn near_singular(mesh: &Mesh, t: usize, x0: Point) -> bool {
    dist(mesh.centroid(t), x0) < 1.5 * mesh.geom(t).diameter
}

/// Adds `∫ f φ_i` over the triangles near `x0`, splitting the one that
/// contains it at `x0`.
fn singular_load(mesh: &Mesh, x0: Point, b: &mut [f64], f: impl Fn(usize, [f64; 3], Point) -> f64) {
    let apex = QuadratureRule::apex(12, 2);
    let standard = QuadratureRule::dunavant4();
    for t in 0..mesh.n_triangles() {
        if !near_singular(mesh, t, x0) {
            continue;
        }
        let c = mesh.corners(t);
        let tri = mesh.triangles()[t];
        let l0 = barycentric(&c, x0);
        let subs: Vec<([Point; 3], &QuadratureRule)> = if l0.iter().all(|&v| v >= -1e-12) {
            (0..3).map(|k| ([x0, c[k], c[(k + 1) % 3]], &apex)).collect()
        } else {
            let mut s = vec![c];
            for _ in 0..3 {
                s = s.into_iter().flat_map(quadrisect).collect();
            }
            s.into_iter().map(|s| (s, &standard)).collect()
        };
        for (s, rule) in subs {
            let area = 0.5 * crate::cross(crate::sub(s[1], s[0]), crate::sub(s[2], s[0]));
            if area <= 0.0 {
                continue;
            }
            for (l, &w) in rule.points.iter().zip(&rule.weights) {
                let x = bary_to_point(&s, *l);
                let bary = barycentric(&c, x);
                let v = 2.0 * area * w * f(t, bary, x);
                for k in 0..3 {
                    b[tri[k]] += v * bary[k];
                }
            }
        }
    }
}

/// Points, outward normals and arc weights on ∂Ω.
pub fn interface_quadrature(shape: &Shape, n: usize) -> Vec<(Point, Point, f64)> {
    let circle = |c: Point, r: f64, outward: f64| {
        (0..n)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                let nu = [th.cos(), th.sin()];
                ([c[0] + r * nu[0], c[1] + r * nu[1]], [outward * nu[0], outward * nu[1]], 2.0 * PI * r / n as f64)
            })
            .collect::<Vec<_>>()
    };
    match shape {
        Shape::Disk { center, radius } => circle(*center, *radius, 1.0),
        Shape::Annulus { center, inner, outer } => {
            let mut q = circle(*center, *outer, 1.0);
            q.extend(circle(*center, *inner, -1.0));
            q
        }
        Shape::Polygon { vertices } => {
            let m = vertices.len();
            let per = n.div_ceil(m).max(1);
            let mut q = Vec::with_capacity(per * m);
            for i in 0..m {
                let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                let e = crate::sub(b, a);
                let len = crate::norm(e);
                let nu = [e[1] / len, -e[0] / len];
                for k in 0..per {
                    let s = (k as f64 + 0.5) / per as f64;
                    q.push(([a[0] + s * e[0], a[1] + s * e[1]], nu, len / per as f64));
                }
            }
            q
        }
    }
}

/// Transmission U₀ = |ω|⁻¹ (R + v) for the ball with R = −ξ·∇E(x − x₀).
///
/// The corrector solves `−div(β_Ω ∇v) = (β_out − β_in) ∂_ν R δ_{∂Ω}` with
/// `v = −R` on ∂D.
pub fn transmission_u0(base: &Baseline, seed: &InclusionSeed) -> Result<StateDerivativeResult> {
    let ProblemSpec::Transmission { beta_in, beta_out, .. } = base.spec else {
        return Err(Error::UnsupportedCase("transmission splitting needs the transmission problem".into()));
    };
    let x0 = match seed.kind {
        SeedKind::Point { center } | SeedKind::Scaled { center, omega: OmegaShape::Ball } => center,
        _ => return Err(Error::UnsupportedSeed("transmission needs the ball".into())),
    };
    let sign = sign_of(&base.region, seed)?;
    let ctx = KernelContext::new(2, KernelCase::Transmission { beta_in, beta_out }, sign, OmegaShape::Ball)?;
    let g = base.u0.recover_gradient(x0, Some(&base.region))?;
    let xi = dipole_vector_xi(&ctx, &g)?;
    let singular = Singular::Dipole { center: x0, xi: [xi[0], xi[1]] };
    let mesh = base.mesh().clone();
    let mut load = vec![0.0; mesh.n_vertices()];
    for shape in base.region.shapes() {
        for (p, nu, w) in interface_quadrature(shape, INTERFACE_ARC_NODES) {
            let gr = singular.gradient(p);
            point_load(&mesh, p, (beta_out - beta_in) * w * (gr[0] * nu[0] + gr[1] * nu[1]), &mut load)?;
        }
    }
    let lin = base.disc.linearize(&base.spec, &base.region, None)?;
    let v = harmonic_corrector(&lin, &mesh, &singular, &load)?;
    let field = SplitField { regular: v, singular }.scaled(1.0 / OmegaShape::Ball.measure());
    Ok(StateDerivativeResult { field, route: Route::Splitting, seed: *seed, eps: None, spec: base.spec, sign })
}

/// G(y, ·): the response of the linearized operator to a unit Dirac at `y`.
pub fn green_column(lin: &Linearized, y: Point) -> Result<Field> {
    let mesh = lin.mesh();
    let mut b = vec![0.0; mesh.n_vertices()];
    point_load(mesh, y, 1.0, &mut b)?;
    lin.solve(&b)
}

/// Both realizations of `∫ sgn_Ω(y) U_{{y},0} h(y) dy`.
#[derive(Debug, Clone)]
pub struct Superposition {
    pub direct: Field,
    pub superposed: Field,
}

/// The control derivative by one linearized solve with the lumped load
/// `m_i sgn_i F_i h_i`, and by summing Green columns at the vertices.
pub fn control_derivative_superposition(base: &Baseline, h: &Field) -> Result<Superposition> {
    let mesh = base.mesh().clone();
    let lin = base.disc.linearize(&base.spec, &base.region, Some(&base.u0))?;
    let m = lumped_mass(&mesh);
    let mut coef = vec![0.0; mesh.n_vertices()];
    for (i, &x) in mesh.vertices().iter().enumerate() {
        let s = if base.region.contains(x) { -1.0 } else { 1.0 };
        coef[i] = m[i] * s * measure_strength(&base.spec, base.u0.values()[i])? * h.values()[i];
    }
    let direct = lin.solve(&coef)?;
    let active: Vec<usize> = (0..coef.len()).filter(|&i| coef[i] != 0.0 && !mesh.boundary()[i]).collect();
    let columns: Vec<Vec<f64>> = active
        .par_iter()
        .map(|&i| green_column(&lin, mesh.vertices()[i]).map(|f| f.into_values()))
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; mesh.n_vertices()];
    for (&i, col) in active.iter().zip(&columns) {
        for (s, c) in sum.iter_mut().zip(col) {
            *s += coef[i] * c;
        }
    }
    Ok(Superposition { direct, superposed: Field::new(mesh, sum) })
}

/// `(u_ε − u₀)(x₀ + ε z) / ε^a` on the grid `zs`; `None` where the point
/// leaves D.
pub fn rescaled_corrector(u_eps: &Field, u0: &Field, eps: f64, x0: Point, a: f64, zs: &[Point]) -> Vec<Option<f64>> {
    let diff = u_eps.sub(u0);
    zs.iter()
        .map(|z| diff.eval([x0[0] + eps * z[0], x0[1] + eps * z[1]]).ok().map(|v| v / eps.powf(a)))
        .collect()
}
