//! P1 fields, their norms and gradient recovery.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::{Indicator, Mesh, QuadratureRule};
use crate::{dist, Error, Point, Result};

/// Anything that can be sampled on the mesh: P1 fields and fields with an
/// analytic singular part.
pub trait FieldLike: Sync {
    /// Value at `x`, which lies in triangle `t` with barycentrics `bary`.
    fn value(&self, t: usize, bary: [f64; 3], x: Point) -> f64;
    /// Gradient at `x` inside triangle `t`.
    fn gradient(&self, t: usize, x: Point) -> Point;
    /// Location of a point singularity, if any.
    fn singularity(&self) -> Option<Point> {
        None
    }
}

/// Continuous piecewise linear function given by its nodal values.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) && self.values == other.values
    }
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.n_vertices(), "one value per vertex");
        Self { mesh, values }
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.n_vertices();
        Self::new(mesh, vec![0.0; n])
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn eval_in(&self, t: usize, l: [f64; 3]) -> f64 {
        let tri = self.mesh.triangles()[t];
        l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]]
    }

    /// Value at an arbitrary point of the mesh.
    pub fn eval(&self, x: Point) -> Result<f64> {
        let (t, l) = self.mesh.locate_point(x)?;
        Ok(self.eval_in(t, l))
    }

    /// Constant gradient on triangle `t`.
    pub fn grad_in(&self, t: usize) -> Point {
        let tri = self.mesh.triangles()[t];
        let g = &self.mesh.geom(t).grads;
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += self.values[tri[k]] * g[k][0];
            out[1] += self.values[tri[k]] * g[k][1];
        }
        out
    }

    /// `self − other`.
    pub fn sub(&self, other: &Field) -> Field {
        let v = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Field::new(self.mesh.clone(), v)
    }

    /// `self + other`.
    pub fn add(&self, other: &Field) -> Field {
        let v = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Field::new(self.mesh.clone(), v)
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field::new(self.mesh.clone(), self.values.iter().map(|v| s * v).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(∫|u|^p)^{1/p}`.
    pub fn norm_lp(&self, p: f64) -> f64 {
        norm(&self.mesh, self, &NormSpec::lp(p))
    }

    /// `(∫|u|^p + |∇u|^p)^{1/p}`.
    pub fn norm_w1p(&self, p: f64) -> f64 {
        norm(&self.mesh, self, &NormSpec::w1p(p))
    }

    /// Area-weighted mean of the element gradients over the triangles whose
    /// centroid lies within `2h` of `x0` (and the triangle containing `x0`).
    ///
    /// With `interface` given, fails when a patch triangle is crossed by its
    /// boundary.
    pub fn recover_gradient(&self, x0: Point, interface: Option<&dyn Indicator>) -> Result<Point> {
        let (t0, _) = self.mesh.locate_point(x0)?;
        let radius = 2.0 * self.mesh.h();
        let mut sum = [0.0; 2];
        let mut area = 0.0;
        for t in 0..self.mesh.n_triangles() {
            if t != t0 && dist(self.mesh.centroid(t), x0) > radius {
                continue;
            }
            if let Some(ind) = interface {
                let crossed = ind.crosses(&self.mesh.corners(t)).unwrap_or_else(|| {
                    let c = self.mesh.corners(t);
                    let a = ind.contains(c[0]);
                    ind.contains(c[1]) != a || ind.contains(c[2]) != a
                });
                if crossed {
                    return Err(Error::PatchTouchesInterface(x0[0], x0[1]));
                }
            }
            let a = self.mesh.geom(t).area;
            let g = self.grad_in(t);
            sum[0] += a * g[0];
            sum[1] += a * g[1];
            area += a;
        }
        Ok([sum[0] / area, sum[1] / area])
    }

    /// Plain-text export: `field N` then one value per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(26 * self.values.len() + 16);
        writeln!(s, "field {}", self.values.len()).ok();
        for v in &self.values {
            writeln!(s, "{v:.16e}").ok();
        }
        s
    }

    /// CSV with header `x,y,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(80 * self.values.len() + 16);
        s.push_str("x,y,value\n");
        for (p, v) in self.mesh.vertices().iter().zip(&self.values) {
            writeln!(s, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v).ok();
        }
        s
    }
}

impl FieldLike for Field {
    fn value(&self, t: usize, bary: [f64; 3], _x: Point) -> f64 {
        self.eval_in(t, bary)
    }

    fn gradient(&self, t: usize, _x: Point) -> Point {
        self.grad_in(t)
    }
}

/// Pointwise difference of two fields.
pub struct Difference<'a>(pub &'a dyn FieldLike, pub &'a dyn FieldLike);

impl FieldLike for Difference<'_> {
    fn value(&self, t: usize, bary: [f64; 3], x: Point) -> f64 {
        self.0.value(t, bary, x) - self.1.value(t, bary, x)
    }

    fn gradient(&self, t: usize, x: Point) -> Point {
        let (a, b) = (self.0.gradient(t, x), self.1.gradient(t, x));
        [a[0] - b[0], a[1] - b[1]]
    }

    fn singularity(&self) -> Option<Point> {
        self.0.singularity().or(self.1.singularity())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Lp,
    W1p,
}

/// A (possibly punctured) L^p or W^{1,p} norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kind: NormKind,
    pub p: f64,
    /// Disk excluded from the integration domain.
    pub puncture: Option<(Point, f64)>,
}

impl NormSpec {
    pub fn lp(p: f64) -> Self {
        Self { kind: NormKind::Lp, p, puncture: None }
    }

    pub fn w1p(p: f64) -> Self {
        Self { kind: NormKind::W1p, p, puncture: None }
    }

    pub fn punctured(mut self, center: Point, radius: f64) -> Self {
        if radius > 0.0 {
            self.puncture = Some((center, radius));
        }
        self
    }
}

/// Integral of `g(value, gradient)` over the (punctured) mesh domain.
///
/// Triangles containing a singular point are split at it and integrated
/// with a graded collapsed rule; triangles near it are subdivided.
pub fn integrate(mesh: &Mesh, f: &dyn FieldLike, puncture: Option<(Point, f64)>, g: impl Fn(f64, Point) -> f64) -> f64 {
    let mut total = 0.0;
    visit_points(mesh, f, puncture, &mut |q| total += q.weight * g(q.value, q.gradient));
    total
}

/// A point of the singular-aware rule with the sampled field.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub t: usize,
    pub bary: [f64; 3],
    pub x: Point,
    pub weight: f64,
    pub value: f64,
    pub gradient: Point,
}

/// Calls `visit` for every point of the singular-aware rule used by
/// [`integrate`].
pub fn visit_points(mesh: &Mesh, f: &dyn FieldLike, puncture: Option<(Point, f64)>, visit: &mut dyn FnMut(Sample)) {
    let standard = QuadratureRule::dunavant4();
    let apex = QuadratureRule::apex(12, 2);
    let mut singular: Vec<Point> = f.singularity().into_iter().collect();
    if let Some((c, _)) = puncture {
        if singular.iter().all(|&s| dist(s, c) > 0.0) {
            singular.push(c);
        }
    }
    let keep = |x: Point| puncture.is_none_or(|(c, r)| dist(x, c) >= r);
    let mut rule_on = |t: usize, sub: [Point; 3], rule: &QuadratureRule| {
        let area = 0.5 * crate::cross(crate::sub(sub[1], sub[0]), crate::sub(sub[2], sub[0]));
        if area <= 0.0 {
            return;
        }
        let corners = mesh.corners(t);
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            let x = crate::mesh::bary_to_point(&sub, *l);
            if !keep(x) {
                continue;
            }
            let bary = crate::mesh::barycentric(&corners, x);
            visit(Sample { t, bary, x, weight: 2.0 * area * w, value: f.value(t, bary, x), gradient: f.gradient(t, x) });
        }
    };
    for t in 0..mesh.n_triangles() {
        let c = mesh.corners(t);
        let diam = mesh.geom(t).diameter;
        let near: Vec<Point> = singular
            .iter()
            .copied()
            .filter(|&s| dist(s, mesh.centroid(t)) < 1.5 * diam)
            .collect();
        if near.is_empty() {
            rule_on(t, c, &standard);
            continue;
        }
        let inside = near.iter().copied().find(|&s| {
            let l = crate::mesh::barycentric(&c, s);
            l.iter().all(|&v| v >= -1e-12)
        });
        match inside {
            Some(s) => {
                for k in 0..3 {
                    rule_on(t, [s, c[k], c[(k + 1) % 3]], &apex);
                }
            }
            None => {
                let mut subs = vec![c];
                for _ in 0..3 {
                    subs = subs.into_iter().flat_map(quadrisect).collect();
                }
                for s in subs {
                    rule_on(t, s, &standard);
                }
            }
        }
    }
}

pub(crate) fn quadrisect(p: [Point; 3]) -> [[Point; 3]; 4] {
    let m = |a: Point, b: Point| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let (ab, bc, ca) = (m(p[0], p[1]), m(p[1], p[2]), m(p[2], p[0]));
    [[p[0], ab, ca], [ab, p[1], bc], [ca, bc, p[2]], [bc, ca, ab]]
}

/// Norm of `f` per `spec`.
pub fn norm(mesh: &Mesh, f: &dyn FieldLike, spec: &NormSpec) -> f64 {
    let p = spec.p;
    let s = match spec.kind {
        NormKind::Lp => integrate(mesh, f, spec.puncture, |v, _| v.abs().powf(p)),
        NormKind::W1p => integrate(mesh, f, spec.puncture, |v, g| v.abs().powf(p) + crate::norm(g).powf(p)),
    };
    s.powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Region, Shape};
    use crate::mesh::HoldAll;

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_square(n))
    }

    #[test]
    fn norms_of_simple_fields() {
        let m = square(4);
        let one = Field::from_fn(m.clone(), |_| 1.0);
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!((one.norm_lp(p) - 1.0).abs() < 1e-13);
        }
        let x = Field::from_fn(m, |p| p[0]);
        assert!((x.norm_lp(2.0) - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((x.norm_w1p(2.0) - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gradient_recovery() {
        let m = square(8);
        let u = Field::from_fn(m.clone(), |p| p[0] + 2.0 * p[1]);
        let g = u.recover_gradient([0.43, 0.61], None).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
        let mut errs = vec![];
        for n in [8, 16, 32] {
            let u = Field::from_fn(square(n), |p| p[0] * p[0]);
            let g = u.recover_gradient([0.5, 0.5], None).unwrap();
            errs.push(((g[0] - 1.0).powi(2) + g[1].powi(2)).sqrt());
        }
        assert!(errs[2] < 1e-10 || errs[1] / errs[2] > 3.5, "{errs:?}");
        let r = Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.3, 0.5], radius: 0.15 }]).unwrap();
        let near = [0.3 + 0.15 + 0.5 / 8.0, 0.5];
        assert!(matches!(u.recover_gradient(near, Some(&r)), Err(Error::PatchTouchesInterface(..))));
    }

    #[test]
    fn singular_integration_of_log() {
        struct Log(Point);
        impl FieldLike for Log {
            fn value(&self, _t: usize, _b: [f64; 3], x: Point) -> f64 {
                dist(x, self.0).ln()
            }
            fn gradient(&self, _t: usize, _x: Point) -> Point {
                [0.0, 0.0]
            }
            fn singularity(&self) -> Option<Point> {
                Some(self.0)
            }
        }
        // Antiderivative of ln(x² + y²)/2 in both variables.
        let f = |x: f64, y: f64| {
            let at = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * a * (b / a).atan() };
            let l = if x == 0.0 && y == 0.0 { 0.0 } else { x * y * (x * x + y * y).ln() };
            0.5 * (l - 3.0 * x * y + at(x, y) + at(y, x))
        };
        let m = Mesh::unit_square(32);
        let c = [0.4537, 0.5213];
        let v = integrate(&m, &Log(c), None, |v, _| v);
        let (x0, x1, y0, y1) = (-c[0], 1.0 - c[0], -c[1], 1.0 - c[1]);
        let exact = f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0);
        assert!((v - exact).abs() < 1e-6 * exact.abs(), "{v} {exact}");
    }

    #[test]
    fn text_formats() {
        let m = square(1);
        let u = Field::from_fn(m, |p| p[0]);
        let t = u.to_text();
        assert!(t.starts_with("field 5\n"));
        assert_eq!(t.lines().count(), 6);
        assert_eq!(u.to_csv().lines().count(), 6);
    }
}
