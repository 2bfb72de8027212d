//! Design regions, perturbation seeds, their dilations and limit measures.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::integrate::gauss_legendre_on;
use crate::mesh::{HoldAll, Indicator};
use crate::{cross, dist, dot, norm, sub, Error, Point, Result};

/// Minimum clearance between shapes, seeds and the hold-all boundary.
pub const MIN_CLEARANCE: f64 = 1e-3;

/// Default number of nodes of the arc quadrature for curve measures.
pub const DEFAULT_ARC_NODES: usize = 256;

/// A planar shape; all kinds are convex except the annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    /// Convex polygon, counter-clockwise.
    Polygon { vertices: Vec<Point> },
    Annulus { center: Point, inner: f64, outer: f64 },
}

impl Shape {
    /// Validated convex polygon; clockwise input is reversed.
    pub fn polygon(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput("polygon needs at least three vertices".into()));
        }
        if polygon_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(sub(b, a), sub(c, b)) <= 0.0 {
                return Err(Error::InvalidInput("polygon is not strictly convex".into()));
            }
        }
        Ok(Shape::Polygon { vertices })
    }

    /// Axis-aligned square with the given center and half side.
    pub fn square(center: Point, half: f64) -> Self {
        let [x, y] = center;
        Shape::Polygon {
            vertices: vec![[x - half, y - half], [x + half, y - half], [x + half, y + half], [x - half, y + half]],
        }
    }

    /// Open-set membership.
    pub fn contains(&self, x: Point) -> bool {
        match self {
            Shape::Disk { center, radius } => dist(x, *center) < *radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| cross(sub(vertices[(i + 1) % n], vertices[i]), sub(x, vertices[i])) > 0.0)
            }
            Shape::Annulus { center, inner, outer } => {
                let r = dist(x, *center);
                r > *inner && r < *outer
            }
        }
    }

    /// Closed-set membership.
    pub fn contains_closed(&self, x: Point) -> bool {
        self.contains(x) || self.boundary_distance(x) == 0.0
    }

    /// Unsigned distance from `x` to the boundary.
    pub fn boundary_distance(&self, x: Point) -> f64 {
        match self {
            Shape::Disk { center, radius } => (dist(x, *center) - radius).abs(),
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| segment_distance(x, vertices[i], vertices[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
            Shape::Annulus { center, inner, outer } => {
                let r = dist(x, *center);
                (r - inner).abs().min((r - outer).abs())
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Polygon { vertices } => polygon_area(vertices),
            Shape::Annulus { inner, outer, .. } => PI * (outer * outer - inner * inner),
        }
    }

    /// Whether the boundary meets the closed triangle `tri`.
    pub fn crosses(&self, tri: &[Point; 3]) -> bool {
        match self {
            Shape::Disk { center, radius } => circle_meets_triangle(*center, *radius, tri),
            Shape::Annulus { center, inner, outer } => {
                circle_meets_triangle(*center, *inner, tri) || circle_meets_triangle(*center, *outer, tri)
            }
            Shape::Polygon { vertices } => {
                let all_in = tri.iter().all(|&p| self.contains(p));
                !all_in && convex_overlap(vertices, tri)
            }
        }
    }

    /// Points on the boundary, used for nesting checks.
    pub fn boundary_samples(&self, n: usize) -> Vec<Point> {
        match self {
            Shape::Disk { center, radius } => circle_points(*center, *radius, n),
            Shape::Annulus { center, inner, outer } => {
                let mut v = circle_points(*center, *inner, n);
                v.extend(circle_points(*center, *outer, n));
                v
            }
            Shape::Polygon { vertices } => {
                let m = vertices.len();
                let per = n.div_ceil(m).max(1);
                let mut v = Vec::with_capacity(per * m);
                for i in 0..m {
                    let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                    for k in 0..per {
                        let s = k as f64 / per as f64;
                        v.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                    }
                }
                v
            }
        }
    }

    /// Clearance of the shape from the boundary of the hold-all.
    fn holdall_clearance(&self, holdall: HoldAll) -> f64 {
        match self {
            Shape::Disk { center, radius } | Shape::Annulus { center, outer: radius, .. } => {
                holdall.boundary_distance(*center) - radius
            }
            Shape::Polygon { vertices } => {
                vertices.iter().map(|&v| holdall.boundary_distance(v)).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn circle_points(c: Point, r: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            [c[0] + r * th.cos(), c[1] + r * th.sin()]
        })
        .collect()
}

pub(crate) fn segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let s = if l2 == 0.0 { 0.0 } else { (dot(sub(x, a), ab) / l2).clamp(0.0, 1.0) };
    dist(x, [a[0] + s * ab[0], a[1] + s * ab[1]])
}

fn point_in_triangle(x: Point, t: &[Point; 3]) -> bool {
    let s = |a: Point, b: Point| cross(sub(b, a), sub(x, a));
    let (d0, d1, d2) = (s(t[0], t[1]), s(t[1], t[2]), s(t[2], t[0]));
    (d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0 && d2 <= 0.0)
}

fn circle_meets_triangle(c: Point, r: f64, tri: &[Point; 3]) -> bool {
    let dmax = tri.iter().map(|&p| dist(p, c)).fold(0.0, f64::max);
    let dmin = if point_in_triangle(c, tri) {
        0.0
    } else {
        (0..3).map(|k| segment_distance(c, tri[k], tri[(k + 1) % 3])).fold(f64::INFINITY, f64::min)
    };
    dmin <= r && r <= dmax
}

/// Separating-axis test for two convex polygons (closed sets).
fn convex_overlap(a: &[Point], b: &[Point]) -> bool {
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let e = sub(poly[(i + 1) % n], poly[i]);
            let axis = [-e[1], e[0]];
            let proj = |p: &[Point]| {
                p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &q| {
                    let d = dot(q, axis);
                    (lo.min(d), hi.max(d))
                })
            };
            let (alo, ahi) = proj(a);
            let (blo, bhi) = proj(b);
            if ahi < blo || bhi < alo {
                return false;
            }
        }
    }
    true
}

/// The design region Ω: the union of `shapes`, plus `added` and minus the
/// closure of `removed` (the latter two come from perturbations).
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub holdall: HoldAll,
    shapes: Vec<Shape>,
    added: Vec<Shape>,
    removed: Vec<Shape>,
}

impl Region {
    /// Validated region. Shapes must keep `MIN_CLEARANCE` from the hold-all
    /// boundary and be pairwise disjoint or nested.
    pub fn new(holdall: HoldAll, shapes: Vec<Shape>) -> Result<Self> {
        for (i, s) in shapes.iter().enumerate() {
            if let Shape::Disk { radius, .. } = s {
                if *radius <= 0.0 {
                    return Err(Error::InvalidInput(format!("omega shape {i}: radius must be positive")));
                }
            }
            if s.holdall_clearance(holdall) < MIN_CLEARANCE {
                return Err(Error::InvalidInput(format!("omega shape {i} is too close to the hold-all boundary")));
            }
        }
        for i in 0..shapes.len() {
            for j in 0..shapes.len() {
                if i == j {
                    continue;
                }
                let samples = shapes[i].boundary_samples(256);
                let inside = samples.iter().filter(|&&p| shapes[j].contains(p)).count();
                if inside != 0 && inside != samples.len() {
                    return Err(Error::InvalidInput(format!("omega shapes {i} and {j} overlap without nesting")));
                }
            }
        }
        Ok(Self { holdall, shapes, added: vec![], removed: vec![] })
    }

    /// Ω = ∅.
    pub fn empty(holdall: HoldAll) -> Self {
        Self { holdall, shapes: vec![], added: vec![], removed: vec![] }
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn contains(&self, x: Point) -> bool {
        let base = self.shapes.iter().chain(&self.added).any(|s| s.contains(x));
        base && !self.removed.iter().any(|s| s.contains_closed(x))
    }

    /// Conservative distance from `x` to ∂Ω (minimum over component boundaries).
    pub fn boundary_distance(&self, x: Point) -> f64 {
        self.components().map(|s| s.boundary_distance(x)).fold(f64::INFINITY, f64::min)
    }

    fn components(&self) -> impl Iterator<Item = &Shape> {
        self.shapes.iter().chain(&self.added).chain(&self.removed)
    }

    /// Area via the exact shape areas when the components are disjoint
    /// originals; perturbed regions should be measured by quadrature.
    pub fn nominal_area(&self) -> f64 {
        self.shapes.iter().map(Shape::area).sum()
    }
}

impl Indicator for Region {
    fn contains(&self, x: Point) -> bool {
        Region::contains(self, x)
    }

    fn crosses(&self, tri: &[Point; 3]) -> Option<bool> {
        Some(self.components().any(|s| s.crosses(tri)))
    }
}

/// Reference shape ω of a scaled seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaShape {
    /// Unit ball, |ω| = π.
    Ball,
    /// Centered axis-aligned square of side 2, |ω| = 4.
    Square,
}

impl OmegaShape {
    pub fn measure(self) -> f64 {
        match self {
            OmegaShape::Ball => PI,
            OmegaShape::Square => 4.0,
        }
    }

    /// Largest |y| over ω.
    pub fn reach(self) -> f64 {
        match self {
            OmegaShape::Ball => 1.0,
            OmegaShape::Square => std::f64::consts::SQRT_2,
        }
    }

    pub fn contains(self, y: Point) -> bool {
        match self {
            OmegaShape::Ball => norm(y) < 1.0,
            OmegaShape::Square => y[0].abs() < 1.0 && y[1].abs() < 1.0,
        }
    }

    /// `x0 + ε ω` as a shape.
    pub fn scaled(self, x0: Point, eps: f64) -> Shape {
        match self {
            OmegaShape::Ball => Shape::Disk { center: x0, radius: eps },
            OmegaShape::Square => Shape::square(x0, eps),
        }
    }
}

/// Kind of the perturbation seed E.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedKind {
    Point { center: Point },
    Circle { center: Point, radius: f64 },
    Scaled { center: Point, omega: OmegaShape },
}

/// The compact seed E with its clearances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionSeed {
    pub kind: SeedKind,
    /// Distance from E to ∂Ω.
    pub clearance_region: f64,
    /// Distance from E to ∂D.
    pub clearance_holdall: f64,
}

/// How strictly `dilate` checks the size of ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    /// The dilated set reaches at most half the clearance to ∂Ω and ∂D.
    #[default]
    Strict,
    /// The dilated set only has to stay inside D; it may overlap ∂Ω.
    HoldAll,
}

impl InclusionSeed {
    pub fn new(kind: SeedKind, region: &Region) -> Result<Self> {
        let (clearance_region, clearance_holdall) = match kind {
            SeedKind::Point { center } | SeedKind::Scaled { center, .. } => {
                (region.boundary_distance(center), region.holdall.boundary_distance(center))
            }
            SeedKind::Circle { center, radius } => {
                if radius <= 0.0 {
                    return Err(Error::InvalidInput("seed radius must be positive".into()));
                }
                let cr = region.components().map(|s| circle_to_boundary(center, radius, s)).fold(f64::INFINITY, f64::min);
                (cr, region.holdall.boundary_distance(center) - radius)
            }
        };
        if clearance_holdall < MIN_CLEARANCE {
            return Err(Error::InvalidInput("seed is too close to the hold-all boundary".into()));
        }
        if clearance_region < MIN_CLEARANCE {
            return Err(Error::SeedStraddlesBoundary);
        }
        Ok(Self { kind, clearance_region, clearance_holdall })
    }

    pub fn center(&self) -> Point {
        match self.kind {
            SeedKind::Point { center } | SeedKind::Circle { center, .. } | SeedKind::Scaled { center, .. } => center,
        }
    }

    /// Any point of E.
    fn representative(&self) -> Point {
        match self.kind {
            SeedKind::Circle { center, radius } => [center[0] + radius, center[1]],
            _ => self.center(),
        }
    }

    /// Largest ε allowed by `policy`.
    pub fn max_eps(&self, policy: Admissibility) -> f64 {
        let reach = match self.kind {
            SeedKind::Scaled { omega, .. } => omega.reach(),
            _ => 1.0,
        };
        match policy {
            Admissibility::Strict => 0.5 * self.clearance_region.min(self.clearance_holdall) / reach,
            Admissibility::HoldAll => (self.clearance_holdall - MIN_CLEARANCE) / reach,
        }
    }

    /// Dilated set E_ε and its exact measure under the strict policy.
    pub fn dilate(&self, eps: f64) -> Result<Dilation> {
        self.dilate_with(eps, Admissibility::Strict)
    }

    pub fn dilate_with(&self, eps: f64, policy: Admissibility) -> Result<Dilation> {
        let limit = self.max_eps(policy);
        if !(eps > 0.0 && eps < limit) {
            return Err(Error::EpsilonTooLarge { eps, limit });
        }
        let (shape, measure) = match self.kind {
            SeedKind::Point { center } => (Shape::Disk { center, radius: eps }, PI * eps * eps),
            SeedKind::Circle { center, radius } => {
                if eps >= radius {
                    return Err(Error::EpsilonTooLarge { eps, limit: radius });
                }
                (Shape::Annulus { center, inner: radius - eps, outer: radius + eps }, 4.0 * PI * radius * eps)
            }
            SeedKind::Scaled { center, omega } => (omega.scaled(center, eps), eps * eps * omega.measure()),
        };
        Ok(Dilation { shape, measure })
    }
}

fn circle_to_boundary(c: Point, r: f64, s: &Shape) -> f64 {
    let circle_circle = |c2: Point, r2: f64| {
        let d = dist(c, c2);
        if d >= r + r2 {
            d - r - r2
        } else if d <= (r - r2).abs() {
            (r - r2).abs() - d
        } else {
            0.0
        }
    };
    match s {
        Shape::Disk { center, radius } => circle_circle(*center, *radius),
        Shape::Annulus { center, inner, outer } => circle_circle(*center, *inner).min(circle_circle(*center, *outer)),
        Shape::Polygon { vertices } => {
            let n = vertices.len();
            (0..n)
                .map(|i| {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let dmin = segment_distance(c, a, b);
                    let dmax = dist(c, a).max(dist(c, b));
                    if dmin <= r && r <= dmax {
                        0.0
                    } else {
                        (dmin - r).abs().min((dmax - r).abs())
                    }
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// The dilated set E_ε with its exact measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    pub shape: Shape,
    pub measure: f64,
}

/// sgn_Ω(E): +1 when E lies outside the closure of Ω, −1 when inside.
pub fn sign_of(region: &Region, seed: &InclusionSeed) -> Result<f64> {
    let probe = seed.representative();
    let clearance = match seed.kind {
        SeedKind::Circle { center, radius } => {
            region.components().map(|s| circle_to_boundary(center, radius, s)).fold(f64::INFINITY, f64::min)
        }
        _ => region.boundary_distance(probe),
    };
    if clearance <= 0.0 {
        return Err(Error::SeedStraddlesBoundary);
    }
    Ok(if region.contains(probe) { -1.0 } else { 1.0 })
}

/// The perturbed region Ω(E_ε).
pub fn perturb_region(region: &Region, seed: &InclusionSeed, eps: f64, policy: Admissibility) -> Result<Region> {
    let s = sign_of(region, seed)?;
    let d = seed.dilate_with(eps, policy)?;
    let mut out = region.clone();
    if s > 0.0 {
        out.added.push(d.shape);
    } else {
        out.removed.push(d.shape);
    }
    Ok(out)
}

/// What a limit measure is concentrated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureKind {
    Dirac { at: Point },
    Curve { center: Point, radius: f64 },
}

/// A probability measure realized by weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRHS {
    pub kind: MeasureKind,
    pub atoms: Vec<(Point, f64)>,
}

impl MeasureRHS {
    pub fn dirac(at: Point) -> Self {
        Self { kind: MeasureKind::Dirac { at }, atoms: vec![(at, 1.0)] }
    }

    /// Normalized arc length on a circle, `n` equal-weight nodes.
    pub fn circle(center: Point, radius: f64, n: usize) -> Self {
        let w = 1.0 / n as f64;
        let atoms = circle_points(center, radius, n).into_iter().map(|p| (p, w)).collect();
        Self { kind: MeasureKind::Curve { center, radius }, atoms }
    }

    /// ⟨φ, μ⟩.
    pub fn pair(&self, phi: impl Fn(Point) -> f64) -> f64 {
        self.atoms.iter().map(|&(p, w)| w * phi(p)).sum()
    }
}

/// The limit measure μ_E of `χ_{E_ε}/|E_ε|`.
pub fn limit_measure(seed: &InclusionSeed, arc_nodes: usize) -> Result<MeasureRHS> {
    match seed.kind {
        SeedKind::Point { center } => Ok(MeasureRHS::dirac(center)),
        SeedKind::Circle { center, radius } => Ok(MeasureRHS::circle(center, radius, arc_nodes)),
        SeedKind::Scaled { .. } => Err(Error::UnsupportedSeed("scaled shape".into())),
    }
}

/// `(1/|E_ε|) ∫_{E_ε} φ` by polar Gauss quadrature (tensor Gauss for the square).
pub fn dilation_average(seed: &InclusionSeed, eps: f64, phi: impl Fn(Point) -> f64) -> Result<f64> {
    let d = seed.dilate_with(eps, Admissibility::HoldAll)?;
    let n_theta = 256;
    let polar = |c: Point, r0: f64, r1: f64| {
        let mut s = 0.0;
        for (r, wr) in gauss_legendre_on(24, r0, r1) {
            let mut ring = 0.0;
            for k in 0..n_theta {
                let th = 2.0 * PI * k as f64 / n_theta as f64;
                ring += phi([c[0] + r * th.cos(), c[1] + r * th.sin()]);
            }
            s += wr * r * ring * 2.0 * PI / n_theta as f64;
        }
        s
    };
    let integral = match d.shape {
        Shape::Disk { center, radius } => polar(center, 0.0, radius),
        Shape::Annulus { center, inner, outer } => polar(center, inner, outer),
        Shape::Polygon { ref vertices } => {
            let (lo, hi) = (vertices[0], vertices[2]);
            let mut s = 0.0;
            for (x, wx) in gauss_legendre_on(24, lo[0], hi[0]) {
                for (y, wy) in gauss_legendre_on(24, lo[1], hi[1]) {
                    s += wx * wy * phi([x, y]);
                }
            }
            s
        }
    };
    Ok(integral / d.measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn omega() -> Region {
        Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.3, 0.4], radius: 0.15 }]).unwrap()
    }

    #[test]
    fn dilation_measures() {
        let r = omega();
        let p = InclusionSeed::new(SeedKind::Point { center: [0.7, 0.6] }, &r).unwrap();
        assert!((p.dilate(0.1).unwrap().measure - PI * 0.01).abs() < 1e-15);
        let c = InclusionSeed::new(SeedKind::Circle { center: [0.55, 0.55], radius: 0.3 }, &Region::empty(HoldAll::UnitSquare))
            .unwrap();
        let d = c.dilate(0.05).unwrap();
        assert!((d.measure - 0.188_495_559_215_387_6).abs() < 1e-12);
        assert!((d.measure - d.shape.area()).abs() < 1e-14);
        let s = InclusionSeed::new(SeedKind::Scaled { center: [0.7, 0.6], omega: OmegaShape::Square }, &r).unwrap();
        assert!((s.dilate(0.1).unwrap().measure - 0.04).abs() < 1e-15);
    }

    #[test]
    fn dilation_rejects_large_eps() {
        let r = omega();
        let p = InclusionSeed::new(SeedKind::Point { center: [0.6, 0.5] }, &r).unwrap();
        assert!(matches!(p.dilate(0.2), Err(Error::EpsilonTooLarge { .. })));
        assert!(p.dilate_with(0.2, Admissibility::HoldAll).is_ok());
    }

    #[test]
    fn signs() {
        let r = omega();
        let out = InclusionSeed::new(SeedKind::Point { center: [0.7, 0.6] }, &r).unwrap();
        let inside = InclusionSeed::new(SeedKind::Point { center: [0.3, 0.42] }, &r).unwrap();
        assert_eq!(sign_of(&r, &out).unwrap(), 1.0);
        assert_eq!(sign_of(&r, &inside).unwrap(), -1.0);
        let big = Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.5, 0.5], radius: 0.45 }]).unwrap();
        let circ = InclusionSeed::new(SeedKind::Circle { center: [0.5, 0.5], radius: 0.2 }, &big).unwrap();
        assert_eq!(sign_of(&big, &circ).unwrap(), -1.0);
        assert!(matches!(
            InclusionSeed::new(SeedKind::Circle { center: [0.5, 0.5], radius: 0.45 }, &big),
            Err(Error::SeedStraddlesBoundary)
        ));
    }

    #[test]
    fn sign_flips_under_mirrored_region() {
        let seed_at = [0.3, 0.4];
        let with = omega();
        let without = Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.7, 0.6], radius: 0.15 }]).unwrap();
        let s1 = InclusionSeed::new(SeedKind::Point { center: seed_at }, &with).unwrap();
        let s2 = InclusionSeed::new(SeedKind::Point { center: seed_at }, &without).unwrap();
        assert_eq!(sign_of(&with, &s1).unwrap(), -sign_of(&without, &s2).unwrap());
    }

    #[test]
    fn region_validation() {
        assert!(Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.1, 0.5], radius: 0.1 }]).is_err());
        let overlap = vec![
            Shape::Disk { center: [0.4, 0.5], radius: 0.15 },
            Shape::Disk { center: [0.6, 0.5], radius: 0.15 },
        ];
        assert!(Region::new(HoldAll::UnitSquare, overlap).is_err());
        let nested = vec![Shape::Disk { center: [0.5, 0.5], radius: 0.3 }, Shape::square([0.5, 0.5], 0.1)];
        assert!(Region::new(HoldAll::UnitSquare, nested).is_ok());
        assert!(Shape::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.5, 1.0]]).is_err());
    }

    #[test]
    fn limit_measures() {
        let r = Region::empty(HoldAll::UnitSquare);
        let p = InclusionSeed::new(SeedKind::Point { center: [0.5, 0.5] }, &r).unwrap();
        let m = limit_measure(&p, 64).unwrap();
        assert_eq!(m.atoms, vec![([0.5, 0.5], 1.0)]);
        let c = InclusionSeed::new(SeedKind::Circle { center: [0.5, 0.5], radius: 0.3 }, &r).unwrap();
        let m = limit_measure(&c, 64).unwrap();
        assert_eq!(m.atoms.len(), 64);
        for (x, w) in &m.atoms {
            assert_eq!(*w, 1.0 / 64.0);
            assert!((dist(*x, [0.5, 0.5]) - 0.3).abs() < 1e-12);
        }
        assert!((m.pair(|_| 1.0) - 1.0).abs() < 1e-15);
        let s = InclusionSeed::new(SeedKind::Scaled { center: [0.5, 0.5], omega: OmegaShape::Ball }, &r).unwrap();
        assert!(matches!(limit_measure(&s, 64), Err(Error::UnsupportedSeed(_))));
    }

    #[test]
    fn averages_converge_to_measure_pairing() {
        let r = Region::empty(HoldAll::UnitSquare);
        let phi = |x: Point| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + x[0] * x[0];
        let p = InclusionSeed::new(SeedKind::Point { center: [0.45, 0.55] }, &r).unwrap();
        let c = InclusionSeed::new(SeedKind::Circle { center: [0.5, 0.5], radius: 0.25 }, &r).unwrap();
        for seed in [p, c] {
            let target = limit_measure(&seed, DEFAULT_ARC_NODES).unwrap().pair(phi);
            let errs: Vec<f64> = [0.2, 0.14, 0.1, 0.07, 0.05]
                .iter()
                .map(|&e| (dilation_average(&seed, e, phi).unwrap() - target).abs())
                .collect();
            for k in 1..errs.len() {
                assert!(errs[k] <= 0.7 * errs[k - 1], "{errs:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn perturbed_indicator_is_set_algebra(xs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 200), eps in 0.01f64..0.07) {
            let r = omega();
            let out = InclusionSeed::new(SeedKind::Point { center: [0.7, 0.6] }, &r).unwrap();
            let inn = InclusionSeed::new(SeedKind::Point { center: [0.3, 0.4] }, &r).unwrap();
            let ro = perturb_region(&r, &out, eps, Admissibility::Strict).unwrap();
            let ri = perturb_region(&r, &inn, eps, Admissibility::Strict).unwrap();
            let eo = out.dilate(eps).unwrap().shape;
            let ei = inn.dilate(eps).unwrap().shape;
            for (x, y) in xs {
                let p = [x, y];
                prop_assert_eq!(ro.contains(p), r.contains(p) || eo.contains(p));
                prop_assert_eq!(ri.contains(p), r.contains(p) && !ei.contains_closed(p));
            }
        }

        #[test]
        fn crossing_test_agrees_with_sampling(cx in 0.2f64..0.8, cy in 0.2f64..0.8, rad in 0.05f64..0.3, t in 0usize..256) {
            let m = crate::mesh::Mesh::unit_square(8);
            for shape in [Shape::Disk { center: [cx, cy], radius: rad }, Shape::square([cx, cy], rad)] {
                let tri = m.corners(t);
                if !shape.crosses(&tri) {
                    let c = shape.contains(tri[0]);
                    for i in 0..=10 {
                        for j in 0..=(10 - i) {
                            let l = [i as f64 / 10.0, j as f64 / 10.0, 1.0 - (i + j) as f64 / 10.0];
                            let p = m.point_at(t, l);
                            prop_assert_eq!(shape.contains(p), c);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn symmetric_difference_shrinks() {
        let m = crate::mesh::Mesh::unit_square(64);
        let r = omega();
        let seed = InclusionSeed::new(SeedKind::Point { center: [0.7, 0.6] }, &r).unwrap();
        for eps in [0.08, 0.04, 0.02] {
            let pr = perturb_region(&r, &seed, eps, Admissibility::Strict).unwrap();
            let ind = |x: Point| pr.contains(x) != r.contains(x);
            let q = crate::mesh::cut_cell_quadrature(&m, &ind, 4);
            let area = q.integrate_inside(|_| 1.0);
            assert!(area < 2.0 * PI * eps * eps);
        }
    }
}
