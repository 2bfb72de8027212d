//! Sub-element quadrature for integrands with a jump across a curve.

use super::{bary_to_point, Mesh, QuadratureRule};
use crate::Point;

pub const DEFAULT_CUT_DEPTH: usize = 4;

/// Membership test for a set, with an optional exact crossing test.
pub trait Indicator: Sync {
    fn contains(&self, x: Point) -> bool;

    /// Whether the boundary of the set meets the closed triangle. `None`
    /// means unknown, in which case vertex and edge samples decide.
    fn crosses(&self, _tri: &[Point; 3]) -> Option<bool> {
        None
    }
}

impl<F: Fn(Point) -> bool + Sync> Indicator for F {
    fn contains(&self, x: Point) -> bool {
        self(x)
    }
}

/// A weighted point with its in/out flag. `weight` is the physical weight
/// (already multiplied by the area factor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: Point,
    pub bary: [f64; 3],
    pub weight: f64,
    pub inside: bool,
}

/// Per-triangle point sets.
#[derive(Debug, Clone)]
pub struct CutQuadrature {
    offsets: Vec<usize>,
    points: Vec<QuadPoint>,
    cut: Vec<bool>,
}

impl CutQuadrature {
    pub fn points(&self, t: usize) -> &[QuadPoint] {
        &self.points[self.offsets[t]..self.offsets[t + 1]]
    }

    /// Whether triangle `t` was subdivided.
    pub fn is_cut(&self, t: usize) -> bool {
        self.cut[t]
    }

    pub fn n_triangles(&self) -> usize {
        self.cut.len()
    }

    /// Integral of `f·χ`.
    pub fn integrate_inside(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().filter(|q| q.inside).map(|q| q.weight * f(q.x)).sum()
    }
}

/// Builds the cut-cell point sets for `indicator` on `mesh`.
///
/// Uncut triangles carry the degree-4 rule. Cut triangles are quadrisected
/// `depth` times; uniform children keep the degree-4 rule and leaves that
/// remain cut use the degree-2 rule classified by their centroid.
pub fn cut_cell_quadrature(mesh: &Mesh, indicator: &dyn Indicator, depth: usize) -> CutQuadrature {
    assert!(depth <= 6, "cut depth must lie in [0, 6]");
    let fine = QuadratureRule::dunavant4();
    let leaf = QuadratureRule::three_point();
    let mut offsets = Vec::with_capacity(mesh.n_triangles() + 1);
    let mut points = Vec::with_capacity(mesh.n_triangles() * fine.len());
    let mut cut = Vec::with_capacity(mesh.n_triangles());
    offsets.push(0);
    for t in 0..mesh.n_triangles() {
        let corners = mesh.corners(t);
        let whole = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        match classify(&corners, &whole, indicator) {
            Some(inside) => {
                push_rule(&mut points, &corners, &whole, &fine, inside, mesh.geom(t).area);
                cut.push(false);
            }
            None => {
                subdivide(&mut points, &corners, whole, indicator, depth, &fine, &leaf, mesh.geom(t).area);
                cut.push(true);
            }
        }
        offsets.push(points.len());
    }
    CutQuadrature { offsets, points, cut }
}

/// `Some(inside)` when the sub-cell `sub` (given by barycentric corners of
/// the parent) lies on one side of the interface.
fn classify(parent: &[Point; 3], sub: &[[f64; 3]; 3], indicator: &dyn Indicator) -> Option<bool> {
    let p = sub.map(|l| bary_to_point(parent, l));
    let centre = indicator.contains([(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]);
    if let Some(c) = indicator.crosses(&p) {
        return if c { None } else { Some(centre) };
    }
    for k in 0..3 {
        let (a, b) = (p[k], p[(k + 1) % 3]);
        for s in [0.0, 1.0 / 3.0, 2.0 / 3.0] {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            if indicator.contains(x) != centre {
                return None;
            }
        }
    }
    Some(centre)
}

fn push_rule(
    out: &mut Vec<QuadPoint>,
    parent: &[Point; 3],
    sub: &[[f64; 3]; 3],
    rule: &QuadratureRule,
    inside: bool,
    sub_area: f64,
) {
    for (q, &w) in rule.points.iter().zip(&rule.weights) {
        let bary = combine(sub, *q);
        out.push(QuadPoint { x: bary_to_point(parent, bary), bary, weight: 2.0 * sub_area * w, inside });
    }
}

fn push_classified(
    out: &mut Vec<QuadPoint>,
    parent: &[Point; 3],
    sub: &[[f64; 3]; 3],
    rule: &QuadratureRule,
    indicator: &dyn Indicator,
    sub_area: f64,
) {
    let c = combine(sub, [1.0 / 3.0; 3]);
    let inside = indicator.contains(bary_to_point(parent, c));
    push_rule(out, parent, sub, rule, inside, sub_area);
}

fn combine(sub: &[[f64; 3]; 3], q: [f64; 3]) -> [f64; 3] {
    let mut l = [0.0; 3];
    for k in 0..3 {
        for (i, li) in l.iter_mut().enumerate() {
            *li += q[k] * sub[k][i];
        }
    }
    l
}

#[allow(clippy::too_many_arguments)]
fn subdivide(
    out: &mut Vec<QuadPoint>,
    parent: &[Point; 3],
    sub: [[f64; 3]; 3],
    indicator: &dyn Indicator,
    depth: usize,
    fine: &QuadratureRule,
    leaf: &QuadratureRule,
    area: f64,
) {
    if depth == 0 {
        push_classified(out, parent, &sub, leaf, indicator, area);
        return;
    }
    let mid = |a: [f64; 3], b: [f64; 3]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0];
    let [a, b, c] = sub;
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    for child in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]] {
        match classify(parent, &child, indicator) {
            Some(inside) => push_rule(out, parent, &child, fine, inside, area / 4.0),
            None => subdivide(out, parent, child, indicator, depth - 1, fine, leaf, area / 4.0),
        }
    }
}
