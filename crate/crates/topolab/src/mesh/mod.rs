//! Conforming triangulations of the hold-all domain.

mod cutcell;
mod quadrature;

pub use cutcell::{cut_cell_quadrature, CutQuadrature, Indicator, QuadPoint, DEFAULT_CUT_DEPTH};
pub use quadrature::QuadratureRule;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::{cross, sub, Error, Point, Result};

/// Barycentric tolerance used by point location.
pub const LOCATE_TOL: f64 = 1e-10;

/// What the mesh discretizes; the disk tag enables boundary projection on
/// refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldAll {
    UnitDisk,
    UnitSquare,
}

impl HoldAll {
    pub fn area(self) -> f64 {
        match self {
            HoldAll::UnitDisk => std::f64::consts::PI,
            HoldAll::UnitSquare => 1.0,
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(self, x: Point) -> f64 {
        match self {
            HoldAll::UnitDisk => 1.0 - crate::norm(x),
            HoldAll::UnitSquare => x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]),
        }
    }

    pub fn contains(self, x: Point) -> bool {
        self.boundary_distance(x) > 0.0
    }
}

/// Per-triangle geometry used by assembly.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub area: f64,
    /// Gradients of the three barycentric basis functions.
    pub grads: [Point; 3],
    pub diameter: f64,
}

#[derive(Debug, Clone)]
struct Grid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

/// Conforming, positively oriented triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    neighbors: Vec<[Option<usize>; 3]>,
    geom: Vec<TriGeom>,
    tag: Option<HoldAll>,
    h: f64,
    grid: Grid,
}

impl Mesh {
    /// Builds a mesh from raw parts. Boundary flags are supplied by the
    /// caller; orientation and conformity are checked.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        tag: Option<HoldAll>,
    ) -> Result<Self> {
        if boundary.len() != vertices.len() {
            return Err(Error::InvalidInput("boundary flag count differs from vertex count".into()));
        }
        let mut geom = Vec::with_capacity(triangles.len());
        let mut h: f64 = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!("triangle {t} references a missing vertex")));
            }
            let g = tri_geom([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if g.area <= 0.0 {
                return Err(Error::InvalidInput(format!("triangle {t} is not positively oriented")));
            }
            h = h.max(g.diameter);
            geom.push(g);
        }
        let neighbors = build_neighbors(&triangles)?;
        let grid = build_grid(&vertices, &triangles);
        Ok(Self { vertices, triangles, boundary, neighbors, geom, tag, h, grid })
    }

    /// Crisscross triangulation of the unit square with `n` cells per side.
    ///
    /// Each cell is split into four triangles by its center, giving `4n²`
    /// triangles and `(n+1)² + n²` vertices.
    pub fn unit_square(n: usize) -> Self {
        assert!(n >= 1, "unit_square needs n >= 1");
        let hn = 1.0 / n as f64;
        let corner = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
        let mut boundary = Vec::with_capacity(vertices.capacity());
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * hn, j as f64 * hn]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let first_center = vertices.len();
        for j in 0..n {
            for i in 0..n {
                vertices.push([(i as f64 + 0.5) * hn, (j as f64 + 0.5) * hn]);
                boundary.push(false);
            }
        }
        let mut triangles = Vec::with_capacity(4 * n * n);
        for j in 0..n {
            for i in 0..n {
                let m = first_center + j * n + i;
                let c = [corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1)];
                for k in 0..4 {
                    triangles.push([c[k], c[(k + 1) % 4], m]);
                }
            }
        }
        Self::new(vertices, triangles, boundary, Some(HoldAll::UnitSquare))
            .expect("square mesh construction is valid")
    }

    /// Ring triangulation of the unit disk: a center vertex and `6k`
    /// equispaced vertices on ring `k = 1..=n_rings` of radius `k/n_rings`.
    pub fn unit_disk(n_rings: usize) -> Self {
        assert!(n_rings >= 2, "unit_disk needs n_rings >= 2");
        let n = n_rings;
        let mut vertices = vec![[0.0, 0.0]];
        let mut boundary = vec![false];
        let ring_start = |k: usize| if k == 0 { 0 } else { 1 + 3 * k * (k - 1) };
        for k in 1..=n {
            let r = k as f64 / n as f64;
            let m = 6 * k;
            for j in 0..m {
                let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                let p = if k == n { [th.cos(), th.sin()] } else { [r * th.cos(), r * th.sin()] };
                vertices.push(p);
                boundary.push(k == n);
            }
        }
        let mut triangles = Vec::with_capacity(6 * n * n);
        for k in 1..=n {
            let outer = |j: usize| ring_start(k) + j % (6 * k);
            if k == 1 {
                for j in 0..6 {
                    triangles.push([0, outer(j), outer(j + 1)]);
                }
                continue;
            }
            let inner = |i: usize| ring_start(k - 1) + i % (6 * (k - 1));
            let (mi, mo) = (6 * (k - 1), 6 * k);
            let (mut i, mut j) = (0, 0);
            while i < mi || j < mo {
                // Advance along whichever ring has the next node at the smaller angle.
                let take_outer = i == mi || (j < mo && (j + 1) * (k - 1) <= (i + 1) * k);
                if take_outer {
                    triangles.push([inner(i), outer(j), outer(j + 1)]);
                    j += 1;
                } else {
                    triangles.push([inner(i), outer(j), inner(i + 1)]);
                    i += 1;
                }
            }
        }
        Self::new(vertices, triangles, boundary, Some(HoldAll::UnitDisk))
            .expect("disk mesh construction is valid")
    }

    /// Mesh for a hold-all tag at resolution `n` (cells per side or rings).
    pub fn for_holdall(holdall: HoldAll, n: usize) -> Self {
        match holdall {
            HoldAll::UnitDisk => Self::unit_disk(n),
            HoldAll::UnitSquare => Self::unit_square(n),
        }
    }

    /// Splits every triangle into four by its edge midpoints. Boundary
    /// midpoints are projected onto the unit circle for disk meshes.
    pub fn refine_uniform(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut boundary = self.boundary.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                m[k] = *mid.entry(key).or_insert_with(|| {
                    let on_boundary = self.neighbors[t][k].is_none();
                    let (pa, pb) = (self.vertices[a], self.vertices[b]);
                    let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    if on_boundary && self.tag == Some(HoldAll::UnitDisk) {
                        let r = crate::norm(p);
                        p = [p[0] / r, p[1] / r];
                    }
                    vertices.push(p);
                    boundary.push(on_boundary);
                    vertices.len() - 1
                });
            }
            // m[k] is the midpoint of the edge opposite vertex k.
            let [a, b, c] = *tri;
            triangles.push([a, m[2], m[1]]);
            triangles.push([m[2], b, m[0]]);
            triangles.push([m[1], m[0], c]);
            triangles.push([m[0], m[1], m[2]]);
        }
        Self::new(vertices, triangles, boundary, self.tag).expect("refinement preserves validity")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    pub fn geom(&self, t: usize) -> &TriGeom {
        &self.geom[t]
    }

    pub fn tag(&self) -> Option<HoldAll> {
        self.tag
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Maximum triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn total_area(&self) -> f64 {
        self.geom.iter().map(|g| g.area).sum()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let p = self.corners(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    /// Physical point of barycentric coordinates `l` in triangle `t`.
    pub fn point_at(&self, t: usize, l: [f64; 3]) -> Point {
        bary_to_point(&self.corners(t), l)
    }

    /// Finds a triangle containing `x` (lowest id on ties) and the clamped
    /// barycentric coordinates of `x` in it.
    pub fn locate_point(&self, x: Point) -> Result<(usize, [f64; 3])> {
        let g = &self.grid;
        let fx = (x[0] - g.origin[0]) / g.cell;
        let fy = (x[1] - g.origin[1]) / g.cell;
        let slack = 1e-9 / g.cell;
        if !(fx >= -slack && fy >= -slack && fx <= g.nx as f64 + slack && fy <= g.ny as f64 + slack) {
            return Err(Error::PointOutsideMesh(x[0], x[1]));
        }
        let i = (fx.max(0.0) as usize).min(g.nx - 1);
        let j = (fy.max(0.0) as usize).min(g.ny - 1);
        for &t in &g.buckets[j * g.nx + i] {
            let l = barycentric(&self.corners(t as usize), x);
            if l.iter().all(|&v| v >= -LOCATE_TOL) {
                return Ok((t as usize, clamp_bary(l)));
            }
        }
        Err(Error::PointOutsideMesh(x[0], x[1]))
    }

    /// Index of a vertex within `tol` of `x`, if any.
    pub fn vertex_near(&self, x: Point, tol: f64) -> Option<usize> {
        let (t, _) = self.locate_point(x).ok()?;
        self.triangles[t].iter().copied().find(|&v| crate::dist(self.vertices[v], x) <= tol)
    }

    /// Writes the plain-text mesh format.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut s = String::new();
        writeln!(s, "vertices {} triangles {}", self.vertices.len(), self.triangles.len()).ok();
        for (p, &b) in self.vertices.iter().zip(&self.boundary) {
            writeln!(s, "{:.16e} {:.16e} {}", p[0], p[1], u8::from(b)).ok();
        }
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).ok();
        }
        w.write_all(s.as_bytes())
    }

    /// Reads the plain-text mesh format. The hold-all tag is not stored in
    /// the format and must be supplied.
    pub fn read_text(r: impl BufRead, tag: Option<HoldAll>) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("mesh text: {m}"));
        let mut lines = r.lines().map_while(|l| l.ok()).filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "vertices" || h[2] != "triangles" {
            return Err(bad("malformed header"));
        }
        let nv: usize = h[1].parse().map_err(|_| bad("vertex count"))?;
        let nt: usize = h[3].parse().map_err(|_| bad("triangle count"))?;
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = lines.next().ok_or_else(|| bad("truncated vertex list"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("vertex line"));
            }
            let x: f64 = f[0].parse().map_err(|_| bad("coordinate"))?;
            let y: f64 = f[1].parse().map_err(|_| bad("coordinate"))?;
            vertices.push([x, y]);
            boundary.push(f[2] == "1");
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = lines.next().ok_or_else(|| bad("truncated triangle list"))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("index")))
                .collect::<Result<_>>()?;
            if idx.len() != 3 {
                return Err(bad("triangle line"));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        Self::new(vertices, triangles, boundary, tag)
    }
}

pub(crate) fn bary_to_point(p: &[Point; 3], l: [f64; 3]) -> Point {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

/// Unclamped barycentric coordinates of `x` with respect to `p`.
pub(crate) fn barycentric(p: &[Point; 3], x: Point) -> [f64; 3] {
    let det = cross(sub(p[1], p[0]), sub(p[2], p[0]));
    let l1 = cross(sub(x, p[0]), sub(p[2], p[0])) / det;
    let l2 = cross(sub(p[1], p[0]), sub(x, p[0])) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn clamp_bary(l: [f64; 3]) -> [f64; 3] {
    let c = l.map(|v| v.clamp(0.0, 1.0));
    let s = c[0] + c[1] + c[2];
    c.map(|v| v / s)
}

pub(crate) fn tri_geom(p: [Point; 3]) -> TriGeom {
    let det = cross(sub(p[1], p[0]), sub(p[2], p[0]));
    let area = 0.5 * det;
    // ∇λ_k = rot(edge opposite k) / det
    let mut grads = [[0.0; 2]; 3];
    for k in 0..3 {
        let a = p[(k + 1) % 3];
        let b = p[(k + 2) % 3];
        grads[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    let diameter = crate::dist(p[0], p[1]).max(crate::dist(p[1], p[2])).max(crate::dist(p[2], p[0]));
    TriGeom { area, grads, diameter }
}

fn build_neighbors(triangles: &[[usize; 3]]) -> Result<Vec<[Option<usize>; 3]>> {
    let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(3 * triangles.len() / 2);
    let mut neighbors = vec![[None; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            match edges.remove(&key) {
                Some((s, ks)) => {
                    if triangles[s][(ks + 1) % 3] != b {
                        return Err(Error::InvalidInput(format!(
                            "triangles {s} and {t} share an edge with equal orientation"
                        )));
                    }
                    neighbors[t][k] = Some(s);
                    neighbors[s][ks] = Some(t);
                }
                None => {
                    edges.insert(key, (t, k));
                }
            }
        }
    }
    Ok(neighbors)
}

fn build_grid(vertices: &[Point], triangles: &[[usize; 3]]) -> Grid {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in vertices {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let w = (hi[0] - lo[0]).max(1e-12);
    let hgt = (hi[1] - lo[1]).max(1e-12);
    let target = (triangles.len().max(1) as f64 / 2.0).sqrt().ceil();
    let cell = w.max(hgt) / target;
    let nx = ((w / cell).ceil() as usize).max(1);
    let ny = ((hgt / cell).ceil() as usize).max(1);
    let mut buckets = vec![Vec::new(); nx * ny];
    let slack = 1e-9;
    for (t, tri) in triangles.iter().enumerate() {
        let mut blo = [f64::INFINITY; 2];
        let mut bhi = [f64::NEG_INFINITY; 2];
        for &v in tri {
            for d in 0..2 {
                blo[d] = blo[d].min(vertices[v][d]);
                bhi[d] = bhi[d].max(vertices[v][d]);
            }
        }
        let i0 = (((blo[0] - slack - lo[0]) / cell).floor().max(0.0) as usize).min(nx - 1);
        let i1 = (((bhi[0] + slack - lo[0]) / cell).floor().max(0.0) as usize).min(nx - 1);
        let j0 = (((blo[1] - slack - lo[1]) / cell).floor().max(0.0) as usize).min(ny - 1);
        let j1 = (((bhi[1] + slack - lo[1]) / cell).floor().max(0.0) as usize).min(ny - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                buckets[j * nx + i].push(t as u32);
            }
        }
    }
    Grid { origin: lo, cell, nx, ny, buckets }
}
