//! Assembly of stiffness, reaction and load terms.

use super::field::Field;
use super::sparse::CsrMatrix;
use crate::geometry::MeasureRHS;
use crate::mesh::{CutQuadrature, Mesh, QuadPoint, QuadratureRule};
use crate::{dot, Error, Point, Result};

/// Snapping distance for point loads.
pub const SNAP_TOL: f64 = 1e-9;

/// Stiffness matrix with an elementwise constant coefficient `coef(t)`.
pub fn stiffness(mesh: &Mesh, coef: impl Fn(usize) -> f64) -> CsrMatrix {
    let mut a = CsrMatrix::from_mesh(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.geom(t);
        let c = coef(t) * g.area;
        let mut local = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                local[i][j] = c * dot(g.grads[i], g.grads[j]);
            }
        }
        a.add_element(tri, &local);
    }
    a
}

/// `∫ β ∇φ_i·∇φ_j` with β = `beta_in` on flagged points and `beta_out`
/// elsewhere, integrated by the cut-cell rule.
pub fn assemble_diffusion(mesh: &Mesh, quad: &CutQuadrature, beta_in: f64, beta_out: f64) -> CsrMatrix {
    stiffness(mesh, |t| {
        let s: f64 = quad.points(t).iter().map(|q| q.weight * if q.inside { beta_in } else { beta_out }).sum();
        s / mesh.geom(t).area
    })
}

/// Weighted mass matrix with the degree-4 rule.
pub fn mass(mesh: &Mesh, w: impl Fn(Point) -> f64) -> CsrMatrix {
    let rule = QuadratureRule::dunavant4();
    let mut m = CsrMatrix::from_mesh(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.geom(t).area;
        let mut local = [[0.0; 3]; 3];
        for (l, &wq) in rule.points.iter().zip(&rule.weights) {
            let c = 2.0 * area * wq * w(mesh.point_at(t, *l));
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] += c * l[i] * l[j];
                }
            }
        }
        m.add_element(tri, &local);
    }
    m
}

/// `∫ W φ_i φ_j` for a nodal weight `W ≥ 0`.
pub fn assemble_reaction(w: &Field) -> Result<CsrMatrix> {
    if let Some(&bad) = w.values().iter().find(|&&v| v < -1e-12) {
        return Err(Error::NegativeWeight(bad));
    }
    let mesh = w.mesh();
    let rule = QuadratureRule::dunavant4();
    let mut m = CsrMatrix::from_mesh(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.geom(t).area;
        let mut local = [[0.0; 3]; 3];
        for (l, &wq) in rule.points.iter().zip(&rule.weights) {
            let c = 2.0 * area * wq * w.eval_in(t, *l);
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] += c * l[i] * l[j];
                }
            }
        }
        m.add_element(tri, &local);
    }
    Ok(m)
}

/// `∫ W φ_i φ_j` with `W` given at the cut-cell points.
pub fn reaction_from_points(mesh: &Mesh, quad: &CutQuadrature, w: impl Fn(usize, &QuadPoint) -> f64) -> CsrMatrix {
    let mut m = CsrMatrix::from_mesh(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut local = [[0.0; 3]; 3];
        for q in quad.points(t) {
            let c = q.weight * w(t, q);
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] += c * q.bary[i] * q.bary[j];
                }
            }
        }
        m.add_element(tri, &local);
    }
    m
}

/// `∫ f φ_i` with `f` given at the cut-cell points.
pub fn load_from_points(mesh: &Mesh, quad: &CutQuadrature, f: impl Fn(usize, &QuadPoint) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for q in quad.points(t) {
            let c = q.weight * f(t, q);
            for k in 0..3 {
                b[tri[k]] += c * q.bary[k];
            }
        }
    }
    b
}

/// `∫ (f_in χ_Ω + f_out χ_{D∖Ω}) φ_i`.
pub fn assemble_load(mesh: &Mesh, quad: &CutQuadrature, f_in: f64, f_out: f64) -> Vec<f64> {
    load_from_points(mesh, quad, |_, q| if q.inside { f_in } else { f_out })
}

/// `∫ f φ_i` for a smooth `f` with the degree-4 rule.
pub fn load_smooth(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let rule = QuadratureRule::dunavant4();
    let mut b = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.geom(t).area;
        for (l, &wq) in rule.points.iter().zip(&rule.weights) {
            let c = 2.0 * area * wq * f(mesh.point_at(t, *l));
            for k in 0..3 {
                b[tri[k]] += c * l[k];
            }
        }
    }
    b
}

/// Point load `s(x) φ_i(x)`; `x` snaps to a vertex within `SNAP_TOL`.
pub fn point_load(mesh: &Mesh, x: Point, s: f64, b: &mut [f64]) -> Result<()> {
    if let Some(v) = mesh.vertex_near(x, SNAP_TOL) {
        b[v] += s;
        return Ok(());
    }
    let (t, l) = mesh.locate_point(x)?;
    let tri = mesh.triangles()[t];
    for k in 0..3 {
        b[tri[k]] += s * l[k];
    }
    Ok(())
}

/// `⟨strength φ_i, μ⟩`.
pub fn assemble_measure_load(mesh: &Mesh, mu: &MeasureRHS, strength: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    let mut b = vec![0.0; mesh.n_vertices()];
    for &(x, w) in &mu.atoms {
        point_load(mesh, x, w * strength(x), &mut b)?;
    }
    Ok(b)
}

/// Vertex-rule (lumped) quadrature weights `Σ_{T∋i} |T|/3`.
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            w[v] += mesh.geom(t).area / 3.0;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MeasureRHS, Region, Shape};
    use crate::mesh::{cut_cell_quadrature, HoldAll, Mesh};
    use std::sync::Arc;

    fn single() -> Mesh {
        Mesh::new(vec![[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]], vec![[0, 1, 2]], vec![true; 3], None).unwrap()
    }

    #[test]
    fn element_stiffness_matches_cotangent_formula() {
        let m = single();
        let a = stiffness(&m, |_| 1.0);
        let p = m.corners(0);
        // K_ij = -cot(angle opposite edge ij)/2
        let cot = |k: usize| {
            let u = crate::sub(p[(k + 1) % 3], p[k]);
            let v = crate::sub(p[(k + 2) % 3], p[k]);
            crate::dot(u, v) / crate::cross(u, v)
        };
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let k = 3 - i - j;
                    assert!((a.get(i, j) + 0.5 * cot(k)).abs() < 1e-14);
                }
            }
            let row: f64 = (0..3).map(|j| a.get(i, j)).sum();
            assert!(row.abs() < 1e-14);
        }
        let c = stiffness(&m, |_| 3.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.get(i, j) - 3.0 * a.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn element_mass() {
        let m = Arc::new(single());
        let w = Field::from_fn(m.clone(), |_| 1.0);
        let mm = assemble_reaction(&w).unwrap();
        let area = m.geom(0).area;
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { area / 6.0 } else { area / 12.0 };
                assert!((mm.get(i, j) - e).abs() < 1e-15);
            }
        }
        let zero = assemble_reaction(&Field::zeros(m.clone())).unwrap();
        assert_eq!(zero.total(), 0.0);
        let neg = Field::from_fn(m, |_| -1.0);
        assert!(matches!(assemble_reaction(&neg), Err(Error::NegativeWeight(_))));
    }

    #[test]
    fn global_mass_totals_area() {
        let m = Arc::new(Mesh::unit_square(6));
        let mm = assemble_reaction(&Field::from_fn(m.clone(), |_| 1.0)).unwrap();
        assert!((mm.total() - 1.0).abs() < 1e-13);
        assert!(mm.asymmetry() < 1e-14);
    }

    #[test]
    fn diffusion_depth_changes_only_cut_rows() {
        let m = Mesh::unit_square(8);
        let r = Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.47, 0.52], radius: 0.23 }]).unwrap();
        let q0 = cut_cell_quadrature(&m, &r, 0);
        let q4 = cut_cell_quadrature(&m, &r, 4);
        let a0 = assemble_diffusion(&m, &q0, 2.0, 1.0);
        let a4 = assemble_diffusion(&m, &q4, 2.0, 1.0);
        assert!(a4.asymmetry() < 1e-14);
        let touched: std::collections::HashSet<usize> =
            (0..m.n_triangles()).filter(|&t| q4.is_cut(t)).flat_map(|t| m.triangles()[t]).collect();
        for i in 0..m.n_vertices() {
            for (j, v) in a0.row(i) {
                if (v - a4.get(i, j)).abs() > 1e-14 {
                    assert!(touched.contains(&i) && touched.contains(&j));
                }
            }
        }
    }

    #[test]
    fn loads() {
        let m = Mesh::unit_square(16);
        let all = cut_cell_quadrature(&m, &|_x: Point| true, 4);
        let b = assemble_load(&m, &all, 2.5, 2.5);
        assert!((b.iter().sum::<f64>() - 2.5).abs() < 1e-10);
        let r = Region::new(HoldAll::UnitSquare, vec![Shape::Disk { center: [0.5, 0.5], radius: 0.25 }]).unwrap();
        let q = cut_cell_quadrature(&m, &r, 4);
        let b = assemble_load(&m, &q, 1.0, 0.0);
        let exact = std::f64::consts::PI / 16.0;
        assert!((b.iter().sum::<f64>() - exact).abs() < 0.01 * exact);
        assert!(assemble_load(&m, &q, 0.0, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn measure_loads() {
        let m = Mesh::unit_square(8);
        let b = assemble_measure_load(&m, &MeasureRHS::dirac([0.31, 0.47]), |_| 1.0).unwrap();
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let b = assemble_measure_load(&m, &MeasureRHS::dirac([0.25, 0.5 + 1e-11]), |_| 1.0).unwrap();
        assert_eq!(b.iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(b.iter().copied().fold(0.0, f64::max), 1.0);
        let b = assemble_measure_load(&m, &MeasureRHS::circle([0.5, 0.5], 0.3, 256), |_| 1.0).unwrap();
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(assemble_measure_load(&m, &MeasureRHS::dirac([1.3, 0.5]), |_| 1.0).is_err());
    }
}
