//! The three problem classes and their linearized operators.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::assemble::{assemble_diffusion, assemble_load, load_from_points, reaction_from_points, stiffness};
use super::field::Field;
use super::nonlinearity::Nonlinearity;
use super::solver::{PreparedSolver, SolverChoice};
use super::sparse::CsrMatrix;
use crate::geometry::Region;
use crate::mesh::{cut_cell_quadrature, CutQuadrature, Mesh, DEFAULT_CUT_DEPTH};
use crate::{Error, Result};

const NEWTON_MAX_ITER: usize = 50;

/// Default smallest admissible `ε / h`.
pub const MIN_RESOLUTION: f64 = 8.0;

pub(crate) fn resolution_check(h: f64, eps: f64, ratio: f64) -> Result<()> {
    if h > eps / ratio * (1.0 + 1e-9) {
        return Err(Error::MeshTooCoarse { h, eps, ratio: eps / h });
    }
    Ok(())
}

/// The PDE. Subscript "in" refers to Ω, "out" to D∖Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// −Δu = f_in χ_Ω + f_out χ_{D∖Ω}.
    Poisson { f_in: f64, f_out: f64 },
    /// −Δu + g_in(u) χ_Ω + g_out(u) χ_{D∖Ω} = f_in χ_Ω + f_out χ_{D∖Ω}.
    Semilinear { g_in: Nonlinearity, g_out: Nonlinearity, f_in: f64, f_out: f64 },
    /// −div(β_Ω ∇u) = f with β_Ω = beta_in on Ω and beta_out on D∖Ω.
    Transmission { beta_in: f64, beta_out: f64, f: f64 },
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemSpec::Poisson { f_in, f_out } => finite(&[*f_in, *f_out]),
            ProblemSpec::Semilinear { g_in, g_out, f_in, f_out } => {
                g_in.validate()?;
                g_out.validate()?;
                finite(&[*f_in, *f_out])
            }
            ProblemSpec::Transmission { beta_in, beta_out, f } => {
                if !(*beta_in > 0.0) {
                    return Err(Error::InvalidInput("beta_in must be positive".into()));
                }
                if !(*beta_out > 0.0) {
                    return Err(Error::InvalidInput("beta_out must be positive".into()));
                }
                finite(&[*beta_in, *beta_out, *f])
            }
        }
    }

    /// Whether the solution does not depend on Ω at all.
    pub fn is_region_independent(&self) -> bool {
        match *self {
            ProblemSpec::Poisson { f_in, f_out } => f_in == f_out,
            ProblemSpec::Semilinear { g_in, g_out, f_in, f_out } => g_in == g_out && f_in == f_out,
            ProblemSpec::Transmission { beta_in, beta_out, .. } => beta_in == beta_out,
        }
    }

    /// Source inside Ω.
    pub fn f_in(&self) -> f64 {
        match *self {
            ProblemSpec::Poisson { f_in, .. } | ProblemSpec::Semilinear { f_in, .. } => f_in,
            ProblemSpec::Transmission { f, .. } => f,
        }
    }

    /// Source outside Ω.
    pub fn f_out(&self) -> f64 {
        match *self {
            ProblemSpec::Poisson { f_out, .. } | ProblemSpec::Semilinear { f_out, .. } => f_out,
            ProblemSpec::Transmission { f, .. } => f,
        }
    }

    /// Semilinear view of the Poisson case.
    pub fn as_semilinear(&self) -> Option<(Nonlinearity, Nonlinearity, f64, f64)> {
        match *self {
            ProblemSpec::Poisson { f_in, f_out } => Some((Nonlinearity::Zero, Nonlinearity::Zero, f_in, f_out)),
            ProblemSpec::Semilinear { g_in, g_out, f_in, f_out } => Some((g_in, g_out, f_in, f_out)),
            ProblemSpec::Transmission { .. } => None,
        }
    }
}

fn finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("problem data must be finite".into()))
    }
}

/// Mesh plus the numerical policies shared by all solves.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub solver: SolverChoice,
    pub cut_depth: usize,
    /// Smallest admissible `ε / h` for quotient solves.
    pub min_resolution: f64,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Self {
        Self { mesh: Arc::new(mesh), solver: SolverChoice::Auto, cut_depth: DEFAULT_CUT_DEPTH, min_resolution: MIN_RESOLUTION }
    }

    pub fn with_solver(mut self, solver: SolverChoice) -> Self {
        self.solver = solver;
        self
    }

    /// Relaxes or tightens the `ε / h` check; smoke runs use 4.
    pub fn with_min_resolution(mut self, ratio: f64) -> Self {
        self.min_resolution = ratio;
        self
    }

    /// Fails with `MeshTooCoarse` unless `h ≤ ε / min_resolution` (up to rounding).
    pub fn check_resolution(&self, eps: f64) -> Result<()> {
        resolution_check(self.mesh.h(), eps, self.min_resolution)
    }

    pub fn quadrature(&self, region: &Region) -> CutQuadrature {
        cut_cell_quadrature(&self.mesh, region, self.cut_depth)
    }

    pub fn boundary(&self) -> &[bool] {
        self.mesh.boundary()
    }

    pub fn prepare(&self, matrix: CsrMatrix) -> Result<PreparedSolver> {
        PreparedSolver::new(matrix, self.mesh.boundary(), self.solver)
    }

    /// Solves the problem on Ω with homogeneous Dirichlet data.
    pub fn solve(&self, spec: &ProblemSpec, region: &Region) -> Result<Field> {
        spec.validate()?;
        let quad = self.quadrature(region);
        match *spec {
            ProblemSpec::Poisson { f_in, f_out } => {
                let a = stiffness(&self.mesh, |_| 1.0);
                let b = assemble_load(&self.mesh, &quad, f_in, f_out);
                Ok(Field::new(self.mesh.clone(), self.prepare(a)?.solve(&b, None)?))
            }
            ProblemSpec::Semilinear { g_in, g_out, f_in, f_out } => {
                Ok(self.newton(&quad, g_in, g_out, f_in, f_out)?.0)
            }
            ProblemSpec::Transmission { beta_in, beta_out, f } => {
                let a = assemble_diffusion(&self.mesh, &quad, beta_in, beta_out);
                let b = assemble_load(&self.mesh, &quad, f, f);
                Ok(Field::new(self.mesh.clone(), self.prepare(a)?.solve(&b, None)?))
            }
        }
    }

    /// Semilinear solve with the Newton residual history.
    pub fn solve_semilinear(&self, spec: &ProblemSpec, region: &Region) -> Result<(Field, NewtonReport)> {
        spec.validate()?;
        let (g_in, g_out, f_in, f_out) =
            spec.as_semilinear().ok_or_else(|| Error::UnsupportedCase("transmission is not semilinear".into()))?;
        self.newton(&self.quadrature(region), g_in, g_out, f_in, f_out)
    }

    fn newton(
        &self,
        quad: &CutQuadrature,
        g_in: Nonlinearity,
        g_out: Nonlinearity,
        f_in: f64,
        f_out: f64,
    ) -> Result<(Field, NewtonReport)> {
        let mesh = &self.mesh;
        let a = stiffness(mesh, |_| 1.0);
        let load = assemble_load(mesh, quad, f_in, f_out);
        let fixed = mesh.boundary();
        let free_norm = |v: &[f64]| v.iter().zip(fixed).filter(|(_, &b)| !b).map(|(x, _)| x * x).sum::<f64>().sqrt();
        let tol = 1e-10 * (1.0 + free_norm(&load));
        let residual = |u: &Field| {
            let mut r = a.mul_vec(u.values());
            let react = load_from_points(mesh, quad, |t, q| {
                let v = u.eval_in(t, q.bary);
                if q.inside { g_in.value(v) } else { g_out.value(v) }
            });
            for i in 0..r.len() {
                r[i] += react[i] - load[i];
            }
            r
        };
        let mut u = Field::zeros(mesh.clone());
        let mut history = Vec::new();
        let mut f = residual(&u);
        let mut rn = free_norm(&f);
        let mut damped_run = 0usize;
        for _ in 0..NEWTON_MAX_ITER {
            history.push(rn);
            if rn <= tol {
                return Ok((u, NewtonReport { residuals: history }));
            }
            let mut jac = a.clone();
            jac.add_scaled(
                1.0,
                &reaction_from_points(mesh, quad, |t, q| {
                    let v = u.eval_in(t, q.bary);
                    if q.inside { g_in.derivative(v) } else { g_out.derivative(v) }
                }),
            );
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = self.prepare(jac)?.solve(&neg, None)?;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial: Vec<f64> = u.values().iter().zip(&delta).map(|(x, d)| x + lambda * d).collect();
                let trial = Field::new(mesh.clone(), trial);
                let ft = residual(&trial);
                let rt = free_norm(&ft);
                if rt <= (1.0 - 1e-4 * lambda) * rn || rt <= tol {
                    accepted = Some((trial, ft, rt));
                    break;
                }
                lambda *= 0.5;
            }
            let Some((nu, nf, nr)) = accepted else {
                return Err(Error::NewtonStalled(rn));
            };
            damped_run = if lambda < 1.0 { damped_run + 1 } else { 0 };
            if damped_run >= 5 {
                let k = history.len();
                if k >= 5 && nr > (1.0 - 1e-3) * history[k - 5] {
                    return Err(Error::NewtonStalled(nr));
                }
            }
            u = nu;
            f = nf;
            rn = nr;
        }
        Err(Error::NewtonStalled(rn))
    }

    /// The linearized operator at `state` (ignored for linear problems).
    pub fn linearize(&self, spec: &ProblemSpec, region: &Region, state: Option<&Field>) -> Result<Linearized> {
        spec.validate()?;
        let quad = self.quadrature(region);
        let matrix = match *spec {
            ProblemSpec::Poisson { .. } => stiffness(&self.mesh, |_| 1.0),
            ProblemSpec::Semilinear { g_in, g_out, .. } => {
                let mut a = stiffness(&self.mesh, |_| 1.0);
                if !(g_in.is_zero() && g_out.is_zero()) {
                    let u = state.ok_or_else(|| Error::InvalidInput("semilinear linearization needs a state".into()))?;
                    a.add_scaled(
                        1.0,
                        &reaction_from_points(&self.mesh, &quad, |t, q| {
                            let v = u.eval_in(t, q.bary);
                            if q.inside { g_in.derivative(v) } else { g_out.derivative(v) }
                        }),
                    );
                }
                a
            }
            ProblemSpec::Transmission { beta_in, beta_out, .. } => assemble_diffusion(&self.mesh, &quad, beta_in, beta_out),
        };
        Ok(Linearized { mesh: self.mesh.clone(), solver: self.prepare(matrix)?, quad })
    }
}

/// Residual norms of the Newton iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub residuals: Vec<f64>,
}

impl NewtonReport {
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }
}

/// A factorized symmetric operator with homogeneous Dirichlet rows.
pub struct Linearized {
    mesh: Arc<Mesh>,
    solver: PreparedSolver,
    quad: CutQuadrature,
}

impl Linearized {
    pub fn matrix(&self) -> &CsrMatrix {
        self.solver.matrix()
    }

    pub fn quadrature(&self) -> &CutQuadrature {
        &self.quad
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Solves with zero Dirichlet data.
    pub fn solve(&self, load: &[f64]) -> Result<Field> {
        Ok(Field::new(self.mesh.clone(), self.solver.solve(load, None)?))
    }

    /// Solves with Dirichlet data taken from `boundary` at boundary vertices.
    pub fn solve_with_boundary(&self, load: &[f64], boundary: &[f64]) -> Result<Field> {
        Ok(Field::new(self.mesh.clone(), self.solver.solve(load, Some(boundary))?))
    }
}
