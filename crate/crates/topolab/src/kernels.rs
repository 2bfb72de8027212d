//! Closed-form kernels: fundamental solutions, volume potentials, the
//! logarithmic corrector and the ball transmission corrector.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::OmegaShape;
use crate::integrate::adaptive;
use crate::{Error, Point, Result};

/// Problem data entering the kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelCase {
    RhsPerturbation { f_in: f64, f_out: f64 },
    /// `g_x0 = g_out(u(x0)) − g_in(u(x0))`; `f_jump = f_in − f_out`.
    Semilinear { g_x0: f64, f_jump: f64 },
    Transmission { beta_in: f64, beta_out: f64 },
}

/// Dimension, case, sign and reference shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelContext {
    pub dim: usize,
    pub case: KernelCase,
    pub sign: f64,
    pub omega: OmegaShape,
}

impl KernelContext {
    pub fn new(dim: usize, case: KernelCase, sign: f64, omega: OmegaShape) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedCase(format!("dimension {dim}")));
        }
        if sign.abs() != 1.0 {
            return Err(Error::InvalidInput("sign must be +1 or -1".into()));
        }
        if let KernelCase::Transmission { beta_in, beta_out } = case {
            if !(beta_in > 0.0 && beta_out > 0.0) {
                return Err(Error::InvalidInput("conductivities must be positive".into()));
            }
        }
        Ok(Self { dim, case, sign, omega })
    }

    /// |ω| in the context's dimension.
    pub fn omega_measure(&self) -> f64 {
        match (self.dim, self.omega) {
            (2, o) => o.measure(),
            (_, OmegaShape::Ball) => 4.0 * PI / 3.0,
            (_, OmegaShape::Square) => 8.0,
        }
    }

    /// Source contrast multiplying the volume potential.
    pub fn contrast(&self) -> Result<f64> {
        match self.case {
            KernelCase::RhsPerturbation { f_in, f_out } => Ok(f_in - f_out),
            KernelCase::Semilinear { g_x0, f_jump } => Ok(g_x0 + f_jump),
            KernelCase::Transmission { .. } => Err(Error::UnsupportedCase("transmission has no volume potential".into())),
        }
    }

    fn betas(&self) -> Result<(f64, f64)> {
        match self.case {
            KernelCase::Transmission { beta_in, beta_out } => Ok((beta_in, beta_out)),
            _ => Err(Error::UnsupportedCase("not a transmission case".into())),
        }
    }

    /// β(x0): `beta_out` when the seed lies outside Ω.
    pub fn beta_background(&self) -> Result<f64> {
        let (b1, b2) = self.betas()?;
        Ok(if self.sign > 0.0 { b2 } else { b1 })
    }

    /// Coefficient inside the inclusion.
    pub fn beta_inclusion(&self) -> Result<f64> {
        let (b1, b2) = self.betas()?;
        Ok(if self.sign > 0.0 { b1 } else { b2 })
    }

    /// `sgn · (β_out − β_in)`.
    pub fn signed_jump(&self) -> Result<f64> {
        let (b1, b2) = self.betas()?;
        Ok(self.sign * (b2 - b1))
    }
}

/// E(x) = −ln|x|/(2π) in the plane, 1/(4π|x|) in space.
pub fn fundamental_solution(dim: usize, x: &[f64]) -> Result<f64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r < 1e-14 {
        return Err(Error::OriginSingularity);
    }
    match dim {
        2 => Ok(-r.ln() / (2.0 * PI)),
        3 => Ok(1.0 / (4.0 * PI * r)),
        _ => Err(Error::UnsupportedCase(format!("dimension {dim}"))),
    }
}

/// ∇E(x) = −x/(2π|x|²) in the plane.
pub fn fundamental_gradient(x: Point) -> Result<Point> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 < 1e-28 {
        return Err(Error::OriginSingularity);
    }
    Ok([-x[0] / (2.0 * PI * r2), -x[1] / (2.0 * PI * r2)])
}

/// R(x) = sgn · (f_in − f_out) · E(x).
pub fn singular_part_rhs(ctx: &KernelContext, x: &[f64]) -> Result<f64> {
    match ctx.case {
        KernelCase::RhsPerturbation { f_in, f_out } => {
            let e = fundamental_solution(ctx.dim, x)?;
            Ok(ctx.sign * (f_in - f_out) * e)
        }
        _ => Err(Error::UnsupportedCase("singular_part_rhs needs the rhs case".into())),
    }
}

/// K(x) = sgn · contrast · ∫_ω E(x − y) dy.
pub fn volume_potential_k(ctx: &KernelContext, x: &[f64]) -> Result<f64> {
    let c = ctx.sign * ctx.contrast()?;
    if c == 0.0 {
        return Ok(0.0);
    }
    match ctx.dim {
        2 => Ok(c * log_potential(ctx.omega, [x[0], x[1]])?),
        3 => match ctx.omega {
            OmegaShape::Ball => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                Ok(c * if r < 1.0 { (3.0 - r * r) / 6.0 } else { 1.0 / (3.0 * r) })
            }
            OmegaShape::Square => Err(Error::UnsupportedCase("cube potential in three dimensions".into())),
        },
        d => Err(Error::UnsupportedCase(format!("dimension {d}"))),
    }
}

/// `∫_ω E(x − y) dy` in the plane.
///
/// Uses polar coordinates centred at `x`, where the radial integral of
/// `ρ ln ρ` is exact; the remaining angular integral is smooth between the
/// breakpoints and is done adaptively.
pub fn log_potential(omega: OmegaShape, x: Point) -> Result<f64> {
    // F(ρ) = ∫_0^ρ s ln s ds
    let f = |r: f64| if r <= 0.0 { 0.0 } else { 0.5 * r * r * r.ln() - 0.25 * r * r };
    let tol = 1e-14;
    let integral = match omega {
        OmegaShape::Ball => {
            let r = crate::norm(x);
            let theta_c = (-x[1]).atan2(-x[0]);
            if r < 1.0 {
                adaptive(
                    |th: f64| {
                        let b = x[0] * th.cos() + x[1] * th.sin();
                        f(-b + (b * b - r * r + 1.0).sqrt())
                    },
                    0.0,
                    2.0 * PI,
                    tol,
                )?
            } else {
                let alpha = (1.0 / r).asin();
                // θ = θc + α sin s removes the square-root behaviour at the tangents.
                adaptive(
                    |s: f64| {
                        let th = theta_c + alpha * s.sin();
                        let b = x[0] * th.cos() + x[1] * th.sin();
                        let disc = (b * b - r * r + 1.0).max(0.0).sqrt();
                        (f(-b + disc) - f(-b - disc)) * alpha * s.cos()
                    },
                    -0.5 * PI,
                    0.5 * PI,
                    tol,
                )?
            }
        }
        OmegaShape::Square => {
            let ray = |th: f64| {
                let e = [th.cos(), th.sin()];
                let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
                for d in 0..2 {
                    if e[d].abs() < 1e-300 {
                        if x[d].abs() >= 1.0 {
                            return 0.0;
                        }
                        continue;
                    }
                    let a = (-1.0 - x[d]) / e[d];
                    let b = (1.0 - x[d]) / e[d];
                    lo = lo.max(a.min(b));
                    hi = hi.min(a.max(b));
                }
                if hi > lo {
                    f(hi) - f(lo)
                } else {
                    0.0
                }
            };
            let mut breaks: Vec<f64> = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
                .iter()
                .map(|c: &Point| {
                    let a = (c[1] - x[1]).atan2(c[0] - x[0]);
                    if a < 0.0 {
                        a + 2.0 * PI
                    } else {
                        a
                    }
                })
                .collect();
            breaks.sort_by(f64::total_cmp);
            breaks.push(breaks[0] + 2.0 * PI);
            let mut s = 0.0;
            for w in breaks.windows(2) {
                s += adaptive(ray, w[0], w[1], tol)?;
            }
            s
        }
    };
    Ok(-integral / (2.0 * PI))
}

/// b = −sgn · contrast · |ω| / (2π), the coefficient of ln ε in the
/// planar expansion of the rescaled corrector.
pub fn log_corrector_b(ctx: &KernelContext) -> Result<f64> {
    if ctx.dim != 2 {
        return Err(Error::UnsupportedCase("the log corrector exists only in the plane".into()));
    }
    Ok(-ctx.sign * ctx.contrast()? * ctx.omega_measure() / (2.0 * PI))
}

/// C_β for the ball: `sgn(β_out − β_in) / (β_inc + (d − 1) β_bg)`.
pub fn c_beta(ctx: &KernelContext) -> Result<f64> {
    if ctx.omega != OmegaShape::Ball {
        return Err(Error::UnsupportedCase("closed-form transmission corrector needs the ball".into()));
    }
    let bi = ctx.beta_inclusion()?;
    let bb = ctx.beta_background()?;
    Ok(ctx.signed_jump()? / (bi + (ctx.dim as f64 - 1.0) * bb))
}

/// The ball corrector K and its gradient for background gradient `g`.
pub fn transmission_k_ball(ctx: &KernelContext, x: &[f64], g: &[f64]) -> Result<(f64, Vec<f64>)> {
    let c = c_beta(ctx)?;
    let d = ctx.dim;
    let gx: f64 = (0..d).map(|i| g[i] * x[i]).sum();
    let r2: f64 = (0..d).map(|i| x[i] * x[i]).sum();
    if r2 < 1.0 {
        return Ok((c * gx, (0..d).map(|i| c * g[i]).collect()));
    }
    if r2 < 1e-28 {
        return Err(Error::OriginSingularity);
    }
    let rd = r2.powf(d as f64 / 2.0);
    let grad = (0..d).map(|i| c * (g[i] / rd - d as f64 * gx * x[i] / (rd * r2))).collect();
    Ok((c * gx / rd, grad))
}

/// A_ω = C_β I for the ball.
pub fn polarisation_matrix_ball(ctx: &KernelContext) -> Result<Vec<Vec<f64>>> {
    let c = c_beta(ctx)?;
    Ok((0..ctx.dim).map(|i| (0..ctx.dim).map(|j| if i == j { c } else { 0.0 }).collect()).collect())
}

/// ξ = sgn (β_out − β_in)/β(x0) · |ω| (A_ω + I) g.
pub fn dipole_vector_xi(ctx: &KernelContext, g: &[f64]) -> Result<Vec<f64>> {
    let c = c_beta(ctx)?;
    let s = ctx.signed_jump()? / ctx.beta_background()? * ctx.omega_measure() * (1.0 + c);
    Ok(g.iter().take(ctx.dim).map(|v| s * v).collect())
}

/// The planar dipole −ξ·∇E(y) = ξ·y/(2π|y|²) and its gradient.
pub fn dipole_field(xi: Point, y: Point) -> Result<(f64, Point)> {
    let r2 = y[0] * y[0] + y[1] * y[1];
    if r2 < 1e-28 {
        return Err(Error::OriginSingularity);
    }
    let xy = xi[0] * y[0] + xi[1] * y[1];
    let k = 1.0 / (2.0 * PI);
    let v = k * xy / r2;
    let g = [k * (xi[0] / r2 - 2.0 * xy * y[0] / (r2 * r2)), k * (xi[1] / r2 - 2.0 * xy * y[1] / (r2 * r2))];
    Ok((v, g))
}
