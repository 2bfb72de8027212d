//! ε-sweeps, log-log slope fits and the theoretical exponents.

use serde::{Deserialize, Serialize};

use crate::fem::{norm, visit_points, Difference, Discretization, FieldLike, NormKind, NormSpec, ProblemSpec};
use crate::geometry::{Admissibility, InclusionSeed, OmegaShape, Region, SeedKind};
use crate::state_derivative::{rhs_linear_u0_splitting, semilinear_u0_measure, transmission_u0, Baseline, SplitField};
use crate::{Error, Point, Result};

/// Largest admissible RMS residual of a log-log fit.
pub const MAX_FIT_RESIDUAL: f64 = 0.1;

/// Default slope tolerance.
pub const SLOPE_TOLERANCE: f64 = 0.15;

/// Default ε list.
pub const DEFAULT_EPS: [f64; 5] = [0.2, 0.14, 0.1, 0.07, 0.05];

/// Which convergence estimate a sweep is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCase {
    RhsLp,
    RhsW1p,
    RhsBallLp,
    TransmissionLq,
}

/// The exponent of ε in the convergence estimate for `case`.
pub fn theoretical_exponent(case: RateCase, d: usize, p: f64) -> Result<f64> {
    let df = d as f64;
    let bad = || Err(Error::UnsupportedCase(format!("{case:?} with d={d}, p={p}")));
    if !(d == 2 || d == 3) || !p.is_finite() {
        return bad();
    }
    match case {
        RateCase::RhsLp if d == 2 => {
            if p > 2.0 {
                Ok(2.0 / p)
            } else {
                bad()
            }
        }
        RateCase::RhsLp => {
            if p > df / (df - 1.0) && p < df / (df - 2.0) {
                Ok((df - p * (df - 2.0)) / p)
            } else {
                bad()
            }
        }
        RateCase::RhsW1p => {
            if p > 1.0 && p < df / (df - 1.0) {
                Ok((df - p * (df - 1.0)) / p)
            } else {
                bad()
            }
        }
        RateCase::RhsBallLp => {
            let upper = if d == 2 { f64::INFINITY } else { df / (df - 2.0) };
            if p > 1.0 && p < upper {
                Ok((df - p * (df - 2.0)) / p)
            } else {
                bad()
            }
        }
        RateCase::TransmissionLq => {
            if p > 1.0 && p < df / (df - 1.0) {
                Ok((df - p * (df - 1.0)) / p)
            } else {
                bad()
            }
        }
    }
}

/// Ordinary least squares `y ≈ a x + b`; returns `(a, b, rms residual)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidInput("a fit needs two or more points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit(0.0));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a * u - b).powi(2)).sum::<f64>() / nf).sqrt();
    Ok((a, b, rms))
}

/// Disk around x₀ excluded from the sweep norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Puncture {
    #[default]
    None,
    /// Fixed radius.
    Fixed { radius: f64 },
    /// Radius `factor · ε`, which keeps the excluded part of the rescaled
    /// picture fixed along the sweep.
    Relative { factor: f64 },
}

impl Puncture {
    pub fn radius(&self, eps: f64) -> f64 {
        match *self {
            Puncture::None => 0.0,
            Puncture::Fixed { radius } => radius,
            Puncture::Relative { factor } => factor * eps,
        }
    }
}

/// One ε-sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub case_id: String,
    pub spec: ProblemSpec,
    pub region: Region,
    pub seed: InclusionSeed,
    pub eps: Vec<f64>,
    pub norm: NormSpec,
    pub puncture: Puncture,
    pub tolerance: f64,
    pub admissibility: Admissibility,
}

/// Errors along a sweep, the fitted slope and the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub case_id: String,
    pub norm: NormSpec,
    pub puncture: Puncture,
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub exponent: Option<f64>,
    pub tolerance: f64,
    pub pass: Option<bool>,
    pub degenerate: Option<String>,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,error\n");
        for (e, r) in self.eps.iter().zip(&self.errors) {
            s.push_str(&format!("{e:.16e},{r:.16e}\n"));
        }
        s
    }
}

/// The estimate a sweep configuration falls under, if any.
pub fn classify(spec: &ProblemSpec, seed: &InclusionSeed, kind: NormKind) -> Option<RateCase> {
    let omega = match seed.kind {
        SeedKind::Scaled { omega, .. } => omega,
        SeedKind::Point { .. } => OmegaShape::Ball,
        SeedKind::Circle { .. } => return None,
    };
    match (spec, kind) {
        (ProblemSpec::Poisson { .. }, NormKind::W1p) => Some(RateCase::RhsW1p),
        (ProblemSpec::Poisson { .. }, NormKind::Lp) if omega == OmegaShape::Ball => Some(RateCase::RhsBallLp),
        (ProblemSpec::Poisson { .. }, NormKind::Lp) => Some(RateCase::RhsLp),
        (ProblemSpec::Transmission { .. }, NormKind::Lp) => Some(RateCase::TransmissionLq),
        _ => None,
    }
}

/// The U₀ a sweep compares against: splitting for the linear classes,
/// measure solve for the semilinear one.
pub fn reference_u0(base: &Baseline, seed: &InclusionSeed) -> Result<SplitField> {
    let r = match base.spec {
        ProblemSpec::Poisson { .. } => rhs_linear_u0_splitting(base, seed)?,
        ProblemSpec::Semilinear { .. } => semilinear_u0_measure(base, seed)?,
        ProblemSpec::Transmission { .. } => transmission_u0(base, seed)?,
    };
    Ok(r.field)
}

/// Runs the sweep of `cfg` on `disc`.
pub fn epsilon_sweep(cfg: &SweepConfig, disc: &Discretization) -> Result<RateReport> {
    if cfg.eps.len() < 4 || cfg.eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("the eps list must be strictly decreasing with at least 4 entries".into()));
    }
    disc.check_resolution(*cfg.eps.last().unwrap())?;
    let case = classify(&cfg.spec, &cfg.seed, cfg.norm.kind);
    let exponent = match case {
        Some(c) => Some(theoretical_exponent(c, 2, cfg.norm.p)?),
        None => None,
    };
    let mut report = RateReport {
        case_id: cfg.case_id.clone(),
        norm: cfg.norm,
        puncture: cfg.puncture,
        eps: cfg.eps.clone(),
        errors: vec![],
        slope: None,
        residual: None,
        exponent,
        tolerance: cfg.tolerance,
        pass: None,
        degenerate: None,
    };
    if cfg.spec.is_region_independent() {
        report.errors = vec![0.0; cfg.eps.len()];
        report.degenerate = Some("zero signal".into());
        return Ok(report);
    }
    let base = Baseline::new(disc.clone(), cfg.spec, cfg.region.clone())?;
    let u0 = reference_u0(&base, &cfg.seed)?;
    let errors: Vec<f64> = cfg
        .eps
        .iter()
        .map(|&e| {
            let ue = base.quotient(&cfg.seed, e, cfg.admissibility)?;
            let spec = cfg.norm.punctured(cfg.seed.center(), cfg.puncture.radius(e));
            Ok(norm(&disc.mesh, &Difference(&ue, &u0), &spec))
        })
        .collect::<Result<_>>()?;
    report.errors = errors;
    if report.errors.iter().any(|&e| !(e > 0.0)) {
        report.degenerate = Some("nonpositive error".into());
        return Ok(report);
    }
    let lx: Vec<f64> = cfg.eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = report.errors.iter().map(|e| e.ln()).collect();
    let (slope, _, residual) = fit_slope(&lx, &ly)?;
    if residual > MAX_FIT_RESIDUAL {
        return Err(Error::DegenerateFit(residual));
    }
    report.slope = Some(slope);
    report.residual = Some(residual);
    report.pass = exponent.map(|a| (slope - a).abs() <= cfg.tolerance);
    Ok(report)
}

/// `|⟨U_ε − U₀, φ⟩|` along `eps`.
pub fn weak_convergence_probe(
    base: &Baseline,
    seed: &InclusionSeed,
    eps: &[f64],
    policy: Admissibility,
    phi: impl Fn(Point) -> f64 + Sync,
) -> Result<Vec<f64>> {
    let u0 = reference_u0(base, seed)?;
    let mesh = base.mesh();
    eps.iter()
        .map(|&e| {
            let ue = base.quotient(seed, e, policy)?;
            let d = Difference(&ue, &u0);
            Ok(pairing(mesh, &d, &phi).abs())
        })
        .collect()
}

/// `∫ f φ` with singular-aware quadrature.
pub fn pairing(mesh: &crate::mesh::Mesh, f: &dyn FieldLike, phi: &(dyn Fn(Point) -> f64 + Sync)) -> f64 {
    let mut s = 0.0;
    visit_points(mesh, f, None, &mut |q| s += q.weight * q.value * phi(q.x));
    s
}

/// Whether `values` never grow by more than 5% from one entry to the next.
pub fn is_monotone_trend(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= 1.05 * w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exponent_table() {
        assert_eq!(theoretical_exponent(RateCase::RhsLp, 2, 4.0).unwrap(), 0.5);
        assert!((theoretical_exponent(RateCase::RhsW1p, 2, 1.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((theoretical_exponent(RateCase::TransmissionLq, 2, 1.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((theoretical_exponent(RateCase::RhsBallLp, 2, 1.2).unwrap() - 2.0 / 1.2).abs() < 1e-15);
        assert!((theoretical_exponent(RateCase::RhsLp, 3, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((theoretical_exponent(RateCase::RhsW1p, 3, 1.2).unwrap() - 0.5).abs() < 1e-15);
        for (c, d, p) in [
            (RateCase::TransmissionLq, 2, 2.0),
            (RateCase::RhsLp, 2, 2.0),
            (RateCase::RhsW1p, 2, 2.0),
            (RateCase::RhsW1p, 2, 1.0),
            (RateCase::RhsLp, 3, 3.5),
            (RateCase::RhsBallLp, 2, 1.0),
            (RateCase::RhsLp, 4, 3.0),
        ] {
            assert!(matches!(theoretical_exponent(c, d, p), Err(Error::UnsupportedCase(_))), "{c:?} {d} {p}");
        }
    }

    #[test]
    fn fit_of_exact_power_law() {
        let eps = DEFAULT_EPS;
        let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let ly: Vec<f64> = eps.iter().map(|e| (3.7 * e.powf(0.5)).ln()).collect();
        let (a, b, r) = fit_slope(&lx, &ly).unwrap();
        assert!((a - 0.5).abs() < 1e-12);
        assert!((b - 3.7f64.ln()).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_slope(&[1.0], &[1.0]).is_err());
        assert!(matches!(fit_slope(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn monotone_trend() {
        assert!(is_monotone_trend(&[1.0, 0.5, 0.52, 0.3]));
        assert!(!is_monotone_trend(&[1.0, 0.5, 0.6]));
    }

    proptest! {
        #[test]
        fn slope_recovery(a in -3.0f64..3.0, c in 0.01f64..100.0) {
            let lx: Vec<f64> = DEFAULT_EPS.iter().map(|e| e.ln()).collect();
            let ly: Vec<f64> = DEFAULT_EPS.iter().map(|e| (c * e.powf(a)).ln()).collect();
            let (s, _, _) = fit_slope(&lx, &ly).unwrap();
            prop_assert!((s - a).abs() < 1e-12);
        }

        #[test]
        fn exponents_positive_on_their_ranges(p in 1.01f64..1.99) {
            prop_assert!(theoretical_exponent(RateCase::RhsW1p, 2, p).unwrap() > 0.0);
            prop_assert!(theoretical_exponent(RateCase::TransmissionLq, 2, p).unwrap() > 0.0);
            prop_assert!(theoretical_exponent(RateCase::RhsBallLp, 2, p).unwrap() > 0.0);
        }
    }
}
