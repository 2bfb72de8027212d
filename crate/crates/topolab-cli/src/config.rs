//! Run configuration: TOML in, validated library objects out.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use topolab::fem::{Discretization, Nonlinearity, NormKind, NormSpec, ProblemSpec, SolverChoice};
use topolab::functionals::FunctionalKind;
use topolab::geometry::{Admissibility, InclusionSeed, OmegaShape, Region, SeedKind, Shape};
use topolab::mesh::{HoldAll, Mesh};
use topolab::rates::Puncture;
use topolab::Point;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Subcommand the file is meant for; checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    pub region: RegionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedConfig>,
    pub mesh: MeshConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_derivative: Option<StateDerivativeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_study: Option<RateStudyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topo_derivative: Option<TopoDerivativeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_table: Option<KernelTableConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Reaction terms are written as `"arctan"` or `"tanh:0.5"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Poisson { f_in: f64, f_out: f64 },
    Semilinear { g_in: String, g_out: String, f_in: f64, f_out: f64 },
    Transmission { beta_in: f64, beta_out: f64, f: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub holdall: String,
    #[serde(default)]
    pub omega_shapes: Vec<Shape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub kind: String,
    pub center: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Cells per side on the square, rings on the disk.
    pub n: usize,
    #[serde(default)]
    pub refinements: usize,
    #[serde(default)]
    pub solver: SolverChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDerivativeConfig {
    pub routes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default)]
    pub admissibility: Admissibility,
    /// Upper bound on pairwise relative L¹ differences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Also check the Green-column superposition for a fixed smooth control.
    #[serde(default)]
    pub superposition: bool,
    /// Exponent `a` and points `z` of the rescaled corrector, sampled at `eps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrector: Option<CorrectorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorConfig {
    pub exponent: f64,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudyConfig {
    pub eps: Vec<f64>,
    pub norm: NormKind,
    pub p: f64,
    #[serde(default)]
    pub puncture: Puncture,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub admissibility: Admissibility,
}

fn default_tolerance() -> f64 {
    topolab::rates::SLOPE_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Constant reference state.
    #[serde(default)]
    pub u_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoDerivativeConfig {
    pub routes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_eps: Option<Vec<f64>>,
    #[serde(default = "default_fd_order")]
    pub fd_order: i32,
    #[serde(default)]
    pub admissibility: Admissibility,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

fn default_fd_order() -> i32 {
    topolab::functionals::FD_REMAINDER_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTableConfig {
    pub dim: usize,
    pub omega: OmegaShape,
    /// Radii sampled along the first axis.
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses TOML; diagnostics carry the line and the offending key.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        let msg = e.message().replace('\n', " ");
        match line {
            Some(l) => invalid(format!("line {l}: {msg}")),
            None => invalid(msg),
        }
    })
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// JSON text of the key-value tree with sorted keys; independent of
    /// formatting, comments and key order in the source file.
    pub fn canonical(&self) -> String {
        let v = serde_json::to_value(self).expect("configs always serialize");
        serde_json::to_string(&v).expect("values always serialize")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let p = self.problem.as_ref().ok_or_else(|| invalid("missing [problem]"))?;
        let spec = match p {
            ProblemConfig::Poisson { f_in, f_out } => ProblemSpec::Poisson { f_in: *f_in, f_out: *f_out },
            ProblemConfig::Semilinear { g_in, g_out, f_in, f_out } => ProblemSpec::Semilinear {
                g_in: Nonlinearity::parse(g_in).map_err(|e| invalid(format!("problem.g_in: {e}")))?,
                g_out: Nonlinearity::parse(g_out).map_err(|e| invalid(format!("problem.g_out: {e}")))?,
                f_in: *f_in,
                f_out: *f_out,
            },
            ProblemConfig::Transmission { beta_in, beta_out, f } => {
                ProblemSpec::Transmission { beta_in: *beta_in, beta_out: *beta_out, f: *f }
            }
        };
        spec.validate().map_err(|e| invalid(format!("problem: {e}")))?;
        Ok(spec)
    }

    pub fn holdall(&self) -> Result<HoldAll, CliError> {
        match self.region.holdall.as_str() {
            "disk" => Ok(HoldAll::UnitDisk),
            "square" => Ok(HoldAll::UnitSquare),
            s => Err(invalid(format!("region.holdall: expected \"disk\" or \"square\", got {s:?}"))),
        }
    }

    pub fn region(&self) -> Result<Region, CliError> {
        let shapes = self
            .region
            .omega_shapes
            .iter()
            .map(|s| match s {
                Shape::Polygon { vertices } => Shape::polygon(vertices.clone()),
                s => Ok(s.clone()),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("region.omega_shapes: {e}")))?;
        Ok(Region::new(self.holdall()?, shapes)?)
    }

    pub fn seed(&self, region: &Region) -> Result<InclusionSeed, CliError> {
        let s = self.seed.as_ref().ok_or_else(|| invalid("missing [seed]"))?;
        let kind = match s.kind.as_str() {
            "point" => SeedKind::Point { center: s.center },
            "circle" => SeedKind::Circle {
                center: s.center,
                radius: s.radius.ok_or_else(|| invalid("seed.radius is required for circle seeds"))?,
            },
            "scaled" => SeedKind::Scaled {
                center: s.center,
                omega: s.omega.ok_or_else(|| invalid("seed.omega is required for scaled seeds"))?,
            },
            k => return Err(invalid(format!("seed.kind: unknown kind {k:?}"))),
        };
        Ok(InclusionSeed::new(kind, region)?)
    }

    /// Mesh of the configured resolution; `coarsen` removes one refinement
    /// level (halves `n` when there is none left).
    pub fn discretization(&self, coarsen: bool) -> Result<Discretization, CliError> {
        let holdall = self.holdall()?;
        let min_n = if holdall == HoldAll::UnitDisk { 2 } else { 1 };
        let (mut n, mut refinements) = (self.mesh.n, self.mesh.refinements);
        if coarsen {
            if refinements > 0 {
                refinements -= 1;
            } else {
                n = (n / 2).max(min_n);
            }
        }
        if n < min_n {
            return Err(invalid(format!("mesh.n must be at least {min_n}")));
        }
        let mut mesh = Mesh::for_holdall(holdall, n);
        for _ in 0..refinements {
            mesh = mesh.refine_uniform();
        }
        let disc = Discretization::new(mesh).with_solver(self.mesh.solver);
        Ok(if coarsen { disc.with_min_resolution(topolab::fem::MIN_RESOLUTION / 2.0) } else { disc })
    }

    pub fn norm(&self) -> Result<NormSpec, CliError> {
        let r = self.rate_study.as_ref().ok_or_else(|| invalid("missing [rate_study]"))?;
        if !(r.p >= 1.0 && r.p.is_finite()) {
            return Err(invalid("rate_study.p must be at least 1"));
        }
        Ok(NormSpec { kind: r.norm, p: r.p, puncture: None })
    }

    pub fn functional_kind(&self) -> Result<(FunctionalKind, f64), CliError> {
        let f = self.functional.as_ref().ok_or_else(|| invalid("missing [functional]"))?;
        let kind = match f.kind.as_str() {
            "l2_tracking" => FunctionalKind::L2Tracking,
            "lr_tracking" => FunctionalKind::LrTracking { r: f.r.ok_or_else(|| invalid("functional.r is required for lr_tracking"))? },
            "grad_tracking" => FunctionalKind::GradTracking,
            "energy" => FunctionalKind::Energy,
            k => return Err(invalid(format!("functional.kind: unknown kind {k:?}"))),
        };
        Ok((kind, f.u_ref))
    }
}
