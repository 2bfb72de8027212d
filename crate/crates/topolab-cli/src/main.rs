//! `topolab`: config-driven front end for the topolab library.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4
//! unsupported case or inadmissible route. Failures print a single line
//! `error[Name]: message` on stderr.

mod commands;
mod config;
mod examples;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::Output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] topolab::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "InvalidConfig",
            CliError::Lib(e) => e.name(),
            CliError::Io(_) => "Io",
            CliError::Json(_) => "Serialization",
        }
    }

    pub fn exit_code(&self) -> u8 {
        use topolab::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Json(_) => 3,
            CliError::Lib(e) => match e {
                E::InvalidInput(_)
                | E::EpsilonTooLarge { .. }
                | E::SeedStraddlesBoundary
                | E::PointOutsideMesh(..)
                | E::NegativeWeight(_)
                | E::MeshTooCoarse { .. } => 2,
                E::NoConvergence(_)
                | E::NewtonStalled(_)
                | E::OriginSingularity
                | E::QuadratureFailure(_)
                | E::PatchTouchesInterface(..)
                | E::DegenerateFit(_) => 3,
                E::UnsupportedSeed(_) | E::UnsupportedCase(_) | E::InadmissibleRoute(_) => 4,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "topolab", version, about = "Topological state derivatives with P1 finite elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-threaded solves and no timestamps in the manifest.
    #[arg(long)]
    deterministic: bool,
    /// Worker threads for the parallel parts.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the state equation and write the nodal field.
    Solve(RunArgs),
    /// Compute U₀ by the requested routes and compare them.
    StateDerivative(RunArgs),
    /// ε-sweep with a fitted log-log slope.
    RateStudy(RunArgs),
    /// Topological derivative of a functional by adjoint, chain rule and finite differences.
    TopoDerivative(RunArgs),
    /// Mesh statistics and a text dump of the mesh.
    MeshInfo(RunArgs),
    /// Tabulate the analytic correctors along a ray.
    KernelTable(RunArgs),
    /// Run every example below a directory and print a summary table.
    RunExamples {
        /// Directory holding one sub-directory per example.
        #[arg(long, default_value = "docs/examples")]
        dir: PathBuf,
        #[arg(long, default_value = "examples-out")]
        out: PathBuf,
        /// One refinement level below the configured resolution.
        #[arg(long)]
        smoke: bool,
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

pub type Runner = fn(&RunConfig, &mut Output, bool) -> Result<commands::Summary, CliError>;

pub fn runner(command: &str) -> Option<Runner> {
    Some(match command {
        "solve" => commands::solve,
        "state-derivative" => commands::state_derivative,
        "rate-study" => commands::rate_study,
        "topo-derivative" => commands::topo_derivative,
        "mesh-info" => commands::mesh_info,
        "kernel-table" => commands::kernel_table,
        _ => return None,
    })
}

fn init_threads(threads: Option<usize>, deterministic: bool) -> Result<(), CliError> {
    let n = if deterministic { Some(1) } else { threads };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config::parse(&text)
}

/// Runs one configured command into `out_dir`.
pub fn run_config(
    command: &str,
    cfg: &RunConfig,
    out_dir: &Path,
    deterministic: bool,
    coarse: bool,
) -> Result<(commands::Summary, Vec<String>), CliError> {
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(CliError::Config(format!("config is for `{c}`, not `{command}`")));
        }
    }
    let run = runner(command).ok_or_else(|| CliError::Config(format!("unknown command {command:?}")))?;
    let mut out = Output::create(out_dir, command, &cfg.hash(), deterministic)?;
    let summary = run(cfg, &mut out, coarse)?;
    Ok((summary, out.finish()?))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match cli.command {
        Command::Solve(a) => ("solve", a),
        Command::StateDerivative(a) => ("state-derivative", a),
        Command::RateStudy(a) => ("rate-study", a),
        Command::TopoDerivative(a) => ("topo-derivative", a),
        Command::MeshInfo(a) => ("mesh-info", a),
        Command::KernelTable(a) => ("kernel-table", a),
        Command::RunExamples { dir, out, smoke, deterministic, threads } => {
            init_threads(threads, deterministic)?;
            let rows = examples::run_all(&dir, &out, smoke, deterministic)?;
            print!("{}", examples::format_table(&rows));
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            return if failed == 0 {
                Ok(())
            } else {
                Err(CliError::Config(format!("{failed} of {} examples failed", rows.len())))
            };
        }
    };
    let cfg = load_config(&args.config)?;
    let deterministic = args.deterministic || cfg.output.deterministic;
    init_threads(args.threads.or(cfg.output.threads), deterministic)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| "topolab-out".into())));
    let (summary, files) = run_config(name, &cfg, &dir, deterministic, false)?;
    for (k, v) in &summary {
        println!("{k} = {v}");
    }
    for f in files {
        println!("wrote {}", dir.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.name(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
