//! Command-line front end: geodesics, cut-locus classification, oracle
//! distances and sampling, with JSON or CSV output.
//!
//! Exit codes: 0 success, 2 input error, 3 cross-check failure, 4 domain
//! error, 5 oracle non-convergence.

mod commands;
mod io;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use carnot_cut::oracle::OracleConfig;
use carnot_cut::{GroupPoint, GroupShape, DEFAULT_SV_TOL};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::{read_json, CovectorJson, PointJson};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    NoConvergence(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Output(_) => 2,
            CliError::Check(_) => 3,
            CliError::Domain(_) => 4,
            CliError::NoConvergence(_) => 5,
        }
    }
}

impl From<carnot_cut::Error> for CliError {
    fn from(e: carnot_cut::Error) -> Self {
        use carnot_cut::Error as E;
        match e {
            E::NoConvergence { .. } => CliError::NoConvergence(e.to_string()),
            E::ShapeMismatch { .. } | E::InvalidArgument(_) | E::NonpositiveR(_) | E::NegativePhi(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMethod {
    Shoot,
    Direct,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMode {
    /// Points at distance 1 from the origin.
    Sphere,
    /// Endpoints of extremals at their cut time.
    Cutlocus,
    /// Zero set of ψ in G_{q1}, the cut points with a unique minimizer.
    Sigma,
}

#[derive(Debug, Parser)]
#[command(name = "carnot-cut", version, about = "Geodesics and cut locus of Reiter-Heisenberg groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Group shape as `q,p`.
    #[arg(long, value_parser = parse_shape)]
    shape: Option<GroupShape>,
    /// Output format [default: json, csv for `sample`].
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Points of the extremal with the given covector.
    Geodesic {
        #[command(flatten)]
        common: Common,
        /// Covector JSON `{"xi":[[...]],"eta":[...],"tau":[...]}`, `@file` or `-`.
        #[arg(long)]
        covector: String,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        times: Vec<f64>,
        /// Cross-check against the integrated Hamiltonian flow.
        #[arg(long)]
        check: bool,
        /// Relative tolerance for --check.
        #[arg(long, default_value_t = commands::CHECK_TOL)]
        tol: f64,
    },
    /// Whether a point is a cut point of the origin.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Point JSON `{"q","p","x":[[...]],"y":[...],"t":[...]}`, `@file` or `-`.
        #[arg(long)]
        point: String,
        /// Classify relative to this base point instead of the origin.
        #[arg(long)]
        from: Option<String>,
        /// Singular-value cutoff for rank decisions.
        #[arg(long, default_value_t = DEFAULT_SV_TOL)]
        tol: f64,
    },
    /// Numerical distance by shooting and direct minimization.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        point: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long, value_enum, default_value_t = OracleMethod::Both)]
        method: OracleMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = OracleConfig::default().starts)]
        starts: usize,
        #[arg(long, default_value_t = OracleConfig::default().segments)]
        segments: usize,
        #[arg(long, default_value_t = OracleConfig::default().max_iterations)]
        max_iterations: usize,
        /// Endpoint tolerance for a converged start.
        #[arg(long, default_value_t = OracleConfig::default().endpoint_tol)]
        tol: f64,
        /// Also print the closed-form distance and the difference.
        #[arg(long)]
        compare: bool,
    },
    /// Random points of the sphere, the cut locus or the ψ zero set.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        mode: SampleMode,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Singular-value cutoff for the classification columns.
        #[arg(long, default_value_t = DEFAULT_SV_TOL)]
        tol: f64,
    },
}

fn parse_shape(s: &str) -> Result<GroupShape, String> {
    let (q, p) = s.split_once(',').ok_or("expected q,p")?;
    let q = q.trim().parse::<usize>().map_err(|e| format!("q: {e}"))?;
    let p = p.trim().parse::<usize>().map_err(|e| format!("p: {e}"))?;
    GroupShape::new(q, p).map_err(|e| e.to_string())
}

fn read_point(arg: &str, shape: Option<GroupShape>) -> Result<GroupPoint, CliError> {
    read_json::<PointJson>("point", arg)?.to_point(shape)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Input(format!("{name} must be positive, got {v}")))
    }
}

fn run(cli: Cli) -> Result<(commands::Output, Common), CliError> {
    match cli.command {
        Command::Geodesic {
            common,
            covector,
            times,
            check,
            tol,
        } => {
            let cov = read_json::<CovectorJson>("covector", &covector)?.to_covector(common.shape)?;
            let check = if check { Some(positive("--tol", tol)?) } else { None };
            let out = commands::geodesic_cmd(&cov, &times, check, common.format.unwrap_or(Format::Json))?;
            Ok((out, common))
        }
        Command::Classify {
            common,
            point,
            from,
            tol,
        } => {
            let g = read_point(&point, common.shape)?;
            let base = from.map(|b| read_point(&b, Some(g.shape()))).transpose()?;
            let g = commands::relative(&g, base.as_ref())?;
            let out = commands::classify_cmd(&g, positive("--tol", tol)?, common.format.unwrap_or(Format::Json))?;
            Ok((out, common))
        }
        Command::Oracle {
            common,
            point,
            from,
            method,
            seed,
            starts,
            segments,
            max_iterations,
            tol,
            compare,
        } => {
            let g = read_point(&point, common.shape)?;
            let base = from.map(|b| read_point(&b, Some(g.shape()))).transpose()?;
            let g = commands::relative(&g, base.as_ref())?;
            let cfg = OracleConfig {
                seed,
                starts,
                max_iterations,
                endpoint_tol: tol,
                segments,
            };
            cfg.validate()?;
            let out = commands::oracle_cmd(&g, &cfg, method, compare, common.format.unwrap_or(Format::Json))?;
            Ok((out, common))
        }
        Command::Sample {
            common,
            mode,
            count,
            seed,
            tol,
        } => {
            let shape = common
                .shape
                .ok_or_else(|| CliError::Input("sample needs --shape q,p".into()))?;
            let format = common.format.unwrap_or(Format::Csv);
            let out = commands::sample_cmd(shape, mode, count, seed, positive("--tol", tol)?, format)?;
            Ok((out, common))
        }
    }
}

fn emit(text: &str, out: Option<&std::path::Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(out, common)| {
        emit(&out.text, common.out.as_deref())?;
        out.failure.map_or(Ok(()), Err)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
