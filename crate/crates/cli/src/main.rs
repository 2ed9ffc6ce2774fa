//! `silalloc`: validate safety models, evaluate consequence frequencies,
//! allocate target PFDs and cross-check against Monte Carlo.
//!
//! Exit codes: 0 pass, 1 intolerable or infeasible, 2 invalid model,
//! 3 usage or I/O error.

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use silalloc_core::document::tunnel_document;
use silalloc_core::{
    allocate, consequence_frequencies, evaluate, instantiate_pfd, load_model, monte_carlo_w,
    validate, AllocationOptions, Criterion, LoadError, PfdVector, SystemModel, ValidationReport,
    DEFAULT_ENUMERATION_CAP,
};

use render::{provenance, PfdSource, ResolvedPfd};

/// Environment variable that raises the enumeration cap on subsystem count.
const CAP_ENV: &str = "SILALLOC_MAX_SUBSYSTEMS";

/// Model argument value selecting the bundled road-tunnel model.
const BUILTIN_TUNNEL: &str = "builtin:tunnel";

#[derive(Parser)]
#[command(
    name = "silalloc",
    version,
    about = "SIL allocation for mitigation safety functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and report findings.
    Validate {
        /// Model JSON file, or `builtin:tunnel`.
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Compute consequence frequencies and compare them with the tolerances.
    Evaluate {
        /// Model JSON file, or `builtin:tunnel`.
        model: PathBuf,
        #[command(flatten)]
        pfd: PfdArgs,
        #[arg(long, default_value = "per-segment")]
        criterion: Criterion,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Search for the largest tolerable target PFD and assign a SIL.
    Allocate {
        /// Model JSON file, or `builtin:tunnel`.
        model: PathBuf,
        #[arg(long, default_value = "per-segment")]
        criterion: Criterion,
        /// Search interval `lo,hi` for the target PFD.
        #[arg(long, value_parser = parse_bracket, default_value = "1e-6,1e-1")]
        bracket: (f64, f64),
        /// Relative width at which the bisection stops.
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        /// Proof-test interval in hours; adds the PFH target and its SIL.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Estimate consequence frequencies by sampling and compare with the exact values.
    Simulate {
        /// Model JSON file, or `builtin:tunnel`.
        model: PathBuf,
        #[command(flatten)]
        pfd: PfdArgs,
        /// Number of samples; scientific notation such as `1E7` is accepted.
        #[arg(long, value_parser = parse_samples, default_value = "1000000")]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Args)]
struct PfdArgs {
    /// Target PFD applied to every scaled subsystem.
    #[arg(long)]
    pfd_scalar: Option<f64>,
    /// Replace one subsystem PFD, as `NAME=VALUE`. Repeatable.
    #[arg(long = "pfd-override", value_parser = parse_override)]
    overrides: Vec<(String, f64)>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Machine,
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad upper bound: {e}"))?;
    Ok((lo, hi))
}

fn parse_samples(s: &str) -> Result<u64, String> {
    let n = match s.parse::<u64>() {
        Ok(n) => n,
        Err(_) => {
            let x: f64 = s
                .parse()
                .map_err(|_| format!("not a sample count: `{s}`"))?;
            if !(x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64) {
                return Err(format!("not a whole sample count: `{s}`"));
            }
            x as u64
        }
    };
    if n == 0 {
        return Err("sample count must be positive".into());
    }
    Ok(n)
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected `NAME=VALUE`, got `{s}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad PFD for `{name}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

/// Why a command could not produce a verdict.
enum Failure {
    Invalid(ValidationReport),
    Operational(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Operational(e.to_string())
    }
}

fn enumeration_cap() -> Result<usize, Failure> {
    match std::env::var(CAP_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::Operational(format!("{CAP_ENV} must be a whole number, got `{v}`"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_ENUMERATION_CAP),
        Err(e) => Err(Failure::Operational(format!("{CAP_ENV}: {e}"))),
    }
}

fn load(path: &Path) -> Result<SystemModel, Failure> {
    let cap = enumeration_cap()?;
    if path.as_os_str() == BUILTIN_TUNNEL {
        return tunnel_document()
            .to_model_with_cap(cap)
            .map_err(Failure::Invalid);
    }
    load_model(path, cap).map_err(|e| match e {
        LoadError::Io(e) => Failure::Operational(format!("{}: {e}", path.display())),
        LoadError::Invalid(report) => Failure::Invalid(report),
    })
}

fn resolve_pfds(
    model: &SystemModel,
    args: &PfdArgs,
) -> Result<(PfdVector, Vec<ResolvedPfd>), Failure> {
    let scalar = match args.pfd_scalar {
        Some(p) => p,
        None if model.has_scaled() => {
            return Err(Failure::Operational(
                "model has scaled subsystems; pass --pfd-scalar".into(),
            ))
        }
        None => 0.0,
    };
    let mut p = instantiate_pfd(model, scalar)?;
    let mut rows = provenance(model, &p);
    for (name, value) in &args.overrides {
        let j = model.subsystem_index(name).ok_or_else(|| {
            Failure::Operational(format!(
                "--pfd-override names unknown subsystem `{name}` (known: {})",
                model.subsystem_names().join(", ")
            ))
        })?;
        if matches!(rows[j].source, PfdSource::Override { .. }) {
            return Err(Failure::Operational(format!(
                "subsystem `{name}` overridden twice"
            )));
        }
        p.set(j, *value)?;
        rows[j] = ResolvedPfd {
            name: name.clone(),
            pfd: *value,
            source: PfdSource::Override {
                replaced: rows[j].pfd,
            },
        };
    }
    Ok((p, rows))
}

fn run(command: Command) -> Result<bool, Failure> {
    match command {
        Command::Validate { model, format } => {
            let model = load(&model)?;
            let report = validate(&model);
            print!(
                "{}",
                render::validation(&model, &report, format == Format::Machine)
            );
            Ok(true)
        }
        Command::Evaluate {
            model,
            pfd,
            criterion,
            format,
        } => {
            let model = load(&model)?;
            let (p, rows) = resolve_pfds(&model, &pfd)?;
            let report = evaluate(&model, &p, criterion)?;
            let out = render::Evaluation {
                model: &model,
                pfd_scalar: pfd.pfd_scalar,
                pfds: &rows,
                report: &report,
            };
            print!("{}", out.render(format == Format::Machine));
            Ok(report.overall_pass)
        }
        Command::Allocate {
            model,
            criterion,
            bracket,
            tol,
            tau,
            format,
        } => {
            let model = load(&model)?;
            let opts = AllocationOptions {
                criterion,
                bracket,
                tolerance: tol,
                tau_hours: tau,
            };
            let result = allocate(&model, &opts)?;
            let at_target = evaluate(&model, &result.resolved_pfds, criterion)?;
            let rows = provenance(&model, &result.resolved_pfds);
            let out = render::Allocation {
                model: &model,
                result: &result,
                pfds: &rows,
                at_target: &at_target,
            };
            print!("{}", out.render(format == Format::Machine));
            Ok(result.feasible)
        }
        Command::Simulate {
            model,
            pfd,
            samples,
            seed,
            format,
        } => {
            let model = load(&model)?;
            let (p, rows) = resolve_pfds(&model, &pfd)?;
            let exact = consequence_frequencies(&model, &p)?;
            let estimate = monte_carlo_w(&model, &p, samples, seed)?;
            let out = render::Simulation::new(&model, pfd.pfd_scalar, &rows, &exact, &estimate);
            print!("{}", out.render(format == Format::Machine));
            Ok(out.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Invalid(report)) => {
            eprintln!("invalid model:\n{report}");
            ExitCode::from(2)
        }
        Err(Failure::Operational(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
