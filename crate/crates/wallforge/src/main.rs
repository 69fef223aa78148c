//! `wallforge`: command-line front end over the library's runner.
//!
//! The binary only parses flags, resolves the config document, applies
//! per-command overrides, and hands off to [`wallforge::runner::run`].
//! Exit codes: 0 success, 1 numerical failure (or failed `validate`
//! checks), 2 configuration problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wallforge::config::{ExperimentConfig, LoadedConfig, PinningConfig};
use wallforge::error::{Error, Result};
use wallforge::pinning::LocalizedPotential;
use wallforge::runner::{run, Command, RunPaths};

#[derive(Parser)]
#[command(name = "wallforge", version, about = "Domain walls in coupled Gross-Pitaevskii systems: profiles, spectra, dynamics, pinning")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the heteroclinic wall profile and write it as CSV.
    Solve(CommonArgs),
    /// Linearization spectrum of a wall (solved fresh, or reloaded with --wall).
    Spectrum(CommonArgs),
    /// Evolve a seeded perturbation of the wall and grade the modulation diagnostics.
    Evolve(CommonArgs),
    /// Solve the pinned branch for a localized potential and grade its stability.
    Pin(CommonArgs),
    /// Run the built-in check battery; exits 0 only when every check passes.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config JSON; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Profile CSV destination (solve, pin).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report JSON destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Wall profile CSV to reload instead of solving (spectrum, evolve, pin).
    #[arg(long, value_name = "PATH")]
    wall: Option<PathBuf>,
    /// Evolution trace CSV destination (evolve).
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Potential as JSON: the model potential, or for `pin` the localized
    /// pinning potential, e.g. '{"kind": "sech2", "a": 1.0, "b": 1.0}'.
    #[arg(long, value_name = "JSON")]
    potential: Option<String>,
    /// Perturbation size: dynamics eps for `evolve`, coupling for `pin`.
    #[arg(long, value_name = "FLOAT", allow_hyphen_values = true)]
    eps: Option<f64>,
    /// Evolution horizon (evolve).
    #[arg(long = "T", value_name = "FLOAT")]
    t: Option<f64>,
    /// Time step (evolve).
    #[arg(long, value_name = "FLOAT")]
    dt: Option<f64>,
    /// Eigenvalues per operator (spectrum).
    #[arg(long, value_name = "INT")]
    k: Option<usize>,
    /// Seed for the perturbation draw (evolve).
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Spectrum(a) => (Command::Spectrum, a),
        Cmd::Evolve(a) => (Command::Evolve, a),
        Cmd::Pin(a) => (Command::Pin, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    match prepare_and_run(command, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn prepare_and_run(command: Command, args: &CommonArgs) -> Result<i32> {
    let mut loaded = ExperimentConfig::load_or_default(args.config.as_deref())?;
    apply_overrides(&mut loaded, command, args)?;
    loaded.config.validate()?;
    let paths = RunPaths {
        wall_in: args.wall.clone(),
        out: args.out.clone(),
        report: args.report.clone(),
        trace: args.trace.clone(),
    };
    run(command, &loaded, &paths)
}

/// Fold command-line values into the config document. The `--potential`
/// flag targets the model for every command except `pin`, where it sets the
/// localized pinning potential; `--eps` follows the same split.
fn apply_overrides(loaded: &mut LoadedConfig, command: Command, args: &CommonArgs) -> Result<()> {
    let cfg = &mut loaded.config;
    if let Some(json) = &args.potential {
        if command == Command::Pin {
            let v: LocalizedPotential = serde_json::from_str(json)
                .map_err(|e| Error::Config(format!("--potential: {e}")))?;
            match &mut cfg.pinning {
                Some(p) => p.potential = v,
                None => cfg.pinning = Some(PinningConfig { potential: v, eps: vec![1e-3] }),
            }
        } else {
            cfg.potential = serde_json::from_str(json)
                .map_err(|e| Error::Config(format!("--potential: {e}")))?;
        }
    }
    if let Some(e) = args.eps {
        if command == Command::Pin {
            match &mut cfg.pinning {
                Some(p) => p.eps = vec![e],
                None => {
                    return Err(Error::Config(
                        "--eps for pin needs a pinning section in the config or --potential".into(),
                    ))
                }
            }
        } else {
            cfg.dynamics.eps = e;
        }
    }
    if let Some(t) = args.t {
        cfg.dynamics.t = t;
    }
    if let Some(dt) = args.dt {
        cfg.dynamics.dt = dt;
    }
    if let Some(k) = args.k {
        cfg.spectral.k = k;
    }
    if let Some(seed) = args.seed {
        cfg.dynamics.seed = seed;
    }
    Ok(())
}
