//! Command runner behind the `wallforge` binary.
//!
//! Each command takes one validated [`ExperimentConfig`], produces a JSON
//! report wrapped in a [`ReportEnvelope`], and returns a process exit code.
//! Reports are deterministic: the same config document and seed produce
//! byte-identical JSON, so reports can be diffed across runs and machines.
//! Human-readable progress goes to stderr; stdout carries the report JSON
//! when no report path is configured.

use std::io::{BufReader, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::config::{ExperimentConfig, GridConfig, LoadedConfig};
use crate::dynamics::orbital_stability_experiment;
use crate::dynamics::write_trace_csv;
use crate::error::{Error, Result};
use crate::grid::{residual_sup, RealField2};
use crate::model::{PotentialKind, PotentialSpec};
use crate::pinning::{find_x0, pinned_spectrum, solve_pinned_wall, LocalizedPotential, PinningReport};
use crate::profile::{solve_wall_from, verify_wall_properties, PropertyReport, SolveOptions, WallReport};
use crate::spectral::{stability_spectrum, SpectralReport, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Spectrum,
    Evolve,
    Pin,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Pin => "pin",
            Command::Validate => "validate",
        }
    }
}

/// Input and output locations, resolved by the CLI from flags with the
/// config's `output` section as fallback.
#[derive(Debug, Clone, Default)]
pub struct RunPaths {
    /// Wall profile CSV to load instead of solving (`spectrum`, `evolve`,
    /// `pin`).
    pub wall_in: Option<PathBuf>,
    /// Where `solve` (and `pin`) write profile CSVs.
    pub out: Option<PathBuf>,
    /// Report JSON destination; stdout when absent.
    pub report: Option<PathBuf>,
    /// Evolution trace CSV destination.
    pub trace: Option<PathBuf>,
}

/// Wrapper around every report body: ties the result to the exact config
/// bytes it was produced from and to the code version that produced it.
#[derive(Debug, Serialize)]
pub struct ReportEnvelope<T: Serialize> {
    pub artifact_version: &'static str,
    pub config_sha256: String,
    pub command: &'static str,
    /// Model the command ran against (after any command-line override).
    pub potential: PotentialKind,
    #[serde(flatten)]
    pub body: T,
}

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct SolveBody {
    pub grid: GridConfig,
    pub wall: WallReport,
    pub properties: PropertyReport,
}

#[derive(Debug, Serialize)]
pub struct SpectrumBody {
    /// Sup norm of the Euler-Lagrange residual of the profile the spectrum
    /// was computed on (reloaded from CSV when `--wall` was given).
    pub residual_sup: f64,
    pub spectrum: SpectralReport,
}

#[derive(Debug, Serialize)]
pub struct EvolveBody {
    pub eps: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub sup_rho: f64,
    pub rho_bound: f64,
    pub max_alpha: f64,
    pub alpha_constant: f64,
    pub energy_drift: f64,
    pub samples: usize,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Per-coupling pinning result without the profile payloads; those go to
/// CSV files, not into the report.
#[derive(Debug, Serialize)]
pub struct PinEntry {
    pub eps: f64,
    pub persistence_sup: f64,
    pub persistence_ratio: Option<f64>,
    pub predicted_shift: f64,
    pub lplus_min_eig: Option<f64>,
    pub lplus_min_eig_unperturbed: Option<f64>,
    pub lplus_negative_count: Option<usize>,
    pub lminus_min_eig: Option<f64>,
    pub neg_lambda_sq: Option<f64>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct PinBody {
    pub localized_potential: LocalizedPotential,
    pub x0: f64,
    pub sigma: f64,
    pub entries: Vec<PinEntry>,
}

#[derive(Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ValidateBody {
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

/// Execute one command. Returns the process exit code: 0 on success, 1 when
/// `validate` ran to completion but a check failed. Errors carry their own
/// exit codes via [`Error::exit_code`].
pub fn run(command: Command, loaded: &LoadedConfig, paths: &RunPaths) -> Result<i32> {
    let cfg = &loaded.config;
    match command {
        Command::Solve => {
            let (body, profile) = run_solve(cfg)?;
            let out = paths
                .out
                .clone()
                .or_else(|| cfg.output.out.clone())
                .unwrap_or_else(|| PathBuf::from("wall.csv"));
            write_field_csv(&profile, &out)?;
            eprintln!(
                "solve: energy={:.9}, residual_sup={:.3e}, center={:.3e}; profile -> {}",
                body.wall.energy,
                body.wall.residual_sup,
                body.wall.center,
                out.display()
            );
            emit_report(loaded, command, body, paths)?;
            Ok(0)
        }
        Command::Spectrum => {
            let body = run_spectrum(cfg, paths.wall_in.as_deref())?;
            eprintln!(
                "spectrum: lambda0={:.3e}, gap={:.4}, overlap={:.6}, verdict={:?}",
                body.spectrum.lplus_eigs.first().copied().unwrap_or(f64::NAN),
                body.spectrum.spectral_gap,
                body.spectrum.zero_mode_overlap,
                body.spectrum.verdict
            );
            emit_report(loaded, command, body, paths)?;
            Ok(0)
        }
        Command::Evolve => {
            let (body, trace) = run_evolve(cfg, paths.wall_in.as_deref())?;
            if let Some(tp) = paths.trace.clone().or_else(|| cfg.output.trace.clone()) {
                let f = create_file(&tp)?;
                write_trace_csv(&trace, std::io::BufWriter::new(f))?;
                eprintln!("evolve: trace -> {}", tp.display());
            }
            eprintln!(
                "evolve: eps={:.3e}, sup_rho={:.3e}, max_alpha={:.3e}, energy_drift={:.3e}, pass={}",
                body.eps, body.sup_rho, body.max_alpha, body.energy_drift, body.pass
            );
            emit_report(loaded, command, body, paths)?;
            Ok(0)
        }
        Command::Pin => {
            let (body, profiles) = run_pin(cfg, paths.wall_in.as_deref())?;
            if let Some(base) = paths.out.clone().or_else(|| cfg.output.out.clone()) {
                for (i, p) in profiles.iter().enumerate() {
                    let path = indexed_path(&base, i, profiles.len());
                    write_field_csv(p, &path)?;
                }
            }
            eprintln!("pin: x0={:.6e}, sigma={:.6e}", body.x0, body.sigma);
            for e in &body.entries {
                eprintln!(
                    "pin: eps={:+.3e} -> verdict={:?}, persistence={:.3e}, predicted_shift={:+.3e}",
                    e.eps, e.verdict, e.persistence_sup, e.predicted_shift
                );
            }
            emit_report(loaded, command, body, paths)?;
            Ok(0)
        }
        Command::Validate => {
            let body = run_validate(cfg)?;
            for c in &body.checks {
                eprintln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let n_pass = body.checks.iter().filter(|c| c.pass).count();
            eprintln!("validate: {}/{} checks passed", n_pass, body.checks.len());
            let all = body.pass;
            emit_report(loaded, command, body, paths)?;
            Ok(if all { 0 } else { 1 })
        }
    }
}

fn run_solve(cfg: &ExperimentConfig) -> Result<(SolveBody, RealField2)> {
    let spec = cfg.model()?;
    let grid = cfg.make_grid()?;
    let wall = solve_wall_from(&spec, grid, None, cfg.solver.to_options())?;
    let properties = verify_wall_properties(&spec, &wall);
    let profile = wall.profile.clone();
    Ok((SolveBody { grid: cfg.grid, wall, properties }, profile))
}

/// Load a wall profile CSV; boundary values come from the model's
/// equilibria (b-state on the left, a-state on the right).
fn load_wall(path: &Path, spec: &PotentialSpec) -> Result<RealField2> {
    let f = std::fs::File::open(path).map_err(|e| {
        Error::Config(format!("cannot open wall profile {}: {e}", path.display()))
    })?;
    RealField2::read_csv(BufReader::new(f), spec.b_state(), spec.a_state())
}

/// The profile a command operates on: reloaded from `--wall` when given,
/// otherwise solved fresh (raw grid solution, not the extrapolated field,
/// so the discrete Euler-Lagrange residual stays at the solver tolerance).
fn obtain_wall(cfg: &ExperimentConfig, wall_in: Option<&Path>, spec: &PotentialSpec) -> Result<RealField2> {
    match wall_in {
        Some(p) => load_wall(p, spec),
        None => {
            let grid = cfg.make_grid()?;
            let mut opts = cfg.solver.to_options();
            opts.refine = false;
            Ok(solve_wall_from(spec, grid, None, opts)?.profile)
        }
    }
}

fn run_spectrum(cfg: &ExperimentConfig, wall_in: Option<&Path>) -> Result<SpectrumBody> {
    let spec = cfg.model()?;
    let profile = obtain_wall(cfg, wall_in, &spec)?;
    let rsup = residual_sup(&spec, &profile);
    let spectrum = stability_spectrum(&spec, &profile, cfg.spectral.k)?;
    Ok(SpectrumBody { residual_sup: rsup, spectrum })
}

fn run_evolve(
    cfg: &ExperimentConfig,
    wall_in: Option<&Path>,
) -> Result<(EvolveBody, crate::dynamics::EvolutionTrace)> {
    let spec = cfg.model()?;
    let wall = obtain_wall(cfg, wall_in, &spec)?;
    let d = cfg.dynamics;
    let report = orbital_stability_experiment(&spec, &wall, d.eps, d.t, d.dt, d.seed)?;
    let body = EvolveBody {
        eps: report.eps,
        t_end: d.t,
        dt: d.dt,
        seed: d.seed,
        sup_rho: report.sup_rho,
        rho_bound: report.rho_bound,
        max_alpha: report.max_alpha,
        alpha_constant: report.alpha_constant,
        energy_drift: report.trace.energy_drift,
        samples: report.trace.times.len(),
        pass: report.pass,
        warnings: report.trace.warnings.clone(),
    };
    Ok((body, report.trace))
}

fn run_pin(cfg: &ExperimentConfig, wall_in: Option<&Path>) -> Result<(PinBody, Vec<RealField2>)> {
    let pin = cfg.pinning.as_ref().ok_or_else(|| {
        Error::Config("pin command needs a pinning section in the config or --potential".into())
    })?;
    let spec = cfg.model()?;
    let wall0 = obtain_wall(cfg, wall_in, &spec)?;
    let x0 = find_x0(&pin.potential, &wall0)?;

    let reports = pin_sweep(&spec, &pin.potential, &pin.eps, &wall0, x0)?;
    let sigma = reports.first().map(|r| r.sigma).unwrap_or(f64::NAN);
    let mut entries = Vec::with_capacity(reports.len());
    let mut profiles = Vec::with_capacity(reports.len());
    for r in reports {
        entries.push(PinEntry {
            eps: r.eps,
            persistence_sup: r.persistence_sup,
            persistence_ratio: r.persistence_ratio,
            predicted_shift: r.predicted_shift,
            lplus_min_eig: r.lplus_min_eig,
            lplus_min_eig_unperturbed: r.lplus_min_eig_unperturbed,
            lplus_negative_count: r.lplus_negative_count,
            lminus_min_eig: r.lminus_min_eig,
            neg_lambda_sq: r.neg_lambda_sq,
            verdict: r.verdict,
            warnings: r.warnings,
        });
        profiles.push(r.pinned_profile);
    }
    let body = PinBody { localized_potential: pin.potential.clone(), x0, sigma, entries };
    Ok((body, profiles))
}

/// Solve and grade the pinned branch at every coupling, fanning the work out
/// to a pool bounded by `WALLFORGE_THREADS` (hardware parallelism when
/// unset). Results keep the order of the input list.
fn pin_sweep(
    spec: &PotentialSpec,
    v: &LocalizedPotential,
    eps: &[f64],
    wall0: &RealField2,
    x0: f64,
) -> Result<Vec<PinningReport>> {
    let one = |e: f64| -> Result<PinningReport> {
        let r = solve_pinned_wall(spec, v, e, wall0, x0)?;
        pinned_spectrum(spec, v, r)
    };
    if eps.len() == 1 {
        return Ok(vec![one(eps[0])?]);
    }

    let workers = pool_size(eps.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<PinningReport>>>> =
        Mutex::new((0..eps.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= eps.len() {
                    break;
                }
                let out = one(eps[i]);
                slots.lock().expect("sweep worker poisoned the slot lock")[i] = Some(out);
            });
        }
    });
    let slots = slots.into_inner().expect("sweep worker poisoned the slot lock");
    let mut reports = Vec::with_capacity(eps.len());
    for slot in slots {
        reports.push(slot.expect("every sweep index was claimed")?);
    }
    Ok(reports)
}

fn pool_size(jobs: usize) -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("WALLFORGE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(hw);
    cap.min(jobs).max(1)
}

/// The fixed check battery behind `validate`: the closed-form regression on
/// the canonical grid, then axiom, spectral, and pinning checks on the
/// configured model. Tolerances here mirror the acceptance test suite.
fn run_validate(cfg: &ExperimentConfig) -> Result<ValidateBody> {
    let mut checks = Vec::new();

    // Closed-form regression: the gamma=3 balanced cubic has the exact wall
    // (1 +- tanh(x/sqrt(2)))/2 with energy sqrt(2)/3; the solver must
    // reproduce both on the canonical grid.
    let spec3 = PotentialSpec::new(PotentialKind::SymmetricCubic { gamma: 3.0 })?;
    let grid3 = crate::grid::Grid::new(20.0, 4095)?;
    let wall3 = solve_wall_from(&spec3, grid3, None, SolveOptions::default())?;
    let measured = wall3.refined.as_ref().unwrap_or(&wall3.profile);
    let mut sup = 0.0f64;
    for i in 0..grid3.len() {
        let want = spec3.exact_wall(grid3.x(i))?;
        sup = sup.max((measured.u1[i] - want[0]).abs());
        sup = sup.max((measured.u2[i] - want[1]).abs());
    }
    let e_err = (wall3.energy - std::f64::consts::SQRT_2 / 3.0).abs();
    checks.push(CheckOutcome {
        name: "exact_wall_regression",
        pass: sup <= 1e-6 && e_err <= 1e-6,
        detail: format!("sup_error={sup:.3e} (tol 1e-6), energy_error={e_err:.3e} (tol 1e-6)"),
    });

    // Structural axioms of the configured potential.
    let spec = cfg.model()?;
    let box_hi = [
        (2.0 * spec.a_state()[0]).max(2.0),
        (2.0 * spec.b_state()[1]).max(2.0),
    ];
    match spec.check_w_axioms(box_hi, 20_000) {
        Ok(ax) => checks.push(CheckOutcome {
            name: "potential_axioms",
            pass: ax.pass,
            detail: format!(
                "min_w_sampled={:.3e}, quadratic_growth_c0={:.3e}, f12 sign fixed={}",
                ax.min_w_sampled, ax.growth_c0, ax.f12_sign_closed_form
            ),
        }),
        Err(e) => checks.push(CheckOutcome {
            name: "potential_axioms",
            pass: false,
            detail: e.to_string(),
        }),
    }

    // Spectral checks on the configured model's wall: translational zero
    // mode pinned at zero, nonnegative operators, no pencil instability.
    let wall = if spec.kind() == spec3.kind() && cfg.grid.l == 20.0 && cfg.grid.n == 4095 {
        wall3.profile.clone()
    } else {
        let mut opts = cfg.solver.to_options();
        opts.refine = false;
        solve_wall_from(&spec, cfg.make_grid()?, None, opts)?.profile
    };
    match stability_spectrum(&spec, &wall, cfg.spectral.k) {
        Ok(sp) => {
            let lam0 = sp.lplus_eigs.first().copied().unwrap_or(f64::NAN);
            let lm0 = sp.lminus_eigs.first().copied().unwrap_or(f64::NAN);
            let gap_required = !spec.is_symmetric() || sp.gap_ok;
            let pass = lam0.abs() <= 1e-4
                && sp.zero_mode_overlap >= 0.999
                && lm0 >= -1e-4
                && sp.neg_lambda_sq >= -1e-6
                && sp.verdict != Verdict::Unstable
                && gap_required;
            checks.push(CheckOutcome {
                name: "stability_spectrum",
                pass,
                detail: format!(
                    "lambda0={lam0:.3e} (tol 1e-4), overlap={:.6}, lminus_min={lm0:.3e}, \
                     -lambda^2={:.3e}, gap={:.4}, verdict={:?}",
                    sp.zero_mode_overlap, sp.neg_lambda_sq, sp.spectral_gap, sp.verdict
                ),
            });
        }
        Err(e) => checks.push(CheckOutcome {
            name: "stability_spectrum",
            pass: false,
            detail: e.to_string(),
        }),
    }

    // Pinning sign check: the stability index must follow the sign of the
    // coupling times the curvature, and for an attractive bump the pinned
    // wall must be graded stable.
    let default_pin = LocalizedPotential::sech2(1.0, 1.0);
    let (v, eps) = match &cfg.pinning {
        Some(p) => (&p.potential, p.eps[0]),
        None => (&default_pin, 1e-3),
    };
    let pin_check = (|| -> Result<(f64, f64, Verdict)> {
        let x0 = find_x0(v, &wall)?;
        let r = solve_pinned_wall(&spec, v, eps, &wall, x0)?;
        let r = pinned_spectrum(&spec, v, r)?;
        Ok((x0, r.sigma, r.verdict))
    })();
    match pin_check {
        Ok((x0, sigma, verdict)) => {
            let want = if eps * sigma > 0.0 { Verdict::Stable } else { Verdict::Unstable };
            let sech2_sign_ok = match v {
                LocalizedPotential::Sech2 { a, .. } => sigma.signum() == a.signum(),
                _ => true,
            };
            checks.push(CheckOutcome {
                name: "pinning_sign",
                pass: verdict == want && sech2_sign_ok,
                detail: format!(
                    "x0={x0:.3e}, sigma={sigma:.6e}, eps={eps:+.3e}, verdict={verdict:?} (expected {want:?})"
                ),
            });
        }
        Err(e) => checks.push(CheckOutcome {
            name: "pinning_sign",
            pass: false,
            detail: e.to_string(),
        }),
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidateBody { checks, pass })
}

fn create_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}

fn write_field_csv(field: &RealField2, path: &Path) -> Result<()> {
    let f = create_file(path)?;
    field.write_csv(std::io::BufWriter::new(f))
}

/// `base` with the sweep index spliced in front of the extension, so a
/// multi-coupling run writes `wall.0.csv`, `wall.1.csv`, ...
fn indexed_path(base: &Path, idx: usize, total: usize) -> PathBuf {
    if total <= 1 {
        return base.to_path_buf();
    }
    match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => base.with_extension(format!("{idx}.{ext}")),
        None => base.with_extension(idx.to_string()),
    }
}

fn emit_report<T: Serialize>(
    loaded: &LoadedConfig,
    command: Command,
    body: T,
    paths: &RunPaths,
) -> Result<()> {
    let envelope = ReportEnvelope {
        artifact_version: ARTIFACT_VERSION,
        config_sha256: loaded.sha256.clone(),
        command: command.name(),
        potential: loaded.config.potential.clone(),
        body,
    };
    let mut json = serde_json::to_string_pretty(&envelope)?;
    json.push('\n');
    match paths.report.clone().or_else(|| loaded.config.output.report.clone()) {
        Some(p) => {
            let mut f = create_file(&p)?;
            f.write_all(json.as_bytes())?;
            eprintln!("{}: report -> {}", command.name(), p.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(json.as_bytes())?;
        }
    }
    Ok(())
}
