//! Domain-wall profile solvers: tanh initial guess, explicit gradient flow
//! for basin capture, damped Newton polish with the translation mode
//! deflated out of the linear solves, crossing normalization, and the
//! qualitative property checks (positivity, pointwise ellipse bound,
//! monotonicity, reflection symmetry, tail decay rates).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    el_residual, energy, first_derivative, residual_sup, sample_cubic, Grid, RealField2,
};
use crate::linalg::{deflated_solve, BandedLu};
use crate::model::PotentialSpec;
use crate::spectral::assemble_lplus;

/// Converged wall with its diagnostics. The profile itself is kept out of
/// the JSON report; it serializes separately as CSV.
#[derive(Debug, Clone, Serialize)]
pub struct WallReport {
    #[serde(skip)]
    pub profile: RealField2,
    /// One higher-order defect-correction sweep applied to `profile`.
    ///
    /// `profile` is the exact solution of the second-order discrete system
    /// (its residual is driven below the solver tolerance, and it is the
    /// stationary state of the time-stepper, which shares the same
    /// Laplacian stencil). Its nodal distance to the continuum wall is
    /// limited by the scheme's truncation error, about h^2 max|u''''|/12
    /// through the inverse linearization. The sweep solves one extra
    /// banded system against the fourth-order defect and removes that
    /// limitation; this field is the solver's best estimate of the
    /// continuum profile.
    #[serde(skip)]
    pub refined: Option<RealField2>,
    pub energy: f64,
    pub residual_sup: f64,
    /// sup |refined - profile|: the size of the truncation-level correction.
    pub refinement_correction: Option<f64>,
    /// Location of the u1 = u2 crossing.
    pub center: f64,
    /// Fitted exponential rate of u1 -> 0 as x -> -inf.
    pub decay_left: f64,
    /// Fitted exponential rate of |U - a_state| -> 0 as x -> +inf.
    pub decay_right: f64,
    /// (u1 nondecreasing, u2 nonincreasing), nodewise with rounding slack.
    pub monotone: [bool; 2],
    /// max |u2(x) - u1(-x)|; only meaningful when the equilibria mirror.
    pub symmetric_defect: Option<f64>,
    pub u1_at_0: f64,
    /// Mass-weighted center of the profile (the dynamics module seeds its
    /// center tracker with this).
    pub mass_center: f64,
    pub newton_iterations: usize,
    /// Provenance of the starting point, recorded for reproducibility.
    pub initial_guess: String,
}

/// Tanh interpolant between the equilibria with u1(0) = a/2, u2(0) = b/2.
pub fn initial_guess(spec: &PotentialSpec, grid: Grid) -> RealField2 {
    let a = spec.a_state()[0];
    let b = spec.b_state()[1];
    RealField2::sample(
        grid,
        |x| {
            let t = x.tanh();
            [0.5 * a * (1.0 + t), 0.5 * b * (1.0 - t)]
        },
        spec.b_state(),
        spec.a_state(),
    )
}

/// Explicit energy descent. Steps that fail to decrease the energy are
/// rejected and the step size halved; underflow of the step size is a
/// convergence failure.
pub fn gradient_flow(
    spec: &PotentialSpec,
    u0: &RealField2,
    dt: f64,
    steps: usize,
) -> Result<RealField2> {
    let h = u0.grid.spacing();
    if !(dt > 0.0 && dt <= 0.25 * h * h) {
        return Err(Error::InvalidArgument(format!(
            "gradient flow requires 0 < dt <= h^2/4 = {}, got dt={dt}",
            0.25 * h * h
        )));
    }
    let mut u = u0.clone();
    let mut e = energy(spec, &u);
    let mut dt = dt;
    let mut k = 0;
    while k < steps {
        let r = el_residual(spec, &u);
        let mut trial = u.clone();
        for i in 0..trial.grid.len() {
            trial.u1[i] -= dt * r.u1[i];
            trial.u2[i] -= dt * r.u2[i];
        }
        let e_trial = energy(spec, &trial);
        if e_trial.is_finite() && e_trial <= e {
            u = trial;
            e = e_trial;
            k += 1;
        } else {
            dt *= 0.5;
            if dt < 1e-18 {
                return Err(Error::Convergence(format!(
                    "gradient flow step size underflowed at energy {e}"
                )));
            }
        }
    }
    Ok(u)
}

/// Interleave the discrete derivative of the profile (the approximate
/// translation zero mode), normalized to unit Euclidean length.
fn translation_mode(field: &RealField2) -> Vec<f64> {
    let d1 = first_derivative(&field.grid, &field.u1, [field.left_bc[0], field.right_bc[0]]);
    let d2 = first_derivative(&field.grid, &field.u2, [field.left_bc[1], field.right_bc[1]]);
    let mut g = vec![0.0; 2 * field.grid.len()];
    for i in 0..field.grid.len() {
        g[2 * i] = d1[i];
        g[2 * i + 1] = d2[i];
    }
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut g {
            *v /= norm;
        }
    }
    g
}

/// Damped Newton iteration on the Euler-Lagrange residual. The Jacobian is
/// the second-variation operator of the energy; the nearly singular
/// translation direction is deflated out of each linear solve.
pub fn newton_polish(
    spec: &PotentialSpec,
    u: &RealField2,
    tol: f64,
    max_iter: usize,
) -> Result<WallReport> {
    newton_polish_with_guess(spec, u, tol, max_iter, "caller-provided field".to_string())
}

fn newton_polish_with_guess(
    spec: &PotentialSpec,
    u: &RealField2,
    tol: f64,
    max_iter: usize,
    guess_desc: String,
) -> Result<WallReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = u.grid.len();
    let mut current = u.clone();
    let mut sup = residual_sup(spec, &current);
    let mut iterations = 0;
    while sup > tol {
        if iterations >= max_iter {
            return Err(Error::Convergence(format!(
                "Newton did not reach residual {tol} in {max_iter} iterations (last residual {sup})"
            )));
        }
        let jac = assemble_lplus(spec, &current);
        let lu = BandedLu::factor(jac.matrix(), 0.0).map_err(|e| {
            Error::Numerical(format!("Jacobian factorization failed at residual {sup}: {e}"))
        })?;
        let res = el_residual(spec, &current);
        let mut r = vec![0.0; 2 * n];
        for i in 0..n {
            r[2 * i] = res.u1[i];
            r[2 * i + 1] = res.u2[i];
        }
        let g = translation_mode(&current);
        let delta = deflated_solve(&lu, &g, &r);

        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 2f64.powi(-16) {
            let mut trial = current.clone();
            for i in 0..n {
                trial.u1[i] -= lambda * delta[2 * i];
                trial.u2[i] -= lambda * delta[2 * i + 1];
            }
            let tsup = residual_sup(spec, &trial);
            if tsup.is_finite() && tsup <= (1.0 - 0.25 * lambda) * sup {
                current = trial;
                sup = tsup;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::Convergence(format!(
                "Newton line search stalled at residual {sup}"
            )));
        }
        iterations += 1;
    }
    Ok(fill_report(spec, current, iterations, guess_desc))
}

/// One defect-correction sweep: evaluate the Euler-Lagrange residual with
/// the fourth-order five-point Laplacian (two equilibrium ghost layers),
/// then solve the second-variation system against that defect with the
/// translation mode deflated out. Starting from a converged second-order
/// solution this lifts the nodal accuracy past the h^2 truncation floor.
/// Returns the corrected field and the sup-norm of the correction.
pub fn refine_profile(spec: &PotentialSpec, field: &RealField2) -> Result<(RealField2, f64)> {
    let grid = field.grid;
    let n = grid.len();
    let denom = 12.0 * grid.spacing() * grid.spacing();
    let extend = |vals: &[f64], bc: [f64; 2]| -> Vec<f64> {
        let mut e = Vec::with_capacity(n + 4);
        e.push(bc[0]);
        e.push(bc[0]);
        e.extend_from_slice(vals);
        e.push(bc[1]);
        e.push(bc[1]);
        e
    };
    let (v1, b1) = field.component(0);
    let (v2, b2) = field.component(1);
    let e1 = extend(v1, b1);
    let e2 = extend(v2, b2);
    let mut defect = vec![0.0; 2 * n];
    for i in 0..n {
        let lap = |e: &[f64]| {
            (-e[i] + 16.0 * e[i + 1] - 30.0 * e[i + 2] + 16.0 * e[i + 3] - e[i + 4]) / denom
        };
        let u1 = field.u1[i];
        let u2 = field.u2[i];
        let [f1, f2] = spec.fj(u1 * u1, u2 * u2);
        defect[2 * i] = -lap(&e1) + f1 * u1;
        defect[2 * i + 1] = -lap(&e2) + f2 * u2;
    }

    let jac = assemble_lplus(spec, field);
    let lu = BandedLu::factor(jac.matrix(), 0.0)
        .map_err(|e| Error::Numerical(format!("refinement factorization failed: {e}")))?;
    let g = translation_mode(field);
    let delta = deflated_solve(&lu, &g, &defect);
    let mut out = field.clone();
    let mut correction = 0.0f64;
    for i in 0..n {
        out.u1[i] -= delta[2 * i];
        out.u2[i] -= delta[2 * i + 1];
        correction = correction.max(delta[2 * i].abs()).max(delta[2 * i + 1].abs());
    }
    Ok((out, correction))
}

/// Result of crossing normalization.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CenterReport {
    /// Location the u1 = u2 crossing had before the translation.
    pub crossing: f64,
    /// Mass-weighted center of the returned (normalized) profile.
    pub mass_center: f64,
}

/// Locate the unique u1 = u2 crossing by sign change plus cubic refinement.
pub fn find_crossing(field: &RealField2) -> Result<f64> {
    let n = field.grid.len();
    let d: Vec<f64> = (0..n).map(|i| field.u1[i] - field.u2[i]).collect();
    let mut crossings = Vec::new();
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            crossings.push(field.grid.x(i));
        } else if d[i] * d[i + 1] < 0.0 {
            crossings.push(refine_crossing(field, i));
        }
    }
    if d[n - 1] == 0.0 {
        crossings.push(field.grid.x(n - 1));
    }
    match crossings.len() {
        1 => Ok(crossings[0]),
        0 => Err(Error::Numerical("no u1 = u2 crossing found".into())),
        k => Err(Error::Numerical(format!(
            "expected exactly one u1 = u2 crossing, found {k} (first two at {}, {})",
            crossings[0], crossings[1]
        ))),
    }
}

fn refine_crossing(field: &RealField2, i: usize) -> f64 {
    let diff = |x: f64| {
        let (v1, b1) = field.component(0);
        let (v2, b2) = field.component(1);
        sample_cubic(&field.grid, v1, b1, x) - sample_cubic(&field.grid, v2, b2, x)
    };
    let mut lo = field.grid.x(i);
    let mut hi = field.grid.x(i + 1);
    let mut flo = diff(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fmid = diff(mid);
        if fmid == 0.0 {
            return mid;
        }
        if (flo < 0.0) == (fmid < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Mass-weighted center of a profile:
/// integral of x * (sum_j w_j u_j^2 - mu) over the excess mass.
pub fn mass_center(spec: &PotentialSpec, field: &RealField2) -> f64 {
    let ([w1, w2], mu) = mass_weights(spec);
    let grid = field.grid;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.len() {
        let dens = w1 * field.u1[i] * field.u1[i] + w2 * field.u2[i] * field.u2[i] - mu;
        num += grid.x(i) * dens;
        den += dens;
    }
    // Ghost contributions vanish: both equilibria carry exactly the
    // background mass mu.
    let h = grid.spacing();
    (h * num) / (h * den)
}

/// Component weights and background level of the conserved-mass density.
pub fn mass_weights(spec: &PotentialSpec) -> ([f64; 2], f64) {
    match spec.kind() {
        crate::model::PotentialKind::GeneralCubic { g11, g22, mu, .. } => {
            ([g11.sqrt(), g22.sqrt()], mu)
        }
        _ => ([1.0, 1.0], 1.0),
    }
}

/// Translate the profile so the u1 = u2 crossing sits at x = 0.
/// Returns the normalized profile with the crossing location that was
/// removed and the mass center of the result.
pub fn normalize_center(
    spec: &PotentialSpec,
    field: &RealField2,
) -> Result<(RealField2, CenterReport)> {
    let crossing = find_crossing(field)?;
    let centered = if crossing.abs() <= 1e-9 {
        field.clone()
    } else {
        field.shifted(crossing)
    };
    let mc = mass_center(spec, &centered);
    Ok((centered, CenterReport { crossing, mass_center: mc }))
}

/// Log-linear least-squares slope of ln(v) against x over the tail window
/// `1e-8 <= v <= 1e-3`. Returns NaN when fewer than 10 nodes qualify.
fn fit_rate(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let data: Vec<(f64, f64)> = points
        .filter(|&(_, v)| (1e-8..=1e-3).contains(&v))
        .map(|(x, v)| (x, v.ln()))
        .collect();
    if data.len() < 10 {
        return f64::NAN;
    }
    let n = data.len() as f64;
    let mx = data.iter().map(|p| p.0).sum::<f64>() / n;
    let my = data.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in &data {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    cov / var
}

/// Fitted tail decay rates (left: u1 -> 0, right: |U - a_state| -> 0),
/// both reported positive.
pub fn decay_rates(spec: &PotentialSpec, field: &RealField2) -> (f64, f64) {
    let grid = field.grid;
    let a = spec.a_state();
    let left = fit_rate(
        (0..grid.len())
            .filter(|&i| grid.x(i) < 0.0)
            .map(|i| (grid.x(i), field.u1[i].abs())),
    );
    let right = fit_rate((0..grid.len()).filter(|&i| grid.x(i) > 0.0).map(|i| {
        let d1 = field.u1[i] - a[0];
        let d2 = field.u2[i] - a[1];
        (grid.x(i), (d1 * d1 + d2 * d2).sqrt())
    }));
    (left, -right)
}

fn fill_report(
    spec: &PotentialSpec,
    profile: RealField2,
    newton_iterations: usize,
    initial_guess: String,
) -> WallReport {
    let e = energy(spec, &profile);
    let sup = residual_sup(spec, &profile);
    let center = find_crossing(&profile).unwrap_or(f64::NAN);
    let (decay_left, decay_right) = decay_rates(spec, &profile);
    let monotone = monotonicity(&profile);
    let symmetric_defect = if spec.is_symmetric() {
        Some(symmetry_defect(&profile))
    } else {
        None
    };
    let u1_at_0 = profile.u1[profile.grid.center_index()];
    let mc = mass_center(spec, &profile);
    WallReport {
        profile,
        refined: None,
        energy: e,
        residual_sup: sup,
        refinement_correction: None,
        center,
        decay_left,
        decay_right,
        monotone,
        symmetric_defect,
        u1_at_0,
        mass_center: mc,
        newton_iterations,
        initial_guess,
    }
}

/// Nodewise monotonicity of the two components, with slack for rounding in
/// the saturated tails.
pub fn monotonicity(field: &RealField2) -> [bool; 2] {
    let slack = 1e-12;
    let mut inc = field.u1[0] >= field.left_bc[0] - slack
        && field.right_bc[0] >= field.u1[field.grid.len() - 1] - slack;
    let mut dec = field.u2[0] <= field.left_bc[1] + slack
        && field.right_bc[1] <= field.u2[field.grid.len() - 1] + slack;
    for i in 1..field.grid.len() {
        inc &= field.u1[i] >= field.u1[i - 1] - slack;
        dec &= field.u2[i] <= field.u2[i - 1] + slack;
    }
    [inc, dec]
}

/// max |u2(x) - u1(-x)| over the grid (exact node reflection, N odd).
pub fn symmetry_defect(field: &RealField2) -> f64 {
    let n = field.grid.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((field.u2[i] - field.u1[n - 1 - i]).abs());
    }
    worst
}

/// Qualitative wall properties, checked nodewise.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub min_value: f64,
    pub nonnegative: bool,
    /// max over nodes of u1^2/a^2 + u2^2/b^2.
    pub ellipse_max: f64,
    pub ellipse_bound_holds: bool,
    pub monotone: [bool; 2],
    pub symmetric_defect: Option<f64>,
    pub decay_left: f64,
    pub decay_right: f64,
    /// Expected rates from the equilibrium linearization (left tail of u1,
    /// slowest right-tail rate of |U - a|).
    pub expected_left: f64,
    pub expected_right: f64,
    pub pass: bool,
}

/// Check positivity, the pointwise ellipse bound, monotonicity, reflection
/// symmetry, and tail decay against the linearized rates.
pub fn verify_wall_properties(spec: &PotentialSpec, report: &WallReport) -> PropertyReport {
    let field = &report.profile;
    let min_value = field
        .u1
        .iter()
        .chain(&field.u2)
        .fold(f64::INFINITY, |acc, &v| acc.min(v));
    let nonnegative = min_value >= -1e-12;

    let a = spec.a_state()[0];
    let b = spec.b_state()[1];
    let mut ellipse_max = 0.0f64;
    for i in 0..field.grid.len() {
        let v = (field.u1[i] / a).powi(2) + (field.u2[i] / b).powi(2);
        ellipse_max = ellipse_max.max(v);
    }
    let ellipse_bound_holds = ellipse_max <= 1.0 + 1e-10;

    let monotone = monotonicity(field);
    let symmetric_defect = if spec.is_symmetric() {
        Some(symmetry_defect(field))
    } else {
        None
    };

    let (expected_left, expected_right) = expected_rates(spec);
    let rate_ok = |got: f64, want: f64| want.is_nan() || (got - want).abs() <= 0.02 * want;
    let pass = nonnegative
        && ellipse_bound_holds
        && monotone[0]
        && monotone[1]
        && symmetric_defect.map_or(true, |d| d <= 1e-8)
        && rate_ok(report.decay_left, expected_left)
        && rate_ok(report.decay_right, expected_right);

    PropertyReport {
        min_value,
        nonnegative,
        ellipse_max,
        ellipse_bound_holds,
        monotone,
        symmetric_defect,
        decay_left: report.decay_left,
        decay_right: report.decay_right,
        expected_left,
        expected_right,
        pass,
    }
}

/// Linearized tail rates at the equilibria. Left: the rate of u1 growing
/// away from the b-state, sqrt of half the first diagonal Hessian entry
/// there. Right: |U - a| decays at the slowest of the two rates at the
/// a-state. Quartic tails are algebraic in the degenerate direction: NaN.
pub fn expected_rates(spec: &PotentialSpec) -> (f64, f64) {
    let b = spec.b_state();
    let hb = spec.hess(b[0], b[1]);
    let left = 0.5 * hb[0][0];
    let a = spec.a_state();
    let ha = spec.hess(a[0], a[1]);
    let right = (0.5 * ha[0][0]).min(0.5 * ha[1][1]);
    let to_rate = |v: f64| if v > 1e-12 { v.sqrt() } else { f64::NAN };
    (to_rate(left), to_rate(right))
}

/// Options for the staged solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub flow_steps: usize,
    /// Interior node count of the coarse basin-capture stage.
    pub coarse_n: usize,
    /// Attach the defect-corrected profile to the report.
    pub refine: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_newton: 60, flow_steps: 1500, coarse_n: 1023, refine: true }
    }
}

/// Full solve: gradient flow plus Newton on a coarse grid, cubic
/// prolongation, Newton on the target grid, then crossing normalization
/// (with a short re-polish when the translation actually moved the field).
pub fn solve_wall(spec: &PotentialSpec, grid: Grid) -> Result<WallReport> {
    solve_wall_from(spec, grid, None, SolveOptions::default())
}

/// As `solve_wall`, optionally starting from a caller-provided field
/// (still flowed and polished) instead of the tanh interpolant.
pub fn solve_wall_from(
    spec: &PotentialSpec,
    grid: Grid,
    start: Option<&RealField2>,
    opts: SolveOptions,
) -> Result<WallReport> {
    let guess_desc = match start {
        Some(_) => "caller-provided field".to_string(),
        None => "tanh interpolant".to_string(),
    };

    // Coarse stage: same half-width, few nodes, explicit flow then Newton.
    let coarse_n = opts.coarse_n.min(grid.len());
    let coarse_n = if coarse_n % 2 == 0 { coarse_n - 1 } else { coarse_n };
    let coarse = Grid::new(grid.half_width(), coarse_n)?;
    let coarse_start = match start {
        Some(f) => restrict(f, coarse),
        None => initial_guess(spec, coarse),
    };
    let dt = 0.24 * coarse.spacing() * coarse.spacing();
    let flowed = gradient_flow(spec, &coarse_start, dt, opts.flow_steps)?;
    let coarse_report =
        newton_polish_with_guess(spec, &flowed, opts.tol.max(1e-9), opts.max_newton, String::new())?;

    // Prolong and polish at the target resolution.
    let fine_start = restrict(&coarse_report.profile, grid);
    let report =
        newton_polish_with_guess(spec, &fine_start, opts.tol, opts.max_newton, guess_desc.clone())?;

    // Normalize the crossing to x = 0; re-polish only if we actually moved.
    let (centered, center_info) = normalize_center(spec, &report.profile)?;
    let mut report = if center_info.crossing.abs() <= 1e-9 {
        report
    } else {
        let mut polished =
            newton_polish_with_guess(spec, &centered, opts.tol, opts.max_newton, guess_desc)?;
        // The re-polish can drift the crossing by strictly less than it
        // moved; one pass is enough for reporting purposes.
        polished.newton_iterations += report.newton_iterations;
        polished
    };
    if opts.refine {
        let (refined, correction) = refine_profile(spec, &report.profile)?;
        report.refined = Some(refined);
        report.refinement_correction = Some(correction);
    }
    Ok(report)
}

/// Resample a field onto another grid with the same half-width by cubic
/// interpolation (works in both directions, restriction and prolongation).
pub fn restrict(field: &RealField2, target: Grid) -> RealField2 {
    let (v1, b1) = field.component(0);
    let (v2, b2) = field.component(1);
    RealField2::sample(
        target,
        |x| {
            [
                sample_cubic(&field.grid, v1, b1, x),
                sample_cubic(&field.grid, v2, b2, x),
            ]
        },
        field.left_bc,
        field.right_bc,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym_cubic(gamma: f64) -> PotentialSpec {
        PotentialSpec::new(PotentialKind::SymmetricCubic { gamma }).expect("valid kind")
    }

    fn grid(l: f64, n: usize) -> Grid {
        Grid::new(l, n).expect("valid grid")
    }

    #[test]
    fn initial_guess_is_symmetric_and_saturates() {
        let spec = sym_cubic(3.0);
        let g = grid(20.0, 1023);
        let guess = initial_guess(&spec, g);
        assert_eq!(symmetry_defect(&guess), 0.0);
        assert!((guess.u1[g.center_index()] - 0.5).abs() < 1e-15);
        assert!((guess.u1[0] - 0.0).abs() < 1e-12, "left saturation {}", guess.u1[0]);
        assert!((guess.u1[g.len() - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_flow_descends_and_fixes_the_wall() {
        let spec = sym_cubic(3.0);
        let g = grid(20.0, 511);
        let dt = 0.24 * g.spacing() * g.spacing();

        // Energy decreases monotonically from the interpolant (the flow
        // rejects any increasing step by construction; verify it makes
        // net progress as well).
        let guess = initial_guess(&spec, g);
        let e0 = energy(&spec, &guess);
        let flowed = gradient_flow(&spec, &guess, dt, 400).expect("flow runs");
        let e1 = energy(&spec, &flowed);
        assert!(e1 < e0, "no descent: {e0} -> {e1}");

        // The exact wall is a fixed point to rounding accuracy.
        let wall = RealField2::sample(
            g,
            |x| spec.exact_wall(x).expect("gamma=3"),
            spec.b_state(),
            spec.a_state(),
        );
        let moved = gradient_flow(&spec, &wall, dt, 1).expect("flow runs");
        let mut worst = 0.0f64;
        for i in 0..g.len() {
            worst = worst.max((moved.u1[i] - wall.u1[i]).abs());
            worst = worst.max((moved.u2[i] - wall.u2[i]).abs());
        }
        // The closed-form wall is a fixed point up to the discretization
        // residual: one step moves by exactly dt * residual.
        let bound = dt * residual_sup(&spec, &wall);
        assert!(worst <= 1.05 * bound + 1e-15, "fixed point drifted by {worst}, bound {bound}");
        assert!(bound < 1e-6, "grid too coarse for the fixed-point check: {bound}");

        gradient_flow(&spec, &guess, g.spacing(), 1).expect_err("dt above h^2/4 is rejected");
    }

    #[test]
    fn newton_matches_the_exact_wall_at_gamma_3() {
        let spec = sym_cubic(3.0);
        let g = grid(20.0, 4095);
        let report = solve_wall(&spec, g).expect("solver converges");
        assert!(report.residual_sup <= 1e-10, "residual {}", report.residual_sup);

        let refined = report.refined.as_ref().expect("refinement on by default");
        let mut sup = 0.0f64;
        let mut sup_raw = 0.0f64;
        for i in 0..g.len() {
            let want = spec.exact_wall(g.x(i)).expect("gamma=3");
            sup = sup.max((refined.u1[i] - want[0]).abs());
            sup = sup.max((refined.u2[i] - want[1]).abs());
            sup_raw = sup_raw.max((report.profile.u1[i] - want[0]).abs());
            sup_raw = sup_raw.max((report.profile.u2[i] - want[1]).abs());
        }
        assert!(sup <= 1e-6, "sup distance to the closed form: {sup}");
        // The uncorrected discrete solution sits at the truncation floor,
        // a bit above 1e-6 at this spacing; the correction field records
        // exactly that gap.
        assert!(sup_raw <= 2e-6, "raw sup distance {sup_raw}");
        let corr = report.refinement_correction.expect("refinement on");
        assert!((corr - sup_raw).abs() <= 0.2 * sup_raw, "correction {corr} vs raw gap {sup_raw}");

        let want_e = std::f64::consts::SQRT_2 / 3.0;
        assert!((report.energy - want_e).abs() <= 1e-6, "energy {}", report.energy);
        assert!((report.u1_at_0 - 0.5).abs() <= 1e-6);
        assert!(report.center.abs() <= 1e-8, "center {}", report.center);
        assert!(report.monotone == [true, true]);
        let defect = report.symmetric_defect.expect("symmetric kind");
        assert!(defect <= 1e-8, "symmetry defect {defect}");
        assert!((report.mass_center).abs() <= 1e-8, "mass center {}", report.mass_center);
    }

    #[test]
    fn center_values_match_the_shooting_oracle() {
        // Expected center values u1(0) = u2(0) of the reflection-symmetric
        // wall, frozen from an independent oracle: bisection shooting on the
        // traveling-frame ODE from the diagonal, with the launch slope
        // eliminated through the conserved quantity |U'|^2 - W(U) = 0 and
        // rtol 1e-12 integration. A dense scan over the launch value found a
        // single connection for each coupling, so these are not one of
        // several branches. Note the value coincides with the interior
        // equilibrium 1/sqrt(1+gamma) only at gamma=3 (0.5 exactly); away
        // from the integrable point the wall crosses the diagonal near, but
        // not through, that equilibrium (1.6e-2 low at gamma=1.5, 2.4e-2
        // high at gamma=5).
        for (gamma, want) in [(1.5, 0.6163036756), (2.0, 0.5637240344), (5.0, 0.4324830213)] {
            let spec = sym_cubic(gamma);
            let l = spec.default_half_width();
            let g = grid(l, (40.0 * l).round() as usize - 1);
            let report = solve_wall(&spec, g).expect("solver converges");
            assert!(
                (report.u1_at_0 - want).abs() < 1e-4,
                "gamma={gamma}: u1(0)={} vs {want}",
                report.u1_at_0
            );
        }
    }

    #[test]
    fn decay_rates_match_the_linearization() {
        for gamma in [1.5, 5.0] {
            let spec = sym_cubic(gamma);
            let l = spec.default_half_width();
            let g = grid(l, (100.0 * l).round() as usize - 1);
            let report = solve_wall(&spec, g).expect("solver converges");
            let props = verify_wall_properties(&spec, &report);
            assert!(
                (report.decay_left - props.expected_left).abs() <= 0.02 * props.expected_left,
                "gamma={gamma}: left rate {} vs {}",
                report.decay_left,
                props.expected_left
            );
            assert!(
                (report.decay_right - props.expected_right).abs() <= 0.02 * props.expected_right,
                "gamma={gamma}: right rate {} vs {}",
                report.decay_right,
                props.expected_right
            );
            assert!(props.pass, "property report failed: {props:?}");
        }
    }

    #[test]
    fn converged_wall_is_a_local_minimum() {
        let spec = sym_cubic(3.0);
        let g = grid(20.0, 1023);
        let report = solve_wall(&spec, g).expect("solver converges");
        let e0 = energy(&spec, &report.profile);
        let h = g.spacing();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let mut dir = vec![0.0; 2 * g.len()];
            let third = g.len() / 3;
            for i in third..2 * third {
                dir[2 * i] = rng.gen_range(-1.0..1.0);
                dir[2 * i + 1] = rng.gen_range(-1.0..1.0);
            }
            let norm = (h * dir.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let eps = 1e-3;
            let mut perturbed = report.profile.clone();
            for i in 0..g.len() {
                perturbed.u1[i] += eps * dir[2 * i] / norm;
                perturbed.u2[i] += eps * dir[2 * i + 1] / norm;
            }
            let e = energy(&spec, &perturbed);
            assert!(e >= e0 - 1e-10, "descent direction found: {} -> {}", e0, e);
        }
    }

    #[test]
    fn energy_is_translation_invariant() {
        let spec = sym_cubic(2.0);
        let g = grid(20.0, 2047);
        let base = solve_wall(&spec, g).expect("solver converges");
        let shifted_guess = initial_guess(&spec, g).shifted(2.0);
        let other = solve_wall_from(&spec, g, Some(&shifted_guess), SolveOptions::default())
            .expect("solver converges");
        assert!(
            (base.energy - other.energy).abs() <= 1e-8,
            "energies {} vs {}",
            base.energy,
            other.energy
        );
    }

    #[test]
    fn normalize_center_recovers_a_known_shift() {
        let spec = sym_cubic(3.0);
        let g = grid(20.0, 2047);
        let report = solve_wall(&spec, g).expect("solver converges");
        let h = g.spacing();

        // A wall moved right by 1.5 has its crossing at +1.5.
        let moved = report.profile.shifted(-1.5);
        let (centered, info) = normalize_center(&spec, &moved).expect("single crossing");
        assert!(
            (info.crossing - 1.5).abs() <= h * h,
            "recovered crossing {} vs 1.5",
            info.crossing
        );
        let recentered = find_crossing(&centered).expect("single crossing");
        assert!(recentered.abs() <= 1e-9, "crossing after normalization: {recentered}");

        // Already-centered symmetric wall reports zero shift and zero
        // mass center.
        let (_, info) = normalize_center(&spec, &report.profile).expect("single crossing");
        assert!(info.crossing.abs() <= 1e-9, "crossing {}", info.crossing);
        assert!(info.mass_center.abs() <= 1e-8, "mass center {}", info.mass_center);
    }

    #[test]
    fn crossing_detection_rejects_degenerate_fields() {
        let spec = sym_cubic(3.0);
        let g = grid(10.0, 255);
        let a = spec.a_state();
        let flat = RealField2::constant(g, a, a, a);
        find_crossing(&flat).expect_err("no crossing in the pure a-state");
    }

    #[test]
    fn solved_energies_converge_at_second_order() {
        let spec = sym_cubic(3.0);
        let want = std::f64::consts::SQRT_2 / 3.0;
        let e = |n: usize| {
            let report = solve_wall(&spec, grid(20.0, n)).expect("solver converges");
            (report.energy - want).abs()
        };
        let ratio = e(1023) / e(2047);
        assert!((3.3..4.7).contains(&ratio), "Richardson ratio {ratio}");
    }

    #[test]
    fn general_cubic_walls_obey_the_ellipse_bound() {
        let params = [
            (1.0, 1.0, 1.5, 1.0),
            (1.3, 0.8, 1.5, 0.9),
            (2.0, 0.5, 1.2, 1.1),
            (0.7, 1.4, 1.3, 0.8),
            (1.0, 2.0, 2.5, 1.2),
        ];
        for (g11, g22, g12, mu) in params {
            let spec = PotentialSpec::new(PotentialKind::GeneralCubic { g11, g22, g12, mu })
                .expect("valid kind");
            let l = spec.default_half_width();
            let g = grid(l, (50.0 * l).round() as usize - 1);
            let report = solve_wall(&spec, g).expect("solver converges");
            let props = verify_wall_properties(&spec, &report);
            assert!(
                props.ellipse_max <= 1.0 + 1e-10,
                "({g11},{g22},{g12},{mu}): ellipse max {}",
                props.ellipse_max
            );
            assert!(props.nonnegative, "({g11},{g22},{g12},{mu}): min {}", props.min_value);
        }
    }
}
