//! Linearized operators about a wall, their spectra, the quadratic-form
//! identities satisfied by coefficient-modulated zero modes, and the
//! constrained Rayleigh-quotient minimization that decides spectral
//! stability.
//!
//! The second variation of the energy splits into a self-adjoint pair: the
//! real-part operator (carrying the translation mode in its kernel) and the
//! diagonal imaginary-part operator (carrying the gauge modes). Both are
//! discretized with homogeneous Dirichlet conditions, since perturbations
//! decay at infinity even though the wall itself does not.
//!
//! Layout: the two components are interleaved node by node, giving a
//! symmetric banded matrix of bandwidth 2 (node coupling at distance 2,
//! component coupling at distance 1). A stacked component-block layout
//! would push the bandwidth to N+1 and make banded factorization
//! quadratically more expensive, so the interleaving is load-bearing.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{first_derivative, Grid, RealField2};
use crate::linalg::{deflated_solve, dot, norm2, smallest_eigs_banded, BandedLu, EigsResult, SymBanded};
use crate::model::{PotentialKind, PotentialSpec};

/// Which linearization a matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorLabel {
    Lplus,
    Lminus,
    LplusEps,
    LminusEps,
}

/// Symmetric banded discretization of one of the linearized operators.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    mat: SymBanded,
    grid: Grid,
    label: OperatorLabel,
}

impl OperatorMatrix {
    pub fn matrix(&self) -> &SymBanded {
        &self.mat
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mat.matvec(x, y);
    }

    /// Always zero: the storage is triangular by construction.
    pub fn symmetry_defect(&self) -> f64 {
        self.mat.symmetry_defect()
    }
}

pub(crate) fn interleave(u1: &[f64], u2: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; 2 * u1.len()];
    for i in 0..u1.len() {
        v[2 * i] = u1[i];
        v[2 * i + 1] = u2[i];
    }
    v
}

/// Interleaved centered derivative of the wall, the approximate translation
/// zero mode (not normalized).
pub fn discrete_derivative(field: &RealField2) -> Vec<f64> {
    let d1 = first_derivative(&field.grid, &field.u1, [field.left_bc[0], field.right_bc[0]]);
    let d2 = first_derivative(&field.grid, &field.u2, [field.left_bc[1], field.right_bc[1]]);
    interleave(&d1, &d2)
}

fn assemble_base(grid: Grid) -> SymBanded {
    let n = grid.len();
    let mut m = SymBanded::zeros(2 * n, 2);
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    for i in 0..n {
        m.set_rc(2 * i, 2 * i, 2.0 * inv_h2);
        m.set_rc(2 * i + 1, 2 * i + 1, 2.0 * inv_h2);
        if i + 1 < n {
            m.set_rc(2 * i, 2 * i + 2, -inv_h2);
            m.set_rc(2 * i + 1, 2 * i + 3, -inv_h2);
        }
    }
    m
}

/// Real-part linearization: kinetic part plus half the Hessian of W at the
/// wall, nodewise.
pub fn assemble_lplus(spec: &PotentialSpec, field: &RealField2) -> OperatorMatrix {
    let mut m = assemble_base(field.grid);
    for i in 0..field.grid.len() {
        let h = spec.hess(field.u1[i], field.u2[i]);
        m.add_rc(2 * i, 2 * i, 0.5 * h[0][0]);
        m.add_rc(2 * i + 1, 2 * i + 1, 0.5 * h[1][1]);
        m.add_rc(2 * i, 2 * i + 1, 0.5 * h[0][1]);
    }
    OperatorMatrix { mat: m, grid: field.grid, label: OperatorLabel::Lplus }
}

/// Imaginary-part linearization: kinetic part plus the diagonal potential
/// (F_1, F_2) at the wall; the two components never couple.
pub fn assemble_lminus(spec: &PotentialSpec, field: &RealField2) -> OperatorMatrix {
    let mut m = assemble_base(field.grid);
    for i in 0..field.grid.len() {
        let u1 = field.u1[i];
        let u2 = field.u2[i];
        let [f1, f2] = spec.fj(u1 * u1, u2 * u2);
        m.add_rc(2 * i, 2 * i, f1);
        m.add_rc(2 * i + 1, 2 * i + 1, f2);
    }
    OperatorMatrix { mat: m, grid: field.grid, label: OperatorLabel::Lminus }
}

/// Real-part linearization with an external potential added to both
/// diagonal entries.
pub fn assemble_lplus_external(
    spec: &PotentialSpec,
    field: &RealField2,
    eps: f64,
    v: &dyn Fn(f64) -> f64,
) -> OperatorMatrix {
    let mut op = assemble_lplus(spec, field);
    for i in 0..field.grid.len() {
        let ev = eps * v(field.grid.x(i));
        op.mat.add_rc(2 * i, 2 * i, ev);
        op.mat.add_rc(2 * i + 1, 2 * i + 1, ev);
    }
    op.label = OperatorLabel::LplusEps;
    op
}

/// Imaginary-part linearization with an external potential.
pub fn assemble_lminus_external(
    spec: &PotentialSpec,
    field: &RealField2,
    eps: f64,
    v: &dyn Fn(f64) -> f64,
) -> OperatorMatrix {
    let mut op = assemble_lminus(spec, field);
    for i in 0..field.grid.len() {
        let ev = eps * v(field.grid.x(i));
        op.mat.add_rc(2 * i, 2 * i, ev);
        op.mat.add_rc(2 * i + 1, 2 * i + 1, ev);
    }
    op.label = OperatorLabel::LminusEps;
    op
}

/// Smallest eigenpairs of an assembled operator.
pub fn smallest_eigs(m: &OperatorMatrix, k: usize) -> Result<EigsResult> {
    smallest_eigs_banded(&m.mat, k, 1e-8)
}

/// Cosine of the angle between a vector and the discrete translation mode.
pub fn zero_mode_overlap(field: &RealField2, v: &[f64]) -> f64 {
    let g = discrete_derivative(field);
    (dot(&g, v) / (norm2(&g) * norm2(v))).abs()
}

/// Residuals of the two gauge kernel modes (u1, 0) and (0, u2) under the
/// imaginary-part differential operator. The modes do not decay, so the
/// second derivative is taken with the modes' own boundary values rather
/// than the homogeneous Dirichlet values of the matrix; this probes the
/// differential action, which is what annihilates them.
pub fn lminus_mode_residuals(spec: &PotentialSpec, field: &RealField2) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (j, slot) in out.iter_mut().enumerate() {
        let (vals, bc) = field.component(j);
        let lap = crate::grid::second_derivative(&field.grid, vals, bc);
        let mut res_sq = 0.0;
        let mut norm_sq = 0.0;
        for i in 0..field.grid.len() {
            let u1 = field.u1[i];
            let u2 = field.u2[i];
            let f = spec.fj(u1 * u1, u2 * u2)[j];
            let r = -lap[i] + f * vals[i];
            res_sq += r * r;
            norm_sq += vals[i] * vals[i];
        }
        *slot = (res_sq / norm_sq).sqrt();
    }
    out
}

/// Coefficient functions (with analytic derivatives) used to modulate the
/// kernel modes in the quadratic-form identities.
pub trait TrialCoefficients {
    fn value(&self, j: usize, x: f64) -> f64;
    fn deriv(&self, j: usize, x: f64) -> f64;
}

/// Low-order sine series vanishing at both endpoints; smooth and "compactly
/// supported" in the discrete sense.
#[derive(Debug, Clone)]
pub struct SinSeries {
    half_width: f64,
    coeffs: [[f64; 6]; 2],
}

impl SinSeries {
    pub fn random(half_width: f64, rng: &mut impl Rng) -> SinSeries {
        let mut coeffs = [[0.0; 6]; 2];
        for row in &mut coeffs {
            for (k, c) in row.iter_mut().enumerate() {
                *c = rng.gen_range(-1.0..1.0) / (k as f64 + 1.0);
            }
        }
        SinSeries { half_width, coeffs }
    }
}

impl TrialCoefficients for SinSeries {
    fn value(&self, j: usize, x: f64) -> f64 {
        let l = self.half_width;
        let s = (x + l) / (2.0 * l) * std::f64::consts::PI;
        self.coeffs[j]
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k as f64 + 1.0) * s).sin())
            .sum()
    }

    fn deriv(&self, j: usize, x: f64) -> f64 {
        let l = self.half_width;
        let s = (x + l) / (2.0 * l) * std::f64::consts::PI;
        let w = std::f64::consts::PI / (2.0 * l);
        self.coeffs[j]
            .iter()
            .enumerate()
            .map(|(k, c)| c * (k as f64 + 1.0) * w * ((k as f64 + 1.0) * s).cos())
            .sum()
    }
}

/// Constant coefficient pair (the translation and gauge directions).
#[derive(Debug, Clone, Copy)]
pub struct ConstantPair(pub f64, pub f64);

impl TrialCoefficients for ConstantPair {
    fn value(&self, j: usize, _x: f64) -> f64 {
        if j == 0 {
            self.0
        } else {
            self.1
        }
    }

    fn deriv(&self, _j: usize, _x: f64) -> f64 {
        0.0
    }
}

/// Both sides of the two quadratic-form identities, with relative defects.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityDefects {
    pub lplus_direct: f64,
    pub lplus_identity: f64,
    pub lplus_defect: f64,
    pub lminus_direct: f64,
    pub lminus_identity: f64,
    pub lminus_defect: f64,
}

/// Evaluate the quadratic form of a linearization on a field built from
/// coefficient-modulated modes, using the field's natural boundary values
/// for the kinetic part (the modes need not decay).
fn quadratic_form_natural(
    grid: &Grid,
    pot: impl Fn(usize) -> [[f64; 2]; 2],
    phi1: &[f64],
    phi2: &[f64],
    ghosts1: [f64; 2],
    ghosts2: [f64; 2],
) -> f64 {
    let h = grid.spacing();
    let lap1 = crate::grid::second_derivative(grid, phi1, ghosts1);
    let lap2 = crate::grid::second_derivative(grid, phi2, ghosts2);
    let mut total = 0.0;
    for i in 0..grid.len() {
        let p = pot(i);
        let y1 = -lap1[i] + p[0][0] * phi1[i] + p[0][1] * phi2[i];
        let y2 = -lap2[i] + p[1][0] * phi1[i] + p[1][1] * phi2[i];
        total += phi1[i] * y1 + phi2[i] * y2;
    }
    h * total
}

/// Check the two closing identities for coefficient-modulated modes on a
/// symmetric-cubic wall: the real-part form against
/// `int [(A1')^2 (u1')^2 + (A2')^2 (u2')^2 - 2 gamma u1 u2 u1' u2' (A1-A2)^2]`
/// and the imaginary-part form against `int [(B1')^2 u1^2 + (B2')^2 u2^2]`.
pub fn quadratic_form_identity_check(
    spec: &PotentialSpec,
    field: &RealField2,
    trial: &dyn TrialCoefficients,
) -> Result<IdentityDefects> {
    let gamma = match spec.kind() {
        PotentialKind::SymmetricCubic { gamma } => gamma,
        other => {
            return Err(Error::Unsupported(format!(
                "the closed-form quadratic identities are stated for symmetric-cubic, got {other}"
            )))
        }
    };
    let grid = field.grid;
    let n = grid.len();
    let h = grid.spacing();
    let l = grid.half_width();
    let u1p = first_derivative(&grid, &field.u1, [field.left_bc[0], field.right_bc[0]]);
    let u2p = first_derivative(&grid, &field.u2, [field.left_bc[1], field.right_bc[1]]);

    // Real-part side: Phi = (A1 u1', A2 u2').
    let a_at = |j: usize, x: f64| trial.value(j, x);
    let phi1: Vec<f64> = (0..n).map(|i| a_at(0, grid.x(i)) * u1p[i]).collect();
    let phi2: Vec<f64> = (0..n).map(|i| a_at(1, grid.x(i)) * u2p[i]).collect();
    // The wall derivative is exponentially small at the ghost nodes.
    let lplus_direct = quadratic_form_natural(
        &grid,
        |i| {
            let hw = spec.hess(field.u1[i], field.u2[i]);
            [[0.5 * hw[0][0], 0.5 * hw[0][1]], [0.5 * hw[0][1], 0.5 * hw[1][1]]]
        },
        &phi1,
        &phi2,
        [0.0, 0.0],
        [0.0, 0.0],
    );
    let mut lplus_identity = 0.0;
    for i in 0..n {
        let x = grid.x(i);
        let a1p = trial.deriv(0, x);
        let a2p = trial.deriv(1, x);
        let da = a_at(0, x) - a_at(1, x);
        lplus_identity += a1p * a1p * u1p[i] * u1p[i] + a2p * a2p * u2p[i] * u2p[i]
            - 2.0 * gamma * field.u1[i] * field.u2[i] * u1p[i] * u2p[i] * da * da;
    }
    lplus_identity *= h;

    // Imaginary-part side: Phi = (B1 u1, B2 u2); the modes saturate at the
    // equilibria, so the natural ghosts are B(+-L) times the boundary values.
    let psi1: Vec<f64> = (0..n).map(|i| a_at(0, grid.x(i)) * field.u1[i]).collect();
    let psi2: Vec<f64> = (0..n).map(|i| a_at(1, grid.x(i)) * field.u2[i]).collect();
    let g1 = [a_at(0, -l) * field.left_bc[0], a_at(0, l) * field.right_bc[0]];
    let g2 = [a_at(1, -l) * field.left_bc[1], a_at(1, l) * field.right_bc[1]];
    let lminus_direct = quadratic_form_natural(
        &grid,
        |i| {
            let u1 = field.u1[i];
            let u2 = field.u2[i];
            let [f1, f2] = spec.fj(u1 * u1, u2 * u2);
            [[f1, 0.0], [0.0, f2]]
        },
        &psi1,
        &psi2,
        g1,
        g2,
    );
    let mut lminus_identity = 0.0;
    for i in 0..n {
        let x = grid.x(i);
        let b1p = trial.deriv(0, x);
        let b2p = trial.deriv(1, x);
        lminus_identity +=
            b1p * b1p * field.u1[i] * field.u1[i] + b2p * b2p * field.u2[i] * field.u2[i];
    }
    lminus_identity *= h;
    // Ghost contributions of the identity side vanish for endpoint-clamped
    // trials; constant trials have zero derivative anyway.

    let defect = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-9);
    Ok(IdentityDefects {
        lplus_direct,
        lplus_identity,
        lplus_defect: defect(lplus_direct, lplus_identity),
        lminus_direct,
        lminus_identity,
        lminus_defect: defect(lminus_direct, lminus_identity),
    })
}

/// Outcome of the constrained Rayleigh minimization.
#[derive(Debug, Clone, Serialize)]
pub struct RayleighOutcome {
    /// min over perturbations orthogonal to the translation mode of
    /// (imaginary-part form) / (inverse real-part form); this is -lambda^2.
    pub neg_lambda_sq: f64,
    pub iterations: usize,
    /// All 50 random probes of the inverse-operator form were positive.
    pub denominator_positive: bool,
    /// A nonpositive denominator was encountered during minimization.
    pub lplus_indefinite: bool,
}

fn project_off(v: &mut [f64], g: &[f64]) {
    let d = dot(v, g);
    for (vi, gi) in v.iter_mut().zip(g) {
        *vi -= d * gi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        for vi in v.iter_mut() {
            *vi /= n;
        }
    }
    n
}

/// Minimize the stability Rayleigh quotient over the orthogonal complement
/// of the translation mode by projected nonlinear conjugate gradients with
/// exact (rational) line search. Restarted from several seeds; the smallest
/// converged value wins.
pub fn rayleigh_minimum(
    lplus: &OperatorMatrix,
    lminus: &OperatorMatrix,
    field: &RealField2,
) -> Result<RayleighOutcome> {
    let n2 = 2 * field.grid.len();
    let mut g = discrete_derivative(field);
    normalize(&mut g);

    let lu = BandedLu::factor(&lplus.mat, 0.0)
        .map_err(|e| Error::Numerical(format!("real-part factorization failed: {e}")))?;
    let inv = |r: &[f64]| -> Vec<f64> {
        let mut y = deflated_solve(&lu, &g, r);
        project_off(&mut y, &g);
        y
    };

    // Denominator positivity probe on random directions.
    let mut rng = ChaCha8Rng::seed_from_u64(0xD0_0B1E);
    let mut denominator_positive = true;
    for _ in 0..50 {
        let mut phi: Vec<f64> = (0..n2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        project_off(&mut phi, &g);
        normalize(&mut phi);
        let y = inv(&phi);
        if dot(&y, &phi) <= 0.0 {
            denominator_positive = false;
        }
    }

    let mut best: Option<f64> = None;
    let mut total_iterations = 0;
    let mut lplus_indefinite = false;

    // Seed 0 starts from the bottom of the imaginary-part spectrum, the
    // natural candidate minimizer; the rest are random.
    let lminus_ground = smallest_eigs_banded(&lminus.mat, 1, 1e-6).ok();
    for restart in 0..4 {
        let mut phi: Vec<f64> = match (restart, &lminus_ground) {
            (0, Some(e)) => e.vectors[0].clone(),
            _ => (0..n2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        project_off(&mut phi, &g);
        if normalize(&mut phi) == 0.0 {
            continue;
        }

        let mut mq_phi = vec![0.0; n2];
        lminus.apply(&phi, &mut mq_phi);
        let mut y = inv(&phi);
        let mut q = dot(&phi, &mq_phi);
        let mut p = dot(&phi, &y);
        if p <= 0.0 {
            lplus_indefinite = true;
            continue;
        }
        let mut r_val = q / p;

        let mut grad_prev: Vec<f64> = Vec::new();
        let mut dir: Vec<f64> = Vec::new();
        let mut stall = 0;
        for it in 0..600 {
            total_iterations = it;
            // grad R = (2/p) (Lminus phi - R * Lplus^{-1} phi), projected.
            let mut grad: Vec<f64> = (0..n2).map(|i| 2.0 / p * (mq_phi[i] - r_val * y[i])).collect();
            project_off(&mut grad, &g);
            let gnorm = norm2(&grad);
            if gnorm <= 1e-13 * r_val.abs().max(1.0) {
                break;
            }
            if dir.is_empty() {
                dir = grad.iter().map(|v| -v).collect();
            } else {
                let num: f64 = grad.iter().zip(&grad_prev).map(|(a, b)| a * (a - b)).sum();
                let den: f64 = grad_prev.iter().map(|v| v * v).sum();
                let beta = (num / den).max(0.0);
                for i in 0..n2 {
                    dir[i] = -grad[i] + beta * dir[i];
                }
                project_off(&mut dir, &g);
            }
            grad_prev = grad;

            // Exact line search on the rational function
            // R(t) = (q_pp + 2 t q_pd + t^2 q_dd) / (p_pp + 2 t p_pd + t^2 p_dd).
            let mut mq_d = vec![0.0; n2];
            lminus.apply(&dir, &mut mq_d);
            let yd = inv(&dir);
            let qpd = 0.5 * (dot(&dir, &mq_phi) + dot(&phi, &mq_d));
            let qdd = dot(&dir, &mq_d);
            let ppd = 0.5 * (dot(&dir, &y) + dot(&phi, &yd));
            let pdd = dot(&dir, &yd);
            let a = qdd * ppd - qpd * pdd;
            let b = qdd * p - q * pdd;
            let c = qpd * p - q * ppd;
            let mut candidates = Vec::new();
            if a.abs() > 1e-300 {
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    candidates.push((-b + sq) / (2.0 * a));
                    candidates.push((-b - sq) / (2.0 * a));
                }
            } else if b.abs() > 1e-300 {
                candidates.push(-c / b);
            }
            let eval = |t: f64| -> f64 {
                let qn = q + 2.0 * t * qpd + t * t * qdd;
                let pn = p + 2.0 * t * ppd + t * t * pdd;
                if pn > 0.0 {
                    qn / pn
                } else {
                    f64::INFINITY
                }
            };
            let mut t_best = 0.0;
            let mut r_best = r_val;
            for t in candidates {
                if t.is_finite() {
                    let r_t = eval(t);
                    if r_t < r_best {
                        r_best = r_t;
                        t_best = t;
                    }
                }
            }
            if t_best == 0.0 {
                break;
            }
            for i in 0..n2 {
                phi[i] += t_best * dir[i];
            }
            project_off(&mut phi, &g);
            normalize(&mut phi);
            lminus.apply(&phi, &mut mq_phi);
            y = inv(&phi);
            q = dot(&phi, &mq_phi);
            p = dot(&phi, &y);
            if p <= 0.0 {
                lplus_indefinite = true;
                break;
            }
            let r_new = q / p;
            if (r_val - r_new).abs() <= 1e-14 * r_val.abs().max(1e-3) {
                stall += 1;
                if stall >= 3 {
                    r_val = r_new;
                    break;
                }
            } else {
                stall = 0;
            }
            r_val = r_new;
        }
        best = Some(match best {
            Some(v) => v.min(r_val),
            None => r_val,
        });
    }

    let neg_lambda_sq = best.ok_or_else(|| {
        Error::Numerical("Rayleigh minimization produced no admissible direction".into())
    })?;
    Ok(RayleighOutcome {
        neg_lambda_sq,
        iterations: total_iterations,
        denominator_positive,
        lplus_indefinite,
    })
}

/// Stability verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

/// Spectra of both linearizations plus the constrained stability quotient.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub lplus_eigs: Vec<f64>,
    pub lminus_eigs: Vec<f64>,
    pub zero_mode_overlap: f64,
    pub essential_edge: f64,
    /// Gap between the two lowest real-part eigenvalues; simplicity of the
    /// zero mode requires it to stay open.
    pub spectral_gap: f64,
    pub gap_ok: bool,
    pub neg_lambda_sq: f64,
    pub denominator_positive: bool,
    pub lplus_indefinite: bool,
    pub verdict: Verdict,
}

/// Full spectral analysis of a converged wall with `k` eigenvalues per
/// operator.
pub fn stability_spectrum(
    spec: &PotentialSpec,
    field: &RealField2,
    k: usize,
) -> Result<SpectralReport> {
    if k < 2 {
        return Err(Error::InvalidArgument("need k >= 2 to measure the spectral gap".into()));
    }
    let lplus = assemble_lplus(spec, field);
    let lminus = assemble_lminus(spec, field);
    let ep = smallest_eigs(&lplus, k)?;
    let em = smallest_eigs(&lminus, k)?;
    let overlap = zero_mode_overlap(field, &ep.vectors[0]);
    let gap = ep.values[1] - ep.values[0];
    let gap_ok = gap >= 0.1;
    let rayleigh = rayleigh_minimum(&lplus, &lminus, field)?;
    let verdict = if !gap_ok || !rayleigh.denominator_positive || rayleigh.lplus_indefinite {
        Verdict::Marginal
    } else if rayleigh.neg_lambda_sq >= -1e-6 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    Ok(SpectralReport {
        lplus_eigs: ep.values,
        lminus_eigs: em.values,
        zero_mode_overlap: overlap,
        essential_edge: spec.essential_edge(),
        spectral_gap: gap,
        gap_ok,
        neg_lambda_sq: rayleigh.neg_lambda_sq,
        denominator_positive: rayleigh.denominator_positive,
        lplus_indefinite: rayleigh.lplus_indefinite,
        verdict,
    })
}

/// Cross-validation of the Rayleigh minimum on a coarse grid against two
/// independent routes: a dense eigensolve of the full non-symmetric
/// linearization and a dense projected generalized eigenproblem.
#[derive(Debug, Clone, Serialize)]
pub struct CrossValidation {
    /// Constrained Rayleigh minimum from the conjugate-gradient route.
    pub rayleigh_min: f64,
    /// Smallest eigenvalue of the dense projected pencil (same quantity).
    pub pencil_min: f64,
    /// Squared frequency of the dense non-symmetric eigensolve closest to
    /// the Rayleigh minimum.
    pub nearest_nu: f64,
    /// |rayleigh_min - nearest_nu|.
    pub nu_gap: f64,
    /// Largest |Re lambda| among eigenvalues away from the zero cluster.
    pub max_re_lambda: f64,
    /// Eigenvalues inside the zero cluster (translation and gauge modes).
    pub zero_cluster: usize,
}

/// Run the cross-validation battery on a (coarse) wall.
pub fn cross_validate(spec: &PotentialSpec, field: &RealField2) -> Result<CrossValidation> {
    let lplus = assemble_lplus(spec, field);
    let lminus = assemble_lminus(spec, field);
    let rayleigh = rayleigh_minimum(&lplus, &lminus, field)?;

    let n2 = 2 * field.grid.len();
    let dp = lplus.mat.to_dense();
    let dm = lminus.mat.to_dense();

    // Dense projected pencil: Q spans the complement of the translation
    // mode; solve Q^T Lminus Q v = nu Q^T Lplus^{-1} Q v via Cholesky
    // reduction to a symmetric problem.
    let mut g = discrete_derivative(field);
    normalize(&mut g);
    let q = householder_complement(&g);
    let a_proj = q.transpose() * &dm * &q;
    let lu = BandedLu::factor(&lplus.mat, 0.0)
        .map_err(|e| Error::Numerical(format!("real-part factorization failed: {e}")))?;
    let mut inv_cols = DMatrix::<f64>::zeros(n2, n2 - 1);
    for c in 0..n2 - 1 {
        let col: Vec<f64> = (0..n2).map(|r| q[(r, c)]).collect();
        let y = deflated_solve(&lu, &g, &col);
        for r in 0..n2 {
            inv_cols[(r, c)] = y[r];
        }
    }
    let b_proj = q.transpose() * inv_cols;
    let b_sym = 0.5 * (&b_proj + b_proj.transpose());
    let chol = nalgebra::Cholesky::new(b_sym)
        .ok_or_else(|| Error::Numerical("projected inverse form is not positive definite".into()))?;
    let linv = chol.l().try_inverse().ok_or_else(|| {
        Error::Numerical("Cholesky factor of the projected form is singular".into())
    })?;
    let c_sym = &linv * a_proj * linv.transpose();
    let c_sym = 0.5 * (&c_sym + c_sym.transpose());
    let pencil_eigs = c_sym.symmetric_eigenvalues();
    let pencil_min = pencil_eigs.iter().cloned().fold(f64::INFINITY, f64::min);

    // Dense non-symmetric route: eigenvalues of [[0, Lminus], [-Lplus, 0]].
    let mut big = DMatrix::<f64>::zeros(2 * n2, 2 * n2);
    for r in 0..n2 {
        for c in 0..n2 {
            big[(r, n2 + c)] = dm[(r, c)];
            big[(n2 + r, c)] = -dp[(r, c)];
        }
    }
    let eigs: Vec<Complex<f64>> = big.complex_eigenvalues().iter().cloned().collect();
    let zero_radius = 1e-2;
    let mut zero_cluster = 0;
    let mut max_re: f64 = 0.0;
    let mut nearest_nu = f64::INFINITY;
    let mut nu_gap = f64::INFINITY;
    for lam in &eigs {
        if lam.norm() <= zero_radius {
            zero_cluster += 1;
            continue;
        }
        max_re = max_re.max(lam.re.abs());
        let nu = lam.im * lam.im;
        let gap = (nu - rayleigh.neg_lambda_sq).abs();
        if gap < nu_gap {
            nu_gap = gap;
            nearest_nu = nu;
        }
    }

    Ok(CrossValidation {
        rayleigh_min: rayleigh.neg_lambda_sq,
        pencil_min,
        nearest_nu,
        nu_gap,
        max_re_lambda: max_re,
        zero_cluster,
    })
}

/// Orthonormal basis of the complement of a unit vector, via one
/// Householder reflection (all columns of H except the one mapped onto g).
fn householder_complement(g: &[f64]) -> DMatrix<f64> {
    let n = g.len();
    // v = g + sign(g0) e0; H = I - 2 v v^T / (v^T v) maps e0 onto -sign(g0) g.
    let sign = if g[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = g.to_vec();
    v[0] += sign;
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    let mut q = DMatrix::<f64>::zeros(n, n - 1);
    for c in 1..n {
        for r in 0..n {
            let id = if r == c { 1.0 } else { 0.0 };
            q[(r, c - 1)] = id - 2.0 * v[r] * v[c] / vtv;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::residual_sup;
    use crate::model::PotentialKind;
    use crate::profile::{solve_wall, WallReport};
    use std::sync::OnceLock;

    fn sym_cubic(gamma: f64) -> PotentialSpec {
        PotentialSpec::new(PotentialKind::SymmetricCubic { gamma }).expect("valid kind")
    }

    /// The gamma=3 wall at h = 0.01 is shared across tests; solving it anew
    /// in every test would dominate the suite's runtime.
    fn wall_gamma3() -> &'static WallReport {
        static WALL: OnceLock<WallReport> = OnceLock::new();
        WALL.get_or_init(|| {
            let spec = sym_cubic(3.0);
            let grid = Grid::new(20.0, 3999).expect("valid grid");
            solve_wall(&spec, grid).expect("solver converges")
        })
    }

    #[test]
    fn lplus_annihilates_the_discrete_translation_mode() {
        let spec = sym_cubic(3.0);
        let wall = wall_gamma3();
        let lplus = assemble_lplus(&spec, &wall.profile);
        let g = discrete_derivative(&wall.profile);
        let mut y = vec![0.0; g.len()];
        lplus.apply(&g, &mut y);
        let ratio = norm2(&y) / norm2(&g);
        assert!(ratio <= 1e-4, "translation-mode residual {ratio}");
        assert_eq!(lplus.symmetry_defect(), 0.0);
    }

    #[test]
    fn lplus_boundary_block_matches_the_equilibrium_hessian() {
        let spec = sym_cubic(3.0);
        let wall = wall_gamma3();
        let lplus = assemble_lplus(&spec, &wall.profile);
        let grid = wall.profile.grid;
        let n = grid.len();
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let gamma = 3.0;
        // Right boundary node sits on the a-state: potential diag(2, gamma-1).
        let p11 = lplus.matrix().entry(2 * (n - 1), 2 * (n - 1)) - 2.0 * inv_h2;
        let p22 = lplus.matrix().entry(2 * n - 1, 2 * n - 1) - 2.0 * inv_h2;
        let p12 = lplus.matrix().entry(2 * (n - 1), 2 * n - 1);
        assert!((p11 - 2.0).abs() < 1e-6, "p11 {p11}");
        assert!((p22 - (gamma - 1.0)).abs() < 1e-6, "p22 {p22}");
        assert!(p12.abs() < 1e-6, "p12 {p12}");
    }

    #[test]
    fn lminus_is_diagonal_and_annihilates_the_gauge_modes() {
        let spec = sym_cubic(3.0);
        let wall = wall_gamma3();
        let lminus = assemble_lminus(&spec, &wall.profile);
        let grid = wall.profile.grid;
        let n = grid.len();
        // No component coupling anywhere.
        for i in 0..n {
            assert_eq!(lminus.matrix().entry(2 * i, 2 * i + 1), 0.0);
        }
        // The first-component potential vanishes where the wall sits on the
        // a-state.
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let f1_right = lminus.matrix().entry(2 * (n - 1), 2 * (n - 1)) - 2.0 * inv_h2;
        assert!(f1_right.abs() < 1e-6, "potential at the right boundary: {f1_right}");

        let residuals = lminus_mode_residuals(&spec, &wall.profile);
        assert!(residuals[0] <= 1e-4, "mode (u1, 0): {}", residuals[0]);
        assert!(residuals[1] <= 1e-4, "mode (0, u2): {}", residuals[1]);
    }

    #[test]
    fn lplus_spectrum_has_the_zero_mode_and_open_gap() {
        let spec = sym_cubic(3.0);
        let wall = wall_gamma3();
        let lplus = assemble_lplus(&spec, &wall.profile);
        let eigs = smallest_eigs(&lplus, 4).expect("eigsolve converges");
        assert!(eigs.values[0].abs() <= 1e-4, "lambda0 {}", eigs.values[0]);
        let overlap = zero_mode_overlap(&wall.profile, &eigs.vectors[0]);
        assert!(overlap >= 0.999, "overlap {overlap}");
        let gap = eigs.values[1] - eigs.values[0];
        assert!(gap >= 0.1, "gap {gap}");
        // The spectrum above the gap approaches the essential edge.
        assert!(eigs.values[1] <= spec.essential_edge() + 0.1, "lambda1 {}", eigs.values[1]);
        for r in &eigs.residuals {
            assert!(*r <= 1e-8, "eigenresidual {r}");
        }
    }

    #[test]
    fn lminus_spectrum_is_nonnegative_with_soft_bottom() {
        let spec = sym_cubic(3.0);
        let wall = wall_gamma3();
        let lminus = assemble_lminus(&spec, &wall.profile);
        let eigs = smallest_eigs(&lminus, 3).expect("eigsolve converges");
        assert!(eigs.values[0] >= -1e-4, "bottom {}", eigs.values[0]);
        // Dirichlet truncation pushes the soft bottom slightly positive; it
        // must stay below the first box mode scale.
        assert!(eigs.values[0] <= 0.05, "bottom too stiff: {}", eigs.values[0]);
    }

    #[test]
    fn ground_mode_components_carry_the_derivative_signs() {
        let spec = sym_cubic(3.0);
        let wall = wall_gamma3();
        let lplus = assemble_lplus(&spec, &wall.profile);
        let eigs = smallest_eigs(&lplus, 2).expect("eigsolve converges");
        let v = &eigs.vectors[0];
        let n = wall.profile.grid.len();
        // Normalize the overall sign by the first component's center value.
        let sign = v[2 * (n / 2)].signum();
        let floor = 1e-7 * v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for i in 0..n {
            let c1 = sign * v[2 * i];
            let c2 = sign * v[2 * i + 1];
            if c1.abs() > floor {
                assert!(c1 > 0.0, "component 1 sign flips at node {i}: {c1}");
            }
            if c2.abs() > floor {
                assert!(c2 < 0.0, "component 2 sign flips at node {i}: {c2}");
            }
        }
    }

    #[test]
    fn discrete_eigenvalues_survive_domain_doubling() {
        let spec = sym_cubic(3.0);
        // Same spacing, doubled half-width.
        let g1 = Grid::new(20.0, 4095).expect("valid grid");
        let g2 = Grid::new(40.0, 8191).expect("valid grid");
        let w1 = solve_wall(&spec, g1).expect("solver converges");
        let w2 = solve_wall(&spec, g2).expect("solver converges");
        let e1 = smallest_eigs(&assemble_lplus(&spec, &w1.profile), 3).expect("eigsolve");
        let e2 = smallest_eigs(&assemble_lplus(&spec, &w2.profile), 3).expect("eigsolve");
        let edge = spec.essential_edge();
        let below1: Vec<f64> = e1.values.iter().cloned().filter(|v| *v < 0.95 * edge).collect();
        let below2: Vec<f64> = e2.values.iter().cloned().filter(|v| *v < 0.95 * edge).collect();
        assert!(!below1.is_empty(), "no discrete eigenvalue below the edge");
        assert_eq!(below1.len(), below2.len(), "{below1:?} vs {below2:?}");
        for (a, b) in below1.iter().zip(&below2) {
            assert!((a - b).abs() <= 1e-6, "eigenvalue drifted under doubling: {a} vs {b}");
        }
    }

    #[test]
    fn quadratic_identities_hold_for_constant_trials() {
        let spec = sym_cubic(3.0);
        let wall = wall_gamma3();
        let d = quadratic_form_identity_check(&spec, &wall.profile, &ConstantPair(1.0, 1.0))
            .expect("symmetric cubic");
        // Translation direction: both routes vanish.
        assert!(d.lplus_direct.abs() <= 1e-3, "direct {}", d.lplus_direct);
        assert!(d.lplus_identity.abs() <= 1e-12, "identity {}", d.lplus_identity);
        // Gauge direction: the identity side is exactly zero and the direct
        // side is the kernel-mode residual scale.
        assert!(d.lminus_direct.abs() <= 1e-3, "direct {}", d.lminus_direct);
        assert_eq!(d.lminus_identity, 0.0);

        let err = quadratic_form_identity_check(
            &PotentialSpec::new(PotentialKind::Quartic { gamma: 2.0 }).expect("valid"),
            &wall.profile,
            &ConstantPair(1.0, 1.0),
        );
        assert!(err.is_err(), "identities are symmetric-cubic only");
    }

    #[test]
    fn quadratic_identities_hold_for_random_trials() {
        use rand::SeedableRng;
        let spec = sym_cubic(3.0);
        let grid = Grid::new(20.0, 7999).expect("valid grid");
        let wall = solve_wall(&spec, grid).expect("solver converges");
        assert!(residual_sup(&spec, &wall.profile) <= 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(0x51D_3);
        for trial_idx in 0..20 {
            let trial = SinSeries::random(grid.half_width(), &mut rng);
            let d = quadratic_form_identity_check(&spec, &wall.profile, &trial)
                .expect("symmetric cubic");
            assert!(
                d.lplus_defect <= 1e-3,
                "trial {trial_idx}: real-part defect {} ({} vs {})",
                d.lplus_defect,
                d.lplus_direct,
                d.lplus_identity
            );
            assert!(
                d.lminus_defect <= 1e-3,
                "trial {trial_idx}: imaginary-part defect {} ({} vs {})",
                d.lminus_defect,
                d.lminus_direct,
                d.lminus_identity
            );
        }
    }

    #[test]
    fn walls_are_spectrally_stable() {
        for gamma in [1.5, 3.0, 5.0] {
            let spec = sym_cubic(gamma);
            let l = spec.default_half_width();
            let grid = Grid::new(l, (100.0 * l).round() as usize - 1).expect("valid grid");
            let wall = solve_wall(&spec, grid).expect("solver converges");
            let report = stability_spectrum(&spec, &wall.profile, 4).expect("spectrum");
            assert!(report.gap_ok, "gamma={gamma}: gap {}", report.spectral_gap);
            assert!(report.denominator_positive, "gamma={gamma}: denominator check failed");
            assert!(!report.lplus_indefinite, "gamma={gamma}: indefinite flag");
            assert!(
                report.neg_lambda_sq >= -1e-6,
                "gamma={gamma}: -lambda^2 = {}",
                report.neg_lambda_sq
            );
            assert_eq!(report.verdict, Verdict::Stable, "gamma={gamma}");
            assert!(report.zero_mode_overlap >= 0.999, "gamma={gamma}");
        }
    }

    #[test]
    fn rayleigh_minimum_cross_validates_on_a_coarse_grid() {
        let spec = sym_cubic(3.0);
        let grid = Grid::new(20.0, 151).expect("valid grid");
        let wall = solve_wall(&spec, grid).expect("solver converges");
        let cv = cross_validate(&spec, &wall.profile).expect("cross validation");
        assert!(
            (cv.rayleigh_min - cv.pencil_min).abs() <= 1e-6,
            "pencil {} vs CG {}",
            cv.pencil_min,
            cv.rayleigh_min
        );
        assert!(cv.nu_gap <= 1e-4, "nearest dense frequency off by {}", cv.nu_gap);
        assert!(cv.max_re_lambda <= 1e-6, "real part {}", cv.max_re_lambda);
        assert!(cv.zero_cluster >= 2, "zero modes missing: {}", cv.zero_cluster);
    }
}
