//! Potential families for the two-component energy density, their analytic
//! derivatives, equilibrium states, the explicit reference wall, and the
//! admissibility checks.
//!
//! Every potential has the squared-modulus structure
//! `W(u1, u2) = F(u1^2, u2^2)` with polynomial `F`, so all derivatives of `W`
//! are short closed forms assembled from the derivatives of `F`. The three
//! families share the same equilibrium layout: a right state `(a, 0)`, a left
//! state `(0, b)`, and (when it exists) an interior mixed state `c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter set for one of the built-in potential families.
///
/// Serialized form is a JSON object with a `kind` discriminator:
/// `{"kind": "symmetric-cubic", "gamma": 3.0}`,
/// `{"kind": "general-cubic", "g11": 1.0, "g22": 1.0, "g12": 3.0, "mu": 1.0}`,
/// `{"kind": "quartic", "gamma": 2.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    SymmetricCubic { gamma: f64 },
    GeneralCubic { g11: f64, g22: f64, g12: f64, mu: f64 },
    Quartic { gamma: f64 },
}

impl<'de> Deserialize<'de> for PotentialKind {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        use serde::de::Error as DeError;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            kind: String,
            gamma: Option<f64>,
            g11: Option<f64>,
            g22: Option<f64>,
            g12: Option<f64>,
            mu: Option<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| DeError::custom(format!("potential kind `{}` requires field `{}`", raw.kind, name)))
        };
        let forbid = |v: Option<f64>, name: &str| {
            if v.is_some() {
                Err(DeError::custom(format!(
                    "potential kind `{}` does not accept field `{}`",
                    raw.kind, name
                )))
            } else {
                Ok(())
            }
        };
        match raw.kind.as_str() {
            "symmetric-cubic" | "quartic" => {
                forbid(raw.g11, "g11")?;
                forbid(raw.g22, "g22")?;
                forbid(raw.g12, "g12")?;
                forbid(raw.mu, "mu")?;
                let gamma = need(raw.gamma, "gamma")?;
                if raw.kind == "quartic" {
                    Ok(PotentialKind::Quartic { gamma })
                } else {
                    Ok(PotentialKind::SymmetricCubic { gamma })
                }
            }
            "general-cubic" => {
                forbid(raw.gamma, "gamma")?;
                Ok(PotentialKind::GeneralCubic {
                    g11: need(raw.g11, "g11")?,
                    g22: need(raw.g22, "g22")?,
                    g12: need(raw.g12, "g12")?,
                    mu: need(raw.mu, "mu")?,
                })
            }
            other => Err(DeError::custom(format!(
                "unknown potential kind `{other}` (expected symmetric-cubic, general-cubic or quartic)"
            ))),
        }
    }
}

impl std::fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialKind::SymmetricCubic { gamma } => {
                write!(f, "symmetric-cubic(gamma={gamma})")
            }
            PotentialKind::GeneralCubic { g11, g22, g12, mu } => {
                write!(f, "general-cubic(g11={g11}, g22={g22}, g12={g12}, mu={mu})")
            }
            PotentialKind::Quartic { gamma } => write!(f, "quartic(gamma={gamma})"),
        }
    }
}

/// Value and derivatives of `F` at a point `(xi1, xi2)` of squared moduli.
/// Index convention: `f12` is the mixed second derivative, `f112` the
/// derivative twice in `xi1` and once in `xi2`, and so on.
#[derive(Debug, Clone, Copy)]
pub struct FDerivs {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f11: f64,
    pub f12: f64,
    pub f22: f64,
    pub f111: f64,
    pub f112: f64,
    pub f122: f64,
    pub f222: f64,
}

/// Third derivatives of `W`, stored by multi-index.
#[derive(Debug, Clone, Copy)]
pub struct ThirdW {
    pub w111: f64,
    pub w112: f64,
    pub w122: f64,
    pub w222: f64,
}

impl ThirdW {
    /// Directional derivative of the Hessian along `v`:
    /// entries of `D^3 W [v]` as a symmetric 2x2 matrix.
    pub fn contract(&self, v: [f64; 2]) -> [[f64; 2]; 2] {
        let m11 = self.w111 * v[0] + self.w112 * v[1];
        let m12 = self.w112 * v[0] + self.w122 * v[1];
        let m22 = self.w122 * v[0] + self.w222 * v[1];
        [[m11, m12], [m12, m22]]
    }
}

/// A validated potential with its equilibrium states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "PotentialKind")]
pub struct PotentialSpec {
    kind: PotentialKind,
    a: f64,
    b: f64,
    c: Option<[f64; 2]>,
}

impl From<PotentialSpec> for PotentialKind {
    fn from(s: PotentialSpec) -> PotentialKind {
        s.kind
    }
}

impl TryFrom<PotentialKind> for PotentialSpec {
    type Error = Error;
    fn try_from(kind: PotentialKind) -> Result<PotentialSpec> {
        PotentialSpec::new(kind)
    }
}

impl<'de> Deserialize<'de> for PotentialSpec {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let kind = PotentialKind::deserialize(deserializer)?;
        PotentialSpec::new(kind).map_err(serde::de::Error::custom)
    }
}

impl PotentialSpec {
    /// Validate parameters and derive the equilibrium states.
    pub fn new(kind: PotentialKind) -> Result<PotentialSpec> {
        match kind {
            PotentialKind::SymmetricCubic { gamma } => {
                if !gamma.is_finite() || gamma <= 1.0 {
                    return Err(Error::InvalidModel(format!(
                        "symmetric-cubic requires gamma > 1, got gamma={gamma}"
                    )));
                }
                let c = (1.0 + gamma).sqrt().recip();
                Ok(PotentialSpec { kind, a: 1.0, b: 1.0, c: Some([c, c]) })
            }
            PotentialKind::GeneralCubic { g11, g22, g12, mu } => {
                if !(g11.is_finite() && g22.is_finite() && g12.is_finite() && mu.is_finite()) {
                    return Err(Error::InvalidModel("general-cubic parameters must be finite".into()));
                }
                if g11 <= 0.0 || g22 <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "general-cubic requires g11 > 0 and g22 > 0, got g11={g11}, g22={g22}"
                    )));
                }
                let cross = (g11 * g22).sqrt();
                if g12 <= cross {
                    return Err(Error::InvalidModel(format!(
                        "general-cubic requires g12 > sqrt(g11*g22) = {cross}, got g12={g12}"
                    )));
                }
                if mu <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "general-cubic requires mu > 0, got mu={mu}"
                    )));
                }
                let a = mu.sqrt() / g11.powf(0.25);
                let b = mu.sqrt() / g22.powf(0.25);
                // Interior critical point: solve the linear system for the
                // squared moduli; keep it only when both are positive.
                let det = g11 * g22 - g12 * g12;
                let xi1 = mu * (g11.sqrt() * g22 - g22.sqrt() * g12) / det;
                let xi2 = mu * (g22.sqrt() * g11 - g11.sqrt() * g12) / det;
                let c = if xi1 > 0.0 && xi2 > 0.0 {
                    Some([xi1.sqrt(), xi2.sqrt()])
                } else {
                    None
                };
                Ok(PotentialSpec { kind, a, b, c })
            }
            PotentialKind::Quartic { gamma } => {
                if !gamma.is_finite() || gamma <= 1.0 {
                    return Err(Error::InvalidModel(format!(
                        "quartic requires gamma > 1, got gamma={gamma}"
                    )));
                }
                let c = (1.0 + gamma).powf(-0.25);
                Ok(PotentialSpec { kind, a: 1.0, b: 1.0, c: Some([c, c]) })
            }
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    /// Right equilibrium (a, 0).
    pub fn a_state(&self) -> [f64; 2] {
        [self.a, 0.0]
    }

    /// Left equilibrium (0, b).
    pub fn b_state(&self) -> [f64; 2] {
        [0.0, self.b]
    }

    /// Interior mixed equilibrium, when both components are real.
    pub fn c_state(&self) -> Option<[f64; 2]> {
        self.c
    }

    /// True when the two equilibria are mirror images (a = b); the wall then
    /// has the reflection symmetry u2(x) = u1(-x).
    pub fn is_symmetric(&self) -> bool {
        match self.kind {
            PotentialKind::SymmetricCubic { .. } | PotentialKind::Quartic { .. } => true,
            PotentialKind::GeneralCubic { g11, g22, .. } => (g11 - g22).abs() < 1e-14,
        }
    }

    /// Value and derivatives of F at squared moduli (xi1, xi2).
    pub fn f_derivs(&self, xi1: f64, xi2: f64) -> FDerivs {
        match self.kind {
            PotentialKind::SymmetricCubic { gamma } => {
                let s = xi1 + xi2 - 1.0;
                let k = gamma - 1.0;
                FDerivs {
                    f: 0.5 * s * s + k * xi1 * xi2,
                    f1: s + k * xi2,
                    f2: s + k * xi1,
                    f11: 1.0,
                    f12: gamma,
                    f22: 1.0,
                    f111: 0.0,
                    f112: 0.0,
                    f122: 0.0,
                    f222: 0.0,
                }
            }
            PotentialKind::GeneralCubic { g11, g22, g12, mu } => {
                let r1 = g11.sqrt();
                let r2 = g22.sqrt();
                let q = r1 * xi1 + r2 * xi2 - mu;
                let k = g12 - r1 * r2;
                FDerivs {
                    f: 0.5 * q * q + k * xi1 * xi2,
                    f1: r1 * q + k * xi2,
                    f2: r2 * q + k * xi1,
                    f11: g11,
                    f12: g12,
                    f22: g22,
                    f111: 0.0,
                    f112: 0.0,
                    f122: 0.0,
                    f222: 0.0,
                }
            }
            PotentialKind::Quartic { gamma } => {
                // F = p^2/4 + k xi1^2 xi2^2 / 2 with p = xi1^2 + xi2^2 - 1.
                let k = gamma - 1.0;
                let p2 = xi1 * xi1 + xi2 * xi2 - 1.0;
                FDerivs {
                    f: 0.25 * p2 * p2 + 0.5 * k * xi1 * xi1 * xi2 * xi2,
                    f1: p2 * xi1 + k * xi1 * xi2 * xi2,
                    f2: p2 * xi2 + k * xi1 * xi1 * xi2,
                    f11: p2 + 2.0 * xi1 * xi1 + k * xi2 * xi2,
                    f12: 2.0 * gamma * xi1 * xi2,
                    f22: p2 + 2.0 * xi2 * xi2 + k * xi1 * xi1,
                    f111: 6.0 * xi1,
                    f112: 2.0 * gamma * xi2,
                    f122: 2.0 * gamma * xi1,
                    f222: 6.0 * xi2,
                }
            }
        }
    }

    /// First derivatives (∂F/∂xi1, ∂F/∂xi2) only; hot path for assembly and
    /// time stepping.
    #[inline]
    pub fn fj(&self, xi1: f64, xi2: f64) -> [f64; 2] {
        match self.kind {
            PotentialKind::SymmetricCubic { gamma } => {
                let s = xi1 + xi2 - 1.0;
                let k = gamma - 1.0;
                [s + k * xi2, s + k * xi1]
            }
            PotentialKind::GeneralCubic { g11, g22, g12, mu } => {
                let r1 = g11.sqrt();
                let r2 = g22.sqrt();
                let q = r1 * xi1 + r2 * xi2 - mu;
                let k = g12 - r1 * r2;
                [r1 * q + k * xi2, r2 * q + k * xi1]
            }
            PotentialKind::Quartic { gamma } => {
                let k = gamma - 1.0;
                let p2 = xi1 * xi1 + xi2 * xi2 - 1.0;
                [p2 * xi1 + k * xi1 * xi2 * xi2, p2 * xi2 + k * xi1 * xi1 * xi2]
            }
        }
    }

    /// W at a point (unchecked fast path; total polynomial function).
    #[inline]
    pub fn w(&self, u1: f64, u2: f64) -> f64 {
        self.w_of_xi(u1 * u1, u2 * u2)
    }

    /// F at squared moduli; lets complex-field callers skip the square root.
    #[inline]
    pub fn w_of_xi(&self, xi1: f64, xi2: f64) -> f64 {
        match self.kind {
            PotentialKind::SymmetricCubic { gamma } => {
                let s = xi1 + xi2 - 1.0;
                0.5 * s * s + (gamma - 1.0) * xi1 * xi2
            }
            PotentialKind::GeneralCubic { g11, g22, g12, mu } => {
                let r1 = g11.sqrt();
                let r2 = g22.sqrt();
                let q = r1 * xi1 + r2 * xi2 - mu;
                0.5 * q * q + (g12 - r1 * r2) * xi1 * xi2
            }
            PotentialKind::Quartic { gamma } => {
                let p2 = xi1 * xi1 + xi2 * xi2 - 1.0;
                0.25 * p2 * p2 + 0.5 * (gamma - 1.0) * xi1 * xi1 * xi2 * xi2
            }
        }
    }

    /// Gradient of W (unchecked fast path).
    #[inline]
    pub fn grad(&self, u1: f64, u2: f64) -> [f64; 2] {
        let [f1, f2] = self.fj(u1 * u1, u2 * u2);
        [2.0 * u1 * f1, 2.0 * u2 * f2]
    }

    /// Hessian of W (unchecked fast path).
    #[inline]
    pub fn hess(&self, u1: f64, u2: f64) -> [[f64; 2]; 2] {
        let d = self.f_derivs(u1 * u1, u2 * u2);
        let w11 = 2.0 * d.f1 + 4.0 * u1 * u1 * d.f11;
        let w22 = 2.0 * d.f2 + 4.0 * u2 * u2 * d.f22;
        let w12 = 4.0 * u1 * u2 * d.f12;
        [[w11, w12], [w12, w22]]
    }

    /// Third derivatives of W (unchecked fast path).
    pub fn third(&self, u1: f64, u2: f64) -> ThirdW {
        let d = self.f_derivs(u1 * u1, u2 * u2);
        ThirdW {
            w111: 12.0 * u1 * d.f11 + 8.0 * u1.powi(3) * d.f111,
            w112: 4.0 * u2 * d.f12 + 8.0 * u1 * u1 * u2 * d.f112,
            w122: 4.0 * u1 * d.f12 + 8.0 * u1 * u2 * u2 * d.f122,
            w222: 12.0 * u2 * d.f22 + 8.0 * u2.powi(3) * d.f222,
        }
    }

    /// W at a point, validating the input.
    pub fn eval_w(&self, p: [f64; 2]) -> Result<f64> {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eval_w requires finite input, got ({}, {})",
                p[0], p[1]
            )));
        }
        Ok(self.w(p[0], p[1]))
    }

    /// Gradient of W, validating the input.
    pub fn grad_w(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::InvalidArgument("grad_w requires finite input".into()));
        }
        Ok(self.grad(p[0], p[1]))
    }

    /// Hessian of W, validating the input.
    pub fn hess_w(&self, p: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::InvalidArgument("hess_w requires finite input".into()));
        }
        Ok(self.hess(p[0], p[1]))
    }

    /// Third derivative tensor of W, validating the input.
    pub fn third_w(&self, p: [f64; 2]) -> Result<ThirdW> {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::InvalidArgument("third_w requires finite input".into()));
        }
        Ok(self.third(p[0], p[1]))
    }

    /// The explicit tanh wall, defined for the symmetric-cubic family at
    /// gamma = 3 only.
    pub fn exact_wall(&self, x: f64) -> Result<[f64; 2]> {
        match self.kind {
            PotentialKind::SymmetricCubic { gamma } if (gamma - 3.0).abs() <= 1e-12 => {
                let t = (x / std::f64::consts::SQRT_2).tanh();
                Ok([0.5 * (1.0 + t), 0.5 * (1.0 - t)])
            }
            other => Err(Error::Unsupported(format!(
                "the closed-form wall exists only for symmetric-cubic at gamma=3, got {other}"
            ))),
        }
    }

    /// Bottom of the continuous spectrum of the second-variation operator:
    /// the smallest eigenvalue of half the Hessian of W over both equilibria.
    pub fn essential_edge(&self) -> f64 {
        let mut edge = f64::INFINITY;
        for p in [self.a_state(), self.b_state()] {
            let h = self.hess(p[0], p[1]);
            let (lo, _) = sym2_eigs(h);
            edge = edge.min(0.5 * lo);
        }
        edge
    }

    /// Slowest exponential decay rate of wall tails, sqrt of the essential
    /// edge paired with the universal sqrt(2)-type rate; used for the default
    /// domain size rule. Returns None when the edge degenerates to zero
    /// (quartic family: algebraic tails).
    pub fn min_decay_rate(&self) -> Option<f64> {
        let edge = self.essential_edge();
        if edge > 1e-12 {
            Some(edge.sqrt())
        } else {
            None
        }
    }

    /// Default half-width: large enough that the slowest tail crosses below
    /// 1e-9 well inside the domain (rate * L >= 21, floor of 20).
    pub fn default_half_width(&self) -> f64 {
        match self.min_decay_rate() {
            Some(rate) => (21.0 / rate).max(20.0).ceil(),
            None => 20.0,
        }
    }

    /// Verify the standing admissibility properties of W by dense sampling
    /// over `[0, box_hi[0]] x [0, box_hi[1]]` plus closed-form checks at the
    /// equilibria. Returns a report; a violated property returns an error
    /// naming the witness point.
    pub fn check_w_axioms(&self, box_hi: [f64; 2], n_samples: usize) -> Result<AxiomReport> {
        use rand::{Rng, SeedableRng};
        if n_samples == 0 {
            return Err(Error::InvalidArgument("check_w_axioms requires n_samples >= 1".into()));
        }
        if !(box_hi[0] > 0.0 && box_hi[1] > 0.0) {
            return Err(Error::InvalidArgument("sample box must have positive extent".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0A71_0035);
        let a = self.a_state();
        let b = self.b_state();

        let mut min_w = f64::INFINITY;
        let mut min_w_at = [0.0; 2];
        let mut zeros_ok = true;
        let mut zero_witness = [0.0; 2];
        let mut min_f12 = f64::INFINITY;
        let mut max_f12 = f64::NEG_INFINITY;
        let mut samples = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let p = [rng.gen_range(0.0..box_hi[0]), rng.gen_range(0.0..box_hi[1])];
            let w = self.w(p[0], p[1]);
            if !w.is_finite() {
                return Err(Error::AxiomViolation(format!(
                    "W not finite at ({}, {})",
                    p[0], p[1]
                )));
            }
            if w < min_w {
                min_w = w;
                min_w_at = p;
            }
            if w < 1e-10 {
                let da = ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2)).sqrt();
                let db = ((p[0] - b[0]).powi(2) + (p[1] - b[1]).powi(2)).sqrt();
                if da.min(db) > 0.02 {
                    zeros_ok = false;
                    zero_witness = p;
                }
            }
            let d = self.f_derivs(p[0] * p[0], p[1] * p[1]);
            min_f12 = min_f12.min(d.f12);
            max_f12 = max_f12.max(d.f12);
            samples.push(p);
        }
        if min_w < -1e-12 {
            return Err(Error::AxiomViolation(format!(
                "W = {min_w} < 0 at ({}, {})",
                min_w_at[0], min_w_at[1]
            )));
        }
        if !zeros_ok {
            return Err(Error::AxiomViolation(format!(
                "W vanishes away from the equilibria at ({}, {})",
                zero_witness[0], zero_witness[1]
            )));
        }

        // Curvature at the equilibria. The cubic families must be strictly
        // positive definite; the quartic family degenerates transversally to
        // fourth order, which we verify by a direct quartic-growth probe.
        let ha = self.hess(a[0], a[1]);
        let hb = self.hess(b[0], b[1]);
        let ea = sym2_eigs(ha);
        let eb = sym2_eigs(hb);
        let (order, quartic_coeff) = match self.kind {
            PotentialKind::Quartic { gamma } => {
                for (lo, name) in [(ea.0, "right"), (eb.0, "left")] {
                    if lo.abs() > 1e-12 && lo < 0.0 {
                        return Err(Error::AxiomViolation(format!(
                            "negative curvature {lo} at the {name} equilibrium"
                        )));
                    }
                }
                if ea.1 <= 0.0 || eb.1 <= 0.0 {
                    return Err(Error::AxiomViolation(
                        "quartic family lost its non-degenerate curvature direction".into(),
                    ));
                }
                // Probe the degenerate direction: W(a + t e2) ~ coeff t^4.
                let t = 0.05;
                let measured = self.w(a[0], a[1] + t) / t.powi(4);
                let expected = 0.5 * (gamma - 1.0);
                if (measured - expected).abs() > 1e-3 * expected {
                    return Err(Error::AxiomViolation(format!(
                        "quartic transverse growth coefficient {measured} does not match {expected}"
                    )));
                }
                (4, Some(measured))
            }
            _ => {
                for (lo, name) in [(ea.0, "right"), (eb.0, "left")] {
                    if lo <= 0.0 {
                        return Err(Error::AxiomViolation(format!(
                            "Hessian of W not positive definite at the {name} equilibrium (min eigenvalue {lo})"
                        )));
                    }
                }
                (2, None)
            }
        };

        // Radial growth: grad W(U) . U >= c0 |U|^2 beyond a radius R0.
        let rmax = self.a.abs().max(self.b.abs()).max(1.0);
        let mut growth = None;
        for factor in [1.25, 1.5, 2.0] {
            let r0 = factor * rmax;
            let mut c0 = f64::INFINITY;
            let mut seen = 0usize;
            let mut witness = None;
            for p in &samples {
                let r2 = p[0] * p[0] + p[1] * p[1];
                if r2 < r0 * r0 {
                    continue;
                }
                seen += 1;
                let g = self.grad(p[0], p[1]);
                let ratio = (g[0] * p[0] + g[1] * p[1]) / r2;
                if ratio <= 0.0 {
                    witness = Some(*p);
                }
                c0 = c0.min(ratio);
            }
            if seen >= 8 {
                if let Some(wp) = witness {
                    return Err(Error::AxiomViolation(format!(
                        "radial growth fails at ({}, {}) beyond R0={r0}",
                        wp[0], wp[1]
                    )));
                }
                growth = Some((r0, 0.5 * c0));
                break;
            }
        }
        let (growth_r0, growth_c0) = growth.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "sample box [0,{}]x[0,{}] too small to probe radial growth beyond 1.25*{rmax}",
                box_hi[0], box_hi[1]
            ))
        })?;

        // Mixed-derivative sign of F: nonnegative everywhere, positive
        // somewhere. Closed forms: the cubic families have constant
        // mixed derivative (gamma resp. g12, both > 1 * positive), the
        // quartic family has 2 gamma xi1 xi2 >= 0 on the quadrant.
        if min_f12 < -1e-12 {
            return Err(Error::AxiomViolation(format!(
                "mixed derivative of F dips to {min_f12} on the sample set"
            )));
        }
        if max_f12 <= 0.0 {
            return Err(Error::AxiomViolation(
                "mixed derivative of F vanishes identically on the sample set".into(),
            ));
        }
        let closed_form = match self.kind {
            PotentialKind::SymmetricCubic { gamma } => gamma > 0.0,
            PotentialKind::GeneralCubic { g12, .. } => g12 > 0.0,
            PotentialKind::Quartic { gamma } => gamma > 0.0,
        };

        Ok(AxiomReport {
            min_w_sampled: min_w,
            zeros_only_at_equilibria: zeros_ok,
            hess_a_eigs: [ea.0, ea.1],
            hess_b_eigs: [eb.0, eb.1],
            min_transverse_order: order,
            quartic_transverse_coeff: quartic_coeff,
            growth_r0,
            growth_c0,
            min_f12,
            max_f12,
            f12_sign_closed_form: closed_form,
            pass: true,
        })
    }
}

/// Eigenvalues (lo, hi) of a symmetric 2x2 matrix.
pub fn sym2_eigs(m: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

/// Outcome of the admissibility checks; `pass` is true whenever the value is
/// returned at all (violations surface as errors with witness points).
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub min_w_sampled: f64,
    pub zeros_only_at_equilibria: bool,
    pub hess_a_eigs: [f64; 2],
    pub hess_b_eigs: [f64; 2],
    /// 2 when both equilibria are strictly non-degenerate minima; 4 when the
    /// transverse direction vanishes to fourth order (quartic family).
    pub min_transverse_order: u32,
    pub quartic_transverse_coeff: Option<f64>,
    pub growth_r0: f64,
    pub growth_c0: f64,
    pub min_f12: f64,
    pub max_f12: f64,
    pub f12_sign_closed_form: bool,
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym_cubic(gamma: f64) -> PotentialSpec {
        PotentialSpec::new(PotentialKind::SymmetricCubic { gamma }).expect("valid kind")
    }

    #[test]
    fn w_vanishes_at_equilibria_for_all_kinds() {
        let kinds = [
            PotentialKind::SymmetricCubic { gamma: 3.0 },
            PotentialKind::GeneralCubic { g11: 1.3, g22: 0.8, g12: 1.5, mu: 0.9 },
            PotentialKind::Quartic { gamma: 2.0 },
        ];
        for kind in kinds {
            let spec = PotentialSpec::new(kind).expect("valid kind");
            for p in [spec.a_state(), spec.b_state()] {
                let w = spec.eval_w(p).expect("finite");
                assert!(w.abs() < 1e-14, "{kind}: W({p:?}) = {w}");
                let g = spec.grad_w(p).expect("finite");
                assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14, "{kind}: grad {g:?}");
            }
        }
    }

    #[test]
    fn hand_evaluated_midpoint_value() {
        // 0.5*(1/2+1/2-1)^2 + 2*(1/4)*(1/4) at gamma=3 is exactly 1/8 + 1/8.
        let spec = sym_cubic(3.0);
        let w = spec.eval_w([0.5, 0.5]).expect("finite");
        assert!((w - 0.25).abs() < 1e-15, "got {w}");
    }

    #[test]
    fn general_cubic_reduces_to_symmetric_cubic() {
        let gamma = 2.7;
        let sym = sym_cubic(gamma);
        let gen = PotentialSpec::new(PotentialKind::GeneralCubic {
            g11: 1.0,
            g22: 1.0,
            g12: gamma,
            mu: 1.0,
        })
        .expect("valid kind");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
            let ws = sym.w(p[0], p[1]);
            let wg = gen.w(p[0], p[1]);
            assert!(
                (ws - wg).abs() <= 1e-14 * ws.abs().max(1.0),
                "mismatch at {p:?}: {ws} vs {wg}"
            );
        }
        assert!((gen.a_state()[0] - 1.0).abs() < 1e-14);
        assert!((gen.b_state()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constructor_rejects_inadmissible_parameters() {
        let err = PotentialSpec::new(PotentialKind::SymmetricCubic { gamma: 0.5 })
            .expect_err("gamma=0.5 must be rejected");
        assert!(err.to_string().contains("gamma > 1"), "message: {err}");

        let err = PotentialSpec::new(PotentialKind::GeneralCubic {
            g11: 1.0,
            g22: 1.0,
            g12: 0.9,
            mu: 1.0,
        })
        .expect_err("g12 below the geometric mean must be rejected");
        assert!(err.to_string().contains("sqrt(g11*g22)"), "message: {err}");

        PotentialSpec::new(PotentialKind::Quartic { gamma: 1.0 })
            .expect_err("quartic gamma=1 must be rejected");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kinds = [
            PotentialKind::SymmetricCubic { gamma: 3.0 },
            PotentialKind::GeneralCubic { g11: 1.4, g22: 0.7, g12: 1.6, mu: 1.2 },
            PotentialKind::Quartic { gamma: 2.5 },
        ];
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for kind in kinds {
            let spec = PotentialSpec::new(kind).expect("valid kind");
            for _ in 0..50 {
                let p = [rng.gen_range(0.1..1.5), rng.gen_range(0.1..1.5)];
                // Gradient against central differences of W.
                let g = spec.grad(p[0], p[1]);
                for j in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[j] += h;
                    pm[j] -= h;
                    let fd = (spec.w(pp[0], pp[1]) - spec.w(pm[0], pm[1])) / (2.0 * h);
                    assert!(
                        (g[j] - fd).abs() <= 1e-7 * fd.abs().max(1.0),
                        "{kind}: grad[{j}] {} vs fd {fd} at {p:?}",
                        g[j]
                    );
                }
                // Hessian against central differences of the gradient.
                let hs = spec.hess(p[0], p[1]);
                for j in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[j] += h;
                    pm[j] -= h;
                    let gp = spec.grad(pp[0], pp[1]);
                    let gm = spec.grad(pm[0], pm[1]);
                    for i in 0..2 {
                        let fd = (gp[i] - gm[i]) / (2.0 * h);
                        assert!(
                            (hs[i][j] - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                            "{kind}: hess[{i}][{j}] {} vs fd {fd}",
                            hs[i][j]
                        );
                    }
                }
                // Third tensor against central differences of the Hessian.
                let t = spec.third(p[0], p[1]);
                let entries = |m: [[f64; 2]; 2]| [m[0][0], m[0][1], m[1][1]];
                for j in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[j] += h;
                    pm[j] -= h;
                    let hp = entries(spec.hess(pp[0], pp[1]));
                    let hm = entries(spec.hess(pm[0], pm[1]));
                    // Derivative of (w11, w12, w22) in direction j.
                    let want = if j == 0 {
                        [t.w111, t.w112, t.w122]
                    } else {
                        [t.w112, t.w122, t.w222]
                    };
                    for i in 0..3 {
                        let fd = (hp[i] - hm[i]) / (2.0 * h);
                        assert!(
                            (want[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                            "{kind}: third[{i};{j}] {} vs fd {fd}",
                            want[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_is_diagonal_at_equilibria_with_symbolic_entries() {
        for gamma in [1.5, 3.0, 5.0] {
            let spec = sym_cubic(gamma);
            let h = spec.hess_w(spec.a_state()).expect("finite");
            assert!((h[0][0] - 4.0).abs() < 1e-12, "w11 at a: {}", h[0][0]);
            assert!((h[1][1] - 2.0 * (gamma - 1.0)).abs() < 1e-12, "w22 at a: {}", h[1][1]);
            assert!(h[0][1].abs() < 1e-14, "off-diagonal at a: {}", h[0][1]);
        }
        // Quartic family: one strict direction, one fourth-order direction.
        let spec = PotentialSpec::new(PotentialKind::Quartic { gamma: 2.0 }).expect("valid");
        let h = spec.hess_w(spec.a_state()).expect("finite");
        assert!((h[0][0] - 8.0).abs() < 1e-12);
        assert!(h[1][1].abs() < 1e-14);
        assert!(h[0][1].abs() < 1e-14);
        // General cubic: diagonal at both equilibria.
        let spec = PotentialSpec::new(PotentialKind::GeneralCubic {
            g11: 1.3,
            g22: 0.8,
            g12: 1.5,
            mu: 0.9,
        })
        .expect("valid");
        for p in [spec.a_state(), spec.b_state()] {
            let h = spec.hess_w(p).expect("finite");
            assert!(h[0][1].abs() < 1e-13, "off-diagonal {} at {p:?}", h[0][1]);
        }
    }

    #[test]
    fn exact_wall_shape_and_support() {
        let spec = sym_cubic(3.0);
        let p = spec.exact_wall(0.0).expect("defined at gamma=3");
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            let p = spec.exact_wall(x).expect("defined");
            assert!((p[0] + p[1] - 1.0).abs() < 1e-15, "branch sum at x={x}");
        }
        sym_cubic(2.0)
            .exact_wall(0.0)
            .expect_err("closed form only exists at gamma=3");
    }

    #[test]
    fn interior_equilibrium_values() {
        let spec = sym_cubic(3.0);
        let c = spec.c_state().expect("symmetric cubic has a mixed state");
        assert!((c[0] - 0.5).abs() < 1e-14, "c = {c:?}");
        let spec = PotentialSpec::new(PotentialKind::Quartic { gamma: 3.0 }).expect("valid");
        let c = spec.c_state().expect("quartic has a mixed state");
        assert!((c[0] - 4.0_f64.powf(-0.25)).abs() < 1e-14);
        // General cubic: the mixed state is a genuine critical point.
        let spec = PotentialSpec::new(PotentialKind::GeneralCubic {
            g11: 1.3,
            g22: 0.8,
            g12: 1.5,
            mu: 0.9,
        })
        .expect("valid");
        let c = spec.c_state().expect("admissible parameters always give one");
        let g = spec.grad_w(c).expect("finite");
        assert!(g[0].abs() < 1e-13 && g[1].abs() < 1e-13, "grad at c: {g:?}");
    }

    #[test]
    fn axiom_checks_pass_for_admissible_potentials() {
        let report = sym_cubic(3.0)
            .check_w_axioms([3.0, 3.0], 4000)
            .expect("symmetric cubic passes");
        assert!(report.pass);
        assert!(report.min_w_sampled >= -1e-12);
        assert!(report.hess_a_eigs[0] > 0.0);
        assert!(report.growth_c0 > 0.0);
        assert!(report.min_f12 >= -1e-12 && report.max_f12 > 0.0);

        let quartic = PotentialSpec::new(PotentialKind::Quartic { gamma: 2.0 }).expect("valid");
        let report = quartic.check_w_axioms([2.0, 2.0], 10_000).expect("quartic passes");
        assert_eq!(report.min_transverse_order, 4);
        let coeff = report.quartic_transverse_coeff.expect("probe ran");
        assert!((coeff - 0.5).abs() < 1e-3, "transverse coefficient {coeff}");
        assert!(report.min_f12 >= -1e-12);
    }

    #[test]
    fn essential_edge_matches_symbolic_value() {
        for gamma in [1.5, 3.0, 5.0] {
            let spec = sym_cubic(gamma);
            let want = (gamma - 1.0).min(2.0);
            assert!(
                (spec.essential_edge() - want).abs() < 1e-12,
                "edge at gamma={gamma}: {}",
                spec.essential_edge()
            );
        }
    }

    #[test]
    fn potential_json_round_trip_and_rejection() {
        let spec: PotentialSpec =
            serde_json::from_str(r#"{"kind": "symmetric-cubic", "gamma": 3.0}"#).expect("parses");
        assert_eq!(spec.a_state(), [1.0, 0.0]);
        let text = serde_json::to_string(&spec).expect("serializes");
        assert!(text.contains("symmetric-cubic"), "serialized: {text}");
        let back: PotentialSpec = serde_json::from_str(&text).expect("round trip");
        assert_eq!(back, spec);

        serde_json::from_str::<PotentialSpec>(r#"{"kind": "symmetric-cubic", "gamma": 3.0, "x": 1}"#)
            .expect_err("unknown keys must be rejected");
        serde_json::from_str::<PotentialSpec>(r#"{"kind": "symmetric-cubic", "g11": 1.0, "gamma": 3.0}"#)
            .expect_err("foreign field must be rejected");
        serde_json::from_str::<PotentialSpec>(r#"{"kind": "cubic"}"#)
            .expect_err("unknown kind must be rejected");
        serde_json::from_str::<PotentialSpec>(r#"{"kind": "symmetric-cubic", "gamma": 0.5}"#)
            .expect_err("inadmissible gamma must be rejected at parse time");
    }
}
