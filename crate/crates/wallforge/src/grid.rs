//! Uniform symmetric grid on `[-L, L]`, finite-difference stencils,
//! quadrature, the discrete energy and Euler-Lagrange residual, the rho_A
//! distance between complex fields, and CSV serialization.
//!
//! Interior nodes are `x_i = -L + (i+1) h` for `i = 0..N` with
//! `h = 2L/(N+1)`; the endpoints at exactly `±L` carry Dirichlet ghost
//! values (the equilibrium states for wall profiles). `N` is required to be
//! odd so that `x = 0` is a node and the reflection symmetry of symmetric
//! walls can be checked without interpolation.

use std::io::{BufRead, Write as IoWrite};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PotentialSpec;

/// Uniform grid of `n` interior nodes on `(-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    l: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(l: f64, n: usize) -> Result<Grid> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width must be positive, got L={l}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 interior nodes, got N={n}")));
        }
        if n % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "N must be odd so that x=0 is a node, got N={n}"
            )));
        }
        Ok(Grid { l, n, h: 2.0 * l / (n as f64 + 1.0) })
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Coordinate of interior node `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 1.0) * self.h
    }

    /// Index of the node at x = 0.
    pub fn center_index(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Reconstruct a grid from a strictly increasing, uniform, symmetric
    /// node list (used when reading fields back from CSV).
    pub fn from_nodes(xs: &[f64]) -> Result<Grid> {
        if xs.len() < 3 {
            return Err(Error::InvalidGrid("need at least 3 nodes".into()));
        }
        let n = xs.len();
        let h = (xs[n - 1] - xs[0]) / (n as f64 - 1.0);
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        let l = xs[n - 1] + h;
        let grid = Grid::new(l, n)?;
        for (i, &x) in xs.iter().enumerate() {
            if (x - grid.x(i)).abs() > 1e-8 * l.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "node {i} at {x} is not on a uniform symmetric grid (expected {})",
                    grid.x(i)
                )));
            }
        }
        Ok(grid)
    }
}

/// Scalar types the stencils operate on (f64 and Complex64).
pub trait StencilScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}
impl StencilScalar for f64 {}
impl StencilScalar for Complex64 {}

/// 3-point second derivative with Dirichlet ghost values `bc = [left, right]`
/// at exactly `±L`.
pub fn second_derivative<T: StencilScalar>(grid: &Grid, f: &[T], bc: [T; 2]) -> Vec<T> {
    assert_eq!(f.len(), grid.len(), "field length must match the grid");
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    (0..f.len())
        .map(|i| {
            let left = if i == 0 { bc[0] } else { f[i - 1] };
            let right = if i + 1 == f.len() { bc[1] } else { f[i + 1] };
            (left + right - f[i] * 2.0) * inv_h2
        })
        .collect()
}

/// Centered first derivative with Dirichlet ghost values.
pub fn first_derivative<T: StencilScalar>(grid: &Grid, f: &[T], bc: [T; 2]) -> Vec<T> {
    assert_eq!(f.len(), grid.len(), "field length must match the grid");
    let half_inv_h = 0.5 / grid.spacing();
    (0..f.len())
        .map(|i| {
            let left = if i == 0 { bc[0] } else { f[i - 1] };
            let right = if i + 1 == f.len() { bc[1] } else { f[i + 1] };
            (right - left) * half_inv_h
        })
        .collect()
}

/// 5-point fourth-order first derivative. Beyond the ghost nodes the field is
/// extended by its boundary value, which is exact for profiles that have
/// settled onto an equilibrium.
pub fn first_derivative_o4<T: StencilScalar>(grid: &Grid, f: &[T], bc: [T; 2]) -> Vec<T> {
    assert_eq!(f.len(), grid.len(), "field length must match the grid");
    let n = f.len() as isize;
    let at = |i: isize| -> T {
        if i < 0 {
            bc[0]
        } else if i >= n {
            bc[1]
        } else {
            f[i as usize]
        }
    };
    let w = 1.0 / (12.0 * grid.spacing());
    (0..n)
        .map(|i| (at(i - 2) - at(i + 2) + (at(i + 1) - at(i - 1)) * 8.0) * w)
        .collect()
}

/// 7-point sixth-order first derivative with the same equilibrium extension
/// as `first_derivative_o4`. Worth the wider stencil when a derivative feeds
/// a quadrature that is itself spectrally accurate, so the stencil error is
/// the whole error budget.
pub fn first_derivative_o6<T: StencilScalar>(grid: &Grid, f: &[T], bc: [T; 2]) -> Vec<T> {
    assert_eq!(f.len(), grid.len(), "field length must match the grid");
    let n = f.len() as isize;
    let at = |i: isize| -> T {
        if i < 0 {
            bc[0]
        } else if i >= n {
            bc[1]
        } else {
            f[i as usize]
        }
    };
    let w = 1.0 / (60.0 * grid.spacing());
    (0..n)
        .map(|i| {
            (at(i + 3) - at(i - 3) + (at(i - 2) - at(i + 2)) * 9.0
                + (at(i + 1) - at(i - 1)) * 45.0)
                * w
        })
        .collect()
}

/// Trapezoid rule over the interior nodes plus the two ghost endpoints.
pub fn trapz(grid: &Grid, values: &[f64], ghost: [f64; 2]) -> f64 {
    assert_eq!(values.len(), grid.len(), "value length must match the grid");
    let h = grid.spacing();
    let interior: f64 = values.iter().sum();
    h * (interior + 0.5 * (ghost[0] + ghost[1]))
}

/// Real two-component field with Dirichlet ghost values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealField2 {
    pub grid: Grid,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// Ghost value at x = -L (the left equilibrium for walls).
    pub left_bc: [f64; 2],
    /// Ghost value at x = +L.
    pub right_bc: [f64; 2],
}

impl RealField2 {
    pub fn new(
        grid: Grid,
        u1: Vec<f64>,
        u2: Vec<f64>,
        left_bc: [f64; 2],
        right_bc: [f64; 2],
    ) -> Result<RealField2> {
        if u1.len() != grid.len() || u2.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "component lengths ({}, {}) do not match the grid ({})",
                u1.len(),
                u2.len(),
                grid.len()
            )));
        }
        let finite = u1.iter().chain(&u2).all(|v| v.is_finite())
            && left_bc.iter().chain(&right_bc).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("field values must be finite".into()));
        }
        Ok(RealField2 { grid, u1, u2, left_bc, right_bc })
    }

    /// Sample a pointwise function of x on the grid.
    pub fn sample(
        grid: Grid,
        f: impl Fn(f64) -> [f64; 2],
        left_bc: [f64; 2],
        right_bc: [f64; 2],
    ) -> RealField2 {
        let mut u1 = Vec::with_capacity(grid.len());
        let mut u2 = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let v = f(grid.x(i));
            u1.push(v[0]);
            u2.push(v[1]);
        }
        RealField2 { grid, u1, u2, left_bc, right_bc }
    }

    pub fn constant(grid: Grid, value: [f64; 2], left_bc: [f64; 2], right_bc: [f64; 2]) -> RealField2 {
        RealField2 {
            grid,
            u1: vec![value[0]; grid.len()],
            u2: vec![value[1]; grid.len()],
            left_bc,
            right_bc,
        }
    }

    /// Component values with their boundary pair, `j` is 0 or 1.
    pub fn component(&self, j: usize) -> (&[f64], [f64; 2]) {
        match j {
            0 => (&self.u1, [self.left_bc[0], self.right_bc[0]]),
            1 => (&self.u2, [self.left_bc[1], self.right_bc[1]]),
            _ => panic!("component index must be 0 or 1"),
        }
    }

    /// Field sampled at `x + delta` by cubic interpolation, extended by the
    /// boundary values outside the domain. Shifts by integer multiples of h
    /// reduce to exact reindexing.
    pub fn shifted(&self, delta: f64) -> RealField2 {
        let mut out = self.clone();
        for (j, target) in [(0usize, &mut out.u1), (1usize, &mut out.u2)] {
            let (vals, bc) = self.component(j);
            for (i, slot) in target.iter_mut().enumerate() {
                *slot = sample_cubic(&self.grid, vals, bc, self.grid.x(i) + delta);
            }
        }
        out
    }

    pub fn to_complex(&self) -> ComplexField2 {
        let lift = |v: &[f64]| v.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        ComplexField2 {
            grid: self.grid,
            psi1: lift(&self.u1),
            psi2: lift(&self.u2),
            left_bc: [Complex64::new(self.left_bc[0], 0.0), Complex64::new(self.left_bc[1], 0.0)],
            right_bc: [
                Complex64::new(self.right_bc[0], 0.0),
                Complex64::new(self.right_bc[1], 0.0),
            ],
        }
    }

    /// CSV with header `x,u1,u2`, one interior node per row.
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,u1,u2")?;
        for i in 0..self.grid.len() {
            writeln!(w, "{},{},{}", self.grid.x(i), self.u1[i], self.u2[i])?;
        }
        Ok(())
    }

    /// Read a field written by `write_csv`; boundary values are supplied by
    /// the caller (they are model data, not grid data).
    pub fn read_csv<R: BufRead>(r: R, left_bc: [f64; 2], right_bc: [f64; 2]) -> Result<RealField2> {
        let mut xs = Vec::new();
        let mut u1 = Vec::new();
        let mut u2 = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if idx == 0 {
                if line != "x,u1,u2" {
                    return Err(Error::Config(format!(
                        "expected header `x,u1,u2`, got `{line}`"
                    )));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::Config(format!("row {idx}: missing column {name}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("row {idx}: bad {name}: {e}")))
            };
            xs.push(next("x")?);
            u1.push(next("u1")?);
            u2.push(next("u2")?);
        }
        let grid = Grid::from_nodes(&xs)?;
        RealField2::new(grid, u1, u2, left_bc, right_bc)
    }
}

/// Complex two-component field with fixed (phase-pinned) ghost values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2 {
    pub grid: Grid,
    pub psi1: Vec<Complex64>,
    pub psi2: Vec<Complex64>,
    pub left_bc: [Complex64; 2],
    pub right_bc: [Complex64; 2],
}

impl ComplexField2 {
    pub fn new(
        grid: Grid,
        psi1: Vec<Complex64>,
        psi2: Vec<Complex64>,
        left_bc: [Complex64; 2],
        right_bc: [Complex64; 2],
    ) -> Result<ComplexField2> {
        if psi1.len() != grid.len() || psi2.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "component lengths ({}, {}) do not match the grid ({})",
                psi1.len(),
                psi2.len(),
                grid.len()
            )));
        }
        let finite = psi1.iter().chain(&psi2).all(|v| v.re.is_finite() && v.im.is_finite())
            && left_bc.iter().chain(&right_bc).all(|v| v.re.is_finite() && v.im.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("field values must be finite".into()));
        }
        Ok(ComplexField2 { grid, psi1, psi2, left_bc, right_bc })
    }

    pub fn component(&self, j: usize) -> (&[Complex64], [Complex64; 2]) {
        match j {
            0 => (&self.psi1, [self.left_bc[0], self.right_bc[0]]),
            1 => (&self.psi2, [self.left_bc[1], self.right_bc[1]]),
            _ => panic!("component index must be 0 or 1"),
        }
    }

    /// Resample the field at `x + delta` by cubic interpolation of the real
    /// and imaginary parts, extending by the ghost values beyond the grid.
    pub fn shifted(&self, delta: f64) -> ComplexField2 {
        let mut out = self.clone();
        for j in 0..2 {
            let (vals, bc) = self.component(j);
            let re: Vec<f64> = vals.iter().map(|v| v.re).collect();
            let im: Vec<f64> = vals.iter().map(|v| v.im).collect();
            let target = if j == 0 { &mut out.psi1 } else { &mut out.psi2 };
            for (i, slot) in target.iter_mut().enumerate() {
                let p = self.grid.x(i) + delta;
                *slot = Complex64::new(
                    sample_cubic(&self.grid, &re, [bc[0].re, bc[1].re], p),
                    sample_cubic(&self.grid, &im, [bc[0].im, bc[1].im], p),
                );
            }
        }
        out
    }

    /// CSV with header `x,re_psi1,im_psi1,re_psi2,im_psi2`.
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,re_psi1,im_psi1,re_psi2,im_psi2")?;
        for i in 0..self.grid.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.grid.x(i),
                self.psi1[i].re,
                self.psi1[i].im,
                self.psi2[i].re,
                self.psi2[i].im
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(
        r: R,
        left_bc: [Complex64; 2],
        right_bc: [Complex64; 2],
    ) -> Result<ComplexField2> {
        let mut xs = Vec::new();
        let mut psi1 = Vec::new();
        let mut psi2 = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if idx == 0 {
                if line != "x,re_psi1,im_psi1,re_psi2,im_psi2" {
                    return Err(Error::Config(format!(
                        "expected header `x,re_psi1,im_psi1,re_psi2,im_psi2`, got `{line}`"
                    )));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::Config(format!("row {idx}: missing column {name}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("row {idx}: bad {name}: {e}")))
            };
            xs.push(next("x")?);
            psi1.push(Complex64::new(next("re_psi1")?, next("im_psi1")?));
            psi2.push(Complex64::new(next("re_psi2")?, next("im_psi2")?));
        }
        let grid = Grid::from_nodes(&xs)?;
        ComplexField2::new(grid, psi1, psi2, left_bc, right_bc)
    }
}

/// Cubic (Catmull-Rom) interpolation of a gridded component at an arbitrary
/// point, extended by the boundary values outside `[-L, L]`.
pub fn sample_cubic(grid: &Grid, vals: &[f64], bc: [f64; 2], p: f64) -> f64 {
    let n = vals.len() as isize;
    let at = |m: isize| -> f64 {
        if m < 0 {
            bc[0]
        } else if m >= n {
            bc[1]
        } else {
            vals[m as usize]
        }
    };
    // Map p onto the index line: node i sits at s = i.
    let s = (p + grid.half_width()) / grid.spacing() - 1.0;
    let k = s.floor();
    let t = s - k;
    let k = k as isize;
    if t == 0.0 {
        return at(k);
    }
    let p0 = at(k - 1);
    let p1 = at(k);
    let p2 = at(k + 1);
    let p3 = at(k + 2);
    0.5 * (2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)
}

/// Discrete energy of a real field: midpoint-rule kinetic term over the
/// N+1 cells (ghost cells included) plus trapezoid rule for W. This exact
/// combination makes the gradient of the energy equal h times the
/// Euler-Lagrange residual, which solvers rely on.
pub fn energy(spec: &PotentialSpec, field: &RealField2) -> f64 {
    let h = field.grid.spacing();
    let mut kinetic = 0.0;
    for j in 0..2 {
        let (vals, bc) = field.component(j);
        let mut prev = bc[0];
        for &v in vals {
            let d = v - prev;
            kinetic += d * d;
            prev = v;
        }
        let d = bc[1] - prev;
        kinetic += d * d;
    }
    kinetic *= 0.5 / h;

    let w_vals: Vec<f64> = (0..field.grid.len())
        .map(|i| spec.w(field.u1[i], field.u2[i]))
        .collect();
    let ghosts = [
        spec.w(field.left_bc[0], field.left_bc[1]),
        spec.w(field.right_bc[0], field.right_bc[1]),
    ];
    kinetic + 0.5 * trapz(&field.grid, &w_vals, ghosts)
}

/// Discrete energy of a complex field, optionally including an external
/// potential term `(eps/2) ∫ V (|psi1|^2 + |psi2|^2)`; `v` is sampled at the
/// nodes with its two ghost values appended conceptually via the closure.
pub fn energy_complex(
    spec: &PotentialSpec,
    field: &ComplexField2,
    external: Option<(f64, &dyn Fn(f64) -> f64)>,
) -> f64 {
    let h = field.grid.spacing();
    let mut kinetic = 0.0;
    for j in 0..2 {
        let (vals, bc) = field.component(j);
        let mut prev = bc[0];
        for &v in vals {
            kinetic += (v - prev).norm_sqr();
            prev = v;
        }
        kinetic += (bc[1] - prev).norm_sqr();
    }
    kinetic *= 0.5 / h;

    let xi = |v: Complex64| v.norm_sqr();
    let w_vals: Vec<f64> = (0..field.grid.len())
        .map(|i| spec.w_of_xi(xi(field.psi1[i]), xi(field.psi2[i])))
        .collect();
    let ghosts = [
        spec.w_of_xi(xi(field.left_bc[0]), xi(field.left_bc[1])),
        spec.w_of_xi(xi(field.right_bc[0]), xi(field.right_bc[1])),
    ];
    let mut total = kinetic + 0.5 * trapz(&field.grid, &w_vals, ghosts);

    if let Some((eps, v)) = external {
        let dens: Vec<f64> = (0..field.grid.len())
            .map(|i| v(field.grid.x(i)) * (xi(field.psi1[i]) + xi(field.psi2[i])))
            .collect();
        let l = field.grid.half_width();
        let ghosts = [
            v(-l) * (xi(field.left_bc[0]) + xi(field.left_bc[1])),
            v(l) * (xi(field.right_bc[0]) + xi(field.right_bc[1])),
        ];
        total += 0.5 * eps * trapz(&field.grid, &dens, ghosts);
    }
    total
}

/// Euler-Lagrange residual of the discrete energy: `-U'' + (F_1 u_1, F_2 u_2)`
/// nodewise. Its sup-norm is the convergence metric for the profile solvers,
/// and `h` times it is exactly the gradient of `energy`.
pub fn el_residual(spec: &PotentialSpec, field: &RealField2) -> RealField2 {
    let lap1 = second_derivative(&field.grid, &field.u1, [field.left_bc[0], field.right_bc[0]]);
    let lap2 = second_derivative(&field.grid, &field.u2, [field.left_bc[1], field.right_bc[1]]);
    let n = field.grid.len();
    let mut r1 = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    for i in 0..n {
        let u1 = field.u1[i];
        let u2 = field.u2[i];
        let [f1, f2] = spec.fj(u1 * u1, u2 * u2);
        r1.push(-lap1[i] + f1 * u1);
        r2.push(-lap2[i] + f2 * u2);
    }
    RealField2 { grid: field.grid, u1: r1, u2: r2, left_bc: [0.0; 2], right_bc: [0.0; 2] }
}

/// Sup-norm of the Euler-Lagrange residual.
pub fn residual_sup(spec: &PotentialSpec, field: &RealField2) -> f64 {
    let r = el_residual(spec, field);
    r.u1.iter()
        .chain(&r.u2)
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Distance between complex fields: per component, the L2 norm of the
/// derivative difference plus the L2 norm of the modulus difference plus the
/// sup norm over `|x| <= A`.
pub fn rho_a(psi: &ComplexField2, phi: &ComplexField2, a: f64) -> Result<f64> {
    if psi.grid != phi.grid {
        return Err(Error::InvalidArgument("rho_a requires fields on the same grid".into()));
    }
    if !(a > 0.0 && a <= psi.grid.half_width()) {
        return Err(Error::InvalidArgument(format!(
            "window A must satisfy 0 < A <= L, got A={a}, L={}",
            psi.grid.half_width()
        )));
    }
    let grid = psi.grid;
    let h = grid.spacing();
    let mut total = 0.0;
    for j in 0..2 {
        let (pv, pbc) = psi.component(j);
        let (qv, qbc) = phi.component(j);

        // Derivative difference, cell midpoint rule over N+1 cells.
        let mut deriv_sq = 0.0;
        let mut prev = pbc[0] - qbc[0];
        for i in 0..pv.len() {
            let cur = pv[i] - qv[i];
            deriv_sq += (cur - prev).norm_sqr();
            prev = cur;
        }
        deriv_sq += ((pbc[1] - qbc[1]) - prev).norm_sqr();
        deriv_sq /= h;

        // Modulus difference in L2, trapezoid with ghost endpoints.
        let mod_diff: Vec<f64> = (0..pv.len())
            .map(|i| {
                let d = pv[i].norm() - qv[i].norm();
                d * d
            })
            .collect();
        let gl = pbc[0].norm() - qbc[0].norm();
        let gr = pbc[1].norm() - qbc[1].norm();
        let mod_sq = trapz(&grid, &mod_diff, [gl * gl, gr * gr]);

        // Sup over the window.
        let mut sup = 0.0f64;
        for i in 0..pv.len() {
            if grid.x(i).abs() <= a {
                sup = sup.max((pv[i] - qv[i]).norm());
            }
        }
        total += deriv_sq.sqrt() + mod_sq.sqrt() + sup;
    }
    Ok(total)
}

/// Default grid for a potential: half-width from the slowest tail decay rate
/// (floor 20), spacing 0.01.
pub fn default_grid_for(spec: &PotentialSpec) -> Result<Grid> {
    let l = spec.default_half_width();
    let n = (200.0 * l).round() as usize - 1;
    Grid::new(l, n)
}
