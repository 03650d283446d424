//! The linearized p-system
//!
//! ```text
//!   v_t - u_x         = 0
//!   u_t - v_x / eps^2 = g(x, t)
//! ```
//!
//! on a 1D interval with `v = 0` on the boundary, written as `w_t + f(w)_x = G`
//! with `w = (v, u)` and `f(w) = (-u, -v / eps^2)`. This module holds the grid,
//! the cell-average state, the stiff/non-stiff flux splitting and the two
//! manufactured test cases.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};

/// A state vector `(v, u)` at a single point or cell.
pub type Pair = [f64; 2];

/// 2x2 Jacobian, row-major.
pub type Jacobian = [[f64; 2]; 2];

/// Uniform cell partition of an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_cells: usize,
    x_left: f64,
    x_right: f64,
    dx: f64,
    edges: Vec<f64>,
    midpoints: Vec<f64>,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// The `n_cells + 1` cell boundaries, `edges[0] = x_left`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Sample a function of `x` at the cell midpoints.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.midpoints.iter().map(|&x| f(x)).collect()
    }
}

/// Build a uniform grid with `n_cells` cells on `[x_left, x_right]`.
pub fn make_grid(n_cells: usize, domain: (f64, f64)) -> Result<Grid> {
    let (x_left, x_right) = domain;
    if n_cells < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 cells, got {n_cells}"
        )));
    }
    if !(x_left.is_finite() && x_right.is_finite()) || x_right <= x_left {
        return Err(Error::InvalidGrid(format!(
            "degenerate domain [{x_left}, {x_right}]"
        )));
    }
    let dx = (x_right - x_left) / n_cells as f64;
    let edges: Vec<f64> = (0..=n_cells)
        .map(|i| {
            if i == n_cells {
                x_right
            } else {
                x_left + i as f64 * dx
            }
        })
        .collect();
    let midpoints = edges[..n_cells].iter().map(|&x| x + 0.5 * dx).collect();
    Ok(Grid {
        n_cells,
        x_left,
        x_right,
        dx,
        edges,
        midpoints,
    })
}

/// Unit-interval grid, the domain used by both test cases.
pub fn unit_grid(n_cells: usize) -> Result<Grid> {
    make_grid(n_cells, (0.0, 1.0))
}

/// Piecewise-constant cell values at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub time: f64,
}

impl State {
    pub fn new(v: Vec<f64>, u: Vec<f64>, time: f64) -> Result<Self> {
        check_len("state u", v.len(), u.len())?;
        Ok(State { v, u, time })
    }

    pub fn zeros(n_cells: usize, time: f64) -> Self {
        State {
            v: vec![0.0; n_cells],
            u: vec![0.0; n_cells],
            time,
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.u).all(|x| x.is_finite())
    }

    pub(crate) fn check_matches(&self, grid: &Grid) -> Result<()> {
        check_len("state v", grid.n_cells(), self.v.len())?;
        check_len("state u", grid.n_cells(), self.u.len())
    }

    /// Sample the exact solution of `case` at the midpoints of `grid`.
    pub fn from_case(case: &CaseDefinition, grid: &Grid, time: f64) -> Self {
        State {
            v: grid.sample(|x| case.v_exact(x, time)),
            u: grid.sample(|x| case.u_exact(x, time)),
            time,
        }
    }
}

/// The flux `f = f_hat + f_tilde` split with `alpha(eps) = beta(eps) = eps`:
///
/// ```text
///   f(w)       = (-u,             -v / eps^2)
///   f_hat(w)   = (-eps u,         -v / eps)
///   f_tilde(w) = (-(1 - eps) u,   -(1 - eps) v / eps^2)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFlux {
    eps: f64,
}

/// Construct the splitting for `0 < eps <= 1`. At `eps = 1` the stiff part
/// vanishes identically.
pub fn flux_split(eps: f64) -> Result<SplitFlux> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidEps {
            eps,
            allowed: "(0, 1]",
        });
    }
    Ok(SplitFlux { eps })
}

impl SplitFlux {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn total(&self, w: Pair) -> Pair {
        let [v, u] = w;
        [-u, -v / (self.eps * self.eps)]
    }

    pub fn nonstiff(&self, w: Pair) -> Pair {
        let [v, u] = w;
        [-self.eps * u, -v / self.eps]
    }

    pub fn stiff(&self, w: Pair) -> Pair {
        let [v, u] = w;
        let e = self.eps;
        [-(1.0 - e) * u, -(1.0 - e) * v / (e * e)]
    }

    pub fn jacobian_total(&self) -> Jacobian {
        [[0.0, -1.0], [-1.0 / (self.eps * self.eps), 0.0]]
    }

    pub fn jacobian_nonstiff(&self) -> Jacobian {
        [[0.0, -self.eps], [-1.0 / self.eps, 0.0]]
    }

    pub fn jacobian_stiff(&self) -> Jacobian {
        let e = self.eps;
        [[0.0, -(1.0 - e)], [-(1.0 - e) / (e * e), 0.0]]
    }

    /// Largest wave speed of the full system, `1 / eps`.
    pub fn lambda_max(&self) -> f64 {
        1.0 / self.eps
    }

    /// Largest wave speed of the non-stiff part; one for every `eps`.
    pub fn lambda_hat_max(&self) -> f64 {
        1.0
    }

    /// Largest wave speed of the stiff part, `(1 - eps) / eps`.
    pub fn lambda_tilde_max(&self) -> f64 {
        (1.0 - self.eps) / self.eps
    }
}

/// Eigenvalues of a real 2x2 matrix, `None` when they are complex.
/// Returned in descending order.
pub fn eigenvalues_2x2(m: Jacobian) -> Option<(f64, f64)> {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = half_tr * half_tr - det;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    Some((half_tr + r, half_tr - r))
}

/// Per-`eps` outcome of the admissibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilitySample {
    pub eps: f64,
    pub nonstiff_eigenvalues: Option<(f64, f64)>,
    pub stiff_eigenvalues: Option<(f64, f64)>,
    /// Eigenvalues of both parts real and distinct.
    pub hyperbolic: bool,
    /// `|lambda_hat| == 1` up to rounding.
    pub nonstiff_order_one: bool,
    /// `|f_hat(w) - f(w)|` at the probe state.
    pub nonstiff_gap: f64,
    /// `eps^2 |f_tilde(w) - f(w)|` at the probe state.
    pub scaled_stiff_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// Samples sorted by ascending `eps`.
    pub samples: Vec<AdmissibilitySample>,
    pub hyperbolic: bool,
    pub nonstiff_order_one: bool,
    /// `|f_hat - f|` decreases as `eps` grows towards one.
    pub nonstiff_approaches_total: bool,
    /// `eps^2 |f_tilde - f|` decreases as `eps` shrinks towards zero.
    pub stiff_approaches_total: bool,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.hyperbolic
            && self.nonstiff_order_one
            && self.nonstiff_approaches_total
            && self.stiff_approaches_total
    }
}

/// Probe state for the admissibility check. Every map is linear, so any
/// nonzero state would do.
pub const PROBE_STATE: Pair = [1.0, 1.0];

fn norm2(p: Pair) -> f64 {
    p[0].hypot(p[1])
}

/// Numerically check the four admissibility conditions of the splitting over a
/// set of `eps` samples in `(0, 1)`. `split` supplies nothing but its type; the
/// splitting is re-instantiated per sample.
pub fn check_splitting_admissible(
    _split: &SplitFlux,
    eps_samples: &[f64],
) -> Result<AdmissibilityReport> {
    if eps_samples.is_empty() {
        return Err(Error::InvalidArgument("no eps samples".into()));
    }
    let mut eps_sorted = eps_samples.to_vec();
    for &e in &eps_sorted {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidEps {
                eps: e,
                allowed: "(0, 1)",
            });
        }
    }
    eps_sorted.sort_by(f64::total_cmp);

    let samples: Vec<AdmissibilitySample> = eps_sorted
        .iter()
        .map(|&eps| {
            let s = SplitFlux { eps };
            let hat = eigenvalues_2x2(s.jacobian_nonstiff());
            let tilde = eigenvalues_2x2(s.jacobian_stiff());
            let distinct = |ev: Option<(f64, f64)>| matches!(ev, Some((a, b)) if a != b);
            let order_one = matches!(hat, Some((a, b))
                if (a.abs() - 1.0).abs() <= 4.0 * f64::EPSILON
                && (b.abs() - 1.0).abs() <= 4.0 * f64::EPSILON);
            let f = s.total(PROBE_STATE);
            let fh = s.nonstiff(PROBE_STATE);
            let ft = s.stiff(PROBE_STATE);
            AdmissibilitySample {
                eps,
                nonstiff_eigenvalues: hat,
                stiff_eigenvalues: tilde,
                hyperbolic: distinct(hat) && distinct(tilde),
                nonstiff_order_one: order_one,
                nonstiff_gap: norm2([fh[0] - f[0], fh[1] - f[1]]),
                scaled_stiff_gap: eps * eps * norm2([ft[0] - f[0], ft[1] - f[1]]),
            }
        })
        .collect();

    let nonstiff_approaches_total = samples
        .windows(2)
        .all(|w| w[1].nonstiff_gap <= w[0].nonstiff_gap);
    let stiff_approaches_total = samples
        .windows(2)
        .all(|w| w[0].scaled_stiff_gap <= w[1].scaled_stiff_gap);

    Ok(AdmissibilityReport {
        hyperbolic: samples.iter().all(|s| s.hyperbolic),
        nonstiff_order_one: samples.iter().all(|s| s.nonstiff_order_one),
        nonstiff_approaches_total,
        stiff_approaches_total,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseKind {
    Smooth,
    Kink,
}

impl CaseKind {
    pub const ALL: [CaseKind; 2] = [CaseKind::Smooth, CaseKind::Kink];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Smooth => "smooth",
            CaseKind::Kink => "kink",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smooth" => Ok(CaseKind::Smooth),
            "kink" => Ok(CaseKind::Kink),
            other => Err(Error::InvalidArgument(format!("unknown case '{other}'"))),
        }
    }
}

/// A manufactured solution `(v, u)` of the p-system on `[0, 1]` together with
/// the momentum forcing `g = u_t - v_x / eps^2` that makes it exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseDefinition {
    kind: CaseKind,
    eps: f64,
}

fn check_case_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEps {
            eps,
            allowed: "(0, 1)",
        });
    }
    Ok(())
}

/// `v = eps^2 t sin(2 pi x)`, `u = sin(20 pi t) - eps^2 cos(2 pi x) / (2 pi)`.
pub fn case_smooth(eps: f64) -> Result<CaseDefinition> {
    check_case_eps(eps)?;
    Ok(CaseDefinition {
        kind: CaseKind::Smooth,
        eps,
    })
}

/// Hat-shaped `v = eps^2 t min(x, 1 - x)` with the matching piecewise
/// quadratic `u`; `v_x` jumps at `x = 1/2`.
pub fn case_kink(eps: f64) -> Result<CaseDefinition> {
    check_case_eps(eps)?;
    Ok(CaseDefinition {
        kind: CaseKind::Kink,
        eps,
    })
}

pub fn make_case(kind: CaseKind, eps: f64) -> Result<CaseDefinition> {
    match kind {
        CaseKind::Smooth => case_smooth(eps),
        CaseKind::Kink => case_kink(eps),
    }
}

impl CaseDefinition {
    pub fn kind(&self) -> CaseKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn v_exact(&self, x: f64, t: f64) -> f64 {
        let e2 = self.eps * self.eps;
        match self.kind {
            CaseKind::Smooth => e2 * t * (2.0 * PI * x).sin(),
            CaseKind::Kink => {
                let hat = if x < 0.5 { x } else { 1.0 - x };
                e2 * t * hat
            }
        }
    }

    pub fn u_exact(&self, x: f64, t: f64) -> f64 {
        let e2 = self.eps * self.eps;
        match self.kind {
            CaseKind::Smooth => (20.0 * PI * t).sin() - e2 / (2.0 * PI) * (2.0 * PI * x).cos(),
            CaseKind::Kink => {
                let q = if x < 0.5 {
                    0.5 * x * x
                } else {
                    -0.5 * x * x + x - 0.25
                };
                1.0 + e2 * q
            }
        }
    }

    /// Momentum forcing `g = u_t - v_x / eps^2`.
    pub fn g(&self, x: f64, t: f64) -> f64 {
        match self.kind {
            CaseKind::Smooth => {
                20.0 * PI * (20.0 * PI * t).cos() - 2.0 * PI * t * (2.0 * PI * x).cos()
            }
            CaseKind::Kink => {
                if x < 0.5 {
                    -t
                } else {
                    t
                }
            }
        }
    }

    /// Analytic `u_x`, one-sided (right) at the kink.
    pub fn u_x_exact(&self, x: f64, _t: f64) -> f64 {
        let e2 = self.eps * self.eps;
        match self.kind {
            CaseKind::Smooth => e2 * (2.0 * PI * x).sin(),
            CaseKind::Kink => {
                if x < 0.5 {
                    e2 * x
                } else {
                    e2 * (1.0 - x)
                }
            }
        }
    }

    /// Analytic `v_x`, one-sided (right) at the kink.
    pub fn v_x_exact(&self, x: f64, t: f64) -> f64 {
        let e2 = self.eps * self.eps;
        match self.kind {
            CaseKind::Smooth => e2 * t * 2.0 * PI * (2.0 * PI * x).cos(),
            CaseKind::Kink => {
                if x < 0.5 {
                    e2 * t
                } else {
                    -e2 * t
                }
            }
        }
    }

    /// Sample the forcing at the cell midpoints.
    pub fn g_cells(&self, grid: &Grid, t: f64) -> Vec<f64> {
        grid.sample(|x| self.g(x, t))
    }
}
