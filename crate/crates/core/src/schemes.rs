//! Time integrators for the p-system on cell averages.
//!
//! * [`ap_step`]: the asymptotic-preserving step. Explicit derivative
//!   recovery, a finite-element solve for `v^{n+1}`, then the velocity update.
//! * [`implicit_euler_step`]: backward Euler with a Lax-Friedrichs flux on
//!   the full flux `f`.
//! * [`imex_step`]: explicit Lax-Friedrichs on `f_hat`, then backward Euler
//!   with Lax-Friedrichs on `f_tilde`.
//!
//! All three share the ghost-cell policy of [`crate::recovery`]. The
//! baselines additionally take an [`LfViscosity`].

use std::fmt;
use std::str::FromStr;

use crate::elliptic::{
    assemble, assemble_load, eval_midpoints, fem_derivative, gamma_of, solve, EllipticProblem,
    LoadFunctional,
};
use crate::error::{Error, Result};
use crate::linalg::{
    block_add, block_scale, solve_monitored, Block, BlockTridiagonal, IDENTITY_BLOCK, ZERO_BLOCK,
};
use crate::model::{flux_split, make_case, unit_grid, CaseDefinition, CaseKind, Grid, Jacobian, State};
use crate::recovery::{recover_derivatives_with, with_ghosts, GhostPolicy};

/// Momentum source `g(x, t)`.
pub trait Forcing: Sync {
    fn g(&self, x: f64, t: f64) -> f64;
}

impl Forcing for CaseDefinition {
    fn g(&self, x: f64, t: f64) -> f64 {
        CaseDefinition::g(self, x, t)
    }
}

/// `g = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn g(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
}

/// Forcing from a closure.
pub struct FnForcing<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> Forcing for FnForcing<F> {
    fn g(&self, x: f64, t: f64) -> f64 {
        (self.0)(x, t)
    }
}

fn sample_forcing(forcing: &impl Forcing, grid: &Grid, t: f64) -> Vec<f64> {
    grid.sample(|x| forcing.g(x, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Ap,
    Imex,
    ImplicitEuler,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Ap, SchemeKind::Imex, SchemeKind::ImplicitEuler];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ap => "ap",
            SchemeKind::Imex => "imex",
            SchemeKind::ImplicitEuler => "implicit_euler",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ap" => Ok(SchemeKind::Ap),
            "imex" => Ok(SchemeKind::Imex),
            "implicit_euler" | "ie" => Ok(SchemeKind::ImplicitEuler),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Viscosity of the Lax-Friedrichs flux
/// `F = (f_l + f_r) / 2 - (alpha / 2) (w_r - w_l)` used by the finite-volume
/// baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LfViscosity {
    /// `alpha` is the largest wave speed of the flux being discretized:
    /// `1 / eps` for `f`, `1` for `f_hat`, `(1 - eps) / eps` for `f_tilde`.
    #[default]
    WaveSpeed,
    /// `alpha = dx / dt` for every flux.
    Classical,
}

impl LfViscosity {
    pub fn name(self) -> &'static str {
        match self {
            LfViscosity::WaveSpeed => "wave_speed",
            LfViscosity::Classical => "classical",
        }
    }

    fn alpha(self, wave_speed: f64, dx: f64, dt: f64) -> f64 {
        match self {
            LfViscosity::WaveSpeed => wave_speed,
            LfViscosity::Classical => dx / dt,
        }
    }
}

impl FromStr for LfViscosity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "wave_speed" | "rusanov" => Ok(LfViscosity::WaveSpeed),
            "classical" => Ok(LfViscosity::Classical),
            other => Err(Error::InvalidArgument(format!("unknown viscosity '{other}'"))),
        }
    }
}

/// Spatial discretization choices shared by the three schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Discretization {
    pub ghosts: GhostPolicy,
    pub viscosity: LfViscosity,
}

/// Condition estimates above this are reported as ill-conditioned: the
/// reciprocal condition number has dropped below the unit roundoff, the
/// point at which a direct solve carries no correct digits.
pub const ILL_CONDITIONED_THRESHOLD: f64 = 1.0 / f64::EPSILON;

/// Linear-solve health of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// 1-norm condition estimate of the implicit system.
    pub condition_estimate: f64,
    /// Pivot growth of the block elimination; one for the SPD elliptic solve.
    pub growth_factor: f64,
    /// Elliptic coefficient (AP only).
    pub gamma: Option<f64>,
}

impl StepDiagnostics {
    pub fn ill_conditioned(&self) -> bool {
        self.condition_estimate.is_nan() || self.condition_estimate > ILL_CONDITIONED_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: State,
    pub diagnostics: StepDiagnostics,
}

fn check_step_inputs(state: &State, grid: &Grid, dt: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEps {
            eps,
            allowed: "(0, 1)",
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    state.check_matches(grid)
}

/// Condition number of the symmetric Toeplitz elliptic matrix from its
/// closed-form spectrum `diag + 2 off cos(k pi / (n + 1))`.
fn elliptic_condition(p: &EllipticProblem) -> f64 {
    let n = p.n_dof as f64;
    let c = (std::f64::consts::PI / (n + 1.0)).cos();
    let a = p.diag + 2.0 * p.off * c;
    let b = p.diag - 2.0 * p.off * c;
    a.max(b) / a.min(b)
}

pub fn ap_step(
    state: &State,
    grid: &Grid,
    dt: f64,
    eps: f64,
    forcing: &impl Forcing,
) -> Result<Step> {
    ap_step_with(state, grid, dt, eps, forcing, Discretization::default())
}

pub fn ap_step_with(
    state: &State,
    grid: &Grid,
    dt: f64,
    eps: f64,
    forcing: &impl Forcing,
    disc: Discretization,
) -> Result<Step> {
    check_step_inputs(state, grid, dt, eps)?;
    let d = recover_derivatives_with(state, grid, dt, disc.ghosts)?;
    let g = sample_forcing(forcing, grid, state.time);

    let load = LoadFunctional {
        iota1: state.v.iter().zip(&d.ux).map(|(v, ux)| v + dt * ux).collect(),
        iota2: g.iter().zip(&d.vx).map(|(g, vx)| g + vx / eps).collect(),
        dt,
        eps,
    };
    let gamma = gamma_of(eps, dt)?;
    let problem = assemble(gamma, grid)?;
    let rhs = assemble_load(&load, grid)?;
    let v_h = solve(&problem, &rhs)?;

    let v = eval_midpoints(&v_h);
    let slope = fem_derivative(&v_h);
    let stiff = (1.0 - eps) / (eps * eps);
    let u = (0..grid.n_cells())
        .map(|i| state.u[i] + dt * (d.vx[i] / eps + stiff * slope[i] + g[i]))
        .collect();

    let next = State {
        v,
        u,
        time: state.time + dt,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("AP step state"));
    }
    Ok(Step {
        state: next,
        diagnostics: StepDiagnostics {
            condition_estimate: elliptic_condition(&problem),
            growth_factor: 1.0,
            gamma: Some(gamma),
        },
    })
}

fn diag_block(a: f64, b: f64) -> Block {
    [[a, 0.0], [0.0, b]]
}

fn mat_mul(a: Block, b: Block) -> Block {
    let mut c = ZERO_BLOCK;
    for (i, row) in c.iter_mut().enumerate() {
        for (j, cij) in row.iter_mut().enumerate() {
            *cij = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `I + dt L` where `L` is the Lax-Friedrichs discretization of `(J w)_x`
/// with viscosity `alpha`:
///
/// ```text
///   (L w)_i = J (w_{i+1} - w_{i-1}) / (2 dx) - alpha (w_{i+1} - 2 w_i + w_{i-1}) / (2 dx)
/// ```
///
/// with ghost cells folded into the boundary rows.
pub fn lax_friedrichs_implicit_matrix(
    jac: Jacobian,
    alpha: f64,
    n: usize,
    dx: f64,
    dt: f64,
    ghosts: GhostPolicy,
) -> BlockTridiagonal {
    let courant = dt / (2.0 * dx);
    let diffusion = courant * alpha;
    let half = block_scale(-diffusion, IDENTITY_BLOCK);
    let right = block_add(block_scale(courant, jac), half);
    let left = block_add(block_scale(-courant, jac), half);
    let centre = block_scale(1.0 + 2.0 * diffusion, IDENTITY_BLOCK);

    let mut diag = vec![centre; n];
    let mut lower = vec![left; n - 1];
    let mut upper = vec![right; n - 1];

    let (av, bv) = ghosts.v.coefficients();
    let (au, bu) = ghosts.u.coefficients();
    let near = diag_block(av, au);
    let far = diag_block(bv, bu);
    // w_{-1} = near w_0 + far w_1, w_n = near w_{n-1} + far w_{n-2}
    diag[0] = block_add(diag[0], mat_mul(left, near));
    upper[0] = block_add(upper[0], mat_mul(left, far));
    diag[n - 1] = block_add(diag[n - 1], mat_mul(right, near));
    lower[n - 2] = block_add(lower[n - 2], mat_mul(right, far));

    BlockTridiagonal { lower, diag, upper }
}

fn to_pairs(state: &State) -> Vec<[f64; 2]> {
    state.v.iter().zip(&state.u).map(|(&v, &u)| [v, u]).collect()
}

fn from_pairs(pairs: &[[f64; 2]], time: f64) -> State {
    State {
        v: pairs.iter().map(|p| p[0]).collect(),
        u: pairs.iter().map(|p| p[1]).collect(),
        time,
    }
}

fn implicit_lf_solve(
    jac: Jacobian,
    alpha: f64,
    rhs: &[[f64; 2]],
    grid: &Grid,
    dt: f64,
    ghosts: GhostPolicy,
) -> Result<(Vec<[f64; 2]>, StepDiagnostics)> {
    let a = lax_friedrichs_implicit_matrix(jac, alpha, grid.n_cells(), grid.dx(), dt, ghosts);
    let (x, d) = solve_monitored(&a, rhs)?;
    Ok((
        x,
        StepDiagnostics {
            condition_estimate: d.condition_estimate,
            growth_factor: d.growth_factor,
            gamma: None,
        },
    ))
}

pub fn implicit_euler_step(
    state: &State,
    grid: &Grid,
    dt: f64,
    eps: f64,
    forcing: &impl Forcing,
) -> Result<Step> {
    implicit_euler_step_with(state, grid, dt, eps, forcing, Discretization::default())
}

pub fn implicit_euler_step_with(
    state: &State,
    grid: &Grid,
    dt: f64,
    eps: f64,
    forcing: &impl Forcing,
    disc: Discretization,
) -> Result<Step> {
    check_step_inputs(state, grid, dt, eps)?;
    let t_next = state.time + dt;
    let g = sample_forcing(forcing, grid, t_next);
    let rhs: Vec<[f64; 2]> = to_pairs(state)
        .into_iter()
        .zip(&g)
        .map(|([v, u], g)| [v, u + dt * g])
        .collect();
    let split = flux_split(eps)?;
    let alpha = disc.viscosity.alpha(split.lambda_max(), grid.dx(), dt);
    let (x, diagnostics) =
        implicit_lf_solve(split.jacobian_total(), alpha, &rhs, grid, dt, disc.ghosts)?;
    let next = from_pairs(&x, t_next);
    if !next.is_finite() {
        return Err(Error::NonFinite("implicit Euler state"));
    }
    Ok(Step {
        state: next,
        diagnostics,
    })
}

pub fn imex_step(
    state: &State,
    grid: &Grid,
    dt: f64,
    eps: f64,
    forcing: &impl Forcing,
) -> Result<Step> {
    imex_step_with(state, grid, dt, eps, forcing, Discretization::default())
}

pub fn imex_step_with(
    state: &State,
    grid: &Grid,
    dt: f64,
    eps: f64,
    forcing: &impl Forcing,
    disc: Discretization,
) -> Result<Step> {
    check_step_inputs(state, grid, dt, eps)?;
    let split = flux_split(eps)?;
    let n = grid.n_cells();
    let dx = grid.dx();

    // explicit Lax-Friedrichs on f_hat
    let v = with_ghosts(&state.v, disc.ghosts.v);
    let u = with_ghosts(&state.u, disc.ghosts.u);
    let visc = 0.5 * disc.viscosity.alpha(split.lambda_hat_max(), dx, dt);
    let face_flux: Vec<[f64; 2]> = (0..=n)
        .map(|k| {
            // face between padded cells k and k + 1
            let fl = split.nonstiff([v[k], u[k]]);
            let fr = split.nonstiff([v[k + 1], u[k + 1]]);
            [
                0.5 * (fl[0] + fr[0]) - visc * (v[k + 1] - v[k]),
                0.5 * (fl[1] + fr[1]) - visc * (u[k + 1] - u[k]),
            ]
        })
        .collect();
    let g = sample_forcing(forcing, grid, state.time);
    let ratio = dt / dx;
    let predicted: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            [
                state.v[i] - ratio * (face_flux[i + 1][0] - face_flux[i][0]),
                state.u[i] - ratio * (face_flux[i + 1][1] - face_flux[i][1]) + dt * g[i],
            ]
        })
        .collect();

    // implicit Lax-Friedrichs on f_tilde
    let alpha = disc.viscosity.alpha(split.lambda_tilde_max(), dx, dt);
    let (x, diagnostics) = implicit_lf_solve(
        split.jacobian_stiff(),
        alpha,
        &predicted,
        grid,
        dt,
        disc.ghosts,
    )?;
    let next = from_pairs(&x, state.time + dt);
    if !next.is_finite() {
        return Err(Error::NonFinite("IMEX state"));
    }
    Ok(Step {
        state: next,
        diagnostics,
    })
}

/// Advance one step with the chosen scheme.
pub fn step(
    kind: SchemeKind,
    state: &State,
    grid: &Grid,
    dt: f64,
    eps: f64,
    forcing: &impl Forcing,
    disc: Discretization,
) -> Result<Step> {
    match kind {
        SchemeKind::Ap => ap_step_with(state, grid, dt, eps, forcing, disc),
        SchemeKind::ImplicitEuler => implicit_euler_step_with(state, grid, dt, eps, forcing, disc),
        SchemeKind::Imex => imex_step_with(state, grid, dt, eps, forcing, disc),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub eps: f64,
    /// CFL number against the non-stiff wave speed; must be below one.
    pub cfl_hat: f64,
    pub t_final: f64,
    pub case: CaseKind,
    pub n_cells: usize,
    pub discretization: Discretization,
}

impl SchemeConfig {
    pub const DEFAULT_CFL_HAT: f64 = 0.8;
    pub const DEFAULT_T_FINAL: f64 = 0.1;

    pub fn new(kind: SchemeKind, case: CaseKind, eps: f64, n_cells: usize) -> Self {
        SchemeConfig {
            kind,
            eps,
            cfl_hat: Self::DEFAULT_CFL_HAT,
            t_final: Self::DEFAULT_T_FINAL,
            case,
            n_cells,
            discretization: Discretization::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_hat > 0.0 && self.cfl_hat < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_hat must lie in (0, 1), got {}",
                self.cfl_hat
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidEps {
                eps: self.eps,
                allowed: "(0, 1)",
            });
        }
        if self.n_cells < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells, got {}",
                self.n_cells
            )));
        }
        Ok(())
    }

    /// `cfl_hat dx / lambda_hat_max`; the non-stiff wave speed is one.
    pub fn dt_target(&self) -> f64 {
        self.cfl_hat / self.n_cells as f64
    }

    /// CFL number against the full wave speed `1 / eps`.
    pub fn stiff_cfl(&self) -> f64 {
        self.cfl_hat / self.eps
    }

    /// Number of uniform slabs and their width so that `steps * dt` hits
    /// `t_final`.
    pub fn time_slabs(&self) -> (usize, f64) {
        let ratio = self.t_final / self.dt_target();
        // tolerate rounding in ratios that are integers in exact arithmetic
        let steps = ((ratio * (1.0 - 1e-12)).ceil() as usize).max(1);
        (steps, self.t_final / steps as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_state: State,
    pub steps_taken: usize,
    pub dt_used: f64,
    pub grid: Grid,
    pub case: CaseDefinition,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl RunResult {
    pub fn max_condition_estimate(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.condition_estimate)
            .fold(0.0, f64::max)
    }

    pub fn ill_conditioned(&self) -> bool {
        self.diagnostics.iter().any(StepDiagnostics::ill_conditioned)
    }
}

/// Initialize from the exact solution at `t = 0` and march to `t_final`.
pub fn run(config: &SchemeConfig) -> Result<RunResult> {
    config.validate()?;
    let grid = unit_grid(config.n_cells)?;
    let case = make_case(config.case, config.eps)?;
    let (steps, dt) = config.time_slabs();

    let mut state = State::from_case(&case, &grid, 0.0);
    let mut diagnostics = Vec::with_capacity(steps);
    for n in 0..steps {
        let s = step(config.kind, &state, &grid, dt, config.eps, &case, config.discretization)
            .map_err(|e| Error::Step {
                step: n,
                source: Box::new(e),
            })?;
        state = s.state;
        // n dt avoids accumulating rounding in the clock
        state.time = if n + 1 == steps {
            config.t_final
        } else {
            (n + 1) as f64 * dt
        };
        diagnostics.push(s.diagnostics);
    }
    Ok(RunResult {
        final_state: state,
        steps_taken: steps,
        dt_used: dt,
        grid,
        case,
        diagnostics,
    })
}
