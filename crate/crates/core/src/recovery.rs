//! Cellwise derivative recovery with Lax-Friedrichs-type viscosity.
//!
//! For interior cells
//!
//! ```text
//!   vx_i = (v_{i+1} - v_{i-1}) / (2 dx) + (u_{i+1} + u_{i-1} - 2 u_i) / (2 dt)
//!   ux_i = (u_{i+1} - u_{i-1}) / (2 dx) + (v_{i+1} + v_{i-1} - 2 v_i) / (2 dt)
//! ```
//!
//! Boundary cells read their missing neighbour from a ghost value supplied by
//! a [`GhostPolicy`].

use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::model::{Grid, State};

/// How the value beyond a boundary is manufactured from interior data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// `ghost = -first`: zero Dirichlet at the face.
    Odd,
    /// `ghost = first`: zero Neumann at the face.
    Even,
    /// `ghost = 2 first - second`: linear extrapolation.
    Linear,
}

impl Extension {
    /// Ghost value given the boundary cell and its inward neighbour.
    #[inline]
    pub fn ghost(self, first: f64, second: f64) -> f64 {
        match self {
            Extension::Odd => -first,
            Extension::Even => first,
            Extension::Linear => 2.0 * first - second,
        }
    }

    /// Coefficients `(a, b)` with `ghost = a * first + b * second`.
    #[inline]
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            Extension::Odd => (-1.0, 0.0),
            Extension::Even => (1.0, 0.0),
            Extension::Linear => (2.0, -1.0),
        }
    }
}

/// Ghost-cell policy for the `(v, u)` pair, applied identically at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GhostPolicy {
    pub v: Extension,
    pub u: Extension,
}

impl GhostPolicy {
    /// Odd reflection for `v` (it vanishes on the boundary), even reflection
    /// for `u` (its limit profile is flat).
    pub const REFLECTION: GhostPolicy = GhostPolicy {
        v: Extension::Odd,
        u: Extension::Even,
    };

    pub const EXTRAPOLATION: GhostPolicy = GhostPolicy {
        v: Extension::Linear,
        u: Extension::Linear,
    };
}

impl GhostPolicy {
    /// Name of a preset policy, `None` for custom combinations.
    pub fn name(&self) -> Option<&'static str> {
        match *self {
            GhostPolicy::REFLECTION => Some("reflection"),
            GhostPolicy::EXTRAPOLATION => Some("extrapolation"),
            _ => None,
        }
    }
}

impl FromStr for GhostPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reflection" => Ok(GhostPolicy::REFLECTION),
            "extrapolation" => Ok(GhostPolicy::EXTRAPOLATION),
            other => Err(Error::InvalidArgument(format!("unknown ghost policy '{other}'"))),
        }
    }
}

impl Default for GhostPolicy {
    fn default() -> Self {
        GhostPolicy::REFLECTION
    }
}

/// Copy of `values` padded with one ghost on each side.
pub(crate) fn with_ghosts(values: &[f64], ext: Extension) -> Vec<f64> {
    let n = values.len();
    debug_assert!(n >= 2);
    let mut out = Vec::with_capacity(n + 2);
    out.push(ext.ghost(values[0], values[1]));
    out.extend_from_slice(values);
    out.push(ext.ghost(values[n - 1], values[n - 2]));
    out
}

/// Recovered cellwise derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredDerivatives {
    pub vx: Vec<f64>,
    pub ux: Vec<f64>,
}

pub fn recover_derivatives(state: &State, grid: &Grid, dt: f64) -> Result<RecoveredDerivatives> {
    recover_derivatives_with(state, grid, dt, GhostPolicy::default())
}

pub fn recover_derivatives_with(
    state: &State,
    grid: &Grid,
    dt: f64,
    ghosts: GhostPolicy,
) -> Result<RecoveredDerivatives> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    check_len("state v", grid.n_cells(), state.v.len())?;
    check_len("state u", grid.n_cells(), state.u.len())?;

    let v = with_ghosts(&state.v, ghosts.v);
    let u = with_ghosts(&state.u, ghosts.u);
    let inv_2dx = 0.5 / grid.dx();
    let inv_2dt = 0.5 / dt;

    // Face jumps of neighbouring values are exact in floating point, so the
    // second differences built from them telescope without rounding.
    let dv: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let du: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let n = grid.n_cells();
    let mut vx = Vec::with_capacity(n);
    let mut ux = Vec::with_capacity(n);
    for i in 0..n {
        vx.push((dv[i + 1] + dv[i]) * inv_2dx + (du[i + 1] - du[i]) * inv_2dt);
        ux.push((du[i + 1] + du[i]) * inv_2dx + (dv[i + 1] - dv[i]) * inv_2dt);
    }
    Ok(RecoveredDerivatives { vx, ux })
}
