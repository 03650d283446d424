//! The implicit half of the AP step as a reaction-diffusion problem
//!
//! ```text
//!   -gamma v'' + v = iota   on (0, 1),   v(0) = v(1) = 0,
//!   gamma = dt^2 (1 - eps)^2 / eps^2,
//! ```
//!
//! discretized with continuous piecewise-linear elements on the cell grid.
//! Every integral is evaluated exactly: the integrands are products of
//! polynomials of degree at most two with cellwise constants.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::linalg::{thomas, tridiag_mul};
use crate::model::Grid;

/// Sharp Poincare-Friedrichs constant of the unit interval.
pub const POINCARE_UNIT_INTERVAL: f64 = 1.0 / PI;

/// Diffusion coefficient `dt^2 (1 - eps)^2 / eps^2`.
pub fn gamma_of(eps: f64, dt: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEps {
            eps,
            allowed: "(0, 1)",
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let r = dt * (1.0 - eps) / eps;
    Ok(r * r)
}

/// Assembled stiffness-plus-mass system on the interior nodes. On a uniform
/// grid the matrix is Toeplitz, so only two numbers are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticProblem {
    pub gamma: f64,
    pub grid: Grid,
    pub n_dof: usize,
    /// `2 gamma / dx + 4 dx / 6`
    pub diag: f64,
    /// `-gamma / dx + dx / 6`
    pub off: f64,
    pub poincare_const: f64,
    /// `gamma + C_PF^2`, the bound of `a(., .)` in the H^1_0 seminorm.
    pub boundedness_const: f64,
}

pub fn assemble(gamma: f64, grid: &Grid) -> Result<EllipticProblem> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "diffusion coefficient must be finite and nonnegative, got {gamma}"
        )));
    }
    let dx = grid.dx();
    // The sharp constant scales with the interval length.
    let poincare_const = grid.length() * POINCARE_UNIT_INTERVAL;
    Ok(EllipticProblem {
        gamma,
        grid: grid.clone(),
        n_dof: grid.n_cells() - 1,
        diag: 2.0 * gamma / dx + 4.0 * dx / 6.0,
        off: -gamma / dx + dx / 6.0,
        poincare_const,
        boundedness_const: gamma + poincare_const * poincare_const,
    })
}

impl EllipticProblem {
    fn bands(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n_dof;
        (
            vec![self.off; n.saturating_sub(1)],
            vec![self.diag; n],
            vec![self.off; n.saturating_sub(1)],
        )
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (sub, diag, sup) = self.bands();
        tridiag_mul(&sub, &diag, &sup, x)
    }

    /// Discrete dual norm `sqrt(b^T A^{-1} b)`: the energy norm of the Riesz
    /// representative of `b`.
    pub fn dual_norm(&self, b: &[f64]) -> Result<f64> {
        let x = solve(self, b)?;
        Ok(dot(b, &x.nodal).max(0.0).sqrt())
    }

    /// Discrete H^{-1} norm `sqrt(b^T K^{-1} b)` with `K` the pure stiffness
    /// matrix.
    pub fn h01_dual_norm(&self, b: &[f64]) -> Result<f64> {
        check_len("load vector", self.n_dof, b.len())?;
        let n = self.n_dof;
        let dx = self.grid.dx();
        let x = thomas(
            &vec![-1.0 / dx; n - 1],
            &vec![2.0 / dx; n],
            &vec![-1.0 / dx; n - 1],
            b,
        )?;
        Ok(dot(b, &x).max(0.0).sqrt())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cellwise-constant data of the load `iota_h(phi) = int iota1 phi - dt^2 (1 - eps) iota2 phi'`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFunctional {
    pub iota1: Vec<f64>,
    pub iota2: Vec<f64>,
    pub dt: f64,
    pub eps: f64,
}

/// Integrate the load against every interior hat function.
pub fn assemble_load(load: &LoadFunctional, grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.n_cells();
    check_len("iota1", n, load.iota1.len())?;
    check_len("iota2", n, load.iota2.len())?;
    let half_dx = 0.5 * grid.dx();
    let flux_weight = load.dt * load.dt * (1.0 - load.eps);
    Ok((1..n)
        .map(|j| {
            half_dx * (load.iota1[j - 1] + load.iota1[j])
                - flux_weight * (load.iota2[j - 1] - load.iota2[j])
        })
        .collect())
}

/// Piecewise-linear function with zero boundary values, stored at the
/// interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub nodal: Vec<f64>,
    pub grid: Grid,
}

impl FemSolution {
    pub fn new(nodal: Vec<f64>, grid: &Grid) -> Result<Self> {
        check_len("nodal values", grid.n_cells() - 1, nodal.len())?;
        Ok(FemSolution {
            nodal,
            grid: grid.clone(),
        })
    }

    /// Value at node `k` of `0..=n_cells`, boundary nodes included.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        if k == 0 || k == self.grid.n_cells() {
            0.0
        } else {
            self.nodal[k - 1]
        }
    }

    /// `(left, right)` node values of cell `i`.
    fn cell_nodes(&self, i: usize) -> (f64, f64) {
        (self.node(i), self.node(i + 1))
    }

    pub fn l2_norm(&self) -> f64 {
        let dx = self.grid.dx();
        (0..self.grid.n_cells())
            .map(|i| {
                let (a, b) = self.cell_nodes(i);
                dx / 3.0 * (a * a + a * b + b * b)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `|phi'|_{L^2}`, the H^1_0 norm.
    pub fn h01_seminorm(&self) -> f64 {
        let dx = self.grid.dx();
        (0..self.grid.n_cells())
            .map(|i| {
                let (a, b) = self.cell_nodes(i);
                (b - a) * (b - a) / dx
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &FemSolution) -> FemSolution {
        FemSolution {
            nodal: self
                .nodal
                .iter()
                .zip(&other.nodal)
                .map(|(a, b)| a - b)
                .collect(),
            grid: self.grid.clone(),
        }
    }
}

pub fn solve(problem: &EllipticProblem, rhs: &[f64]) -> Result<FemSolution> {
    check_len("elliptic rhs", problem.n_dof, rhs.len())?;
    let (sub, diag, sup) = problem.bands();
    let nodal = thomas(&sub, &diag, &sup, rhs)?;
    Ok(FemSolution {
        nodal,
        grid: problem.grid.clone(),
    })
}

/// Cell-midpoint values: the mean of the two bounding nodes.
pub fn eval_midpoints(sol: &FemSolution) -> Vec<f64> {
    (0..sol.grid.n_cells())
        .map(|i| {
            let (a, b) = sol.cell_nodes(i);
            0.5 * (a + b)
        })
        .collect()
}

/// Cellwise slope.
pub fn fem_derivative(sol: &FemSolution) -> Vec<f64> {
    let inv_dx = 1.0 / sol.grid.dx();
    (0..sol.grid.n_cells())
        .map(|i| {
            let (a, b) = sol.cell_nodes(i);
            (b - a) * inv_dx
        })
        .collect()
}

/// `sqrt(|phi|_{L^2}^2 + gamma |phi'|_{L^2}^2)`, equal to `sqrt(a(phi, phi))`.
pub fn energy_norm(sol: &FemSolution, gamma: f64) -> f64 {
    let l2 = sol.l2_norm();
    let h1 = sol.h01_seminorm();
    (l2 * l2 + gamma * h1 * h1).sqrt()
}

/// Result of perturbing the load of an elliptic solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningReport {
    pub gamma: f64,
    /// `|v - v~|_gamma / |v|_gamma`
    pub rel_solution_change: f64,
    /// `|b - b~|_* / |b|_*`
    pub rel_load_change: f64,
    /// `rel_solution_change / rel_load_change`; one in exact arithmetic.
    /// Zero when the perturbation vanishes.
    pub energy_ratio: f64,
    /// `|v - v~|_gamma |b|_* <= |b - b~|_* |v|_gamma` with relative slack.
    pub energy_bound_holds: bool,
    /// Relative change in the H^1_0 seminorm over the H^{-1} relative load
    /// change; `None` for `gamma = 0`.
    pub h01_ratio: Option<f64>,
    /// `M / gamma = 1 + C_PF^2 / gamma`.
    pub h01_bound: Option<f64>,
    pub h01_bound_holds: bool,
}

/// Relative slack allowed on the unit-constant conditioning bound.
pub const CONDITIONING_SLACK: f64 = 1e-10;

pub fn conditioning_probe(
    problem: &EllipticProblem,
    rhs: &[f64],
    perturbation: &[f64],
) -> Result<ConditioningReport> {
    check_len("probe rhs", problem.n_dof, rhs.len())?;
    check_len("probe perturbation", problem.n_dof, perturbation.len())?;
    if rhs.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument(
            "conditioning probe needs a nonzero rhs".into(),
        ));
    }
    let perturbed: Vec<f64> = rhs.iter().zip(perturbation).map(|(a, b)| a + b).collect();
    let v = solve(problem, rhs)?;
    let v_pert = solve(problem, &perturbed)?;
    let diff = v.sub(&v_pert);
    let gamma = problem.gamma;

    let sol_change = energy_norm(&diff, gamma);
    let sol_norm = energy_norm(&v, gamma);
    let load_norm = problem.dual_norm(rhs)?;
    let load_change = problem.dual_norm(perturbation)?;

    let lhs = sol_change * load_norm;
    let rhs_bound = load_change * sol_norm;
    let energy_bound_holds = lhs <= rhs_bound * (1.0 + CONDITIONING_SLACK) + f64::MIN_POSITIVE;

    let rel_solution_change = sol_change / sol_norm;
    let rel_load_change = load_change / load_norm;
    let energy_ratio = if rel_load_change > 0.0 {
        rel_solution_change / rel_load_change
    } else {
        0.0
    };

    let (h01_ratio, h01_bound, h01_bound_holds) = if gamma > 0.0 {
        let bound = problem.boundedness_const / gamma;
        let rel_sol = diff.h01_seminorm() / v.h01_seminorm();
        let rel_load = problem.h01_dual_norm(perturbation)? / problem.h01_dual_norm(rhs)?;
        let ratio = if rel_load > 0.0 { rel_sol / rel_load } else { 0.0 };
        (
            Some(ratio),
            Some(bound),
            ratio <= bound * (1.0 + CONDITIONING_SLACK),
        )
    } else {
        (None, None, true)
    };

    Ok(ConditioningReport {
        gamma,
        rel_solution_change,
        rel_load_change,
        energy_ratio,
        energy_bound_holds,
        h01_ratio,
        h01_bound,
        h01_bound_holds,
    })
}
