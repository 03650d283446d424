//! Dense reference implementations of the three scheme steps.
//!
//! Every operator is written out as a full matrix and every linear system
//! is solved by Gaussian elimination with partial pivoting, so nothing here
//! shares code with the banded solvers in the library.

#![allow(dead_code)]

use ap_psystem::model::{unit_grid, Grid, State};
use ap_psystem::recovery::{Extension, GhostPolicy};
use ap_psystem::schemes::{step, Discretization, FnForcing, LfViscosity, SchemeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn gauss_solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Mat = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .unwrap();
        m.swap(k, p);
        x.swap(k, p);
        assert!(m[k][k] != 0.0, "singular dense matrix");
        let (top, rest) = m.split_at_mut(k + 1);
        let pivot = &top[k];
        for (i, row) in rest.iter_mut().enumerate() {
            let l = row[k] / pivot[k];
            for (r, p) in row[k..].iter_mut().zip(&pivot[k..]) {
                *r -= l * p;
            }
            x[k + 1 + i] -= l * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    x
}

/// `(n + 2) x n` matrix appending one ghost value on each side.
fn extension(n: usize, ext: Extension) -> Mat {
    let (a, b) = match ext {
        Extension::Odd => (-1.0, 0.0),
        Extension::Even => (1.0, 0.0),
        Extension::Linear => (2.0, -1.0),
    };
    let mut e = zeros(n + 2, n);
    e[0][0] = a;
    e[0][1] = b;
    for i in 0..n {
        e[i + 1][i] = 1.0;
    }
    e[n + 1][n - 1] = a;
    e[n + 1][n - 2] = b;
    e
}

fn pad(x: &[f64], ext: Extension) -> Vec<f64> {
    matvec(&extension(x.len(), ext), x)
}

/// Linear flux `f(v, u) = (p u, q v)` written as its two coefficients.
#[derive(Clone, Copy)]
pub struct LinearFlux {
    pub p: f64,
    pub q: f64,
    pub speed: f64,
}

pub fn total_flux(eps: f64) -> LinearFlux {
    LinearFlux {
        p: -1.0,
        q: -1.0 / (eps * eps),
        speed: 1.0 / eps,
    }
}

pub fn hat_flux(eps: f64) -> LinearFlux {
    LinearFlux {
        p: -eps,
        q: -1.0 / eps,
        speed: 1.0,
    }
}

pub fn tilde_flux(eps: f64) -> LinearFlux {
    LinearFlux {
        p: -(1.0 - eps),
        q: -(1.0 - eps) / (eps * eps),
        speed: (1.0 - eps) / eps,
    }
}

fn alpha(flux: LinearFlux, visc: LfViscosity, dx: f64, dt: f64) -> f64 {
    match visc {
        LfViscosity::WaveSpeed => flux.speed,
        LfViscosity::Classical => dx / dt,
    }
}

/// Flux-difference operator `(F_{i+1/2} - F_{i-1/2}) / dx` of the
/// Lax-Friedrichs flux applied to the stacked vector `[v; u]`.
fn lf_divergence(
    w: &[f64],
    flux: LinearFlux,
    alpha: f64,
    dx: f64,
    ghosts: GhostPolicy,
) -> Vec<f64> {
    let n = w.len() / 2;
    let v = pad(&w[..n], ghosts.v);
    let u = pad(&w[n..], ghosts.u);
    let face = |k: usize| -> (f64, f64) {
        let fl = (flux.p * u[k], flux.q * v[k]);
        let fr = (flux.p * u[k + 1], flux.q * v[k + 1]);
        (
            0.5 * (fl.0 + fr.0) - 0.5 * alpha * (v[k + 1] - v[k]),
            0.5 * (fl.1 + fr.1) - 0.5 * alpha * (u[k + 1] - u[k]),
        )
    };
    let faces: Vec<(f64, f64)> = (0..=n).map(face).collect();
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        out[i] = (faces[i + 1].0 - faces[i].0) / dx;
        out[n + i] = (faces[i + 1].1 - faces[i].1) / dx;
    }
    out
}

/// Dense `I + dt L` assembled column by column from the flux operator.
fn implicit_matrix(n: usize, flux: LinearFlux, alpha: f64, dx: f64, dt: f64, ghosts: GhostPolicy) -> Mat {
    let mut a = zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let mut e = vec![0.0; 2 * n];
        e[j] = 1.0;
        let col = lf_divergence(&e, flux, alpha, dx, ghosts);
        for i in 0..2 * n {
            a[i][j] = e[i] + dt * col[i];
        }
    }
    a
}

fn split(w: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = w.len() / 2;
    (w[..n].to_vec(), w[n..].to_vec())
}

pub struct OracleInput<'a> {
    pub v: &'a [f64],
    pub u: &'a [f64],
    pub grid: &'a Grid,
    pub dt: f64,
    pub eps: f64,
    pub ghosts: GhostPolicy,
    pub viscosity: LfViscosity,
}

pub fn implicit_euler(inp: &OracleInput, g_next: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = inp.v.len();
    let dx = inp.grid.dx();
    let flux = total_flux(inp.eps);
    let a = implicit_matrix(n, flux, alpha(flux, inp.viscosity, dx, inp.dt), dx, inp.dt, inp.ghosts);
    let mut rhs = inp.v.to_vec();
    rhs.extend(inp.u.iter().zip(g_next).map(|(u, g)| u + inp.dt * g));
    split(gauss_solve(&a, &rhs))
}

pub fn imex(inp: &OracleInput, g_now: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = inp.v.len();
    let dx = inp.grid.dx();
    let mut w = inp.v.to_vec();
    w.extend_from_slice(inp.u);
    let hat = hat_flux(inp.eps);
    let div = lf_divergence(&w, hat, alpha(hat, inp.viscosity, dx, inp.dt), dx, inp.ghosts);
    let mut predicted: Vec<f64> = w.iter().zip(&div).map(|(w, d)| w - inp.dt * d).collect();
    for i in 0..n {
        predicted[n + i] += inp.dt * g_now[i];
    }
    let tilde = tilde_flux(inp.eps);
    let a = implicit_matrix(n, tilde, alpha(tilde, inp.viscosity, dx, inp.dt), dx, inp.dt, inp.ghosts);
    split(gauss_solve(&a, &predicted))
}

pub fn ap(inp: &OracleInput, g_now: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = inp.v.len();
    let (dx, dt, eps) = (inp.grid.dx(), inp.dt, inp.eps);

    // central first difference and halved second difference on padded data
    let mut c = zeros(n, n + 2);
    let mut s = zeros(n, n + 2);
    for i in 0..n {
        c[i][i] = -0.5 / dx;
        c[i][i + 2] = 0.5 / dx;
        s[i][i] = 0.5 / dt;
        s[i][i + 1] = -1.0 / dt;
        s[i][i + 2] = 0.5 / dt;
    }
    let vp = pad(inp.v, inp.ghosts.v);
    let up = pad(inp.u, inp.ghosts.u);
    let add = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> { a.iter().zip(&b).map(|(a, b)| a + b).collect() };
    let vx = add(matvec(&c, &vp), matvec(&s, &up));
    let ux = add(matvec(&c, &up), matvec(&s, &vp));

    let iota1: Vec<f64> = (0..n).map(|i| inp.v[i] + dt * ux[i]).collect();
    let iota2: Vec<f64> = (0..n).map(|i| g_now[i] + vx[i] / eps).collect();
    let gamma = (dt * (1.0 - eps) / eps).powi(2);

    // Galerkin system on all n + 1 nodes, then drop the two boundary rows
    // and columns.
    let mut k = zeros(n + 1, n + 1);
    let mut b = vec![0.0; n + 1];
    for e in 0..n {
        let local = [
            [gamma / dx + dx / 3.0, -gamma / dx + dx / 6.0],
            [-gamma / dx + dx / 6.0, gamma / dx + dx / 3.0],
        ];
        // derivative of the element's left and right hat functions
        let slopes = [-1.0 / dx, 1.0 / dx];
        for a in 0..2 {
            for c in 0..2 {
                k[e + a][e + c] += local[a][c];
            }
            b[e + a] += iota1[e] * dx / 2.0 - dt * dt * (1.0 - eps) * iota2[e] * slopes[a] * dx;
        }
    }
    let inner: Mat = (1..n).map(|i| k[i][1..n].to_vec()).collect();
    let mut nodes = vec![0.0];
    nodes.extend(gauss_solve(&inner, &b[1..n]));
    nodes.push(0.0);

    let v: Vec<f64> = (0..n).map(|i| 0.5 * (nodes[i] + nodes[i + 1])).collect();
    let u: Vec<f64> = (0..n)
        .map(|i| {
            let slope = (nodes[i + 1] - nodes[i]) / dx;
            inp.u[i] + dt * (vx[i] / eps + (1.0 - eps) / (eps * eps) * slope + g_now[i])
        })
        .collect();
    (v, u)
}

/// Largest entry-wise difference relative to `max(1, max |reference|)`.
pub fn relative_gap(actual: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    actual
        .iter()
        .zip(reference)
        .map(|(a, r)| (a - r).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Outcome of comparing library steps with the dense references.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sweep {
    pub comparisons: usize,
    pub worst_gap: f64,
    /// Largest `gap / condition estimate`: the forward error a backward
    /// stable solve is allowed is a small multiple of roundoff times this.
    pub worst_gap_per_condition: f64,
}

/// Compare all three steps with their dense references on `states` random
/// states for each N in {4, 8}, drawing eps, dt, forcing and viscosity at
/// random and using the given ghost policy.
pub fn oracle_sweep(seed: u64, states: usize, ghosts: GhostPolicy) -> Sweep {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Sweep::default();
    let viscosities = [LfViscosity::WaveSpeed, LfViscosity::Classical];
    for n in [4usize, 8] {
        let grid = unit_grid(n).unwrap();
        for _ in 0..states {
            let eps = [0.5, 0.1, 0.01][rng.random_range(0..3)];
            let dt = rng.random_range(0.2..1.0) / n as f64;
            let t0 = rng.random_range(0.0..1.0);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let c: f64 = rng.random_range(-1.0..1.0);
            let g = move |x: f64, t: f64| a * x + b * t + c * x * x * t;
            let forcing = FnForcing(g);
            let viscosity = viscosities[rng.random_range(0..2)];
            let state = State::new(v.clone(), u.clone(), t0).unwrap();
            let inp = OracleInput { v: &v, u: &u, grid: &grid, dt, eps, ghosts, viscosity };
            let g_now: Vec<f64> = grid.midpoints().iter().map(|&x| g(x, t0)).collect();
            let g_next: Vec<f64> = grid.midpoints().iter().map(|&x| g(x, t0 + dt)).collect();
            let disc = Discretization { ghosts, viscosity };
            for kind in [SchemeKind::Ap, SchemeKind::ImplicitEuler, SchemeKind::Imex] {
                let stepped = step(kind, &state, &grid, dt, eps, &forcing, disc).unwrap();
                let (rv, ru) = match kind {
                    SchemeKind::Ap => ap(&inp, &g_now),
                    SchemeKind::ImplicitEuler => implicit_euler(&inp, &g_next),
                    SchemeKind::Imex => imex(&inp, &g_now),
                };
                let got = &stepped.state;
                let gap = relative_gap(&got.v, &rv).max(relative_gap(&got.u, &ru));
                out.comparisons += 1;
                out.worst_gap = out.worst_gap.max(gap);
                out.worst_gap_per_condition = out
                    .worst_gap_per_condition
                    .max(gap / stepped.diagnostics.condition_estimate);
            }
        }
    }
    out
}

/// Closed-form solution of `-gamma v'' + v = 1` on (0, 1) with zero ends.
pub fn cosh_exact(x: f64, gamma: f64) -> f64 {
    let k = 1.0 / gamma.sqrt();
    1.0 - (k * (x - 0.5)).cosh() / (0.5 * k).cosh()
}

fn cosh_exact_dx(x: f64, gamma: f64) -> f64 {
    let k = 1.0 / gamma.sqrt();
    -k * (k * (x - 0.5)).sinh() / (0.5 * k).cosh()
}

/// Five-point Gauss-Legendre nodes and weights on [-1, 1].
const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

pub struct CoshSolve {
    pub problem: ap_psystem::elliptic::EllipticProblem,
    pub solution: ap_psystem::elliptic::FemSolution,
}

pub fn cosh_solve(n: usize, gamma: f64) -> CoshSolve {
    use ap_psystem::elliptic::{assemble, assemble_load, solve, LoadFunctional};
    let grid = unit_grid(n).unwrap();
    let load = LoadFunctional {
        iota1: vec![1.0; n],
        iota2: vec![0.0; n],
        dt: 0.5,
        eps: 0.5,
    };
    let problem = assemble(gamma, &grid).unwrap();
    let rhs = assemble_load(&load, &grid).unwrap();
    let solution = solve(&problem, &rhs).unwrap();
    CoshSolve { problem, solution }
}

/// `(|v - v_h|_{L^2}, |v' - v_h'|_{L^2})` by Gauss quadrature per cell.
pub fn cosh_errors(n: usize, gamma: f64) -> (f64, f64) {
    let s = cosh_solve(n, gamma);
    let dx = 1.0 / n as f64;
    let (mut e0, mut e1) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = (s.solution.node(i), s.solution.node(i + 1));
        let slope = (b - a) / dx;
        for (xi, w) in GAUSS5 {
            let t = 0.5 * (xi + 1.0);
            let x = (i as f64 + t) * dx;
            let vh = a + (b - a) * t;
            e0 += 0.5 * dx * w * (cosh_exact(x, gamma) - vh).powi(2);
            e1 += 0.5 * dx * w * (cosh_exact_dx(x, gamma) - slope).powi(2);
        }
    }
    (e0.sqrt(), e1.sqrt())
}

/// `max_j |a(v - v_h, phi_j)|` with `a(v, phi_j)` in closed form: the
/// stiffness part telescopes to nodal differences of `v` and the mass part
/// integrates `cosh` against a hat exactly.
pub fn cosh_galerkin_residual(n: usize, gamma: f64) -> f64 {
    let s = cosh_solve(n, gamma);
    let dx = 1.0 / n as f64;
    let k2 = 1.0 / gamma;
    let c = (0.5 * k2.sqrt()).cosh();
    let node = |j: usize| j as f64 * dx;
    let ch = |j: usize| (k2.sqrt() * (node(j) - 0.5)).cosh();
    let av_h = s.problem.apply(&s.solution.nodal);
    (1..n)
        .map(|j| {
            let v = |m: usize| cosh_exact(node(m), gamma);
            let stiff = gamma / dx * (2.0 * v(j) - v(j - 1) - v(j + 1));
            let hat_cosh = (ch(j + 1) - 2.0 * ch(j) + ch(j - 1)) / (k2 * dx);
            let mass = dx - hat_cosh / c;
            (stiff + mass - av_h[j - 1]).abs()
        })
        .fold(0.0, f64::max)
}
