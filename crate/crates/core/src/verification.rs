//! Empirical checks of the scheme's analytical properties.
//!
//! Each suite returns structured reports plus a flat list of [`SuiteRow`]s
//! for the `verify` subcommand. Pass criteria are either least-squares
//! slopes in log-log space with a stated window, or envelopes built from the
//! big-O bounds with every constant set to one and a safety factor of
//! [`ENVELOPE_FACTOR`].

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{assemble, conditioning_probe, CONDITIONING_SLACK};
use crate::error::{Error, Result};
use crate::harness::{format_float, l2_error, log_log_slope, L2Errors};
use crate::model::{
    check_splitting_admissible, flux_split, make_case, unit_grid, AdmissibilityReport, CaseKind,
    State,
};
use crate::schemes::ap_step;

/// Largest stiffness parameter the consistency suites accept.
pub const EPS0: f64 = 0.5;
/// Time level the single-step suites start from.
pub const ANCHOR_TIME: f64 = 0.05;
pub const ENVELOPE_FACTOR: f64 = 10.0;
pub const DEFAULT_SEED: u64 = 20_240_617;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Dt,
    Dx,
    Eps,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Dt => "dt",
            Axis::Dx => "dx",
            Axis::Eps => "eps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeCheck {
    /// `|slope - target| <= tolerance`
    Window { target: f64, tolerance: f64 },
    /// `slope >= target - tolerance`
    AtLeast { target: f64, tolerance: f64 },
    /// The slope is reported but not judged.
    ReportOnly,
}

impl SlopeCheck {
    fn accepts(self, slope: Option<f64>) -> bool {
        match (self, slope) {
            (SlopeCheck::ReportOnly, _) => true,
            (_, None) => false,
            (SlopeCheck::Window { target, tolerance }, Some(s)) => (s - target).abs() <= tolerance,
            (SlopeCheck::AtLeast { target, tolerance }, Some(s)) => s >= target - tolerance,
        }
    }

    fn describe(self) -> String {
        match self {
            SlopeCheck::Window { target, tolerance } => format!("{target} +- {tolerance}"),
            SlopeCheck::AtLeast { target, tolerance } => format!(">= {target} (tol {tolerance})"),
            SlopeCheck::ReportOnly => "reported".into(),
        }
    }
}

/// Error samples against one parameter, with a log-log slope fit and an
/// optional per-sample envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub name: String,
    pub axis: Axis,
    pub samples: Vec<(f64, f64)>,
    pub fitted_slope: Option<f64>,
    pub slope_check: SlopeCheck,
    /// Upper limit per sample; empty when there is no envelope.
    pub envelope: Vec<f64>,
    pub slope_ok: bool,
    pub envelope_ok: bool,
    pub pass: bool,
}

impl ScalingReport {
    fn new(
        name: impl Into<String>,
        axis: Axis,
        samples: Vec<(f64, f64)>,
        slope_check: SlopeCheck,
        envelope: Vec<f64>,
    ) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidArgument(
                "a scaling report needs at least three samples".into(),
            ));
        }
        let logged: Vec<(f64, f64)> = samples.iter().map(|&(p, e)| (p.ln(), e)).collect();
        let fitted_slope = log_log_slope(&logged);
        let slope_ok = slope_check.accepts(fitted_slope);
        let envelope_ok = samples
            .iter()
            .zip(&envelope)
            .all(|(&(_, e), &lim)| e.is_finite() && e <= lim);
        Ok(ScalingReport {
            name: name.into(),
            axis,
            samples,
            fitted_slope,
            slope_check,
            envelope,
            slope_ok,
            envelope_ok,
            pass: slope_ok && envelope_ok,
        })
    }

    pub fn target_slope(&self) -> Option<f64> {
        match self.slope_check {
            SlopeCheck::Window { target, .. } | SlopeCheck::AtLeast { target, .. } => Some(target),
            SlopeCheck::ReportOnly => None,
        }
    }

    pub fn tolerance(&self) -> Option<f64> {
        match self.slope_check {
            SlopeCheck::Window { tolerance, .. } | SlopeCheck::AtLeast { tolerance, .. } => {
                Some(tolerance)
            }
            SlopeCheck::ReportOnly => None,
        }
    }

    /// Largest `error / limit` over the envelope.
    pub fn worst_envelope_ratio(&self) -> Option<f64> {
        if self.envelope.is_empty() {
            return None;
        }
        Some(
            self.samples
                .iter()
                .zip(&self.envelope)
                .map(|(&(_, e), &lim)| e / lim)
                .fold(0.0, f64::max),
        )
    }

    fn rows(&self, suite: &'static str) -> Vec<SuiteRow> {
        let mut rows = Vec::new();
        if !matches!(self.slope_check, SlopeCheck::ReportOnly) || self.envelope.is_empty() {
            rows.push(SuiteRow {
                suite,
                check: format!("{} slope vs {}", self.name, self.axis.name()),
                value: self.fitted_slope.unwrap_or(f64::NAN),
                limit: self.slope_check.describe(),
                pass: self.slope_ok,
            });
        }
        if let Some(r) = self.worst_envelope_ratio() {
            rows.push(SuiteRow {
                suite,
                check: format!("{} error / envelope (slope {})", self.name, fmt_opt(self.fitted_slope)),
                value: r,
                limit: "<= 1".into(),
                pass: self.envelope_ok,
            });
        }
        rows
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into())
}

fn check_consistency_regime(eps: f64, dt: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= EPS0) {
        return Err(Error::InvalidEps {
            eps,
            allowed: "(0, 0.5]",
        });
    }
    if eps > dt {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} exceeds dt = {dt}; single-step bounds assume eps <= dt"
        )));
    }
    Ok(())
}

/// One AP step from exact smooth-case data at `t0` with `dt = cfl_hat dx`.
pub fn one_step_error(eps: f64, n_cells: usize, cfl_hat: f64, t0: f64) -> Result<(f64, f64, L2Errors)> {
    let grid = unit_grid(n_cells)?;
    let case = make_case(CaseKind::Smooth, eps)?;
    let dt = cfl_hat * grid.dx();
    check_consistency_regime(eps, dt)?;
    let state = State::from_case(&case, &grid, t0);
    let next = ap_step(&state, &grid, dt, eps, &case)?.state;
    Ok((dt, grid.dx(), l2_error(&next, &case, &grid)?))
}

/// Sweeps for the single-step `v` suite.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyVPlan {
    pub anchor: f64,
    pub cfl_hat: f64,
    /// Fixed `eps` with a resolution sweep; every `dt` must stay `>= eps`.
    pub regime_a_eps: f64,
    pub regime_a_nx: Vec<usize>,
    /// Fixed resolution with an `eps` sweep.
    pub regime_b_nx: usize,
    pub regime_b_eps: Vec<f64>,
    /// Tiny `eps` at which the one-step error must fall below `floor`.
    pub floor_eps: f64,
    pub floor_nx: Vec<usize>,
    pub floor: f64,
}

impl Default for ConsistencyVPlan {
    fn default() -> Self {
        ConsistencyVPlan {
            anchor: ANCHOR_TIME,
            cfl_hat: 0.8,
            regime_a_eps: 1e-2,
            regime_a_nx: vec![8, 16, 32, 64],
            regime_b_nx: 256,
            regime_b_eps: vec![1e-3, 1e-4, 1e-5],
            floor_eps: 1e-8,
            floor_nx: vec![16, 256, 4096],
            floor: 1e-12,
        }
    }
}

fn v_bound(eps: f64, dt: f64, dx: f64) -> f64 {
    eps * eps * dt * dt + eps.powi(4) + eps.powi(3) * dx + eps.powi(6) / (dx * dx)
}

fn require_smooth(case: CaseKind) -> Result<()> {
    if case != CaseKind::Smooth {
        return Err(Error::InvalidArgument(
            "consistency suites need the smooth case".into(),
        ));
    }
    Ok(())
}

pub fn consistency_v_suite(case: CaseKind, plan: &ConsistencyVPlan) -> Result<Vec<ScalingReport>> {
    require_smooth(case)?;
    let eps = plan.regime_a_eps;
    let mut samples = Vec::new();
    let mut envelope = Vec::new();
    for &n in &plan.regime_a_nx {
        let (dt, dx, e) = one_step_error(eps, n, plan.cfl_hat, plan.anchor)?;
        samples.push((dx, e.v));
        envelope.push(ENVELOPE_FACTOR * v_bound(eps, dt, dx));
    }
    let a = ScalingReport::new("v regime A", Axis::Dx, samples, SlopeCheck::ReportOnly, envelope)?;

    let mut samples = Vec::new();
    for &e in &plan.regime_b_eps {
        let (_, _, err) = one_step_error(e, plan.regime_b_nx, plan.cfl_hat, plan.anchor)?;
        samples.push((e, err.v));
    }
    let b = ScalingReport::new(
        "v regime B",
        Axis::Eps,
        samples,
        SlopeCheck::AtLeast {
            target: 2.0,
            tolerance: 0.05,
        },
        Vec::new(),
    )?;

    let mut samples = Vec::new();
    for &n in &plan.floor_nx {
        let (_, dx, err) = one_step_error(plan.floor_eps, n, plan.cfl_hat, plan.anchor)?;
        samples.push((dx, err.v));
    }
    let envelope = vec![plan.floor; samples.len()];
    let floor = ScalingReport::new(
        format!("v floor eps={}", format_float(plan.floor_eps)),
        Axis::Dx,
        samples,
        SlopeCheck::ReportOnly,
        envelope,
    )?;
    Ok(vec![a, b, floor])
}

/// Sweeps for the single-step `u` suite.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyUPlan {
    pub anchor: f64,
    pub cfl_hat: f64,
    pub slope_eps: f64,
    pub slope_nx: Vec<usize>,
    pub bound_eps: f64,
    pub bound_nx: Vec<usize>,
}

impl Default for ConsistencyUPlan {
    fn default() -> Self {
        ConsistencyUPlan {
            anchor: ANCHOR_TIME,
            cfl_hat: 0.8,
            slope_eps: 1e-6,
            slope_nx: vec![64, 128, 256, 512, 1024],
            bound_eps: 1e-2,
            bound_nx: vec![16, 32, 64],
        }
    }
}

fn u_bound(eps: f64, dt: f64, dx: f64) -> f64 {
    dt * dt + eps.powi(4) / (dx * dx) + eps * eps
}

pub fn consistency_u_suite(case: CaseKind, plan: &ConsistencyUPlan) -> Result<Vec<ScalingReport>> {
    require_smooth(case)?;
    let eps = plan.slope_eps;
    let mut samples = Vec::new();
    let mut envelope = Vec::new();
    for &n in &plan.slope_nx {
        let (dt, _, e) = one_step_error(eps, n, plan.cfl_hat, plan.anchor)?;
        samples.push((dt, e.u));
        envelope.push(ENVELOPE_FACTOR * (dt * dt).max(eps * eps));
    }
    let slope = ScalingReport::new(
        format!("u eps={}", format_float(eps)),
        Axis::Dt,
        samples,
        SlopeCheck::Window {
            target: 2.0,
            tolerance: 0.3,
        },
        envelope,
    )?;

    let eps = plan.bound_eps;
    let mut samples = Vec::new();
    let mut envelope = Vec::new();
    for &n in &plan.bound_nx {
        let (dt, dx, e) = one_step_error(eps, n, plan.cfl_hat, plan.anchor)?;
        samples.push((dt, e.u));
        envelope.push(ENVELOPE_FACTOR * u_bound(eps, dt, dx));
    }
    let bound = ScalingReport::new(
        format!("u eps={}", format_float(eps)),
        Axis::Dt,
        samples,
        SlopeCheck::ReportOnly,
        envelope,
    )?;
    Ok(vec![slope, bound])
}

/// `sup |v| / eps^2` and `sup |u_x| / eps^2` at one `(eps, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiscaleSample {
    pub eps: f64,
    pub t: f64,
    pub v_ratio: f64,
    pub ux_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleReport {
    pub case: CaseKind,
    pub samples: Vec<MultiscaleSample>,
    /// Window bounds calibrated at `eps = 0.1`.
    pub v_bound: f64,
    pub ux_bound: f64,
    pub pass: bool,
}

pub const MULTISCALE_TIMES: [f64; 3] = [0.0, 0.05, 0.1];
pub const MULTISCALE_POINTS: usize = 10_000;
const CALIBRATION_EPS: f64 = 0.1;

fn multiscale_ratios(case: CaseKind, eps: f64, t: f64) -> Result<MultiscaleSample> {
    let c = make_case(case, eps)?;
    let e2 = eps * eps;
    let (mut sv, mut su) = (0.0f64, 0.0f64);
    for k in 0..=MULTISCALE_POINTS {
        let x = k as f64 / MULTISCALE_POINTS as f64;
        sv = sv.max(c.v_exact(x, t).abs());
        su = su.max(c.u_x_exact(x, t).abs());
    }
    Ok(MultiscaleSample {
        eps,
        t,
        v_ratio: sv / e2,
        ux_ratio: su / e2,
    })
}

pub fn multiscale_suite(case: CaseKind, eps_list: &[f64]) -> Result<MultiscaleReport> {
    let mut v_bound = 0.0f64;
    let mut ux_bound = 0.0f64;
    for t in MULTISCALE_TIMES {
        let s = multiscale_ratios(case, CALIBRATION_EPS, t)?;
        v_bound = v_bound.max(s.v_ratio);
        ux_bound = ux_bound.max(s.ux_ratio);
    }
    // rounding in eps^2 and in the closed forms
    let slack = 1.0 + 1e-9;
    v_bound *= slack;
    ux_bound *= slack;

    let mut samples = Vec::new();
    for &eps in eps_list {
        for t in MULTISCALE_TIMES {
            samples.push(multiscale_ratios(case, eps, t)?);
        }
    }
    let pass = samples.iter().all(|s| {
        (0.0..=v_bound).contains(&s.v_ratio) && (0.0..=ux_bound).contains(&s.ux_ratio)
    });
    Ok(MultiscaleReport {
        case,
        samples,
        v_bound,
        ux_bound,
        pass,
    })
}

/// Worst constants seen at one `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningSample {
    pub gamma: f64,
    pub probes: usize,
    /// Largest relative-change ratio in the energy norm; at most one.
    pub worst_energy_ratio: f64,
    pub energy_ok: bool,
    pub worst_h01_ratio: f64,
    /// `M / gamma`
    pub h01_bound: f64,
    pub h01_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSuiteReport {
    pub n_cells: usize,
    pub samples: Vec<ConditioningSample>,
    pub pass: bool,
}

pub fn default_gamma_list() -> Vec<f64> {
    (-8..=8).map(|k| 10f64.powi(k)).collect()
}

pub fn conditioning_suite(
    gamma_list: &[f64],
    n_cells: usize,
    probes: usize,
    seed: u64,
) -> Result<ConditioningSuiteReport> {
    if probes == 0 {
        return Err(Error::InvalidArgument("need at least one probe".into()));
    }
    let grid = unit_grid(n_cells)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(gamma_list.len());
    for &gamma in gamma_list {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let problem = assemble(gamma, &grid)?;
        let mut s = ConditioningSample {
            gamma,
            probes,
            worst_energy_ratio: 0.0,
            energy_ok: true,
            worst_h01_ratio: 0.0,
            h01_bound: problem.boundedness_const / gamma,
            h01_ok: true,
        };
        for _ in 0..probes {
            let rhs: Vec<f64> = (0..problem.n_dof).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pert: Vec<f64> = (0..problem.n_dof).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = conditioning_probe(&problem, &rhs, &pert)?;
            s.worst_energy_ratio = s.worst_energy_ratio.max(r.energy_ratio);
            s.energy_ok &= r.energy_bound_holds;
            if let Some(h) = r.h01_ratio {
                s.worst_h01_ratio = s.worst_h01_ratio.max(h);
            }
            s.h01_ok &= r.h01_bound_holds;
        }
        samples.push(s);
    }
    let pass = samples.iter().all(|s| s.energy_ok && s.h01_ok);
    Ok(ConditioningSuiteReport {
        n_cells,
        samples,
        pass,
    })
}

pub const DEFAULT_SPLITTING_SAMPLES: [f64; 8] = [1e-8, 1e-4, 1e-2, 1e-1, 0.5, 0.9, 0.99, 0.999];

pub fn splitting_suite(eps_samples: &[f64]) -> Result<AdmissibilityReport> {
    check_splitting_admissible(&flux_split(0.5)?, eps_samples)
}

/// One line of the `verify` output.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub suite: &'static str,
    pub check: String,
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ConsistencyV,
    ConsistencyU,
    Multiscale,
    Conditioning,
    Splitting,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::ConsistencyV,
        Suite::ConsistencyU,
        Suite::Multiscale,
        Suite::Conditioning,
        Suite::Splitting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ConsistencyV => "consistency_v",
            Suite::ConsistencyU => "consistency_u",
            Suite::Multiscale => "multiscale",
            Suite::Conditioning => "conditioning",
            Suite::Splitting => "splitting",
        }
    }

    /// Run with the default plan and seed.
    pub fn run(self) -> Result<Vec<SuiteRow>> {
        let name = self.name();
        let mut rows = Vec::new();
        match self {
            Suite::ConsistencyV => {
                for r in consistency_v_suite(CaseKind::Smooth, &ConsistencyVPlan::default())? {
                    rows.extend(r.rows(name));
                }
            }
            Suite::ConsistencyU => {
                for r in consistency_u_suite(CaseKind::Smooth, &ConsistencyUPlan::default())? {
                    rows.extend(r.rows(name));
                }
            }
            Suite::Multiscale => {
                let eps: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
                for case in CaseKind::ALL {
                    let r = multiscale_suite(case, &eps)?;
                    let worst_v = r.samples.iter().map(|s| s.v_ratio).fold(0.0, f64::max);
                    let worst_u = r.samples.iter().map(|s| s.ux_ratio).fold(0.0, f64::max);
                    let ok_v = r.samples.iter().all(|s| s.v_ratio <= r.v_bound);
                    let ok_u = r.samples.iter().all(|s| s.ux_ratio <= r.ux_bound);
                    rows.push(SuiteRow {
                        suite: name,
                        check: format!("{case} sup|v|/eps^2"),
                        value: worst_v,
                        limit: format!("<= {}", format_float(r.v_bound)),
                        pass: ok_v,
                    });
                    rows.push(SuiteRow {
                        suite: name,
                        check: format!("{case} sup|u_x|/eps^2"),
                        value: worst_u,
                        limit: format!("<= {}", format_float(r.ux_bound)),
                        pass: ok_u,
                    });
                }
            }
            Suite::Conditioning => {
                let r = conditioning_suite(&default_gamma_list(), 64, 20, DEFAULT_SEED)?;
                for s in &r.samples {
                    rows.push(SuiteRow {
                        suite: name,
                        check: format!("energy ratio gamma={}", format_float(s.gamma)),
                        value: s.worst_energy_ratio,
                        limit: format!("<= 1 + {CONDITIONING_SLACK:e}"),
                        pass: s.energy_ok,
                    });
                    rows.push(SuiteRow {
                        suite: name,
                        check: format!("H1_0 ratio gamma={}", format_float(s.gamma)),
                        value: s.worst_h01_ratio,
                        limit: format!("<= M/gamma = {}", format_float(s.h01_bound)),
                        pass: s.h01_ok,
                    });
                }
            }
            Suite::Splitting => {
                let r = splitting_suite(&DEFAULT_SPLITTING_SAMPLES)?;
                let checks = [
                    ("eigenvalues real and distinct", r.hyperbolic),
                    ("|lambda_hat| = 1", r.nonstiff_order_one),
                    ("|f_hat - f| -> 0 as eps -> 1", r.nonstiff_approaches_total),
                    ("eps^2 |f_tilde - f| -> 0 as eps -> 0", r.stiff_approaches_total),
                ];
                for (check, pass) in checks {
                    rows.push(SuiteRow {
                        suite: name,
                        check: check.into(),
                        value: f64::from(u8::from(pass)),
                        limit: "1".into(),
                        pass,
                    });
                }
            }
        }
        Ok(rows)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

pub fn format_rows(rows: &[SuiteRow]) -> String {
    let width = rows.iter().map(|r| r.check.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(
            out,
            "{:4}  {:14} {:width$}  {:>12.5e}  {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.suite,
            r.check,
            r.value,
            r.limit,
        );
    }
    out
}

pub const SUITE_CSV_HEADER: &str = "suite,check,value,limit,pass";

pub fn rows_csv(rows: &[SuiteRow]) -> String {
    let mut out = format!("{SUITE_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},\"{}\",{},\"{}\",{}",
            r.suite,
            r.check.replace('"', "\"\""),
            format_float(r.value),
            r.limit.replace('"', "\"\""),
            r.pass
        );
    }
    out
}
