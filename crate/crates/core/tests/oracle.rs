mod common;

use ap_psystem::model::{unit_grid, State};
use ap_psystem::recovery::GhostPolicy;
use ap_psystem::schemes::{ap_step, implicit_euler_step, imex_step, LfViscosity, NoForcing};
use common::{ap, implicit_euler, imex, oracle_sweep, relative_gap, OracleInput};

#[test]
fn steps_match_dense_references() {
    let sweep = oracle_sweep(7, 50, GhostPolicy::REFLECTION);
    assert_eq!(sweep.comparisons, 300);
    assert!(sweep.worst_gap <= 1e-12, "{sweep:?}");
}

// Linear extrapolation at small eps gives implicit systems with condition
// numbers near 1e8, so two correct solvers may differ by cond times
// roundoff. Compare against that scale instead of an absolute 1e-12; the
// allowance of a few hundred roundoff units covers the system size and the
// condition estimate being a lower bound.
#[test]
fn extrapolation_steps_match_up_to_conditioning() {
    let sweep = oracle_sweep(11, 50, GhostPolicy::EXTRAPOLATION);
    assert!(sweep.worst_gap_per_condition <= 1e-13, "{sweep:?}");
}

#[test]
fn default_steps_match_on_a_fixed_state() {
    let grid = unit_grid(4).unwrap();
    let v = [0.3, -0.1, 0.7, 0.2];
    let u = [1.0, 0.5, -0.25, 0.0];
    let (dt, eps) = (0.15, 0.2);
    let state = State::new(v.to_vec(), u.to_vec(), 0.0).unwrap();
    let inp = OracleInput {
        v: &v,
        u: &u,
        grid: &grid,
        dt,
        eps,
        ghosts: GhostPolicy::REFLECTION,
        viscosity: LfViscosity::WaveSpeed,
    };
    let zero = [0.0; 4];

    let s = ap_step(&state, &grid, dt, eps, &NoForcing).unwrap().state;
    let (rv, ru) = ap(&inp, &zero);
    assert!(relative_gap(&s.v, &rv) < 1e-13 && relative_gap(&s.u, &ru) < 1e-13);

    let s = implicit_euler_step(&state, &grid, dt, eps, &NoForcing).unwrap().state;
    let (rv, ru) = implicit_euler(&inp, &zero);
    assert!(relative_gap(&s.v, &rv) < 1e-13 && relative_gap(&s.u, &ru) < 1e-13);

    let s = imex_step(&state, &grid, dt, eps, &NoForcing).unwrap().state;
    let (rv, ru) = imex(&inp, &zero);
    assert!(relative_gap(&s.v, &rv) < 1e-13 && relative_gap(&s.u, &ru) < 1e-13);
}
