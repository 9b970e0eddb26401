use gridsync_core::control::ControllerState;
use gridsync_core::generator::{EquilibriumSpec, GeneratorParams, Grid, LineParams};
use gridsync_core::scenario::builtin_four_area;
use gridsync_core::sim::{
    compare_traces, run, run_closed_loop, run_decoupled, run_open_loop, InitialConditions, Mode,
    Scenario, SimConfig,
};
use gridsync_core::topology::Network;
use gridsync_core::GridError;

fn max_pair_gap(angles: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in angles.iter().enumerate() {
        for b in &angles[i + 1..] {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// One isolated machine whose voltage plant has α = γ = 1.
fn unit_voltage_node(v0: f64) -> Scenario {
    let g = GeneratorParams {
        inertia: 1.0,
        damping: 1.0,
        t_do_prime: 2.0,
        x_d: 2.5,
        x_d_prime: 0.5,
        self_susceptance: -0.5,
        mech_power: 0.0,
        excitation: 2.0,
    };
    let grid = Grid::new(
        Network::new(1, &[]).unwrap(),
        LineParams { susceptance: vec![] },
        vec![g],
        EquilibriumSpec { angles: vec![0.0], v_nom: 1.0, omega_nom: 1.0 },
    )
    .unwrap();
    let c = g.coefficients();
    assert!((c.alpha - 1.0).abs() < 1e-15 && (c.gamma - 1.0).abs() < 1e-15);
    Scenario::new(
        grid,
        vec![],
        InitialConditions { angle_dev: vec![0.0], freq_dev: vec![0.0], volt_dev: vec![v0], controllers: vec![] },
        SimConfig { dt: 1e-2, horizon: 3.0, mode: Mode::Decoupled, ..SimConfig::default() },
    )
    .unwrap()
}

#[test]
fn decoupled_voltage_decays_exponentially() {
    let s = unit_voltage_node(0.05);
    let trace = run_decoupled(&s).unwrap();
    let lay = trace.layout();
    for (t, x) in trace.times.iter().zip(&trace.states) {
        let exact = 0.05 * (-t).exp();
        assert!((lay.volt(x)[0] - exact).abs() <= 1e-10, "t = {t}");
    }
}

#[test]
fn equilibrium_is_invariant() {
    let s = builtin_four_area().at_equilibrium();
    let trace = run_closed_loop(&s).unwrap();
    let drift = trace
        .states
        .iter()
        .flat_map(|x| x.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(drift <= 1e-10, "drift {drift:e}");
}

#[test]
fn zero_deviation_decoupled_trace_is_zero() {
    let mut s = builtin_four_area().at_equilibrium();
    s.sim.horizon = 2.0;
    let trace = run_decoupled(&s).unwrap();
    assert!(trace.states.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn closed_loop_matches_decoupled() {
    let s = builtin_four_area();
    let a = run_closed_loop(&s).unwrap();
    let b = run_decoupled(&s).unwrap();
    assert_eq!(compare_traces(&a, &a).unwrap(), 0.0);
    let diff = compare_traces(&a, &b).unwrap();
    assert!(diff <= 1e-8, "{diff:e}");

    let mut raw = s.clone();
    raw.raw_equilibrium = true;
    let ra = run_closed_loop(&raw).unwrap();
    let rb = run_decoupled(&raw).unwrap();
    let raw_diff = compare_traces(&ra, &rb).unwrap();
    assert!(raw_diff > 1e-8 && raw_diff.is_finite());
}

#[test]
fn open_loop_contrast() {
    let s = builtin_four_area();
    let closed = run_closed_loop(&s).unwrap();
    let open = run_open_loop(&s).unwrap();
    let lay = closed.layout();
    let closed_gap = max_pair_gap(lay.angle(closed.final_state()));
    let open_gap = max_pair_gap(lay.angle(open.final_state()));
    assert!(open_gap > closed_gap, "open {open_gap:e} closed {closed_gap:e}");
    let open_v0 = lay.volt(&open.states[0]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let open_v = lay.volt(open.final_state()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(open_v < open_v0);
    // zero initial frequency deviation and no controller action: δ̃ never moves
    let shift = lay
        .angle(open.final_state())
        .iter()
        .zip(lay.angle(&open.states[0]))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(shift <= 1e-9, "{shift:e}");
}

#[test]
fn halving_dt_leaves_final_state_unchanged() {
    let s = builtin_four_area();
    let coarse = run(&s).unwrap();
    let mut fine_s = s.clone();
    fine_s.sim.dt = s.sim.dt / 2.0;
    let fine = run(&fine_s).unwrap();
    let diff = coarse
        .final_state()
        .iter()
        .zip(fine.final_state())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-9, "{diff:e}");
}

#[test]
fn mismatched_traces_rejected() {
    let mut s = builtin_four_area();
    s.sim.horizon = 0.1;
    let a = run(&s).unwrap();
    s.sim.horizon = 0.2;
    let b = run(&s).unwrap();
    assert!(matches!(compare_traces(&a, &b), Err(GridError::GridMismatch(_))));
}

#[test]
fn collapse_guard_aborts() {
    let mut s = builtin_four_area();
    s.sim.mode = Mode::OpenLoop;
    s.initial.volt_dev = vec![-0.95, 0.0, 0.0, 0.0];
    s.initial.controllers = vec![ControllerState::default(); 4];
    let err = run(&s).unwrap_err();
    assert!(matches!(err, GridError::VoltageCollapse { node: 1, .. }), "{err}");
    assert!(err.is_numerical());
}

#[test]
fn trace_is_deterministic() {
    let mut s = builtin_four_area();
    s.sim.horizon = 1.0;
    assert_eq!(run(&s).unwrap().states, run(&s).unwrap().states);
}
