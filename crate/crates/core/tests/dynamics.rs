use approx::assert_relative_eq;
use gridsync_core::control::{battery_reactive_dispatch, battery_real_dispatch};
use gridsync_core::generator::{
    consistent_equilibrium_inputs, derive_line_susceptances, equilibrium_residual,
    full_plant_derivatives, max_residual, real_power_flow, reactive_generation, EquilibriumSpec,
    FitEquations, GeneratorParams, GeneratorState, Grid, LineParams,
};
use gridsync_core::scenario::builtin_four_area;
use gridsync_core::sweep::{random_scenario, SweepConfig};
use gridsync_core::topology::Network;
use proptest::prelude::*;

/// Dense symmetric susceptance matrix with `B_ii` on the diagonal.
fn dense_b(grid: &Grid) -> Vec<Vec<f64>> {
    let n = grid.node_count();
    let mut b = vec![vec![0.0; n]; n];
    for (e, s) in grid.network.edges().iter().zip(&grid.lines.susceptance) {
        b[e.from][e.to] = *s;
        b[e.to][e.from] = *s;
    }
    for (i, g) in grid.generators.iter().enumerate() {
        b[i][i] = g.self_susceptance;
    }
    b
}

/// Direct transcription of the swing and flux-decay equations over all node pairs.
fn hand_derivatives(grid: &Grid, dd: &[f64], w: &[f64], dv: &[f64]) -> Vec<(f64, f64)> {
    let n = grid.node_count();
    let b = dense_b(grid);
    let delta: Vec<f64> = (0..n).map(|i| grid.equilibrium.angles[i] + dd[i]).collect();
    let v: Vec<f64> = (0..n).map(|i| grid.equilibrium.v_nom + dv[i]).collect();
    (0..n)
        .map(|i| {
            let g = &grid.generators[i];
            let mut pe = 0.0;
            let mut qe = 0.0;
            for j in 0..n {
                if j != i {
                    pe += b[i][j] * v[i] * v[j] * (delta[i] - delta[j]).sin();
                }
                qe -= b[i][j] * v[i] * v[j] * (delta[i] - delta[j]).cos();
            }
            let gap = g.x_d - g.x_d_prime;
            let qg = v[i] * (g.excitation - v[i]) / gap;
            let accel = (g.mech_power - pe - g.damping * w[i]) / g.inertia;
            let vdot = (qg - qe) / (g.t_do_prime / gap * v[i]);
            (accel, vdot)
        })
        .collect()
}

/// Normal-equation least squares with Gauss-Jordan elimination.
fn normal_equations(a: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let cols = a[0].len();
    let mut m: Vec<Vec<f64>> = (0..cols)
        .map(|i| {
            let mut row: Vec<f64> = (0..cols).map(|j| a.iter().map(|r| r[i] * r[j]).sum()).collect();
            row.push(a.iter().zip(rhs).map(|(r, y)| r[i] * y).sum());
            row
        })
        .collect();
    for c in 0..cols {
        let p = (c..cols).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        for r in 0..cols {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=cols {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    (0..cols).map(|i| m[i][cols] / m[i][i]).collect()
}

fn four_area_states() -> Vec<GeneratorState> {
    let dd = [10.0f64, -8.0, -3.0, -10.0];
    let dv = [0.04, -0.04, -0.05, 0.05];
    (0..4)
        .map(|i| GeneratorState { angle_dev: dd[i].to_radians(), freq_dev: 0.0, volt_dev: dv[i] })
        .collect()
}

#[test]
fn four_area_derivatives_match_hand_evaluation() {
    let grid = builtin_four_area().grid;
    let states = four_area_states();
    let got = full_plant_derivatives(&grid, &states, &[0.0; 4], &[0.0; 4]).unwrap();
    let dd: Vec<f64> = states.iter().map(|s| s.angle_dev).collect();
    let dv: Vec<f64> = states.iter().map(|s| s.volt_dev).collect();
    let want = hand_derivatives(&grid, &dd, &[0.0; 4], &dv);
    for (g, (a, v)) in got.iter().zip(want) {
        assert_relative_eq!(g.angle_accel, a, epsilon = 1e-10);
        assert_relative_eq!(g.volt_rate, v, epsilon = 1e-10);
    }
}

#[test]
fn susceptance_fit_matches_normal_equations() {
    let s = builtin_four_area();
    let grid = &s.grid;
    let fit = derive_line_susceptances(
        &grid.network,
        &grid.generators,
        &grid.equilibrium,
        FitEquations::RealAndReactive,
        5e-3,
    )
    .unwrap();
    let n = 4;
    let mut a = vec![vec![0.0; 4]; 2 * n];
    let mut rhs = vec![0.0; 2 * n];
    for (k, e) in grid.network.edges().iter().enumerate() {
        let d = grid.equilibrium.angles[e.from] - grid.equilibrium.angles[e.to];
        a[e.from][k] += d.sin();
        a[e.to][k] -= d.sin();
        a[n + e.from][k] -= d.cos();
        a[n + e.to][k] -= d.cos();
    }
    for (i, g) in grid.generators.iter().enumerate() {
        rhs[i] = g.mech_power;
        rhs[n + i] = g.excitation - 1.0;
        rhs[n + i] /= g.x_d - g.x_d_prime;
        rhs[n + i] += g.self_susceptance;
    }
    let oracle = normal_equations(&a, &rhs);
    for (b, o) in fit.lines.susceptance.iter().zip(&oracle) {
        assert_relative_eq!(*b, *o, epsilon = 1e-9);
    }
    for (b, want) in fit.lines.susceptance.iter().zip([25.6, 33.1, 16.6, 21.0]) {
        assert!((b - want).abs() <= 0.05, "{b} vs {want}");
    }
    assert_eq!(fit.rank, 4);
    assert!(max_residual(&equilibrium_residual(grid).unwrap()) <= 5e-3);
}

#[test]
fn four_area_power_flow_and_consistent_inputs() {
    let grid = builtin_four_area().grid;
    let p = real_power_flow(&grid.network, &grid.lines, &grid.equilibrium.angles, &[1.0; 4]).unwrap();
    for (got, want) in p.iter().zip([8.076, 12.04, -14.38, -5.735]) {
        assert!((got - want).abs() <= 5e-3, "{got} vs {want}");
    }
    let inputs = consistent_equilibrium_inputs(&grid);
    for ((pg, e), g) in inputs.iter().zip(&grid.generators) {
        assert!((pg - g.mech_power).abs() <= 5e-3);
        assert!((e - g.excitation).abs() <= 5e-3);
    }
    assert!((inputs[0].1 - 7.824).abs() <= 5e-3);
    let consistent = grid.with_consistent_inputs();
    assert!(max_residual(&equilibrium_residual(&consistent).unwrap()) <= 1e-12);
    assert_eq!(consistent.with_consistent_inputs(), consistent);
}

#[test]
fn reactive_generation_examples() {
    let base = builtin_four_area().grid.generators;
    assert_relative_eq!(reactive_generation(1.0, &base[0]).unwrap(), 4.2918, epsilon = 1e-4);
    assert_relative_eq!(reactive_generation(1.0, &base[3]).unwrap(), 3.9093, epsilon = 1e-4);
    let mut g = base[0];
    g.excitation = 1.3;
    assert_eq!(reactive_generation(1.3, &g).unwrap(), 0.0);
}

#[test]
fn fit_scales_linearly() {
    let grid = builtin_four_area().grid.with_consistent_inputs();
    let fit = |gens: &[GeneratorParams]| {
        derive_line_susceptances(&grid.network, gens, &grid.equilibrium, FitEquations::RealOnly, 1e-6)
            .unwrap()
            .lines
            .susceptance
    };
    let base = fit(&grid.generators);
    let doubled: Vec<GeneratorParams> = grid
        .generators
        .iter()
        .map(|g| GeneratorParams { mech_power: 2.0 * g.mech_power, ..*g })
        .collect();
    for (a, b) in base.iter().zip(fit(&doubled)) {
        assert_relative_eq!(2.0 * a, b, epsilon = 1e-9);
    }
}

#[test]
fn residual_responds_to_angle_perturbation() {
    let grid = builtin_four_area().grid.with_consistent_inputs();
    let mut moved = grid.clone();
    moved.equilibrium.angles[0] += 1f64.to_radians();
    let r = equilibrium_residual(&moved).unwrap();
    // raising δ̄₁ increases P^E₁ (∂P^E₁/∂δ₁ = Σ B₁ⱼ cos δ̄₁ⱼ > 0), so P^G - P^E drops
    let h = 1f64.to_radians();
    let p0 = real_power_flow(&grid.network, &grid.lines, &grid.equilibrium.angles, &[1.0; 4]).unwrap();
    let p1 = real_power_flow(&moved.network, &moved.lines, &moved.equilibrium.angles, &[1.0; 4]).unwrap();
    assert!((p1[0] - p0[0]) / h > 0.0);
    assert!(r[0].real < 0.0);
    assert_relative_eq!(r[0].real, -(p1[0] - p0[0]), epsilon = 1e-12);
}

#[test]
fn consistent_equilibrium_is_a_rest_point() {
    let grid = builtin_four_area().grid.with_consistent_inputs();
    let rest = vec![GeneratorState::default(); 4];
    let d = full_plant_derivatives(&grid, &rest, &[0.0; 4], &[0.0; 4]).unwrap();
    assert!(d.iter().all(|v| v.angle_accel.abs() < 1e-12 && v.volt_rate.abs() < 1e-12));
}

#[test]
fn single_node_examples() {
    let g = GeneratorParams {
        inertia: 2.0,
        damping: 0.5,
        t_do_prime: 1.0,
        x_d: 2.0,
        x_d_prime: 1.0,
        self_susceptance: -3.0,
        mech_power: 0.0,
        excitation: 1.0 + 3.0,
    };
    let grid = Grid::new(
        Network::new(1, &[]).unwrap(),
        LineParams { susceptance: vec![] },
        vec![g],
        EquilibriumSpec { angles: vec![0.0], v_nom: 1.0, omega_nom: 1.0 },
    )
    .unwrap();
    let r = equilibrium_residual(&grid).unwrap();
    assert_eq!((r[0].real, r[0].reactive), (0.0, 0.0));
    let state = GeneratorState { angle_dev: 0.0, freq_dev: 1.0, volt_dev: 0.0 };
    let d = full_plant_derivatives(&grid, &[state], &[0.0], &[0.0]).unwrap();
    assert_relative_eq!(d[0].angle_accel, -0.25, epsilon = 1e-15);
}

fn random_grid_and_state() -> impl Strategy<Value = (Grid, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (any::<u64>(), prop::collection::vec(-1.0f64..1.0, 40)).prop_map(|(seed, r)| {
        let grid = random_scenario(seed, &SweepConfig::default()).unwrap().grid.with_consistent_inputs();
        let n = grid.node_count();
        let dd = r[..n].iter().map(|v| 0.5 * v).collect();
        let w = r[8..8 + n].iter().map(|v| 2.0 * v).collect();
        let dv = r[16..16 + n].iter().map(|v| 0.2 * v).collect();
        let ud = r[24..24 + n].to_vec();
        let uv = r[32..32 + n].to_vec();
        (grid, dd, w, dv, ud, uv)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn real_flows_sum_to_zero((grid, dd, _w, dv, _ud, _uv) in random_grid_and_state()) {
        let angles = grid.absolute_angles(&dd);
        let volts = grid.absolute_volts(&dv);
        let p = real_power_flow(&grid.network, &grid.lines, &angles, &volts).unwrap();
        let scale: f64 = grid.lines.susceptance.iter().sum();
        prop_assert!(p.iter().sum::<f64>().abs() <= 1e-12 * scale);
    }

    #[test]
    fn dispatch_yields_decoupled_plants((grid, dd, w, dv, ud, uv) in random_grid_and_state()) {
        let angles = grid.absolute_angles(&dd);
        let volts = grid.absolute_volts(&dv);
        let p = battery_real_dispatch(&grid, &ud, &angles, &volts).unwrap();
        let q = battery_reactive_dispatch(&grid, &uv, &angles, &volts).unwrap();
        let states: Vec<GeneratorState> = (0..grid.node_count())
            .map(|i| GeneratorState { angle_dev: dd[i], freq_dev: w[i], volt_dev: dv[i] })
            .collect();
        let d = full_plant_derivatives(&grid, &states, &p, &q).unwrap();
        for (i, g) in grid.generators.iter().enumerate() {
            let c = g.coefficients();
            let accel = (-g.damping * w[i] + ud[i]) / g.inertia;
            let vrate = (-c.alpha * dv[i] + uv[i]) / c.gamma;
            prop_assert!((d[i].angle_accel - accel).abs() <= 1e-12,
                "node {i}: {} vs {accel}", d[i].angle_accel);
            prop_assert!((d[i].volt_rate - vrate).abs() <= 1e-12,
                "node {i}: {} vs {vrate}", d[i].volt_rate);
        }
    }

    #[test]
    fn decoupled_coefficients_positive((grid, ..) in random_grid_and_state()) {
        for g in &grid.generators {
            let c = g.coefficients();
            prop_assert!(c.alpha > 0.0 && c.gamma > 0.0);
        }
    }
}
