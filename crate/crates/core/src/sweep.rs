//! Random-graph consensus runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::consensus_metric;
use crate::control::{
    AngleControllerParams, ControllerState, EdgeControllerParams, VoltageControllerParams,
};
use crate::error::Result;
use crate::generator::{EquilibriumSpec, GeneratorParams, Grid, LineParams};
use crate::sim::{run, InitialConditions, Mode, Scenario, SimConfig};
use crate::topology::random_connected_graph;

/// Thresholds and integration settings of a consensus run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub max_nodes: usize,
    pub horizon: f64,
    pub dt: f64,
    pub consensus_tol: f64,
    pub voltage_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            max_nodes: 8,
            horizon: 200.0,
            dt: 5e-3,
            consensus_tol: 1e-3,
            voltage_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub seed: u64,
    pub nodes: usize,
    pub edges: usize,
    pub consensus_delta: f64,
    pub max_volt_dev: f64,
    pub passed: bool,
}

/// Random scenario on a random connected graph with `2..=max_nodes` nodes.
///
/// Machine data is drawn around the four-area values, equilibrium angles lie
/// in ±30° (so line angle differences stay within ±60°), `K₂ ∈ (K₁, 3K₁]`,
/// and `(P^G, E^ex)` are the values consistent with the equilibrium.
pub fn random_scenario(seed: u64, config: &SweepConfig) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=config.max_nodes.max(2));
    let network = random_connected_graph(n, rng.gen())?;
    let l = network.edge_count();

    let susceptance: Vec<f64> = (0..l).map(|_| rng.gen_range(10.0..35.0)).collect();
    let mut incident = vec![0.0; n];
    for (e, b) in network.edges().iter().zip(&susceptance) {
        incident[e.from] += b;
        incident[e.to] += b;
    }
    let generators = incident
        .iter()
        .map(|sum| GeneratorParams {
            inertia: rng.gen_range(3.5..5.5),
            damping: rng.gen_range(1.0..1.6),
            t_do_prime: rng.gen_range(5.0..8.0),
            x_d: rng.gen_range(1.5..2.0),
            x_d_prime: rng.gen_range(0.2..0.35),
            self_susceptance: -(sum + rng.gen_range(2.0..4.0)),
            mech_power: 0.0,
            excitation: 1.0,
        })
        .collect();
    let equilibrium = EquilibriumSpec {
        angles: (0..n).map(|_| rng.gen_range(-30.0f64..30.0).to_radians()).collect(),
        v_nom: 1.0,
        omega_nom: 2.0 * std::f64::consts::PI * 50.0,
    };
    let grid = Grid::new(network, LineParams { susceptance }, generators, equilibrium)?
        .with_consistent_inputs();

    let controllers = (0..l)
        .map(|_| {
            let k1 = rng.gen_range(0.3..0.5);
            EdgeControllerParams {
                angle: AngleControllerParams {
                    tau: rng.gen_range(0.5..1.5),
                    k1,
                    k2: k1 * rng.gen_range(1.2..=3.0),
                },
                voltage: VoltageControllerParams {
                    tau: rng.gen_range(0.5..1.5),
                    k1: rng.gen_range(0.3..0.5),
                },
            }
        })
        .collect();
    let initial = InitialConditions {
        angle_dev: (0..n).map(|_| rng.gen_range(-10.0f64..10.0).to_radians()).collect(),
        freq_dev: vec![0.0; n],
        volt_dev: (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect(),
        controllers: vec![ControllerState::default(); l],
    };
    let sim = SimConfig {
        dt: config.dt,
        horizon: config.horizon,
        mode: Mode::ClosedLoop,
        ..SimConfig::default()
    };
    Scenario::new(grid, controllers, initial, sim)
}

/// Simulates one random scenario and checks the final consensus.
pub fn run_consensus_case(seed: u64, config: &SweepConfig) -> Result<SweepOutcome> {
    let scenario = random_scenario(seed, config)?;
    let trace = run(&scenario)?;
    let lay = trace.layout();
    let x = trace.final_state();
    let consensus_delta = consensus_metric(lay.angle(x));
    let max_volt_dev = lay.volt(x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SweepOutcome {
        seed,
        nodes: lay.nodes,
        edges: lay.edges,
        consensus_delta,
        max_volt_dev,
        passed: consensus_delta <= config.consensus_tol && max_volt_dev <= config.voltage_tol,
    })
}
