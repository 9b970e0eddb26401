//! Fixed-step integration of the networked loops.
//!
//! The stacked state vector is ordered as: all `dδ̃/dt`, then all `δ̃`, then
//! all `|Ṽ|`, then the angle-controller state of each edge, then the
//! voltage-controller state of each edge.

use serde::{Deserialize, Serialize};

use crate::control::{
    angle_controller, real_dispatch_into, reactive_dispatch_into, voltage_controller,
    ControllerState, EdgeControllerParams,
};
use crate::error::{check_len, GridError, Result};
use crate::generator::{
    equilibrium_residual, max_residual, plant_derivatives_into, DecoupledCoefficients, Grid,
};
use crate::topology::{IncidenceMatrix, Interconnection};

/// Integration abort threshold on the physical voltage magnitude (p.u.).
pub const COLLAPSE_VOLTAGE: f64 = 0.1;

/// Which dynamics to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Nonlinear machines with battery dispatch driven by the edge controllers.
    ClosedLoop,
    /// The two linear networked loops.
    Decoupled,
    /// Nonlinear machines with the decoupling dispatch but zero controller
    /// action; controller states are frozen.
    OpenLoop,
}

impl std::str::FromStr for Mode {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_loop" | "closed-loop" => Ok(Mode::ClosedLoop),
            "decoupled" => Ok(Mode::Decoupled),
            "open_loop" | "open-loop" => Ok(Mode::OpenLoop),
            other => Err(GridError::Config(format!(
                "unknown mode '{other}', expected closed_loop, decoupled or open_loop"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub mode: Mode,
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            horizon: 40.0,
            mode: Mode::ClosedLoop,
            max_steps: 20_000_000,
        }
    }
}

impl SimConfig {
    /// Number of integration steps, validated against the step budget.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= self.dt) {
            return Err(GridError::InvalidParameter(format!(
                "horizon {} is shorter than dt {}",
                self.horizon, self.dt
            )));
        }
        let steps = (self.horizon / self.dt).round() as usize;
        if steps > self.max_steps {
            return Err(GridError::StepBudget {
                steps,
                limit: self.max_steps,
            });
        }
        Ok(steps)
    }
}

/// Initial deviations from the equilibrium, in radians and p.u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub angle_dev: Vec<f64>,
    pub freq_dev: Vec<f64>,
    pub volt_dev: Vec<f64>,
    pub controllers: Vec<ControllerState>,
}

impl InitialConditions {
    pub fn at_equilibrium(nodes: usize, edges: usize) -> Self {
        InitialConditions {
            angle_dev: vec![0.0; nodes],
            freq_dev: vec![0.0; nodes],
            volt_dev: vec![0.0; nodes],
            controllers: vec![ControllerState::default(); edges],
        }
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Grid with (P^G, E^ex) as given in the input tables.
    pub grid: Grid,
    pub controllers: Vec<EdgeControllerParams>,
    pub initial: InitialConditions,
    pub sim: SimConfig,
    /// Simulate with the tabulated (P^G, E^ex) instead of re-deriving them.
    pub raw_equilibrium: bool,
    /// Bound on the raw equilibrium residual; `None` waives the check.
    pub equilibrium_tolerance: Option<f64>,
}

impl Scenario {
    pub fn new(
        grid: Grid,
        controllers: Vec<EdgeControllerParams>,
        initial: InitialConditions,
        sim: SimConfig,
    ) -> Result<Self> {
        let scenario = Scenario {
            grid,
            controllers,
            initial,
            sim,
            raw_equilibrium: false,
            equilibrium_tolerance: Some(1e-2),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.node_count();
        let l = self.grid.edge_count();
        check_len("edge controllers", l, self.controllers.len())?;
        for (k, c) in self.controllers.iter().enumerate() {
            c.validate(k)?;
        }
        check_len("initial angle deviations", n, self.initial.angle_dev.len())?;
        check_len("initial frequency deviations", n, self.initial.freq_dev.len())?;
        check_len("initial voltage deviations", n, self.initial.volt_dev.len())?;
        check_len("initial controller states", l, self.initial.controllers.len())?;
        for (i, d) in self.initial.volt_dev.iter().enumerate() {
            if !(d + self.grid.equilibrium.v_nom > 0.0) {
                return Err(GridError::InvalidParameter(format!(
                    "initial voltage on node {} is not positive",
                    i + 1
                )));
            }
        }
        self.sim.steps()?;
        if let Some(bound) = self.equilibrium_tolerance {
            let residual = max_residual(&equilibrium_residual(&self.grid)?);
            if !(residual <= bound) {
                return Err(GridError::NotAnEquilibrium { residual, bound });
            }
        }
        Ok(())
    }

    /// The grid actually simulated: consistent inputs unless `raw_equilibrium`.
    pub fn model_grid(&self) -> Grid {
        if self.raw_equilibrium {
            self.grid.clone()
        } else {
            self.grid.with_consistent_inputs()
        }
    }

    pub fn loop_model(&self) -> LoopModel {
        LoopModel::new(self.model_grid(), self.controllers.clone())
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let ic = &self.initial;
        let mut x = Vec::with_capacity(3 * ic.angle_dev.len() + 2 * ic.controllers.len());
        x.extend_from_slice(&ic.freq_dev);
        x.extend_from_slice(&ic.angle_dev);
        x.extend_from_slice(&ic.volt_dev);
        x.extend(ic.controllers.iter().map(|c| c.x_delta));
        x.extend(ic.controllers.iter().map(|c| c.x_volt));
        x
    }

    /// Same scenario started at the equilibrium with zero controller states.
    pub fn at_equilibrium(&self) -> Scenario {
        let mut s = self.clone();
        s.initial =
            InitialConditions::at_equilibrium(self.grid.node_count(), self.grid.edge_count());
        s
    }
}

/// Offsets of the blocks inside the stacked state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub nodes: usize,
    pub edges: usize,
}

impl StateLayout {
    pub fn len(&self) -> usize {
        3 * self.nodes + 2 * self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn freq<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.nodes]
    }

    pub fn angle<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.nodes..2 * self.nodes]
    }

    pub fn volt<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[2 * self.nodes..3 * self.nodes]
    }

    pub fn x_delta<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[3 * self.nodes..3 * self.nodes + self.edges]
    }

    pub fn x_volt<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[3 * self.nodes + self.edges..]
    }
}

/// Interconnection signals of both loops at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSignals {
    /// Edge inputs `Qᵀ δ̃` (also the networked plant output Ŷ_p).
    pub edge_in_delta: Vec<f64>,
    /// Angle-controller outputs.
    pub edge_out_delta: Vec<f64>,
    /// Node inputs `Q y_c^δ`.
    pub node_in_delta: Vec<f64>,
    pub edge_in_volt: Vec<f64>,
    pub edge_out_volt: Vec<f64>,
    /// Node inputs `-Q y_c^V`.
    pub node_in_volt: Vec<f64>,
}

/// Closed-loop model: grid, controllers and precomputed network data.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopModel {
    pub grid: Grid,
    pub controllers: Vec<EdgeControllerParams>,
    pub incidence: IncidenceMatrix,
    pub coefficients: Vec<DecoupledCoefficients>,
}

impl LoopModel {
    pub fn new(grid: Grid, controllers: Vec<EdgeControllerParams>) -> Self {
        let incidence = grid.network.incidence();
        let coefficients = grid.generators.iter().map(|g| g.coefficients()).collect();
        LoopModel {
            grid,
            controllers,
            incidence,
            coefficients,
        }
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            nodes: self.grid.node_count(),
            edges: self.grid.edge_count(),
        }
    }

    /// Controller inputs and outputs for a stacked state.
    pub fn signals(&self, x: &[f64]) -> LoopSignals {
        let lay = self.layout();
        let (n, l) = (lay.nodes, lay.edges);
        let mut edge_in_delta = vec![0.0; l];
        let mut edge_in_volt = vec![0.0; l];
        self.incidence.edge_differences(lay.angle(x), &mut edge_in_delta);
        self.incidence.edge_differences(lay.volt(x), &mut edge_in_volt);
        let edge_out_delta: Vec<f64> = self
            .controllers
            .iter()
            .zip(lay.x_delta(x).iter().zip(&edge_in_delta))
            .map(|(c, (xc, u))| angle_controller(&c.angle, *xc, *u).output)
            .collect();
        let edge_out_volt: Vec<f64> = self
            .controllers
            .iter()
            .zip(lay.x_volt(x).iter().zip(&edge_in_volt))
            .map(|(c, (xc, u))| voltage_controller(&c.voltage, *xc, *u).output)
            .collect();
        let mut node_in_delta = vec![0.0; n];
        let mut node_in_volt = vec![0.0; n];
        self.incidence
            .aggregate(&edge_out_delta, Interconnection::Positive, &mut node_in_delta);
        self.incidence
            .aggregate(&edge_out_volt, Interconnection::Negative, &mut node_in_volt);
        LoopSignals {
            edge_in_delta,
            edge_out_delta,
            node_in_delta,
            edge_in_volt,
            edge_out_volt,
            node_in_volt,
        }
    }

    /// Loop signals as seen by the batteries in `mode`: open loop zeroes the
    /// node inputs.
    fn mode_signals(&self, mode: Mode, mut sig: LoopSignals) -> LoopSignals {
        if mode == Mode::OpenLoop {
            sig.node_in_delta.iter_mut().for_each(|v| *v = 0.0);
            sig.node_in_volt.iter_mut().for_each(|v| *v = 0.0);
        }
        sig
    }

    /// Battery (P^ST, Q^ST) commanded at state `x`.
    pub fn dispatch(&self, x: &[f64], signals: &LoopSignals) -> Result<(Vec<f64>, Vec<f64>)> {
        let lay = self.layout();
        let angles = self.grid.absolute_angles(lay.angle(x));
        let volts = self.grid.absolute_volts(lay.volt(x));
        let mut p = vec![0.0; lay.nodes];
        let mut q = vec![0.0; lay.nodes];
        real_dispatch_into(&self.grid, &signals.node_in_delta, &angles, &volts, &mut p);
        reactive_dispatch_into(&self.grid, &signals.node_in_volt, &angles, &volts, &mut q)?;
        Ok((p, q))
    }

    /// Right-hand side of the stacked dynamics in the given mode.
    pub fn derivative(&self, mode: Mode, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let lay = self.layout();
        let (n, l) = (lay.nodes, lay.edges);
        let sig = self.signals(x);
        let (freq_rate, rest) = dx.split_at_mut(n);
        let (angle_rate, rest) = rest.split_at_mut(n);
        let (volt_rate, rest) = rest.split_at_mut(n);
        let (xd_rate, xv_rate) = rest.split_at_mut(l);
        angle_rate.copy_from_slice(lay.freq(x));

        match mode {
            Mode::ClosedLoop | Mode::OpenLoop => {
                let (p_st, q_st) = self.dispatch(x, &self.mode_signals(mode, sig.clone()))?;
                plant_derivatives_into(
                    &self.grid,
                    lay.angle(x),
                    lay.freq(x),
                    lay.volt(x),
                    &p_st,
                    &q_st,
                    freq_rate,
                    volt_rate,
                )?;
            }
            Mode::Decoupled => {
                for i in 0..n {
                    let g = &self.grid.generators[i];
                    let c = self.coefficients[i];
                    freq_rate[i] =
                        (-g.damping * lay.freq(x)[i] + sig.node_in_delta[i]) / g.inertia;
                    volt_rate[i] = (-c.alpha * lay.volt(x)[i] + sig.node_in_volt[i]) / c.gamma;
                }
            }
        }

        if mode == Mode::OpenLoop {
            xd_rate.iter_mut().for_each(|v| *v = 0.0);
            xv_rate.iter_mut().for_each(|v| *v = 0.0);
        } else {
            for (k, c) in self.controllers.iter().enumerate() {
                xd_rate[k] =
                    angle_controller(&c.angle, lay.x_delta(x)[k], sig.edge_in_delta[k]).rate;
                xv_rate[k] =
                    voltage_controller(&c.voltage, lay.x_volt(x)[k], sig.edge_in_volt[k]).rate;
            }
        }
        Ok(())
    }
}

/// One classical Runge-Kutta step of an autonomous system.
pub fn rk4_step<F>(mut f: F, state: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    rk4_step_timed(|_, x, dx| f(x, dx), 0.0, state, dt)
}

/// Runge-Kutta step for `ẋ = f(t, x)` starting at time `t`.
pub fn rk4_step_timed<F>(mut f: F, t: f64, state: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = state.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut probe = vec![0.0; n];

    f(t, state, &mut k1)?;
    check_finite(&k1)?;
    for i in 0..n {
        probe[i] = state[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &probe, &mut k2)?;
    check_finite(&k2)?;
    for i in 0..n {
        probe[i] = state[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &probe, &mut k3)?;
    check_finite(&k3)?;
    for i in 0..n {
        probe[i] = state[i] + dt * k3[i];
    }
    f(t + dt, &probe, &mut k4)?;
    check_finite(&k4)?;

    Ok((0..n)
        .map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        // step index is filled in by the caller
        Err(GridError::NonFinite { step: 0 })
    }
}

/// Uniformly sampled simulation record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub model: LoopModel,
    pub mode: Mode,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Stacked state per sample.
    pub states: Vec<Vec<f64>>,
    /// Battery real power per sample.
    pub p_st: Vec<Vec<f64>>,
    /// Battery reactive power per sample.
    pub q_st: Vec<Vec<f64>>,
}

impl Trace {
    pub fn layout(&self) -> StateLayout {
        self.model.layout()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trace holds at least the initial sample")
    }

    pub fn signals(&self, k: usize) -> LoopSignals {
        self.model.signals(&self.states[k])
    }
}

/// Integrates `model` from `x0` with the given configuration.
pub fn simulate(model: LoopModel, x0: Vec<f64>, sim: &SimConfig) -> Result<Trace> {
    let steps = sim.steps()?;
    let lay = model.layout();
    check_len("initial state", lay.len(), x0.len())?;
    let mode = sim.mode;
    let dt = sim.dt;

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut p_st = Vec::with_capacity(steps + 1);
    let mut q_st = Vec::with_capacity(steps + 1);

    let mut record = |k: usize, x: Vec<f64>| -> Result<()> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(GridError::NonFinite { step: k });
        }
        let v_nom = model.grid.equilibrium.v_nom;
        if let Some((i, v)) = lay
            .volt(&x)
            .iter()
            .map(|d| d + v_nom)
            .enumerate()
            .find(|(_, v)| *v < COLLAPSE_VOLTAGE)
        {
            return Err(GridError::VoltageCollapse { node: i + 1, vmag: v });
        }
        let (p, q) = model.dispatch(&x, &model.mode_signals(mode, model.signals(&x)))?;
        times.push(k as f64 * dt);
        states.push(x);
        p_st.push(p);
        q_st.push(q);
        Ok(())
    };

    record(0, x0.clone())?;
    let mut x = x0;
    for k in 1..=steps {
        x = rk4_step(|s, d| model.derivative(mode, s, d), &x, dt).map_err(|e| match e {
            GridError::NonFinite { .. } => GridError::NonFinite { step: k },
            other => other,
        })?;
        record(k, x.clone())?;
    }

    Ok(Trace {
        model,
        mode,
        dt,
        times,
        states,
        p_st,
        q_st,
    })
}

/// Runs the scenario in the mode given by its configuration.
pub fn run(scenario: &Scenario) -> Result<Trace> {
    simulate(scenario.loop_model(), scenario.initial_state(), &scenario.sim)
}

/// Nonlinear closed loop with battery dispatch.
pub fn run_closed_loop(scenario: &Scenario) -> Result<Trace> {
    run_in_mode(scenario, Mode::ClosedLoop)
}

/// The two linear networked loops started from the same deviations.
pub fn run_decoupled(scenario: &Scenario) -> Result<Trace> {
    run_in_mode(scenario, Mode::Decoupled)
}

/// Decoupling dispatch with the edge controllers switched off.
pub fn run_open_loop(scenario: &Scenario) -> Result<Trace> {
    run_in_mode(scenario, Mode::OpenLoop)
}

fn run_in_mode(scenario: &Scenario, mode: Mode) -> Result<Trace> {
    let sim = SimConfig { mode, ..scenario.sim };
    simulate(scenario.loop_model(), scenario.initial_state(), &sim)
}

/// Largest absolute state difference between two traces on the same grid.
pub fn compare_traces(a: &Trace, b: &Trace) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GridError::GridMismatch(format!(
            "{} samples vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.layout() != b.layout() {
        return Err(GridError::GridMismatch("state layouts differ".into()));
    }
    let mut worst = 0.0f64;
    for (k, (ta, tb)) in a.times.iter().zip(&b.times).enumerate() {
        if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
            return Err(GridError::GridMismatch(format!(
                "sample {k} is at t = {ta} vs t = {tb}"
            )));
        }
        for (xa, xb) in a.states[k].iter().zip(&b.states[k]) {
            worst = worst.max((xa - xb).abs());
        }
    }
    Ok(worst)
}
