//! Storage functions, Lyapunov candidates and dissipation checks.
//!
//! Every check here works on sampled trajectories: time derivatives of storage
//! functions and outputs are central differences, so each inequality is tested
//! up to a truncation allowance `tol = C·dt²`.

use serde::{Deserialize, Serialize};

use crate::control::{
    angle_controller, voltage_controller, AngleControllerParams, VoltageControllerParams,
};
use crate::error::{GridError, Result};
use crate::generator::GeneratorParams;
use crate::sim::{rk4_step_timed, LoopModel, Trace};

/// Default coefficient `C` of the finite-difference allowance `C·dt²`.
pub const DEFAULT_TOL_COEFF: f64 = 10.0;

/// Tri-state outcome of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The premise of the check never holds (e.g. no steady state exists).
    Vacuous,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Vacuous => "vacuous",
        })
    }
}

/// Storage values of every subsystem at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageValues {
    /// `M/2 (dδ̃/dt)²` per node.
    pub angle_plants: Vec<f64>,
    /// `x²/(2K₁)` per edge.
    pub angle_controllers: Vec<f64>,
    /// `γ/2 |Ṽ|²` per node.
    pub voltage_plants: Vec<f64>,
    /// `τ x²/(2K₁)` per edge.
    pub voltage_controllers: Vec<f64>,
}

pub fn storage_values(model: &LoopModel, x: &[f64]) -> StorageValues {
    let lay = model.layout();
    StorageValues {
        angle_plants: model
            .grid
            .generators
            .iter()
            .zip(lay.freq(x))
            .map(|(g, w)| 0.5 * g.inertia * w * w)
            .collect(),
        angle_controllers: model
            .controllers
            .iter()
            .zip(lay.x_delta(x))
            .map(|(c, xc)| xc * xc / (2.0 * c.angle.k1))
            .collect(),
        voltage_plants: model
            .coefficients
            .iter()
            .zip(lay.volt(x))
            .map(|(c, v)| 0.5 * c.gamma * v * v)
            .collect(),
        voltage_controllers: model
            .controllers
            .iter()
            .zip(lay.x_volt(x))
            .map(|(c, xc)| c.voltage.tau * xc * xc / (2.0 * c.voltage.k1))
            .collect(),
    }
}

/// Feedthrough `g(u)` of an edge controller, as it enters W⁺.
pub enum Feedthrough<'a> {
    /// `g(u) = k·u`; its integral is taken in closed form.
    Linear(f64),
    /// Any other scalar map, integrated with the midpoint rule.
    General(&'a dyn Fn(f64) -> f64),
}

impl Feedthrough<'_> {
    /// `∫₀^upper g(ξ) dξ`.
    pub fn integral(&self, upper: f64, resolution: usize) -> f64 {
        match self {
            Feedthrough::Linear(k) => 0.5 * k * upper * upper,
            Feedthrough::General(g) => {
                let n = resolution.max(1);
                let h = upper / n as f64;
                (0..n).map(|i| g((i as f64 + 0.5) * h)).sum::<f64>() * h
            }
        }
    }
}

/// Positive-feedback Lyapunov candidate from its ingredients:
/// `ΣS_p + ΣS_c - Ŷᵀ Π_cx - Σ ∫₀^ŷ g`.
pub fn w_plus_from_parts(
    plant_storage: f64,
    controller_storage: f64,
    networked_output: &[f64],
    state_outputs: &[f64],
    feedthrough: &[Feedthrough<'_>],
    resolution: usize,
) -> f64 {
    let cross: f64 = networked_output
        .iter()
        .zip(state_outputs)
        .map(|(y, h)| y * h)
        .sum();
    let integral: f64 = networked_output
        .iter()
        .zip(feedthrough)
        .map(|(y, g)| g.integral(*y, resolution))
        .sum();
    plant_storage + controller_storage - cross - integral
}

/// W⁺ and W⁻ with the ingredients of W⁺.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub w_minus: f64,
    pub w_plus: f64,
    pub plant_storage: f64,
    pub controller_storage: f64,
    /// `Ŷ_pᵀ Π_cx`
    pub cross_term: f64,
    /// `-Σ ∫₀^ŷ g(ξ) dξ`; equals `Σ K₂ŷ²/2` for the angle controllers.
    pub feedthrough_term: f64,
}

/// Negative-feedback candidate for the voltage loop, `ΣS^V_p + ΣS^V_c`.
pub fn lyapunov_negative(model: &LoopModel, x: &[f64]) -> f64 {
    let s = storage_values(model, x);
    s.voltage_plants.iter().sum::<f64>() + s.voltage_controllers.iter().sum::<f64>()
}

/// Positive-feedback candidate for the angle loop.
pub fn lyapunov_positive(model: &LoopModel, x: &[f64]) -> f64 {
    lyapunov_sample(model, x).w_plus
}

/// Completed-square form of W⁺:
/// `Σ M ω²/2 + Σ (x - K₁ŷ)²/(2K₁) + Σ (K₂ - K₁) ŷ²/2`.
pub fn lyapunov_positive_completed(model: &LoopModel, x: &[f64]) -> f64 {
    let lay = model.layout();
    let sig = model.signals(x);
    let kinetic: f64 = model
        .grid
        .generators
        .iter()
        .zip(lay.freq(x))
        .map(|(g, w)| 0.5 * g.inertia * w * w)
        .sum();
    let edges: f64 = model
        .controllers
        .iter()
        .zip(lay.x_delta(x).iter().zip(&sig.edge_in_delta))
        .map(|(c, (xc, y))| {
            let k1 = c.angle.k1;
            let shifted = xc - k1 * y;
            shifted * shifted / (2.0 * k1) + 0.5 * (c.angle.k2 - k1) * y * y
        })
        .sum();
    kinetic + edges
}

pub fn lyapunov_sample(model: &LoopModel, x: &[f64]) -> LyapunovSample {
    let lay = model.layout();
    let s = storage_values(model, x);
    let sig = model.signals(x);
    let plant_storage: f64 = s.angle_plants.iter().sum();
    let controller_storage: f64 = s.angle_controllers.iter().sum();
    let cross_term: f64 = sig
        .edge_in_delta
        .iter()
        .zip(lay.x_delta(x))
        .map(|(y, h)| y * h)
        .sum();
    let feedthrough: Vec<Feedthrough<'_>> = model
        .controllers
        .iter()
        .map(|c| Feedthrough::Linear(-c.angle.k2))
        .collect();
    let w_plus = w_plus_from_parts(
        plant_storage,
        controller_storage,
        &sig.edge_in_delta,
        lay.x_delta(x),
        &feedthrough,
        1,
    );
    LyapunovSample {
        w_minus: s.voltage_plants.iter().sum::<f64>() + s.voltage_controllers.iter().sum::<f64>(),
        w_plus,
        plant_storage,
        controller_storage,
        cross_term,
        feedthrough_term: w_plus - plant_storage - controller_storage + cross_term,
    }
}

pub fn lyapunov_series(trace: &Trace) -> Vec<LyapunovSample> {
    trace
        .states
        .iter()
        .map(|x| lyapunov_sample(&trace.model, x))
        .collect()
}

/// Central differences in the interior, one-sided at the two ends.
pub fn finite_difference(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut d = Vec::with_capacity(n);
    d.push((values[1] - values[0]) / dt);
    for k in 1..n - 1 {
        d.push((values[k + 1] - values[k - 1]) / (2.0 * dt));
    }
    d.push((values[n - 1] - values[n - 2]) / dt);
    d
}

/// Monotonicity and positivity of both Lyapunov candidates along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub max_rate_minus: f64,
    pub max_rate_plus: f64,
    pub min_w_minus: f64,
    pub min_w_plus: f64,
    /// Largest |W⁺ - completed-square form|.
    pub identity_error: f64,
    pub tolerance: f64,
    pub increase_count: usize,
    pub samples_checked: usize,
    pub verdict: Verdict,
}

/// Checks dW/dt ≤ C·dt² at interior samples and W ≥ 0 everywhere.
pub fn check_lyapunov(trace: &Trace, tol_coeff: f64) -> Result<LyapunovReport> {
    if trace.len() < 3 {
        return Err(GridError::TrajectoryTooShort { len: trace.len() });
    }
    let samples = lyapunov_series(trace);
    let w_minus: Vec<f64> = samples.iter().map(|s| s.w_minus).collect();
    let w_plus: Vec<f64> = samples.iter().map(|s| s.w_plus).collect();
    let rate_minus = finite_difference(&w_minus, trace.dt);
    let rate_plus = finite_difference(&w_plus, trace.dt);
    let tolerance = tol_coeff * trace.dt * trace.dt;
    let interior = 1..trace.len() - 1;

    let max_rate_minus = rate_minus[interior.clone()].iter().copied().fold(f64::MIN, f64::max);
    let max_rate_plus = rate_plus[interior.clone()].iter().copied().fold(f64::MIN, f64::max);
    let increase_count = interior
        .clone()
        .filter(|&k| rate_minus[k] > tolerance || rate_plus[k] > tolerance)
        .count();
    let min_w_minus = w_minus.iter().copied().fold(f64::MAX, f64::min);
    let min_w_plus = w_plus.iter().copied().fold(f64::MAX, f64::min);
    let identity_error = trace
        .states
        .iter()
        .zip(&w_plus)
        .map(|(x, w)| (w - lyapunov_positive_completed(&trace.model, x)).abs())
        .fold(0.0, f64::max);

    let ok = increase_count == 0 && min_w_minus >= 0.0 && min_w_plus >= 0.0 && identity_error <= 1e-12;
    Ok(LyapunovReport {
        max_rate_minus,
        max_rate_plus,
        min_w_minus,
        min_w_plus,
        identity_error,
        tolerance,
        increase_count,
        samples_checked: interior.len(),
        verdict: Verdict::from_bool(ok),
    })
}

/// Which dissipation inequality to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationKind {
    /// `dS/dt ≤ u y`
    Passive,
    /// `dS/dt ≤ u y - ε h²`
    Osp,
    /// `dS/dt ≤ u dh/dt`
    Ni,
    /// `dS/dt ≤ u dh/dt - ε (dh/dt)²`
    Osni,
}

impl std::fmt::Display for DissipationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DissipationKind::Passive => "passive",
            DissipationKind::Osp => "osp",
            DissipationKind::Ni => "ni",
            DissipationKind::Osni => "osni",
        })
    }
}

/// One node plant or edge controller of either loop (0-based index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Subsystem {
    AngleNode(usize),
    AngleEdge(usize),
    VoltageNode(usize),
    VoltageEdge(usize),
}

impl std::fmt::Display for Subsystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subsystem::AngleNode(i) => write!(f, "angle-node-{}", i + 1),
            Subsystem::AngleEdge(l) => write!(f, "angle-edge-{}", l + 1),
            Subsystem::VoltageNode(i) => write!(f, "voltage-node-{}", i + 1),
            Subsystem::VoltageEdge(l) => write!(f, "voltage-edge-{}", l + 1),
        }
    }
}

/// Stand-alone dynamics of a single subsystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsystemModel {
    /// state `(dδ̃/dt, δ̃)`, output `δ̃`
    AnglePlant(GeneratorParams),
    AngleController(AngleControllerParams),
    /// state and output `|Ṽ|`
    VoltagePlant(GeneratorParams),
    VoltageController(VoltageControllerParams),
}

impl SubsystemModel {
    pub fn for_subsystem(model: &LoopModel, which: Subsystem) -> Self {
        match which {
            Subsystem::AngleNode(i) => SubsystemModel::AnglePlant(model.grid.generators[i]),
            Subsystem::AngleEdge(l) => SubsystemModel::AngleController(model.controllers[l].angle),
            Subsystem::VoltageNode(i) => SubsystemModel::VoltagePlant(model.grid.generators[i]),
            Subsystem::VoltageEdge(l) => {
                SubsystemModel::VoltageController(model.controllers[l].voltage)
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SubsystemModel::AnglePlant(_) => 2,
            _ => 1,
        }
    }

    pub fn rate(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        match self {
            SubsystemModel::AnglePlant(g) => {
                dx[0] = (-g.damping * x[0] + u) / g.inertia;
                dx[1] = x[0];
            }
            SubsystemModel::VoltagePlant(g) => {
                let c = g.coefficients();
                dx[0] = (-c.alpha * x[0] + u) / c.gamma;
            }
            SubsystemModel::AngleController(p) => dx[0] = angle_controller(p, x[0], u).rate,
            SubsystemModel::VoltageController(p) => dx[0] = voltage_controller(p, x[0], u).rate,
        }
    }

    /// Full output `h(x) + g(u)`.
    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        match self {
            SubsystemModel::AngleController(p) => angle_controller(p, x[0], u).output,
            _ => self.state_output(x),
        }
    }

    /// State-dependent output part `h(x)`.
    pub fn state_output(&self, x: &[f64]) -> f64 {
        match self {
            SubsystemModel::AnglePlant(_) => x[1],
            _ => x[0],
        }
    }

    pub fn storage(&self, x: &[f64]) -> f64 {
        match self {
            SubsystemModel::AnglePlant(g) => 0.5 * g.inertia * x[0] * x[0],
            SubsystemModel::VoltagePlant(g) => 0.5 * g.coefficients().gamma * x[0] * x[0],
            SubsystemModel::AngleController(p) => x[0] * x[0] / (2.0 * p.k1),
            SubsystemModel::VoltageController(p) => p.tau * x[0] * x[0] / (2.0 * p.k1),
        }
    }

    /// The inequality and ε this subsystem is expected to satisfy, with ε at
    /// half the analytic bound.
    pub fn expected_property(&self) -> (DissipationKind, f64) {
        match self {
            SubsystemModel::AnglePlant(_) => (DissipationKind::Ni, 0.0),
            SubsystemModel::AngleController(p) => (DissipationKind::Osni, 0.5 * p.osni_bound()),
            SubsystemModel::VoltagePlant(g) => (DissipationKind::Osp, 0.5 * g.coefficients().alpha),
            SubsystemModel::VoltageController(p) => (DissipationKind::Osp, 0.5 * p.osp_bound()),
        }
    }
}

/// Sampled storage, input and outputs of one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemRecord {
    pub dt: f64,
    pub storage: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub state_output: Vec<f64>,
}

/// Extracts one subsystem's signals from a closed-loop or decoupled trace.
pub fn subsystem_record(trace: &Trace, which: Subsystem) -> SubsystemRecord {
    let lay = trace.layout();
    let sub = SubsystemModel::for_subsystem(&trace.model, which);
    let mut rec = SubsystemRecord {
        dt: trace.dt,
        storage: Vec::with_capacity(trace.len()),
        input: Vec::with_capacity(trace.len()),
        output: Vec::with_capacity(trace.len()),
        state_output: Vec::with_capacity(trace.len()),
    };
    for x in &trace.states {
        let sig = trace.model.signals(x);
        let (local, u) = match which {
            Subsystem::AngleNode(i) => (vec![lay.freq(x)[i], lay.angle(x)[i]], sig.node_in_delta[i]),
            Subsystem::AngleEdge(l) => (vec![lay.x_delta(x)[l]], sig.edge_in_delta[l]),
            Subsystem::VoltageNode(i) => (vec![lay.volt(x)[i]], sig.node_in_volt[i]),
            Subsystem::VoltageEdge(l) => (vec![lay.x_volt(x)[l]], sig.edge_in_volt[l]),
        };
        rec.storage.push(sub.storage(&local));
        rec.input.push(u);
        rec.output.push(sub.output(&local, u));
        rec.state_output.push(sub.state_output(&local));
    }
    rec
}

/// Integrates one subsystem from `x0` under the input signal `input(t)`.
pub fn drive_subsystem<F>(
    sub: &SubsystemModel,
    x0: &[f64],
    input: F,
    dt: f64,
    horizon: f64,
) -> Result<SubsystemRecord>
where
    F: Fn(f64) -> f64,
{
    if x0.len() != sub.state_dim() {
        return Err(GridError::DimensionMismatch {
            what: "subsystem state",
            expected: sub.state_dim(),
            got: x0.len(),
        });
    }
    let steps = (horizon / dt).round() as usize;
    let mut rec = SubsystemRecord {
        dt,
        storage: Vec::with_capacity(steps + 1),
        input: Vec::with_capacity(steps + 1),
        output: Vec::with_capacity(steps + 1),
        state_output: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let u = input(t);
        rec.storage.push(sub.storage(&x));
        rec.input.push(u);
        rec.output.push(sub.output(&x, u));
        rec.state_output.push(sub.state_output(&x));
        if k < steps {
            x = rk4_step_timed(
                |s, state, dx| {
                    sub.rate(state, input(s), dx);
                    Ok(())
                },
                t,
                &x,
                dt,
            )
            .map_err(|_| GridError::NonFinite { step: k + 1 })?;
        }
    }
    Ok(rec)
}

/// Outcome of a dissipation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    /// Largest `lhs - rhs` over interior samples, before the allowance is applied.
    pub max_violation: f64,
    pub violation_count: usize,
    pub epsilon_used: f64,
    pub tolerance: f64,
    pub samples_checked: usize,
}

impl DissipationReport {
    pub fn verdict(&self) -> Verdict {
        Verdict::from_bool(self.violation_count == 0)
    }
}

/// Tests the selected inequality at every interior sample.
///
/// For NI and OSNI the rate of the state-dependent output `h(x)` is used, so
/// feedthrough terms do not enter the check.
pub fn check_dissipation(
    record: &SubsystemRecord,
    kind: DissipationKind,
    epsilon: f64,
    tol_coeff: f64,
) -> Result<DissipationReport> {
    let n = record.storage.len();
    if n < 3 {
        return Err(GridError::TrajectoryTooShort { len: n });
    }
    let storage_rate = finite_difference(&record.storage, record.dt);
    let h_rate = finite_difference(&record.state_output, record.dt);
    let tolerance = tol_coeff * record.dt * record.dt;
    let mut max_violation = f64::MIN;
    let mut violation_count = 0;
    for k in 1..n - 1 {
        let u = record.input[k];
        let supply = match kind {
            DissipationKind::Passive => u * record.output[k],
            DissipationKind::Osp => {
                u * record.output[k] - epsilon * record.state_output[k] * record.state_output[k]
            }
            DissipationKind::Ni => u * h_rate[k],
            DissipationKind::Osni => u * h_rate[k] - epsilon * h_rate[k] * h_rate[k],
        };
        let excess = storage_rate[k] - supply;
        max_violation = max_violation.max(excess);
        if excess > tolerance {
            violation_count += 1;
        }
    }
    Ok(DissipationReport {
        max_violation,
        violation_count,
        epsilon_used: epsilon,
        tolerance,
        samples_checked: n - 2,
    })
}

/// Result of a named dissipation check on a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDissipation {
    pub name: String,
    pub subsystem: Subsystem,
    pub kind: DissipationKind,
    pub report: DissipationReport,
    pub verdict: Verdict,
}

/// Runs the expected property of every node plant and edge controller on a trace.
pub fn dissipation_suite(trace: &Trace, tol_coeff: f64) -> Result<Vec<NamedDissipation>> {
    let lay = trace.layout();
    let mut subsystems = Vec::new();
    subsystems.extend((0..lay.nodes).map(Subsystem::AngleNode));
    subsystems.extend((0..lay.edges).map(Subsystem::AngleEdge));
    subsystems.extend((0..lay.nodes).map(Subsystem::VoltageNode));
    subsystems.extend((0..lay.edges).map(Subsystem::VoltageEdge));
    subsystems
        .into_iter()
        .map(|which| {
            let (kind, eps) = SubsystemModel::for_subsystem(&trace.model, which).expected_property();
            let report = check_dissipation(&subsystem_record(trace, which), kind, eps, tol_coeff)?;
            Ok(NamedDissipation {
                name: which.to_string(),
                subsystem: which,
                kind,
                verdict: report.verdict(),
                report,
            })
        })
        .collect()
}

/// Sign requirement on `ū·ȳ` at steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignCondition {
    /// `ū·ȳ ≥ 0`
    NonNegative,
    /// `ū·ȳ ≤ -γ_c ū²`
    NegativeWithMargin(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub input: f64,
    /// ȳ, absent when no steady state was reached.
    pub output: Option<f64>,
    /// ū·ȳ
    pub product: Option<f64>,
    /// `-ū·ȳ/ū²`, the largest γ_c the system supports.
    pub margin: Option<f64>,
    pub verdict: Verdict,
}

/// Drives a subsystem with a constant input and checks the sign of `ū·ȳ`.
///
/// The subsystem is started at rest and integrated for `settle_time`. If the
/// state rate has not decayed below `rate_tol` by then, the system is reported
/// as having no steady state and the check passes vacuously.
pub fn steady_state_sign_check(
    sub: &SubsystemModel,
    input: f64,
    condition: SignCondition,
    settle_time: f64,
    dt: f64,
) -> Result<SteadyStateReport> {
    let rate_tol = 1e-9;
    if !(dt > 0.0 && settle_time >= dt) {
        return Err(GridError::InvalidParameter(format!(
            "settle time {settle_time} and dt {dt} do not form a valid grid"
        )));
    }
    let mut x = vec![0.0; sub.state_dim()];
    let steps = (settle_time / dt).round() as usize;
    for k in 0..steps {
        x = rk4_step_timed(
            |_, s, dx| {
                sub.rate(s, input, dx);
                Ok(())
            },
            0.0,
            &x,
            dt,
        )
        .map_err(|_| GridError::NonFinite { step: k + 1 })?;
    }
    let mut rate = vec![0.0; x.len()];
    sub.rate(&x, input, &mut rate);
    let settled = rate.iter().all(|r| r.abs() <= rate_tol);
    if !settled {
        return Ok(SteadyStateReport {
            input,
            output: None,
            product: None,
            margin: None,
            verdict: Verdict::Vacuous,
        });
    }
    let output = sub.output(&x, input);
    let product = input * output;
    let u2 = input * input;
    let margin = if u2 > 0.0 { Some(-product / u2) } else { None };
    let tol = 1e-9 * u2.max(1.0);
    let ok = match condition {
        SignCondition::NonNegative => product >= -tol,
        SignCondition::NegativeWithMargin(gamma) => product <= -gamma * u2 + tol,
    };
    Ok(SteadyStateReport {
        input,
        output: Some(output),
        product: Some(product),
        margin,
        verdict: Verdict::from_bool(ok),
    })
}

/// Largest pairwise distance between scalar node outputs.
pub fn consensus_metric(outputs: &[f64]) -> f64 {
    if outputs.len() < 2 {
        return 0.0;
    }
    let max = outputs.iter().copied().fold(f64::MIN, f64::max);
    let min = outputs.iter().copied().fold(f64::MAX, f64::min);
    max - min
}

/// Largest pairwise Euclidean distance between vector node outputs.
pub fn consensus_metric_vectors<T: AsRef<[f64]>>(outputs: &[T]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in outputs.iter().enumerate() {
        for b in &outputs[i + 1..] {
            let d: f64 = a
                .as_ref()
                .iter()
                .zip(b.as_ref())
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            worst = worst.max(d.sqrt());
        }
    }
    worst
}
