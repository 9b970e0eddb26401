//! Run reports and trace output.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_lyapunov, consensus_metric, dissipation_suite, lyapunov_series, steady_state_sign_check,
    LyapunovReport, NamedDissipation, SignCondition, SteadyStateReport, Subsystem, SubsystemModel,
    Verdict,
};
use crate::error::{GridError, Result};
use crate::generator::{equilibrium_residual, max_residual};
use crate::sim::{run, Scenario, Trace};

/// Steady-state sign check of one subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSteadyState {
    pub name: String,
    pub subsystem: Subsystem,
    pub condition: SignCondition,
    pub report: SteadyStateReport,
}

/// Final-sample deviations from the operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalErrors {
    pub time: f64,
    /// max over nodes of `|f_i - f_nom|` (Hz)
    pub frequency_hz: f64,
    /// max over node pairs of `|δ_ij - δ̄_ij|` (degrees)
    pub angle_deg: f64,
    /// max over nodes of `||V_i| - V_nom|` (p.u.)
    pub voltage: f64,
    pub consensus_delta: f64,
    pub consensus_v: f64,
}

/// Summary of one simulated scenario and its checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: crate::sim::Mode,
    pub dt: f64,
    pub samples: usize,
    pub final_errors: FinalErrors,
    pub lyapunov: LyapunovReport,
    pub dissipation: Vec<NamedDissipation>,
    pub steady_state: Vec<NamedSteadyState>,
    /// Equilibrium residual of the configured `(P^G, E^ex)`.
    pub residual_raw: f64,
    /// Equilibrium residual of the simulated grid.
    pub residual_model: f64,
    pub simulation_seconds: f64,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lyapunov.verdict.is_failure() {
            out.push("lyapunov".to_string());
        }
        out.extend(
            self.dissipation
                .iter()
                .filter(|d| d.verdict.is_failure())
                .map(|d| d.name.clone()),
        );
        out.extend(
            self.steady_state
                .iter()
                .filter(|s| s.report.verdict.is_failure())
                .map(|s| format!("steady-state {}", s.name)),
        );
        out
    }

    pub fn all_passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Plain-text listing with one line per check.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = &self.final_errors;
        s.push_str(&format!(
            "final t = {:.3} s: max |f - f_nom| = {:.3e} Hz, max |delta_ij - ref| = {:.3e} deg, max ||V| - V_nom| = {:.3e}\n",
            f.time, f.frequency_hz, f.angle_deg, f.voltage
        ));
        s.push_str(&format!(
            "consensus: delta {:.3e}, v {:.3e}\n",
            f.consensus_delta, f.consensus_v
        ));
        let l = &self.lyapunov;
        s.push_str(&format!(
            "lyapunov: max dW-/dt = {:.3e}, max dW+/dt = {:.3e}, min W- = {:.3e}, min W+ = {:.3e}, tol = {:.1e} -> {}\n",
            l.max_rate_minus, l.max_rate_plus, l.min_w_minus, l.min_w_plus, l.tolerance, l.verdict
        ));
        for d in &self.dissipation {
            s.push_str(&format!(
                "{:<16} {:<5} eps = {:.4e} max violation = {:+.3e} -> {}\n",
                d.name, d.kind.to_string(), d.report.epsilon_used, d.report.max_violation, d.verdict
            ));
        }
        for st in &self.steady_state {
            let product = st.report.product.map_or("-".to_string(), |p| format!("{p:+.4e}"));
            s.push_str(&format!(
                "steady-state {:<16} u*y = {} -> {}\n",
                st.name, product, st.report.verdict
            ));
        }
        s.push_str(&format!(
            "equilibrium residual: configured {:.3e}, simulated {:.3e}\n",
            self.residual_raw, self.residual_model
        ));
        s.push_str(&format!("wall clock {:.3} s\n", self.wall_clock_seconds));
        s
    }
}

/// Errors of the last sample of a trace.
pub fn final_errors(trace: &Trace) -> FinalErrors {
    let lay = trace.layout();
    let x = trace.final_state();
    let freq = lay.freq(x);
    let angle = lay.angle(x);
    let volt = lay.volt(x);
    let mut angle_err = 0.0f64;
    for i in 0..lay.nodes {
        for j in i + 1..lay.nodes {
            angle_err = angle_err.max((angle[i] - angle[j]).to_degrees().abs());
        }
    }
    FinalErrors {
        time: *trace.times.last().expect("non-empty trace"),
        frequency_hz: freq.iter().fold(0.0f64, |m, w| m.max((w / (2.0 * PI)).abs())),
        angle_deg: angle_err,
        voltage: volt.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        consensus_delta: consensus_metric(angle),
        consensus_v: consensus_metric(volt),
    }
}

/// Constant-input sign checks for every subsystem: `ū·ȳ ≤ -(K₂-K₁)ū²` for
/// angle controllers, `ū·ȳ ≥ 0` for the others.
pub fn steady_state_checks(trace: &Trace) -> Result<Vec<NamedSteadyState>> {
    let lay = trace.layout();
    let model = &trace.model;
    let mut which = Vec::new();
    which.extend((0..lay.nodes).map(Subsystem::AngleNode));
    which.extend((0..lay.edges).map(Subsystem::AngleEdge));
    which.extend((0..lay.nodes).map(Subsystem::VoltageNode));
    which.extend((0..lay.edges).map(Subsystem::VoltageEdge));
    which
        .into_iter()
        .map(|w| {
            let sub = SubsystemModel::for_subsystem(model, w);
            let (condition, time_constant) = match sub {
                SubsystemModel::AnglePlant(g) => (SignCondition::NonNegative, g.inertia / g.damping),
                SubsystemModel::AngleController(p) => {
                    (SignCondition::NegativeWithMargin(p.k2 - p.k1), p.tau)
                }
                SubsystemModel::VoltagePlant(g) => {
                    let c = g.coefficients();
                    (SignCondition::NonNegative, c.gamma / c.alpha)
                }
                SubsystemModel::VoltageController(p) => (SignCondition::NonNegative, p.tau),
            };
            let report =
                steady_state_sign_check(&sub, 1.0, condition, 40.0 * time_constant, time_constant / 200.0)?;
            Ok(NamedSteadyState {
                name: w.to_string(),
                subsystem: w,
                condition,
                report,
            })
        })
        .collect()
}

/// Simulates the scenario and runs every check on the resulting trace.
pub fn verify(scenario: &Scenario, tol_coeff: f64) -> Result<(Trace, RunReport)> {
    let start = Instant::now();
    let trace = run(scenario)?;
    let simulation_seconds = start.elapsed().as_secs_f64();
    let report = report_for(scenario, &trace, tol_coeff)?;
    Ok((
        trace,
        RunReport {
            simulation_seconds,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            ..report
        },
    ))
}

/// Runs every check on an existing trace; timings are left at zero.
pub fn report_for(scenario: &Scenario, trace: &Trace, tol_coeff: f64) -> Result<RunReport> {
    Ok(RunReport {
        mode: trace.mode,
        dt: trace.dt,
        samples: trace.len(),
        final_errors: final_errors(trace),
        lyapunov: check_lyapunov(trace, tol_coeff)?,
        dissipation: dissipation_suite(trace, tol_coeff)?,
        steady_state: steady_state_checks(trace)?,
        residual_raw: max_residual(&equilibrium_residual(&scenario.grid)?),
        residual_model: max_residual(&equilibrium_residual(&trace.model.grid)?),
        simulation_seconds: 0.0,
        wall_clock_seconds: 0.0,
    })
}

/// Plot-ready columns of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Tabulates every `decimate`-th sample (the last sample is always kept).
pub fn trace_table(trace: &Trace, decimate: usize) -> Result<TraceTable> {
    if decimate == 0 {
        return Err(GridError::InvalidParameter("decimation factor must be at least 1".into()));
    }
    let lay = trace.layout();
    let (n, l) = (lay.nodes, lay.edges);
    let mut columns = vec!["t".to_string()];
    let mut push = |prefix: &str, count: usize| {
        columns.extend((1..=count).map(|k| format!("{prefix}_{k}")));
    };
    push("delta", n);
    push("omega_hz", n);
    push("vmag", n);
    push("xcd", l);
    push("xcv", l);
    push("pst", n);
    push("qst", n);
    columns.extend(
        ["w_minus", "w_plus", "consensus_delta", "consensus_v"]
            .iter()
            .map(|s| s.to_string()),
    );

    let grid = &trace.model.grid;
    let omega_nom = grid.equilibrium.omega_nom;
    let lyap = lyapunov_series(trace);
    let last = trace.len() - 1;
    let rows = (0..trace.len())
        .filter(|k| k % decimate == 0 || *k == last)
        .map(|k| {
            let x = &trace.states[k];
            let mut row = Vec::with_capacity(columns.len());
            row.push(trace.times[k]);
            row.extend(grid.absolute_angles(lay.angle(x)));
            row.extend(lay.freq(x).iter().map(|w| (omega_nom + w) / (2.0 * PI)));
            row.extend(grid.absolute_volts(lay.volt(x)));
            row.extend_from_slice(lay.x_delta(x));
            row.extend_from_slice(lay.x_volt(x));
            row.extend_from_slice(&trace.p_st[k]);
            row.extend_from_slice(&trace.q_st[k]);
            row.push(lyap[k].w_minus);
            row.push(lyap[k].w_plus);
            row.push(consensus_metric(lay.angle(x)));
            row.push(consensus_metric(lay.volt(x)));
            row
        })
        .collect();
    Ok(TraceTable { columns, rows })
}

/// CSV with 12 significant digits per value.
pub fn write_csv<W: Write>(table: &TraceTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", table.columns.join(","))?;
    let mut line = String::new();
    for row in &table.rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.11e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(value: &T, out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(out, value).map_err(std::io::Error::other)
}

/// Overall verdict of a list of verdicts: any failure fails, otherwise pass.
pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    Verdict::from_bool(verdicts.into_iter().all(|v| !v.is_failure()))
}
