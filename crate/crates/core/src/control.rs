//! Edge controllers and the battery dispatch laws.
//!
//! Each transmission line carries two first-order controllers: an angle-loop
//! controller with negative feedthrough (`y = x - K₂u`) and a voltage-loop
//! controller without feedthrough (`y = x`). Their aggregated outputs are
//! realised through the batteries at each bus. The dispatch laws also cancel
//! the nonlinear line-flow terms, so the generator dynamics seen by the
//! controllers are the linear decoupled node plants.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, GridError, Result};
use crate::generator::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleControllerParams {
    pub tau: f64,
    pub k1: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageControllerParams {
    pub tau: f64,
    pub k1: f64,
}

/// Both controllers attached to one line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeControllerParams {
    pub angle: AngleControllerParams,
    pub voltage: VoltageControllerParams,
}

/// Internal controller states of one line.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    pub x_delta: f64,
    pub x_volt: f64,
}

/// State derivative and output of a controller for one input sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerEval {
    pub rate: f64,
    pub output: f64,
}

impl AngleControllerParams {
    /// Requires `τ > 0` and `K₂ > K₁ > 0`; `edge` is 0-based.
    pub fn validate(&self, edge: usize) -> Result<()> {
        let id = edge + 1;
        if !(self.tau > 0.0) {
            return Err(GridError::InvalidParameter(format!(
                "tau_delta must be positive on edge {id}, got {}",
                self.tau
            )));
        }
        if !(self.k1 > 0.0) {
            return Err(GridError::InvalidParameter(format!(
                "K1 must be positive on edge {id}, got {}",
                self.k1
            )));
        }
        if !(self.k2 > self.k1) {
            return Err(GridError::InvalidParameter(format!(
                "K2 must exceed K1 on edge {id} ({} <= {})",
                self.k2, self.k1
            )));
        }
        Ok(())
    }

    /// Constant state reached under a constant input.
    pub fn steady_state(&self, input: f64) -> f64 {
        self.k1 * input
    }

    /// Largest ε for which the OSNI inequality holds, `τ/K₁`.
    pub fn osni_bound(&self) -> f64 {
        self.tau / self.k1
    }
}

impl VoltageControllerParams {
    pub fn validate(&self, edge: usize) -> Result<()> {
        let id = edge + 1;
        if !(self.tau > 0.0) {
            return Err(GridError::InvalidParameter(format!(
                "tau_v must be positive on edge {id}, got {}",
                self.tau
            )));
        }
        if !(self.k1 > 0.0) {
            return Err(GridError::InvalidParameter(format!(
                "K1_v must be positive on edge {id}, got {}",
                self.k1
            )));
        }
        Ok(())
    }

    /// Largest ε for output strict passivity, `1/K₁`.
    pub fn osp_bound(&self) -> f64 {
        1.0 / self.k1
    }
}

impl EdgeControllerParams {
    pub fn validate(&self, edge: usize) -> Result<()> {
        self.angle.validate(edge)?;
        self.voltage.validate(edge)
    }
}

/// `ẋ = (-x + K₁u)/τ`, `y = x - K₂u`.
pub fn angle_controller(params: &AngleControllerParams, x: f64, u: f64) -> ControllerEval {
    ControllerEval {
        rate: (-x + params.k1 * u) / params.tau,
        output: x - params.k2 * u,
    }
}

/// `ẋ = (-x + K₁u)/τ`, `y = x`.
pub fn voltage_controller(params: &VoltageControllerParams, x: f64, u: f64) -> ControllerEval {
    ControllerEval {
        rate: (-x + params.k1 * u) / params.tau,
        output: x,
    }
}

/// Battery real power that turns the swing equation into
/// `M δ̈̃ = -D δ̇̃ + u^δ`.
///
/// `u_delta` is the already aggregated node input; `angles` and `volts` are
/// absolute values.
pub fn battery_real_dispatch(
    grid: &Grid,
    u_delta: &[f64],
    angles: &[f64],
    volts: &[f64],
) -> Result<Vec<f64>> {
    let n = grid.node_count();
    check_len("angle-loop node inputs", n, u_delta.len())?;
    check_len("angles", n, angles.len())?;
    check_len("voltage magnitudes", n, volts.len())?;
    let mut out = vec![0.0; n];
    real_dispatch_into(grid, u_delta, angles, volts, &mut out);
    Ok(out)
}

pub(crate) fn real_dispatch_into(
    grid: &Grid,
    u_delta: &[f64],
    angles: &[f64],
    volts: &[f64],
    out: &mut [f64],
) {
    let v2 = grid.equilibrium.v_nom * grid.equilibrium.v_nom;
    let eq = &grid.equilibrium.angles;
    out.copy_from_slice(u_delta);
    for (e, b) in grid.network.edges().iter().zip(&grid.lines.susceptance) {
        let (i, j) = (e.from, e.to);
        let term =
            b * (v2 * (eq[i] - eq[j]).sin() - volts[i] * volts[j] * (angles[i] - angles[j]).sin());
        // the j-side term is the same expression with the angle difference negated
        out[i] -= term;
        out[j] += term;
    }
}

/// Battery reactive power that turns the voltage dynamics into
/// `γ d|Ṽ|/dt = -α|Ṽ| + u^V`.
pub fn battery_reactive_dispatch(
    grid: &Grid,
    u_volt: &[f64],
    angles: &[f64],
    volts: &[f64],
) -> Result<Vec<f64>> {
    let n = grid.node_count();
    check_len("voltage-loop node inputs", n, u_volt.len())?;
    check_len("angles", n, angles.len())?;
    check_len("voltage magnitudes", n, volts.len())?;
    let mut out = vec![0.0; n];
    reactive_dispatch_into(grid, u_volt, angles, volts, &mut out)?;
    Ok(out)
}

pub(crate) fn reactive_dispatch_into(
    grid: &Grid,
    u_volt: &[f64],
    angles: &[f64],
    volts: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if let Some((i, v)) = volts.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(GridError::VoltageCollapse { node: i + 1, vmag: *v });
    }
    let v_nom = grid.equilibrium.v_nom;
    let eq = &grid.equilibrium.angles;
    out.copy_from_slice(u_volt);
    for (e, b) in grid.network.edges().iter().zip(&grid.lines.susceptance) {
        let (i, j) = (e.from, e.to);
        let eq_cos = v_nom * (eq[i] - eq[j]).cos();
        let cos = (angles[i] - angles[j]).cos();
        out[i] += b * (eq_cos - volts[j] * cos);
        out[j] += b * (eq_cos - volts[i] * cos);
    }
    for (q, v) in out.iter_mut().zip(volts) {
        *q *= v;
    }
    Ok(())
}
