//! One-axis synchronous generator model on a lossless transmission network.
//!
//! Angle dynamics follow the swing equation driven by mechanical power, the
//! real power flowing out through the lines and the battery injection. Voltage
//! dynamics follow field-flux decay driven by exciter, line and battery
//! reactive power. Around an equilibrium `(δ̄, V_nom)` with idle batteries
//! both loops can be rewritten as linear node plants in deviation variables.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, GridError, Result};
use crate::topology::Network;

/// Per-machine parameters in per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// M
    pub inertia: f64,
    /// D
    pub damping: f64,
    /// T'_do (s)
    pub t_do_prime: f64,
    /// X_d
    pub x_d: f64,
    /// X'_d
    pub x_d_prime: f64,
    /// B_ii, negative for a realistic bus
    pub self_susceptance: f64,
    /// P^G
    pub mech_power: f64,
    /// E^ex
    pub excitation: f64,
}

/// Coefficients of the decoupled voltage plant: `γ ẋ = -α x + u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoupledCoefficients {
    pub alpha: f64,
    pub gamma: f64,
}

impl GeneratorParams {
    /// X_d - X'_d
    pub fn reactance_gap(&self) -> f64 {
        self.x_d - self.x_d_prime
    }

    /// Checks the physical invariants; `node` is 0-based and only used in messages.
    pub fn validate(&self, node: usize) -> Result<()> {
        let id = node + 1;
        let positive = [
            ("M", self.inertia),
            ("D", self.damping),
            ("T'_do", self.t_do_prime),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(GridError::InvalidParameter(format!(
                    "{name} must be positive on node {id}, got {value}"
                )));
            }
        }
        if !(self.reactance_gap() > 0.0) {
            return Err(GridError::InvalidParameter(format!(
                "X_d must exceed X'_d on node {id} ({} <= {})",
                self.x_d, self.x_d_prime
            )));
        }
        if !(self.self_susceptance < 0.0) {
            return Err(GridError::InvalidParameter(format!(
                "B_ii must be negative on node {id}, got {}",
                self.self_susceptance
            )));
        }
        if !self.mech_power.is_finite() || !self.excitation.is_finite() {
            return Err(GridError::InvalidParameter(format!(
                "P^G and E^ex must be finite on node {id}"
            )));
        }
        Ok(())
    }

    /// α = 1/(X_d - X'_d) - B_ii and γ = T'_do/(X_d - X'_d).
    pub fn coefficients(&self) -> DecoupledCoefficients {
        let gap = self.reactance_gap();
        DecoupledCoefficients {
            alpha: 1.0 / gap - self.self_susceptance,
            gamma: self.t_do_prime / gap,
        }
    }
}

/// Operating point shared by all buses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    /// δ̄_i in radians.
    pub angles: Vec<f64>,
    pub v_nom: f64,
    /// ω_nom in rad/s.
    pub omega_nom: f64,
}

impl EquilibriumSpec {
    pub fn nominal_hz(&self) -> f64 {
        self.omega_nom / (2.0 * std::f64::consts::PI)
    }
}

/// Line susceptances B_ij, one per edge in network order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub susceptance: Vec<f64>,
}

/// Deviation state of one machine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneratorState {
    /// δ̃ (rad)
    pub angle_dev: f64,
    /// dδ̃/dt (rad/s)
    pub freq_dev: f64,
    /// |Ṽ| (p.u.)
    pub volt_dev: f64,
}

/// Time derivatives returned by [`full_plant_derivatives`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantDerivatives {
    /// δ̈ (rad/s²)
    pub angle_accel: f64,
    /// d|V|/dt (p.u./s)
    pub volt_rate: f64,
}

/// Real power leaving each bus, `P^E_i = Σ_j B_ij |V_i||V_j| sin(δ_i - δ_j)`.
pub fn real_power_flow(
    network: &Network,
    lines: &LineParams,
    angles: &[f64],
    volts: &[f64],
) -> Result<Vec<f64>> {
    check_flow_inputs(network, lines, angles, volts)?;
    let mut p = vec![0.0; network.node_count()];
    for (e, b) in network.edges().iter().zip(&lines.susceptance) {
        let flow = b * volts[e.from] * volts[e.to] * (angles[e.from] - angles[e.to]).sin();
        p[e.from] += flow;
        p[e.to] -= flow;
    }
    Ok(p)
}

/// Reactive power leaving each bus, `Q^E_i = -Σ_j B_ij |V_i||V_j| cos(δ_i - δ_j)`
/// with the `j = i` term contributing `-B_ii |V_i|²`.
pub fn reactive_power_flow(
    network: &Network,
    lines: &LineParams,
    self_susceptance: &[f64],
    angles: &[f64],
    volts: &[f64],
) -> Result<Vec<f64>> {
    check_flow_inputs(network, lines, angles, volts)?;
    check_len("self susceptances", network.node_count(), self_susceptance.len())?;
    let mut q: Vec<f64> = self_susceptance
        .iter()
        .zip(volts)
        .map(|(b, v)| -b * v * v)
        .collect();
    for (e, b) in network.edges().iter().zip(&lines.susceptance) {
        let flow = b * volts[e.from] * volts[e.to] * (angles[e.from] - angles[e.to]).cos();
        q[e.from] -= flow;
        q[e.to] -= flow;
    }
    Ok(q)
}

fn check_flow_inputs(
    network: &Network,
    lines: &LineParams,
    angles: &[f64],
    volts: &[f64],
) -> Result<()> {
    check_len("line susceptances", network.edge_count(), lines.susceptance.len())?;
    check_len("angles", network.node_count(), angles.len())?;
    check_len("voltage magnitudes", network.node_count(), volts.len())
}

/// Exciter reactive power `Q^G = |V|(E^ex - |V|)/(X_d - X'_d)`.
pub fn reactive_generation(volt: f64, params: &GeneratorParams) -> Result<f64> {
    let gap = params.reactance_gap();
    if !(gap > 0.0) {
        return Err(GridError::InvalidParameter(format!(
            "X_d - X'_d must be positive, got {gap}"
        )));
    }
    Ok(volt * (params.excitation - volt) / gap)
}

/// A complete machine/network description around one equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub network: Network,
    pub lines: LineParams,
    pub generators: Vec<GeneratorParams>,
    pub equilibrium: EquilibriumSpec,
}

impl Grid {
    pub fn new(
        network: Network,
        lines: LineParams,
        generators: Vec<GeneratorParams>,
        equilibrium: EquilibriumSpec,
    ) -> Result<Self> {
        let n = network.node_count();
        check_len("line susceptances", network.edge_count(), lines.susceptance.len())?;
        check_len("generators", n, generators.len())?;
        check_len("equilibrium angles", n, equilibrium.angles.len())?;
        for (i, g) in generators.iter().enumerate() {
            g.validate(i)?;
        }
        for (l, b) in lines.susceptance.iter().enumerate() {
            if !(*b > 0.0 && b.is_finite()) {
                return Err(GridError::InvalidParameter(format!(
                    "susceptance of edge {} must be positive, got {b}",
                    l + 1
                )));
            }
        }
        if !(equilibrium.v_nom > 0.0) {
            return Err(GridError::InvalidParameter(format!(
                "V_nom must be positive, got {}",
                equilibrium.v_nom
            )));
        }
        for (l, e) in network.edges().iter().enumerate() {
            let gap = equilibrium.angles[e.from] - equilibrium.angles[e.to];
            if gap.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(GridError::InvalidParameter(format!(
                    "equilibrium angle difference on edge {} is {:.2} deg, outside (-90, 90)",
                    l + 1,
                    gap.to_degrees()
                )));
            }
        }
        Ok(Grid {
            network,
            lines,
            generators,
            equilibrium,
        })
    }

    pub fn node_count(&self) -> usize {
        self.network.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.network.edge_count()
    }

    pub fn self_susceptances(&self) -> Vec<f64> {
        self.generators.iter().map(|g| g.self_susceptance).collect()
    }

    /// Absolute angles δ̄ + δ̃.
    pub fn absolute_angles(&self, angle_dev: &[f64]) -> Vec<f64> {
        self.equilibrium
            .angles
            .iter()
            .zip(angle_dev)
            .map(|(a, d)| a + d)
            .collect()
    }

    /// Absolute magnitudes V_nom + |Ṽ|.
    pub fn absolute_volts(&self, volt_dev: &[f64]) -> Vec<f64> {
        volt_dev.iter().map(|d| self.equilibrium.v_nom + d).collect()
    }

    /// Copy of this grid with (P^G, E^ex) replaced by the exactly consistent values.
    pub fn with_consistent_inputs(&self) -> Grid {
        let inputs = consistent_equilibrium_inputs(self);
        let mut grid = self.clone();
        for (g, (p, e)) in grid.generators.iter_mut().zip(inputs) {
            g.mech_power = p;
            g.excitation = e;
        }
        grid
    }
}

/// Evaluates the full nonlinear angle and voltage dynamics.
///
/// `p_st`/`q_st` are battery real/reactive injections per node.
pub fn full_plant_derivatives(
    grid: &Grid,
    states: &[GeneratorState],
    p_st: &[f64],
    q_st: &[f64],
) -> Result<Vec<PlantDerivatives>> {
    let n = grid.node_count();
    check_len("generator states", n, states.len())?;
    check_len("battery real power", n, p_st.len())?;
    check_len("battery reactive power", n, q_st.len())?;
    let angle_dev: Vec<f64> = states.iter().map(|s| s.angle_dev).collect();
    let freq_dev: Vec<f64> = states.iter().map(|s| s.freq_dev).collect();
    let volt_dev: Vec<f64> = states.iter().map(|s| s.volt_dev).collect();
    let mut accel = vec![0.0; n];
    let mut rate = vec![0.0; n];
    plant_derivatives_into(
        grid, &angle_dev, &freq_dev, &volt_dev, p_st, q_st, &mut accel, &mut rate,
    )?;
    Ok(accel
        .into_iter()
        .zip(rate)
        .map(|(angle_accel, volt_rate)| PlantDerivatives {
            angle_accel,
            volt_rate,
        })
        .collect())
}

/// Slice form of [`full_plant_derivatives`] used by the integrator.
#[allow(clippy::too_many_arguments)]
pub(crate) fn plant_derivatives_into(
    grid: &Grid,
    angle_dev: &[f64],
    freq_dev: &[f64],
    volt_dev: &[f64],
    p_st: &[f64],
    q_st: &[f64],
    accel: &mut [f64],
    volt_rate: &mut [f64],
) -> Result<()> {
    let angles = grid.absolute_angles(angle_dev);
    let volts = grid.absolute_volts(volt_dev);
    if let Some((i, v)) = volts.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(GridError::VoltageCollapse { node: i + 1, vmag: *v });
    }
    let p_e = real_power_flow(&grid.network, &grid.lines, &angles, &volts)?;
    let q_e = reactive_power_flow(
        &grid.network,
        &grid.lines,
        &grid.self_susceptances(),
        &angles,
        &volts,
    )?;
    for (i, g) in grid.generators.iter().enumerate() {
        accel[i] = (g.mech_power - p_e[i] + p_st[i] - g.damping * freq_dev[i]) / g.inertia;
        let q_g = volts[i] * (g.excitation - volts[i]) / g.reactance_gap();
        volt_rate[i] = (q_g - q_e[i] + q_st[i]) * g.reactance_gap() / (g.t_do_prime * volts[i]);
    }
    Ok(())
}

/// Dense SISO state-space realisation `ẋ = Ax + Bu, y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn derivative(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>, u: f64) -> f64 {
        self.c.dot(x) + self.d * u
    }

    /// `C (jω I - A)⁻¹ B + D`; `None` when `jω` is an eigenvalue of `A`.
    pub fn frequency_response(&self, omega: f64) -> Option<Complex<f64>> {
        let n = self.order();
        let s = Complex::new(0.0, omega);
        let shifted = DMatrix::<Complex<f64>>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex::new(0.0, 0.0) };
            diag - Complex::new(self.a[(i, j)], 0.0)
        });
        let inv = shifted.try_inverse()?;
        let b = self.b.map(|v| Complex::new(v, 0.0));
        let c = self.c.map(|v| Complex::new(v, 0.0));
        let g = (c.transpose() * inv * b)[(0, 0)];
        Some(g + Complex::new(self.d, 0.0))
    }
}

/// Angle node plant with state `(dδ̃/dt, δ̃)` and output `δ̃`.
pub fn decoupled_angle_plant(params: &GeneratorParams) -> StateSpace {
    let m = params.inertia;
    StateSpace {
        a: DMatrix::from_row_slice(2, 2, &[-params.damping / m, 0.0, 1.0, 0.0]),
        b: DVector::from_column_slice(&[1.0 / m, 0.0]),
        c: DVector::from_column_slice(&[0.0, 1.0]),
        d: 0.0,
    }
}

/// Voltage node plant with state and output `|Ṽ|`.
pub fn decoupled_voltage_plant(params: &GeneratorParams) -> StateSpace {
    let DecoupledCoefficients { alpha, gamma } = params.coefficients();
    StateSpace {
        a: DMatrix::from_element(1, 1, -alpha / gamma),
        b: DVector::from_element(1, 1.0 / gamma),
        c: DVector::from_element(1, 1.0),
        d: 0.0,
    }
}

/// Per-node equilibrium mismatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumResidual {
    /// P^G - P^E at the equilibrium.
    pub real: f64,
    /// Q^G(V_nom) - Q^E at the equilibrium.
    pub reactive: f64,
}

/// Mismatch of the zero-derivative condition at `(δ̄, V_nom)` with idle batteries.
pub fn equilibrium_residual(grid: &Grid) -> Result<Vec<EquilibriumResidual>> {
    let n = grid.node_count();
    let volts = vec![grid.equilibrium.v_nom; n];
    let angles = &grid.equilibrium.angles;
    let p_e = real_power_flow(&grid.network, &grid.lines, angles, &volts)?;
    let q_e = reactive_power_flow(
        &grid.network,
        &grid.lines,
        &grid.self_susceptances(),
        angles,
        &volts,
    )?;
    grid.generators
        .iter()
        .enumerate()
        .map(|(i, g)| {
            Ok(EquilibriumResidual {
                real: g.mech_power - p_e[i],
                reactive: reactive_generation(grid.equilibrium.v_nom, g)? - q_e[i],
            })
        })
        .collect()
}

/// Largest absolute entry of an equilibrium residual report.
pub fn max_residual(residual: &[EquilibriumResidual]) -> f64 {
    residual
        .iter()
        .flat_map(|r| [r.real.abs(), r.reactive.abs()])
        .fold(0.0, f64::max)
}

/// Which equilibrium equations enter the susceptance fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitEquations {
    RealOnly,
    RealAndReactive,
}

/// Result of [`derive_line_susceptances`].
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptanceFit {
    pub lines: LineParams,
    /// max |A B - b| over the fitted equations.
    pub max_residual: f64,
    /// Rank of the design matrix.
    pub rank: usize,
}

/// Least-squares recovery of line susceptances from an equilibrium.
///
/// Unknowns are the B_ij; the equations are
/// `P^G_i = Σ_j B_ij V² sin δ̄_ij` and, optionally,
/// `Q^G_i(V) + B_ii V² = -Σ_j B_ij V² cos δ̄_ij`. The fit is rejected when its
/// residual exceeds `tolerance`.
pub fn derive_line_susceptances(
    network: &Network,
    generators: &[GeneratorParams],
    equilibrium: &EquilibriumSpec,
    equations: FitEquations,
    tolerance: f64,
) -> Result<SusceptanceFit> {
    let n = network.node_count();
    let l = network.edge_count();
    check_len("generators", n, generators.len())?;
    check_len("equilibrium angles", n, equilibrium.angles.len())?;
    if l == 0 {
        return Err(GridError::InvalidNetwork("network has no edges to fit".into()));
    }
    let rows = match equations {
        FitEquations::RealOnly => n,
        FitEquations::RealAndReactive => 2 * n,
    };
    let v2 = equilibrium.v_nom * equilibrium.v_nom;
    let mut design = DMatrix::zeros(rows, l);
    let mut rhs = DVector::zeros(rows);
    for (k, e) in network.edges().iter().enumerate() {
        let gap = equilibrium.angles[e.from] - equilibrium.angles[e.to];
        design[(e.from, k)] += v2 * gap.sin();
        design[(e.to, k)] -= v2 * gap.sin();
        if equations == FitEquations::RealAndReactive {
            design[(n + e.from, k)] -= v2 * gap.cos();
            design[(n + e.to, k)] -= v2 * gap.cos();
        }
    }
    for (i, g) in generators.iter().enumerate() {
        rhs[i] = g.mech_power;
        if equations == FitEquations::RealAndReactive {
            rhs[n + i] = reactive_generation(equilibrium.v_nom, g)? + g.self_susceptance * v2;
        }
    }
    let svd = design.clone().svd(true, true);
    let smax: f64 = svd.singular_values.max();
    let rank = svd.rank(1e-10 * smax.max(1.0));
    let solution = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| GridError::InvalidParameter(format!("least-squares solve failed: {e}")))?;
    let max_residual = (&design * &solution - &rhs).amax();
    if !(max_residual <= tolerance) {
        return Err(GridError::InconsistentSusceptances {
            residual: max_residual,
            tolerance,
        });
    }
    Ok(SusceptanceFit {
        lines: LineParams {
            susceptance: solution.iter().copied().collect(),
        },
        max_residual,
        rank,
    })
}

/// Mechanical power and excitation that make `(δ̄, V_nom)` an exact equilibrium.
///
/// Returns `(P^G_i, E^ex_i)` per node.
pub fn consistent_equilibrium_inputs(grid: &Grid) -> Vec<(f64, f64)> {
    let n = grid.node_count();
    let v = grid.equilibrium.v_nom;
    let volts = vec![v; n];
    let angles = &grid.equilibrium.angles;
    // dimensions were validated when the grid was built
    let p_e = real_power_flow(&grid.network, &grid.lines, angles, &volts)
        .expect("grid dimensions are consistent");
    let q_e = reactive_power_flow(
        &grid.network,
        &grid.lines,
        &grid.self_susceptances(),
        angles,
        &volts,
    )
    .expect("grid dimensions are consistent");
    grid.generators
        .iter()
        .enumerate()
        .map(|(i, g)| (p_e[i], v + g.reactance_gap() * q_e[i] / v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn area(t: f64, xd: f64, xdp: f64, bii: f64) -> GeneratorParams {
        GeneratorParams {
            inertia: 1.0,
            damping: 1.0,
            t_do_prime: t,
            x_d: xd,
            x_d_prime: xdp,
            self_susceptance: bii,
            mech_power: 0.0,
            excitation: 1.0,
        }
    }

    fn two_node() -> Network {
        Network::new(2, &[(1, 2)]).unwrap()
    }

    #[test]
    fn real_flow_two_nodes() {
        let lines = LineParams { susceptance: vec![1.0] };
        let p = real_power_flow(&two_node(), &lines, &[PI / 6.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[1], -0.5, epsilon = 1e-15);
        let flat = real_power_flow(&two_node(), &lines, &[0.3, 0.3], &[1.0, 1.1]).unwrap();
        assert!(flat.iter().all(|v| *v == 0.0));
        assert!(real_power_flow(&two_node(), &lines, &[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn reactive_flow_examples() {
        let single = Network::new(1, &[]).unwrap();
        let q = reactive_power_flow(
            &single,
            &LineParams { susceptance: vec![] },
            &[-49.61],
            &[0.0],
            &[1.0],
        )
        .unwrap();
        assert_relative_eq!(q[0], 49.61, epsilon = 1e-12);

        let q = reactive_power_flow(
            &two_node(),
            &LineParams { susceptance: vec![1.0] },
            &[0.0, 0.0],
            &[0.2, 0.2],
            &[1.0, 1.0],
        )
        .unwrap();
        assert_relative_eq!(q[0], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn exciter_reactive_power() {
        let mut g = area(5.54, 1.84, 0.25, -49.61);
        g.excitation = 1.0;
        assert_eq!(reactive_generation(1.0, &g).unwrap(), 0.0);
        g.excitation = 7.824;
        assert_relative_eq!(reactive_generation(1.0, &g).unwrap(), 4.2918, epsilon = 1e-4);
        let mut g4 = area(6.22, 1.94, 0.44, -40.18);
        g4.excitation = 6.864;
        assert_relative_eq!(reactive_generation(1.0, &g4).unwrap(), 3.9093, epsilon = 1e-4);
        g4.x_d_prime = 2.0;
        assert!(reactive_generation(1.0, &g4).is_err());
    }

    #[test]
    fn plant_matrices() {
        let mut g = area(1.0, 2.0, 1.0, 0.0);
        g.damping = 0.0;
        let angle = decoupled_angle_plant(&g);
        assert_eq!(angle.a.as_slice(), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]).as_slice());

        let mut a1 = area(5.54, 1.84, 0.25, -49.61);
        a1.inertia = 5.22;
        a1.damping = 1.6;
        assert_relative_eq!(decoupled_angle_plant(&a1).a[(0, 0)], -0.30651, epsilon = 1e-5);
        let v = decoupled_voltage_plant(&a1);
        // the tabulated -14.4186 comes from the rounded alpha and gamma
        assert_relative_eq!(v.a[(0, 0)], -(1.0 / 1.59 + 49.61) / (5.54 / 1.59), epsilon = 1e-12);
        assert_relative_eq!(v.a[(0, 0)], -14.4186, epsilon = 2e-4);
        assert_relative_eq!(v.b[0], 0.28700, epsilon = 1e-5);
        let c = a1.coefficients();
        assert_relative_eq!(c.gamma, 3.4843, epsilon = 1e-4);
        assert_relative_eq!(c.alpha, 50.2389, epsilon = 1e-4);

        let a2 = area(7.41, 1.62, 0.17, -61.66).coefficients();
        assert_relative_eq!(a2.gamma, 5.1103, epsilon = 1e-4);
        assert_relative_eq!(a2.alpha, 62.3497, epsilon = 1e-4);

        // B_ii = 0 would fail validation but the matrices are still defined
        let unit = decoupled_voltage_plant(&area(1.0, 1.0, 0.0, 0.0));
        assert_eq!((unit.a[(0, 0)], unit.b[0]), (-1.0, 1.0));
    }

    #[test]
    fn angle_plant_frequency_response() {
        // 1/(s(Ms + D)) at s = j with M = D = 1 has magnitude 1/sqrt(2)
        let g = area(1.0, 2.0, 1.0, -1.0);
        let h = decoupled_angle_plant(&g).frequency_response(1.0).unwrap();
        assert_relative_eq!(h.norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert!(decoupled_angle_plant(&g).frequency_response(0.0).is_none());
    }

    #[test]
    fn single_node_equilibrium() {
        let net = Network::new(1, &[]).unwrap();
        let mut g = area(2.0, 1.5, 0.5, -3.0);
        // Q^G = -B_ii V² with V = 1 and gap 1 -> E = 1 + 3
        g.excitation = 4.0;
        let grid = Grid::new(
            net,
            LineParams { susceptance: vec![] },
            vec![g],
            EquilibriumSpec { angles: vec![0.0], v_nom: 1.0, omega_nom: 100.0 * PI },
        )
        .unwrap();
        let r = equilibrium_residual(&grid).unwrap();
        assert!(r[0].real.abs() < 1e-15 && r[0].reactive.abs() < 1e-15);
    }

    #[test]
    fn real_only_fit_inverts_flow() {
        let mut gens = vec![area(1.0, 2.0, 1.0, -1.0); 2];
        gens[0].mech_power = 0.5;
        gens[1].mech_power = -0.5;
        let eq = EquilibriumSpec { angles: vec![PI / 6.0, 0.0], v_nom: 1.0, omega_nom: 1.0 };
        let fit =
            derive_line_susceptances(&two_node(), &gens, &eq, FitEquations::RealOnly, 1e-9).unwrap();
        assert_relative_eq!(fit.lines.susceptance[0], 1.0, epsilon = 1e-12);

        gens[1].mech_power = 0.5;
        assert!(matches!(
            derive_line_susceptances(&two_node(), &gens, &eq, FitEquations::RealOnly, 1e-6),
            Err(GridError::InconsistentSusceptances { .. })
        ));
    }

    #[test]
    fn voltage_guard_names_node() {
        let grid = Grid::new(
            two_node(),
            LineParams { susceptance: vec![1.0] },
            vec![area(1.0, 2.0, 1.0, -1.0); 2],
            EquilibriumSpec { angles: vec![0.0, 0.0], v_nom: 1.0, omega_nom: 1.0 },
        )
        .unwrap();
        let states = [
            GeneratorState::default(),
            GeneratorState { volt_dev: -1.0, ..Default::default() },
        ];
        let err = full_plant_derivatives(&grid, &states, &[0.0; 2], &[0.0; 2]).unwrap_err();
        assert!(matches!(err, GridError::VoltageCollapse { node: 2, .. }));
    }

    #[test]
    fn grid_validation() {
        let eq = EquilibriumSpec { angles: vec![0.0, 0.0], v_nom: 1.0, omega_nom: 1.0 };
        let good = vec![area(1.0, 2.0, 1.0, -1.0); 2];
        let lines = LineParams { susceptance: vec![1.0] };
        let mut bad = good.clone();
        bad[1].self_susceptance = 0.5;
        assert!(Grid::new(two_node(), lines.clone(), bad, eq.clone()).is_err());
        let mut bad = good.clone();
        bad[0].x_d_prime = 3.0;
        assert!(Grid::new(two_node(), lines.clone(), bad, eq.clone()).is_err());
        let wide = EquilibriumSpec { angles: vec![1.7, 0.0], ..eq.clone() };
        assert!(Grid::new(two_node(), lines.clone(), good.clone(), wide).is_err());
        assert!(Grid::new(two_node(), LineParams { susceptance: vec![-1.0] }, good, eq).is_err());
    }
}
