//! Scenario configuration files.
//!
//! Configs are TOML with the sections `network`, `generators`, `equilibrium`,
//! `controllers`, `initial` and `sim`. Node ids are 1-based and angles are in
//! degrees; everything else is per unit or SI. When no edge carries a
//! susceptance, the susceptances are fitted to the equilibrium on load.

use std::f64::consts::PI;

use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::control::{
    AngleControllerParams, ControllerState, EdgeControllerParams, VoltageControllerParams,
};
use crate::error::{GridError, Result};
use crate::generator::{
    derive_line_susceptances, EquilibriumSpec, FitEquations, GeneratorParams, Grid, LineParams,
};
use crate::sim::{InitialConditions, Mode, Scenario, SimConfig};
use crate::topology::Network;

/// Residual allowed when susceptances are fitted on load (p.u.).
pub const DEFAULT_FIT_TOLERANCE: f64 = 5e-3;

/// Default bound on the equilibrium residual of the tabulated inputs (p.u.).
pub const DEFAULT_EQUILIBRIUM_TOLERANCE: f64 = 1e-2;

const FOUR_AREA: &str = include_str!("../scenarios/four_area.toml");

/// `[from, to]` or `[from, to, susceptance]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEntry {
    pub from: usize,
    pub to: usize,
    pub susceptance: Option<f64>,
}

impl Serialize for EdgeEntry {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let len = if self.susceptance.is_some() { 3 } else { 2 };
        let mut seq = serializer.serialize_seq(Some(len))?;
        seq.serialize_element(&(self.from as i64))?;
        seq.serialize_element(&(self.to as i64))?;
        if let Some(b) = self.susceptance {
            seq.serialize_element(&b)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for EdgeEntry {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        let id = |v: f64| -> std::result::Result<usize, D::Error> {
            if v.fract() == 0.0 && v >= 1.0 {
                Ok(v as usize)
            } else {
                Err(D::Error::custom(format!("node id {v} is not a positive integer")))
            }
        };
        match raw.as_slice() {
            [a, b] => Ok(EdgeEntry { from: id(*a)?, to: id(*b)?, susceptance: None }),
            [a, b, s] => Ok(EdgeEntry { from: id(*a)?, to: id(*b)?, susceptance: Some(*s) }),
            other => Err(D::Error::custom(format!(
                "edge must be [from, to] or [from, to, susceptance], got {} entries",
                other.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub m: f64,
    pub d: f64,
    pub t_do_prime: f64,
    pub x_d: f64,
    pub x_d_prime: f64,
    pub b_ii: f64,
    pub p_g: f64,
    pub e_ex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    pub delta_deg: Vec<f64>,
    pub v_nom: f64,
    pub f_nom_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub tau_delta: f64,
    pub k1_delta: f64,
    pub k2_delta: f64,
    pub tau_v: f64,
    pub k1_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub delta_deg: Vec<f64>,
    pub ddelta: Vec<f64>,
    pub vdev: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xcd: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xcv: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub raw_equilibrium: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub waive_equilibrium_check: bool,
}

fn default_dt() -> f64 {
    SimConfig::default().dt
}

fn default_horizon() -> f64 {
    SimConfig::default().horizon
}

fn default_mode() -> Mode {
    Mode::ClosedLoop
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: default_dt(),
            horizon: default_horizon(),
            mode: default_mode(),
            raw_equilibrium: false,
            max_steps: None,
            equilibrium_tol: None,
            waive_equilibrium_check: false,
        }
    }
}

/// External schema of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkSection,
    pub generators: Vec<GeneratorSection>,
    pub equilibrium: EquilibriumSection,
    pub controllers: Vec<ControllerSection>,
    pub initial: InitialSection,
    #[serde(default)]
    pub sim: SimSection,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GridError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GridError::Config(e.to_string()))
    }

    /// Validates the config and assembles a [`Scenario`].
    pub fn build(&self) -> Result<Scenario> {
        let n = self.generators.len();
        let l = self.network.edges.len();
        let pairs: Vec<(usize, usize)> = self.network.edges.iter().map(|e| (e.from, e.to)).collect();
        let network = Network::new(n, &pairs).map_err(|e| GridError::Config(format!("network: {e}")))?;

        expect_len("equilibrium.delta_deg", n, self.equilibrium.delta_deg.len())?;
        expect_len("controllers", l, self.controllers.len())?;
        expect_len("initial.delta_deg", n, self.initial.delta_deg.len())?;
        expect_len("initial.ddelta", n, self.initial.ddelta.len())?;
        expect_len("initial.vdev", n, self.initial.vdev.len())?;
        if let Some(x) = &self.initial.xcd {
            expect_len("initial.xcd", l, x.len())?;
        }
        if let Some(x) = &self.initial.xcv {
            expect_len("initial.xcv", l, x.len())?;
        }
        if !(self.equilibrium.f_nom_hz > 0.0) {
            return Err(GridError::Config(format!(
                "equilibrium.f_nom_hz must be positive, got {}",
                self.equilibrium.f_nom_hz
            )));
        }

        let generators: Vec<GeneratorParams> = self
            .generators
            .iter()
            .map(|g| GeneratorParams {
                inertia: g.m,
                damping: g.d,
                t_do_prime: g.t_do_prime,
                x_d: g.x_d,
                x_d_prime: g.x_d_prime,
                self_susceptance: g.b_ii,
                mech_power: g.p_g,
                excitation: g.e_ex,
            })
            .collect();
        for (i, g) in generators.iter().enumerate() {
            g.validate(i).map_err(|e| GridError::Config(format!("generators: {e}")))?;
        }
        let equilibrium = EquilibriumSpec {
            angles: self.equilibrium.delta_deg.iter().map(|d| d.to_radians()).collect(),
            v_nom: self.equilibrium.v_nom,
            omega_nom: 2.0 * PI * self.equilibrium.f_nom_hz,
        };

        let given: Vec<Option<f64>> = self.network.edges.iter().map(|e| e.susceptance).collect();
        let lines = if given.iter().all(Option::is_none) {
            let tol = self.network.fit_tolerance.unwrap_or(DEFAULT_FIT_TOLERANCE);
            let fit = derive_line_susceptances(
                &network,
                &generators,
                &equilibrium,
                FitEquations::RealAndReactive,
                tol,
            )
            .map_err(|e| GridError::Config(format!("network: {e}")))?;
            log::info!(
                "derived line susceptances {:?} (max residual {:.3e})",
                fit.lines.susceptance,
                fit.max_residual
            );
            fit.lines
        } else if given.iter().all(Option::is_some) {
            LineParams {
                susceptance: given.into_iter().flatten().collect(),
            }
        } else {
            return Err(GridError::Config(
                "network.edges: give a susceptance for every edge or for none".into(),
            ));
        };

        let grid = Grid::new(network, lines, generators, equilibrium)
            .map_err(|e| GridError::Config(e.to_string()))?;

        let controllers: Vec<EdgeControllerParams> = self
            .controllers
            .iter()
            .map(|c| EdgeControllerParams {
                angle: AngleControllerParams {
                    tau: c.tau_delta,
                    k1: c.k1_delta,
                    k2: c.k2_delta,
                },
                voltage: VoltageControllerParams {
                    tau: c.tau_v,
                    k1: c.k1_v,
                },
            })
            .collect();
        for (k, c) in controllers.iter().enumerate() {
            c.validate(k).map_err(|e| GridError::Config(format!("controllers: {e}")))?;
        }

        let controller_states = (0..l)
            .map(|k| ControllerState {
                x_delta: self.initial.xcd.as_ref().map_or(0.0, |x| x[k]),
                x_volt: self.initial.xcv.as_ref().map_or(0.0, |x| x[k]),
            })
            .collect();
        let initial = InitialConditions {
            angle_dev: self.initial.delta_deg.iter().map(|d| d.to_radians()).collect(),
            freq_dev: self.initial.ddelta.clone(),
            volt_dev: self.initial.vdev.clone(),
            controllers: controller_states,
        };

        let defaults = SimConfig::default();
        let sim = SimConfig {
            dt: self.sim.dt,
            horizon: self.sim.horizon,
            mode: self.sim.mode,
            max_steps: self.sim.max_steps.unwrap_or(defaults.max_steps),
        };
        let scenario = Scenario {
            grid,
            controllers,
            initial,
            sim,
            raw_equilibrium: self.sim.raw_equilibrium,
            equilibrium_tolerance: if self.sim.waive_equilibrium_check {
                None
            } else {
                Some(self.sim.equilibrium_tol.unwrap_or(DEFAULT_EQUILIBRIUM_TOLERANCE))
            },
        };
        scenario.validate().map_err(|e| match e {
            GridError::Config(_) => e,
            other => GridError::Config(other.to_string()),
        })?;
        Ok(scenario)
    }
}

fn expect_len(key: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GridError::Config(format!(
            "{key} must have {expected} entries, got {got}"
        )))
    }
}

/// Parses and validates a TOML scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    ScenarioConfig::from_toml(text)?.build()
}

/// Config text of the built-in four-area scenario.
pub fn four_area_config_text() -> &'static str {
    FOUR_AREA
}

pub fn builtin_four_area_config() -> ScenarioConfig {
    ScenarioConfig::from_toml(FOUR_AREA).expect("built-in scenario parses")
}

/// Four-area ring with the tabulated machine, equilibrium and controller data.
pub fn builtin_four_area() -> Scenario {
    builtin_four_area_config()
        .build()
        .expect("built-in scenario is valid")
}

impl Scenario {
    /// External form of this scenario, with explicit susceptances.
    pub fn to_config(&self) -> ScenarioConfig {
        let grid = &self.grid;
        ScenarioConfig {
            network: NetworkSection {
                edges: grid
                    .network
                    .edges_one_based()
                    .into_iter()
                    .zip(&grid.lines.susceptance)
                    .map(|((from, to), b)| EdgeEntry { from, to, susceptance: Some(*b) })
                    .collect(),
                fit_tolerance: None,
            },
            generators: grid
                .generators
                .iter()
                .map(|g| GeneratorSection {
                    m: g.inertia,
                    d: g.damping,
                    t_do_prime: g.t_do_prime,
                    x_d: g.x_d,
                    x_d_prime: g.x_d_prime,
                    b_ii: g.self_susceptance,
                    p_g: g.mech_power,
                    e_ex: g.excitation,
                })
                .collect(),
            equilibrium: EquilibriumSection {
                delta_deg: grid.equilibrium.angles.iter().map(|a| a.to_degrees()).collect(),
                v_nom: grid.equilibrium.v_nom,
                f_nom_hz: grid.equilibrium.nominal_hz(),
            },
            controllers: self
                .controllers
                .iter()
                .map(|c| ControllerSection {
                    tau_delta: c.angle.tau,
                    k1_delta: c.angle.k1,
                    k2_delta: c.angle.k2,
                    tau_v: c.voltage.tau,
                    k1_v: c.voltage.k1,
                })
                .collect(),
            initial: InitialSection {
                delta_deg: self.initial.angle_dev.iter().map(|a| a.to_degrees()).collect(),
                ddelta: self.initial.freq_dev.clone(),
                vdev: self.initial.volt_dev.clone(),
                xcd: Some(self.initial.controllers.iter().map(|c| c.x_delta).collect()),
                xcv: Some(self.initial.controllers.iter().map(|c| c.x_volt).collect()),
            },
            sim: SimSection {
                dt: self.sim.dt,
                horizon: self.sim.horizon,
                mode: self.sim.mode,
                raw_equilibrium: self.raw_equilibrium,
                max_steps: Some(self.sim.max_steps),
                equilibrium_tol: self.equilibrium_tolerance,
                waive_equilibrium_check: self.equilibrium_tolerance.is_none(),
            },
        }
    }
}
