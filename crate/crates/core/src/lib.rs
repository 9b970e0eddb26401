//! Simulation and verification of passivity / negative-imaginary edge control
//! on power transmission grids with battery-based feedback decoupling.
//!
//! Each bus carries a one-axis synchronous generator and a battery. Battery
//! dispatch cancels the nonlinear line flows so the angle and voltage
//! dynamics become two linear networked loops, each closed through
//! first-order controllers on the transmission lines.

pub mod analysis;
pub mod control;
pub mod error;
pub mod generator;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod topology;

pub use analysis::{
    check_dissipation, check_lyapunov, consensus_metric, dissipation_suite, DissipationKind,
    Subsystem, SubsystemModel, Verdict, DEFAULT_TOL_COEFF,
};
pub use control::{AngleControllerParams, EdgeControllerParams, VoltageControllerParams};
pub use error::{GridError, Result};
pub use generator::{
    derive_line_susceptances, EquilibriumSpec, FitEquations, GeneratorParams, Grid, LineParams,
};
pub use report::{verify, RunReport};
pub use scenario::{builtin_four_area, parse_scenario, ScenarioConfig};
pub use sim::{
    compare_traces, run, run_closed_loop, run_decoupled, run_open_loop, Mode, Scenario,
    SimConfig, Trace,
};
pub use topology::{build_incidence, random_connected_graph, Interconnection, Network};
