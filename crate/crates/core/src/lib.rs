//! Hybrid micro-macro model-predictive synchronization control for two
//! connected autonomous vehicles in mixed traffic.
//!
//! The crate is organized around the pipeline the closed-loop harness runs
//! each control step: scenario state is summarized into relation indicators
//! ([`relations`]), neighbor motion is predicted microscopically ([`micro`])
//! and upstream traffic macroscopically ([`macroflow`]), the per-step
//! objective weights are tuned ([`weights`]), a mixed-integer quadratic
//! program is assembled and solved ([`mpc`]), and the feasibility conditions
//! are monitored ([`guard`]).

pub mod constraints;
pub mod guard;
pub mod macroflow;
pub mod micro;
pub mod mpc;
pub mod relations;
pub mod scenario;
pub mod weights;

pub use scenario::{
    initial_phase, validate_scenario, ControlInput2D, Kinematics2D, LaneGeometry, LimitSet, Phase,
    ScenarioConfig, ValidatedScenario, VehicleClass, VehicleParams, VehicleSpec,
};
pub use weights::{Strategy, WeightConfig, WeightSettings};
