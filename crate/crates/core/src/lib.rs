//! Communication-free swarm community formation.
//!
//! Robots with a forward-facing range sensor and no communication steer to
//! the centroid of whatever neighbours they can see, stop once that
//! centroid is close and they see enough neighbours, and otherwise wander.
//! This crate holds the sensor model, the per-robot controller, a
//! lock-step simulator and the post-run analysis (community detection,
//! synergy time, one-way ANOVA across runs).
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases. File formats use `f64`.

pub mod analysis;
pub mod controller;
pub mod engine;
pub mod geometry;
pub mod navigation;
pub mod output;
pub mod params;
pub mod scalar;
pub mod scenario;
pub mod sensing;

pub use controller::{AgentState, StateTag};
pub use engine::{
    check_params, run, run_with, Diagnostic, EngineError, RunOptions, Severity, Spawn,
};
pub use scalar::Real;

pub type Pose64 = geometry::Pose<f64>;
pub type Pose32 = geometry::Pose<f32>;
pub type Point64 = geometry::Point<f64>;
pub type Point32 = geometry::Point<f32>;
pub type Rect64 = geometry::Rect<f64>;
pub type Rect32 = geometry::Rect<f32>;
pub type Params64 = params::Params<f64>;
pub type Params32 = params::Params<f32>;
pub type NeighborSet64 = sensing::NeighborSet<f64>;
pub type NeighborSet32 = sensing::NeighborSet<f32>;
pub type VelocityCommand64 = navigation::VelocityCommand<f64>;
pub type VelocityCommand32 = navigation::VelocityCommand<f32>;
pub type World64 = engine::World<f64>;
pub type World32 = engine::World<f32>;
pub type RunRecord64 = engine::RunRecord<f64>;
pub type RunRecord32 = engine::RunRecord<f32>;
pub type Community64 = analysis::Community<f64>;
pub type AnovaResult64 = analysis::AnovaResult<f64>;
