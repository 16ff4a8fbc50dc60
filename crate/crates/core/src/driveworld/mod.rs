//! Deterministic desk-scale CMDP driving simulator.
//!
//! Kinematic bicycle ego vehicle, constant-speed scripted traffic on lane
//! centerlines, ray-cast perception against vehicles, obstacles and road
//! edges, checkpoint navigation along a route, and the reward/cost
//! structure of the constrained decision problem.

pub mod geometry;
mod scenario;
mod track;
mod world;


pub use geometry::{swept_first_contact, OrientedRect, Vec2};
pub use scenario::{ConflictZone, Obstacle, Road, Scenario, ScriptedVehicle, TrafficDensity, PRESET_NAMES};
pub use track::{Polyline, Projection};
pub use world::{
    map_action, ActionCommand, Controls, CostFlags, DoneReason, Observation, StepOutcome,
    VehicleState, World, WorldConfig,
};
