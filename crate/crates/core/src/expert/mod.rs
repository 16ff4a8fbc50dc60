//! Scripted expert controller and offline dataset tooling.
//!
//! The expert is a pure function of the observation: pure-pursuit steering
//! toward the next checkpoint, proportional speed control, and full braking
//! when anything enters the forward lidar cone below a distance threshold.
//! It stands in for a trained constrained-RL agent as the source of offline
//! demonstration data.

mod controller;
mod dataset;

pub use controller::{ExpertConfig, ScriptedExpert};
pub use dataset::{collect, episode_seed, CollectOptions, DatasetMeta, TrajectoryDataset, Transition};
