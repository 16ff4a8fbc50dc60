//! Conditional-diffusion driving policy trained offline with a hybrid
//! behavior-cloning + Q-learning objective inside a constrained MDP.
//!
//! Safety is enforced through a PID-controlled Lagrange multiplier acting on
//! a learned cost critic. Everything needed to reproduce a full experiment is
//! in this crate: a 2D kinematic driving micro-simulator ([`driveworld`]), a
//! scripted expert and offline dataset tooling ([`expert`]), the diffusion
//! actor ([`diffusion`]), reward/cost critics ([`critics`]), the multiplier
//! controller ([`lagrangian`]), the training loop ([`trainer`]), rollout
//! metrics ([`eval`]) and a CLI ([`cli`]).

pub mod cli;
pub mod critics;
pub mod diffusion;
pub mod driveworld;
pub mod error;
pub mod eval;
pub mod expert;
pub mod lagrangian;
pub mod numgrad;
pub mod rng;
pub mod storage;
pub mod traits;
pub mod trainer;

pub use error::{Error, Result};
