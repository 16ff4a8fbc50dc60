//! Conditional diffusion policy.
//!
//! The actor is the reverse process of a conditional diffusion model: a
//! noise-prediction network takes `(a_i, s, emb(i))` and the sampler walks
//! the chain `i = N..1` down to the executed action `a0`. Training combines
//! a behavior-cloning noise-prediction loss with value-guided losses whose
//! gradients flow through every reverse step.

mod embed;
mod losses;
mod policy;
mod schedule;


pub use embed::TimestepEmbedding;
pub use losses::{bc_loss, bc_loss_value, q_guidance_loss, GuidanceScale};
pub use policy::{load_policy, save_policy, ChainTrace, DiffusionPolicy};
pub use schedule::{forward_noise, VarianceSchedule};
