//! Minimal dense-tensor and reverse-mode differentiation core.
//!
//! Just enough machinery for small feedforward networks and for chaining
//! input gradients across the reverse diffusion steps: batched matmul +
//! bias + elementwise activation forward, a per-call activation tape, and
//! an exact backward pass that returns both parameter gradients and the
//! gradient with respect to the input.
//!
//! Everything is `f64`; the sizes involved make precision cheap and keep
//! the finite-difference tests tight.

mod adam;
mod net;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use net::{Activation, FeedforwardNetwork, Gradients, Tape};
pub(crate) use net::NetSpec;
pub use tensor::Tensor;
