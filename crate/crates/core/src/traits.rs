//! Small interfaces shared across the actor, critics and evaluation code.

use rand::RngCore;

/// Anything that can pick an action for a state.
///
/// Implemented by the diffusion policy, by the scripted expert and by test
/// fixtures (e.g. the fixed policies used for the micro-MDP critic checks).
pub trait ActionSampler {
    fn action_dim(&self) -> usize;
    fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;

    /// Expected observation width, when the sampler has one; lets callers
    /// reject mismatched scenario/policy pairs up front.
    fn state_dim(&self) -> Option<usize> {
        None
    }

    /// Sample one action per row. Implementations may batch internally;
    /// the draws need not match repeated `sample` calls, only be
    /// deterministic for a given generator state.
    fn sample_batch(&self, states: &crate::numgrad::Tensor, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        (0..states.batch_rows())
            .map(|b| self.sample(states.row(b), rng))
            .collect()
    }
}

/// A state-action value function.
///
/// `value_and_action_grad` additionally returns dV/da, which is what the
/// guided policy losses push back through the reverse diffusion chain.
pub trait ActionValue {
    fn value(&self, state: &[f64], action: &[f64]) -> f64;
    fn value_and_action_grad(&self, state: &[f64], action: &[f64]) -> (f64, Vec<f64>);
}
