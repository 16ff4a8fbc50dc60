use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::{FeedforwardNetwork, Gradients};

/// Adam optimizer state over a network's flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Defaults: β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam update over the network's parameters.
///
/// Rejects non-finite gradients before touching any state, reporting the
/// offending flat parameter index.
pub fn adam_step(
    net: &mut FeedforwardNetwork,
    gradients: &Gradients,
    state: &mut AdamState,
) -> Result<()> {
    let grads = gradients.flatten();
    if grads.len() != net.param_count() || grads.len() != state.first_moment.len() {
        return Err(Error::Dimension(format!(
            "gradient length {} does not match {} parameters ({} moments)",
            grads.len(),
            net.param_count(),
            state.first_moment.len()
        )));
    }
    if let Some(idx) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient at parameter index {idx}")));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);

    let m = &mut state.first_moment;
    let v = &mut state.second_moment;
    net.apply_flat_update(|idx, p| {
        let g = grads[idx];
        m[idx] = b1 * m[idx] + (1.0 - b1) * g;
        v[idx] = b2 * v[idx] + (1.0 - b2) * g * g;
        let m_hat = m[idx] / bc1;
        let v_hat = v[idx] / bc2;
        p - lr * m_hat / (v_hat.sqrt() + eps)
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrad::Activation;

    fn scalar_net(p: f64) -> FeedforwardNetwork {
        // One weight and one bias: flat params [w, b].
        let mut net = FeedforwardNetwork::zeros(&[1, 1], Activation::Identity).unwrap();
        net.set_flat_params(&[p, 0.0]).unwrap();
        net
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut net = scalar_net(0.7);
        let mut state = AdamState::new(net.param_count(), 0.01);
        let zeros = Gradients::zeros_like(&net);
        for _ in 0..5 {
            adam_step(&mut net, &zeros, &mut state).unwrap();
        }
        assert_eq!(net.flat_params(), vec![0.7, 0.0]);
    }

    #[test]
    fn zero_gradient_decays_moments_toward_zero() {
        let mut net = scalar_net(0.7);
        let mut state = AdamState::new(net.param_count(), 0.01);
        state.first_moment = vec![1.0, 1.0];
        state.second_moment = vec![1.0, 1.0];
        let zeros = Gradients::zeros_like(&net);
        adam_step(&mut net, &zeros, &mut state).unwrap();
        assert!(state.first_moment.iter().all(|&m| m == 0.9));
        assert!(state.second_moment.iter().all(|&v| v == 0.999));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // p = 0, g = 1, lr = 1e-3: bias-corrected first step is
        // lr * 1 / (1 + eps), i.e. almost exactly lr.
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(2, 0.001);
        let grads = Gradients::from_flat(&net, &[1.0, 1.0]).unwrap();
        adam_step(&mut net, &grads, &mut state).unwrap();
        let p = net.flat_params()[0];
        assert!((p + 0.001).abs() < 1e-10, "p = {p}");
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn two_steps_match_scripted_trace() {
        // Independent straight-line Adam trace with constant g = 1.
        let (lr, b1, b2, eps) = (0.001, 0.9, 0.999, 1e-8);
        let mut p_ref = 0.25;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            let g: f64 = 1.0;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - f64::powi(b1, t));
            let v_hat = v / (1.0 - f64::powi(b2, t));
            p_ref -= lr * m_hat / (f64::sqrt(v_hat) + eps);
        }

        let mut net = scalar_net(0.25);
        let mut state = AdamState::new(2, lr);
        for _ in 0..2 {
            let grads = Gradients::from_flat(&net, &[1.0, 1.0]).unwrap();
            adam_step(&mut net, &grads, &mut state).unwrap();
        }
        let p = net.flat_params()[0];
        assert!((p - p_ref).abs() < 1e-12, "{p} vs {p_ref}");
    }

    #[test]
    fn non_finite_gradient_is_rejected_with_index() {
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(2, 0.001);
        let grads = Gradients::from_flat(&net, &[0.0, f64::NAN]).unwrap();
        let before = net.flat_params();
        let err = adam_step(&mut net, &grads, &mut state);
        match err {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("index 1"), "{msg}"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
        assert_eq!(net.flat_params(), before);
        assert_eq!(state.step_count, 0);
    }
}
