use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::diffusion::{DiffusionPolicy, VarianceSchedule};
use crate::error::{Error, Result};
use crate::numgrad::{Gradients, Tensor};
use crate::traits::ActionValue;

/// Behavior-cloning loss: mean over the batch of the squared norm of the
/// noise prediction error,
/// `L_d = mean_b || eps_b - eps_net(sqrt(ab_i)*a_b + sqrt(1-ab_i)*eps_b, s_b, i_b) ||^2`
/// with `i_b ~ U{1..N}` and `eps_b ~ N(0, I)` drawn per sample.
pub fn bc_loss(
    policy: &DiffusionPolicy,
    states: &Tensor,
    actions: &Tensor,
    rng: &mut dyn RngCore,
) -> Result<(f64, Gradients)> {
    let batch = check_batch(policy, states, actions)?;
    let n = policy.schedule().len();
    let act_dim = policy.action_dim();

    let is: Vec<usize> = (0..batch).map(|_| rng.random_range(1..=n)).collect();
    let eps = Tensor::new_unchecked(
        vec![batch, act_dim],
        (0..batch * act_dim).map(|_| StandardNormal.sample(rng)).collect(),
    );
    bc_loss_given(policy, states, actions, &is, &eps)
}

/// Deterministic core of [`bc_loss`] with the per-sample draws supplied.
pub(crate) fn bc_loss_given(
    policy: &DiffusionPolicy,
    states: &Tensor,
    actions: &Tensor,
    is: &[usize],
    eps: &Tensor,
) -> Result<(f64, Gradients)> {
    let batch = check_batch(policy, states, actions)?;
    let act_dim = policy.action_dim();
    let schedule = policy.schedule();

    let noisy = noisy_actions(actions, is, eps, schedule, batch, act_dim);
    let input = policy.input_batch(&noisy, states, is);
    let (eps_hat, tape) = policy.eps_net().forward(&input)?;

    let mut loss = 0.0;
    let mut d_eps_hat = Tensor::zeros(vec![batch, act_dim]);
    for b in 0..batch {
        let e = eps.row(b);
        let p = eps_hat.row(b);
        let g = d_eps_hat.row_mut(b);
        for d in 0..act_dim {
            let diff = e[d] - p[d];
            loss += diff * diff;
            // d/d(eps_hat) of (e - eps_hat)^2 / B
            g[d] = -2.0 * diff / batch as f64;
        }
    }
    loss /= batch as f64;

    let (grads, _) = policy.eps_net().backward(&tape, &d_eps_hat)?;
    Ok((loss, grads))
}

/// Loss value only, for an arbitrary noise predictor. This is the oracle
/// seam used by tests that substitute a hand-crafted predictor.
pub fn bc_loss_value(
    predict: impl Fn(&[f64], &[f64], usize) -> Vec<f64>,
    states: &Tensor,
    actions: &Tensor,
    is: &[usize],
    eps: &Tensor,
    schedule: &VarianceSchedule,
) -> Result<f64> {
    let batch = states.batch_rows();
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let act_dim = actions.row_width();
    let noisy = noisy_actions(actions, is, eps, schedule, batch, act_dim);
    let mut loss = 0.0;
    for b in 0..batch {
        let pred = predict(noisy.row(b), states.row(b), is[b]);
        for d in 0..act_dim {
            let diff = eps.row(b)[d] - pred[d];
            loss += diff * diff;
        }
    }
    Ok(loss / batch as f64)
}

fn noisy_actions(
    actions: &Tensor,
    is: &[usize],
    eps: &Tensor,
    schedule: &VarianceSchedule,
    batch: usize,
    act_dim: usize,
) -> Tensor {
    let mut noisy = Tensor::zeros(vec![batch, act_dim]);
    for b in 0..batch {
        let ab = schedule.alpha_bar(is[b]);
        let (ks, kn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let a = actions.row(b);
        let e = eps.row(b);
        let out = noisy.row_mut(b);
        for d in 0..act_dim {
            out[d] = ks * a[d] + kn * e[d];
        }
    }
    noisy
}

fn check_batch(policy: &DiffusionPolicy, states: &Tensor, actions: &Tensor) -> Result<usize> {
    let batch = states.batch_rows();
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    if actions.batch_rows() != batch {
        return Err(Error::Dimension(format!(
            "states have {batch} rows but actions have {}",
            actions.batch_rows()
        )));
    }
    if states.row_width() != policy.state_dim() || actions.row_width() != policy.action_dim() {
        return Err(Error::Dimension(format!(
            "batch is [{}, {}]x[{}, {}], policy expects state {} / action {}",
            batch,
            states.row_width(),
            batch,
            actions.row_width(),
            policy.state_dim(),
            policy.action_dim()
        )));
    }
    Ok(batch)
}

/// How strongly the value gradient steers the chain.
#[derive(Debug, Clone, Copy)]
pub enum GuidanceScale {
    /// Use the coefficient as-is.
    Fixed(f64),
    /// `eta / mean |Q|` over the batch, decoupling guidance strength from
    /// critic magnitude drift.
    Normalized { eta: f64 },
}

/// Q-guided policy-improvement loss `L_q = -scale * mean_b Q(s_b, a0_b)`
/// with `a0` sampled through the full reverse chain and the gradient
/// reaching the noise net through every step.
pub fn q_guidance_loss(
    policy: &DiffusionPolicy,
    critic: &impl ActionValue,
    states: &Tensor,
    scale: GuidanceScale,
    rng: &mut dyn RngCore,
) -> Result<(f64, Gradients)> {
    if let GuidanceScale::Fixed(0.0) = scale {
        return Ok((0.0, Gradients::zeros_like(policy.eps_net())));
    }
    let batch = states.batch_rows();
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }

    let trace = policy.sample_action_traced(states, rng)?;
    let mut values = Vec::with_capacity(batch);
    let mut grads_a = Vec::with_capacity(batch);
    for b in 0..batch {
        let (v, g) = critic.value_and_action_grad(states.row(b), trace.actions().row(b));
        values.push(v);
        grads_a.push(g);
    }
    let mean_q: f64 = values.iter().sum::<f64>() / batch as f64;
    let alpha = match scale {
        GuidanceScale::Fixed(v) => v,
        GuidanceScale::Normalized { eta } => {
            let mean_abs: f64 = values.iter().map(|v| v.abs()).sum::<f64>() / batch as f64;
            eta / mean_abs.max(1e-8)
        }
    };

    let loss = -alpha * mean_q;
    let mut d_a0 = Tensor::zeros(vec![batch, policy.action_dim()]);
    for b in 0..batch {
        let row = d_a0.row_mut(b);
        for d in 0..policy.action_dim() {
            row[d] = -alpha * grads_a[b][d] / batch as f64;
        }
    }
    let grads = policy.chain_backward(&trace, &d_a0)?;
    Ok((loss, grads))
}
