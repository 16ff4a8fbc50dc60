//! Reward and safety-cost critics with target copies.
//!
//! Both critics are `(state, action) -> scalar` networks trained on TD
//! targets bootstrapped through slowly tracking target networks. The cost
//! critic is the same machinery with the per-step safety cost in place of
//! the reward.
//!
//! The entropy term of the soft TD target is intentionally omitted: the
//! log-likelihood of a diffusion policy's action is intractable and nothing
//! downstream consumes it. `TdConfig::entropy_coeff` reserves the name for
//! future approximations and must currently be zero.

use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::{Activation, FeedforwardNetwork, Gradients, Tensor};
use crate::storage;
use crate::traits::{ActionSampler, ActionValue};

/// One transition view for critic training.
#[derive(Debug, Clone, Copy)]
pub struct CriticSample<'a> {
    pub state: &'a [f64],
    pub action: &'a [f64],
    /// Reward or cost, depending on which critic is being trained.
    pub signal: f64,
    pub next_state: &'a [f64],
    pub done: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TdConfig {
    pub gamma: f64,
    /// Reserved; see module docs. Must be 0.0.
    pub entropy_coeff: f64,
}

impl TdConfig {
    pub fn new(gamma: f64) -> Self {
        TdConfig {
            gamma,
            entropy_coeff: 0.0,
        }
    }
}

/// Reward critic, cost critic and their frozen target copies.
#[derive(Debug, Clone)]
pub struct CriticPair {
    pub q_reward: FeedforwardNetwork,
    pub q_cost: FeedforwardNetwork,
    pub target_q_reward: FeedforwardNetwork,
    pub target_q_cost: FeedforwardNetwork,
    /// Polyak coefficient weighting the TARGET in each soft update
    /// (`target <- rho*target + (1-rho)*live`), so values near 1 track slowly.
    pub rho: f64,
    state_dim: usize,
    action_dim: usize,
}

impl CriticPair {
    pub fn new<R: rand::Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rho: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0 < rho && rho < 1.0) {
            return Err(Error::Config(format!("rho must be in (0, 1), got {rho}")));
        }
        let mut dims = vec![state_dim + action_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let q_reward = FeedforwardNetwork::new(&dims, Activation::Relu, rng)?;
        let q_cost = FeedforwardNetwork::new(&dims, Activation::Relu, rng)?;
        let target_q_reward = q_reward.clone();
        let target_q_cost = q_cost.clone();
        Ok(CriticPair {
            q_reward,
            q_cost,
            target_q_reward,
            target_q_cost,
            rho,
            state_dim,
            action_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Value-function view of the live reward critic.
    pub fn reward_value(&self) -> NetValue<'_> {
        NetValue { net: &self.q_reward }
    }

    /// Value-function view of the live cost critic.
    pub fn cost_value(&self) -> NetValue<'_> {
        NetValue { net: &self.q_cost }
    }

    /// Polyak-update both target networks from their live counterparts.
    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&self.q_reward, &mut self.target_q_reward, self.rho)?;
        soft_update(&self.q_cost, &mut self.target_q_cost, self.rho)
    }
}

/// `ActionValue` adapter over a `(state ++ action) -> scalar` network.
pub struct NetValue<'a> {
    net: &'a FeedforwardNetwork,
}

impl NetValue<'_> {
    fn input(&self, state: &[f64], action: &[f64]) -> Tensor {
        let mut row = Vec::with_capacity(state.len() + action.len());
        row.extend_from_slice(state);
        row.extend_from_slice(action);
        Tensor::new_unchecked(vec![row.len()], row)
    }
}

impl ActionValue for NetValue<'_> {
    fn value(&self, state: &[f64], action: &[f64]) -> f64 {
        self.net
            .infer(&self.input(state, action))
            .expect("critic input dims checked at construction")
            .data()[0]
    }

    fn value_and_action_grad(&self, state: &[f64], action: &[f64]) -> (f64, Vec<f64>) {
        let input = self.input(state, action);
        let (out, tape) = self.net.forward(&input).expect("critic input dims");
        let ones = Tensor::new_unchecked(vec![1], vec![1.0]);
        let (_, din) = self.net.backward(&tape, &ones).expect("fresh tape");
        let grad = din.data()[state.len()..].to_vec();
        (out.data()[0], grad)
    }
}

/// TD targets `y = signal + gamma * Q_target(s', a')` with `a'` drawn from
/// the current policy; terminal transitions cut the bootstrap (`y = signal`).
pub fn td_target(
    batch: &[CriticSample<'_>],
    policy: &dyn ActionSampler,
    target_critic: &FeedforwardNetwork,
    cfg: TdConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    if cfg.entropy_coeff != 0.0 {
        return Err(Error::Config(
            "entropy_coeff is reserved and must be 0.0 (diffusion log-likelihood is intractable)".into(),
        ));
    }
    let mut targets: Vec<f64> = batch.iter().map(|s| s.signal).collect();
    if cfg.gamma == 0.0 {
        return Ok(targets);
    }
    // Bootstrap the non-terminal rows in one batched pass.
    let live: Vec<usize> = (0..batch.len()).filter(|&i| !batch[i].done).collect();
    if live.is_empty() {
        return Ok(targets);
    }
    let state_dim = batch[0].next_state.len();
    let mut next_states = Vec::with_capacity(live.len() * state_dim);
    for &i in &live {
        next_states.extend_from_slice(batch[i].next_state);
    }
    let next_states = Tensor::new_unchecked(vec![live.len(), state_dim], next_states);
    let next_actions = policy.sample_batch(&next_states, rng);

    let act_dim = next_actions[0].len();
    let width = state_dim + act_dim;
    let mut inputs = Vec::with_capacity(live.len() * width);
    for (row, a) in next_actions.iter().enumerate() {
        inputs.extend_from_slice(next_states.row(row));
        inputs.extend_from_slice(a);
    }
    let q = target_critic.infer(&Tensor::new_unchecked(vec![live.len(), width], inputs))?;
    for (row, &i) in live.iter().enumerate() {
        targets[i] += cfg.gamma * q.row(row)[0];
    }
    Ok(targets)
}

/// Batched critic evaluation with per-sample action gradients: returns the
/// values `Q(s_b, a_b)` and a `[B, action_dim]` tensor of `dQ_b/da_b`.
pub fn values_and_action_grads(
    net: &FeedforwardNetwork,
    states: &Tensor,
    actions: &Tensor,
) -> Result<(Vec<f64>, Tensor)> {
    let batch = states.batch_rows();
    if actions.batch_rows() != batch {
        return Err(Error::Dimension(format!(
            "states have {batch} rows but actions have {}",
            actions.batch_rows()
        )));
    }
    let state_dim = states.row_width();
    let act_dim = actions.row_width();
    let width = state_dim + act_dim;
    let mut data = Vec::with_capacity(batch * width);
    for b in 0..batch {
        data.extend_from_slice(states.row(b));
        data.extend_from_slice(actions.row(b));
    }
    let input = Tensor::new_unchecked(vec![batch, width], data);
    let (q, tape) = net.forward(&input)?;
    // Rows are independent, so summing the outputs yields per-row input
    // gradients in one backward pass.
    let ones = Tensor::new_unchecked(vec![batch, 1], vec![1.0; batch]);
    let (_, d_input) = net.backward(&tape, &ones)?;
    let mut grads = Tensor::zeros(vec![batch, act_dim]);
    for b in 0..batch {
        grads
            .row_mut(b)
            .copy_from_slice(&d_input.row(b)[state_dim..]);
    }
    Ok((q.data().to_vec(), grads))
}

/// Critic regression loss `L = 1/2 * mean (y - Q(s, a))^2` against
/// precomputed targets. Returns the loss and parameter gradients.
pub fn critic_loss_with_targets(
    critic: &FeedforwardNetwork,
    batch: &[CriticSample<'_>],
    targets: &[f64],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if batch.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "batch has {} samples but {} targets",
            batch.len(),
            targets.len()
        )));
    }
    let width = batch[0].state.len() + batch[0].action.len();
    let mut data = Vec::with_capacity(batch.len() * width);
    for s in batch {
        data.extend_from_slice(s.state);
        data.extend_from_slice(s.action);
    }
    let input = Tensor::new_unchecked(vec![batch.len(), width], data);
    let (q, tape) = critic.forward(&input)?;

    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut d_q = Tensor::zeros(vec![batch.len(), 1]);
    for (i, (&y, row)) in targets.iter().zip(0..batch.len()).map(|(y, r)| (y, r)).enumerate() {
        let err = y - q.row(row)[0];
        loss += 0.5 * err * err;
        d_q.row_mut(i)[0] = -err / b;
    }
    loss /= b;

    let (grads, _) = critic.backward(&tape, &d_q)?;
    Ok((loss, grads))
}

/// Full TD loss: compute targets from the policy and target critic, then
/// regress the live critic on them.
pub fn critic_loss(
    critic: &FeedforwardNetwork,
    batch: &[CriticSample<'_>],
    policy: &dyn ActionSampler,
    target_critic: &FeedforwardNetwork,
    cfg: TdConfig,
    rng: &mut dyn RngCore,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let targets = td_target(batch, policy, target_critic, cfg, rng)?;
    critic_loss_with_targets(critic, batch, &targets)
}

/// Polyak update `target <- rho*target + (1-rho)*live`, elementwise.
pub fn soft_update(live: &FeedforwardNetwork, target: &mut FeedforwardNetwork, rho: f64) -> Result<()> {
    if live.param_count() != target.param_count() {
        return Err(Error::Dimension(format!(
            "live has {} parameters, target has {}",
            live.param_count(),
            target.param_count()
        )));
    }
    let live_params = live.flat_params();
    target.apply_flat_update(|idx, t| rho * t + (1.0 - rho) * live_params[idx]);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CriticsHeader {
    kind: String,
    schema_version: u32,
    state_dim: usize,
    action_dim: usize,
    net: crate::numgrad::NetSpec,
    rho: f64,
}

const CRITICS_KIND: &str = "ddm-lag/critics";
const CRITICS_SCHEMA: u32 = 1;

/// Serialize live + target parameter sets for both critics.
pub fn save_critics(path: &Path, critics: &CriticPair) -> Result<()> {
    let header = CriticsHeader {
        kind: CRITICS_KIND.into(),
        schema_version: CRITICS_SCHEMA,
        state_dim: critics.state_dim,
        action_dim: critics.action_dim,
        net: critics.q_reward.spec(),
        rho: critics.rho,
    };
    let nets = [
        &critics.q_reward,
        &critics.target_q_reward,
        &critics.q_cost,
        &critics.target_q_cost,
    ];
    let records: Vec<Vec<u8>> = nets
        .iter()
        .map(|n| {
            let mut bytes = Vec::new();
            storage::f64s_to_bytes(&n.flat_params(), &mut bytes);
            bytes
        })
        .collect();
    storage::write_container(path, &header, &records)
}

pub fn load_critics(path: &Path) -> Result<CriticPair> {
    let display = path.display().to_string();
    let c: storage::Container<CriticsHeader> = storage::read_container(path)?;
    let h = c.header;
    if h.kind != CRITICS_KIND {
        return Err(Error::Corrupt {
            path: display,
            detail: format!("not a critics checkpoint (kind {})", h.kind),
        });
    }
    if h.schema_version != CRITICS_SCHEMA {
        return Err(Error::SchemaVersion {
            path: display,
            found: h.schema_version,
            supported: CRITICS_SCHEMA,
        });
    }
    if c.records.len() != 4 {
        return Err(Error::Corrupt {
            path: display,
            detail: format!("expected 4 parameter records, found {}", c.records.len()),
        });
    }
    let param_count: usize = {
        let d = &h.net.dims;
        (0..d.len() - 1).map(|k| d[k] * d[k + 1] + d[k + 1]).sum()
    };
    let mut nets = Vec::with_capacity(4);
    for (i, rec) in c.records.iter().enumerate() {
        let params = storage::ByteReader::new(rec).f64s(param_count).ok_or_else(|| {
            Error::Corrupt {
                path: display.clone(),
                detail: format!("parameter record {i} too short"),
            }
        })?;
        nets.push(FeedforwardNetwork::from_spec_and_params(&h.net, &params)?);
    }
    let target_q_cost = nets.pop().unwrap();
    let q_cost = nets.pop().unwrap();
    let target_q_reward = nets.pop().unwrap();
    let q_reward = nets.pop().unwrap();
    Ok(CriticPair {
        q_reward,
        q_cost,
        target_q_reward,
        target_q_cost,
        rho: h.rho,
        state_dim: h.state_dim,
        action_dim: h.action_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrad::{adam_step, AdamState};
    use crate::rng::{stream, Stream};
    use rand::Rng;

    /// Deterministic single-action sampler for micro-MDP tests.
    struct FixedPolicy {
        actions: Vec<(Vec<f64>, Vec<f64>)>,
    }

    impl ActionSampler for FixedPolicy {
        fn action_dim(&self) -> usize {
            1
        }

        fn sample(&self, state: &[f64], _rng: &mut dyn RngCore) -> Vec<f64> {
            self.actions
                .iter()
                .find(|(s, _)| s == state)
                .map(|(_, a)| a.clone())
                .expect("unknown state")
        }
    }

    /// Network that outputs a constant regardless of input: zero weights,
    /// output bias c.
    fn constant_net(in_dim: usize, c: f64) -> FeedforwardNetwork {
        let mut net = FeedforwardNetwork::zeros(&[in_dim, 1], Activation::Identity).unwrap();
        let mut params = net.flat_params();
        *params.last_mut().unwrap() = c;
        net.set_flat_params(&params).unwrap();
        net
    }

    fn sample<'a>(
        state: &'a [f64],
        action: &'a [f64],
        signal: f64,
        next_state: &'a [f64],
        done: bool,
    ) -> CriticSample<'a> {
        CriticSample {
            state,
            action,
            signal,
            next_state,
            done,
        }
    }

    #[test]
    fn td_target_terminal_cuts_bootstrap() {
        let policy = FixedPolicy {
            actions: vec![(vec![0.0], vec![0.0])],
        };
        let target = constant_net(2, 100.0);
        let batch = [sample(&[0.0], &[0.0], 1.0, &[0.0], true)];
        let y = td_target(&batch, &policy, &target, TdConfig::new(0.99), &mut stream(0, Stream::CriticTarget, 0)).unwrap();
        assert_eq!(y, vec![1.0]);
    }

    #[test]
    fn td_target_myopic_when_gamma_zero() {
        let policy = FixedPolicy {
            actions: vec![(vec![0.0], vec![0.0])],
        };
        let target = constant_net(2, 100.0);
        let batch = [sample(&[0.0], &[0.0], 0.7, &[0.0], false)];
        let y = td_target(&batch, &policy, &target, TdConfig::new(0.0), &mut stream(0, Stream::CriticTarget, 0)).unwrap();
        assert_eq!(y, vec![0.7]);
    }

    #[test]
    fn td_target_constant_network_oracle() {
        // Constant target Q == c, r = 0, gamma = 0.99 -> y = 0.99 c.
        let policy = FixedPolicy {
            actions: vec![(vec![0.5], vec![0.25])],
        };
        let c = 3.5;
        let target = constant_net(2, c);
        let batch = [sample(&[0.5], &[0.25], 0.0, &[0.5], false)];
        let y = td_target(&batch, &policy, &target, TdConfig::new(0.99), &mut stream(0, Stream::CriticTarget, 0)).unwrap();
        assert_eq!(y, vec![0.99 * c]);
    }

    #[test]
    fn entropy_coefficient_is_reserved() {
        let policy = FixedPolicy {
            actions: vec![(vec![0.0], vec![0.0])],
        };
        let target = constant_net(2, 0.0);
        let batch = [sample(&[0.0], &[0.0], 0.0, &[0.0], false)];
        let cfg = TdConfig {
            gamma: 0.99,
            entropy_coeff: 0.1,
        };
        assert!(td_target(&batch, &policy, &target, cfg, &mut stream(0, Stream::CriticTarget, 0)).is_err());
    }

    #[test]
    fn loss_zero_for_perfect_critic() {
        // Critic that already outputs the target exactly.
        let critic = constant_net(2, 2.5);
        let batch = [sample(&[1.0], &[0.0], 0.0, &[0.0], true)];
        let (loss, grads) = critic_loss_with_targets(&critic, &batch, &[2.5]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_scalar_arithmetic_case() {
        // y = 2, Q = 0 -> L = 1/2 * 4 = 2.
        let critic = constant_net(2, 0.0);
        let batch = [sample(&[1.0], &[0.0], 0.0, &[0.0], true)];
        let (loss, _) = critic_loss_with_targets(&critic, &batch, &[2.0]).unwrap();
        assert_eq!(loss, 2.0);
    }

    #[test]
    fn loss_rejects_empty_batch() {
        let critic = constant_net(2, 0.0);
        let err = critic_loss_with_targets(&critic, &[], &[]);
        assert!(matches!(err, Err(Error::EmptyBatch)));
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = stream(7, Stream::Init, 0);
        let critic = FeedforwardNetwork::new(&[3, 8, 8, 1], Activation::Relu, &mut rng).unwrap();
        let states: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let actions: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![rng.random_range(-1.0..1.0)])
            .collect();
        let batch: Vec<CriticSample<'_>> = states
            .iter()
            .zip(&actions)
            .map(|(s, a)| sample(s, a, 0.0, s, true))
            .collect();
        let targets = [0.3, -0.7, 1.2, 0.0, 2.0];

        let (_, grads) = critic_loss_with_targets(&critic, &batch, &targets).unwrap();
        let analytic = grads.flatten();

        let base = critic.flat_params();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for p in 0..base.len() {
            let loss_at = |delta: f64| -> f64 {
                let mut c = critic.clone();
                let mut params = base.clone();
                params[p] += delta;
                c.set_flat_params(&params).unwrap();
                critic_loss_with_targets(&c, &batch, &targets).unwrap().0
            };
            let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let rel = (numeric - analytic[p]).abs() / numeric.abs().max(analytic[p].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-5, "max rel err {worst}");
    }

    #[test]
    fn soft_update_edge_coefficients() {
        let mut rng = stream(9, Stream::Init, 0);
        let live = FeedforwardNetwork::new(&[2, 4, 1], Activation::Relu, &mut rng).unwrap();
        let fresh = FeedforwardNetwork::new(&[2, 4, 1], Activation::Relu, &mut rng).unwrap();

        // rho = 0: wholesale copy. (Outside CriticPair's (0,1) contract but
        // well-defined for the raw operation.)
        let mut target = fresh.clone();
        soft_update(&live, &mut target, 0.0).unwrap();
        assert_eq!(target.flat_params(), live.flat_params());

        // rho = 1: target untouched.
        let mut target = fresh.clone();
        soft_update(&live, &mut target, 1.0).unwrap();
        assert_eq!(target.flat_params(), fresh.flat_params());
    }

    #[test]
    fn soft_update_small_rho_tracks_fast() {
        // live = 1, target = 0, rho = 0.005 -> target = 0.995 (Polyak
        // convention weighting the target by rho means small rho tracks fast).
        let mut live = FeedforwardNetwork::zeros(&[1, 1], Activation::Identity).unwrap();
        live.set_flat_params(&[1.0, 1.0]).unwrap();
        let mut target = FeedforwardNetwork::zeros(&[1, 1], Activation::Identity).unwrap();
        soft_update(&live, &mut target, 0.005).unwrap();
        assert_eq!(target.flat_params(), vec![0.995, 0.995]);
    }

    #[test]
    fn repeated_soft_updates_contract_geometrically() {
        // With rho = 0.5 and power-of-two values the arithmetic is exact:
        // the gap shrinks by exactly rho^k.
        let mut live = FeedforwardNetwork::zeros(&[1, 1], Activation::Identity).unwrap();
        live.set_flat_params(&[1.0, 1.0]).unwrap();
        let mut target = FeedforwardNetwork::zeros(&[1, 1], Activation::Identity).unwrap();
        for k in 1..=20 {
            soft_update(&live, &mut target, 0.5).unwrap();
            let gap = 1.0 - target.flat_params()[0];
            assert_eq!(gap, 0.5f64.powi(k), "k = {k}");
        }

        // And with the production value the contraction holds numerically.
        let mut target = FeedforwardNetwork::zeros(&[1, 1], Activation::Identity).unwrap();
        for _ in 0..100 {
            soft_update(&live, &mut target, 0.995).unwrap();
        }
        let gap = 1.0 - target.flat_params()[0];
        assert!((gap - 0.995f64.powi(100)).abs() < 1e-12);
    }

    #[test]
    fn soft_update_rejects_mismatched_shapes() {
        let live = FeedforwardNetwork::zeros(&[2, 3, 1], Activation::Relu).unwrap();
        let mut target = FeedforwardNetwork::zeros(&[2, 4, 1], Activation::Relu).unwrap();
        assert!(soft_update(&live, &mut target, 0.5).is_err());
    }

    /// 2-state/2-action deterministic micro-MDP used for the convergence
    /// checks. States are encoded as [0.0] and [1.0], actions as [0.0]/[1.0].
    ///
    ///   s0 --a0--> s0  r=1  c=0
    ///   s0 --a1--> s1  r=0  c=2
    ///   s1 --a0--> s0  r=2  c=1
    ///   s1 --a1--> s1  r=0  c=0
    fn micro_mdp(signal_is_cost: bool) -> Vec<(Vec<f64>, Vec<f64>, f64, Vec<f64>)> {
        let r = |r: f64, c: f64| if signal_is_cost { c } else { r };
        vec![
            (vec![0.0], vec![0.0], r(1.0, 0.0), vec![0.0]),
            (vec![0.0], vec![1.0], r(0.0, 2.0), vec![1.0]),
            (vec![1.0], vec![0.0], r(2.0, 1.0), vec![0.0]),
            (vec![1.0], vec![1.0], r(0.0, 0.0), vec![1.0]),
        ]
    }

    /// Ground-truth Q for the fixed policy pi(s0) = a0, pi(s1) = a0 by
    /// value iteration over the deterministic micro-MDP.
    fn micro_mdp_ground_truth(signal_is_cost: bool, gamma: f64) -> Vec<f64> {
        let transitions = micro_mdp(signal_is_cost);
        // V(s) under the fixed policy: index by state id.
        let mut v = [0.0f64; 2];
        for _ in 0..500 {
            // pi always picks a0: transitions 0 (s0) and 2 (s1).
            let v0 = transitions[0].2 + gamma * v[transitions[0].3[0] as usize];
            let v1 = transitions[2].2 + gamma * v[transitions[2].3[0] as usize];
            v = [v0, v1];
        }
        // Q(s, a) = r + gamma * V(s').
        transitions
            .iter()
            .map(|(_, _, r, s_next)| r + gamma * v[s_next[0] as usize])
            .collect()
    }

    fn train_micro_mdp_critic(signal_is_cost: bool) {
        let gamma = 0.9;
        let transitions = micro_mdp(signal_is_cost);
        let policy = FixedPolicy {
            actions: vec![(vec![0.0], vec![0.0]), (vec![1.0], vec![0.0])],
        };
        let mut rng = stream(77, Stream::Init, 0);
        let mut critic = FeedforwardNetwork::new(&[2, 16, 16, 1], Activation::Relu, &mut rng).unwrap();
        let mut target = critic.clone();
        let mut adam = crate::numgrad::AdamState::new(critic.param_count(), 5e-3);
        let mut trng = stream(78, Stream::CriticTarget, 0);

        for _ in 0..8000 {
            let batch: Vec<CriticSample<'_>> = transitions
                .iter()
                .map(|(s, a, r, sn)| sample(s, a, *r, sn, false))
                .collect();
            let (_, grads) =
                critic_loss(&critic, &batch, &policy, &target, TdConfig::new(gamma), &mut trng).unwrap();
            adam_step(&mut critic, &grads, &mut adam).unwrap();
            soft_update(&critic, &mut target, 0.95).unwrap();
        }

        let truth = micro_mdp_ground_truth(signal_is_cost, gamma);
        for ((s, a, _, _), q_true) in transitions.iter().zip(&truth) {
            let mut row = s.clone();
            row.extend_from_slice(a);
            let q = critic.infer_scalar(&row).unwrap();
            assert!(
                (q - q_true).abs() < 0.05,
                "Q({s:?},{a:?}) = {q}, ground truth {q_true}"
            );
        }
    }

    #[test]
    fn reward_critic_converges_to_value_iteration() {
        train_micro_mdp_critic(false);
    }

    #[test]
    fn cost_critic_obeys_the_same_contraction() {
        train_micro_mdp_critic(true);
    }

    #[test]
    fn critics_checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("critics.ckpt");
        let mut rng = stream(5, Stream::Init, 0);
        let mut critics = CriticPair::new(4, 2, &[8, 8], 0.995, &mut rng).unwrap();
        // Make live and target diverge so the round trip is meaningful.
        let grads = Gradients::from_flat(
            &critics.q_reward,
            &vec![0.1; critics.q_reward.param_count()],
        )
        .unwrap();
        let mut adam = AdamState::new(critics.q_reward.param_count(), 1e-2);
        adam_step(&mut critics.q_reward, &grads, &mut adam).unwrap();

        save_critics(&path, &critics).unwrap();
        let loaded = load_critics(&path).unwrap();
        assert_eq!(loaded.q_reward.flat_params(), critics.q_reward.flat_params());
        assert_eq!(loaded.q_cost.flat_params(), critics.q_cost.flat_params());
        assert_eq!(
            loaded.target_q_reward.flat_params(),
            critics.target_q_reward.flat_params()
        );
        assert_eq!(loaded.target_q_cost.flat_params(), critics.target_q_cost.flat_params());
        assert_eq!(loaded.rho, 0.995);
        assert_ne!(
            loaded.q_reward.flat_params(),
            loaded.target_q_reward.flat_params()
        );
    }

    #[test]
    fn net_value_gradient_matches_finite_differences() {
        let mut rng = stream(11, Stream::Init, 0);
        let critics = CriticPair::new(3, 2, &[8], 0.995, &mut rng).unwrap();
        let view = critics.reward_value();
        let s = [0.3, -0.2, 0.8];
        let a = [0.1, -0.5];
        let (v, g) = view.value_and_action_grad(&s, &a);
        assert_eq!(v, view.value(&s, &a));
        let h = 1e-6;
        for d in 0..2 {
            let mut ap = a;
            let mut am = a;
            ap[d] += h;
            am[d] -= h;
            let numeric = (view.value(&s, &ap) - view.value(&s, &am)) / (2.0 * h);
            assert!((numeric - g[d]).abs() < 1e-6, "dim {d}: {numeric} vs {}", g[d]);
        }
    }
}
