//! The training loop: minibatch sampling, hybrid policy update, critic
//! regression, target maintenance and the PID multiplier schedule.
//!
//! Everything is minimized. The policy objective is
//!
//! ```text
//! L(theta) = L_d  -  (eta/|Q|) * E[Q(s, a0)]  +  lambda * E[Q^C(s, a0) - d]
//! ```
//!
//! so the three gradient terms imitate the data, raise the reward critic
//! and lower the cost critic. Both guided terms share one traced chain
//! sample per epoch and push their gradients through all reverse steps.

mod config;
mod report;

pub use config::{Ablation, TrainConfig};
pub use report::{EpochRow, TrainReport, REPORT_COLUMNS};

use rand::{Rng, RngCore};

use crate::critics::{td_target, critic_loss_with_targets, CriticPair, CriticSample, TdConfig};
use crate::diffusion::{bc_loss, DiffusionPolicy, VarianceSchedule};
use crate::driveworld::{ActionCommand, Scenario, World};
use crate::error::{Error, Result};
use crate::expert::TrajectoryDataset;
use crate::lagrangian::{PidState, PidUpdate};
use crate::numgrad::{adam_step, AdamState, Gradients, Tensor};
use crate::rng::{stream, Stream};
use crate::traits::{ActionSampler, ActionValue};

/// Everything a finished run produces.
#[derive(Debug)]
pub struct TrainOutputs {
    pub policy: DiffusionPolicy,
    pub policy_adam: AdamState,
    pub critics: CriticPair,
    pub report: TrainReport,
}

/// Combine the constrained objective's gradient terms at a fixed
/// multiplier: `g = g_bc + g_q + lambda * g_cost`.
///
/// `g_cost` is the gradient of `mean Q^C(s, a0)` through the chain; adding
/// it with weight `lambda` penalizes predicted cost.
pub fn lagrangian_objective(
    g_bc: &Gradients,
    g_q: &Gradients,
    g_cost: &Gradients,
    lambda: f64,
) -> Result<Gradients> {
    if lambda < 0.0 {
        return Err(Error::Argument(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let mut total = g_bc.clone();
    total.add_assign(g_q);
    let mut cost = g_cost.clone();
    cost.scale(lambda);
    total.add_assign(&cost);
    Ok(total)
}

/// Undiscounted (reward, cost) sums of one greedy policy rollout.
pub(crate) fn rollout_episode(
    world: &mut World,
    policy: &dyn ActionSampler,
    world_seed: u64,
    rng: &mut dyn RngCore,
) -> (f64, f64) {
    let mut obs = world.reset(world_seed);
    let mut total_reward = 0.0;
    let mut total_cost = 0.0;
    loop {
        let a = policy.sample(&obs.to_vec(), rng);
        let out = world.step(ActionCommand::from_slice(&a)).expect("live episode");
        total_reward += out.reward;
        total_cost += out.cost;
        if out.is_done() {
            return (total_reward, total_cost);
        }
        obs = out.observation;
    }
}

struct Batch {
    states: Tensor,
    actions: Tensor,
    indices: Vec<usize>,
}

fn sample_batch(dataset: &TrajectoryDataset, batch_size: usize, rng: &mut impl Rng) -> Batch {
    let n = dataset.transitions.len();
    let obs_dim = dataset.meta.obs_dim;
    let act_dim = dataset.meta.action_dim;
    let indices: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..n)).collect();
    let mut states = Vec::with_capacity(batch_size * obs_dim);
    let mut actions = Vec::with_capacity(batch_size * act_dim);
    for &i in &indices {
        let t = &dataset.transitions[i];
        states.extend(t.state.iter().map(|&v| v as f64));
        actions.extend_from_slice(&t.action);
    }
    Batch {
        states: Tensor::new_unchecked(vec![batch_size, obs_dim], states),
        actions: Tensor::new_unchecked(vec![batch_size, act_dim], actions),
        indices,
    }
}

/// Run the full algorithm over an offline dataset.
///
/// The evaluation scenario is reconstructed from the dataset metadata, so
/// a dataset plus a config fully determines the run.
pub fn train(dataset: &TrajectoryDataset, config: &TrainConfig) -> Result<TrainOutputs> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scenario: Scenario = dataset.scenario()?;
    let world_cfg = dataset.meta.world_config.clone();
    if world_cfg.observation_dim() != dataset.meta.obs_dim {
        return Err(Error::Dimension(format!(
            "dataset observation dim {} does not match its world config ({})",
            dataset.meta.obs_dim,
            world_cfg.observation_dim()
        )));
    }
    dataset.check_compat(dataset.meta.obs_dim, 2)?;
    let obs_dim = dataset.meta.obs_dim;
    let act_dim = dataset.meta.action_dim;

    // Networks.
    let schedule = VarianceSchedule::build(config.n_steps, config.beta_min, config.beta_max)?;
    let hidden = [config.hidden_dim, config.hidden_dim];
    let mut policy = DiffusionPolicy::new(
        obs_dim,
        act_dim,
        &hidden,
        config.embedding_dim,
        schedule,
        &mut stream(config.seed, Stream::Init, 0),
    )?;
    let mut critics = CriticPair::new(
        obs_dim,
        act_dim,
        &hidden,
        config.rho,
        &mut stream(config.seed, Stream::Init, 1),
    )?;

    let mut policy_adam = AdamState::new(policy.eps_net().param_count(), config.actor_lr);
    let mut adam_reward = AdamState::new(critics.q_reward.param_count(), config.critic_lr);
    let mut adam_cost = AdamState::new(critics.q_cost.param_count(), config.critic_lr);
    let mut pid = PidState::new(config.pid, config.cost_limit, config.lambda0)?;

    // Independent streams; disabling one consumer never shifts another.
    let mut batch_rng = stream(config.seed, Stream::Batch, 0);
    let mut bc_rng = stream(config.seed, Stream::BcNoise, 0);
    let mut guidance_rng = stream(config.seed, Stream::Guidance, 0);
    let mut target_rng_r = stream(config.seed, Stream::CriticTarget, 0);
    let mut target_rng_c = stream(config.seed, Stream::CriticTarget, 1);

    let mut world = World::new(scenario, world_cfg)?;
    let train_critics = config.ablation != Ablation::BcOnly;

    let evaluate = |world: &mut World, policy: &DiffusionPolicy, eval_idx: u64| -> (f64, f64) {
        let episodes = config.eval_episodes;
        let mut sum_r = 0.0;
        let mut sum_c = 0.0;
        for ep in 0..episodes {
            let mut rng = stream(config.seed, Stream::Eval, (eval_idx << 16) | ep as u64);
            let world_seed: u64 = rng.random();
            let (r, c) = rollout_episode(world, policy, world_seed, &mut rng);
            sum_r += r;
            sum_c += c;
        }
        (sum_r / episodes as f64, sum_c / episodes as f64)
    };

    // Baseline evaluation before training; the multiplier reacts to it the
    // same way it reacts to every later evaluation.
    let (mut eval_reward, mut eval_cost) = evaluate(&mut world, &policy, 0);
    let mut last_update: PidUpdate = pid.update_lambda(eval_cost)?;

    let mut report = TrainReport::default();
    let mut eval_idx = 1u64;
    for epoch in 1..=config.epochs {
        let batch = sample_batch(dataset, config.batch_size, &mut batch_rng);

        // Behavior cloning term.
        let (loss_bc, g_bc) = bc_loss(&policy, &batch.states, &batch.actions, &mut bc_rng)?;

        // Guided terms share one traced chain sample.
        let lambda = pid.lambda;
        let mut loss_q = 0.0;
        let mut loss_cost_weighted = 0.0;
        let zero = Gradients::zeros_like(policy.eps_net());
        let (g_q, g_cost) = if config.eta > 0.0 || lambda > 0.0 {
            let trace = policy.sample_action_traced(&batch.states, &mut guidance_rng)?;
            let b = config.batch_size as f64;

            let g_q = if config.eta > 0.0 {
                let (values, mut grads_a) =
                    crate::critics::values_and_action_grads(&critics.q_reward, &batch.states, trace.actions())?;
                let mean_q: f64 = values.iter().sum::<f64>() / b;
                let mean_abs: f64 = values.iter().map(|v| v.abs()).sum::<f64>() / b;
                let scale = config.eta / mean_abs.max(1e-8);
                loss_q = -scale * mean_q;
                for g in grads_a.data_mut() {
                    *g *= -scale / b;
                }
                policy.chain_backward(&trace, &grads_a)?
            } else {
                zero.clone()
            };

            let g_cost = if lambda > 0.0 {
                let (values, mut grads_a) =
                    crate::critics::values_and_action_grads(&critics.q_cost, &batch.states, trace.actions())?;
                let mean_qc: f64 = values.iter().sum::<f64>() / b;
                loss_cost_weighted = lambda * (mean_qc - config.cost_limit);
                for g in grads_a.data_mut() {
                    *g /= b;
                }
                policy.chain_backward(&trace, &grads_a)?
            } else {
                zero.clone()
            };
            (g_q, g_cost)
        } else {
            (zero.clone(), zero)
        };

        for (name, value) in [
            ("loss_bc", loss_bc),
            ("loss_q", loss_q),
            ("loss_cost_weighted", loss_cost_weighted),
        ] {
            if !value.is_finite() {
                return Err(Error::DivergedLoss {
                    epoch,
                    loss: name.into(),
                });
            }
        }

        let g_total = lagrangian_objective(&g_bc, &g_q, &g_cost, lambda)?;
        adam_step(policy.eps_net_mut(), &g_total, &mut policy_adam)?;

        // Critic regression on TD targets bootstrapped through the targets.
        let mut critic_reward_loss = 0.0;
        let mut critic_cost_loss = 0.0;
        if train_critics {
            let states: Vec<&[f64]> = (0..config.batch_size).map(|i| batch.states.row(i)).collect();
            let next_states: Vec<Vec<f64>> = batch
                .indices
                .iter()
                .map(|&i| {
                    dataset.transitions[i]
                        .next_state
                        .iter()
                        .map(|&v| v as f64)
                        .collect()
                })
                .collect();
            let make_batch = |signal_cost: bool| -> Vec<CriticSample<'_>> {
                batch
                    .indices
                    .iter()
                    .enumerate()
                    .map(|(row, &i)| {
                        let t = &dataset.transitions[i];
                        CriticSample {
                            state: states[row],
                            action: batch.actions.row(row),
                            signal: if signal_cost { t.cost } else { t.reward },
                            next_state: &next_states[row],
                            done: t.done,
                        }
                    })
                    .collect()
            };
            let td = TdConfig::new(config.gamma);

            let reward_batch = make_batch(false);
            let y_r = td_target(&reward_batch, &policy, &critics.target_q_reward, td, &mut target_rng_r)?;
            let (l_r, g_r) = critic_loss_with_targets(&critics.q_reward, &reward_batch, &y_r)?;
            adam_step(&mut critics.q_reward, &g_r, &mut adam_reward)?;

            let cost_batch = make_batch(true);
            let y_c = td_target(&cost_batch, &policy, &critics.target_q_cost, td, &mut target_rng_c)?;
            let (l_c, g_c) = critic_loss_with_targets(&critics.q_cost, &cost_batch, &y_c)?;
            adam_step(&mut critics.q_cost, &g_c, &mut adam_cost)?;

            for (name, value) in [("critic_reward_loss", l_r), ("critic_cost_loss", l_c)] {
                if !value.is_finite() {
                    return Err(Error::DivergedLoss {
                        epoch,
                        loss: name.into(),
                    });
                }
            }
            critic_reward_loss = l_r;
            critic_cost_loss = l_c;

            critics.update_targets()?;
        }

        // Evaluation rollouts feed the multiplier.
        if epoch % config.eval_interval == 0 {
            let (r, c) = evaluate(&mut world, &policy, eval_idx);
            eval_idx += 1;
            eval_reward = r;
            eval_cost = c;
            last_update = pid.update_lambda(c)?;
        }

        report.rows.push(EpochRow {
            epoch,
            loss_bc,
            loss_q,
            loss_cost_weighted,
            critic_reward_loss,
            critic_cost_loss,
            lambda: pid.lambda,
            delta: last_update.delta,
            integral: last_update.integral,
            derivative: last_update.derivative,
            eval_mean_reward: eval_reward,
            eval_mean_cost: eval_cost,
        });
    }

    Ok(TrainOutputs {
        policy,
        policy_adam,
        critics,
        report,
    })
}
