use std::path::Path;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::{TimestepEmbedding, VarianceSchedule};
use crate::error::{Error, Result};
use crate::numgrad::{AdamState, FeedforwardNetwork, Gradients, Tape, Tensor};
use crate::storage;
use crate::traits::ActionSampler;

/// Executed actions live in this box; the last reverse step clips into it.
pub const ACTION_BOUND: f64 = 1.0;

/// The diffusion actor: noise-prediction network plus variance schedule.
///
/// The network maps `concat(a_i, s, emb(i))` to a predicted noise vector of
/// action dimension.
#[derive(Debug, Clone)]
pub struct DiffusionPolicy {
    eps_net: FeedforwardNetwork,
    schedule: VarianceSchedule,
    embedding: TimestepEmbedding,
    state_dim: usize,
    action_dim: usize,
}

/// Record of one traced chain sample: everything needed to push a gradient
/// at `a0` back through all N reverse steps.
pub struct ChainTrace {
    /// Per reverse step, in sampling order `i = N..1`.
    steps: Vec<StepTrace>,
    /// Final action before clipping, `[B, A]`.
    a0_raw: Tensor,
    /// Final action after clipping.
    a0: Tensor,
    batch: usize,
}

struct StepTrace {
    i: usize,
    tape: Tape,
}

impl ChainTrace {
    pub fn actions(&self) -> &Tensor {
        &self.a0
    }

    /// Final actions before box clipping; useful to diagnose how much of
    /// the batch is railed at the bound.
    pub fn actions_raw(&self) -> &Tensor {
        &self.a0_raw
    }
}

impl DiffusionPolicy {
    /// `hidden` lists the hidden-layer widths of the noise net (the spec
    /// network is two hidden layers, i.e. a 3-layer MLP).
    pub fn new<R: rand::Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        embedding_dim: usize,
        schedule: VarianceSchedule,
        rng: &mut R,
    ) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::Config("state and action dims must be positive".into()));
        }
        let embedding = TimestepEmbedding::new(embedding_dim)?;
        let mut dims = vec![action_dim + state_dim + embedding_dim];
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        let eps_net = FeedforwardNetwork::new(&dims, crate::numgrad::Activation::Mish, rng)?;
        Ok(DiffusionPolicy {
            eps_net,
            schedule,
            embedding,
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

    pub fn schedule(&self) -> &VarianceSchedule {
        &self.schedule
    }

    pub fn embedding(&self) -> &TimestepEmbedding {
        &self.embedding
    }

    pub fn eps_net(&self) -> &FeedforwardNetwork {
        &self.eps_net
    }

    pub fn eps_net_mut(&mut self) -> &mut FeedforwardNetwork {
        &mut self.eps_net
    }

    /// Replace the noise net (used by checkpoint loading and tests). The
    /// net must have the input/output dims this policy expects.
    pub fn with_eps_net(mut self, net: FeedforwardNetwork) -> Result<Self> {
        let expect_in = self.action_dim + self.state_dim + self.embedding.dim();
        if net.input_dim() != expect_in || net.output_dim() != self.action_dim {
            return Err(Error::Dimension(format!(
                "eps net is {}->{}, policy expects {}->{}",
                net.input_dim(),
                net.output_dim(),
                expect_in,
                self.action_dim
            )));
        }
        self.eps_net = net;
        Ok(self)
    }

    fn check_state(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.state_dim {
            return Err(Error::Dimension(format!(
                "state length {} does not match policy state dim {}",
                s.len(),
                self.state_dim
            )));
        }
        Ok(())
    }

    /// Assemble one network input row `[a, s, emb(i)]`.
    fn input_row(&self, a: &[f64], s: &[f64], i: usize) -> Vec<f64> {
        let emb = self.embedding.encode(i);
        let mut row = Vec::with_capacity(a.len() + s.len() + emb.len());
        row.extend_from_slice(a);
        row.extend_from_slice(s);
        row.extend_from_slice(&emb);
        row
    }

    /// Batched input assembly; `per_row_i` gives the diffusion index per row.
    pub(crate) fn input_batch(&self, actions: &Tensor, states: &Tensor, per_row_i: &[usize]) -> Tensor {
        let batch = states.batch_rows();
        let width = self.action_dim + self.state_dim + self.embedding.dim();
        let mut data = Vec::with_capacity(batch * width);
        for b in 0..batch {
            data.extend_from_slice(actions.row(b));
            data.extend_from_slice(states.row(b));
            data.extend_from_slice(&self.embedding.encode(per_row_i[b]));
        }
        Tensor::new_unchecked(vec![batch, width], data)
    }

    /// Predicted noise for a single `(a_i, s, i)`.
    pub fn predict_eps(&self, a: &[f64], s: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_state(s)?;
        self.schedule.checked_index(i)?;
        let row = self.input_row(a, s, i);
        let out = self.eps_net.infer(&Tensor::new_unchecked(vec![row.len()], row))?;
        Ok(out.data().to_vec())
    }

    /// One reverse step: `a_{i-1}` from `a_i`.
    ///
    /// `noise` is caller-supplied; it is ignored at `i = 1`, where the step
    /// is deterministic.
    pub fn reverse_step(&self, a_i: &[f64], s: &[f64], i: usize, noise: &[f64]) -> Result<Vec<f64>> {
        self.check_state(s)?;
        self.schedule.checked_index(i)?;
        if a_i.len() != self.action_dim || noise.len() != self.action_dim {
            return Err(Error::Dimension(format!(
                "action/noise length must be {}",
                self.action_dim
            )));
        }
        let eps_hat = self.predict_eps(a_i, s, i)?;
        let alpha = self.schedule.alpha(i);
        let beta = self.schedule.beta(i);
        let ab = self.schedule.alpha_bar(i);
        let inv_sqrt_alpha = 1.0 / alpha.sqrt();
        let coef = beta / (alpha * (1.0 - ab)).sqrt();
        let sigma = if i > 1 { beta.sqrt() } else { 0.0 };
        Ok((0..self.action_dim)
            .map(|d| inv_sqrt_alpha * a_i[d] - coef * eps_hat[d] + sigma * noise[d])
            .collect())
    }

    /// Draw `a_N ~ N(0, I)`, walk the reverse chain, clip to the action box.
    pub fn sample_action(&self, s: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.check_state(s)?;
        let n = self.schedule.len();
        let mut a: Vec<f64> = (0..self.action_dim)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let mut noise = vec![0.0; self.action_dim];
        for i in (1..=n).rev() {
            if i > 1 {
                for v in &mut noise {
                    *v = StandardNormal.sample(rng);
                }
            } else {
                noise.iter_mut().for_each(|v| *v = 0.0);
            }
            a = self.reverse_step(&a, s, i, &noise)?;
        }
        for v in &mut a {
            *v = v.clamp(-ACTION_BOUND, ACTION_BOUND);
        }
        Ok(a)
    }

    /// Batched chain sampling without tapes; one action row per state row.
    pub fn sample_actions(&self, states: &Tensor, rng: &mut dyn RngCore) -> Result<Tensor> {
        if states.row_width() != self.state_dim {
            return Err(Error::Dimension(format!(
                "states width {} does not match policy state dim {}",
                states.row_width(),
                self.state_dim
            )));
        }
        let batch = states.batch_rows();
        let n = self.schedule.len();
        let mut a = Tensor::new_unchecked(
            vec![batch, self.action_dim],
            (0..batch * self.action_dim)
                .map(|_| StandardNormal.sample(rng))
                .collect(),
        );
        for i in (1..=n).rev() {
            let input = self.input_batch(&a, states, &vec![i; batch]);
            let eps_hat = self.eps_net.infer(&input)?;
            let alpha = self.schedule.alpha(i);
            let beta = self.schedule.beta(i);
            let ab = self.schedule.alpha_bar(i);
            let inv_sqrt_alpha = 1.0 / alpha.sqrt();
            let coef = beta / (alpha * (1.0 - ab)).sqrt();
            let sigma = if i > 1 { beta.sqrt() } else { 0.0 };
            let mut next = Tensor::zeros(vec![batch, self.action_dim]);
            for b in 0..batch {
                let a_row = a.row(b);
                let e_row = eps_hat.row(b);
                let out = next.row_mut(b);
                for d in 0..self.action_dim {
                    let z: f64 = if i > 1 { StandardNormal.sample(rng) } else { 0.0 };
                    out[d] = inv_sqrt_alpha * a_row[d] - coef * e_row[d] + sigma * z;
                }
            }
            a = next;
        }
        for v in a.data_mut() {
            *v = v.clamp(-ACTION_BOUND, ACTION_BOUND);
        }
        Ok(a)
    }

    /// Batched chain sample recording a tape per reverse step, so a loss
    /// gradient at `a0` can be pushed back to the noise-net parameters.
    pub fn sample_action_traced(&self, states: &Tensor, rng: &mut dyn RngCore) -> Result<ChainTrace> {
        if states.row_width() != self.state_dim {
            return Err(Error::Dimension(format!(
                "states width {} does not match policy state dim {}",
                states.row_width(),
                self.state_dim
            )));
        }
        let batch = states.batch_rows();
        let n = self.schedule.len();
        let mut a = Tensor::new_unchecked(
            vec![batch, self.action_dim],
            (0..batch * self.action_dim)
                .map(|_| StandardNormal.sample(rng))
                .collect(),
        );
        let mut steps = Vec::with_capacity(n);
        for i in (1..=n).rev() {
            let input = self.input_batch(&a, states, &vec![i; batch]);
            let (eps_hat, tape) = self.eps_net.forward(&input)?;
            let alpha = self.schedule.alpha(i);
            let beta = self.schedule.beta(i);
            let ab = self.schedule.alpha_bar(i);
            let inv_sqrt_alpha = 1.0 / alpha.sqrt();
            let coef = beta / (alpha * (1.0 - ab)).sqrt();
            let sigma = if i > 1 { beta.sqrt() } else { 0.0 };
            let mut next = Tensor::zeros(vec![batch, self.action_dim]);
            for b in 0..batch {
                let a_row = a.row(b);
                let e_row = eps_hat.row(b);
                let out = next.row_mut(b);
                for d in 0..self.action_dim {
                    let z: f64 = if i > 1 { StandardNormal.sample(rng) } else { 0.0 };
                    out[d] = inv_sqrt_alpha * a_row[d] - coef * e_row[d] + sigma * z;
                }
            }
            steps.push(StepTrace { i, tape });
            a = next;
        }
        let a0_raw = a.clone();
        for v in a.data_mut() {
            *v = v.clamp(-ACTION_BOUND, ACTION_BOUND);
        }
        Ok(ChainTrace {
            steps,
            a0_raw,
            a0: a,
            batch,
        })
    }

    /// Push `d_loss/d_a0` back through the traced chain.
    ///
    /// Entries clipped by the action box get a zero subgradient. Returns
    /// accumulated noise-net parameter gradients.
    pub fn chain_backward(&self, trace: &ChainTrace, d_a0: &Tensor) -> Result<Gradients> {
        if d_a0.batch_rows() != trace.batch || d_a0.row_width() != self.action_dim {
            return Err(Error::Dimension(format!(
                "gradient shape {:?} does not match traced actions [{}, {}]",
                d_a0.shape(),
                trace.batch,
                self.action_dim
            )));
        }
        let mut upstream = d_a0.clone();
        for (v, &raw) in upstream.data_mut().iter_mut().zip(trace.a0_raw.data()) {
            if raw.abs() > ACTION_BOUND {
                *v = 0.0;
            }
        }

        let mut grads = Gradients::zeros_like(&self.eps_net);
        // Steps were recorded i = N..1; the last one produced a0.
        for step in trace.steps.iter().rev() {
            let i = step.i;
            let alpha = self.schedule.alpha(i);
            let beta = self.schedule.beta(i);
            let ab = self.schedule.alpha_bar(i);
            let inv_sqrt_alpha = 1.0 / alpha.sqrt();
            let coef = beta / (alpha * (1.0 - ab)).sqrt();

            // a_{i-1} = a_i/sqrt(alpha) - coef * eps_hat(a_i, s, i) + sigma z
            let mut d_eps = upstream.clone();
            for v in d_eps.data_mut() {
                *v *= -coef;
            }
            let (step_grads, d_input) = self.eps_net.backward(&step.tape, &d_eps)?;
            grads.add_assign(&step_grads);

            let mut d_a_i = Tensor::zeros(vec![trace.batch, self.action_dim]);
            for b in 0..trace.batch {
                let up = upstream.row(b);
                let din = d_input.row(b);
                let out = d_a_i.row_mut(b);
                for d in 0..self.action_dim {
                    out[d] = inv_sqrt_alpha * up[d] + din[d];
                }
            }
            upstream = d_a_i;
        }
        Ok(grads)
    }
}

impl ActionSampler for DiffusionPolicy {
    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample_action(state, rng)
            .expect("state dim checked by caller")
    }

    fn state_dim(&self) -> Option<usize> {
        Some(self.state_dim)
    }

    fn sample_batch(&self, states: &Tensor, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        let actions = self
            .sample_actions(states, rng)
            .expect("state dims checked by caller");
        (0..actions.batch_rows()).map(|b| actions.row(b).to_vec()).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyHeader {
    kind: String,
    schema_version: u32,
    state_dim: usize,
    action_dim: usize,
    embedding_dim: usize,
    net: crate::numgrad::NetSpec,
    n_steps: usize,
    beta_min: f64,
    beta_max: f64,
    adam: Option<AdamScalars>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdamScalars {
    step_count: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

const POLICY_KIND: &str = "ddm-lag/policy";
const POLICY_SCHEMA: u32 = 1;

/// Write a self-contained policy checkpoint: schedule constants, net shape,
/// flat parameters and (optionally) optimizer state.
pub fn save_policy(path: &Path, policy: &DiffusionPolicy, adam: Option<&AdamState>) -> Result<()> {
    let header = PolicyHeader {
        kind: POLICY_KIND.into(),
        schema_version: POLICY_SCHEMA,
        state_dim: policy.state_dim,
        action_dim: policy.action_dim,
        embedding_dim: policy.embedding.dim(),
        net: policy.eps_net.spec(),
        n_steps: policy.schedule.len(),
        beta_min: policy.schedule.beta_min(),
        beta_max: policy.schedule.beta_max(),
        adam: adam.map(|a| AdamScalars {
            step_count: a.step_count,
            learning_rate: a.learning_rate,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.epsilon,
        }),
    };
    let mut records = Vec::new();
    let mut params = Vec::new();
    storage::f64s_to_bytes(&policy.eps_net.flat_params(), &mut params);
    records.push(params);
    if let Some(a) = adam {
        let mut m = Vec::new();
        storage::f64s_to_bytes(&a.first_moment, &mut m);
        records.push(m);
        let mut v = Vec::new();
        storage::f64s_to_bytes(&a.second_moment, &mut v);
        records.push(v);
    }
    storage::write_container(path, &header, &records)
}

pub fn load_policy(path: &Path) -> Result<(DiffusionPolicy, Option<AdamState>)> {
    let display = path.display().to_string();
    let c: storage::Container<PolicyHeader> = storage::read_container(path)?;
    let h = c.header;
    if h.kind != POLICY_KIND {
        return Err(Error::Corrupt {
            path: display,
            detail: format!("not a policy checkpoint (kind {})", h.kind),
        });
    }
    if h.schema_version != POLICY_SCHEMA {
        return Err(Error::SchemaVersion {
            path: display,
            found: h.schema_version,
            supported: POLICY_SCHEMA,
        });
    }
    let param_count: usize = {
        let d = &h.net.dims;
        (0..d.len() - 1).map(|k| d[k] * d[k + 1] + d[k + 1]).sum()
    };
    let get = |idx: usize, name: &str| -> Result<&Vec<u8>> {
        c.records.get(idx).ok_or_else(|| Error::Corrupt {
            path: display.clone(),
            detail: format!("missing record {idx} ({name})"),
        })
    };
    let params = storage::ByteReader::new(get(0, "params")?)
        .f64s(param_count)
        .ok_or_else(|| Error::Corrupt {
            path: display.clone(),
            detail: "parameter record too short".into(),
        })?;
    let net = FeedforwardNetwork::from_spec_and_params(&h.net, &params)?;
    let schedule = VarianceSchedule::build(h.n_steps, h.beta_min, h.beta_max)?;
    let policy = DiffusionPolicy {
        eps_net: FeedforwardNetwork::zeros(&h.net.dims, crate::numgrad::Activation::Mish)?,
        schedule,
        embedding: TimestepEmbedding::new(h.embedding_dim)?,
        state_dim: h.state_dim,
        action_dim: h.action_dim,
    }
    .with_eps_net(net)?;

    let adam = match h.adam {
        None => None,
        Some(s) => {
            let m = storage::ByteReader::new(get(1, "adam m")?)
                .f64s(param_count)
                .ok_or_else(|| Error::Corrupt {
                    path: display.clone(),
                    detail: "adam first-moment record too short".into(),
                })?;
            let v = storage::ByteReader::new(get(2, "adam v")?)
                .f64s(param_count)
                .ok_or_else(|| Error::Corrupt {
                    path: display.clone(),
                    detail: "adam second-moment record too short".into(),
                })?;
            Some(AdamState {
                step_count: s.step_count,
                first_moment: m,
                second_moment: v,
                learning_rate: s.learning_rate,
                beta1: s.beta1,
                beta2: s.beta2,
                epsilon: s.epsilon,
            })
        }
    };
    Ok((policy, adam))
}
