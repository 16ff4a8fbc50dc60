use std::path::Path;

use crate::error::{Error, Result};

/// One per-epoch row of the training log. Evaluation columns carry the most
/// recent rollout results, so every row is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss_bc: f64,
    pub loss_q: f64,
    /// The weighted constraint term `lambda * (mean Q^C - d)`.
    pub loss_cost_weighted: f64,
    pub critic_reward_loss: f64,
    pub critic_cost_loss: f64,
    pub lambda: f64,
    pub delta: f64,
    pub integral: f64,
    pub derivative: f64,
    pub eval_mean_reward: f64,
    pub eval_mean_cost: f64,
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "epoch",
    "loss_bc",
    "loss_q",
    "loss_cost_weighted",
    "critic_reward_loss",
    "critic_cost_loss",
    "lambda",
    "delta",
    "integral",
    "derivative",
    "eval_mean_reward",
    "eval_mean_cost",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
}

impl TrainReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&REPORT_COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.loss_bc,
                r.loss_q,
                r.loss_cost_weighted,
                r.critic_reward_loss,
                r.critic_cost_loss,
                r.lambda,
                r.delta,
                r.integral,
                r.derivative,
                r.eval_mean_reward,
                r.eval_mean_cost
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// All loss/metric entries finite (the per-row invariant).
    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            [
                r.loss_bc,
                r.loss_q,
                r.loss_cost_weighted,
                r.critic_reward_loss,
                r.critic_cost_loss,
                r.lambda,
                r.delta,
                r.integral,
                r.derivative,
                r.eval_mean_reward,
                r.eval_mean_cost,
            ]
            .iter()
            .all(|v| v.is_finite())
        })
    }
}
