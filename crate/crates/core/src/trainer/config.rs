use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::PidGains;

/// Which training variant to run. Ablations zero out the corresponding
/// objective terms and are otherwise the same loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Full method: behavior cloning + Q-guidance + Lagrangian cost term.
    #[default]
    None,
    /// Behavior cloning only (no critics, no guidance, no multiplier).
    BcOnly,
    /// Behavior cloning + Q-guidance without the safety multiplier.
    NoLag,
}

impl Ablation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "bc-only" => Ok(Ablation::BcOnly),
            "no-lag" => Ok(Ablation::NoLag),
            other => Err(Error::Argument(format!(
                "unknown ablation `{other}` (expected none|bc-only|no-lag)"
            ))),
        }
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ablation::None => "none",
            Ablation::BcOnly => "bc-only",
            Ablation::NoLag => "no-lag",
        })
    }
}

/// Hyperparameters for one training run. The file format is TOML with
/// exactly these field names; CLI flags override file values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Gradient steps (one minibatch per epoch).
    pub epochs: usize,
    pub batch_size: usize,
    /// Discount factor for both critics.
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Polyak coefficient on the target side: `target <- rho*target +
    /// (1-rho)*live`, i.e. each update mixes in `1-rho` of the live net.
    pub rho: f64,
    /// Diffusion chain length.
    pub n_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Q-guidance strength; the loss uses `eta / mean|Q|`.
    pub eta: f64,
    pub pid: PidGains,
    /// Cost budget d.
    pub cost_limit: f64,
    /// Initial Lagrange multiplier.
    pub lambda0: f64,
    /// Run evaluation rollouts (and the multiplier update) every this many
    /// epochs.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Hidden width of all three networks (two hidden layers each).
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub seed: u64,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5000,
            batch_size: 256,
            gamma: 0.99,
            actor_lr: 1e-3,
            critic_lr: 3e-4,
            rho: 0.995,
            n_steps: 5,
            beta_min: 0.1,
            beta_max: 10.0,
            eta: 1.0,
            pid: PidGains::DEFAULT,
            cost_limit: 10.0,
            lambda0: 0.0,
            eval_interval: 50,
            eval_episodes: 10,
            hidden_dim: 64,
            embedding_dim: 16,
            seed: 0,
            ablation: Ablation::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.epochs >= 1, "epochs must be >= 1")?;
        check(self.batch_size >= 1, "batch_size must be >= 1")?;
        check(
            self.gamma > 0.0 && self.gamma < 1.0,
            "gamma must be in (0, 1)",
        )?;
        check(self.actor_lr > 0.0, "actor_lr must be positive")?;
        check(self.critic_lr > 0.0, "critic_lr must be positive")?;
        check(self.rho > 0.0 && self.rho < 1.0, "rho must be in (0, 1)")?;
        check(self.n_steps >= 1, "n_steps must be >= 1")?;
        check(self.eta >= 0.0, "eta must be non-negative")?;
        check(self.lambda0 >= 0.0, "lambda0 must be non-negative")?;
        check(self.eval_interval >= 1, "eval_interval must be >= 1")?;
        check(self.eval_episodes >= 1, "eval_episodes must be >= 1")?;
        check(self.hidden_dim >= 1, "hidden_dim must be >= 1")?;
        check(
            self.embedding_dim >= 2 && self.embedding_dim % 2 == 0,
            "embedding_dim must be even and >= 2",
        )?;
        check(
            self.pid.kp >= 0.0 && self.pid.ki >= 0.0 && self.pid.kd >= 0.0,
            "PID gains must be non-negative",
        )?;
        // Schedule parameters are validated by the schedule constructor.
        crate::diffusion::VarianceSchedule::build(self.n_steps, self.beta_min, self.beta_max)?;
        Ok(())
    }

    /// Fold an ablation choice into the config (zeroing the corresponding
    /// terms) and remember it.
    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        match ablation {
            Ablation::None => {}
            Ablation::BcOnly => {
                self.eta = 0.0;
                self.pid = PidGains::ZERO;
                self.lambda0 = 0.0;
            }
            Ablation::NoLag => {
                self.pid = PidGains::ZERO;
                self.lambda0 = 0.0;
            }
        }
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("config serialization: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = TrainConfig::default();
        let text = cfg.to_toml_string().unwrap();
        let back = TrainConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.epochs, cfg.epochs);
        assert_eq!(back.pid, cfg.pid);

        // Partial files fall back to defaults for missing keys.
        let partial = TrainConfig::from_toml_str("epochs = 10\neta = 0.5\n").unwrap();
        assert_eq!(partial.epochs, 10);
        assert_eq!(partial.eta, 0.5);
        assert_eq!(partial.batch_size, 256);
    }

    #[test]
    fn ablations_zero_the_right_terms() {
        let bc = TrainConfig::default().with_ablation(Ablation::BcOnly);
        assert_eq!(bc.eta, 0.0);
        assert_eq!(bc.pid, PidGains::ZERO);
        let nolag = TrainConfig::default().with_ablation(Ablation::NoLag);
        assert_eq!(nolag.eta, 1.0);
        assert_eq!(nolag.pid, PidGains::ZERO);
        assert_eq!(nolag.lambda0, 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = TrainConfig::default();
        cfg.gamma = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.beta_min = -1.0;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::from_toml_str("epochs = 0").is_err());
    }
}
