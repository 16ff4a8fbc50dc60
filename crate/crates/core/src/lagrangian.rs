//! PID-controlled Lagrange multiplier.
//!
//! The multiplier is recomputed from the constraint violation each update:
//!
//! ```text
//! delta      = J_C - d                 (violation)
//! derivative = (J_C - J_C_prev)_+      (rate of increase)
//! I          = (I + delta)_+           (clamped running integral)
//! lambda     = (Kp*delta + Ki*I + Kd*derivative)_+
//! ```
//!
//! Both the integral and the multiplier are clamped at zero, so the
//! constraint can only ever push the policy toward lower cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Gains used throughout the experiments here.
    pub const DEFAULT: PidGains = PidGains {
        kp: 0.1,
        ki: 0.003,
        kd: 0.001,
    };

    pub const ZERO: PidGains = PidGains {
        kp: 0.0,
        ki: 0.0,
        kd: 0.0,
    };
}

/// Multiplier state carried between epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub gains: PidGains,
    /// Cost budget d.
    pub cost_limit: f64,
    pub lambda: f64,
    pub integral: f64,
    pub prev_cost: f64,
}

/// Per-update internals, logged to the training report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidUpdate {
    pub delta: f64,
    pub derivative: f64,
    pub integral: f64,
    pub lambda: f64,
}

impl PidState {
    pub fn new(gains: PidGains, cost_limit: f64, lambda0: f64) -> Result<Self> {
        if gains.kp < 0.0 || gains.ki < 0.0 || gains.kd < 0.0 {
            return Err(Error::Config(format!("PID gains must be non-negative, got {gains:?}")));
        }
        if lambda0 < 0.0 {
            return Err(Error::Config(format!("lambda0 must be non-negative, got {lambda0}")));
        }
        if !cost_limit.is_finite() {
            return Err(Error::Config("cost limit must be finite".into()));
        }
        Ok(PidState {
            gains,
            cost_limit,
            lambda: lambda0,
            integral: 0.0,
            prev_cost: 0.0,
        })
    }

    /// Feed one epoch's cost estimate through the controller.
    ///
    /// On a non-finite cost the state is left untouched.
    pub fn update_lambda(&mut self, episode_cost: f64) -> Result<PidUpdate> {
        if !episode_cost.is_finite() || episode_cost < 0.0 {
            return Err(Error::Argument(format!(
                "episode cost must be finite and non-negative, got {episode_cost}"
            )));
        }
        let delta = episode_cost - self.cost_limit;
        let derivative = (episode_cost - self.prev_cost).max(0.0);
        self.integral = (self.integral + delta).max(0.0);
        self.lambda =
            (self.gains.kp * delta + self.gains.ki * self.integral + self.gains.kd * derivative).max(0.0);
        self.prev_cost = episode_cost;
        Ok(PidUpdate {
            delta,
            derivative,
            integral: self.integral,
            lambda: self.lambda,
        })
    }
}
