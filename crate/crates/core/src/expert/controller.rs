use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::driveworld::{geometry::wrap_angle, ActionCommand, Observation, WorldConfig};
use crate::traits::ActionSampler;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpertConfig {
    /// Cruise speed target, m/s.
    pub target_speed: f64,
    /// Proportional gain from speed error (m/s) to normalized throttle.
    pub speed_gain: f64,
    /// Full brake when any forward-cone ray reads below this normalized
    /// distance.
    pub brake_threshold: f64,
    /// Half-angle of the forward cone, radians.
    pub cone_half_angle: f64,
    /// Recorded in dataset metadata.
    pub version: u32,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        // At the default 24-ray layout the cone covers the straight-ahead
        // ray only. Wider cones pick up the vehicle's own lane edges on
        // curves (a 15-degree ray meets the outer edge of the preset curve
        // at ~0.22 of range) and stall the controller.
        ExpertConfig {
            target_speed: 6.0,
            speed_gain: 0.5,
            brake_threshold: 0.21,
            cone_half_angle: 0.1,
            version: 1,
        }
    }
}

/// Deterministic controller driving from observations alone.
#[derive(Debug, Clone)]
pub struct ScriptedExpert {
    cfg: ExpertConfig,
    world: WorldConfig,
}

impl ScriptedExpert {
    pub fn new(cfg: ExpertConfig, world: WorldConfig) -> Self {
        ScriptedExpert { cfg, world }
    }

    pub fn config(&self) -> &ExpertConfig {
        &self.cfg
    }

    pub fn act(&self, obs: &Observation) -> ActionCommand {
        let w = &self.world;
        let speed = obs.ego_block[2].hypot(obs.ego_block[3]) * w.speed_limit;
        let dist = (obs.nav_block[0] * w.lidar_range).max(1.0);
        let bearing = obs.nav_block[1] * std::f64::consts::PI;

        // Pure pursuit: curvature toward the checkpoint, converted to a
        // front-wheel angle through the bicycle geometry.
        let curvature = 2.0 * bearing.sin() / dist;
        let steer = (w.wheelbase * curvature).atan();
        let a1 = (steer / w.steer_max).clamp(-1.0, 1.0);

        let mut a2 = (self.cfg.speed_gain * (self.cfg.target_speed - speed)).clamp(-1.0, 1.0);
        if self.min_forward_ray(&obs.lidar_block) < self.cfg.brake_threshold {
            a2 = -1.0;
        }
        ActionCommand::new(a1, a2)
    }

    /// Smallest normalized ray within the forward cone.
    fn min_forward_ray(&self, lidar: &[f64]) -> f64 {
        let rays = lidar.len();
        let mut min = f64::INFINITY;
        for (k, &v) in lidar.iter().enumerate() {
            let angle = wrap_angle(2.0 * std::f64::consts::PI * k as f64 / rays as f64);
            if angle.abs() <= self.cfg.cone_half_angle + 1e-9 {
                min = min.min(v);
            }
        }
        min
    }

    /// Parse a flat observation vector back into blocks (the inverse of
    /// [`Observation::to_vec`] for this world config).
    pub fn act_flat(&self, obs: &[f64]) -> ActionCommand {
        let r = self.world.lidar_rays;
        let obs = Observation {
            ego_block: obs[0..6].try_into().expect("observation too short"),
            nav_block: obs[6..8].try_into().expect("observation too short"),
            lidar_block: obs[8..8 + r].to_vec(),
            neighbors_block: obs[8 + r..].to_vec(),
        };
        self.act(&obs)
    }
}

impl ActionSampler for ScriptedExpert {
    fn action_dim(&self) -> usize {
        2
    }

    fn sample(&self, state: &[f64], _rng: &mut dyn RngCore) -> Vec<f64> {
        let a = self.act_flat(state);
        vec![a.a1, a.a2]
    }

    fn state_dim(&self) -> Option<usize> {
        Some(self.world.observation_dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driveworld::{
        Obstacle, Road, Scenario, TrafficDensity, World,
    };

    fn expert() -> ScriptedExpert {
        ScriptedExpert::new(ExpertConfig::default(), WorldConfig::default())
    }

    fn straight_scenario() -> Scenario {
        Scenario {
            name: "straight_test".into(),
            roads: vec![Road {
                points: vec![[0.0, 0.0], [200.0, 0.0]],
                width: 8.0,
            }],
            traffic_roads: vec![0],
            density: TrafficDensity::None,
            scripted_vehicles: vec![],
            obstacles: vec![],
            conflict_zones: vec![],
            checkpoint_interval: 15.0,
            ego_start: 2.0,
            timeout_steps: 900,
        }
    }

    #[test]
    fn aligned_cruise_steers_straight_and_accelerates() {
        let mut w = World::new(straight_scenario(), WorldConfig::default()).unwrap();
        let obs = w.reset(0);
        let a = expert().act(&obs);
        assert!(a.a1.abs() < 0.05, "steer {}", a.a1);
        assert!(a.a2 > 0.5, "throttle {}", a.a2);
    }

    #[test]
    fn obstacle_at_fifth_of_range_forces_full_brake() {
        let mut sc = straight_scenario();
        // Near face 10 m ahead: forward ray reads 0.2, under the 0.25
        // threshold.
        sc.obstacles = vec![Obstacle {
            center: [2.0 + 10.0 + 1.0, 0.0],
            half_len: 1.0,
            half_wid: 1.0,
            heading: 0.0,
        }];
        let mut w = World::new(sc, WorldConfig::default()).unwrap();
        let obs = w.reset(0);
        assert!((obs.lidar_block[0] - 0.2).abs() < 1e-12);
        let a = expert().act(&obs);
        assert_eq!(a.a2, -1.0);
    }

    #[test]
    fn checkpoint_hard_left_saturates_steering_positive() {
        // Bearing +90 degrees at 5 m: pure-pursuit wheel angle exceeds the
        // limit, so a1 rails at +1 (positive steer turns left).
        let obs = Observation {
            ego_block: [0.0, 0.0, 0.0, 0.0, 0.0, 4.0],
            nav_block: [5.0 / 50.0, 0.5],
            lidar_block: vec![1.0; 24],
            neighbors_block: vec![0.0; 16],
        };
        let a = expert().act(&obs);
        assert_eq!(a.a1, 1.0);

        // Mirror case saturates negative.
        let obs = Observation {
            nav_block: [5.0 / 50.0, -0.5],
            ..obs
        };
        assert_eq!(expert().act(&obs).a1, -1.0);
    }

    #[test]
    fn flat_parsing_matches_block_form() {
        let mut w = World::new(straight_scenario(), WorldConfig::default()).unwrap();
        let obs = w.reset(3);
        let e = expert();
        let from_blocks = e.act(&obs);
        let from_flat = e.act_flat(&obs.to_vec());
        assert_eq!(from_blocks, from_flat);
    }
}
