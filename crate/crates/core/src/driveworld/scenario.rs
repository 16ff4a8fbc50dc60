//! Scenario definitions: road layout, traffic, obstacles, conflict zones.
//!
//! Scenarios serialize to TOML so custom tracks can be written by hand; the
//! three built-in presets cover a straight+curve route, an unsignalized
//! crossing and a long route chaining both.

use serde::{Deserialize, Serialize};

use crate::driveworld::geometry::Vec2;
use crate::driveworld::track::Polyline;
use crate::error::{Error, Result};

/// Spawn rate of scripted background traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficDensity {
    /// No random traffic (fixtures and clear-road tests).
    None,
    Low,
    High,
}

impl TrafficDensity {
    /// Expected vehicles per meter of lane.
    pub(crate) fn rate_per_meter(self) -> f64 {
        match self {
            TrafficDensity::None => 0.0,
            TrafficDensity::Low => 0.1 / 10.0,
            TrafficDensity::High => 0.2 / 10.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TrafficDensity::None),
            "low" => Ok(TrafficDensity::Low),
            "high" => Ok(TrafficDensity::High),
            other => Err(Error::Argument(format!(
                "unknown traffic density `{other}` (expected none|low|high)"
            ))),
        }
    }
}

impl std::fmt::Display for TrafficDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrafficDensity::None => "none",
            TrafficDensity::Low => "low",
            TrafficDensity::High => "high",
        })
    }
}

/// One road: a centerline polyline with a total paved width. Scripted
/// vehicles travel in polyline order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Road {
    pub points: Vec<[f64; 2]>,
    pub width: f64,
}

impl Road {
    pub fn polyline(&self) -> Result<Polyline> {
        Polyline::new(self.points.iter().map(|p| Vec2::new(p[0], p[1])).collect())
    }
}

/// Static rectangular obstacle (parked trailer, barrier, debris).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub half_len: f64,
    pub half_wid: f64,
    pub heading: f64,
}

/// Deterministically placed scripted vehicle, in addition to the random
/// density traffic. Used by collision fixtures and custom scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedVehicle {
    /// Index into `roads`.
    pub road: usize,
    /// Spawn arclength along the road.
    pub s: f64,
    /// Constant speed in m/s (0 = parked on the lane).
    pub speed: f64,
}

/// Conflict-zone polygon for post-encroachment-time measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictZone {
    pub polygon: Vec<[f64; 2]>,
}

impl ConflictZone {
    pub fn vertices(&self) -> Vec<Vec2> {
        self.polygon.iter().map(|p| Vec2::new(p[0], p[1])).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// `roads[0]` carries the ego route (its centerline).
    pub roads: Vec<Road>,
    /// Road indices that spawn density-controlled traffic.
    pub traffic_roads: Vec<usize>,
    pub density: TrafficDensity,
    pub scripted_vehicles: Vec<ScriptedVehicle>,
    pub obstacles: Vec<Obstacle>,
    pub conflict_zones: Vec<ConflictZone>,
    /// Spacing of navigation checkpoints along the route, meters.
    pub checkpoint_interval: f64,
    /// Arclength where the ego starts.
    pub ego_start: f64,
    pub timeout_steps: usize,
}

pub const PRESET_NAMES: [&str; 3] = ["straight_curve", "intersection", "long_route"];

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.roads.is_empty() {
            return Err(Error::Config("scenario has no roads".into()));
        }
        for (i, road) in self.roads.iter().enumerate() {
            if road.width <= 0.0 {
                return Err(Error::Config(format!("road {i} has non-positive width")));
            }
            road.polyline()
                .map_err(|e| Error::Config(format!("road {i}: {e}")))?;
        }
        for idx in &self.traffic_roads {
            if *idx >= self.roads.len() {
                return Err(Error::Config(format!("traffic road index {idx} out of range")));
            }
        }
        for (i, sv) in self.scripted_vehicles.iter().enumerate() {
            if sv.road >= self.roads.len() {
                return Err(Error::Config(format!(
                    "scripted vehicle {i} references road {} out of range",
                    sv.road
                )));
            }
        }
        let route = self.roads[0].polyline()?;
        if self.ego_start < 0.0 || self.ego_start >= route.length() {
            return Err(Error::Config(format!(
                "ego start {} outside route [0, {})",
                self.ego_start,
                route.length()
            )));
        }
        if self.checkpoint_interval <= 0.0 {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        if self.timeout_steps == 0 {
            return Err(Error::Config("timeout must be at least one step".into()));
        }
        Ok(())
    }

    /// Built-in preset by name.
    pub fn preset(name: &str, density: TrafficDensity) -> Result<Scenario> {
        match name {
            "straight_curve" => Ok(Self::straight_curve(density)),
            "intersection" => Ok(Self::intersection(density)),
            "long_route" => Ok(Self::long_route(density)),
            other => Err(Error::Argument(format!(
                "unknown scenario preset `{other}` (expected one of {PRESET_NAMES:?} or a .toml path)"
            ))),
        }
    }

    /// 100 m straight, 90-degree left curve of radius 50, 50 m straight.
    pub fn straight_curve(density: TrafficDensity) -> Scenario {
        let straight = Polyline::line(Vec2::ZERO, Vec2::new(100.0, 0.0)).unwrap();
        let curve = Polyline::arc(
            Vec2::new(100.0, 50.0),
            50.0,
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            2.0,
        )
        .unwrap();
        let tail = Polyline::line(Vec2::new(150.0, 50.0), Vec2::new(150.0, 100.0)).unwrap();
        let center = straight.then(&curve).unwrap().then(&tail).unwrap();
        Scenario {
            name: "straight_curve".into(),
            roads: vec![Road {
                points: center.points().iter().map(|p| [p.x, p.y]).collect(),
                width: 8.0,
            }],
            traffic_roads: vec![0],
            density,
            scripted_vehicles: vec![],
            obstacles: vec![],
            conflict_zones: vec![],
            checkpoint_interval: 15.0,
            ego_start: 2.0,
            timeout_steps: 900,
        }
    }

    /// Unsignalized crossing: ego drives east through north-bound traffic.
    pub fn intersection(density: TrafficDensity) -> Scenario {
        Scenario {
            name: "intersection".into(),
            roads: vec![
                Road {
                    points: vec![[-80.0, 0.0], [80.0, 0.0]],
                    width: 8.0,
                },
                Road {
                    points: vec![[0.0, -80.0], [0.0, 80.0]],
                    width: 8.0,
                },
            ],
            traffic_roads: vec![1],
            density,
            scripted_vehicles: vec![],
            obstacles: vec![],
            conflict_zones: vec![ConflictZone {
                polygon: vec![[-4.0, -4.0], [4.0, -4.0], [4.0, 4.0], [-4.0, 4.0]],
            }],
            checkpoint_interval: 15.0,
            ego_start: 2.0,
            timeout_steps: 600,
        }
    }

    /// Long test: straight + curve chained into a crossing, ~250 m total.
    pub fn long_route(density: TrafficDensity) -> Scenario {
        let leg1 = Polyline::line(Vec2::ZERO, Vec2::new(80.0, 0.0)).unwrap();
        let curve = Polyline::arc(
            Vec2::new(80.0, 40.0),
            40.0,
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            2.0,
        )
        .unwrap();
        let leg2 = Polyline::line(Vec2::new(120.0, 40.0), Vec2::new(120.0, 160.0)).unwrap();
        let center = leg1.then(&curve).unwrap().then(&leg2).unwrap();
        Scenario {
            name: "long_route".into(),
            roads: vec![
                Road {
                    points: center.points().iter().map(|p| [p.x, p.y]).collect(),
                    width: 8.0,
                },
                // Crossing road cutting the second leg at y = 80.
                Road {
                    points: vec![[40.0, 80.0], [200.0, 80.0]],
                    width: 8.0,
                },
            ],
            traffic_roads: vec![0, 1],
            density,
            scripted_vehicles: vec![],
            obstacles: vec![],
            conflict_zones: vec![ConflictZone {
                polygon: vec![[116.0, 76.0], [124.0, 76.0], [124.0, 84.0], [116.0, 84.0]],
            }],
            checkpoint_interval: 15.0,
            ego_start: 2.0,
            timeout_steps: 1500,
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("scenario serialization: {e}")))
    }

    pub fn from_toml_str(s: &str) -> Result<Scenario> {
        let sc: Scenario =
            toml::from_str(s).map_err(|e| Error::Config(format!("scenario parse: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Resolve a CLI scenario argument: preset name or path to a TOML file.
    pub fn resolve(arg: &str, density: TrafficDensity) -> Result<Scenario> {
        if PRESET_NAMES.contains(&arg) {
            return Self::preset(arg, density);
        }
        if arg.ends_with(".toml") {
            let mut sc = Self::load(std::path::Path::new(arg))?;
            sc.density = density;
            return Ok(sc);
        }
        Err(Error::Argument(format!(
            "unknown scenario `{arg}` (expected one of {PRESET_NAMES:?} or a .toml path)"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let sc = Scenario::preset(name, TrafficDensity::Low).unwrap();
            sc.validate().unwrap();
            assert_eq!(sc.name, name);
        }
        assert!(Scenario::preset("motorway", TrafficDensity::Low).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let sc = Scenario::intersection(TrafficDensity::High);
        let text = sc.to_toml_string().unwrap();
        let back = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(back.name, sc.name);
        assert_eq!(back.roads.len(), 2);
        assert_eq!(back.density, TrafficDensity::High);
        assert_eq!(back.conflict_zones.len(), 1);
        assert_eq!(back.roads[0].points, sc.roads[0].points);
    }

    #[test]
    fn validation_catches_bad_tracks() {
        let mut sc = Scenario::straight_curve(TrafficDensity::None);
        sc.roads[0].points = vec![[0.0, 0.0]];
        assert!(matches!(sc.validate(), Err(Error::Config(_))));

        let mut sc = Scenario::straight_curve(TrafficDensity::None);
        sc.traffic_roads = vec![5];
        assert!(sc.validate().is_err());

        let mut sc = Scenario::straight_curve(TrafficDensity::None);
        sc.ego_start = 1e9;
        assert!(sc.validate().is_err());
    }
}
