//! Rollout evaluation: per-episode records, safety metrics and the
//! aggregate table written to `metrics.csv`.

mod conflict;

pub use conflict::{compute_pet, compute_ttc, NeighborSnapshot};

use rand::Rng;
use rayon::prelude::*;

use crate::driveworld::{ActionCommand, DoneReason, Scenario, VehicleState, World, WorldConfig};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::traits::ActionSampler;

/// Constant-velocity extrapolation horizon for TTC, seconds.
pub const TTC_HORIZON: f64 = 20.0;
/// Only traversal pairs this close in time count as PET events, seconds.
pub const PET_HORIZON: f64 = 10.0;

/// Everything recorded about one evaluation episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub index: usize,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub done_reason: DoneReason,
    pub ego_track: Vec<VehicleState>,
    pub npc_tracks: Vec<NeighborSnapshot>,
    pub total_reward: f64,
    pub total_cost: f64,
    /// Route progress gained, meters.
    pub distance: f64,
    /// Meters driven safely; zero if the episode had any violation, the
    /// full route length on a clean arrival.
    pub safe_length: f64,
    pub mean_speed: f64,
    pub min_ttc: f64,
    pub pet_events: Vec<f64>,
}

/// Order-independent aggregates over the episode records.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalAggregate {
    pub episodes: usize,
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub mean_safe_length: f64,
    pub mean_distance: f64,
    pub mean_steps: f64,
    pub mean_speed: f64,
    /// Mean of the finite per-episode minimum TTCs (infinite if none).
    pub mean_min_ttc: f64,
    pub pet_event_count: usize,
    /// Mean over all PET events (infinite sentinel when there are none).
    pub mean_pet: f64,
    pub crash_episodes: usize,
}

/// Mean that is bitwise invariant to input order: values are totally
/// ordered before summation.
pub fn stable_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

impl EvalAggregate {
    pub fn from_records(records: &[EpisodeRecord]) -> EvalAggregate {
        let collect = |f: &dyn Fn(&EpisodeRecord) -> f64| -> Vec<f64> {
            records.iter().map(f).collect()
        };
        let finite_ttc: Vec<f64> = records.iter().map(|r| r.min_ttc).filter(|t| t.is_finite()).collect();
        let mut pets: Vec<f64> = records.iter().flat_map(|r| r.pet_events.iter().copied()).collect();
        pets.sort_by(f64::total_cmp);
        EvalAggregate {
            episodes: records.len(),
            mean_reward: stable_mean(&collect(&|r| r.total_reward)),
            mean_cost: stable_mean(&collect(&|r| r.total_cost)),
            mean_safe_length: stable_mean(&collect(&|r| r.safe_length)),
            mean_distance: stable_mean(&collect(&|r| r.distance)),
            mean_steps: stable_mean(&collect(&|r| r.rewards.len() as f64)),
            mean_speed: stable_mean(&collect(&|r| r.mean_speed)),
            mean_min_ttc: if finite_ttc.is_empty() {
                f64::INFINITY
            } else {
                stable_mean(&finite_ttc)
            },
            pet_event_count: pets.len(),
            mean_pet: if pets.is_empty() {
                f64::INFINITY
            } else {
                stable_mean(&pets)
            },
            crash_episodes: records
                .iter()
                .filter(|r| matches!(r.done_reason, DoneReason::Crash | DoneReason::OutOfRoad))
                .count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeRecord>,
    pub aggregate: EvalAggregate,
}

/// Roll `episodes` seeded episodes of `policy` through the scenario and
/// compute all metrics. Episodes run in parallel; results are identical to
/// a sequential run.
pub fn evaluate(
    policy: &(dyn ActionSampler + Sync),
    scenario: &Scenario,
    world_cfg: &WorldConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::Argument("evaluation needs at least one episode".into()));
    }
    scenario.validate()?;
    if let Some(dim) = policy.state_dim() {
        if dim != world_cfg.observation_dim() {
            return Err(Error::Dimension(format!(
                "policy expects {dim}-dim observations, scenario produces {}",
                world_cfg.observation_dim()
            )));
        }
    }

    let zone: Vec<crate::driveworld::Vec2> = scenario
        .conflict_zones
        .first()
        .map(|z| z.vertices())
        .unwrap_or_default();

    let records: Vec<EpisodeRecord> = (0..episodes)
        .into_par_iter()
        .map(|index| {
            let mut world =
                World::new(scenario.clone(), world_cfg.clone()).expect("scenario validated");
            let mut rng = stream(seed, Stream::Eval, index as u64);
            let world_seed: u64 = rng.random();
            let mut obs = world.reset(world_seed);
            let start_progress = world.progress();

            let mut rewards = Vec::new();
            let mut costs = Vec::new();
            let mut ego_track = Vec::new();
            let mut npc_tracks = Vec::new();
            let done_reason;
            loop {
                let a = policy.sample(&obs.to_vec(), &mut rng);
                let out = world.step(ActionCommand::from_slice(&a)).expect("live episode");
                rewards.push(out.reward);
                costs.push(out.cost);
                ego_track.push(world.ego_state());
                npc_tracks.push(
                    world
                        .npc_states()
                        .into_iter()
                        .enumerate()
                        .map(|(i, st)| (i as u32, st))
                        .collect(),
                );
                if let Some(reason) = out.done {
                    done_reason = reason;
                    break;
                }
                obs = out.observation;
            }

            let total_reward: f64 = rewards.iter().sum();
            let total_cost: f64 = costs.iter().sum();
            let distance = world.progress() - start_progress;
            let safe_length = if total_cost > 0.0 {
                0.0
            } else if done_reason == DoneReason::Destination {
                world.route_length()
            } else {
                distance
            };
            let mean_speed = stable_mean(&ego_track.iter().map(|v| v.speed()).collect::<Vec<_>>());
            let min_ttc = compute_ttc(&ego_track, &npc_tracks, TTC_HORIZON);
            let pet_events = if zone.is_empty() {
                Vec::new()
            } else {
                compute_pet(&ego_track, &npc_tracks, &zone, world_cfg.dt, PET_HORIZON)
            };

            EpisodeRecord {
                index,
                rewards,
                costs,
                done_reason,
                ego_track,
                npc_tracks,
                total_reward,
                total_cost,
                distance,
                safe_length,
                mean_speed,
                min_ttc,
                pet_events,
            }
        })
        .collect();

    let aggregate = EvalAggregate::from_records(&records);
    Ok(EvalReport {
        episodes: records,
        aggregate,
    })
}

pub const METRICS_COLUMNS: [&str; 11] = [
    "episode",
    "total_reward",
    "total_cost",
    "safe_length",
    "distance",
    "steps",
    "mean_speed",
    "done_reason",
    "min_ttc",
    "pet_count",
    "min_pet",
];

impl EvalReport {
    /// One row per episode plus a trailing aggregate row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&METRICS_COLUMNS.join(","));
        out.push('\n');
        for r in &self.episodes {
            let min_pet = r.pet_events.iter().copied().fold(f64::INFINITY, f64::min);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.index,
                r.total_reward,
                r.total_cost,
                r.safe_length,
                r.distance,
                r.rewards.len(),
                r.mean_speed,
                r.done_reason,
                r.min_ttc,
                r.pet_events.len(),
                min_pet
            ));
        }
        let a = &self.aggregate;
        out.push_str(&format!(
            "aggregate,{},{},{},{},{},{},crashes={},{},{},{}\n",
            a.mean_reward,
            a.mean_cost,
            a.mean_safe_length,
            a.mean_distance,
            a.mean_steps,
            a.mean_speed,
            a.crash_episodes,
            a.mean_min_ttc,
            a.pet_event_count,
            a.mean_pet
        ));
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests;
