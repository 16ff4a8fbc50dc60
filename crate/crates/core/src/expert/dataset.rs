use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driveworld::{DoneReason, Scenario, World, WorldConfig};
use crate::error::{Error, Result};
use crate::expert::{ExpertConfig, ScriptedExpert};
use crate::rng::{stream, Stream};
use crate::storage;

/// One `(s, a, r, c, s', done)` tuple. Observations are stored at sensor
/// precision (f32); actions, rewards and costs keep full precision so
/// stored episodes replay exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    pub next_state: Vec<f32>,
    pub done: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub kind: String,
    pub scenario_name: String,
    /// Full scenario definition, so a dataset is replayable on its own.
    pub scenario_toml: String,
    pub density: String,
    pub world_config: WorldConfig,
    pub expert_version: u32,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub episodes: usize,
    pub transitions: usize,
    /// Episode e was rolled out with world seed `episode_seed(seed, e)`.
    pub seed: u64,
    pub crash_episodes: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryDataset {
    pub meta: DatasetMeta,
    pub transitions: Vec<Transition>,
}

const DATASET_KIND: &str = "ddm-lag/dataset";
const DATASET_SCHEMA: u32 = 1;

/// World seed for one collection episode.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    stream(seed, Stream::Collect, episode as u64).random()
}

#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Record a metadata warning when the expert's unsafe-termination rate
    /// exceeds this fraction.
    pub crash_warn_threshold: f64,
}

impl CollectOptions {
    pub fn new(episodes: usize, seed: u64) -> Self {
        CollectOptions {
            episodes,
            seed,
            crash_warn_threshold: 0.2,
        }
    }
}

/// Roll the scripted expert through `episodes` seeded episodes and record
/// every transition. Episodes run in parallel; output is identical to the
/// sequential order.
pub fn collect(
    scenario: &Scenario,
    world_cfg: &WorldConfig,
    expert_cfg: &ExpertConfig,
    opts: &CollectOptions,
) -> Result<TrajectoryDataset> {
    if opts.episodes == 0 {
        return Err(Error::Argument("collection needs at least one episode".into()));
    }
    scenario.validate()?;

    let episodes: Vec<(Vec<Transition>, DoneReason)> = (0..opts.episodes)
        .into_par_iter()
        .map(|e| {
            let mut world = World::new(scenario.clone(), world_cfg.clone())
                .expect("scenario validated above");
            let expert = ScriptedExpert::new(expert_cfg.clone(), world_cfg.clone());
            let mut obs = world.reset(episode_seed(opts.seed, e));
            let mut transitions = Vec::new();
            loop {
                let cmd = expert.act(&obs);
                let out = world.step(cmd).expect("stepping a live episode");
                transitions.push(Transition {
                    state: obs.to_vec().iter().map(|&v| v as f32).collect(),
                    action: vec![cmd.a1, cmd.a2],
                    reward: out.reward,
                    cost: out.cost,
                    next_state: out.observation.to_vec().iter().map(|&v| v as f32).collect(),
                    done: out.is_done(),
                });
                obs = out.observation;
                if let Some(reason) = out.done {
                    return (transitions, reason);
                }
            }
        })
        .collect();

    let crash_episodes = episodes
        .iter()
        .filter(|(_, r)| matches!(r, DoneReason::Crash | DoneReason::OutOfRoad))
        .count();
    let mut warnings = Vec::new();
    let crash_rate = crash_episodes as f64 / opts.episodes as f64;
    if crash_rate > opts.crash_warn_threshold {
        warnings.push(format!(
            "expert unsafe-termination rate {crash_rate:.3} exceeds threshold {:.3}",
            opts.crash_warn_threshold
        ));
    }

    let transitions: Vec<Transition> = episodes.into_iter().flat_map(|(t, _)| t).collect();
    let obs_dim = world_cfg.observation_dim();
    let meta = DatasetMeta {
        schema_version: DATASET_SCHEMA,
        kind: DATASET_KIND.into(),
        scenario_name: scenario.name.clone(),
        scenario_toml: scenario.to_toml_string()?,
        density: scenario.density.to_string(),
        world_config: world_cfg.clone(),
        expert_version: expert_cfg.version,
        obs_dim,
        action_dim: 2,
        episodes: opts.episodes,
        transitions: transitions.len(),
        seed: opts.seed,
        crash_episodes,
        warnings,
    };
    Ok(TrajectoryDataset { meta, transitions })
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Reject datasets whose dimensions don't match what the consumer
    /// expects (e.g. a policy or scenario with a different sensor layout).
    pub fn check_compat(&self, obs_dim: usize, action_dim: usize) -> Result<()> {
        if self.meta.obs_dim != obs_dim || self.meta.action_dim != action_dim {
            return Err(Error::Dimension(format!(
                "dataset is {}-dim obs / {}-dim actions, consumer expects {obs_dim}/{action_dim}",
                self.meta.obs_dim, self.meta.action_dim
            )));
        }
        Ok(())
    }

    /// Episode boundaries reconstructed from the done flags.
    pub fn episode_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut ranges = Vec::new();
        let mut start = 0;
        for (i, t) in self.transitions.iter().enumerate() {
            if t.done {
                ranges.push(start..i + 1);
                start = i + 1;
            }
        }
        ranges
    }

    /// The scenario this dataset was collected on.
    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::from_toml_str(&self.meta.scenario_toml)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let records: Vec<Vec<u8>> = self
            .transitions
            .iter()
            .map(|t| {
                let mut buf = Vec::with_capacity(4 * t.state.len() * 2 + 8 * (t.action.len() + 2) + 1);
                storage::f32s_to_bytes(&t.state, &mut buf);
                storage::f64s_to_bytes(&t.action, &mut buf);
                buf.extend_from_slice(&t.reward.to_le_bytes());
                buf.extend_from_slice(&t.cost.to_le_bytes());
                storage::f32s_to_bytes(&t.next_state, &mut buf);
                buf.push(t.done as u8);
                buf
            })
            .collect();
        storage::write_container(path, &self.meta, &records)
    }

    pub fn load(path: &Path) -> Result<TrajectoryDataset> {
        let display = path.display().to_string();
        let c: storage::Container<DatasetMeta> = storage::read_container(path)?;
        let meta = c.header;
        if meta.kind != DATASET_KIND {
            return Err(Error::Corrupt {
                path: display,
                detail: format!("not a dataset file (kind {})", meta.kind),
            });
        }
        if meta.schema_version != DATASET_SCHEMA {
            return Err(Error::SchemaVersion {
                path: display,
                found: meta.schema_version,
                supported: DATASET_SCHEMA,
            });
        }
        if c.records.len() != meta.transitions {
            return Err(Error::Corrupt {
                path: display,
                detail: format!(
                    "header claims {} transitions, file has {}",
                    meta.transitions,
                    c.records.len()
                ),
            });
        }
        let mut transitions = Vec::with_capacity(c.records.len());
        for (i, rec) in c.records.iter().enumerate() {
            let mut r = storage::ByteReader::new(rec);
            let mut parse = || -> Option<Transition> {
                Some(Transition {
                    state: r.f32s(meta.obs_dim)?,
                    action: r.f64s(meta.action_dim)?,
                    reward: r.f64()?,
                    cost: r.f64()?,
                    next_state: r.f32s(meta.obs_dim)?,
                    done: r.u8()? != 0,
                })
            };
            let t = parse().ok_or_else(|| Error::Corrupt {
                path: display.clone(),
                detail: format!("transition record {i} has wrong length"),
            })?;
            transitions.push(t);
        }
        let episodes_found = transitions.iter().filter(|t| t.done).count();
        if episodes_found != meta.episodes {
            return Err(Error::Corrupt {
                path: display,
                detail: format!(
                    "header claims {} episodes, done flags mark {episodes_found}",
                    meta.episodes
                ),
            });
        }
        Ok(TrajectoryDataset { meta, transitions })
    }
}
