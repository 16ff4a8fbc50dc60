//! The CMDP driving world: kinematic ego vehicle, scripted traffic,
//! ray-cast perception, reward and safety cost.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::driveworld::geometry::{ray_rect, ray_segment, wrap_angle, OrientedRect, Vec2};
use crate::driveworld::scenario::Scenario;
use crate::driveworld::track::Polyline;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Physical limits and sensor layout. Observation dimensionality is a
/// function of this config, so datasets and checkpoints embed it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Integration step, seconds.
    pub dt: f64,
    /// Number of lidar rays over the full 360-degree sweep.
    pub lidar_rays: usize,
    /// Lidar (and neighbor sensing) range, meters.
    pub lidar_range: f64,
    /// Nearest-vehicle slots in the observation.
    pub neighbor_slots: usize,
    /// Maximum steering angle, radians.
    pub steer_max: f64,
    /// Maximum engine acceleration, m/s^2.
    pub force_max: f64,
    /// Maximum braking deceleration, m/s^2.
    pub brake_max: f64,
    /// Linear drag coefficient, 1/s.
    pub drag: f64,
    pub wheelbase: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Reference speed for the speed reward, m/s.
    pub speed_limit: f64,
    /// Reward per meter of route progress.
    pub progress_reward_per_meter: f64,
    /// Scale of the per-step speed reward.
    pub speed_reward: f64,
    /// Terminal reward on reaching the destination.
    pub terminal_reward: f64,
    /// Terminal penalty magnitude on crash / out-of-road.
    pub terminal_penalty: f64,
    /// Cost weights for the safety indicators.
    pub cost_out_of_road: f64,
    pub cost_vehicle_crash: f64,
    pub cost_object_crash: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            dt: 0.1,
            lidar_rays: 24,
            lidar_range: 50.0,
            neighbor_slots: 4,
            steer_max: 0.6,
            force_max: 3.0,
            brake_max: 5.0,
            drag: 0.25,
            wheelbase: 2.8,
            vehicle_length: 4.5,
            vehicle_width: 2.0,
            speed_limit: 10.0,
            progress_reward_per_meter: 1.0,
            speed_reward: 0.1,
            terminal_reward: 10.0,
            terminal_penalty: 5.0,
            cost_out_of_road: 1.0,
            cost_vehicle_crash: 5.0,
            cost_object_crash: 5.0,
        }
    }
}

impl WorldConfig {
    pub fn observation_dim(&self) -> usize {
        6 + 2 + self.lidar_rays + 4 * self.neighbor_slots
    }
}

/// Normalized 2D action in `[-1, 1]^2`: `a1` steers, `a2 > 0` accelerates,
/// `a2 < 0` brakes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCommand {
    pub a1: f64,
    pub a2: f64,
}

impl ActionCommand {
    /// Clamp into the action box (non-finite components become 0).
    pub fn new(a1: f64, a2: f64) -> Self {
        let sanitize = |v: f64| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
        ActionCommand {
            a1: sanitize(a1),
            a2: sanitize(a2),
        }
    }

    pub fn from_slice(a: &[f64]) -> Self {
        ActionCommand::new(a[0], a[1])
    }
}

/// Low-level controls produced by [`map_action`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

/// `u_s = S_max*a1`, `u_a = F_max*max(0, a2)`, `u_b = -B_max*min(0, a2)`.
/// Throttle and brake are mutually exclusive by construction.
pub fn map_action(cmd: ActionCommand, cfg: &WorldConfig) -> Controls {
    Controls {
        steer: cfg.steer_max * cmd.a1,
        throttle: cfg.force_max * cmd.a2.max(0.0),
        brake: -cfg.brake_max * cmd.a2.min(0.0),
    }
}

/// Pose and velocity of any vehicle in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Wrapped to `(-pi, pi]`.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn rect(&self) -> OrientedRect {
        OrientedRect {
            center: self.position(),
            half_len: self.length / 2.0,
            half_wid: self.width / 2.0,
            heading: self.heading,
        }
    }
}

/// Sensor snapshot fed to policies. Blocks are concatenated by [`Observation::to_vec`]
/// in the order ego, nav, lidar, neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `[x/100, y/100, vx/v_ref, vy/v_ref, heading/pi, dis_bound]` where
    /// `dis_bound` is meters of lateral margin to the nearest road edge.
    pub ego_block: [f64; 6],
    /// `[distance/range (clamped to 1), bearing/pi]` to the next checkpoint.
    pub nav_block: [f64; 2],
    /// Ray distances normalized to `[0, 1]`; index k points at
    /// `heading + 2*pi*k/R`.
    pub lidar_block: Vec<f64>,
    /// K nearest vehicles, each `[dx/range, dy/range, dvx/v_ref, dvy/v_ref]`
    /// in the ego frame; unused slots are exactly zero.
    pub neighbors_block: Vec<f64>,
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.ego_block);
        v.extend_from_slice(&self.nav_block);
        v.extend_from_slice(&self.lidar_block);
        v.extend_from_slice(&self.neighbors_block);
        v
    }

    pub fn dim(&self) -> usize {
        6 + 2 + self.lidar_block.len() + self.neighbors_block.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoneReason {
    Destination,
    Crash,
    OutOfRoad,
    Timeout,
}

impl std::fmt::Display for DoneReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DoneReason::Destination => "destination",
            DoneReason::Crash => "crash",
            DoneReason::OutOfRoad => "out_of_road",
            DoneReason::Timeout => "timeout",
        })
    }
}

/// Raw per-step safety indicators (the c1/c2/c3 events).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostFlags {
    pub out_of_road: bool,
    pub vehicle_crash: bool,
    pub object_crash: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub cost: f64,
    pub done: Option<DoneReason>,
    pub flags: CostFlags,
    /// Route progress gained this step, meters.
    pub progress_delta: f64,
}

impl StepOutcome {
    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }
}

#[derive(Debug, Clone)]
struct Npc {
    id: u32,
    road: usize,
    s: f64,
    speed: f64,
}

#[derive(Debug, Clone)]
struct Ego {
    pos: Vec2,
    heading: f64,
    speed: f64,
}

/// A deterministic world instance. Identical `(scenario, config, seed,
/// action sequence)` produce identical trajectories bitwise.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Scenario,
    cfg: WorldConfig,
    roads: Vec<Polyline>,
    route: Polyline,
    /// Road-edge segments for lidar, clipped where they cross another
    /// road's pavement.
    edges: Vec<(Vec2, Vec2)>,
    obstacles: Vec<OrientedRect>,
    ego: Ego,
    npcs: Vec<Npc>,
    seg_hint: usize,
    progress: f64,
    step_count: usize,
    done: Option<DoneReason>,
}

impl World {
    pub fn new(scenario: Scenario, cfg: WorldConfig) -> Result<World> {
        scenario.validate()?;
        if cfg.lidar_rays == 0 || cfg.dt <= 0.0 || cfg.lidar_range <= 0.0 {
            return Err(Error::Config("bad world config".into()));
        }
        let roads: Vec<Polyline> = scenario
            .roads
            .iter()
            .map(|r| r.polyline())
            .collect::<Result<_>>()?;
        let route = roads[0].clone();
        let edges = build_edges(&scenario, &roads);
        let obstacles = scenario
            .obstacles
            .iter()
            .map(|o| OrientedRect {
                center: Vec2::new(o.center[0], o.center[1]),
                half_len: o.half_len,
                half_wid: o.half_wid,
                heading: o.heading,
            })
            .collect();
        let mut world = World {
            ego: Ego {
                pos: route.point_at(scenario.ego_start),
                heading: route.heading_at(scenario.ego_start),
                speed: 0.0,
            },
            scenario,
            cfg,
            roads,
            route,
            edges,
            obstacles,
            npcs: Vec::new(),
            seg_hint: 0,
            progress: 0.0,
            step_count: 0,
            done: None,
        };
        world.reset(0);
        Ok(world)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn route_length(&self) -> f64 {
        self.route.length()
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }

    pub fn done_reason(&self) -> Option<DoneReason> {
        self.done
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn ego_state(&self) -> VehicleState {
        let vel = Vec2::from_angle(self.ego.heading).scale(self.ego.speed);
        VehicleState {
            x: self.ego.pos.x,
            y: self.ego.pos.y,
            vx: vel.x,
            vy: vel.y,
            heading: wrap_angle(self.ego.heading),
            length: self.cfg.vehicle_length,
            width: self.cfg.vehicle_width,
        }
    }

    /// Vehicles currently on their road (backlogged arrivals at negative
    /// arclength are not in the world yet).
    pub fn npc_states(&self) -> Vec<VehicleState> {
        self.active_npcs().map(|(_, st)| st).collect()
    }

    fn active_npcs(&self) -> impl Iterator<Item = (&Npc, VehicleState)> + '_ {
        self.npcs
            .iter()
            .filter(|n| n.s >= 0.0)
            .map(|n| (n, self.npc_state(n)))
    }

    fn npc_state(&self, npc: &Npc) -> VehicleState {
        let road = &self.roads[npc.road];
        let pos = road.point_at(npc.s);
        let heading = road.heading_at(npc.s);
        let vel = Vec2::from_angle(heading).scale(npc.speed);
        VehicleState {
            x: pos.x,
            y: pos.y,
            vx: vel.x,
            vy: vel.y,
            heading: wrap_angle(heading),
            length: self.cfg.vehicle_length,
            width: self.cfg.vehicle_width,
        }
    }

    /// Deterministic world state for `(scenario, seed)`: ego at the route
    /// start, scripted traffic laid out from the seed's stream.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.ego = Ego {
            pos: self.route.point_at(self.scenario.ego_start),
            heading: self.route.heading_at(self.scenario.ego_start),
            speed: 0.0,
        };
        self.seg_hint = 0;
        self.progress = self.scenario.ego_start;
        self.step_count = 0;
        self.done = None;
        self.npcs.clear();

        let mut next_id = 0u32;
        for sv in &self.scenario.scripted_vehicles {
            self.npcs.push(Npc {
                id: next_id,
                road: sv.road,
                s: sv.s,
                speed: sv.speed,
            });
            next_id += 1;
        }

        let rate = self.scenario.density.rate_per_meter();
        if rate > 0.0 {
            for &road_idx in &self.scenario.traffic_roads {
                let mut rng = stream(seed, Stream::World, road_idx as u64);
                let road_len = self.roads[road_idx].length();
                // On the ego's own road, spawn leads ahead only (the blind
                // lane followers would otherwise rear-end the ego). Other
                // roads get a virtual backlog at negative arclength so
                // traffic keeps arriving for the whole episode.
                let mut s = if road_idx == 0 {
                    self.scenario.ego_start + 30.0
                } else {
                    -(self.scenario.timeout_steps as f64 * self.cfg.dt)
                        * (0.65 * self.cfg.speed_limit)
                };
                const MIN_GAP: f64 = 20.0;
                loop {
                    let u: f64 = rng.random();
                    s += MIN_GAP - (1.0 - u).ln() / rate;
                    if s >= road_len - 10.0 {
                        break;
                    }
                    let speed = self.cfg.speed_limit * rng.random_range(0.35..0.65);
                    self.npcs.push(Npc {
                        id: next_id,
                        road: road_idx,
                        s,
                        speed,
                    });
                    next_id += 1;
                }
            }
        }
        self.observe()
    }

    /// Advance one control period. Errors if the episode already ended.
    pub fn step(&mut self, cmd: ActionCommand) -> Result<StepOutcome> {
        if let Some(reason) = self.done {
            return Err(Error::EpisodeOver {
                reason: reason.to_string(),
            });
        }
        let cmd = ActionCommand::new(cmd.a1, cmd.a2);
        let controls = map_action(cmd, &self.cfg);
        let dt = self.cfg.dt;

        // Kinematic bicycle with linear drag; forward Euler in the order
        // speed, heading, position. Speed never goes negative (no reverse).
        let accel = controls.throttle - controls.brake - self.cfg.drag * self.ego.speed;
        self.ego.speed = (self.ego.speed + accel * dt).max(0.0);
        self.ego.heading = wrap_angle(
            self.ego.heading + self.ego.speed * controls.steer.tan() / self.cfg.wheelbase * dt,
        );
        self.ego.pos = self.ego.pos + Vec2::from_angle(self.ego.heading).scale(self.ego.speed * dt);

        for npc in &mut self.npcs {
            npc.s += npc.speed * dt;
        }
        let roads = &self.roads;
        self.npcs.retain(|n| n.s < roads[n.road].length());

        // Route progress via local projection (stable on self-overlapping
        // routes).
        let proj = self.route.project_near(self.ego.pos, self.seg_hint, 3, 8);
        self.seg_hint = proj.segment;
        let progress_delta = proj.s - self.progress;
        self.progress = proj.s;

        // Safety events.
        let ego_rect = self.ego_state().rect();
        let vehicle_crash = self
            .active_npcs()
            .any(|(_, st)| ego_rect.overlaps(&st.rect()));
        let object_crash = self.obstacles.iter().any(|o| ego_rect.overlaps(o));
        let out_of_road = self.dis_bound() < 0.0;
        let flags = CostFlags {
            out_of_road,
            vehicle_crash,
            object_crash,
        };
        let cost = self.cost_value(flags);

        self.step_count += 1;
        let destination = self.progress >= self.route.length() - 1.0;
        let timeout = self.step_count >= self.scenario.timeout_steps;
        self.done = if vehicle_crash || object_crash {
            Some(DoneReason::Crash)
        } else if out_of_road {
            Some(DoneReason::OutOfRoad)
        } else if destination {
            Some(DoneReason::Destination)
        } else if timeout {
            Some(DoneReason::Timeout)
        } else {
            None
        };

        // Reward: progress + speed + terminal term.
        let terminal = match self.done {
            Some(DoneReason::Destination) => self.cfg.terminal_reward,
            Some(DoneReason::Crash) | Some(DoneReason::OutOfRoad) => -self.cfg.terminal_penalty,
            _ => 0.0,
        };
        let reward = self.cfg.progress_reward_per_meter * progress_delta
            + self.cfg.speed_reward * (self.ego.speed / self.cfg.speed_limit)
            + terminal;

        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            cost,
            done: self.done,
            flags,
            progress_delta,
        })
    }

    /// Weighted safety cost for a set of indicator flags.
    pub fn cost_value(&self, flags: CostFlags) -> f64 {
        self.cfg.cost_out_of_road * (flags.out_of_road as u8 as f64)
            + self.cfg.cost_vehicle_crash * (flags.vehicle_crash as u8 as f64)
            + self.cfg.cost_object_crash * (flags.object_crash as u8 as f64)
    }

    /// Margin to the nearest road edge: max over roads of
    /// `width/2 - distance to centerline`. Negative means off the pavement.
    pub fn dis_bound(&self) -> f64 {
        self.dis_bound_at(self.ego.pos)
    }

    fn dis_bound_at(&self, p: Vec2) -> f64 {
        self.roads
            .iter()
            .zip(&self.scenario.roads)
            .map(|(pl, road)| road.width / 2.0 - pl.project(p).dist)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Arclength of the next checkpoint given current progress.
    fn next_checkpoint_s(&self) -> f64 {
        let interval = self.scenario.checkpoint_interval;
        let next = (self.progress / interval).floor() * interval + interval;
        next.min(self.route.length())
    }

    /// Assemble the observation for the current state.
    pub fn observe(&self) -> Observation {
        let cfg = &self.cfg;
        let ego = self.ego_state();
        let heading = ego.heading;

        let ego_block = [
            ego.x / 100.0,
            ego.y / 100.0,
            ego.vx / cfg.speed_limit,
            ego.vy / cfg.speed_limit,
            heading / std::f64::consts::PI,
            self.dis_bound(),
        ];

        let ck = self.route.point_at(self.next_checkpoint_s());
        let to_ck = ck - self.ego.pos;
        let dist = to_ck.norm();
        let bearing = if dist > 1e-9 {
            wrap_angle(to_ck.angle() - heading)
        } else {
            0.0
        };
        let nav_block = [
            (dist / cfg.lidar_range).min(1.0),
            bearing / std::f64::consts::PI,
        ];

        let active: Vec<(u32, VehicleState)> =
            self.active_npcs().map(|(n, st)| (n.id, st)).collect();
        let npc_rects: Vec<OrientedRect> = active.iter().map(|(_, v)| v.rect()).collect();
        let mut lidar_block = Vec::with_capacity(cfg.lidar_rays);
        for k in 0..cfg.lidar_rays {
            let angle = heading + 2.0 * std::f64::consts::PI * k as f64 / cfg.lidar_rays as f64;
            let dir = Vec2::from_angle(angle);
            let mut best = cfg.lidar_range;
            for rect in npc_rects.iter().chain(self.obstacles.iter()) {
                if let Some(t) = ray_rect(self.ego.pos, dir, rect) {
                    best = best.min(t);
                }
            }
            for (a, b) in &self.edges {
                if let Some(t) = ray_segment(self.ego.pos, dir, *a, *b) {
                    best = best.min(t);
                }
            }
            lidar_block.push(best / cfg.lidar_range);
        }

        // K nearest vehicles by distance, ties broken by spawn id.
        let mut order: Vec<(f64, u32, usize)> = active
            .iter()
            .enumerate()
            .map(|(idx, (id, st))| (self.ego.pos.dist(st.position()), *id, idx))
            .filter(|(d, _, _)| *d <= cfg.lidar_range)
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        let mut neighbors_block = vec![0.0; 4 * cfg.neighbor_slots];
        let ego_vel = ego.velocity();
        for (slot, (_, _, idx)) in order.iter().take(cfg.neighbor_slots).enumerate() {
            let st = &active[*idx].1;
            let rel_pos = (st.position() - self.ego.pos).rotate(-heading);
            let rel_vel = (st.velocity() - ego_vel).rotate(-heading);
            neighbors_block[slot * 4] = rel_pos.x / cfg.lidar_range;
            neighbors_block[slot * 4 + 1] = rel_pos.y / cfg.lidar_range;
            neighbors_block[slot * 4 + 2] = rel_vel.x / cfg.speed_limit;
            neighbors_block[slot * 4 + 3] = rel_vel.y / cfg.speed_limit;
        }

        Observation {
            ego_block,
            nav_block,
            lidar_block,
            neighbors_block,
        }
    }

    /// Test hook: place the ego somewhere specific.
    #[cfg(test)]
    pub(crate) fn set_ego_pose(&mut self, pos: Vec2, heading: f64, speed: f64) {
        self.ego = Ego {
            pos,
            heading: wrap_angle(heading),
            speed,
        };
        let proj = self.route.project(pos);
        self.seg_hint = proj.segment;
        self.progress = proj.s;
    }
}

/// Offset each road's centerline into its two edge lines, subdivide into
/// ~1 m pieces and drop pieces lying on another road's pavement so that
/// junction mouths stay open.
fn build_edges(scenario: &Scenario, roads: &[Polyline]) -> Vec<(Vec2, Vec2)> {
    let mut edges = Vec::new();
    for (ri, pl) in roads.iter().enumerate() {
        let half = scenario.roads[ri].width / 2.0;
        for k in 0..pl.segment_count() {
            let (a, b) = pl.segment(k);
            let normal = (b - a).scale(1.0 / (b - a).norm()).left_normal();
            for side in [-1.0, 1.0] {
                let oa = a + normal.scale(side * half);
                let ob = b + normal.scale(side * half);
                let len = oa.dist(ob);
                let pieces = (len / 1.0).ceil().max(1.0) as usize;
                for p in 0..pieces {
                    let t0 = p as f64 / pieces as f64;
                    let t1 = (p + 1) as f64 / pieces as f64;
                    let pa = oa + (ob - oa).scale(t0);
                    let pb = oa + (ob - oa).scale(t1);
                    let mid = oa + (ob - oa).scale((t0 + t1) / 2.0);
                    let covered = roads.iter().enumerate().any(|(rj, other)| {
                        rj != ri && other.project(mid).dist < scenario.roads[rj].width / 2.0 - 1e-6
                    });
                    if !covered {
                        edges.push((pa, pb));
                    }
                }
            }
        }
    }
    edges
}
