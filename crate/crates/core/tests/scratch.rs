// Temporary diagnostics; removed before finalizing.
use ddm_lag::driveworld::{Scenario, TrafficDensity, WorldConfig};
use ddm_lag::expert::{collect, CollectOptions, ExpertConfig};

#[test]
#[ignore]
fn expert_stats() {
    for (name, density) in [
        ("straight_curve", TrafficDensity::Low),
        ("straight_curve", TrafficDensity::High),
        ("intersection", TrafficDensity::Low),
        ("intersection", TrafficDensity::High),
        ("long_route", TrafficDensity::Low),
        ("long_route", TrafficDensity::High),
    ] {
        let sc = Scenario::preset(name, density).unwrap();
        let ds = collect(
            &sc,
            &WorldConfig::default(),
            &ExpertConfig::default(),
            &CollectOptions::new(100, 9),
        )
        .unwrap();
        let ranges = ds.episode_ranges();
        let mean_len: f64 = ranges.iter().map(|r| r.len() as f64).sum::<f64>() / ranges.len() as f64;
        let mean_reward: f64 = ranges
            .iter()
            .map(|r| ds.transitions[r.clone()].iter().map(|t| t.reward).sum::<f64>())
            .sum::<f64>()
            / ranges.len() as f64;
        let mean_cost: f64 = ranges
            .iter()
            .map(|r| ds.transitions[r.clone()].iter().map(|t| t.cost).sum::<f64>())
            .sum::<f64>()
            / ranges.len() as f64;
        let timeouts = ranges
            .iter()
            .filter(|r| {
                let last = &ds.transitions[r.end - 1];
                last.done && last.cost == 0.0 && last.reward < 5.0
            })
            .count();
        println!(
            "{name:>14}/{density}: episodes=100 crash={} timeout~={timeouts} mean_len={mean_len:.0} mean_R={mean_reward:.1} mean_C={mean_cost:.2} transitions={}",
            ds.meta.crash_episodes,
            ds.len()
        );
    }
}

#[test]
#[ignore]
fn spawn_debug() {
    use ddm_lag::driveworld::World;
    let sc = Scenario::preset("intersection", TrafficDensity::High).unwrap();
    let mut w = World::new(sc, WorldConfig::default()).unwrap();
    for seed in 0..10u64 {
        w.reset(seed);
        let npcs = w.npc_states();
        println!("seed {seed}: {} npcs: {:?}", npcs.len(), npcs.iter().map(|v| (v.x.round(), v.y.round(), (v.speed()*10.0).round()/10.0)).collect::<Vec<_>>());
    }
}

#[test]
#[ignore]
fn conflict_debug() {
    use ddm_lag::driveworld::{ActionCommand, World};
    use ddm_lag::expert::ScriptedExpert;
    let sc = Scenario::preset("intersection", TrafficDensity::High).unwrap();
    let cfg = WorldConfig::default();
    let expert = ScriptedExpert::new(ExpertConfig::default(), cfg.clone());
    let mut hist = [0usize; 6]; // <2, <4, <6, <10, <20, >=20
    for e in 0..100usize {
        let mut w = World::new(sc.clone(), cfg.clone()).unwrap();
        let mut obs = w.reset(ddm_lag::expert::episode_seed(9, e));
        let mut min_d = f64::INFINITY;
        loop {
            let ego = w.ego_state();
            for n in w.npc_states() {
                let d = ((ego.x - n.x).powi(2) + (ego.y - n.y).powi(2)).sqrt();
                min_d = min_d.min(d);
            }
            let a = expert.act(&obs);
            let out = w.step(ActionCommand::new(a.a1, a.a2)).unwrap();
            let done = out.is_done();
            obs = out.observation;
            if done { break; }
        }
        let slot = if min_d < 2.0 {0} else if min_d < 4.0 {1} else if min_d < 6.0 {2} else if min_d < 10.0 {3} else if min_d < 20.0 {4} else {5};
        hist[slot] += 1;
    }
    println!("min-dist histogram [<2,<4,<6,<10,<20,>=20]: {hist:?}");
}

#[test]
#[ignore]
fn collapse_convergence() {
    use ddm_lag::expert::collect as dcollect;
    use ddm_lag::driveworld::Road;
    use ddm_lag::lagrangian::PidGains;
    use ddm_lag::trainer::{train, TrainConfig};
    use ddm_lag::rng::{stream, Stream};

    let sc = Scenario {
        name: "straight_test".into(),
        roads: vec![Road { points: vec![[0.0,0.0],[200.0,0.0]], width: 8.0 }],
        traffic_roads: vec![0],
        density: TrafficDensity::None,
        scripted_vehicles: vec![],
        obstacles: vec![],
        conflict_zones: vec![],
        checkpoint_interval: 15.0,
        ego_start: 2.0,
        timeout_steps: 400,
    };
    let mut dataset = dcollect(&sc, &WorldConfig::default(), &ExpertConfig::default(), &CollectOptions::new(2, 5)).unwrap();
    let target = [0.4, -0.3];
    for t in &mut dataset.transitions { t.action = target.to_vec(); }

    for (epochs, lr, hidden, batch) in [(1200usize, 1e-3, 32usize, 64usize), (3000, 2e-3, 48, 128), (5000, 2e-3, 64, 128)] {
        let cfg = TrainConfig {
            epochs, batch_size: batch, hidden_dim: hidden, embedding_dim: 8,
            actor_lr: lr, eta: 0.0, pid: PidGains::ZERO, eval_interval: 100000, eval_episodes: 1, seed: 3,
            ..TrainConfig::default()
        };
        let out = train(&dataset, &cfg).unwrap();
        let loss = out.report.rows.last().unwrap().loss_bc;
        let mut rng = stream(9, Stream::Eval, 0);
        let mut worst: f64 = 0.0;
        let mut mse = 0.0;
        let n = 200;
        for k in 0..n {
            let t = &dataset.transitions[k % dataset.len()];
            let s: Vec<f64> = t.state.iter().map(|&v| v as f64).collect();
            let a = out.policy.sample_action(&s, &mut rng).unwrap();
            for d in 0..2 {
                worst = worst.max((a[d] - target[d]).abs());
                mse += (a[d] - target[d]).powi(2) / (2.0 * n as f64);
            }
        }
        println!("epochs={epochs} lr={lr} hidden={hidden} batch={batch}: loss={loss:.4} Linf={worst:.4} MSE={mse:.5}");
    }
}
