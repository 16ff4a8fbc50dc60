use super::*;
use crate::driveworld::{Road, Scenario, TrafficDensity};
use crate::expert::{ExpertConfig, ScriptedExpert};
use rand::RngCore;

fn clear_straight() -> Scenario {
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

/// Always emits the same action.
struct ConstantPolicy([f64; 2]);

impl crate::traits::ActionSampler for ConstantPolicy {
    fn action_dim(&self) -> usize {
        2
    }

    fn sample(&self, _state: &[f64], _rng: &mut dyn RngCore) -> Vec<f64> {
        self.0.to_vec()
    }
}

#[test]
fn expert_on_clear_road_scores_zero_cost_and_full_safe_length() {
    let cfg = WorldConfig::default();
    let expert = ScriptedExpert::new(ExpertConfig::default(), cfg.clone());
    let scenario = clear_straight();
    let report = evaluate(&expert, &scenario, &cfg, 5, 11).unwrap();
    assert_eq!(report.aggregate.mean_cost, 0.0);
    assert_eq!(report.aggregate.crash_episodes, 0);
    let route_len = 200.0;
    for e in &report.episodes {
        assert_eq!(e.done_reason, DoneReason::Destination);
        assert_eq!(e.total_cost, 0.0);
        assert_eq!(e.safe_length, route_len);
    }
    assert_eq!(report.aggregate.mean_safe_length, route_len);
}

#[test]
fn immediate_offroad_policy_gets_zero_safe_length() {
    let cfg = WorldConfig::default();
    let steer_off = ConstantPolicy([1.0, 1.0]);
    let report = evaluate(&steer_off, &clear_straight(), &cfg, 4, 3).unwrap();
    for e in &report.episodes {
        assert_eq!(e.done_reason, DoneReason::OutOfRoad);
        assert!(e.total_cost > 0.0);
        assert_eq!(e.safe_length, 0.0);
    }
}

#[test]
fn same_seed_gives_identical_aggregates() {
    let cfg = WorldConfig::default();
    let expert = ScriptedExpert::new(ExpertConfig::default(), cfg.clone());
    let scenario = Scenario::preset("intersection", TrafficDensity::High).unwrap();
    let a = evaluate(&expert, &scenario, &cfg, 6, 42).unwrap();
    let b = evaluate(&expert, &scenario, &cfg, 6, 42).unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    let c = evaluate(&expert, &scenario, &cfg, 6, 43).unwrap();
    assert_ne!(a.to_csv_string(), c.to_csv_string());
}

#[test]
fn safe_length_never_exceeds_route_length_and_equality_is_tight() {
    let cfg = WorldConfig::default();
    let expert = ScriptedExpert::new(ExpertConfig::default(), cfg.clone());
    let scenario = Scenario::preset("intersection", TrafficDensity::High).unwrap();
    let route_len = 160.0;
    let report = evaluate(&expert, &scenario, &cfg, 20, 7).unwrap();
    let mut saw_violation = false;
    for e in &report.episodes {
        assert!(e.safe_length <= route_len + 1e-9);
        let full = (e.safe_length - route_len).abs() < 1e-9;
        let clean_arrival = e.total_cost == 0.0 && e.done_reason == DoneReason::Destination;
        assert_eq!(full, clean_arrival, "episode {}", e.index);
        if e.total_cost > 0.0 {
            saw_violation = true;
            assert_eq!(e.safe_length, 0.0);
        }
    }
    assert!(saw_violation, "fixture should include at least one violation");
}

#[test]
fn aggregates_are_permutation_invariant() {
    let cfg = WorldConfig::default();
    let expert = ScriptedExpert::new(ExpertConfig::default(), cfg.clone());
    let scenario = Scenario::preset("intersection", TrafficDensity::High).unwrap();
    let report = evaluate(&expert, &scenario, &cfg, 8, 5).unwrap();
    let mut shuffled = report.episodes.clone();
    shuffled.reverse();
    shuffled.swap(0, 3);
    let a = EvalAggregate::from_records(&report.episodes);
    let b = EvalAggregate::from_records(&shuffled);
    assert_eq!(a, b);
}

#[test]
fn csv_has_one_row_per_episode_plus_aggregate() {
    let cfg = WorldConfig::default();
    let expert = ScriptedExpert::new(ExpertConfig::default(), cfg.clone());
    let report = evaluate(&expert, &clear_straight(), &cfg, 3, 1).unwrap();
    let csv = report.to_csv_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1); // header + episodes + aggregate
    assert!(lines[0].starts_with("episode,"));
    assert!(lines.last().unwrap().starts_with("aggregate,"));
}

#[test]
fn dimension_mismatch_is_rejected() {
    let cfg = WorldConfig::default();
    // An expert built for a different lidar layout reports a different
    // observation width.
    let mut other = cfg.clone();
    other.lidar_rays = 12;
    let expert = ScriptedExpert::new(ExpertConfig::default(), other);
    let err = evaluate(&expert, &clear_straight(), &cfg, 2, 1);
    assert!(matches!(err, Err(crate::Error::Dimension(_))));
}

#[test]
fn intersection_episodes_collect_interaction_metrics() {
    let cfg = WorldConfig::default();
    let expert = ScriptedExpert::new(ExpertConfig::default(), cfg.clone());
    let scenario = Scenario::preset("intersection", TrafficDensity::High).unwrap();
    let report = evaluate(&expert, &scenario, &cfg, 20, 9).unwrap();
    // Cross traffic exists, so some episode must have a finite minimum TTC
    // and the conflict zone must log PET events.
    assert!(report.aggregate.mean_min_ttc.is_finite());
    assert!(report.aggregate.pet_event_count > 0);
    assert!(report.aggregate.mean_pet.is_finite());
}
