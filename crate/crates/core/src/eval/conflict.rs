//! Traffic-conflict metrics: time to collision and post-encroachment time.

use crate::driveworld::geometry::{point_in_convex_polygon, Vec2};
use crate::driveworld::{swept_first_contact, VehicleState};

/// Synchronized per-step snapshot of the other vehicles; each entry is
/// `(vehicle id, state)`.
pub type NeighborSnapshot = Vec<(u32, VehicleState)>;

/// Minimum time to collision over an episode under constant-velocity
/// extrapolation, `f64::INFINITY` when no pair ever converges.
///
/// Per step, the gap between the two oriented rectangles is swept along the
/// relative velocity; the first-contact time is the TTC for that pair.
pub fn compute_ttc(ego_track: &[VehicleState], neighbor_tracks: &[NeighborSnapshot], horizon: f64) -> f64 {
    let mut min_ttc = f64::INFINITY;
    for (ego, neighbors) in ego_track.iter().zip(neighbor_tracks) {
        for (_, other) in neighbors {
            if let Some(t) =
                swept_first_contact(&ego.rect(), ego.velocity(), &other.rect(), other.velocity(), horizon)
            {
                min_ttc = min_ttc.min(t);
            }
        }
    }
    min_ttc
}

/// Generic convex-polygon overlap (separating axes from both edge sets).
fn convex_overlap(a: &[Vec2], b: &[Vec2]) -> bool {
    let project = |poly: &[Vec2], axis: Vec2| -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in poly {
            let v = p.dot(axis);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    };
    for poly in [a, b] {
        for k in 0..poly.len() {
            let edge = poly[(k + 1) % poly.len()] - poly[k];
            let axis = edge.left_normal();
            let (a_lo, a_hi) = project(a, axis);
            let (b_lo, b_hi) = project(b, axis);
            if a_hi < b_lo || b_hi < a_lo {
                return false;
            }
        }
    }
    true
}

fn occupies(v: &VehicleState, zone: &[Vec2]) -> bool {
    // Cheap reject first; vertices are well inside lidar scale.
    if zone.is_empty() {
        return false;
    }
    let corners = v.rect().corners();
    if corners.iter().any(|c| point_in_convex_polygon(*c, zone)) {
        return true;
    }
    convex_overlap(&corners, zone)
}

#[derive(Debug, Clone, Copy)]
struct Traversal {
    vehicle: u32,
    enter_step: usize,
    exit_step: usize,
}

/// Post-encroachment times for one conflict zone.
///
/// A traversal is a maximal run of steps where a vehicle's rectangle
/// overlaps the zone. For every ordered pair of traversals by different
/// vehicles where B enters after A exits (within `horizon` seconds), the
/// PET is the time difference; simultaneous occupancy records a zero.
pub fn compute_pet(
    ego_track: &[VehicleState],
    neighbor_tracks: &[NeighborSnapshot],
    zone: &[Vec2],
    dt: f64,
    horizon: f64,
) -> Vec<f64> {
    const EGO_ID: u32 = u32::MAX;
    let steps = ego_track.len();

    // Occupancy per vehicle id, in first-seen order for determinism.
    let mut ids: Vec<u32> = vec![EGO_ID];
    for snap in neighbor_tracks {
        for (id, _) in snap {
            if !ids.contains(id) {
                ids.push(*id);
            }
        }
    }

    let mut traversals: Vec<Traversal> = Vec::new();
    for &id in &ids {
        let mut inside_since: Option<usize> = None;
        for step in 0..steps {
            let state = if id == EGO_ID {
                Some(ego_track[step])
            } else {
                neighbor_tracks[step]
                    .iter()
                    .find(|(nid, _)| *nid == id)
                    .map(|(_, st)| *st)
            };
            let inside = state.map(|st| occupies(&st, zone)).unwrap_or(false);
            match (inside, inside_since) {
                (true, None) => inside_since = Some(step),
                (false, Some(start)) => {
                    traversals.push(Traversal {
                        vehicle: id,
                        enter_step: start,
                        exit_step: step - 1,
                    });
                    inside_since = None;
                }
                _ => {}
            }
        }
        if let Some(start) = inside_since {
            traversals.push(Traversal {
                vehicle: id,
                enter_step: start,
                exit_step: steps - 1,
            });
        }
    }
    traversals.sort_by_key(|t| (t.enter_step, t.vehicle));

    let mut events = Vec::new();
    for (i, a) in traversals.iter().enumerate() {
        for b in &traversals[i + 1..] {
            if a.vehicle == b.vehicle {
                continue;
            }
            if b.enter_step <= a.exit_step {
                // Simultaneous occupancy: a conflict with zero clearance.
                events.push(0.0);
            } else {
                let pet = (b.enter_step - a.exit_step) as f64 * dt;
                if pet <= horizon {
                    events.push(pet);
                }
            }
        }
    }
    events
}
