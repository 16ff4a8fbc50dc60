//! 2D primitives: vectors, oriented rectangles, ray casts, swept contact.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2 {
            x: theta.cos(),
            y: theta.sin(),
        }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise rotation.
    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2 {
            x: self.x * k,
            y: self.y * k,
        }
    }

    /// Left-hand unit normal assuming `self` is a direction.
    pub fn left_normal(self) -> Vec2 {
        Vec2 {
            x: -self.y,
            y: self.x,
        }
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if w == -std::f64::consts::PI {
        w = std::f64::consts::PI;
    }
    w
}

/// Rectangle with arbitrary heading, used for vehicles and obstacles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub half_len: f64,
    pub half_wid: f64,
    pub heading: f64,
}

impl OrientedRect {
    pub fn corners(&self) -> [Vec2; 4] {
        let fwd = Vec2::from_angle(self.heading).scale(self.half_len);
        let side = Vec2::from_angle(self.heading).left_normal().scale(self.half_wid);
        [
            self.center + fwd + side,
            self.center + fwd - side,
            self.center - fwd - side,
            self.center - fwd + side,
        ]
    }

    fn axes(&self) -> [Vec2; 2] {
        let fwd = Vec2::from_angle(self.heading);
        [fwd, fwd.left_normal()]
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in self.corners() {
            let p = c.dot(axis);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        (lo, hi)
    }

    /// Separating-axis overlap test; touching counts as overlap.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        for axis in self.axes().into_iter().chain(other.axes()) {
            let (a_lo, a_hi) = self.project(axis);
            let (b_lo, b_hi) = other.project(axis);
            if a_hi < b_lo || b_hi < a_lo {
                return false;
            }
        }
        true
    }
}

/// Ray/segment intersection distance along the ray direction (`dir` must be
/// unit length for the result to be metric).
pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let s = b - a;
    let denom = dir.cross(s);
    if denom.abs() < 1e-12 {
        return None;
    }
    let ao = a - origin;
    let t = ao.cross(s) / denom;
    let u = ao.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Nearest ray hit on a rectangle boundary.
pub fn ray_rect(origin: Vec2, dir: Vec2, rect: &OrientedRect) -> Option<f64> {
    let c = rect.corners();
    let mut best: Option<f64> = None;
    for k in 0..4 {
        if let Some(t) = ray_segment(origin, dir, c[k], c[(k + 1) % 4]) {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    }
    best
}

/// Point-in-convex-polygon (vertices in consistent winding order).
pub fn point_in_convex_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let mut sign = 0i8;
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let c = (b - a).cross(p - a);
        if c.abs() < 1e-12 {
            continue;
        }
        let s = if c > 0.0 { 1 } else { -1 };
        if sign == 0 {
            sign = s;
        } else if s != sign {
            return false;
        }
    }
    true
}

/// Earliest contact time of two oriented rectangles under constant
/// velocities, or `None` if they never touch within `horizon` seconds.
///
/// With fixed orientations the face normals of both rectangles are a
/// complete separating-axis set at every instant, so intersecting the
/// per-axis overlap intervals in time is exact.
pub fn swept_first_contact(
    a: &OrientedRect,
    vel_a: Vec2,
    b: &OrientedRect,
    vel_b: Vec2,
    horizon: f64,
) -> Option<f64> {
    let rel = vel_b - vel_a;
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (a_lo, a_hi) = a.project(axis);
        let (b_lo, b_hi) = b.project(axis);
        let v = rel.dot(axis);
        if v.abs() < 1e-12 {
            if a_hi < b_lo || b_hi < a_lo {
                return None;
            }
            continue;
        }
        let t1 = (a_lo - b_hi) / v;
        let t2 = (a_hi - b_lo) / v;
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        t_enter = t_enter.max(lo);
        t_exit = t_exit.min(hi);
    }
    if t_enter > t_exit || t_exit < 0.0 {
        return None;
    }
    let contact = t_enter.max(0.0);
    if contact > horizon {
        None
    } else {
        Some(contact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_facing_segment() {
        let t = ray_segment(
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(5.0, -1.0),
            Vec2::new(5.0, 1.0),
        );
        assert_eq!(t, Some(5.0));
        // Pointing away: no hit.
        assert_eq!(
            ray_segment(
                Vec2::ZERO,
                Vec2::new(-1.0, 0.0),
                Vec2::new(5.0, -1.0),
                Vec2::new(5.0, 1.0)
            ),
            None
        );
    }

    #[test]
    fn ray_rect_near_face() {
        let rect = OrientedRect {
            center: Vec2::new(10.0, 0.0),
            half_len: 2.0,
            half_wid: 1.0,
            heading: 0.0,
        };
        let t = ray_rect(Vec2::ZERO, Vec2::new(1.0, 0.0), &rect).unwrap();
        assert!((t - 8.0).abs() < 1e-12);
    }

    #[test]
    fn swept_contact_head_on_1d() {
        // Gap of 20 m closing at 4 m/s: contact after 5 s.
        let a = OrientedRect {
            center: Vec2::ZERO,
            half_len: 2.25,
            half_wid: 1.0,
            heading: 0.0,
        };
        let b = OrientedRect {
            center: Vec2::new(20.0 + 4.5, 0.0),
            half_len: 2.25,
            half_wid: 1.0,
            heading: 0.0,
        };
        let t = swept_first_contact(&a, Vec2::new(4.0, 0.0), &b, Vec2::ZERO, 100.0).unwrap();
        assert_eq!(t, 5.0);
    }

    #[test]
    fn swept_contact_diverging_or_parallel() {
        let a = OrientedRect {
            center: Vec2::ZERO,
            half_len: 2.0,
            half_wid: 1.0,
            heading: 0.0,
        };
        let b = OrientedRect {
            center: Vec2::new(30.0, 0.0),
            half_len: 2.0,
            half_wid: 1.0,
            heading: 0.0,
        };
        // Moving apart.
        assert_eq!(
            swept_first_contact(&a, Vec2::ZERO, &b, Vec2::new(3.0, 0.0), 100.0),
            None
        );
        // Zero closing speed at a finite gap.
        assert_eq!(swept_first_contact(&a, Vec2::ZERO, &b, Vec2::ZERO, 100.0), None);
    }

    #[test]
    fn point_in_polygon_square() {
        let square = [
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
        ];
        assert!(point_in_convex_polygon(Vec2::ZERO, &square));
        assert!(!point_in_convex_polygon(Vec2::new(2.0, 0.0), &square));
    }

    fn arb_rect() -> impl Strategy<Value = OrientedRect> {
        (
            -20.0f64..20.0,
            -20.0f64..20.0,
            0.5f64..4.0,
            0.5f64..3.0,
            -3.2f64..3.2,
        )
            .prop_map(|(x, y, hl, hw, h)| OrientedRect {
                center: Vec2::new(x, y),
                half_len: hl,
                half_wid: hw,
                heading: h,
            })
    }

    proptest! {
        #[test]
        fn overlap_is_symmetric(a in arb_rect(), b in arb_rect()) {
            prop_assert_eq!(a.overlaps(&b), b.overlaps(&a));
        }

        #[test]
        fn swept_contact_invariant_under_rigid_motion(
            a in arb_rect(),
            b in arb_rect(),
            vax in -5.0f64..5.0, vay in -5.0f64..5.0,
            vbx in -5.0f64..5.0, vby in -5.0f64..5.0,
            shift_x in -50.0f64..50.0, shift_y in -50.0f64..50.0,
            rot in -3.0f64..3.0,
        ) {
            let va = Vec2::new(vax, vay);
            let vb = Vec2::new(vbx, vby);
            let base = swept_first_contact(&a, va, &b, vb, 50.0);

            let shift = Vec2::new(shift_x, shift_y);
            let move_rect = |r: &OrientedRect| OrientedRect {
                center: r.center.rotate(rot) + shift,
                half_len: r.half_len,
                half_wid: r.half_wid,
                heading: r.heading + rot,
            };
            let moved = swept_first_contact(
                &move_rect(&a), va.rotate(rot),
                &move_rect(&b), vb.rotate(rot),
                50.0,
            );
            match (base, moved) {
                (None, None) => {},
                (Some(t1), Some(t2)) => prop_assert!((t1 - t2).abs() < 1e-6, "{t1} vs {t2}"),
                other => prop_assert!(false, "mismatch: {:?}", other),
            }
        }
    }
}
