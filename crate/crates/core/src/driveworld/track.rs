//! Polylines with arclength bookkeeping: lane centerlines and the ego route.

use crate::driveworld::geometry::Vec2;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Polyline {
    pts: Vec<Vec2>,
    /// Cumulative arclength at each point; `cum[0] == 0`.
    cum: Vec<f64>,
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    /// Arclength of the closest point.
    pub s: f64,
    /// Signed lateral offset (positive to the left of travel direction).
    pub lateral: f64,
    /// Unsigned distance.
    pub dist: f64,
    pub segment: usize,
}

impl Polyline {
    pub fn new(pts: Vec<Vec2>) -> Result<Self> {
        if pts.len() < 2 {
            return Err(Error::Config("polyline needs at least two points".into()));
        }
        let mut cum = Vec::with_capacity(pts.len());
        cum.push(0.0);
        for k in 1..pts.len() {
            let d = pts[k].dist(pts[k - 1]);
            if d < 1e-9 {
                return Err(Error::Config(format!("degenerate segment at index {k}")));
            }
            cum.push(cum[k - 1] + d);
        }
        Ok(Polyline { pts, cum })
    }

    /// Straight segment from `a` to `b`.
    pub fn line(a: Vec2, b: Vec2) -> Result<Self> {
        Polyline::new(vec![a, b])
    }

    /// Circular arc sampled every `max_step` meters. Positive sweep turns
    /// counter-clockwise.
    pub fn arc(center: Vec2, radius: f64, start_angle: f64, sweep: f64, max_step: f64) -> Result<Self> {
        if radius <= 0.0 || sweep == 0.0 || max_step <= 0.0 {
            return Err(Error::Config("bad arc parameters".into()));
        }
        let arc_len = radius * sweep.abs();
        let steps = (arc_len / max_step).ceil().max(1.0) as usize;
        let pts = (0..=steps)
            .map(|k| {
                let a = start_angle + sweep * k as f64 / steps as f64;
                center + Vec2::from_angle(a).scale(radius)
            })
            .collect();
        Polyline::new(pts)
    }

    /// Concatenate, skipping the duplicated joint point.
    pub fn then(mut self, other: &Polyline) -> Result<Self> {
        let joint = *self.pts.last().unwrap();
        let start = if joint.dist(other.pts[0]) < 1e-6 { 1 } else { 0 };
        for p in &other.pts[start..] {
            self.pts.push(*p);
        }
        Polyline::new(self.pts)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.pts
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.pts.len() - 1
    }

    pub fn segment(&self, k: usize) -> (Vec2, Vec2) {
        (self.pts[k], self.pts[k + 1])
    }

    /// Point at arclength `s` (clamped to the polyline).
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let k = self.segment_index(s);
        let (a, b) = self.segment(k);
        let seg_len = self.cum[k + 1] - self.cum[k];
        let t = (s - self.cum[k]) / seg_len;
        a + (b - a).scale(t)
    }

    /// Travel direction at arclength `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        let k = self.segment_index(s);
        let (a, b) = self.segment(k);
        (b - a).angle()
    }

    fn segment_index(&self, s: f64) -> usize {
        // cum is sorted; find the segment containing s.
        match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(self.pts.len() - 2),
            Err(k) => (k - 1).min(self.pts.len() - 2),
        }
    }

    fn project_segment(&self, p: Vec2, k: usize) -> Projection {
        let (a, b) = self.segment(k);
        let ab = b - a;
        let len2 = ab.norm2();
        let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
        let closest = a + ab.scale(t);
        let diff = p - closest;
        let dist = diff.norm();
        let dir = ab.scale(1.0 / len2.sqrt());
        Projection {
            s: self.cum[k] + t * (self.cum[k + 1] - self.cum[k]),
            lateral: dir.cross(diff),
            dist,
            segment: k,
        }
    }

    /// Global projection: closest point over all segments (lowest index on
    /// ties).
    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = self.project_segment(p, 0);
        for k in 1..self.segment_count() {
            let cand = self.project_segment(p, k);
            if cand.dist < best.dist {
                best = cand;
            }
        }
        best
    }

    /// Local projection searching a window of segments around `hint`,
    /// keeping route progress stable on self-overlapping layouts.
    pub fn project_near(&self, p: Vec2, hint: usize, back: usize, ahead: usize) -> Projection {
        let lo = hint.saturating_sub(back);
        let hi = (hint + ahead).min(self.segment_count() - 1);
        let mut best = self.project_segment(p, lo);
        for k in lo + 1..=hi {
            let cand = self.project_segment(p, k);
            if cand.dist < best.dist {
                best = cand;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_arclength_and_projection() {
        let pl = Polyline::line(Vec2::ZERO, Vec2::new(100.0, 0.0)).unwrap();
        assert_eq!(pl.length(), 100.0);
        let p = pl.project(Vec2::new(30.0, -2.5));
        assert!((p.s - 30.0).abs() < 1e-12);
        assert!((p.lateral + 2.5).abs() < 1e-12);
        assert!((p.dist - 2.5).abs() < 1e-12);
        assert_eq!(pl.heading_at(50.0), 0.0);
    }

    #[test]
    fn lateral_sign_follows_travel_direction() {
        // Heading +x: left is +y.
        let pl = Polyline::line(Vec2::ZERO, Vec2::new(10.0, 0.0)).unwrap();
        assert!(pl.project(Vec2::new(5.0, 1.0)).lateral > 0.0);
        // Heading -x: left is -y.
        let pl = Polyline::line(Vec2::new(10.0, 0.0), Vec2::ZERO).unwrap();
        assert!(pl.project(Vec2::new(5.0, 1.0)).lateral < 0.0);
    }

    #[test]
    fn arc_length_close_to_analytic() {
        let quarter = Polyline::arc(
            Vec2::new(0.0, 50.0),
            50.0,
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            2.0,
        )
        .unwrap();
        let analytic = 50.0 * std::f64::consts::FRAC_PI_2;
        assert!((quarter.length() - analytic).abs() / analytic < 1e-3);
    }

    #[test]
    fn chained_polylines_share_joints() {
        let a = Polyline::line(Vec2::ZERO, Vec2::new(10.0, 0.0)).unwrap();
        let b = Polyline::line(Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)).unwrap();
        let c = a.then(&b).unwrap();
        assert_eq!(c.points().len(), 3);
        assert!((c.length() - 20.0).abs() < 1e-12);
        let p = c.point_at(15.0);
        assert!((p.x - 10.0).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12);
    }

    #[test]
    fn local_projection_prefers_the_hinted_region() {
        // A route that comes back near itself: a U shape.
        let route = Polyline::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(100.0, 0.0),
            Vec2::new(100.0, 10.0),
            Vec2::new(0.0, 10.0),
        ])
        .unwrap();
        let p = Vec2::new(50.0, 4.0); // between the two long legs, nearer the first
        let early = route.project_near(p, 0, 2, 2);
        assert!(early.s < 60.0);
        let late = route.project_near(p, 2, 0, 2);
        assert!(late.s > 150.0);
    }
}
