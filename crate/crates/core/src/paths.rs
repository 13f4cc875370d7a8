//! Material-agnostic open-loop folding paths and a driver that runs the
//! simulator along any of them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{EpisodeResult, RewardConfig, Rollout};
use crate::sim::{StripParams, StripSim, StripState, Vec2};

/// Default traversal speed of the baseline paths, m/s.
pub const BASELINE_SPEED: f64 = 0.05;
/// Gripper speed limit, m/s.
pub const MAX_GRIPPER_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Line { from: Vec2, to: Vec2 },
    /// Counter-clockwise arc starting at `start` radians, sweeping `sweep`.
    Arc { center: Vec2, radius: f64, start: f64, sweep: f64 },
}

impl Segment {
    fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn at(&self, s: f64) -> Vec2 {
        match *self {
            Segment::Line { from, to } => {
                let len = (to - from).norm();
                if len == 0.0 {
                    from
                } else {
                    from + (to - from) * (s / len)
                }
            }
            Segment::Arc { center, radius, start, sweep } => {
                let a = start + sweep.signum() * s / radius;
                center + Vec2::new(radius * a.cos(), radius * a.sin())
            }
        }
    }

    fn end(&self) -> Vec2 {
        match *self {
            Segment::Line { to, .. } => to,
            Segment::Arc { .. } => self.at(self.length()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    Triangular,
    Circular,
}

impl PathKind {
    pub fn name(&self) -> &'static str {
        match self {
            PathKind::Triangular => "triangular",
            PathKind::Circular => "circular",
        }
    }
}

/// Gripper path parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct GripperPath {
    segments: Vec<Segment>,
    start: Vec2,
    end: Vec2,
}

impl GripperPath {
    /// Straight up at 45° to the apex `(L/2, L/2)`, then down to the origin.
    pub fn triangular(strip_length: f64) -> Self {
        let l = strip_length;
        let start = Vec2::new(l, 0.0);
        let apex = Vec2::new(l / 2.0, l / 2.0);
        let end = Vec2::zeros();
        Self {
            segments: vec![Segment::Line { from: start, to: apex }, Segment::Line { from: apex, to: end }],
            start,
            end,
        }
    }

    /// Semicircle of radius `L/2` about `(L/2, 0)` from `(L, 0)` over the top
    /// to the origin.
    pub fn circular(strip_length: f64) -> Self {
        let r = strip_length / 2.0;
        Self {
            segments: vec![Segment::Arc {
                center: Vec2::new(r, 0.0),
                radius: r,
                start: 0.0,
                sweep: PI,
            }],
            start: Vec2::new(strip_length, 0.0),
            end: Vec2::zeros(),
        }
    }

    pub fn of_kind(kind: PathKind, strip_length: f64) -> Self {
        match kind {
            PathKind::Triangular => Self::triangular(strip_length),
            PathKind::Circular => Self::circular(strip_length),
        }
    }

    /// Polyline through the given points.
    pub fn polyline(points: &[Vec2]) -> Self {
        assert!(!points.is_empty(), "polyline needs a point");
        let segments = points
            .windows(2)
            .map(|w| Segment::Line { from: w[0], to: w[1] })
            .collect();
        Self {
            segments,
            start: points[0],
            end: *points.last().unwrap(),
        }
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn start(&self) -> Vec2 {
        self.start
    }

    pub fn end(&self) -> Vec2 {
        self.end
    }

    /// Point at arc length `s`, clamped to `[0, total_length]`; the end
    /// points are returned exactly.
    pub fn at(&self, s: f64) -> Vec2 {
        if s <= 0.0 {
            return self.start;
        }
        let mut rest = s;
        for seg in &self.segments {
            let len = seg.length();
            if rest < len {
                return seg.at(rest);
            }
            rest -= len;
        }
        self.end
    }

    /// Samples spaced at most `spacing` apart, both ends included.
    pub fn waypoints(&self, spacing: f64) -> Vec<Vec2> {
        let total = self.total_length();
        let count = (total / spacing).ceil().max(1.0) as usize;
        (0..=count).map(|i| self.at(total * i as f64 / count as f64)).collect()
    }

    /// Segment end points (for plotting the declared geometry).
    pub fn vertices(&self) -> Vec<Vec2> {
        let mut v = vec![self.start];
        v.extend(self.segments.iter().map(Segment::end));
        v
    }
}

/// Runs the simulator along `path` at `speed`, stopping at the first layer
/// touch or at the path end.
pub fn run_path(path: &GripperPath, params: &StripParams, speed: f64, reward: &RewardConfig) -> Result<EpisodeResult> {
    run_path_observed(path, params, speed, reward, |_| {})
}

/// [`run_path`] calling `observe` with the state at the end of every control
/// period.
pub fn run_path_observed(
    path: &GripperPath,
    params: &StripParams,
    speed: f64,
    reward: &RewardConfig,
    mut observe: impl FnMut(&StripState),
) -> Result<EpisodeResult> {
    if !(speed > 0.0 && speed <= MAX_GRIPPER_SPEED + 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "path speed must be in (0, {MAX_GRIPPER_SPEED}] m/s, got {speed}"
        )));
    }
    let mut sim = StripSim::new(params)?;
    let state = StripState::flat(params)?;
    let mut rollout = Rollout::new(params, reward, state);
    let total = path.total_length();
    let ds = speed * params.sim_dt;
    let mut s = 0.0;
    let mut steps_in_period = 0;
    while s < total && !rollout.touched() {
        s = (s + ds).min(total);
        rollout
            .sim_step(&mut sim, path.at(s))
            .map_err(|e| Error::PathDivergence {
                arc_length: s,
                source: Box::new(e),
            })?;
        steps_in_period += 1;
        if steps_in_period == crate::policy::CONTROL_PERIOD || rollout.touched() || s >= total {
            rollout.close_control_step(None);
            observe(&rollout.state);
            steps_in_period = 0;
        }
    }
    Ok(rollout.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_geometry() {
        let p = GripperPath::triangular(0.6);
        assert_eq!(p.at(0.0), Vec2::new(0.6, 0.0));
        let half = p.total_length() / 2.0;
        assert!((p.at(half) - Vec2::new(0.3, 0.3)).norm() < 1e-12);
        assert!((p.total_length() - 0.6 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(p.at(p.total_length()), Vec2::zeros());
    }

    #[test]
    fn circular_geometry() {
        let p = GripperPath::circular(0.6);
        assert!((p.total_length() - PI * 0.3).abs() < 1e-12);
        let top = p.at(p.total_length() / 2.0);
        assert!((top - Vec2::new(0.3, 0.3)).norm() < 1e-12);
        for w in p.waypoints(0.005) {
            assert!(((w - Vec2::new(0.3, 0.0)).norm() - 0.3).abs() < 1e-12);
            assert!(w.y >= -1e-12);
        }
        assert_eq!(p.at(0.0), Vec2::new(0.6, 0.0));
        assert_eq!(p.at(p.total_length()), Vec2::zeros());
    }

    #[test]
    fn arc_length_is_clamped() {
        let p = GripperPath::triangular(0.6);
        assert_eq!(p.at(-1.0), p.start());
        assert_eq!(p.at(10.0), p.end());
    }

    #[test]
    fn zero_length_path_does_not_touch() {
        let params = StripParams::desk_scale();
        let start = StripState::flat(&params).unwrap().gripper;
        let path = GripperPath::polyline(&[start]);
        assert_eq!(path.total_length(), 0.0);
        let res = run_path(&path, &params, BASELINE_SPEED, &RewardConfig::default()).unwrap();
        assert!(!res.touched);
        assert_eq!(res.steps, 0);
    }

    #[test]
    fn speed_limit_enforced() {
        let params = StripParams::desk_scale();
        let path = GripperPath::triangular(0.6);
        assert!(run_path(&path, &params, 0.2, &RewardConfig::default()).is_err());
        assert!(run_path(&path, &params, 0.0, &RewardConfig::default()).is_err());
    }
}
