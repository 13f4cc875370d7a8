use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::paths::{GripperPath, PathKind};
use crate::policy::{apply_action, PolicyWeights};
use crate::reward::{prelift, try_run_episode_observed, EpisodeConfig, EpisodeResult, Rollout};
use crate::sim::{StripParams, StripSim, StripState, Vec2};
use crate::Result;

/// Control steps between stored strip shapes.
pub const SNAPSHOT_EVERY: usize = 10;
const REFERENCE_SPACING: f64 = 0.005;

/// Closed-loop gripper path with strip snapshots and the open-loop
/// reference paths in the same frame.
#[derive(Debug, Clone)]
pub struct Trace {
    pub params: StripParams,
    pub start: StripState,
    pub episode: EpisodeResult,
    /// Strip shape after every control step.
    pub states: Vec<StripState>,
    pub triangular: Vec<Vec2>,
    pub circular: Vec<Vec2>,
}

#[derive(Debug, Serialize)]
struct PointRow<'a> {
    series: &'a str,
    step: usize,
    index: usize,
    x: f64,
    z: f64,
}

impl Trace {
    pub fn gripper_path(&self) -> Vec<Vec2> {
        std::iter::once(self.start.gripper)
            .chain(self.states.iter().map(|s| s.gripper))
            .collect()
    }

    /// Long-format CSV: `series, step, index, x, z` for the gripper path,
    /// both reference paths and every `SNAPSHOT_EVERY`-th strip shape.
    pub fn write_points<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, p) in self.gripper_path().iter().enumerate() {
            w.serialize(PointRow { series: "policy", step: i, index: 0, x: p.x, z: p.y })?;
        }
        for (name, path) in [("triangular", &self.triangular), ("circular", &self.circular)] {
            for (i, p) in path.iter().enumerate() {
                w.serialize(PointRow { series: name, step: i, index: 0, x: p.x, z: p.y })?;
            }
        }
        let shots = std::iter::once((0, &self.start)).chain(
            self.states
                .iter()
                .enumerate()
                .map(|(i, s)| (i + 1, s))
                .filter(|(i, _)| i % SNAPSHOT_EVERY == 0 || *i == self.states.len()),
        );
        for (step, s) in shots {
            for (j, p) in s.positions.iter().enumerate() {
                w.serialize(PointRow { series: "strip", step, index: j, x: p.x, z: p.y })?;
            }
        }
        w.flush().map_err(|e| crate::Error::io("<trace>", e))
    }

    /// Per-control-step log including the action.
    pub fn write_steps<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Step {
            step: usize,
            time_s: f64,
            gripper_x: f64,
            gripper_z: f64,
            x_c: f64,
            f_x: f64,
            phi: Option<f64>,
            touched: bool,
        }
        let mut w = csv::Writer::from_writer(out);
        for (i, (r, a)) in self.episode.trajectory.iter().zip(&self.episode.actions).enumerate() {
            w.serialize(Step {
                step: i + 1,
                time_s: r.time_s,
                gripper_x: r.gripper_x,
                gripper_z: r.gripper_z,
                x_c: r.x_c,
                f_x: r.f_x,
                phi: *a,
                touched: r.touched,
            })?;
        }
        w.flush().map_err(|e| crate::Error::io("<trace>", e))
    }
}

pub fn path_trace(weights: &PolicyWeights, params: &StripParams, episode: &EpisodeConfig) -> Result<Trace> {
    let start = prelift(params, episode.lift_height)?;
    let mut states = Vec::new();
    let result = try_run_episode_observed(weights, params, episode, start.clone(), |s| states.push(s.clone()))?;
    let l = params.strip_length;
    Ok(Trace {
        params: params.clone(),
        start,
        episode: result,
        states,
        triangular: GripperPath::of_kind(PathKind::Triangular, l).waypoints(REFERENCE_SPACING),
        circular: GripperPath::of_kind(PathKind::Circular, l).waypoints(REFERENCE_SPACING),
    })
}

/// Re-simulates the logged actions from the trace start. Shaping steps
/// (`None`) move horizontally toward the pinned end.
pub fn replay_actions(trace: &Trace, episode: &EpisodeConfig) -> Result<Vec<StripState>> {
    let params = &trace.params;
    let mut sim = StripSim::new(params)?;
    let mut rollout = Rollout::new(params, &episode.reward, trace.start.clone());
    let mut states = Vec::with_capacity(trace.episode.actions.len());
    for a in &trace.episode.actions {
        let phi = a.unwrap_or(PI);
        let target = apply_action(&rollout.state, phi, episode.step_size, params.strip_length);
        rollout.control_step(&mut sim, target, *a)?;
        states.push(rollout.state.clone());
    }
    Ok(states)
}

/// True when both state sequences agree bit for bit.
pub fn states_identical(a: &[StripState], b: &[StripState]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.positions.len() == y.positions.len()
                && x.positions
                    .iter()
                    .zip(&y.positions)
                    .all(|(p, q)| p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits())
                && x.gripper.x.to_bits() == y.gripper.x.to_bits()
                && x.gripper.y.to_bits() == y.gripper.y.to_bits()
        })
}

/// Largest distance between the gripper paths of two traces, compared step
/// by step over their common length.
pub fn path_difference(a: &Trace, b: &Trace) -> f64 {
    let (pa, pb) = (a.gripper_path(), b.gripper_path());
    let common = pa.iter().zip(&pb).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    if pa.len() == pb.len() {
        common
    } else {
        // Different episode lengths already make the paths differ.
        common.max(f64::MIN_POSITIVE)
    }
}
