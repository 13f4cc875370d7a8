//! Touch position of the gripper when the grasped end is carried toward the
//! pinned end at a fixed height, over a grid of materials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MaterialPrior;
use crate::paths::{BASELINE_SPEED, MAX_GRIPPER_SPEED};
use crate::reward::lift_target;
use crate::sim::{detect_layer_touch, StripParams, StripSim, StripState, Vec2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub z: f64,
    pub k: f64,
    pub b: f64,
    pub touched: bool,
    /// Gripper x at layer touch; `NaN` for censored rows.
    pub x_touch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub z: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub touched: usize,
    pub censored: usize,
    /// Largest change of `x_touch` between neighbouring k at equal b.
    pub max_k_jump: f64,
}

impl EnvelopeSummary {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }
}

/// Gripper x at layer touch, or `None` when the gripper reaches
/// `x = -0.2 L` first.
pub fn touch_x_at_height(params: &StripParams, z: f64, speed: f64) -> Result<Option<f64>> {
    let mut sim = StripSim::new(params)?;
    let mut state = StripState::flat(params)?;
    let l = params.strip_length;
    let start = state.gripper;
    let goal = Vec2::new(lift_target(params, z).x, z);
    let dt = params.sim_dt;
    let touched = |s: &StripState| detect_layer_touch(s, params).touched;

    let n = ((goal - start).norm() / (MAX_GRIPPER_SPEED * dt)).ceil().max(1.0) as usize;
    for i in 1..=n {
        sim.step_in_place(&mut state, start + (goal - start) * (i as f64 / n as f64))?;
        if touched(&state) {
            return Ok(Some(state.gripper.x));
        }
    }
    let x_limit = -0.2 * l;
    let mut x = goal.x;
    while x > x_limit {
        x = (x - speed * dt).max(x_limit);
        sim.step_in_place(&mut state, Vec2::new(x, z))?;
        if touched(&state) {
            return Ok(Some(state.gripper.x));
        }
    }
    Ok(None)
}

/// Rows ordered by height, then k, then b over an `n_k × n_b` prior grid.
pub fn fold_height_envelope(
    prior: &MaterialPrior,
    base: &StripParams,
    heights: &[f64],
    n_k: usize,
    n_b: usize,
) -> Result<Vec<EnvelopeRow>> {
    if heights.iter().any(|z| !(*z > 0.0 && *z < base.strip_length)) {
        return Err(Error::InvalidConfig("heights must lie in (0, strip_length)".into()));
    }
    if n_k == 0 || n_b == 0 {
        return Err(Error::InvalidConfig("envelope grid must be non-empty".into()));
    }
    let grid = prior.grid(n_k, n_b);
    let jobs: Vec<(f64, f64, f64)> = heights
        .iter()
        .flat_map(|&z| grid.iter().map(move |&(k, b)| (z, k, b)))
        .collect();
    jobs.par_iter()
        .map(|&(z, k, b)| {
            let x = touch_x_at_height(&base.with_material(k, b), z, BASELINE_SPEED)?;
            Ok(EnvelopeRow {
                z,
                k,
                b,
                touched: x.is_some(),
                x_touch: x.unwrap_or(f64::NAN),
            })
        })
        .collect()
}

/// Per-height summary of rows produced by [`fold_height_envelope`] with an
/// `n_b`-wide damping axis.
pub fn summarize(rows: &[EnvelopeRow], n_b: usize) -> Vec<EnvelopeSummary> {
    let mut heights: Vec<f64> = rows.iter().map(|r| r.z).collect();
    heights.dedup();
    heights
        .into_iter()
        .map(|z| {
            let at: Vec<&EnvelopeRow> = rows.iter().filter(|r| r.z == z).collect();
            let xs: Vec<f64> = at.iter().filter(|r| r.touched).map(|r| r.x_touch).collect();
            let mut jump: f64 = 0.0;
            for j in 0..n_b {
                let column: Vec<&&EnvelopeRow> = at.iter().skip(j).step_by(n_b).collect();
                for w in column.windows(2) {
                    if w[0].touched && w[1].touched {
                        jump = jump.max((w[1].x_touch - w[0].x_touch).abs());
                    }
                }
            }
            EnvelopeSummary {
                z,
                x_min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                x_max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                touched: xs.len(),
                censored: at.len() - xs.len(),
                max_k_jump: jump,
            }
        })
        .collect()
}
