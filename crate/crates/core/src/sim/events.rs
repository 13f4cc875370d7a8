//! Geometric events read off a chain state: the desk liftoff point and the
//! first touch of the hanging layer on the laying layer.

use serde::{Deserialize, Serialize};

use super::params::StripParams;
use super::state::StripState;

/// A sphere counts as grounded within this of its resting height.
pub const GROUND_TOL: f64 = 1e-4;
/// Extra height allowed above `2 * sphere_radius` for a layer touch.
pub const TOUCH_TOL: f64 = 1e-4;
/// Spheres right after the grounded run that cannot register a touch.
pub const TOUCH_GAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TouchEvent {
    pub touched: bool,
    pub touch_sphere_index: usize,
    pub touch_x: f64,
    pub l1: f64,
    pub l2: f64,
    pub d: f64,
}

impl TouchEvent {
    pub fn none() -> Self {
        Self::default()
    }

    /// Touch at sphere `index` located at `x` on a chain of `n_links` links.
    pub fn at(index: usize, x: f64, n_links: usize, link_length: f64) -> Self {
        let l1 = (n_links - index) as f64 * link_length;
        let l2 = x.max(0.0);
        Self {
            touched: true,
            touch_sphere_index: index,
            touch_x: x,
            l1,
            l2,
            d: l1 - l2,
        }
    }
}

fn grounded_run(state: &StripState, params: &StripParams) -> usize {
    let limit = params.sphere_radius + GROUND_TOL;
    state.positions.iter().take_while(|p| p.y <= limit).count()
}

/// Liftoff x: the largest x over the contiguous grounded run starting at the
/// pinned end.
pub fn detect_desk_contact_x(state: &StripState, params: &StripParams) -> f64 {
    let run = grounded_run(state, params).max(1);
    state.positions[..run].iter().map(|p| p.x).fold(0.0, f64::max)
}

/// Geometric layer-touch test. Among the spheres at least `TOUCH_GAP` past
/// the grounded run that sit at most `2 * sphere_radius + TOUCH_TOL` high and
/// no further than the liftoff x, the lowest one (ties: closest to the loop)
/// is the touch point.
pub fn detect_layer_touch(state: &StripState, params: &StripParams) -> TouchEvent {
    let run = grounded_run(state, params).max(1);
    let x_c = detect_desk_contact_x(state, params);
    let z_limit = 2.0 * params.sphere_radius + TOUCH_TOL;
    let n = state.n_links();
    let mut best: Option<usize> = None;
    for i in (run + TOUCH_GAP)..=n {
        let p = state.positions[i];
        if p.y <= z_limit && p.x <= x_c {
            match best {
                Some(b) if state.positions[b].y <= p.y => {}
                _ => best = Some(i),
            }
        }
    }
    match best {
        Some(i) => TouchEvent::at(i, state.positions[i].x, n, params.link_length),
        None => TouchEvent::none(),
    }
}
