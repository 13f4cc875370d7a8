//! Checks shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use stripfold::paths::{GripperPath, BASELINE_SPEED};
use stripfold::sim::{ChainModel, Grasp, StripParams, StripSim, StripState, Vec2};

/// Worst values seen while driving a strip.
#[derive(Debug, Clone, Copy, Default)]
pub struct DriveExtremes {
    pub link_error: f64,
    pub pin_offset: f64,
    pub min_height: f64,
    pub steps: usize,
}

/// Carries the grasped end along `path` and records the worst link error, pin
/// offset and lowest sphere after every step.
pub fn drive_extremes(params: &StripParams, path: &GripperPath, speed: f64) -> DriveExtremes {
    let mut sim = StripSim::new(params).unwrap();
    let mut state = StripState::flat(params).unwrap();
    let mut out = DriveExtremes {
        min_height: f64::INFINITY,
        ..Default::default()
    };
    let total = path.total_length();
    let ds = speed * params.sim_dt;
    let mut s = 0.0;
    while s < total {
        s = (s + ds).min(total);
        sim.step_in_place(&mut state, path.at(s)).unwrap();
        out.link_error = out.link_error.max(state.max_link_error(params.link_length));
        out.pin_offset = out.pin_offset.max(state.positions[0].norm());
        out.min_height = out.min_height.min(state.min_free_height());
        out.steps += 1;
    }
    out
}

pub fn pendulum_model(length: f64) -> ChainModel {
    ChainModel {
        n_links: 1,
        link_length: length,
        mass: 0.0033,
        stiffness: 0.0,
        damping: 0.0,
        gravity: 9.81,
        dt: 0.005,
        substeps: 10,
        max_iterations: 100,
        desk: None,
        grasp: Grasp::Released,
    }
}

/// Period of a released single link swinging from `angle` off the downward
/// vertical, measured from the spacing of upward zero crossings of x.
pub fn pendulum_period(length: f64, angle: f64) -> f64 {
    let mut sim = StripSim::with_model(pendulum_model(length));
    let bob = Vec2::new(length * angle.sin(), -length * angle.cos());
    let mut state = StripState::from_positions(vec![Vec2::zeros(), bob]);
    let mut crossings = Vec::new();
    let mut prev_x = bob.x;
    for _ in 0..2000 {
        let t0 = state.time;
        sim.step_in_place(&mut state, Vec2::zeros()).unwrap();
        let x = state.positions[1].x;
        if prev_x < 0.0 && x >= 0.0 {
            let frac = -prev_x / (x - prev_x);
            crossings.push(t0 + frac * (state.time - t0));
        }
        prev_x = x;
    }
    assert!(crossings.len() >= 3, "pendulum did not swing");
    (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
}

pub fn analytic_pendulum_period(length: f64, g: f64) -> f64 {
    2.0 * PI * (length / g).sqrt()
}

/// Largest per-step increase of total energy after releasing a bent strip.
pub fn released_energy_rise(params: &StripParams, steps: usize) -> (f64, f64, f64) {
    let mut sim = StripSim::new(params).unwrap();
    let mut state = StripState::flat(params).unwrap();
    let path = GripperPath::circular(params.strip_length);
    let stop = 0.6 * path.total_length();
    let ds = BASELINE_SPEED * params.sim_dt;
    let mut s = 0.0;
    while s < stop {
        s += ds;
        sim.step_in_place(&mut state, path.at(s)).unwrap();
    }
    sim.set_grasp(Grasp::Released);
    let model = sim.model().clone();
    let first = model.energy(&state);
    let mut prev = first;
    let mut worst_rise = f64::NEG_INFINITY;
    for _ in 0..steps {
        let hold = state.gripper;
        sim.step_in_place(&mut state, hold).unwrap();
        let e = model.energy(&state);
        worst_rise = worst_rise.max(e - prev);
        prev = e;
    }
    (worst_rise, first, prev)
}

/// Hangs a strip between the pin and a gripper at the same height `span`
/// away, lets it settle, and returns the worst mismatch between the shape
/// and its mirror image about `x = span / 2`.
pub fn mirror_asymmetry(params: &StripParams, span: f64, settle: f64) -> f64 {
    let mut model = ChainModel::from_params(params).unwrap();
    model.desk = None;
    let mut sim = StripSim::with_model(model);
    let n = params.n_links;
    let mut state = StripState::from_positions(
        (0..=n).map(|i| Vec2::new(i as f64 * params.link_length, 0.0)).collect(),
    );
    let start = state.gripper;
    let travel = start.x - span;
    let steps = (travel / (BASELINE_SPEED * params.sim_dt)).ceil() as usize;
    for i in 1..=steps {
        let x = start.x - travel * i as f64 / steps as f64;
        sim.step_in_place(&mut state, Vec2::new(x, 0.0)).unwrap();
    }
    let hold = Vec2::new(span, 0.0);
    for _ in 0..(settle / params.sim_dt) as usize {
        sim.step_in_place(&mut state, hold).unwrap();
    }
    (0..=n)
        .map(|i| {
            let a = state.positions[i];
            let b = state.positions[n - i];
            (a.x + b.x - span).abs().max((a.y - b.y).abs())
        })
        .fold(0.0, f64::max)
}
