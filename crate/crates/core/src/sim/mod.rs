//! Planar strip simulator: a pinned chain of point masses with inextensible
//! links, joint bending stiffness and damping, a rigid desk and a
//! kinematically driven grasped end.

mod banded;
pub mod events;
pub mod integrator;
pub mod params;
pub mod state;
pub mod trajectory;

pub use events::{detect_desk_contact_x, detect_layer_touch, TouchEvent};
pub use integrator::{ChainModel, ForceReadout, Grasp, StripSim};
pub use params::{b_max, b_min, StripParams, K_MAX, K_MIN};
pub use state::{StripState, Vec2};
pub use trajectory::{TrajectoryRecord, TrajectoryWriter};

use crate::error::Result;
use crate::paths::GripperPath;

/// Rest configuration: strip flat on the desk, zero velocities.
pub fn init_flat(params: &StripParams) -> Result<StripState> {
    StripState::flat(params)
}

/// Gripper speed used to fold quasi-statically in [`folded_height`], m/s.
pub const FOLD_HEIGHT_SPEED: f64 = 0.02;
/// Time allowed for the folded strip to come to rest, s.
pub const FOLD_HEIGHT_SETTLE: f64 = 3.0;

/// Height of the loop of a strip folded onto itself: the grasped end is
/// carried slowly over a semicircle onto the pinned end, the strip settles,
/// and the highest sphere is read.
pub fn folded_height(params: &StripParams) -> Result<f64> {
    let mut sim = StripSim::new(params)?;
    let mut state = init_flat(params)?;
    let path = GripperPath::circular(params.strip_length);
    let ds = FOLD_HEIGHT_SPEED * params.sim_dt;
    let mut s = 0.0;
    while s < path.total_length() {
        s = (s + ds).min(path.total_length());
        sim.step_in_place(&mut state, path.at(s))?;
    }
    let hold = state.gripper;
    let settle_steps = (FOLD_HEIGHT_SETTLE / params.sim_dt).round() as usize;
    for _ in 0..settle_steps {
        sim.step_in_place(&mut state, hold)?;
    }
    Ok(state.max_height() - params.sphere_radius)
}
