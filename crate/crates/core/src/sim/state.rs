use nalgebra::Vector2;

use super::params::StripParams;
use crate::error::Result;

/// Planar (x, z) vector in meters.
pub type Vec2 = Vector2<f64>;

/// Full dynamic state of the chain. Sphere 0 is the pinned far end, the last
/// sphere is the grasped end.
#[derive(Debug, Clone, PartialEq)]
pub struct StripState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub gripper: Vec2,
    pub time: f64,
    pub step_index: u64,
}

impl StripState {
    /// Strip lying on the desk along +x. The pinned sphere sits at the origin,
    /// the others rest on the desk with their centers at `sphere_radius`.
    pub fn flat(params: &StripParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::flat_unchecked(params.n_links, params.link_length, params.sphere_radius))
    }

    pub(crate) fn flat_unchecked(n_links: usize, link: f64, rest_height: f64) -> Self {
        let first = (link * link - rest_height * rest_height).max(0.0).sqrt();
        let mut positions = Vec::with_capacity(n_links + 1);
        positions.push(Vec2::zeros());
        for i in 1..=n_links {
            positions.push(Vec2::new(first + (i - 1) as f64 * link, rest_height));
        }
        let gripper = positions[n_links];
        Self {
            velocities: vec![Vec2::zeros(); n_links + 1],
            positions,
            gripper,
            time: 0.0,
            step_index: 0,
        }
    }

    /// Builds a state from explicit positions with zero velocities.
    pub fn from_positions(positions: Vec<Vec2>) -> Self {
        let n = positions.len();
        let gripper = *positions.last().expect("at least one sphere");
        Self {
            velocities: vec![Vec2::zeros(); n],
            positions,
            gripper,
            time: 0.0,
            step_index: 0,
        }
    }

    pub fn n_links(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn grasped(&self) -> Vec2 {
        *self.positions.last().unwrap()
    }

    /// Largest deviation of any link from `link_length`.
    pub fn max_link_error(&self, link_length: f64) -> f64 {
        self.positions
            .windows(2)
            .map(|w| ((w[1] - w[0]).norm() - link_length).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_free_height(&self) -> f64 {
        self.positions[1..].iter().map(|p| p.y).fold(f64::INFINITY, f64::min)
    }

    pub fn max_height(&self) -> f64 {
        self.positions.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Signed bend angle at every interior joint (index 0 is joint 1).
    pub fn joint_angles(&self) -> Vec<f64> {
        self.positions
            .windows(3)
            .map(|w| {
                let a = w[1] - w[0];
                let b = w[2] - w[1];
                (a.x * b.y - a.y * b.x).atan2(a.dot(&b))
            })
            .collect()
    }
}
