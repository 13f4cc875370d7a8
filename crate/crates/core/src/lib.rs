//! Simulation and training lab for feedback-based folding of fabric strips.
//!
//! * [`sim`]: planar chain simulator of a strip pinned at one end and driven
//!   by a gripper at the other.
//! * [`paths`]: open-loop triangular and circular folding paths.
//! * [`policy`]: the 3 → 20 → 1 tanh feedback controller.
//! * [`reward`]: force and misalignment rewards, closed-loop episodes.
//! * [`trainer`]: CMA-ES policy search under randomized materials.
//! * [`vision`]: homography, synthetic rendering and liftoff detection.
//! * [`harness`]: experiment orchestration and data-file output.

pub mod error;
pub mod harness;
pub mod kv;
pub mod paths;
pub mod policy;
pub mod reward;
pub mod seeds;
pub mod sim;
pub mod trainer;
pub mod vision;

pub use error::{Error, Result};
