//! Feedback policy: a 3 → 20 → 1 tanh network mapping the observation
//! (gripper x, gripper z, liftoff x) to the direction φ of the next gripper
//! motion.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{detect_desk_contact_x, StripParams, StripState, Vec2};

pub const N_INPUTS: usize = 3;
pub const N_HIDDEN: usize = 20;
/// Simulation steps per control step.
pub const CONTROL_PERIOD: usize = 10;
/// Gripper displacement per control step, m.
pub const STEP_SIZE: f64 = 0.005;
/// Control steps before the shaping phase takes over.
pub const HORIZON: usize = 400;

const FILE_MAGIC: &str = "stripfold-policy v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub gripper_x: f64,
    pub gripper_z: f64,
    pub contact_x: f64,
}

impl Observation {
    pub fn of(state: &StripState, params: &StripParams) -> Self {
        Self {
            gripper_x: state.gripper.x,
            gripper_z: state.gripper.y,
            contact_x: detect_desk_contact_x(state, params),
        }
    }

    fn features(&self, strip_length: f64) -> [f64; N_INPUTS] {
        [
            self.gripper_x / strip_length,
            self.gripper_z / strip_length,
            self.contact_x / strip_length,
        ]
    }
}

/// Flat parameter vector. Layout: hidden weights (row-major, one row of
/// `n_inputs` per hidden unit), hidden biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyWeights {
    n_inputs: usize,
    n_hidden: usize,
    values: Vec<f64>,
}

pub fn parameter_count(n_inputs: usize, n_hidden: usize) -> usize {
    n_inputs * n_hidden + n_hidden + n_hidden + 1
}

impl PolicyWeights {
    pub fn zeros() -> Self {
        Self {
            n_inputs: N_INPUTS,
            n_hidden: N_HIDDEN,
            values: vec![0.0; parameter_count(N_INPUTS, N_HIDDEN)],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::with_shape(N_INPUTS, N_HIDDEN, values)
    }

    pub fn with_shape(n_inputs: usize, n_hidden: usize, values: Vec<f64>) -> Result<Self> {
        let expected = parameter_count(n_inputs, n_hidden);
        if values.len() != expected {
            return Err(Error::InvalidWeights(format!("expected {expected} values, got {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidWeights(format!("value {i} is not finite")));
        }
        if n_inputs != N_INPUTS {
            return Err(Error::InvalidWeights(format!("policy takes {N_INPUTS} inputs, file declares {n_inputs}")));
        }
        Ok(Self { n_inputs, n_hidden, values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    /// Raw network output before the angle squashing.
    pub fn forward(&self, x: &[f64; N_INPUTS]) -> f64 {
        let (ni, nh) = (self.n_inputs, self.n_hidden);
        let w1 = &self.values[..ni * nh];
        let b1 = &self.values[ni * nh..ni * nh + nh];
        let w2 = &self.values[ni * nh + nh..ni * nh + 2 * nh];
        let b2 = self.values[ni * nh + 2 * nh];
        let hidden = w1
            .chunks_exact(ni)
            .zip(b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b).tanh());
        hidden.zip(w2).map(|(h, w)| h * w).sum::<f64>() + b2
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FILE_MAGIC} {} {}\n", self.n_inputs, self.n_hidden);
        for v in &self.values {
            // {:?} prints the shortest representation that parses back exactly
            let _ = writeln!(out, "{v:?}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidWeights("empty weights file".into()))?;
        let rest = header
            .trim()
            .strip_prefix(FILE_MAGIC)
            .ok_or_else(|| Error::InvalidWeights(format!("bad header `{header}`")))?;
        let dims: Vec<usize> = rest
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidWeights(format!("bad header `{header}`: {e}")))?;
        if dims.len() != 2 {
            return Err(Error::InvalidWeights(format!("bad header `{header}`")));
        }
        let values = lines
            .map(|l| l.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidWeights(e.to_string()))?;
        Self::with_shape(dims[0], dims[1], values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Action angle φ ∈ (−π, π): direction of the next gripper displacement,
/// measured from +x toward +z.
pub fn act(weights: &PolicyWeights, obs: &Observation, strip_length: f64) -> f64 {
    PI * weights.forward(&obs.features(strip_length)).tanh()
}

/// Gripper target one step of `step_size` along φ, kept above the desk plane
/// and within `[-0.2 L, 1.1 L]` in x.
pub fn apply_action(state: &StripState, phi: f64, step_size: f64, strip_length: f64) -> Vec2 {
    let g = state.gripper;
    let t = g + step_size * Vec2::new(phi.cos(), phi.sin());
    Vec2::new(t.x.clamp(-0.2 * strip_length, 1.1 * strip_length), t.y.max(0.0))
}
