use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Lower end of the joint stiffness prior, N·m/rad.
pub const K_MIN: f64 = 0.02;
/// Upper end of the joint stiffness prior, N·m/rad.
pub const K_MAX: f64 = 0.3;
/// Ratio between the largest and the smallest admissible damping.
pub const DAMPING_SPAN: f64 = 50.0;

/// Smallest admissible joint damping for stiffness `k`.
pub fn b_min(k: f64) -> f64 {
    3e-3 * k + 3.5e-4
}

/// Largest admissible joint damping for stiffness `k`.
pub fn b_max(k: f64) -> f64 {
    DAMPING_SPAN * b_min(k)
}

/// Physical and numerical description of one simulated strip.
///
/// `joint_stiffness`, `joint_damping` and `sphere_mass` are material values
/// calibrated at the sphere spacing `reference_link_length` (2 mm). A chain
/// discretized more coarsely uses rescaled per-joint values so that bending
/// rigidity and mass per unit length stay the same; see [`StripParams::effective`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripParams {
    pub link_length: f64,
    pub sphere_radius: f64,
    pub sphere_mass: f64,
    pub strip_length: f64,
    pub n_links: usize,
    pub joint_stiffness: f64,
    pub joint_damping: f64,
    pub gravity: f64,
    pub sim_dt: f64,
    pub substeps: usize,
    pub constraint_iterations: usize,
    pub reference_link_length: f64,
}

impl Default for StripParams {
    /// Full-fidelity strip: 300 links of 2 mm.
    fn default() -> Self {
        Self {
            link_length: 0.002,
            sphere_radius: 0.0005,
            sphere_mass: 0.0033,
            strip_length: 0.6,
            n_links: 300,
            joint_stiffness: 0.1,
            joint_damping: b_min(0.1),
            gravity: 9.81,
            sim_dt: 0.005,
            substeps: 10,
            constraint_iterations: 100,
            reference_link_length: 0.002,
        }
    }
}

/// Per-joint values actually used by the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub stiffness: f64,
    pub damping: f64,
    pub mass: f64,
}

pub(crate) const FIELD_NAMES: [&str; 12] = [
    "link_length",
    "sphere_radius",
    "sphere_mass",
    "strip_length",
    "n_links",
    "joint_stiffness",
    "joint_damping",
    "gravity",
    "sim_dt",
    "substeps",
    "constraint_iterations",
    "reference_link_length",
];

impl StripParams {
    /// Desk-scale strip used for tests and training: 60 links of 1 cm.
    pub fn desk_scale() -> Self {
        Self {
            link_length: 0.01,
            n_links: 60,
            ..Self::default()
        }
    }

    /// Same discretization with a different material.
    pub fn with_material(&self, k: f64, b: f64) -> Self {
        Self {
            joint_stiffness: k,
            joint_damping: b,
            ..self.clone()
        }
    }

    pub fn n_spheres(&self) -> usize {
        self.n_links + 1
    }

    pub fn substep_dt(&self) -> f64 {
        self.sim_dt / self.substeps as f64
    }

    pub fn effective(&self) -> EffectiveParams {
        let ratio = self.reference_link_length / self.link_length;
        EffectiveParams {
            stiffness: self.joint_stiffness * ratio,
            damping: self.joint_damping * ratio,
            mass: self.sphere_mass / ratio,
        }
    }

    /// True when (k, b) lies inside the calibrated material prior.
    pub fn within_prior(&self) -> bool {
        let k = self.joint_stiffness;
        let b = self.joint_damping;
        let tol = 1e-12;
        (K_MIN - tol..=K_MAX + tol).contains(&k)
            && b >= b_min(k) * (1.0 - 1e-9)
            && b <= b_max(k) * (1.0 + 1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("link_length", self.link_length),
            ("sphere_radius", self.sphere_radius),
            ("sphere_mass", self.sphere_mass),
            ("strip_length", self.strip_length),
            ("sim_dt", self.sim_dt),
            ("reference_link_length", self.reference_link_length),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("joint_stiffness", self.joint_stiffness),
            ("joint_damping", self.joint_damping),
            ("gravity", self.gravity),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n_links < 3 {
            return Err(Error::InvalidParams(format!("n_links must be at least 3, got {}", self.n_links)));
        }
        if self.substeps == 0 || self.constraint_iterations == 0 {
            return Err(Error::InvalidParams("substeps and constraint_iterations must be positive".into()));
        }
        let total = self.n_links as f64 * self.link_length;
        if (total - self.strip_length).abs() > 1e-9 * self.strip_length.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "n_links * link_length = {total} does not match strip_length = {}",
                self.strip_length
            )));
        }
        if 2.0 * self.sphere_radius >= self.link_length {
            return Err(Error::InvalidParams("spheres overlap: sphere diameter >= link_length".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("link_length", self.link_length);
        kv.insert("sphere_radius", self.sphere_radius);
        kv.insert("sphere_mass", self.sphere_mass);
        kv.insert("strip_length", self.strip_length);
        kv.insert("n_links", self.n_links);
        kv.insert("joint_stiffness", self.joint_stiffness);
        kv.insert("joint_damping", self.joint_damping);
        kv.insert("gravity", self.gravity);
        kv.insert("sim_dt", self.sim_dt);
        kv.insert("substeps", self.substeps);
        kv.insert("constraint_iterations", self.constraint_iterations);
        kv.insert("reference_link_length", self.reference_link_length);
        kv
    }

    /// Applies the keys present in `kv` on top of `self`.
    ///
    /// When only `link_length` or only `n_links` is given, the other one is
    /// derived from `strip_length`.
    pub fn overridden_by(&self, kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(&FIELD_NAMES, "strip parameters")?;
        let mut p = self.clone();
        kv.update("link_length", &mut p.link_length)?;
        kv.update("sphere_radius", &mut p.sphere_radius)?;
        kv.update("sphere_mass", &mut p.sphere_mass)?;
        kv.update("strip_length", &mut p.strip_length)?;
        kv.update("n_links", &mut p.n_links)?;
        kv.update("joint_stiffness", &mut p.joint_stiffness)?;
        kv.update("joint_damping", &mut p.joint_damping)?;
        kv.update("gravity", &mut p.gravity)?;
        kv.update("sim_dt", &mut p.sim_dt)?;
        kv.update("substeps", &mut p.substeps)?;
        kv.update("constraint_iterations", &mut p.constraint_iterations)?;
        kv.update("reference_link_length", &mut p.reference_link_length)?;
        let has_len = kv.get_str("link_length").is_some();
        let has_n = kv.get_str("n_links").is_some();
        match (has_len, has_n) {
            (true, false) => p.n_links = (p.strip_length / p.link_length).round() as usize,
            (false, true) | (false, false) if p.n_links > 0 => {
                p.link_length = p.strip_length / p.n_links as f64
            }
            _ => {}
        }
        p.validate()?;
        Ok(p)
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        Self::default().overridden_by(kv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KeyValues::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_kv().write(path)
    }
}
