//! Maximal-coordinate integrator for a planar chain of point masses.
//!
//! One substep of length `h`:
//! 1. Bending torques `-k·θ - b·θ̇` at every interior joint, applied as force
//!    triples on the three adjacent spheres, are integrated linearly-implicitly
//!    (Gauss-Newton stiffness `k·JᵀJ`, exact damping `b·JᵀJ`). The resulting
//!    system is symmetric positive definite with half bandwidth 5.
//! 2. Predicted positions are projected onto the inextensible-link manifold
//!    with a mass-weighted Newton projection; each iteration is one
//!    tridiagonal solve. Desk contact is an active set of spheres whose z is
//!    frozen at the desk, released when the contact impulse turns adhesive.
//! 3. Velocities are recovered from the position change.
//!
//! Sphere 0 is pinned at the origin. The last sphere either follows the
//! gripper kinematically or is free.

use super::banded::{solve_tridiagonal, SymBand};
use super::params::StripParams;
use super::state::{StripState, Vec2};
use crate::error::{Error, Result};

/// Projection converged when every link is within this of its rest length.
const PROJECTION_TOL: f64 = 1e-11;
const MAX_CONTACT_ROUNDS: usize = 12;
/// Axial stiffness of a link in units of mass / h². Links are nearly rigid;
/// the small compliance bounds the tension of a taut strip.
const LINK_STIFFNESS: f64 = 1e4;
/// A sphere this close to the desk height counts as resting on it.
const RESTING_TOL: f64 = 1e-12;
/// Fraction of the chain length the gripper may be away from the pin.
pub const REACH_FRACTION: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grasp {
    /// Last sphere follows the gripper target.
    Held,
    /// Last sphere moves freely.
    Released,
}

/// Per-joint physical constants of the discretized chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub n_links: usize,
    pub link_length: f64,
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub gravity: f64,
    pub dt: f64,
    pub substeps: usize,
    pub max_iterations: usize,
    /// Height of sphere centers resting on the desk; `None` removes the desk.
    pub desk: Option<f64>,
    pub grasp: Grasp,
}

impl ChainModel {
    pub fn from_params(params: &StripParams) -> Result<Self> {
        params.validate()?;
        let eff = params.effective();
        Ok(Self {
            n_links: params.n_links,
            link_length: params.link_length,
            mass: eff.mass,
            stiffness: eff.stiffness,
            damping: eff.damping,
            gravity: params.gravity,
            dt: params.sim_dt,
            substeps: params.substeps,
            max_iterations: params.constraint_iterations,
            desk: Some(params.sphere_radius),
            grasp: Grasp::Held,
        })
    }

    pub fn chain_length(&self) -> f64 {
        self.n_links as f64 * self.link_length
    }

    /// Axial link stiffness, N/m.
    pub fn link_stiffness(&self) -> f64 {
        let h = self.dt / self.substeps as f64;
        LINK_STIFFNESS * self.mass / (h * h)
    }

    /// Kinetic + gravitational + bending + link stretch energy, J.
    pub fn energy(&self, state: &StripState) -> f64 {
        let kinetic: f64 = state.velocities.iter().map(|v| 0.5 * self.mass * v.norm_squared()).sum();
        let potential: f64 = state.positions.iter().map(|p| self.mass * self.gravity * p.y).sum();
        let bending: f64 = state
            .joint_angles()
            .iter()
            .map(|t| 0.5 * self.stiffness * t * t)
            .sum();
        let kl = self.link_stiffness();
        let stretch: f64 = state
            .positions
            .windows(2)
            .map(|w| {
                let e = (w[1] - w[0]).norm() - self.link_length;
                0.5 * kl * e * e
            })
            .sum();
        kinetic + potential + bending + stretch
    }
}

/// Horizontal holding force at the pinned end, averaged over one `step`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceReadout {
    pub f_x: f64,
}

/// Simulator instance: a chain model plus reusable scratch memory.
#[derive(Debug, Clone)]
pub struct StripSim {
    model: ChainModel,
    s: Scratch,
}

#[derive(Debug, Clone)]
struct Scratch {
    len: Vec<f64>,
    unit: Vec<Vec2>,
    normal: Vec<Vec2>,
    band: SymBand,
    band0: SymBand,
    rhs: Vec<f64>,
    rhs0: Vec<f64>,
    resting: Vec<bool>,
    inv_mass: Vec<Vec2>,
    contact: Vec<bool>,
    predicted: Vec<Vec2>,
    impulse: Vec<Vec2>,
    diag: Vec<f64>,
    off: Vec<f64>,
    lambda: Vec<f64>,
    tension: Vec<f64>,
    tri: Vec<f64>,
    prev: Vec<Vec2>,
    start: Vec<Vec2>,
}

impl Scratch {
    fn new(n_links: usize) -> Self {
        let ns = n_links + 1;
        Self {
            len: vec![0.0; n_links],
            unit: vec![Vec2::zeros(); n_links],
            normal: vec![Vec2::zeros(); n_links],
            band: SymBand::new(2 * ns, 5),
            band0: SymBand::new(2 * ns, 5),
            rhs: vec![0.0; 2 * ns],
            rhs0: vec![0.0; 2 * ns],
            resting: vec![false; ns],
            inv_mass: vec![Vec2::zeros(); ns],
            contact: vec![false; ns],
            predicted: vec![Vec2::zeros(); ns],
            impulse: vec![Vec2::zeros(); ns],
            diag: vec![0.0; n_links],
            off: vec![0.0; n_links.saturating_sub(1)],
            lambda: vec![0.0; n_links],
            tension: vec![0.0; n_links],
            tri: vec![0.0; n_links],
            prev: vec![Vec2::zeros(); ns],
            start: vec![Vec2::zeros(); ns],
        }
    }
}

impl StripSim {
    pub fn new(params: &StripParams) -> Result<Self> {
        Ok(Self::with_model(ChainModel::from_params(params)?))
    }

    pub fn with_model(model: ChainModel) -> Self {
        assert!(model.n_links >= 1, "chain needs at least one link");
        let s = Scratch::new(model.n_links);
        Self { model, s }
    }

    pub fn model(&self) -> &ChainModel {
        &self.model
    }

    pub fn set_grasp(&mut self, grasp: Grasp) {
        self.model.grasp = grasp;
    }

    /// Clamps a gripper target into the reachable workspace: above the desk
    /// and no farther from the pin than `REACH_FRACTION` of the chain length,
    /// or than the gripper at `current` already is.
    pub fn reachable(&self, target: Vec2, current: Vec2) -> Vec2 {
        let mut t = target;
        if let Some(desk) = self.model.desk {
            t.y = t.y.max(desk);
        }
        let length = self.model.chain_length();
        let reach = (REACH_FRACTION * length).max(current.norm().min(length));
        let r = t.norm();
        if r > reach {
            t *= reach / r;
        }
        t
    }

    /// Advances by one `sim_dt`, moving the grasped end linearly toward
    /// `target` over the substeps. Returns the successor state.
    pub fn step(&mut self, state: &StripState, target: Vec2) -> Result<(StripState, ForceReadout)> {
        let mut next = state.clone();
        let f = self.step_in_place(&mut next, target)?;
        Ok((next, f))
    }

    pub fn step_in_place(&mut self, state: &mut StripState, target: Vec2) -> Result<ForceReadout> {
        let n_sub = self.model.substeps;
        let h = self.model.dt / n_sub as f64;
        let start = state.gripper;
        let target = match self.model.grasp {
            Grasp::Held => self.reachable(target, start),
            Grasp::Released => start,
        };
        let mut f_sum = 0.0;
        for k in 0..n_sub {
            let grip = match self.model.grasp {
                Grasp::Held => Some(start + (target - start) * ((k + 1) as f64 / n_sub as f64)),
                Grasp::Released => None,
            };
            f_sum += self.substep(state, grip, h);
            if let Some(sphere) = first_non_finite(state) {
                return Err(Error::Divergence {
                    step: state.step_index,
                    substep: k,
                    sphere,
                });
            }
        }
        state.gripper = match self.model.grasp {
            Grasp::Held => target,
            Grasp::Released => state.grasped(),
        };
        state.time += self.model.dt;
        state.step_index += 1;
        Ok(ForceReadout {
            f_x: f_sum / n_sub as f64,
        })
    }

    /// One substep; returns the horizontal pin force.
    fn substep(&mut self, state: &mut StripState, grip: Option<Vec2>, h: f64) -> f64 {
        let m = &self.model;
        let n = m.n_links;
        let ns = n + 1;
        let (k, b, mass) = (m.stiffness, m.damping, m.mass);
        let s = &mut self.s;
        let p = &state.positions;
        let v = &state.velocities;

        for a in 0..n {
            let d = p[a + 1] - p[a];
            let l = d.norm();
            s.len[a] = l;
            s.unit[a] = d / l;
            s.normal[a] = Vec2::new(-d.y, d.x) / (l * l);
        }

        // Linearly implicit bending/damping: A Δv = h f - h² k G v.
        s.band.clear();
        for c in 0..2 * ns {
            s.band.add(c, c, mass);
            s.rhs[c] = 0.0;
        }
        for i in 0..ns {
            s.rhs[2 * i + 1] = -h * mass * m.gravity;
        }
        // Stiff implicit springs along the links, so the velocity update (and
        // with it the desk contact decision) already respects inextensibility.
        let kl = m.link_stiffness();
        for a in 0..n {
            let u = s.unit[a];
            let stretch = s.len[a] - m.link_length;
            let rate = u.dot(&(v[a + 1] - v[a]));
            let f = -h * kl * (stretch + h * rate);
            let (ca, cb) = (2 * a, 2 * a + 2);
            s.rhs[cb] += f * u.x;
            s.rhs[cb + 1] += f * u.y;
            s.rhs[ca] -= f * u.x;
            s.rhs[ca + 1] -= f * u.y;
            let c = h * h * kl;
            let (xx, yy, xy) = (c * u.x * u.x, c * u.y * u.y, c * u.x * u.y);
            for (hi, lo, sign) in [(ca, ca, 1.0), (cb, cb, 1.0), (cb, ca, -1.0)] {
                s.band.add(hi, lo, sign * xx);
                s.band.add(hi + 1, lo + 1, sign * yy);
                s.band.add(hi + 1, lo, sign * xy);
                if hi != lo {
                    s.band.add(hi, lo + 1, sign * xy);
                }
            }
        }
        let coupling = h * b + h * h * k;
        for j in 1..n {
            let (da, db) = (p[j] - p[j - 1], p[j + 1] - p[j]);
            let theta = (da.x * db.y - da.y * db.x).atan2(da.dot(&db));
            let g = [s.normal[j - 1], -s.normal[j - 1] - s.normal[j], s.normal[j]];
            let gv = g[0].dot(&v[j - 1]) + g[1].dot(&v[j]) + g[2].dot(&v[j + 1]);
            let torque = k * theta + b * gv;
            let scale = -h * torque - h * h * k * gv;
            for (q, gq) in g.iter().enumerate() {
                let c = 2 * (j - 1 + q);
                s.rhs[c] += scale * gq.x;
                s.rhs[c + 1] += scale * gq.y;
            }
            for q in 0..3 {
                for r in 0..=q {
                    let (cq, cr) = (2 * (j - 1 + q), 2 * (j - 1 + r));
                    let (gq, gr) = (g[q], g[r]);
                    s.band.add(cq, cr, coupling * gq.x * gr.x);
                    s.band.add(cq + 1, cr + 1, coupling * gq.y * gr.y);
                    s.band.add(cq + 1, cr, coupling * gq.y * gr.x);
                    if q != r {
                        s.band.add(cq, cr + 1, coupling * gq.x * gr.y);
                    }
                }
            }
        }

        // Known velocity changes: pinned sphere, held grasped end, and spheres
        // resting on the desk (no vertical velocity) unless the desk would
        // have to pull them down.
        let last_free = if grip.is_some() { n } else { ns };
        for i in 0..ns {
            s.resting[i] = match m.desk {
                Some(desk) => i >= 1 && i < last_free && p[i].y <= desk + RESTING_TOL,
                None => false,
            };
        }
        let any_resting = s.resting.iter().any(|r| *r);
        s.band0.copy_from(&s.band);
        s.rhs0.copy_from_slice(&s.rhs);
        for round in 0..MAX_CONTACT_ROUNDS {
            if round > 0 {
                s.band.copy_from(&s.band0);
                s.rhs.copy_from_slice(&s.rhs0);
            }
            let dv_pin = -v[0];
            s.band.fix(0, dv_pin.x, &mut s.rhs);
            s.band.fix(1, dv_pin.y, &mut s.rhs);
            if let Some(g_end) = grip {
                let dv_end = (g_end - p[n]) / h - v[n];
                s.band.fix(2 * n, dv_end.x, &mut s.rhs);
                s.band.fix(2 * n + 1, dv_end.y, &mut s.rhs);
            }
            for i in 0..ns {
                if s.resting[i] {
                    s.band.fix(2 * i + 1, -v[i].y, &mut s.rhs);
                }
            }
            if !s.band.solve_in_place(&mut s.rhs) {
                s.rhs.iter_mut().for_each(|x| *x = f64::NAN);
                break;
            }
            if !any_resting {
                break;
            }
            let mut changed = false;
            for i in 0..ns {
                if s.resting[i] {
                    let c = 2 * i + 1;
                    let reaction = s.band0.row_dot(c, &s.rhs) - s.rhs0[c];
                    if reaction < 0.0 {
                        s.resting[i] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let dv = &s.rhs;

        // Impulse the pin supplies in the velocity update.
        let pin_reaction_x = s.band0.row_dot(0, dv) - s.rhs0[0];

        for i in 0..ns {
            s.prev[i] = p[i];
            let vn = v[i] + Vec2::new(dv[2 * i], dv[2 * i + 1]);
            s.predicted[i] = p[i] + vn * h;
        }
        s.predicted[0] = Vec2::zeros();
        if let Some(g_end) = grip {
            s.predicted[n] = g_end;
        }

        let imp0_x = self.project(grip.is_some());
        let s = &mut self.s;
        let positions = &mut state.positions;
        positions.copy_from_slice(&s.predicted);
        positions[0] = Vec2::zeros();
        for i in 0..ns {
            state.velocities[i] = (positions[i] - s.prev[i]) / h;
        }
        pin_reaction_x / h + imp0_x / (h * h)
    }

    /// Projects `s.predicted` in place; returns the x impulse (mass·length)
    /// the constraints exerted on the pinned sphere.
    fn project(&mut self, held: bool) -> f64 {
        let m = &self.model;
        let n = m.n_links;
        let ns = n + 1;
        let s = &mut self.s;
        let w_free = 1.0 / m.mass;
        let compliance = w_free / LINK_STIFFNESS;
        let last_free = if held { n } else { n + 1 };

        s.contact.copy_from_slice(&s.resting);
        s.start.copy_from_slice(&s.predicted);
        let start = &s.start;
        if let Some(desk) = m.desk {
            for i in 1..last_free {
                if start[i].y < desk {
                    s.contact[i] = true;
                }
            }
        }

        let mut pin_impulse = 0.0;
        for _round in 0..MAX_CONTACT_ROUNDS {
            s.predicted.copy_from_slice(&start);
            s.tension.iter_mut().for_each(|t| *t = 0.0);
            for i in 0..ns {
                s.impulse[i] = Vec2::zeros();
                let free = i >= 1 && i < last_free;
                s.inv_mass[i] = if free { Vec2::new(w_free, w_free) } else { Vec2::zeros() };
                if s.contact[i] {
                    s.inv_mass[i].y = 0.0;
                    s.predicted[i].y = m.desk.unwrap();
                }
            }

            for _ in 0..m.max_iterations {
                let mut worst: f64 = 0.0;
                for a in 0..n {
                    let d = s.predicted[a + 1] - s.predicted[a];
                    let l = d.norm();
                    s.unit[a] = d / l;
                    s.lambda[a] = l - m.link_length - compliance * s.tension[a];
                    worst = worst.max(s.lambda[a].abs());
                }
                if worst < PROJECTION_TOL {
                    break;
                }
                for a in 0..n {
                    let u = s.unit[a];
                    let (wa, wb) = (s.inv_mass[a], s.inv_mass[a + 1]);
                    let dval = u.x * u.x * (wa.x + wb.x) + u.y * u.y * (wa.y + wb.y);
                    s.diag[a] = dval + compliance;
                    if a + 1 < n {
                        let un = s.unit[a + 1];
                        s.off[a] = -(u.x * wb.x * un.x + u.y * wb.y * un.y);
                    }
                }
                if !solve_tridiagonal(&s.diag, &s.off, &mut s.lambda, &mut s.tri) {
                    s.predicted.iter_mut().for_each(|q| *q = Vec2::new(f64::NAN, f64::NAN));
                    return f64::NAN;
                }
                for (t, y) in s.tension.iter_mut().zip(&s.lambda) {
                    *t += y;
                }
                for i in 0..ns {
                    let mut jt = Vec2::zeros();
                    if i >= 1 {
                        jt += s.unit[i - 1] * s.lambda[i - 1];
                    }
                    if i < n {
                        jt -= s.unit[i] * s.lambda[i];
                    }
                    s.impulse[i] += jt;
                    s.predicted[i] -= s.inv_mass[i].component_mul(&jt);
                }
            }
            pin_impulse = s.impulse[0].x;

            let Some(desk) = m.desk else { break };
            let mut changed = false;
            for i in 1..last_free {
                if s.resting[i] {
                    continue;
                }
                if s.contact[i] {
                    let support = m.mass * (desk - start[i].y) + s.impulse[i].y;
                    if support < 0.0 {
                        s.contact[i] = false;
                        changed = true;
                    }
                } else if s.predicted[i].y < desk - 1e-12 {
                    s.contact[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        pin_impulse
    }
}

fn first_non_finite(state: &StripState) -> Option<usize> {
    state
        .positions
        .iter()
        .zip(&state.velocities)
        .position(|(p, v)| !(p.x.is_finite() && p.y.is_finite() && v.x.is_finite() && v.y.is_finite()))
}
