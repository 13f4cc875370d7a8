//! Rewards and closed-loop episodes.
//!
//! The return of an episode is the sum of per-control-step force penalties
//! `-a |f_x| / N` and a terminal misalignment term `-|d|`. Episodes in which
//! the policy never brings the layers into contact within the horizon are
//! finished by a forced horizontal motion toward the pinned end and pay an
//! extra overtime penalty.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::policy::{self, act, apply_action, Observation, PolicyWeights};
use crate::sim::{
    detect_desk_contact_x, detect_layer_touch, StripParams, StripSim, StripState, TouchEvent, TrajectoryRecord,
    Vec2,
};

/// Force penalty scale and overtime penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub a: f64,
    pub c_h: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { a: 0.01, c_h: 0.1 }
    }
}

/// Closed-loop episode settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub step_size: f64,
    /// Height the gripper is lifted to before the policy takes over, m.
    pub lift_height: f64,
    pub reward: RewardConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon: policy::HORIZON,
            step_size: policy::STEP_SIZE,
            lift_height: LIFT_HEIGHT,
            reward: RewardConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= crate::paths::MAX_GRIPPER_SPEED * CONTROL_DT + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be in (0, {}] m",
                crate::paths::MAX_GRIPPER_SPEED * CONTROL_DT
            )));
        }
        if !(self.reward.a >= 0.0 && self.reward.c_h >= 0.0 && self.lift_height > 0.0) {
            return Err(Error::InvalidConfig("a, c_h must be >= 0 and lift_height > 0".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("horizon", self.horizon);
        kv.insert("step_size", self.step_size);
        kv.insert("lift_height", self.lift_height);
        kv.insert("a", self.reward.a);
        kv.insert("c_h", self.reward.c_h);
        kv
    }

    pub fn update_from(&mut self, kv: &KeyValues) -> Result<()> {
        kv.update("horizon", &mut self.horizon)?;
        kv.update("step_size", &mut self.step_size)?;
        kv.update("lift_height", &mut self.lift_height)?;
        kv.update("a", &mut self.reward.a)?;
        kv.update("c_h", &mut self.reward.c_h)?;
        self.validate()
    }
}

/// Starting height of the closed-loop folding, m.
pub const LIFT_HEIGHT: f64 = 0.1;
/// Horizontal slack left when lifting, as a fraction of the strip length.
pub const LIFT_SLACK: f64 = 0.05;
/// Duration of one control step at the default simulation step, s.
pub const CONTROL_DT: f64 = 0.05;

/// `-a |f_x| / N`.
pub fn intermediate_reward(f_x: f64, n: usize, a: f64) -> f64 {
    debug_assert!(n >= 1);
    -a * f_x.abs() / n as f64
}

/// `-|d|` for a touch; a touchless episode is handled by the shaping phase.
pub fn terminal_reward(event: &TouchEvent) -> Option<f64> {
    event.touched.then(|| -event.d.abs())
}

/// Reward of a failed (diverged) episode.
pub fn failure_reward(params: &StripParams, cfg: &RewardConfig) -> f64 {
    -(cfg.c_h + params.strip_length)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub touched: bool,
    pub event: TouchEvent,
    /// Oriented displacement; `NaN` when the layers never touched.
    pub d: f64,
    /// Number of control steps N.
    pub steps: usize,
    pub force_trace: Vec<f64>,
    pub intermediate_reward_sum: f64,
    pub terminal_reward: f64,
    pub total_reward: f64,
    pub trajectory: Vec<TrajectoryRecord>,
    /// Policy action of every control step (`None` outside policy control).
    pub actions: Vec<Option<f64>>,
    /// Control steps spent in the forced-horizontal shaping phase.
    pub shaping_steps: usize,
    pub failed: bool,
}

impl EpisodeResult {
    /// Builds the reward decomposition from a force trace and a touch event.
    pub fn assemble(
        event: TouchEvent,
        force_trace: Vec<f64>,
        trajectory: Vec<TrajectoryRecord>,
        actions: Vec<Option<f64>>,
        shaping_steps: usize,
        params: &StripParams,
        cfg: &RewardConfig,
    ) -> Self {
        let n = force_trace.len().max(1);
        let intermediate: f64 = force_trace.iter().map(|f| intermediate_reward(*f, n, cfg.a)).sum();
        let overtime = if shaping_steps > 0 { cfg.c_h } else { 0.0 };
        let terminal = match terminal_reward(&event) {
            Some(r) => r - overtime,
            None => failure_reward(params, cfg),
        };
        Self {
            touched: event.touched,
            d: if event.touched { event.d } else { f64::NAN },
            event,
            steps: force_trace.len(),
            force_trace,
            intermediate_reward_sum: intermediate,
            terminal_reward: terminal,
            total_reward: intermediate + terminal,
            trajectory,
            actions,
            shaping_steps,
            failed: false,
        }
    }

    pub fn failed(params: &StripParams, cfg: &RewardConfig) -> Self {
        let r = failure_reward(params, cfg);
        Self {
            touched: false,
            event: TouchEvent::none(),
            d: f64::NAN,
            steps: 0,
            force_trace: Vec::new(),
            intermediate_reward_sum: 0.0,
            terminal_reward: r,
            total_reward: r,
            trajectory: Vec::new(),
            actions: Vec::new(),
            shaping_steps: 0,
            failed: true,
        }
    }
}

/// Bookkeeping shared by open-loop and closed-loop rollouts.
pub(crate) struct Rollout<'a> {
    params: &'a StripParams,
    reward: &'a RewardConfig,
    pub state: StripState,
    event: TouchEvent,
    force_sum: f64,
    force_steps: usize,
    force_trace: Vec<f64>,
    records: Vec<TrajectoryRecord>,
    actions: Vec<Option<f64>>,
    shaping_steps: usize,
}

impl<'a> Rollout<'a> {
    pub fn new(params: &'a StripParams, reward: &'a RewardConfig, state: StripState) -> Self {
        Self {
            params,
            reward,
            state,
            event: TouchEvent::none(),
            force_sum: 0.0,
            force_steps: 0,
            force_trace: Vec::new(),
            records: Vec::new(),
            actions: Vec::new(),
            shaping_steps: 0,
        }
    }

    pub fn touched(&self) -> bool {
        self.event.touched
    }

    pub fn sim_step(&mut self, sim: &mut StripSim, target: Vec2) -> Result<()> {
        let f = sim.step_in_place(&mut self.state, target)?;
        self.force_sum += f.f_x;
        self.force_steps += 1;
        let ev = detect_layer_touch(&self.state, self.params);
        if ev.touched {
            self.event = ev;
        }
        Ok(())
    }

    /// Closes the current control step: averages the force and logs a record.
    pub fn close_control_step(&mut self, action: Option<f64>) {
        if self.force_steps == 0 {
            return;
        }
        let f_x = self.force_sum / self.force_steps as f64;
        self.force_sum = 0.0;
        self.force_steps = 0;
        self.force_trace.push(f_x);
        self.actions.push(action);
        self.records.push(TrajectoryRecord {
            time_s: self.state.time,
            gripper_x: self.state.gripper.x,
            gripper_z: self.state.gripper.y,
            x_c: detect_desk_contact_x(&self.state, self.params),
            f_x,
            touched: self.event.touched,
            d_if_touched: self.event.touched.then_some(self.event.d),
        });
    }

    /// Moves the gripper to `target` over one control period, stopping early
    /// on touch.
    pub fn control_step(&mut self, sim: &mut StripSim, target: Vec2, action: Option<f64>) -> Result<()> {
        let start = self.state.gripper;
        for i in 0..policy::CONTROL_PERIOD {
            let frac = (i + 1) as f64 / policy::CONTROL_PERIOD as f64;
            self.sim_step(sim, start + (target - start) * frac)?;
            if self.touched() {
                break;
            }
        }
        self.close_control_step(action);
        Ok(())
    }

    pub fn finish(self) -> EpisodeResult {
        EpisodeResult::assemble(
            self.event,
            self.force_trace,
            self.records,
            self.actions,
            self.shaping_steps,
            self.params,
            self.reward,
        )
    }
}

/// Start point of the closed-loop phase: `lift_height` above the desk, drawn
/// inward far enough to leave the lifted part of the strip some slack.
pub fn lift_target(params: &StripParams, lift_height: f64) -> Vec2 {
    let l = params.strip_length;
    let x = (l * l - lift_height * lift_height).max(0.0).sqrt() - LIFT_SLACK * l;
    Vec2::new(x, lift_height)
}

/// Lifts the grasped end from the flat state to [`lift_target`] along a
/// straight line at the gripper speed limit, then holds for one control
/// period. Independent of the policy, so it can be shared between rollouts.
pub fn prelift(params: &StripParams, lift_height: f64) -> Result<StripState> {
    let mut sim = StripSim::new(params)?;
    let mut state = StripState::flat(params)?;
    let start = state.gripper;
    let goal = lift_target(params, lift_height);
    let ds = crate::paths::MAX_GRIPPER_SPEED * params.sim_dt;
    let n = ((goal - start).norm() / ds).ceil().max(1.0) as usize;
    for i in 1..=n {
        let t = start + (goal - start) * (i as f64 / n as f64);
        sim.step_in_place(&mut state, t)?;
    }
    for _ in 0..policy::CONTROL_PERIOD {
        sim.step_in_place(&mut state, goal)?;
    }
    Ok(state)
}

/// Closed-loop folding episode from the flat strip.
pub fn run_episode(weights: &PolicyWeights, params: &StripParams, cfg: &EpisodeConfig) -> EpisodeResult {
    match prelift(params, cfg.lift_height) {
        Ok(start) => run_episode_from(weights, params, cfg, start),
        Err(e) => {
            log::warn!("pre-lift failed for k={} b={}: {e}", params.joint_stiffness, params.joint_damping);
            EpisodeResult::failed(params, &cfg.reward)
        }
    }
}

/// Closed-loop folding episode from an already lifted state.
pub fn run_episode_from(
    weights: &PolicyWeights,
    params: &StripParams,
    cfg: &EpisodeConfig,
    start: StripState,
) -> EpisodeResult {
    match try_run_episode(weights, params, cfg, start) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("episode failed for k={} b={}: {e}", params.joint_stiffness, params.joint_damping);
            EpisodeResult::failed(params, &cfg.reward)
        }
    }
}

/// Like [`run_episode_from`] but with divergence reported as an error.
pub fn try_run_episode(
    weights: &PolicyWeights,
    params: &StripParams,
    cfg: &EpisodeConfig,
    start: StripState,
) -> Result<EpisodeResult> {
    try_run_episode_observed(weights, params, cfg, start, |_| {})
}

/// [`try_run_episode`] calling `observe` with the state after every control
/// step.
pub fn try_run_episode_observed(
    weights: &PolicyWeights,
    params: &StripParams,
    cfg: &EpisodeConfig,
    start: StripState,
    mut observe: impl FnMut(&StripState),
) -> Result<EpisodeResult> {
    let mut sim = StripSim::new(params)?;
    let mut rollout = Rollout::new(params, &cfg.reward, start);
    let l = params.strip_length;
    for _ in 0..cfg.horizon {
        let obs = Observation::of(&rollout.state, params);
        let phi = act(weights, &obs, l);
        let target = apply_action(&rollout.state, phi, cfg.step_size, l);
        rollout.control_step(&mut sim, target, Some(phi))?;
        observe(&rollout.state);
        if rollout.touched() {
            return Ok(rollout.finish());
        }
    }
    // Shaping: horizontal motion toward the pinned end until touch or x-limit.
    let x_limit = -0.2 * l;
    while !rollout.touched() && rollout.state.gripper.x > x_limit + 1e-12 {
        let target = apply_action(&rollout.state, PI, cfg.step_size, l);
        rollout.control_step(&mut sim, target, None)?;
        observe(&rollout.state);
        rollout.shaping_steps += 1;
    }
    Ok(rollout.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intermediate_reward_examples() {
        assert_eq!(intermediate_reward(0.0, 5, 0.01), 0.0);
        assert!((intermediate_reward(-2.0, 10, 1.0) - (-0.2)).abs() < 1e-15);
        assert_eq!(intermediate_reward(123.0, 10, 0.0), 0.0);
    }

    #[test]
    fn terminal_reward_examples() {
        let at = |d: f64| TouchEvent {
            touched: true,
            d,
            ..TouchEvent::none()
        };
        assert_eq!(terminal_reward(&at(0.02)), Some(-0.02));
        assert_eq!(terminal_reward(&at(0.0)), Some(0.0));
        assert_eq!(terminal_reward(&at(-0.0368)), Some(-0.0368));
        assert_eq!(terminal_reward(&TouchEvent::none()), None);
    }

    #[test]
    fn terminal_penalty_is_monotone_in_displacement() {
        let mut last = f64::INFINITY;
        for d in [0.0, 0.001, 0.01, 0.1, 0.3] {
            for sign in [1.0, -1.0] {
                let ev = TouchEvent {
                    touched: true,
                    d: sign * d,
                    ..TouchEvent::none()
                };
                let r = terminal_reward(&ev).unwrap();
                assert!(r <= last);
                if d > 0.0 {
                    assert!(r < -0.0);
                }
            }
            let r = -d;
            assert!(r < last || d == 0.0);
            last = r;
        }
    }

    #[test]
    fn assembled_totals_add_up() {
        let params = StripParams::desk_scale();
        let cfg = RewardConfig::default();
        let ev = TouchEvent::at(40, 0.15, 60, 0.01);
        let forces = vec![0.3, -1.2, 2.5, 0.0];
        let r = EpisodeResult::assemble(ev, forces.clone(), vec![], vec![None; 4], 0, &params, &cfg);
        let expect_inter: f64 = forces.iter().map(|f| -0.01 * f.abs() / 4.0).sum();
        assert_eq!(r.intermediate_reward_sum, expect_inter);
        assert_eq!(r.terminal_reward, -ev.d.abs());
        assert_eq!(r.total_reward, r.intermediate_reward_sum + r.terminal_reward);

        let shaped = EpisodeResult::assemble(ev, forces, vec![], vec![None; 4], 2, &params, &cfg);
        assert_eq!(shaped.terminal_reward, -ev.d.abs() - cfg.c_h);
        let none = EpisodeResult::assemble(TouchEvent::none(), vec![], vec![], vec![], 3, &params, &cfg);
        assert_eq!(none.terminal_reward, -(cfg.c_h + params.strip_length));
        assert!(none.total_reward.is_finite());
    }

    #[test]
    fn lift_target_leaves_slack() {
        let p = StripParams::desk_scale();
        let t = lift_target(&p, 0.1);
        assert_eq!(t.y, 0.1);
        assert!(t.norm() < p.strip_length * 0.96);
    }
}
