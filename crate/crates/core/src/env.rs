//! The capture task: drive the vessel over a goal point.
//!
//! Each episode starts with the vessel at the origin, heading along +x and at
//! rest, and a goal inside a 90° field of view no further than 10 m away. The
//! observation is egocentric:
//!
//! ```text
//! o = [u, v, r, cos(delta), sin(delta), d]
//! ```
//!
//! where `delta` is the bearing of the goal relative to the heading and `d` the
//! distance to it. The reward is a sum of six shaped terms (see
//! [`RewardParams`]). Every episode draws its own hull, thruster and
//! disturbance parameters from a [`RandomizationConfig`] using a private
//! random stream.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, disturbance_wrench, wrap_angle, BodyState, DisturbanceState, HydroParams,
    ThrusterModel, DEFAULT_DT,
};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose, Stream};

pub const OBS_DIM: usize = 6;
pub const ACT_DIM: usize = 2;

/// Steps per episode before a timeout (60 s at 50 Hz).
pub const MAX_STEPS: u32 = 3000;
/// Distance beyond which an episode is cut short.
pub const RUNAWAY_DISTANCE: f64 = 15.0;

/// Weights `lambda1..lambda6`, shape constants `k1..k4`, and the goal radius.
///
/// ```text
/// r_dist   =  lambda1 (d_prev - d)
/// r_head   =  lambda2 (exp(k1 delta^4) + exp(k2 delta^2))
/// r_energy = -lambda3 (exp(k3 (a_l^2 + a_r^2)) - 1)
/// r_alpha  =  lambda4 (exp(k4 |r_prev - r|) - 1)
/// r_time   =  lambda5
/// r_goal   =  lambda6 once, when d < d_threshold
/// ```
///
/// The energy term is negated relative to a literal reading of the table so
/// that, with positive `lambda3` and `k3`, it is a penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    pub lambda6: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// m
    pub d_threshold: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            lambda1: 1.0,
            lambda2: 0.02,
            lambda3: 0.01,
            lambda4: 1.0,
            lambda5: -0.2,
            lambda6: 30.0,
            k1: -10.0,
            k2: -0.1,
            k3: 1.0,
            k4: -0.33,
            d_threshold: 0.1,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_threshold.is_finite() && self.d_threshold > 0.0) {
            return Err(Error::invalid("d_threshold", format!("must be > 0, got {}", self.d_threshold)));
        }
        Ok(())
    }
}

/// Per-term reward for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RewardBreakdown {
    pub dist: f64,
    pub head: f64,
    pub energy: f64,
    pub alpha: f64,
    pub time: f64,
    pub goal: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.dist + self.head + self.energy + self.alpha + self.time + self.goal
    }
}

/// Evaluates the six reward terms from plain quantities.
///
/// `goal_available` is false once the goal bonus has been paid this episode.
#[allow(clippy::too_many_arguments)]
pub fn reward_terms(
    params: &RewardParams,
    prev_d: f64,
    d: f64,
    delta: f64,
    prev_r: f64,
    r: f64,
    action: [f64; 2],
    goal_available: bool,
) -> RewardBreakdown {
    let delta2 = delta * delta;
    let effort = action[0] * action[0] + action[1] * action[1];
    RewardBreakdown {
        dist: params.lambda1 * (prev_d - d),
        head: params.lambda2 * ((params.k1 * delta2 * delta2).exp() + (params.k2 * delta2).exp()),
        energy: -params.lambda3 * ((params.k3 * effort).exp() - 1.0),
        alpha: params.lambda4 * ((params.k4 * (prev_r - r).abs()).exp() - 1.0),
        time: params.lambda5,
        goal: if goal_available && d < params.d_threshold { params.lambda6 } else { 0.0 },
    }
}

/// Reward for moving from `prev` to `next_body` under `action`.
pub fn reward(prev: &EpisodeState, action: [f64; 2], next_body: &BodyState, params: &RewardParams) -> (f64, RewardBreakdown) {
    let (d, delta) = goal_geometry(next_body, &prev.goal);
    let terms = reward_terms(params, prev.prev_d, d, delta, prev.prev_r, next_body.r, action, !prev.goal_awarded);
    (terms.total(), terms)
}

/// Goal position in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GoalSpec {
    pub x: f64,
    pub y: f64,
}

impl GoalSpec {
    /// Goal at `distance` along `bearing` (radians, counter-clockwise from +x).
    pub fn polar(distance: f64, bearing: f64) -> Self {
        let (s, c) = bearing.sin_cos();
        GoalSpec { x: distance * c, y: distance * s }
    }

    pub fn distance(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn bearing(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

/// Distance to the goal and its bearing relative to the heading, wrapped to `(-pi, pi]`.
#[inline]
pub fn goal_geometry(body: &BodyState, goal: &GoalSpec) -> (f64, f64) {
    let (dx, dy) = (goal.x - body.x, goal.y - body.y);
    (dx.hypot(dy), wrap_angle(dy.atan2(dx) - body.psi))
}

/// The evaluation grid: every combination of a distance and a bearing,
/// distance-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalGrid {
    /// m
    pub distances: Vec<f64>,
    /// degrees
    pub bearings_deg: Vec<f64>,
}

impl Default for GoalGrid {
    /// 3 to 9 m in 1 m steps, -45° to 45° in 5° steps: 133 goals.
    fn default() -> Self {
        GoalGrid {
            distances: (3..=9).map(f64::from).collect(),
            bearings_deg: (-9..=9).map(|k| 5.0 * f64::from(k)).collect(),
        }
    }
}

impl GoalGrid {
    pub fn len(&self) -> usize {
        self.distances.len() * self.bearings_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(distance, bearing_deg)` of cell `index`.
    pub fn cell(&self, index: usize) -> Result<(f64, f64)> {
        if index >= self.len() {
            return Err(Error::GridIndex { index, len: self.len() });
        }
        let per_distance = self.bearings_deg.len();
        Ok((self.distances[index / per_distance], self.bearings_deg[index % per_distance]))
    }

    pub fn goal(&self, index: usize) -> Result<GoalSpec> {
        let (d, b) = self.cell(index)?;
        Ok(GoalSpec::polar(d, b.to_radians()))
    }
}

/// Training goal ranges: uniform distance and uniform bearing.
pub const TRAIN_MIN_DISTANCE: f64 = 1.5;
pub const TRAIN_MAX_DISTANCE: f64 = 10.0;
pub const MAX_BEARING: f64 = FRAC_PI_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalMode {
    Train,
    Grid(usize),
}

/// Draws a goal relative to a vessel at the origin heading along +x.
pub fn sample_goal(rng: &mut Stream, mode: GoalMode, grid: &GoalGrid) -> Result<GoalSpec> {
    match mode {
        GoalMode::Train => {
            let d = rng::uniform(rng, TRAIN_MIN_DISTANCE, TRAIN_MAX_DISTANCE);
            let b = rng::symmetric(rng, MAX_BEARING);
            Ok(GoalSpec::polar(d, b))
        }
        GoalMode::Grid(i) => grid.goal(i),
    }
}

/// The policy input, in body frame and goal-relative terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Observation {
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub cos_head: f64,
    pub sin_head: f64,
    pub d: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [self.u, self.v, self.r, self.cos_head, self.sin_head, self.d]
    }

    pub fn to_f32(&self) -> [f32; OBS_DIM] {
        self.to_array().map(|c| c as f32)
    }
}

/// Domain-randomization magnitudes. Every `±` bound is a uniform draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    /// Per-axis goal-relative position noise, m.
    pub pos_noise: f64,
    /// Heading noise, rad.
    pub head_noise: f64,
    /// Relative jitter on every drag coefficient.
    pub drag_jitter: f64,
    pub thrust_scale_low: f64,
    pub thrust_scale_high: f64,
    /// N, per world axis
    pub force_offset_max: f64,
    /// N, per world axis
    pub force_amp_max: f64,
    /// N·m
    pub torque_offset_max: f64,
    /// N·m
    pub torque_amp_max: f64,
    /// Additive command noise bound, before clamping to `[-1, 1]`.
    pub action_noise: f64,
    /// rad/s
    pub omega_min: f64,
    /// rad/s
    pub omega_max: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            pos_noise: 0.03,
            head_noise: 0.025,
            drag_jitter: 0.10,
            thrust_scale_low: 0.5,
            thrust_scale_high: 1.0,
            force_offset_max: 2.5,
            force_amp_max: 2.5,
            torque_offset_max: 1.0,
            torque_amp_max: 1.0,
            action_noise: 0.02,
            omega_min: 0.1,
            omega_max: 1.0,
        }
    }
}

impl RandomizationConfig {
    /// No noise, no jitter, unit thrust scale, no disturbances.
    pub fn disabled() -> Self {
        RandomizationConfig {
            pos_noise: 0.0,
            head_noise: 0.0,
            drag_jitter: 0.0,
            thrust_scale_low: 1.0,
            thrust_scale_high: 1.0,
            force_offset_max: 0.0,
            force_amp_max: 0.0,
            torque_offset_max: 0.0,
            torque_amp_max: 0.0,
            action_noise: 0.0,
            ..Self::default()
        }
    }

    /// Thrust scale drawn from `[1 - fraction, 1]`, modelling battery sag.
    pub fn with_thrust_randomization(mut self, fraction: f64) -> Self {
        self.thrust_scale_low = 1.0 - fraction;
        self.thrust_scale_high = 1.0;
        self
    }

    /// Only the disturbance field of `self`; everything else disabled.
    pub fn disturbances_only(&self) -> Self {
        RandomizationConfig {
            force_offset_max: self.force_offset_max,
            force_amp_max: self.force_amp_max,
            torque_offset_max: self.torque_offset_max,
            torque_amp_max: self.torque_amp_max,
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            ..Self::disabled()
        }
    }

    pub fn without_disturbances(mut self) -> Self {
        self.force_offset_max = 0.0;
        self.force_amp_max = 0.0;
        self.torque_offset_max = 0.0;
        self.torque_amp_max = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("pos_noise", self.pos_noise),
            ("head_noise", self.head_noise),
            ("drag_jitter", self.drag_jitter),
            ("thrust_scale_low", self.thrust_scale_low),
            ("thrust_scale_high", self.thrust_scale_high),
            ("force_offset_max", self.force_offset_max),
            ("force_amp_max", self.force_amp_max),
            ("torque_offset_max", self.torque_offset_max),
            ("torque_amp_max", self.torque_amp_max),
            ("action_noise", self.action_noise),
            ("omega_min", self.omega_min),
            ("omega_max", self.omega_max),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {value}")));
            }
        }
        if self.thrust_scale_low > self.thrust_scale_high {
            return Err(Error::invalid("thrust_scale_low", "must not exceed thrust_scale_high"));
        }
        if self.omega_min > self.omega_max {
            return Err(Error::invalid("omega_min", "must not exceed omega_max"));
        }
        if self.drag_jitter > 1.0 {
            return Err(Error::invalid("drag_jitter", "must be <= 1 so coefficients stay non-negative"));
        }
        Ok(())
    }
}

/// Per-episode draw of the randomized world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeParams {
    pub hydro: HydroParams,
    /// `[left, right]` thrust multipliers.
    pub thrust_scale: [f64; 2],
    pub disturbance: DisturbanceState,
}

impl EpisodeParams {
    pub fn unperturbed(hydro: HydroParams) -> Self {
        EpisodeParams { hydro, thrust_scale: [1.0, 1.0], disturbance: DisturbanceState::NONE }
    }

    pub fn thruster_model(&self, base: &ThrusterModel) -> ThrusterModel {
        base.clone().with_scales(self.thrust_scale[0], self.thrust_scale[1])
    }
}

/// Draws drag jitter, thrust scales and the disturbance field, always in the
/// same order and count so streams stay aligned across configurations.
pub fn randomize_episode(base: &HydroParams, cfg: &RandomizationConfig, rng: &mut Stream) -> EpisodeParams {
    let jitter = cfg.drag_jitter;
    let factors: [f64; 6] = std::array::from_fn(|_| rng::uniform(rng, 1.0 - jitter, 1.0 + jitter));
    let thrust_scale: [f64; 2] =
        std::array::from_fn(|_| rng::uniform(rng, cfg.thrust_scale_low, cfg.thrust_scale_high));
    let force_offset = [rng::symmetric(rng, cfg.force_offset_max), rng::symmetric(rng, cfg.force_offset_max)];
    let force_amp = [rng::uniform(rng, 0.0, cfg.force_amp_max), rng::uniform(rng, 0.0, cfg.force_amp_max)];
    let torque_offset = rng::symmetric(rng, cfg.torque_offset_max);
    let torque_amp = rng::uniform(rng, 0.0, cfg.torque_amp_max);
    let omega = rng::uniform(rng, cfg.omega_min, cfg.omega_max);
    let phase = rng::uniform(rng, 0.0, 2.0 * PI);
    EpisodeParams {
        hydro: HydroParams { damping: base.damping.scaled(factors), inertia: base.inertia },
        thrust_scale,
        disturbance: DisturbanceState { force_offset, force_amp, torque_offset, torque_amp, omega, phase },
    }
}

/// Builds an observation, applying position noise to the goal-relative
/// vector and heading noise before the cos/sin projection.
pub fn observe(body: &BodyState, goal: &GoalSpec, cfg: &RandomizationConfig, rng: &mut Stream) -> Observation {
    let dx = goal.x - body.x + rng::symmetric(rng, cfg.pos_noise);
    let dy = goal.y - body.y + rng::symmetric(rng, cfg.pos_noise);
    let psi = body.psi + rng::symmetric(rng, cfg.head_noise);
    let delta = wrap_angle(dy.atan2(dx) - psi);
    let (sin_head, cos_head) = delta.sin_cos();
    Observation { u: body.u, v: body.v, r: body.r, cos_head, sin_head, d: dx.hypot(dy) }
}

/// When an episode counts as a capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessRule {
    /// m
    pub radius: f64,
    /// Require `|delta| < 90°` at the moment the radius is reached.
    pub head_on: bool,
}

impl SuccessRule {
    pub fn training(reward: &RewardParams) -> Self {
        SuccessRule { radius: reward.d_threshold, head_on: false }
    }

    /// Task tolerance of the capture net.
    pub fn capture() -> Self {
        SuccessRule { radius: 0.3, head_on: true }
    }

    #[inline]
    pub fn is_met(&self, d: f64, delta: f64) -> bool {
        d < self.radius && (!self.head_on || delta.abs() < FRAC_PI_2)
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Success,
    Timeout,
    Runaway,
}

impl Termination {
    /// Whether the value after this step is zero (true terminal) rather than
    /// bootstrapped. Timeouts and runaways are cut-offs of an ongoing task.
    pub fn is_terminal(&self) -> bool {
        matches!(self, Termination::Success)
    }
}

/// Everything that shapes an episode except its random draws.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub hydro: HydroParams,
    pub thrusters: ThrusterModel,
    pub reward: RewardParams,
    pub randomization: RandomizationConfig,
    pub success: SuccessRule,
    pub grid: GoalGrid,
    pub dt: f64,
    pub max_steps: u32,
    pub runaway_distance: f64,
}

impl EnvConfig {
    pub fn new(hydro: HydroParams, thrusters: ThrusterModel, reward: RewardParams, randomization: RandomizationConfig) -> Self {
        EnvConfig {
            hydro,
            thrusters,
            success: SuccessRule::training(&reward),
            reward,
            randomization,
            grid: GoalGrid::default(),
            dt: DEFAULT_DT,
            max_steps: MAX_STEPS,
            runaway_distance: RUNAWAY_DISTANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hydro.validate()?;
        self.reward.validate()?;
        self.randomization.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidTimeStep(self.dt));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be >= 1"));
        }
        if !(self.success.radius > 0.0) {
            return Err(Error::invalid("success.radius", "must be > 0"));
        }
        Ok(())
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::new(
            HydroParams::identified(),
            ThrusterModel::default(),
            RewardParams::default(),
            RandomizationConfig::default(),
        )
    }
}

/// Mutable state of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub body: BodyState,
    pub goal: GoalSpec,
    pub t_step: u32,
    pub prev_d: f64,
    pub prev_r: f64,
    pub params: EpisodeParams,
    pub goal_awarded: bool,
    pub done: bool,
    pub rng: Stream,
}

impl EpisodeState {
    /// Starts an episode at the origin, at rest, with randomized parameters
    /// drawn from `rng`. Returns the state and its first observation.
    pub fn start(cfg: &EnvConfig, goal: GoalSpec, mut rng: Stream) -> (Self, Observation) {
        let params = randomize_episode(&cfg.hydro, &cfg.randomization, &mut rng);
        let body = BodyState::default();
        let obs = observe(&body, &goal, &cfg.randomization, &mut rng);
        let state = EpisodeState {
            body,
            goal,
            t_step: 0,
            prev_d: goal_geometry(&body, &goal).0,
            prev_r: 0.0,
            params,
            goal_awarded: false,
            done: false,
            rng,
        };
        (state, obs)
    }

    pub fn time(&self, dt: f64) -> f64 {
        f64::from(self.t_step) * dt
    }
}

/// Applies actuator noise and clamps to the command range.
#[inline]
pub(crate) fn perturb_command(action: [f64; 2], cfg: &RandomizationConfig, rng: &mut Stream) -> [f64; 2] {
    action.map(|a| (a + rng::symmetric(rng, cfg.action_noise)).clamp(-1.0, 1.0))
}

/// Thrust, disturbance and one integration step.
#[inline(always)]
pub(crate) fn propagate(
    body: &BodyState,
    command: [f64; 2],
    time: f64,
    params: &EpisodeParams,
    thrusters: &ThrusterModel,
    dt: f64,
) -> BodyState {
    let thrust = dynamics::scaled_thrust(command, thrusters, params.thrust_scale);
    let total = thrust + disturbance_wrench(time, &params.disturbance, body.psi);
    dynamics::advance(body, total, &params.hydro.damping, params.hydro.inertia.inverse_diagonal(), dt)
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub breakdown: RewardBreakdown,
    pub termination: Option<Termination>,
    /// Ground-truth state after the step.
    pub body: BodyState,
    /// Commands actually sent to the thrusters, after noise and clamping.
    pub applied: [f64; 2],
    /// True distance and bearing to the goal after the step.
    pub distance: f64,
    pub delta: f64,
}

impl StepInfo {
    pub fn success(&self) -> bool {
        self.termination == Some(Termination::Success)
    }
}

/// Clamps a policy action to the command range; NaN reads as idle.
#[inline]
pub(crate) fn sanitize_action(action: [f64; 2]) -> [f64; 2] {
    action.map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) })
}

pub(crate) struct Settled {
    pub breakdown: RewardBreakdown,
    pub termination: Option<Termination>,
    pub d: f64,
    pub delta: f64,
}

/// Reward and termination of a step that ended in `next` after `t_step` steps.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn settle(
    cfg: &EnvConfig,
    goal: &GoalSpec,
    prev_d: f64,
    prev_r: f64,
    goal_awarded: bool,
    t_step: u32,
    next: &BodyState,
    action: [f64; 2],
) -> Settled {
    let (d, delta) = goal_geometry(next, goal);
    let breakdown = reward_terms(&cfg.reward, prev_d, d, delta, prev_r, next.r, action, !goal_awarded);
    let termination = if cfg.success.is_met(d, delta) {
        Some(Termination::Success)
    } else if d > cfg.runaway_distance {
        Some(Termination::Runaway)
    } else if t_step >= cfg.max_steps {
        Some(Termination::Timeout)
    } else {
        None
    };
    Settled { breakdown, termination, d, delta }
}

/// Advances an episode by one physics step.
pub fn env_step(state: &mut EpisodeState, action: [f64; 2], cfg: &EnvConfig) -> Result<StepOutcome> {
    if state.done {
        return Err(Error::EpisodeTerminated);
    }
    let action = sanitize_action(action);
    let applied = perturb_command(action, &cfg.randomization, &mut state.rng);
    let next = propagate(&state.body, applied, state.time(cfg.dt), &state.params, &cfg.thrusters, cfg.dt);
    state.t_step += 1;
    let settled = settle(cfg, &state.goal, state.prev_d, state.prev_r, state.goal_awarded, state.t_step, &next, action);

    state.goal_awarded |= settled.breakdown.goal != 0.0;
    state.body = next;
    state.prev_d = settled.d;
    state.prev_r = next.r;
    state.done = settled.termination.is_some();

    let observation = observe(&next, &state.goal, &cfg.randomization, &mut state.rng);
    Ok(StepOutcome {
        observation,
        reward: settled.breakdown.total(),
        done: state.done,
        info: StepInfo {
            breakdown: settled.breakdown,
            termination: settled.termination,
            body: next,
            applied,
            distance: settled.d,
            delta: settled.delta,
        },
    })
}

/// A single environment with its own episode streams.
///
/// Episode `k` of environment `index` always draws from
/// `rng::stream(master_seed, Purpose::Episode, index, k)`.
#[derive(Debug, Clone)]
pub struct CaptureEnv {
    cfg: EnvConfig,
    master_seed: u64,
    index: u64,
    episode: u64,
    state: Option<EpisodeState>,
}

impl CaptureEnv {
    pub fn new(cfg: EnvConfig, master_seed: u64, index: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(CaptureEnv { cfg, master_seed, index, episode: 0, state: None })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Episodes started so far.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn state(&self) -> Option<&EpisodeState> {
        self.state.as_ref()
    }

    fn next_stream(&mut self) -> Stream {
        let rng = rng::stream(self.master_seed, Purpose::Episode, self.index, self.episode);
        self.episode += 1;
        rng
    }

    /// Starts a new episode with a goal drawn according to `mode`.
    pub fn reset(&mut self, mode: GoalMode) -> Result<Observation> {
        let mut rng = self.next_stream();
        let goal = sample_goal(&mut rng, mode, &self.cfg.grid)?;
        let (state, obs) = EpisodeState::start(&self.cfg, goal, rng);
        self.state = Some(state);
        Ok(obs)
    }

    /// Starts a new episode with an explicit goal.
    pub fn reset_with_goal(&mut self, goal: GoalSpec) -> Observation {
        let rng = self.next_stream();
        let (state, obs) = EpisodeState::start(&self.cfg, goal, rng);
        self.state = Some(state);
        obs
    }

    pub fn step(&mut self, action: [f64; 2]) -> Result<StepOutcome> {
        let state = self.state.as_mut().ok_or(Error::EpisodeTerminated)?;
        env_step(state, action, &self.cfg)
    }
}
