//! Many capture environments stepped together.
//!
//! Environments live in fixed-size shards of [`SHARD_LANES`] lanes. Inside a
//! shard the vessel state and the randomized per-episode parameters are stored
//! as one flat array per field, and the physics update runs as a single loop
//! over those arrays. Shards are stepped in parallel; since no value is ever
//! combined across shards, results do not depend on the number of workers.
//!
//! ```
//! use asvlab::batch::{BatchConfig, BatchEnv, Workers};
//! use asvlab::env::EnvConfig;
//!
//! let cfg = BatchConfig { n_envs: 8, master_seed: 7, workers: Workers::Fixed(1) };
//! let mut batch = BatchEnv::new(cfg, EnvConfig::default())?;
//! let out = batch.step(&[[0.5, 0.5]; 8])?;
//! assert_eq!(out.len(), 8);
//! # Ok::<(), asvlab::Error>(())
//! ```

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyState, Damping, DisturbanceState, HydroParams};
use crate::env::{
    self, observe, perturb_command, propagate, sample_goal, EnvConfig, EpisodeParams, EpisodeState, GoalMode,
    GoalSpec, RewardBreakdown, Termination, OBS_DIM,
};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose, Stream};

/// Lanes per shard. Fixed so the partition of work never depends on the
/// worker count.
pub const SHARD_LANES: usize = 64;
pub const DEFAULT_N_ENVS: usize = 1024;

/// Worker threads: a fixed count or one per hardware thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "WorkersRepr", into = "WorkersRepr")]
pub enum Workers {
    #[default]
    Auto,
    Fixed(usize),
}

impl Workers {
    pub fn resolve(self) -> usize {
        match self {
            Workers::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
            Workers::Fixed(n) => n.max(1),
        }
    }
}

impl FromStr for Workers {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Workers::Auto),
            n => match n.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Workers::Fixed(k)),
                _ => Err(Error::Config(format!("workers must be `auto` or a positive integer, got `{s}`"))),
            },
        }
    }
}

impl fmt::Display for Workers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Workers::Auto => f.write_str("auto"),
            Workers::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WorkersRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<WorkersRepr> for Workers {
    type Error = Error;

    fn try_from(r: WorkersRepr) -> Result<Self> {
        match r {
            WorkersRepr::Count(n) => Workers::from_str(&n.to_string()),
            WorkersRepr::Name(s) => Workers::from_str(&s),
        }
    }
}

impl From<Workers> for WorkersRepr {
    fn from(w: Workers) -> Self {
        match w {
            Workers::Auto => WorkersRepr::Name("auto".into()),
            Workers::Fixed(n) => WorkersRepr::Count(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub n_envs: usize,
    pub master_seed: u64,
    pub workers: Workers,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig { n_envs: DEFAULT_N_ENVS, master_seed: 0, workers: Workers::Auto }
    }
}

/// Per-lane result of a batch step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneOutput {
    /// Observation to act on next: the first observation of a fresh episode
    /// when this lane just finished.
    pub observation: [f64; OBS_DIM],
    pub reward: f64,
    pub done: bool,
    pub info: LaneInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneInfo {
    pub breakdown: RewardBreakdown,
    pub termination: Option<Termination>,
    /// Last observation of the finished episode, for bootstrapping.
    pub final_observation: Option<[f64; OBS_DIM]>,
    /// Ground-truth state after the step, before any reset.
    pub body: BodyState,
    /// Counter of the episode the step belonged to.
    pub episode: u64,
    /// Undiscounted return so far of that episode.
    pub episode_return: f64,
    pub episode_steps: u32,
}

impl LaneInfo {
    pub fn success(&self) -> bool {
        self.termination == Some(Termination::Success)
    }
}

/// Structure-of-arrays state for up to [`SHARD_LANES`] environments.
#[derive(Debug, Clone)]
struct Shard {
    first: u64,
    len: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    psi: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    r: Vec<f64>,
    xu: Vec<f64>,
    yv: Vec<f64>,
    nr: Vec<f64>,
    xuu: Vec<f64>,
    yvv: Vec<f64>,
    nrr: Vec<f64>,
    scale_left: Vec<f64>,
    scale_right: Vec<f64>,
    disturbance: Vec<DisturbanceState>,
    command: Vec<[f64; 2]>,
    goal: Vec<GoalSpec>,
    prev_d: Vec<f64>,
    prev_r: Vec<f64>,
    t_step: Vec<u32>,
    goal_awarded: Vec<bool>,
    episode: Vec<u64>,
    episode_return: Vec<f64>,
    rng: Vec<Stream>,
}

impl Shard {
    fn new(first: u64, len: usize, base: &HydroParams) -> Self {
        let zeros = || vec![0.0; len];
        let placeholder = rng::stream(0, Purpose::Episode, 0, 0);
        let d = base.damping;
        Shard {
            first,
            len,
            x: zeros(),
            y: zeros(),
            psi: zeros(),
            u: zeros(),
            v: zeros(),
            r: zeros(),
            xu: vec![d.xu; len],
            yv: vec![d.yv; len],
            nr: vec![d.nr; len],
            xuu: vec![d.xuu; len],
            yvv: vec![d.yvv; len],
            nrr: vec![d.nrr; len],
            scale_left: vec![1.0; len],
            scale_right: vec![1.0; len],
            disturbance: vec![DisturbanceState::NONE; len],
            command: vec![[0.0; 2]; len],
            goal: vec![GoalSpec::default(); len],
            prev_d: zeros(),
            prev_r: zeros(),
            t_step: vec![0; len],
            goal_awarded: vec![false; len],
            episode: vec![0; len],
            episode_return: zeros(),
            rng: vec![placeholder; len],
        }
    }

    fn body(&self, i: usize) -> BodyState {
        BodyState { x: self.x[i], y: self.y[i], psi: self.psi[i], u: self.u[i], v: self.v[i], r: self.r[i] }
    }

    fn set_body(&mut self, i: usize, b: &BodyState) {
        self.x[i] = b.x;
        self.y[i] = b.y;
        self.psi[i] = b.psi;
        self.u[i] = b.u;
        self.v[i] = b.v;
        self.r[i] = b.r;
    }

    fn params(&self, i: usize, base: &HydroParams) -> EpisodeParams {
        EpisodeParams {
            hydro: HydroParams {
                damping: Damping {
                    xu: self.xu[i],
                    yv: self.yv[i],
                    nr: self.nr[i],
                    xuu: self.xuu[i],
                    yvv: self.yvv[i],
                    nrr: self.nrr[i],
                },
                inertia: base.inertia,
            },
            thrust_scale: [self.scale_left[i], self.scale_right[i]],
            disturbance: self.disturbance[i],
        }
    }

    /// Starts episode `episode` in lane `i` and returns its first observation.
    fn start_lane(&mut self, i: usize, episode: u64, cfg: &EnvConfig, master_seed: u64) -> [f64; OBS_DIM] {
        let mut rng = rng::stream(master_seed, Purpose::Episode, self.first + i as u64, episode);
        let goal = sample_goal(&mut rng, GoalMode::Train, &cfg.grid).expect("train goals never fail");
        let (state, obs) = EpisodeState::start(cfg, goal, rng);
        let EpisodeState { body, goal, t_step, prev_d, prev_r, params, goal_awarded, rng, .. } = state;
        self.set_body(i, &body);
        let d = params.hydro.damping;
        self.xu[i] = d.xu;
        self.yv[i] = d.yv;
        self.nr[i] = d.nr;
        self.xuu[i] = d.xuu;
        self.yvv[i] = d.yvv;
        self.nrr[i] = d.nrr;
        self.scale_left[i] = params.thrust_scale[0];
        self.scale_right[i] = params.thrust_scale[1];
        self.disturbance[i] = params.disturbance;
        self.goal[i] = goal;
        self.prev_d[i] = prev_d;
        self.prev_r[i] = prev_r;
        self.t_step[i] = t_step;
        self.goal_awarded[i] = goal_awarded;
        self.episode[i] = episode;
        self.episode_return[i] = 0.0;
        self.rng[i] = rng;
        obs.to_array()
    }

    /// Thrust, disturbance, damping and integration for every lane.
    fn physics(&mut self, cfg: &EnvConfig) {
        for i in 0..self.len {
            let params = self.params(i, &cfg.hydro);
            let time = f64::from(self.t_step[i]) * cfg.dt;
            let next = propagate(&self.body(i), self.command[i], time, &params, &cfg.thrusters, cfg.dt);
            self.set_body(i, &next);
        }
    }

    fn step(&mut self, actions: &[[f64; 2]], out: &mut [LaneOutput], cfg: &EnvConfig, master_seed: u64) {
        for i in 0..self.len {
            let action = env::sanitize_action(actions[i]);
            self.command[i] = perturb_command(action, &cfg.randomization, &mut self.rng[i]);
        }
        self.physics(cfg);
        for (i, slot) in out.iter_mut().enumerate().take(self.len) {
            let next = self.body(i);
            let action = env::sanitize_action(actions[i]);
            self.t_step[i] += 1;
            let s = env::settle(
                cfg,
                &self.goal[i],
                self.prev_d[i],
                self.prev_r[i],
                self.goal_awarded[i],
                self.t_step[i],
                &next,
                action,
            );
            self.goal_awarded[i] |= s.breakdown.goal != 0.0;
            self.prev_d[i] = s.d;
            self.prev_r[i] = next.r;
            let reward = s.breakdown.total();
            self.episode_return[i] += reward;
            let obs = observe(&next, &self.goal[i], &cfg.randomization, &mut self.rng[i]).to_array();

            let done = s.termination.is_some();
            let info = LaneInfo {
                breakdown: s.breakdown,
                termination: s.termination,
                final_observation: done.then_some(obs),
                body: next,
                episode: self.episode[i],
                episode_return: self.episode_return[i],
                episode_steps: self.t_step[i],
            };
            let observation = if done { self.start_lane(i, self.episode[i] + 1, cfg, master_seed) } else { obs };
            *slot = LaneOutput { observation, reward, done, info };
        }
    }
}

/// A batch of independently seeded capture environments with auto-reset.
///
/// Environment `i` plays episodes `0, 1, 2, ...` drawn from
/// `rng::stream(master_seed, Purpose::Episode, i, k)`, the same streams a
/// [`CaptureEnv`](crate::env::CaptureEnv) with index `i` would use.
pub struct BatchEnv {
    cfg: BatchConfig,
    env: EnvConfig,
    shards: Vec<Shard>,
    outputs: Vec<LaneOutput>,
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for BatchEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BatchEnv").field("cfg", &self.cfg).field("shards", &self.shards.len()).finish()
    }
}

impl BatchEnv {
    /// Resets every environment. Initial observations are available through
    /// [`BatchEnv::observations`].
    pub fn new(cfg: BatchConfig, env: EnvConfig) -> Result<Self> {
        if cfg.n_envs == 0 {
            return Err(Error::invalid("n_envs", "must be >= 1"));
        }
        env.validate()?;
        let workers = cfg.workers.resolve();
        let pool = if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
            Some(pool)
        } else {
            None
        };
        let mut shards: Vec<Shard> = (0..cfg.n_envs)
            .step_by(SHARD_LANES)
            .map(|first| Shard::new(first as u64, SHARD_LANES.min(cfg.n_envs - first), &env.hydro))
            .collect();
        let mut outputs = vec![LaneOutput::default(); cfg.n_envs];
        for (shard, out) in shards.iter_mut().zip(outputs.chunks_mut(SHARD_LANES)) {
            for (i, slot) in out.iter_mut().enumerate() {
                slot.observation = shard.start_lane(i, 0, &env, cfg.master_seed);
            }
        }
        Ok(BatchEnv { cfg, env, shards, outputs, pool })
    }

    pub fn len(&self) -> usize {
        self.cfg.n_envs
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn config(&self) -> &BatchConfig {
        &self.cfg
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env
    }

    /// Current observation of every environment.
    pub fn observations(&self) -> impl ExactSizeIterator<Item = &[f64; OBS_DIM]> + '_ {
        self.outputs.iter().map(|o| &o.observation)
    }

    /// Most recent step results.
    pub fn outputs(&self) -> &[LaneOutput] {
        &self.outputs
    }

    /// Current episode counter of environment `index`.
    pub fn episode(&self, index: usize) -> u64 {
        self.shards[index / SHARD_LANES].episode[index % SHARD_LANES]
    }

    /// Ground-truth state of environment `index`.
    pub fn body(&self, index: usize) -> BodyState {
        self.shards[index / SHARD_LANES].body(index % SHARD_LANES)
    }

    fn check_actions(&self, actions: &[[f64; 2]]) -> Result<()> {
        if actions.len() != self.cfg.n_envs {
            return Err(Error::Shape(format!("expected {} actions, got {}", self.cfg.n_envs, actions.len())));
        }
        Ok(())
    }

    /// Advances every environment one step, resetting the finished ones.
    pub fn step(&mut self, actions: &[[f64; 2]]) -> Result<&[LaneOutput]> {
        self.check_actions(actions)?;
        let (env, seed) = (&self.env, self.cfg.master_seed);
        let run = |shards: &mut [Shard], outputs: &mut [LaneOutput]| {
            shards
                .par_iter_mut()
                .zip(actions.par_chunks(SHARD_LANES))
                .zip(outputs.par_chunks_mut(SHARD_LANES))
                .for_each(|((shard, a), out)| shard.step(a, out, env, seed));
        };
        match &self.pool {
            Some(pool) => pool.install(|| run(&mut self.shards, &mut self.outputs)),
            None => self
                .shards
                .iter_mut()
                .zip(actions.chunks(SHARD_LANES))
                .zip(self.outputs.chunks_mut(SHARD_LANES))
                .for_each(|((shard, a), out)| shard.step(a, out, env, seed)),
        }
        Ok(&self.outputs)
    }

    /// Only the physics update: no noise, reward, termination or reset.
    pub fn step_physics(&mut self, actions: &[[f64; 2]]) -> Result<()> {
        self.check_actions(actions)?;
        let env = &self.env;
        let run = |shard: &mut Shard, a: &[[f64; 2]]| {
            for (c, &a) in shard.command.iter_mut().zip(a) {
                *c = env::sanitize_action(a);
            }
            shard.physics(env);
        };
        match &self.pool {
            Some(pool) => pool.install(|| {
                self.shards.par_iter_mut().zip(actions.par_chunks(SHARD_LANES)).for_each(|(s, a)| run(s, a))
            }),
            None => self.shards.iter_mut().zip(actions.chunks(SHARD_LANES)).for_each(|(s, a)| run(s, a)),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BenchMode {
    Physics,
    Full,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::Physics => "physics",
            BenchMode::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub mode: BenchMode,
    pub workers: usize,
    pub n_envs: usize,
    pub iterations: u64,
    pub steps: u64,
    pub seconds: f64,
    pub steps_per_sec: f64,
}

/// Steps-per-second for physics-only and full steps, single worker and
/// `multi_workers` workers. Each measurement runs whole iterations until
/// `duration` has passed, so `steps = n_envs * iterations` exactly.
pub fn throughput_bench(
    cfg: BatchConfig,
    env: &EnvConfig,
    duration: Duration,
    multi_workers: usize,
) -> Result<Vec<BenchRow>> {
    let mut worker_counts = vec![1];
    if multi_workers > 1 {
        worker_counts.push(multi_workers);
    }
    let mut rows = Vec::new();
    for mode in [BenchMode::Physics, BenchMode::Full] {
        for &workers in &worker_counts {
            let mut batch = BatchEnv::new(BatchConfig { workers: Workers::Fixed(workers), ..cfg }, env.clone())?;
            let actions: Vec<[f64; 2]> = (0..cfg.n_envs).map(|i| [0.6, 0.4 + 0.1 * (i % 3) as f64]).collect();
            let start = Instant::now();
            let mut iterations = 0u64;
            while iterations == 0 || start.elapsed() < duration {
                match mode {
                    BenchMode::Physics => batch.step_physics(&actions)?,
                    BenchMode::Full => {
                        batch.step(&actions)?;
                    }
                }
                iterations += 1;
            }
            let seconds = start.elapsed().as_secs_f64();
            let steps = iterations * cfg.n_envs as u64;
            rows.push(BenchRow {
                mode,
                workers,
                n_envs: cfg.n_envs,
                iterations,
                steps,
                seconds,
                steps_per_sec: steps as f64 / seconds,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CaptureEnv, RandomizationConfig};

    fn batch(n: usize, seed: u64, workers: usize) -> BatchEnv {
        BatchEnv::new(BatchConfig { n_envs: n, master_seed: seed, workers: Workers::Fixed(workers) }, EnvConfig::default())
            .unwrap()
    }

    #[test]
    fn zero_envs_rejected() {
        let cfg = BatchConfig { n_envs: 0, ..BatchConfig::default() };
        assert!(BatchEnv::new(cfg, EnvConfig::default()).is_err());
    }

    #[test]
    fn wrong_action_count() {
        let mut b = batch(5, 1, 1);
        assert!(matches!(b.step(&[[0.0; 2]; 4]), Err(Error::Shape(_))));
    }

    #[test]
    fn single_lane_matches_single_env() {
        let mut b = batch(1, 42, 1);
        let mut env = CaptureEnv::new(EnvConfig::default(), 42, 0).unwrap();
        let first = env.reset(GoalMode::Train).unwrap();
        assert_eq!(b.observations().next().unwrap(), &first.to_array());
        for k in 0..400 {
            let a = [(k as f64 * 0.01).sin(), 0.8];
            let single = match env.step(a) {
                Ok(o) => o,
                Err(_) => {
                    env.reset(GoalMode::Train).unwrap();
                    env.step(a).unwrap()
                }
            };
            let lane = b.step(&[a]).unwrap()[0];
            assert_eq!(lane.reward.to_bits(), single.reward.to_bits());
            assert_eq!(lane.info.body, single.info.body);
            if !single.done {
                assert_eq!(lane.observation, single.observation.to_array());
            }
        }
    }

    #[test]
    fn worker_count_invariance() {
        let run = |workers| {
            let mut b = batch(200, 9, workers);
            let mut trace = Vec::new();
            for k in 0..300 {
                let actions: Vec<[f64; 2]> = (0..200).map(|i| [((i + k) as f64 * 0.37).sin(), 0.9]).collect();
                let out = b.step(&actions).unwrap();
                trace.extend(out.iter().map(|o| (o.reward.to_bits(), o.observation.map(f64::to_bits), o.done)));
            }
            trace
        };
        let reference = run(1);
        assert_eq!(reference, run(4));
        assert_eq!(reference, run(16));
    }

    #[test]
    fn resting_without_randomization() {
        let env = EnvConfig { randomization: RandomizationConfig::disabled(), ..EnvConfig::default() };
        let mut b = BatchEnv::new(BatchConfig { n_envs: 130, master_seed: 3, workers: Workers::Fixed(2) }, env).unwrap();
        for _ in 0..50 {
            b.step(&vec![[0.0; 2]; 130]).unwrap();
        }
        assert!((0..130).all(|i| b.body(i) == BodyState::default()));
    }

    #[test]
    fn auto_reset_advances_episode() {
        let env = EnvConfig { max_steps: 5, ..EnvConfig::default() };
        let mut b = BatchEnv::new(BatchConfig { n_envs: 3, master_seed: 3, workers: Workers::Fixed(1) }, env).unwrap();
        for k in 1..=5 {
            let out = b.step(&[[0.0; 2]; 3]).unwrap().to_vec();
            assert!(out.iter().all(|o| o.done == (k == 5)));
            if k == 5 {
                for (i, o) in out.iter().enumerate() {
                    assert_eq!(o.info.episode, 0);
                    assert!(o.info.final_observation.is_some());
                    assert_ne!(Some(o.observation), o.info.final_observation);
                    assert_eq!(b.episode(i), 1);
                    assert_eq!(b.body(i), BodyState::default());
                }
            }
        }
    }

    #[test]
    fn perturbing_one_lane_changes_only_that_lane() {
        let mut a = batch(100, 5, 1);
        let mut b = batch(100, 5, 1);
        let base = vec![[0.3, 0.2]; 100];
        let mut poked = base.clone();
        poked[70] = [-0.9, 1.0];
        for _ in 0..20 {
            let oa = a.step(&base).unwrap().to_vec();
            let ob = b.step(&poked).unwrap().to_vec();
            for i in 0..100 {
                assert_eq!(oa[i] == ob[i], i != 70, "lane {i}");
            }
        }
    }

    #[test]
    fn workers_parse() {
        assert_eq!("auto".parse::<Workers>().unwrap(), Workers::Auto);
        assert_eq!("4".parse::<Workers>().unwrap(), Workers::Fixed(4));
        assert!("0".parse::<Workers>().is_err());
        assert!("many".parse::<Workers>().is_err());
        let cfg: BatchConfig = toml::from_str("workers = 3").unwrap();
        assert_eq!(cfg.workers, Workers::Fixed(3));
        let cfg: BatchConfig = toml::from_str("workers = \"auto\"").unwrap();
        assert_eq!(cfg.workers, Workers::Auto);
    }

    #[test]
    fn bench_accounting() {
        let rows = throughput_bench(
            BatchConfig { n_envs: 70, master_seed: 1, workers: Workers::Fixed(1) },
            &EnvConfig::default(),
            Duration::from_millis(20),
            2,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!(r.steps, 70 * r.iterations);
            assert!(r.steps_per_sec > 0.0);
        }
    }
}
