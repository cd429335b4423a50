//! Rollout collection and PPO iterations over a [`BatchEnv`].

use std::collections::VecDeque;
use std::time::Instant;

use serde::Serialize;

use crate::batch::{BatchConfig, BatchEnv};
use crate::env::{EnvConfig, Termination, ACT_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::policy::dist::{deterministic_action, gaussian_log_prob, sample_action, tanh_log_det};
use crate::policy::{pairwise_sum, ActorCritic, Done, PpoConfig, PpoLearner, RolloutBuffer};
use crate::rng::{self, Purpose, Stream};

/// Completed episodes that make up the running statistics.
pub const STATS_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub transitions: usize,
    /// Episodes finished during this iteration.
    pub episodes: usize,
    /// Mean return over the last [`STATS_WINDOW`] finished episodes.
    pub mean_return: f64,
    pub success_rate: f64,
    pub mean_episode_steps: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
    pub seconds: f64,
}

impl IterationStats {
    pub const CSV_HEADER: [&'static str; 14] = [
        "iteration",
        "transitions",
        "episodes",
        "mean_return",
        "success_rate",
        "mean_episode_steps",
        "policy_loss",
        "value_loss",
        "entropy",
        "approx_kl",
        "clip_fraction",
        "grad_norm",
        "learning_rate",
        "seconds",
    ];

    pub fn csv_row(&self) -> Vec<f64> {
        vec![
            self.iteration as f64,
            self.transitions as f64,
            self.episodes as f64,
            self.mean_return,
            self.success_rate,
            self.mean_episode_steps,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.approx_kl,
            self.clip_fraction,
            self.grad_norm,
            self.learning_rate,
            self.seconds,
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct Finished {
    ret: f64,
    success: bool,
    steps: u32,
}

/// Owns the environments, the learner and every random stream of a run.
pub struct Trainer {
    envs: BatchEnv,
    learner: PpoLearner<f32>,
    buffer: RolloutBuffer,
    policy_rng: Stream,
    shuffle_rng: Stream,
    iteration: usize,
    recent: VecDeque<Finished>,
}

impl Trainer {
    /// `ppo.batch_size` must be a multiple of `batch.n_envs`; the quotient is
    /// the rollout horizon.
    pub fn new(env: EnvConfig, batch: BatchConfig, ppo: PpoConfig) -> Result<Self> {
        ppo.validate()?;
        let n = batch.n_envs;
        if n == 0 || !ppo.batch_size.is_multiple_of(n) {
            return Err(Error::Config(format!(
                "batch_size {} is not a multiple of n_envs {n}",
                ppo.batch_size
            )));
        }
        let seed = batch.master_seed;
        let learner = PpoLearner::new(ppo.clone(), &mut rng::stream(seed, Purpose::Init, 0, 0))?;
        Ok(Trainer {
            envs: BatchEnv::new(batch, env)?,
            buffer: RolloutBuffer::new(ppo.batch_size / n, n)?,
            learner,
            policy_rng: rng::stream(seed, Purpose::Policy, 0, 0),
            shuffle_rng: rng::stream(seed, Purpose::Shuffle, 0, 0),
            iteration: 0,
            recent: VecDeque::with_capacity(STATS_WINDOW),
        })
    }

    pub fn net(&self) -> &ActorCritic<f32> {
        &self.learner.net
    }

    pub fn learner(&self) -> &PpoLearner<f32> {
        &self.learner
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn horizon(&self) -> usize {
        self.buffer.horizon()
    }

    fn observations(&self) -> Vec<f32> {
        self.envs.observations().flat_map(|o| o.map(|c| c as f32)).collect()
    }

    /// One rollout of `horizon` steps in every environment followed by one
    /// PPO update.
    pub fn iterate(&mut self) -> Result<IterationStats> {
        let start = Instant::now();
        let n = self.envs.len();
        self.buffer.clear();
        let mut finished = 0usize;
        let mut actions = vec![[0.0f64; ACT_DIM]; n];
        let mut pre_tanh = vec![0.0f32; n * ACT_DIM];
        let mut log_prob = vec![0.0f64; n];

        while !self.buffer.is_full() {
            let obs = self.observations();
            let fwd = self.learner.net.forward(&obs, n)?;
            let log_std = self.learner.net.log_std();
            for e in 0..n {
                let mean = [f64::from(fwd.means[2 * e]), f64::from(fwd.means[2 * e + 1])];
                let s = sample_action(mean, log_std, &mut self.policy_rng);
                let z32 = s.pre_tanh.map(|z| z as f32);
                let z = z32.map(f64::from);
                pre_tanh[2 * e..2 * e + 2].copy_from_slice(&z32);
                log_prob[e] = gaussian_log_prob(&z, &mean, &log_std) - tanh_log_det(&z);
                actions[e] = deterministic_action(z);
            }
            let values: Vec<f64> = fwd.values.iter().map(|&v| f64::from(v)).collect();

            let out = self.envs.step(&actions)?;
            let rewards: Vec<f64> = out.iter().map(|o| o.reward).collect();
            let mut dones = vec![Done::No; n];
            let mut cut = Vec::new();
            for (e, o) in out.iter().enumerate() {
                if !o.done {
                    continue;
                }
                let info = &o.info;
                finished += 1;
                if self.recent.len() == STATS_WINDOW {
                    self.recent.pop_front();
                }
                self.recent.push_back(Finished {
                    ret: info.episode_return,
                    success: info.success(),
                    steps: info.episode_steps,
                });
                match info.termination {
                    Some(Termination::Success) | None => dones[e] = Done::Terminal,
                    Some(_) => cut.push((e, info.final_observation.expect("set on done"))),
                }
            }
            if !cut.is_empty() {
                let final_obs: Vec<f32> = cut.iter().flat_map(|(_, o)| o.map(|c| c as f32)).collect();
                let v = self.learner.net.values(&final_obs, cut.len())?;
                for ((e, _), v) in cut.iter().zip(v) {
                    dones[*e] = Done::Truncated(f64::from(v));
                }
            }
            self.buffer.push(&obs, &pre_tanh, &log_prob, &values, &rewards, &dones)?;
        }

        let last: Vec<f64> =
            self.learner.net.values(&self.observations(), n)?.into_iter().map(f64::from).collect();
        let ppo = &self.learner.cfg;
        let batch = self.buffer.finish(&last, ppo.gamma, ppo.gae_lambda)?;
        let update = self.learner.update(&batch, &mut self.shuffle_rng)?;
        self.iteration += 1;

        let window: Vec<Finished> = self.recent.iter().copied().collect();
        let k = window.len().max(1) as f64;
        let mean = |f: fn(&Finished) -> f64| pairwise_sum(&window.iter().map(f).collect::<Vec<_>>()) / k;
        Ok(IterationStats {
            iteration: self.iteration,
            transitions: batch.len(),
            episodes: finished,
            mean_return: if window.is_empty() { f64::NAN } else { mean(|f| f.ret) },
            success_rate: mean(|f| f64::from(u8::from(f.success))),
            mean_episode_steps: mean(|f| f64::from(f.steps)),
            policy_loss: update.loss.policy,
            value_loss: update.loss.value,
            entropy: update.loss.entropy,
            approx_kl: update.loss.approx_kl,
            clip_fraction: update.loss.clip_fraction,
            grad_norm: update.grad_norm,
            learning_rate: update.learning_rate,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Deterministic action of a network for one observation.
pub fn greedy_action(net: &ActorCritic<f32>, obs: &[f64; OBS_DIM]) -> Result<[f64; ACT_DIM]> {
    let x = obs.map(|c| c as f32);
    let mean = net.actor.forward(net.actor_params(), &x, 1)?;
    Ok(deterministic_action([f64::from(mean[0]), f64::from(mean[1])]))
}
