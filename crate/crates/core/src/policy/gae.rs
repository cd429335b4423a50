//! Rollout storage and generalized advantage estimation.

use serde::Serialize;

use super::pairwise_sum;
use crate::env::{ACT_DIM, OBS_DIM};
use crate::error::{Error, Result};

/// How a transition ended.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum Done {
    #[default]
    No,
    /// The task ended; the value after this step is zero.
    Terminal,
    /// Cut short; the value after this step is the given estimate of the
    /// final observation.
    Truncated(f64),
}

/// GAE over one trajectory segment. `last_value` bootstraps the step after
/// the segment when it did not end.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[Done],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!(
            "gae needs aligned arrays, got rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next = if t + 1 < n { values[t + 1] } else { last_value };
        let (bootstrap, carry) = match dones[t] {
            Done::No => (next, true),
            Done::Terminal => (0.0, false),
            Done::Truncated(v) => (v, false),
        };
        let delta = rewards[t] + gamma * bootstrap - values[t];
        running = if carry { delta + gamma * lambda * running } else { delta };
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales to mean 0 and standard deviation 1.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = pairwise_sum(adv) / n;
    let sq: Vec<f64> = adv.iter().map(|a| (a - mean) * (a - mean)).collect();
    let std = (pairwise_sum(&sq) / n).sqrt();
    let scale = if std > 1e-12 { 1.0 / std } else { 0.0 };
    adv.iter_mut().for_each(|a| *a = (*a - mean) * scale);
}

/// `horizon x n_envs` transitions, time-major.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    horizon: usize,
    n_envs: usize,
    steps: usize,
    obs: Vec<f32>,
    pre_tanh: Vec<f32>,
    log_prob: Vec<f64>,
    value: Vec<f64>,
    reward: Vec<f64>,
    done: Vec<Done>,
}

/// Flattened, advantage-annotated samples ready for an update.
#[derive(Debug, Clone, Default)]
pub struct TrainBatch {
    pub obs: Vec<f32>,
    pub pre_tanh: Vec<f32>,
    pub log_prob: Vec<f64>,
    /// Normalized.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TrainBatch {
    pub fn len(&self) -> usize {
        self.log_prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_prob.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.obs.len() != n * OBS_DIM
            || self.pre_tanh.len() != n * ACT_DIM
            || self.advantages.len() != n
            || self.returns.len() != n
        {
            return Err(Error::Shape("train batch arrays are not aligned".into()));
        }
        Ok(())
    }
}

impl RolloutBuffer {
    pub fn new(horizon: usize, n_envs: usize) -> Result<Self> {
        if horizon == 0 || n_envs == 0 {
            return Err(Error::Shape(format!("rollout of {horizon} x {n_envs}")));
        }
        let n = horizon * n_envs;
        Ok(RolloutBuffer {
            horizon,
            n_envs,
            steps: 0,
            obs: Vec::with_capacity(n * OBS_DIM),
            pre_tanh: Vec::with_capacity(n * ACT_DIM),
            log_prob: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
            reward: Vec::with_capacity(n),
            done: Vec::with_capacity(n),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_envs(&self) -> usize {
        self.n_envs
    }

    /// Transitions stored so far.
    pub fn len(&self) -> usize {
        self.steps * self.n_envs
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    pub fn is_full(&self) -> bool {
        self.steps == self.horizon
    }

    pub fn clear(&mut self) {
        self.steps = 0;
        self.obs.clear();
        self.pre_tanh.clear();
        self.log_prob.clear();
        self.value.clear();
        self.reward.clear();
        self.done.clear();
    }

    /// Appends one step of every environment.
    pub fn push(
        &mut self,
        obs: &[f32],
        pre_tanh: &[f32],
        log_prob: &[f64],
        value: &[f64],
        reward: &[f64],
        done: &[Done],
    ) -> Result<()> {
        let n = self.n_envs;
        if self.is_full() {
            return Err(Error::Shape(format!("rollout already holds {} steps", self.horizon)));
        }
        if obs.len() != n * OBS_DIM
            || pre_tanh.len() != n * ACT_DIM
            || [log_prob.len(), value.len(), reward.len(), done.len()] != [n; 4]
        {
            return Err(Error::Shape(format!("step arrays do not match {n} environments")));
        }
        self.obs.extend_from_slice(obs);
        self.pre_tanh.extend_from_slice(pre_tanh);
        self.log_prob.extend_from_slice(log_prob);
        self.value.extend_from_slice(value);
        self.reward.extend_from_slice(reward);
        self.done.extend_from_slice(done);
        self.steps += 1;
        Ok(())
    }

    /// Runs GAE per environment and normalizes advantages over the batch.
    pub fn finish(&self, last_values: &[f64], gamma: f64, lambda: f64) -> Result<TrainBatch> {
        if !self.is_full() {
            return Err(Error::Shape(format!("rollout has {} of {} steps", self.steps, self.horizon)));
        }
        if last_values.len() != self.n_envs {
            return Err(Error::Shape("one bootstrap value per environment required".into()));
        }
        let (h, n) = (self.horizon, self.n_envs);
        let mut advantages = vec![0.0; h * n];
        let mut returns = vec![0.0; h * n];
        for e in 0..n {
            let column = |v: &[f64]| (0..h).map(|t| v[t * n + e]).collect::<Vec<f64>>();
            let dones: Vec<Done> = (0..h).map(|t| self.done[t * n + e]).collect();
            let (adv, ret) = gae(&column(&self.reward), &column(&self.value), &dones, last_values[e], gamma, lambda)?;
            for t in 0..h {
                advantages[t * n + e] = adv[t];
                returns[t * n + e] = ret[t];
            }
        }
        normalize_advantages(&mut advantages);
        Ok(TrainBatch {
            obs: self.obs.clone(),
            pre_tanh: self.pre_tanh.clone(),
            log_prob: self.log_prob.clone(),
            advantages,
            returns,
        })
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn dones(&self) -> &[Done] {
        &self.done
    }
}
