//! Actor-critic parameters, Adam, and the clipped-surrogate update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{gaussian_entropy, gaussian_log_prob, tanh_log_det};
use super::gae::TrainBatch;
use super::mlp::{MlpShape, Real};
use super::pairwise_sum;
use crate::env::{ACT_DIM, OBS_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    /// Transitions per iteration, `horizon * n_envs`.
    pub batch_size: usize,
    pub max_iterations: usize,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs_per_batch: usize,
    pub minibatch_count: usize,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub grad_clip_norm: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub init_log_std: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub lr_schedule: LrSchedule,
    /// Per-epoch KL the adaptive schedule steers toward.
    pub kl_target: f64,
}

/// How the learning rate evolves between epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Multiply by 1.5 when an epoch's mean KL falls below half the target,
    /// divide by 1.5 when it exceeds twice the target.
    Adaptive,
}

impl LrSchedule {
    pub const MIN_LR: f64 = 1e-6;
    pub const MAX_LR: f64 = 1e-2;

    pub fn next(self, lr: f64, kl: f64, target: f64) -> f64 {
        match self {
            LrSchedule::Constant => lr,
            LrSchedule::Adaptive if kl > 2.0 * target => (lr / 1.5).max(Self::MIN_LR),
            LrSchedule::Adaptive if kl < 0.5 * target => (lr * 1.5).min(Self::MAX_LR),
            LrSchedule::Adaptive => lr,
        }
    }
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 1e-4,
            gamma: 0.99,
            batch_size: 16384,
            max_iterations: 1000,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs_per_batch: 4,
            minibatch_count: 4,
            entropy_coeff: 0.005,
            value_coeff: 0.5,
            grad_clip_norm: 1.0,
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            init_log_std: 0.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            lr_schedule: LrSchedule::Constant,
            kl_target: 0.008,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &'static str, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(name, what.to_string()))
            }
        };
        check(self.gamma > 0.0 && self.gamma < 1.0, "gamma", "must lie in (0, 1)")?;
        check((0.0..=1.0).contains(&self.gae_lambda), "gae_lambda", "must lie in [0, 1]")?;
        check(self.clip_epsilon > 0.0, "clip_epsilon", "must be > 0")?;
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate", "must be > 0")?;
        check(self.batch_size > 0, "batch_size", "must be >= 1")?;
        check(self.epochs_per_batch > 0, "epochs_per_batch", "must be >= 1")?;
        check(self.minibatch_count > 0, "minibatch_count", "must be >= 1")?;
        check(self.minibatch_count <= self.batch_size, "minibatch_count", "must not exceed batch_size")?;
        check(self.entropy_coeff >= 0.0, "entropy_coeff", "must be >= 0")?;
        check(self.value_coeff >= 0.0, "value_coeff", "must be >= 0")?;
        check(self.grad_clip_norm > 0.0, "grad_clip_norm", "must be > 0")?;
        check(!self.actor_hidden.contains(&0) && !self.critic_hidden.contains(&0), "hidden", "layers must be non-empty")?;
        check(self.kl_target > 0.0, "kl_target", "must be > 0")?;
        check((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2), "adam_beta", "must lie in [0, 1)")?;
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { clip_epsilon: self.clip_epsilon, value_coeff: self.value_coeff, entropy_coeff: self.entropy_coeff }
    }
}

/// Actor and critic over one flat parameter vector laid out as
/// `[actor | critic | log_std]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic<T> {
    pub actor: MlpShape,
    pub critic: MlpShape,
    pub params: Vec<T>,
}

/// Network outputs for a batch of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    /// `batch x ACT_DIM` pre-squash means.
    pub means: Vec<T>,
    pub values: Vec<T>,
}

fn with_io(hidden: &[usize], output: usize) -> Result<MlpShape> {
    let mut sizes = vec![OBS_DIM];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    MlpShape::new(sizes)
}

impl<T: Real> ActorCritic<T> {
    pub fn zeros(actor_hidden: &[usize], critic_hidden: &[usize]) -> Result<Self> {
        Self::from_parts(with_io(actor_hidden, ACT_DIM)?, with_io(critic_hidden, 1)?, None)
    }

    /// Checks that `params` (or zeros) fits the two shapes.
    pub fn from_parts(actor: MlpShape, critic: MlpShape, params: Option<Vec<T>>) -> Result<Self> {
        if actor.input() != OBS_DIM || critic.input() != OBS_DIM {
            return Err(Error::Shape(format!(
                "networks take {} and {} inputs, the environment provides {OBS_DIM}",
                actor.input(),
                critic.input()
            )));
        }
        if actor.output() != ACT_DIM || critic.output() != 1 {
            return Err(Error::Shape(format!(
                "actor must emit {ACT_DIM} means and critic 1 value, got {} and {}",
                actor.output(),
                critic.output()
            )));
        }
        let n = actor.n_params() + critic.n_params() + ACT_DIM;
        let params = params.unwrap_or_else(|| vec![T::zero(); n]);
        if params.len() != n {
            return Err(Error::Shape(format!("expected {n} parameters, got {}", params.len())));
        }
        Ok(ActorCritic { actor, critic, params })
    }

    /// Orthogonal init: hidden gain sqrt(2), actor output gain 0.01, critic
    /// output gain 1.
    pub fn init<R: Rng + ?Sized>(cfg: &PpoConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(&cfg.actor_hidden, &cfg.critic_hidden)?;
        let gain = std::f64::consts::SQRT_2;
        let actor: Vec<T> = net.actor.init(rng, gain, 0.01);
        let critic: Vec<T> = net.critic.init(rng, gain, 1.0);
        let (a, c) = (net.actor.n_params(), net.critic.n_params());
        net.params[..a].copy_from_slice(&actor);
        net.params[a..a + c].copy_from_slice(&critic);
        net.params[a + c..].iter_mut().for_each(|p| *p = T::of(cfg.init_log_std));
        Ok(net)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn split(&self) -> (usize, usize) {
        let a = self.actor.n_params();
        (a, a + self.critic.n_params())
    }

    pub fn actor_params(&self) -> &[T] {
        &self.params[..self.split().0]
    }

    pub fn critic_params(&self) -> &[T] {
        let (a, c) = self.split();
        &self.params[a..c]
    }

    pub fn log_std(&self) -> [f64; ACT_DIM] {
        let c = self.split().1;
        std::array::from_fn(|k| self.params[c + k].f64())
    }

    pub fn forward(&self, obs: &[T], batch: usize) -> Result<Forward<T>> {
        Ok(Forward {
            means: self.actor.forward(self.actor_params(), obs, batch)?,
            values: self.critic.forward(self.critic_params(), obs, batch)?,
        })
    }

    pub fn values(&self, obs: &[T], batch: usize) -> Result<Vec<T>> {
        self.critic.forward(self.critic_params(), obs, batch)
    }

    pub fn cast<U: Real>(&self) -> ActorCritic<U> {
        ActorCritic {
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            params: self.params.iter().map(|p| U::of(p.f64())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { lr, beta1, beta2, eps, t: 0, m: vec![T::zero(); n], v: vec![T::zero(); n] }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 / (1.0 - self.beta1.powi(t)));
        let c2 = T::of(1.0 / (1.0 - self.beta2.powi(t)));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        for ((p, &g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p = *p - lr * (*m * c1) / ((*v * c2).sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub clip_epsilon: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss on the samples `indices` of `batch`, and its gradient written into
/// `grad`.
///
/// ```text
/// L = -mean(min(rho A, clip(rho, 1 - eps, 1 + eps) A))
///     + value_coeff * mean((V - R)^2) - entropy_coeff * H
/// ```
pub fn loss_and_grad<T: Real>(
    net: &ActorCritic<T>,
    batch: &TrainBatch,
    indices: &[usize],
    w: &LossWeights,
    grad: &mut [T],
) -> Result<LossStats> {
    if grad.len() != net.n_params() {
        return Err(Error::Shape(format!("gradient has {} entries, network {}", grad.len(), net.n_params())));
    }
    let m = indices.len();
    if m == 0 {
        return Err(Error::Shape("empty minibatch".into()));
    }
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut obs = Vec::with_capacity(m * OBS_DIM);
    for &j in indices {
        obs.extend(batch.obs[j * OBS_DIM..(j + 1) * OBS_DIM].iter().map(|&o| T::of(f64::from(o))));
    }
    let actor_acts = net.actor.forward_cached(net.actor_params(), &obs, m)?;
    let critic_acts = net.critic.forward_cached(net.critic_params(), &obs, m)?;
    let means = actor_acts.last().expect("output layer");
    let values = critic_acts.last().expect("output layer");
    let log_std = net.log_std();
    let inv_var = log_std.map(|ls| (-2.0 * ls).exp());
    let inv_m = 1.0 / m as f64;
    let (lo, hi) = (1.0 - w.clip_epsilon, 1.0 + w.clip_epsilon);

    let mut d_means = vec![T::zero(); m * ACT_DIM];
    let mut d_values = vec![T::zero(); m];
    let mut d_log_std = [0.0; ACT_DIM];
    let mut surrogate = Vec::with_capacity(m);
    let mut sq_err = Vec::with_capacity(m);
    let mut kl = Vec::with_capacity(m);
    let mut clipped = 0usize;

    for (row, &j) in indices.iter().enumerate() {
        let z: [f64; ACT_DIM] = std::array::from_fn(|k| f64::from(batch.pre_tanh[j * ACT_DIM + k]));
        let mu: [f64; ACT_DIM] = std::array::from_fn(|k| means[row * ACT_DIM + k].f64());
        let log_prob = gaussian_log_prob(&z, &mu, &log_std) - tanh_log_det(&z);
        let log_ratio = log_prob - batch.log_prob[j];
        let ratio = log_ratio.exp();
        let a = batch.advantages[j];
        let unclipped = ratio * a;
        let bounded = ratio.clamp(lo, hi) * a;
        surrogate.push(unclipped.min(bounded));
        kl.push((ratio - 1.0) - log_ratio);
        if (ratio - 1.0).abs() > w.clip_epsilon {
            clipped += 1;
        }
        let d_log_prob = if unclipped <= bounded { -inv_m * a * ratio } else { 0.0 };
        for k in 0..ACT_DIM {
            let diff = z[k] - mu[k];
            d_means[row * ACT_DIM + k] = T::of(d_log_prob * diff * inv_var[k]);
            d_log_std[k] += d_log_prob * (diff * diff * inv_var[k] - 1.0);
        }
        let err = values[row].f64() - batch.returns[j];
        sq_err.push(err * err);
        d_values[row] = T::of(w.value_coeff * 2.0 * err * inv_m);
    }

    let policy = -pairwise_sum(&surrogate) * inv_m;
    let value = pairwise_sum(&sq_err) * inv_m;
    let entropy = gaussian_entropy(&log_std);
    let (a_end, c_end) = net.split();
    net.actor.backward(net.actor_params(), &actor_acts, &d_means, m, &mut grad[..a_end]);
    net.critic.backward(net.critic_params(), &critic_acts, &d_values, m, &mut grad[a_end..c_end]);
    for k in 0..ACT_DIM {
        grad[c_end + k] = T::of(d_log_std[k] - w.entropy_coeff);
    }
    Ok(LossStats {
        total: policy + w.value_coeff * value - w.entropy_coeff * entropy,
        policy,
        value,
        entropy,
        approx_kl: pairwise_sum(&kl) * inv_m,
        clip_fraction: clipped as f64 * inv_m,
    })
}

/// Scales `grad` to at most `max_norm` in Euclidean norm; returns the norm
/// before scaling.
pub fn clip_grad_norm<T: Real>(grad: &mut [T], max_norm: f64) -> f64 {
    let sq: Vec<f64> = grad.iter().map(|g| g.f64() * g.f64()).collect();
    let norm = pairwise_sum(&sq).sqrt();
    if norm > max_norm {
        let s = T::of(max_norm / norm);
        grad.iter_mut().for_each(|g| *g = *g * s);
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub grad_norm: f64,
    pub minibatches: usize,
    /// Learning rate after the update.
    pub learning_rate: f64,
}

/// Network, optimizer and hyperparameters.
#[derive(Debug, Clone)]
pub struct PpoLearner<T> {
    pub net: ActorCritic<T>,
    pub adam: Adam<T>,
    pub cfg: PpoConfig,
}

impl<T: Real> PpoLearner<T> {
    pub fn new<R: Rng + ?Sized>(cfg: PpoConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let net = ActorCritic::init(&cfg, rng)?;
        Ok(Self::with_net(cfg, net))
    }

    pub fn with_net(cfg: PpoConfig, net: ActorCritic<T>) -> Self {
        let adam = Adam::new(net.n_params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        PpoLearner { net, adam, cfg }
    }

    /// `epochs_per_batch` passes over `batch` in `minibatch_count` shuffled
    /// minibatches. On a non-finite loss or gradient the parameters and
    /// optimizer state are restored and the offending minibatch reported.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &TrainBatch, rng: &mut R) -> Result<UpdateStats> {
        batch.validate()?;
        if batch.is_empty() {
            return Err(Error::Shape("empty train batch".into()));
        }
        let snapshot = (self.net.params.clone(), self.adam.clone());
        let weights = self.cfg.weights();
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut grad = vec![T::zero(); self.net.n_params()];
        let mut sums = Vec::new();
        let mut norms = Vec::new();
        let parts = self.cfg.minibatch_count;
        for epoch in 0..self.cfg.epochs_per_batch {
            let first = sums.len();
            order.shuffle(rng);
            for minibatch in 0..parts {
                let (start, end) = (minibatch * order.len() / parts, (minibatch + 1) * order.len() / parts);
                let stats = loss_and_grad(&self.net, batch, &order[start..end], &weights, &mut grad)?;
                if !stats.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    self.net.params = snapshot.0;
                    self.adam = snapshot.1;
                    return Err(Error::NonFiniteLoss { epoch, minibatch });
                }
                norms.push(clip_grad_norm(&mut grad, self.cfg.grad_clip_norm));
                self.adam.step(&mut self.net.params, &grad);
                sums.push(stats);
            }
            let kl = pairwise_sum(&sums[first..].iter().map(|s| s.approx_kl).collect::<Vec<_>>()) / parts as f64;
            self.adam.lr = self.cfg.lr_schedule.next(self.adam.lr, kl, self.cfg.kl_target);
        }
        let n = sums.len() as f64;
        let mean = |f: fn(&LossStats) -> f64| pairwise_sum(&sums.iter().map(f).collect::<Vec<_>>()) / n;
        Ok(UpdateStats {
            loss: LossStats {
                total: mean(|s| s.total),
                policy: mean(|s| s.policy),
                value: mean(|s| s.value),
                entropy: mean(|s| s.entropy),
                approx_kl: mean(|s| s.approx_kl),
                clip_fraction: mean(|s| s.clip_fraction),
            },
            grad_norm: pairwise_sum(&norms) / n,
            minibatches: sums.len(),
            learning_rate: self.adam.lr,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::dist::sample_action;
    use crate::rng::{self, Purpose};
    use approx::assert_abs_diff_eq;

    fn small_cfg() -> PpoConfig {
        PpoConfig { actor_hidden: vec![5, 4], critic_hidden: vec![3], init_log_std: -0.4, ..PpoConfig::default() }
    }

    /// A toy batch whose stored log-probs come from `behaviour`.
    fn toy_batch(behaviour: &ActorCritic<f64>, n: usize, seed: u64) -> TrainBatch {
        let mut rng = rng::stream(seed, Purpose::Policy, 0, 0);
        let obs: Vec<f32> = (0..n * OBS_DIM).map(|k| ((k as f64 * 0.77 + seed as f64).sin() * 2.0) as f32).collect();
        let obs64: Vec<f64> = obs.iter().map(|&o| f64::from(o)).collect();
        let out = behaviour.forward(&obs64, n).unwrap();
        let ls = behaviour.log_std();
        let mut pre_tanh = Vec::new();
        let mut log_prob = Vec::new();
        for j in 0..n {
            let s = sample_action([out.means[2 * j], out.means[2 * j + 1]], ls, &mut rng);
            let z = s.pre_tanh.map(|z| z as f32);
            let z64 = z.map(f64::from);
            pre_tanh.extend(z);
            log_prob.push(gaussian_log_prob(&z64, &out.means[2 * j..2 * j + 2], &ls) - tanh_log_det(&z64));
        }
        let advantages = (0..n).map(|j| (j as f64 * 1.3 + 0.2).cos()).collect();
        let returns = (0..n).map(|j| (j as f64 * 0.4).sin() * 3.0).collect();
        TrainBatch { obs, pre_tanh, log_prob, advantages, returns }
    }

    fn loss_only(net: &ActorCritic<f64>, batch: &TrainBatch, w: &LossWeights) -> f64 {
        let mut g = vec![0.0; net.n_params()];
        loss_and_grad(net, batch, &(0..batch.len()).collect::<Vec<_>>(), w, &mut g).unwrap().total
    }

    fn check_fd(w: LossWeights, perturb_behaviour: bool) {
        let cfg = small_cfg();
        let mut rng = rng::stream(5, Purpose::Init, 0, 0);
        let net: ActorCritic<f64> = ActorCritic::init(&cfg, &mut rng).unwrap();
        let mut behaviour = net.clone();
        if perturb_behaviour {
            behaviour.params.iter_mut().enumerate().for_each(|(k, p)| *p += 0.05 * (k as f64).sin());
        }
        let mut net = net;
        // larger output weights so every parameter matters
        net.params.iter_mut().enumerate().for_each(|(k, p)| *p += 0.2 * (k as f64 * 0.3).cos());
        let batch = toy_batch(&behaviour, 4, 9);
        let mut grad = vec![0.0; net.n_params()];
        loss_and_grad(&net, &batch, &[0, 1, 2, 3], &w, &mut grad).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..net.n_params() {
            let mut p = net.clone();
            p.params[k] += h;
            let up = loss_only(&p, &batch, &w);
            p.params[k] -= 2.0 * h;
            let fd = (up - loss_only(&p, &batch, &w)) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn policy_term_gradient() {
        check_fd(LossWeights { clip_epsilon: 0.2, value_coeff: 0.0, entropy_coeff: 0.0 }, false);
        check_fd(LossWeights { clip_epsilon: 0.2, value_coeff: 0.0, entropy_coeff: 0.0 }, true);
    }

    #[test]
    fn value_term_gradient() {
        check_fd(LossWeights { clip_epsilon: 0.2, value_coeff: 0.7, entropy_coeff: 0.0 }, false);
    }

    #[test]
    fn entropy_term_gradient() {
        check_fd(LossWeights { clip_epsilon: 0.2, value_coeff: 0.0, entropy_coeff: 0.3 }, false);
    }

    #[test]
    fn combined_gradient() {
        check_fd(LossWeights { clip_epsilon: 0.2, value_coeff: 0.5, entropy_coeff: 0.005 }, true);
    }

    #[test]
    fn unclipped_update_is_vanilla_policy_gradient() {
        let cfg = PpoConfig {
            clip_epsilon: f64::INFINITY,
            epochs_per_batch: 1,
            minibatch_count: 1,
            value_coeff: 0.0,
            entropy_coeff: 0.0,
            grad_clip_norm: f64::INFINITY,
            learning_rate: 1e-3,
            ..small_cfg()
        };
        let mut rng = rng::stream(6, Purpose::Init, 0, 0);
        let mut learner: PpoLearner<f64> = PpoLearner::new(cfg.clone(), &mut rng).unwrap();
        let batch = toy_batch(&learner.net, 16, 2);

        // -mean(A * grad log pi) by central differences on the log-likelihood
        let net0 = learner.net.clone();
        let objective = |net: &ActorCritic<f64>| -> f64 {
            let obs: Vec<f64> = batch.obs.iter().map(|&o| f64::from(o)).collect();
            let means = net.forward(&obs, batch.len()).unwrap().means;
            let ls = net.log_std();
            let terms: Vec<f64> = (0..batch.len())
                .map(|j| {
                    let z = [f64::from(batch.pre_tanh[2 * j]), f64::from(batch.pre_tanh[2 * j + 1])];
                    -batch.advantages[j] * gaussian_log_prob(&z, &means[2 * j..2 * j + 2], &ls)
                })
                .collect();
            terms.iter().sum::<f64>() / batch.len() as f64
        };
        let h = 1e-6;
        let pg: Vec<f64> = (0..net0.n_params())
            .map(|k| {
                let mut p = net0.clone();
                p.params[k] += h;
                let up = objective(&p);
                p.params[k] -= 2.0 * h;
                (up - objective(&p)) / (2.0 * h)
            })
            .collect();

        let mut expected = net0.params.clone();
        Adam::new(expected.len(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
            .step(&mut expected, &pg);
        learner.update(&batch, &mut rng).unwrap();
        let mut grad = vec![0.0; net0.n_params()];
        loss_and_grad(&net0, &batch, &(0..16).collect::<Vec<_>>(), &cfg.weights(), &mut grad).unwrap();
        for k in 0..expected.len() {
            assert_abs_diff_eq!(grad[k], pg[k], epsilon = 1e-7);
            // Adam's first step is ~lr * sign(g); tiny gradients are dominated by eps
            if pg[k].abs() > 1e-5 {
                assert_abs_diff_eq!(learner.net.params[k], expected[k], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn zero_advantage_leaves_actor_unchanged() {
        let cfg = PpoConfig { entropy_coeff: 0.0, ..small_cfg() };
        let mut rng = rng::stream(7, Purpose::Init, 0, 0);
        let mut learner: PpoLearner<f32> = PpoLearner::new(cfg, &mut rng).unwrap();
        let mut batch = toy_batch(&learner.net.cast(), 64, 4);
        batch.advantages.iter_mut().for_each(|a| *a = 0.0);
        let before = learner.net.clone();
        learner.update(&batch, &mut rng).unwrap();
        assert_eq!(learner.net.actor_params(), before.actor_params());
        assert_eq!(learner.net.log_std(), before.log_std());
        assert_ne!(learner.net.critic_params(), before.critic_params());
    }

    #[test]
    fn nan_loss_restores_parameters() {
        let mut rng = rng::stream(8, Purpose::Init, 0, 0);
        let mut learner: PpoLearner<f32> = PpoLearner::new(small_cfg(), &mut rng).unwrap();
        let mut batch = toy_batch(&learner.net.cast(), 32, 4);
        batch.returns[3] = f64::NAN;
        let before = learner.clone();
        let err = learner.update(&batch, &mut rng).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, .. }), "{err}");
        assert_eq!(learner.net, before.net);
        assert_eq!(learner.adam, before.adam);
    }

    #[test]
    fn first_update_has_unit_ratio() {
        let mut rng = rng::stream(9, Purpose::Init, 0, 0);
        let learner: PpoLearner<f64> = PpoLearner::new(small_cfg(), &mut rng).unwrap();
        let batch = toy_batch(&learner.net, 32, 1);
        let mut grad = vec![0.0; learner.net.n_params()];
        let stats = loss_and_grad(&learner.net, &batch, &(0..32).collect::<Vec<_>>(), &learner.cfg.weights(), &mut grad).unwrap();
        assert!(stats.approx_kl.abs() < 1e-12);
        assert_eq!(stats.clip_fraction, 0.0);
    }

    #[test]
    fn grad_clipping() {
        let mut g = vec![3.0f64, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert_abs_diff_eq!(g[0], 0.6, epsilon = 1e-15);
        let mut g = vec![0.3f64, 0.4];
        clip_grad_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }

    #[test]
    fn rejects_wrong_observation_size() {
        let actor = MlpShape::new(vec![5, 4, 2]).unwrap();
        let critic = MlpShape::new(vec![6, 4, 1]).unwrap();
        assert!(matches!(ActorCritic::<f32>::from_parts(actor, critic, None), Err(Error::Shape(_))));
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig { gamma: 1.0, ..PpoConfig::default() }.validate().is_err());
        assert!(PpoConfig { clip_epsilon: 0.0, ..PpoConfig::default() }.validate().is_err());
        assert!(PpoConfig::default().validate().is_ok());
    }
}
