//! Diagonal Gaussian squashed through tanh.
//!
//! A sample is `a = tanh(z)` with `z ~ N(mean, exp(log_std)^2)`, so
//!
//! ```text
//! log p(a) = log N(z; mean, std) - sum log(1 - tanh(z)^2)
//! ```
//!
//! The correction term depends on `z` only, so it cancels in the PPO ratio
//! of two policies evaluated at the same stored `z`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::ACT_DIM;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Largest `f64` below 1. Keeps squashed actions strictly inside `(-1, 1)`
/// where `tanh` would round to the boundary.
pub const ACTION_BOUND: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub action: [f64; ACT_DIM],
    pub pre_tanh: [f64; ACT_DIM],
    /// Log density of `action`, squash correction included.
    pub log_prob: f64,
}

/// `log N(z; mean, exp(log_std))`, summed over dimensions.
pub fn gaussian_log_prob(z: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    z.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&z, &m), &ls)| {
            let e = (z - m) * (-ls).exp();
            -0.5 * e * e - ls - HALF_LN_2PI
        })
        .sum()
}

/// `sum log(1 - tanh(z)^2)`, stable for large `|z|`.
pub fn tanh_log_det(z: &[f64]) -> f64 {
    z.iter().map(|&z| 2.0 * (std::f64::consts::LN_2 - z - softplus(-2.0 * z))).sum()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn squash(z: f64) -> f64 {
    z.tanh().clamp(-ACTION_BOUND, ACTION_BOUND)
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
}

pub fn sample_action<R: Rng + ?Sized>(mean: [f64; ACT_DIM], log_std: [f64; ACT_DIM], rng: &mut R) -> ActionSample {
    let pre_tanh: [f64; ACT_DIM] = std::array::from_fn(|k| {
        let eps: f64 = rng.sample(StandardNormal);
        mean[k] + log_std[k].exp() * eps
    });
    ActionSample {
        action: pre_tanh.map(squash),
        pre_tanh,
        log_prob: gaussian_log_prob(&pre_tanh, &mean, &log_std) - tanh_log_det(&pre_tanh),
    }
}

/// The mode of the pre-squash Gaussian, squashed.
pub fn deterministic_action(mean: [f64; ACT_DIM]) -> [f64; ACT_DIM] {
    mean.map(squash)
}

/// Log density of a squashed action.
pub fn squashed_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let z: Vec<f64> = action.iter().map(|a| a.atanh()).collect();
    gaussian_log_prob(&z, mean, log_std) - tanh_log_det(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};
    use approx::assert_abs_diff_eq;

    #[test]
    fn vanishing_std_gives_tanh_mean() {
        let mut rng = rng::stream(1, Purpose::Policy, 0, 0);
        let s = sample_action([0.3, -1.1], [-40.0, -40.0], &mut rng);
        assert_abs_diff_eq!(s.action[0], 0.3f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.action[1], (-1.1f64).tanh(), epsilon = 1e-15);
        assert_eq!(deterministic_action([0.3, -1.1]), [0.3f64.tanh(), (-1.1f64).tanh()]);
    }

    #[test]
    fn actions_strictly_inside() {
        let mut rng = rng::stream(2, Purpose::Policy, 0, 0);
        for _ in 0..10_000 {
            let s = sample_action([25.0, -25.0], [1.0, 1.0], &mut rng);
            assert!(s.action.iter().all(|a| a.abs() < 1.0));
            assert!(s.log_prob.is_finite());
        }
    }

    #[test]
    fn log_det_is_stable() {
        for z in [-5.0f64, -0.3, 0.0, 0.7, 4.0] {
            assert_abs_diff_eq!(tanh_log_det(&[z]), (1.0 - z.tanh().powi(2)).ln(), epsilon = 1e-10);
        }
        assert!(tanh_log_det(&[400.0]).is_finite());
    }

    #[test]
    fn sample_log_prob_matches_density_of_action() {
        let mut rng = rng::stream(3, Purpose::Policy, 0, 0);
        let (mean, ls) = ([0.2, -0.4], [-0.3, 0.1]);
        for _ in 0..100 {
            let s = sample_action(mean, ls, &mut rng);
            assert_abs_diff_eq!(s.log_prob, squashed_log_prob(&s.action, &mean, &ls), epsilon = 1e-8);
        }
    }

    #[test]
    fn entropy_of_unit_gaussian() {
        assert_abs_diff_eq!(gaussian_entropy(&[0.0]), 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln(), epsilon = 1e-15);
    }
}
