use asvlab::batch::{BatchConfig, BatchEnv, Workers};
use asvlab::env::{EnvConfig, RandomizationConfig};
use asvlab::policy::PpoConfig;
use asvlab::train::Trainer;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const BINS: usize = 20;

fn chi_square_p(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut counts = [0usize; BINS];
    for &s in samples {
        assert!((lo..=hi).contains(&s), "sample {s} outside [{lo}, {hi}]");
        let k = (((s - lo) / (hi - lo)) * BINS as f64).floor() as usize;
        counts[k.min(BINS - 1)] += 1;
    }
    let expected = samples.len() as f64 / BINS as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((BINS - 1) as f64).unwrap().cdf(stat)
}

fn fresh_goals(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let env = EnvConfig { randomization: RandomizationConfig::disabled(), ..EnvConfig::default() };
    let batch = BatchEnv::new(BatchConfig { n_envs: 10_000, master_seed: seed, workers: Workers::Fixed(2) }, env).unwrap();
    batch.observations().map(|o| (o[4].atan2(o[3]), o[5])).unzip()
}

#[test]
fn goal_bearings_are_uniform_over_the_field_of_view() {
    let (bearings, _) = fresh_goals(11);
    let q = std::f64::consts::FRAC_PI_4;
    let p = chi_square_p(&bearings, -q - 1e-12, q + 1e-12);
    assert!(p > 0.01, "chi-square p = {p}");
}

#[test]
fn goal_distances_are_uniform_in_range() {
    let (_, distances) = fresh_goals(12);
    let p = chi_square_p(&distances, 1.5, 10.0);
    assert!(p > 0.01, "chi-square p = {p}");
}

#[test]
fn one_iteration_collects_a_full_batch() {
    let ppo = PpoConfig { batch_size: 16384, epochs_per_batch: 1, ..PpoConfig::default() };
    let batch = BatchConfig { n_envs: 1024, master_seed: 3, workers: Workers::Auto };
    let mut trainer = Trainer::new(EnvConfig::default(), batch, ppo).unwrap();
    assert_eq!(trainer.horizon(), 16);
    let stats = trainer.iterate().unwrap();
    assert_eq!(stats.transitions, 1024 * 16);
}

#[test]
fn horizon_must_divide_batch() {
    let ppo = PpoConfig { batch_size: 1000, ..PpoConfig::default() };
    let batch = BatchConfig { n_envs: 64, master_seed: 3, workers: Workers::Auto };
    assert!(Trainer::new(EnvConfig::default(), batch, ppo).is_err());
}
