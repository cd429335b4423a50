//! Actor-critic networks and proximal policy optimization.
//!
//! The actor maps an observation to the mean of a tanh-squashed Gaussian over
//! the two thruster commands; a state-independent log standard deviation sits
//! next to the network weights. The critic maps the same observation to a
//! scalar value.

pub mod checkpoint;
pub mod dist;
pub mod gae;
pub mod mlp;
pub mod ppo;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use dist::{deterministic_action, sample_action, ActionSample};
pub use gae::{gae, normalize_advantages, Done, RolloutBuffer, TrainBatch};
pub use mlp::{MlpShape, Real};
pub use ppo::{ActorCritic, Adam, LossStats, LrSchedule, PpoConfig, PpoLearner, UpdateStats};

/// Sum by recursive halving. The result depends only on the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().fold(0.0, |acc, v| acc + v)
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}
