//! Environments and offline data: the 1-D continuous bandit, a 2-D
//! point-mass task, tiered dataset generation, and dataset persistence.

mod bandit;
mod dataset;
mod pointmass;
mod pretrain;

pub use bandit::{
    bandit_refs, bandit_reward, bandit_reward_synthetic, gen_bandit_dataset, ToyBanditSpec,
    BANDIT_OUT_OF_SUPPORT_REWARD, BANDIT_STATE,
};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetMeta, Tier, Transition};
pub use pointmass::{PointMassSpec, PointMassState};
pub use pretrain::{
    evaluate_policy, gen_pointmass_dataset, gen_pointmass_dataset_with, random_policy_score,
    train_online_sac, OnlineSacConfig, PretrainedPolicies, UniformPolicy,
};

use serde::{Deserialize, Serialize};

/// Which environment a dataset or run refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Bandit,
    Pointmass,
}

impl EnvKind {
    pub fn spec_id(&self) -> &'static str {
        match self {
            EnvKind::Bandit => "toy-bandit-v1",
            EnvKind::Pointmass => "pointmass-v1",
        }
    }

    pub fn from_spec_id(id: &str) -> Option<Self> {
        match id {
            "toy-bandit-v1" => Some(EnvKind::Bandit),
            "pointmass-v1" => Some(EnvKind::Pointmass),
            _ => None,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            EnvKind::Bandit => 1,
            EnvKind::Pointmass => 4,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            EnvKind::Bandit => 1,
            EnvKind::Pointmass => 2,
        }
    }
}

/// Anything that can map states to actions during an evaluation rollout.
pub trait RolloutPolicy {
    /// One action for one state; `deterministic` selects the mode.
    fn act(&self, state: &[f64], deterministic: bool, rng: &mut rand_chacha::ChaCha8Rng)
        -> Vec<f64>;
}

/// Mean return and D4RL-style normalized return over evaluation episodes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean_return: f64,
    pub normalized_return: f64,
    pub episodes: usize,
}

/// Reference scores used for return normalization:
/// `100 * (score - random) / (expert - random)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct NormalizationRefs {
    pub random_score: f64,
    pub expert_score: f64,
}

impl NormalizationRefs {
    pub fn normalize(&self, score: f64) -> f64 {
        100.0 * (score - self.random_score) / (self.expert_score - self.random_score)
    }
}
