//! One-dimensional continuous bandit on `[-1, 1]`. Rewards are defined only
//! on `[-0.25, 0.25]`; the offline data never observes anything outside it,
//! which is exactly the extrapolation gap the experiment probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, DatasetMeta, Tier, Transition};
use super::{EnvKind, NormalizationRefs};

/// Synthetic stand-in reward reported for out-of-support actions when a
/// numeric value is unavoidable (landscape plots, failed-policy evals). The
/// true reward there is undefined.
pub const BANDIT_OUT_OF_SUPPORT_REWARD: f64 = -1e6;

/// The bandit's fixed dummy state.
pub const BANDIT_STATE: [f64; 1] = [0.0];

#[derive(Debug, Clone, Copy)]
pub struct ToyBanditSpec {
    pub dataset_size: usize,
    pub support_half_width: f64,
}

impl Default for ToyBanditSpec {
    fn default() -> Self {
        ToyBanditSpec {
            dataset_size: 1000,
            support_half_width: 0.25,
        }
    }
}

/// Fixed analytic references for the bandit: the uniform-on-support behavior
/// scores `E|a| - 0.125 = 0` per episode, the best in-support action scores
/// `0.125`.
pub fn bandit_refs() -> NormalizationRefs {
    NormalizationRefs {
        random_score: 0.0,
        expert_score: 0.125,
    }
}

/// `r(a) = |a| - 0.125` inside the support; `None` elsewhere (conceptually
/// negative infinity, never sampled into datasets).
pub fn bandit_reward(a: f64) -> Option<f64> {
    if (-0.25..=0.25).contains(&a) {
        Some(a.abs() - 0.125)
    } else {
        None
    }
}

/// Reward value used in evaluation and landscape export where a number is
/// required even off-support.
pub fn bandit_reward_synthetic(a: f64) -> f64 {
    bandit_reward(a).unwrap_or(BANDIT_OUT_OF_SUPPORT_REWARD)
}

/// 1000 single-step transitions with actions uniform on the support.
pub fn gen_bandit_dataset(seed: u64) -> Dataset {
    let spec = ToyBanditSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(spec.dataset_size);
    for _ in 0..spec.dataset_size {
        let a = rng.random_range(-spec.support_half_width..spec.support_half_width);
        let r = bandit_reward(a).expect("sampled action is inside the support");
        transitions.push(Transition {
            state: BANDIT_STATE.to_vec(),
            action: vec![a],
            reward: r,
            next_state: BANDIT_STATE.to_vec(),
            done: true,
        });
    }
    Dataset {
        meta: DatasetMeta {
            spec_id: EnvKind::Bandit.spec_id().to_string(),
            state_dim: 1,
            action_dim: 1,
            tier: Tier::Medium,
            generation_seed: seed,
            behavior_policy: format!(
                "uniform on [-{w}, {w}]",
                w = spec.support_half_width
            ),
            normalization: bandit_refs(),
            notes: vec![
                "rewards undefined outside [-0.25, 0.25]; never sampled".to_string(),
                format!(
                    "out-of-support evaluations report synthetic reward {BANDIT_OUT_OF_SUPPORT_REWARD}"
                ),
            ],
        },
        transitions,
    }
}
