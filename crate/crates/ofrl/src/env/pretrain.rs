//! Online soft actor-critic used once per dataset family to manufacture the
//! expert and medium behavior policies for the point-mass task, and the
//! tiered dataset generators built on top of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, DatasetMeta, Tier, Transition};
use super::pointmass::PointMassSpec;
use super::{EnvKind, NormalizationRefs, RolloutPolicy};
use crate::actor::{actor_update, ActorConfig, ActorObjective, PolicyModel};
use crate::autodiff::AdamState;
use crate::critic::{critic_update, CriticConfig, CriticPair, PackedBatch};
use crate::error::{OfrlError, Result};

#[derive(Debug, Clone)]
pub struct OnlineSacConfig {
    pub total_steps: usize,
    pub start_steps: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub hidden: Vec<usize>,
    /// Minimum acceptable mean return for the trained expert.
    pub expert_threshold: f64,
}

impl Default for OnlineSacConfig {
    fn default() -> Self {
        OnlineSacConfig {
            total_steps: 30_000,
            start_steps: 1_000,
            batch_size: 128,
            eval_every: 1_000,
            eval_episodes: 10,
            hidden: vec![64, 64],
            expert_threshold: -80.0,
        }
    }
}

#[derive(Clone)]
pub struct PretrainedPolicies {
    pub expert: PolicyModel,
    pub medium: PolicyModel,
    pub refs: NormalizationRefs,
    /// Every transition seen during online training, in order.
    pub replay: Vec<Transition>,
    /// `(env step, mean eval return)` at every evaluation point.
    pub eval_trace: Vec<(usize, f64)>,
}

/// Mean return of a uniform-random policy; the `random` reference score.
pub fn random_policy_score(spec: &PointMassSpec, episodes: usize, seed: u64) -> f64 {
    let mut total = 0.0;
    for ep in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xA5A5_0000 + ep as u64));
        total += spec.episode_return(&mut rng, |_, r| {
            vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]
        });
    }
    total / episodes as f64
}

fn eval_policy_mean(
    spec: &PointMassSpec,
    policy: &PolicyModel,
    episodes: usize,
    seed: u64,
) -> f64 {
    let mut total = 0.0;
    for ep in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5EED_0000 + ep as u64));
        let mut act_rng = rng.clone();
        total += spec.episode_return(&mut rng, |s, _| policy.act(s, true, &mut act_rng));
    }
    total / episodes as f64
}

/// Train SAC online on the point mass. Returns the final policy as expert,
/// the first checkpoint at or above the halfway normalized score as medium,
/// the replay stream, and the normalization references.
pub fn train_online_sac(
    spec: &PointMassSpec,
    cfg: &OnlineSacConfig,
    seed: u64,
) -> Result<PretrainedPolicies> {
    let state_dim = 4;
    let action_dim = 2;
    let critic_cfg = CriticConfig {
        use_offset_representation: false,
        lambda: 0.0,
        hidden: cfg.hidden.clone(),
        ..CriticConfig::default()
    };
    let actor_cfg = ActorConfig {
        hidden: cfg.hidden.clone(),
        ..ActorConfig::default()
    };
    let mut critic = CriticPair::init(state_dim, action_dim, &critic_cfg, seed ^ 0xC1);
    let mut policy = PolicyModel::init(state_dim, action_dim, &actor_cfg, seed ^ 0xA1);
    let mut copt = AdamState::new(&critic.online, critic_cfg.lr);
    let mut aopt = AdamState::new(&policy.params, actor_cfg.lr);
    let mut topt = AdamState::new(
        &policy.log_temperature,
        actor_cfg.temperature_lr.unwrap_or(actor_cfg.lr),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut replay: Vec<Transition> = Vec::with_capacity(cfg.total_steps);
    let mut checkpoints: Vec<(usize, f64, PolicyModel)> = Vec::new();
    let mut eval_trace = Vec::new();

    let mut env_state = spec.reset(&mut rng);
    let mut t_in_episode = 0usize;
    for step in 0..cfg.total_steps {
        let action = if step < cfg.start_steps {
            vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        } else {
            policy.act(&env_state.0, false, &mut rng)
        };
        let (next, reward) = spec.step(env_state, &action);
        t_in_episode += 1;
        let done = t_in_episode == spec.horizon;
        replay.push(Transition {
            state: env_state.as_vec(),
            action,
            reward,
            next_state: next.as_vec(),
            done,
        });
        if done {
            env_state = spec.reset(&mut rng);
            t_in_episode = 0;
        } else {
            env_state = next;
        }

        if step >= cfg.start_steps {
            let idx: Vec<usize> = (0..cfg.batch_size)
                .map(|_| rng.random_range(0..replay.len()))
                .collect();
            let batch: Vec<&Transition> = idx.iter().map(|&i| &replay[i]).collect();
            let packed = PackedBatch::from_transitions(&batch);
            let (next_actions, _) = policy.sample_values(&packed.next_states, &mut rng);
            critic_update(
                &mut critic,
                None,
                &packed,
                next_actions,
                None,
                &[],
                policy.temperature(),
                &mut copt,
                step as u64,
            )?;
            actor_update(
                &mut policy,
                ActorObjective::EntropyRegularized {
                    critic: &critic,
                    behavior: None,
                },
                &packed.states,
                &mut aopt,
                &mut topt,
                &mut rng,
                step as u64,
            )?;
        }

        if (step + 1) % cfg.eval_every == 0 {
            let score = eval_policy_mean(spec, &policy, cfg.eval_episodes, seed ^ step as u64);
            eval_trace.push((step + 1, score));
            checkpoints.push((step + 1, score, policy.clone()));
        }
    }

    let random_score = random_policy_score(spec, 50, seed);
    let expert = checkpoints
        .last()
        .ok_or_else(|| OfrlError::InvalidConfig("no checkpoints recorded".into()))?
        .clone();
    let expert_score = expert.1;
    if expert_score < cfg.expert_threshold {
        return Err(OfrlError::ExpertBelowThreshold {
            best: expert_score,
            threshold: cfg.expert_threshold,
        });
    }
    let refs = NormalizationRefs {
        random_score,
        expert_score,
    };
    let halfway = random_score + 0.5 * (expert_score - random_score);
    let medium = checkpoints
        .iter()
        .find(|(_, score, _)| *score >= halfway)
        .ok_or_else(|| OfrlError::InvalidConfig("no medium checkpoint found".into()))?
        .2
        .clone();
    Ok(PretrainedPolicies {
        expert: expert.2,
        medium,
        refs,
        replay,
        eval_trace,
    })
}

/// Roll `size` transitions (whole episodes) with a stochastic policy.
fn rollout_dataset(
    spec: &PointMassSpec,
    policy: &PolicyModel,
    size: usize,
    seed: u64,
) -> Vec<Transition> {
    let mut out = Vec::with_capacity(size + spec.horizon);
    let mut ep = 0u64;
    while out.len() < size {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xD0_0000 + ep));
        let mut act_rng = rng.clone();
        let (transitions, _) = spec.rollout(&mut rng, |s, _| policy.act(s, false, &mut act_rng));
        out.extend(transitions);
        ep += 1;
    }
    out.truncate(size);
    out
}

/// Tiered point-mass datasets. Every tier is byte-deterministic in
/// `(tier, size, seed)`; expert and medium tiers train their own generator
/// policy with online SAC first.
pub fn gen_pointmass_dataset(tier: Tier, size: usize, seed: u64) -> Result<Dataset> {
    gen_pointmass_dataset_with(&PointMassSpec::default(), &OnlineSacConfig::default(), tier, size, seed)
}

pub fn gen_pointmass_dataset_with(
    spec: &PointMassSpec,
    sac_cfg: &OnlineSacConfig,
    tier: Tier,
    size: usize,
    seed: u64,
) -> Result<Dataset> {
    if size == 0 {
        return Err(OfrlError::InvalidConfig("dataset size must be positive".into()));
    }
    let (transitions, behavior_policy, refs) = match tier {
        Tier::Random => {
            let mut out = Vec::with_capacity(size + spec.horizon);
            let mut ep = 0u64;
            while out.len() < size {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xBEEF_0000 + ep));
                let (transitions, _) = spec.rollout(&mut rng, |_, r| {
                    vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]
                });
                out.extend(transitions);
                ep += 1;
            }
            out.truncate(size);
            // references still need a trained expert so normalized returns
            // are comparable across tiers
            let trained = train_online_sac(spec, sac_cfg, seed)?;
            (out, "uniform random actions".to_string(), trained.refs)
        }
        Tier::Medium => {
            let trained = train_online_sac(spec, sac_cfg, seed)?;
            let t = rollout_dataset(spec, &trained.medium, size, seed);
            (
                t,
                "first online-sac checkpoint at half the expert's normalized score, stochastic rollouts".to_string(),
                trained.refs,
            )
        }
        Tier::Expert => {
            let trained = train_online_sac(spec, sac_cfg, seed)?;
            let t = rollout_dataset(spec, &trained.expert, size, seed);
            (
                t,
                "final online-sac policy, stochastic rollouts".to_string(),
                trained.refs,
            )
        }
        Tier::Mixed => {
            let trained = train_online_sac(spec, sac_cfg, seed)?;
            let n = trained.replay.len();
            let stride = (n / size).max(1);
            let t: Vec<Transition> = trained
                .replay
                .iter()
                .step_by(stride)
                .take(size)
                .cloned()
                .collect();
            (
                t,
                format!("online-sac replay stream, every {stride}th transition"),
                trained.refs,
            )
        }
    };
    Ok(Dataset {
        meta: DatasetMeta {
            spec_id: EnvKind::Pointmass.spec_id().to_string(),
            state_dim: 4,
            action_dim: 2,
            tier,
            generation_seed: seed,
            behavior_policy,
            normalization: refs,
            notes: vec![],
        },
        transitions,
    })
}

/// Evaluation entry point shared by every algorithm: deterministic-action
/// episodes with per-episode seeds derived from `seed`.
pub fn evaluate_policy(
    env: EnvKind,
    policy: &dyn RolloutPolicy,
    n_episodes: usize,
    seed: u64,
    refs: &NormalizationRefs,
) -> super::EvalResult {
    assert!(n_episodes >= 1);
    let mean_return = match env {
        EnvKind::Bandit => {
            let mut total = 0.0;
            for ep in 0..n_episodes {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xE0_0000 + ep as u64));
                let a = policy.act(&super::bandit::BANDIT_STATE, true, &mut rng);
                total += super::bandit::bandit_reward_synthetic(a[0]);
            }
            total / n_episodes as f64
        }
        EnvKind::Pointmass => {
            let spec = PointMassSpec::default();
            let mut total = 0.0;
            for ep in 0..n_episodes {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xE0_0000 + ep as u64));
                let mut act_rng = rng.clone();
                total += spec.episode_return(&mut rng, |s, _| policy.act(s, true, &mut act_rng));
            }
            total / n_episodes as f64
        }
    };
    super::EvalResult {
        mean_return,
        normalized_return: refs.normalize(mean_return),
        episodes: n_episodes,
    }
}

/// Uniform-random rollout policy, used for reference scores.
pub struct UniformPolicy {
    pub action_dim: usize,
}

impl RolloutPolicy for UniformPolicy {
    fn act(&self, _state: &[f64], _deterministic: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.action_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect()
    }
}
