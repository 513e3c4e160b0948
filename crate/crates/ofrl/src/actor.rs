//! Policy improvement: an entropy-regularized actor over the composed
//! offset critic, the KL-penalized actor used by the behavior-regularized
//! baseline, and automatic temperature tuning toward a target entropy.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    mlp_apply, mlp_init, AdamState, BoundParams, MlpArch, Node, ParameterSet, Tape,
};
use crate::bc::BehaviorDensity;
use crate::checkpoint::{CheckpointSection, TAG_POLICY};
use crate::critic::{CriticOnTape, QSelect};
use crate::dist::{bounded_log_std, standard_normal, SquashedGaussian, SquashedSample};
use crate::env::RolloutPolicy;
use crate::error::{OfrlError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub lr: f64,
    /// Learning rate for the temperature dual; falls back to `lr`.
    #[serde(default)]
    pub temperature_lr: Option<f64>,
    pub hidden: Vec<usize>,
    /// Target entropy for the learned temperature; defaults to
    /// `-(action dim)`.
    pub target_entropy: Option<f64>,
    /// Auto-tune the temperature; a fixed value is used when `false`.
    pub auto_tune_temperature: bool,
    pub initial_temperature: f64,
}

impl Default for ActorConfig {
    fn default() -> Self {
        ActorConfig {
            lr: 3e-4,
            temperature_lr: None,
            hidden: vec![64, 64],
            target_entropy: None,
            auto_tune_temperature: true,
            initial_temperature: 1.0,
        }
    }
}

/// Tanh-squashed diagonal Gaussian actor with a learnable log-temperature.
#[derive(Debug, Clone)]
pub struct PolicyModel {
    pub state_dim: usize,
    pub action_dim: usize,
    pub arch: MlpArch,
    pub params: ParameterSet,
    pub log_temperature: ParameterSet,
    pub target_entropy: f64,
    pub config: ActorConfig,
}

impl PolicyModel {
    pub fn init(state_dim: usize, action_dim: usize, config: &ActorConfig, seed: u64) -> Self {
        let arch = MlpArch::new(state_dim, &config.hidden, 2 * action_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = mlp_init(&arch, &mut rng, false);
        let mut log_temperature = ParameterSet::new();
        log_temperature.push(
            "log_temperature",
            Array2::from_elem((1, 1), config.initial_temperature.ln()),
        );
        PolicyModel {
            state_dim,
            action_dim,
            arch,
            params,
            log_temperature,
            target_entropy: config.target_entropy.unwrap_or(-(action_dim as f64)),
            config: config.clone(),
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.entry(0).value[[0, 0]].exp()
    }

    /// Squashed-Gaussian heads for a batch of states.
    pub fn heads(&self, tape: &Tape, bound: &BoundParams, states: Node) -> Result<SquashedGaussian> {
        let out = mlp_apply(tape, &self.arch, bound, states)?;
        let d = self.action_dim;
        let mean = tape.slice_rows(out, 0, d);
        let raw_ls = tape.slice_rows(out, d, 2 * d);
        Ok(SquashedGaussian {
            mean,
            log_std: bounded_log_std(tape, raw_ls),
        })
    }

    /// Sample actions for a raw state batch without building gradients;
    /// returns action values and their log-probs.
    pub fn sample_values(
        &self,
        states: &Array2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> (Array2<f64>, Array2<f64>) {
        let tape = Tape::new();
        let bound = self.params.bind_const(&tape);
        let s = tape.constant(states.clone());
        let gauss = self.heads(&tape, &bound, s).expect("state dims");
        let (d, b) = (self.action_dim, states.dim().1);
        let sample = gauss.sample_reparameterized(&tape, standard_normal(rng, d, b));
        let lp = gauss.log_prob_pre_squash(&tape, sample);
        (tape.value_owned(sample.action), tape.value_owned(lp))
    }

    pub fn to_section(&self) -> CheckpointSection {
        let meta = serde_json::json!({
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "arch": self.arch,
            "config": self.config,
            "target_entropy": self.target_entropy,
        });
        let mut tensors = ParameterSet::new();
        tensors.merge_prefixed("trunk.", &self.params);
        tensors.merge_prefixed("temp.", &self.log_temperature);
        CheckpointSection {
            tag: TAG_POLICY,
            meta_json: meta.to_string(),
            tensors,
        }
    }

    pub fn from_section(section: &CheckpointSection) -> Result<Self> {
        let meta: serde_json::Value = serde_json::from_str(&section.meta_json)
            .map_err(|e| OfrlError::Checkpoint(format!("policy meta: {e}")))?;
        let arch: MlpArch = serde_json::from_value(meta["arch"].clone())
            .map_err(|e| OfrlError::Checkpoint(format!("policy arch: {e}")))?;
        let config: ActorConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| OfrlError::Checkpoint(format!("policy config: {e}")))?;
        Ok(PolicyModel {
            state_dim: meta["state_dim"].as_u64().unwrap_or(0) as usize,
            action_dim: meta["action_dim"].as_u64().unwrap_or(0) as usize,
            arch,
            params: section.tensors.extract_prefixed("trunk."),
            log_temperature: section.tensors.extract_prefixed("temp."),
            target_entropy: meta["target_entropy"].as_f64().unwrap_or(-1.0),
            config,
        })
    }
}

impl RolloutPolicy for PolicyModel {
    fn act(&self, state: &[f64], deterministic: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let tape = Tape::new();
        let bound = self.params.bind_const(&tape);
        let s = tape.constant(
            Array2::from_shape_vec((self.state_dim, 1), state.to_vec()).expect("state dims"),
        );
        let gauss = self.heads(&tape, &bound, s).expect("state dims");
        if deterministic {
            let mean = tape.value_owned(gauss.mean);
            (0..self.action_dim).map(|d| mean[[d, 0]].tanh()).collect()
        } else {
            let sample =
                gauss.sample_reparameterized(&tape, standard_normal(rng, self.action_dim, 1));
            let v = tape.value_owned(sample.action);
            v.iter().copied().collect()
        }
    }
}

/// A policy bound onto one tape with a sampled reparameterized action.
pub struct PolicySample {
    pub sample: SquashedSample,
    pub log_prob: Node,
}

/// Bind the policy and draw one reparameterized action per state.
pub fn policy_sample_on_tape(
    tape: &Tape,
    policy: &PolicyModel,
    states: Node,
    rng: &mut ChaCha8Rng,
) -> Result<(BoundParams, PolicySample)> {
    let bound = policy.params.bind(tape);
    let gauss = policy.heads(tape, &bound, states)?;
    let (_, b) = tape.shape(states);
    let sample = gauss.sample_reparameterized(tape, standard_normal(rng, policy.action_dim, b));
    let log_prob = gauss.log_prob_pre_squash(tape, sample);
    Ok((bound, PolicySample { sample, log_prob }))
}

/// Entropy-regularized actor loss over the composed critic:
/// `-mean[min-twin Q(s, a_phi) - alpha log pi(a_phi|s)]`. The critic must be
/// bound frozen so its parameters stay untouched.
pub fn actor_loss_fbrc(
    tape: &Tape,
    critic: &CriticOnTape<'_>,
    states: Node,
    sample: &PolicySample,
    temperature: f64,
) -> Result<Node> {
    let q = critic.q_value(tape, states, sample.sample.action, QSelect::OnlineMin)?;
    let ent_term = tape.scale(sample.log_prob, temperature);
    let objective = tape.sub(q, ent_term);
    Ok(tape.neg(tape.mean_all(objective)))
}

/// KL-penalized actor loss against a plain critic:
/// `-mean[Q(s, a_phi) - alpha_kl (log pi - log mu)]` with a single-sample
/// KL estimate.
pub fn actor_loss_brac(
    tape: &Tape,
    critic: &CriticOnTape<'_>,
    behavior: &BehaviorDensity,
    states: Node,
    sample: &PolicySample,
    alpha_kl: f64,
) -> Result<Node> {
    let q = critic.q_value(tape, states, sample.sample.action, QSelect::OnlineMin)?;
    let log_mu = behavior
        .on_tape(tape)
        .log_prob(tape, states, sample.sample.action)?;
    let kl_est = tape.sub(sample.log_prob, log_mu);
    let objective = tape.sub(q, tape.scale(kl_est, alpha_kl));
    Ok(tape.neg(tape.mean_all(objective)))
}

/// Dual gradient step on the log-temperature:
/// `d/d(log alpha) [alpha (H_est - H_target)]` with the entropy estimate
/// treated as a constant. Raises the temperature when entropy is below
/// target, lowers it when above.
pub fn temperature_update(
    policy: &mut PolicyModel,
    entropy_estimate: f64,
    optimizer: &mut AdamState,
) -> Result<()> {
    if !policy.config.auto_tune_temperature {
        return Ok(());
    }
    let alpha = policy.temperature();
    let grad = alpha * (entropy_estimate - policy.target_entropy);
    optimizer.step(
        &mut policy.log_temperature,
        &[Array2::from_elem((1, 1), grad)],
    )
}

/// Which actor objective to apply. The critic is always bound frozen, so
/// its parameters cannot move during an actor step.
pub enum ActorObjective<'a> {
    /// Entropy-regularized maximization of the composed critic.
    EntropyRegularized {
        critic: &'a crate::critic::CriticPair,
        behavior: Option<&'a BehaviorDensity>,
    },
    /// Plain-critic maximization with a KL penalty toward the behavior.
    KlPenalized {
        critic: &'a crate::critic::CriticPair,
        behavior: &'a BehaviorDensity,
        alpha_kl: f64,
    },
}

/// One actor step: loss gradients on the trunk, then the temperature dual
/// update from the same sampled batch. Returns `(actor loss, entropy
/// estimate, temperature)`.
pub fn actor_update(
    policy: &mut PolicyModel,
    objective: ActorObjective<'_>,
    states: &Array2<f64>,
    optimizer: &mut AdamState,
    temp_optimizer: &mut AdamState,
    rng: &mut ChaCha8Rng,
    step: u64,
) -> Result<(f64, f64, f64)> {
    let tape = Tape::new();
    let s = tape.constant(states.clone());
    let (bound, sample) = policy_sample_on_tape(&tape, policy, s, rng)?;
    let temperature = policy.temperature();
    let loss = match objective {
        ActorObjective::EntropyRegularized { critic, behavior } => {
            let ctx = critic.on_tape_frozen(&tape, behavior);
            actor_loss_fbrc(&tape, &ctx, s, &sample, temperature)?
        }
        ActorObjective::KlPenalized {
            critic,
            behavior,
            alpha_kl,
        } => {
            let ctx = critic.on_tape_frozen(&tape, None);
            actor_loss_brac(&tape, &ctx, behavior, s, &sample, alpha_kl)?
        }
    };
    tape.forward(loss).map_err(|e| OfrlError::Diverged {
        step,
        what: format!("actor loss: {e}"),
    })?;
    let loss_v = tape.scalar(loss);
    let entropy_est =
        -tape.value(sample.log_prob).iter().sum::<f64>() / states.dim().1 as f64;

    let grad_nodes = tape.grad(loss, &bound.nodes)?;
    let grads: Vec<Array2<f64>> = grad_nodes.iter().map(|&g| tape.value_owned(g)).collect();
    optimizer.step(&mut policy.params, &grads).map_err(|e| match e {
        OfrlError::Diverged { what, .. } => OfrlError::Diverged { step, what },
        other => other,
    })?;
    temperature_update(policy, entropy_est, temp_optimizer)?;
    Ok((loss_v, entropy_est, policy.temperature()))
}
