//! Twin offset critics: the composed critic `Q(s,a) = O(s,a) + log mu(a|s)`,
//! the squared TD loss, the action-gradient penalty on the offsets, Polyak
//! target tracking, and the survival-bonus reward shift.
//!
//! The same machinery runs in plain mode (`use_offset_representation =
//! false`): the networks then parameterize `Q` directly and the penalty, if
//! enabled, lands on `grad_a Q` instead — the ablation where the penalty is
//! applied without the offset representation.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    mlp_apply, mlp_init, AdamState, BoundParams, MlpArch, Node, ParameterSet, Tape,
};
use crate::bc::{BehaviorDensity, BehaviorOnTape};
use crate::checkpoint::{CheckpointSection, TAG_CRITIC_OFFSET, TAG_CRITIC_PLAIN};
use crate::error::{OfrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltySource {
    /// Penalty actions sampled from the current policy (the default form).
    Policy,
    /// Penalty actions taken from the dataset batch (the divergence
    /// direction that matches the conservative-critic derivation).
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TwinAggregation {
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    /// Gradient-penalty coefficient.
    pub lambda: f64,
    pub discount: f64,
    /// Polyak rate for target tracking, in (0, 1].
    pub tau: f64,
    /// Constant added to every reward before forming targets.
    pub reward_bonus: f64,
    /// `true`: critics are offsets composed with the frozen behavior
    /// log-density. `false`: critics parameterize Q directly.
    pub use_offset_representation: bool,
    pub penalty_action_source: PenaltySource,
    /// Number of penalty actions per batch state.
    pub penalty_samples: usize,
    /// How per-twin penalty terms combine.
    pub penalty_aggregation: TwinAggregation,
    /// Include `-alpha log pi(a'|s')` in bootstrap targets. Off by default:
    /// entropy is not added to the rewards.
    pub soft_targets: bool,
    pub lr: f64,
    pub hidden: Vec<usize>,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig {
            lambda: 0.1,
            discount: 0.99,
            tau: 0.005,
            reward_bonus: 0.0,
            use_offset_representation: true,
            penalty_action_source: PenaltySource::Policy,
            penalty_samples: 1,
            penalty_aggregation: TwinAggregation::Sum,
            soft_targets: false,
            lr: 3e-4,
            hidden: vec![64, 64],
        }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(OfrlError::InvalidConfig("lambda must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(OfrlError::InvalidConfig("discount must lie in [0,1)".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(OfrlError::InvalidConfig("tau must lie in (0,1]".into()));
        }
        if self.penalty_samples == 0 {
            return Err(OfrlError::InvalidConfig("penalty_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which critic value to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QSelect {
    OnlineMin,
    TargetMin,
    Online1,
    Online2,
}

/// Twin networks plus their slow-moving target copies. The frozen behavior
/// density is supplied per call; nothing here ever mutates it.
#[derive(Debug, Clone)]
pub struct CriticPair {
    pub state_dim: usize,
    pub action_dim: usize,
    pub arch: MlpArch,
    /// Both twins merged under `o1.` / `o2.` prefixes.
    pub online: ParameterSet,
    pub target: ParameterSet,
    pub config: CriticConfig,
}

impl CriticPair {
    pub fn init(state_dim: usize, action_dim: usize, config: &CriticConfig, seed: u64) -> Self {
        config.validate().expect("critic config");
        let arch = MlpArch::new(state_dim + action_dim, &config.hidden, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut online = ParameterSet::new();
        // zero-initialized heads: the composed critic starts at log mu
        online.merge_prefixed("o1.", &mlp_init(&arch, &mut rng, true));
        online.merge_prefixed("o2.", &mlp_init(&arch, &mut rng, true));
        let target = online.clone();
        CriticPair {
            state_dim,
            action_dim,
            arch,
            online,
            target,
            config: config.clone(),
        }
    }

    fn tensors_per_twin(&self) -> usize {
        2 * (self.arch.hidden.len() + 1)
    }

    /// Polyak update: `target <- (1 - tau) target + tau online`.
    pub fn polyak_update(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.target.affine_update(1.0 - tau, tau, &self.online)
    }

    /// Bind online twins as trainable parameters; targets as constants.
    pub fn on_tape<'a>(
        &'a self,
        tape: &Tape,
        behavior: Option<&'a BehaviorDensity>,
    ) -> CriticOnTape<'a> {
        self.bind(tape, behavior, true)
    }

    /// Bind everything as constants (actor updates, evaluation).
    pub fn on_tape_frozen<'a>(
        &'a self,
        tape: &Tape,
        behavior: Option<&'a BehaviorDensity>,
    ) -> CriticOnTape<'a> {
        self.bind(tape, behavior, false)
    }

    fn bind<'a>(
        &'a self,
        tape: &Tape,
        behavior: Option<&'a BehaviorDensity>,
        trainable: bool,
    ) -> CriticOnTape<'a> {
        let online = if trainable {
            self.online.bind(tape)
        } else {
            self.online.bind_const(tape)
        };
        let target = self.target.bind_const(tape);
        CriticOnTape {
            pair: self,
            online,
            target,
            behavior: behavior.map(|b| b.on_tape(tape)),
        }
    }

    pub fn to_section(&self) -> CheckpointSection {
        let meta = serde_json::json!({
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "arch": self.arch,
            "config": self.config,
        });
        let mut tensors = ParameterSet::new();
        tensors.merge_prefixed("online.", &self.online);
        tensors.merge_prefixed("target.", &self.target);
        CheckpointSection {
            tag: if self.config.use_offset_representation {
                TAG_CRITIC_OFFSET
            } else {
                TAG_CRITIC_PLAIN
            },
            meta_json: meta.to_string(),
            tensors,
        }
    }

    pub fn from_section(section: &CheckpointSection) -> Result<Self> {
        let meta: serde_json::Value = serde_json::from_str(&section.meta_json)
            .map_err(|e| OfrlError::Checkpoint(format!("critic meta: {e}")))?;
        let arch: MlpArch = serde_json::from_value(meta["arch"].clone())
            .map_err(|e| OfrlError::Checkpoint(format!("critic arch: {e}")))?;
        let config: CriticConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| OfrlError::Checkpoint(format!("critic config: {e}")))?;
        Ok(CriticPair {
            state_dim: meta["state_dim"].as_u64().unwrap_or(0) as usize,
            action_dim: meta["action_dim"].as_u64().unwrap_or(0) as usize,
            arch,
            online: section.tensors.extract_prefixed("online."),
            target: section.tensors.extract_prefixed("target."),
            config,
        })
    }
}

/// Per-update diagnostics; the two loss terms are reported separately and
/// `penalty_term` is the raw mean squared gradient norm before `lambda`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticDiagnostics {
    pub td_term: f64,
    pub penalty_term: f64,
    pub total_loss: f64,
}

/// One dataset batch packed into column-major constants.
pub struct PackedBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array2<f64>,
    pub next_states: Array2<f64>,
    pub not_done: Array2<f64>,
}

impl PackedBatch {
    pub fn from_transitions(transitions: &[&crate::env::Transition]) -> Self {
        let b = transitions.len();
        assert!(b > 0, "empty batch");
        let sd = transitions[0].state.len();
        let ad = transitions[0].action.len();
        let mut states = Array2::zeros((sd, b));
        let mut actions = Array2::zeros((ad, b));
        let mut rewards = Array2::zeros((1, b));
        let mut next_states = Array2::zeros((sd, b));
        let mut not_done = Array2::zeros((1, b));
        for (j, t) in transitions.iter().enumerate() {
            for i in 0..sd {
                states[[i, j]] = t.state[i];
                next_states[[i, j]] = t.next_state[i];
            }
            for i in 0..ad {
                actions[[i, j]] = t.action[i];
            }
            rewards[[0, j]] = t.reward;
            not_done[[0, j]] = if t.done { 0.0 } else { 1.0 };
        }
        PackedBatch {
            states,
            actions: crate::dist::clamp_actions(actions),
            rewards,
            next_states,
            not_done,
        }
    }
}

/// Critic pair bound onto one tape.
pub struct CriticOnTape<'a> {
    pair: &'a CriticPair,
    pub(crate) online: BoundParams,
    target: BoundParams,
    behavior: Option<BehaviorOnTape<'a>>,
}

impl CriticOnTape<'_> {
    fn twin_bound(&self, source: &BoundParams, twin: usize) -> BoundParams {
        let per = self.pair.tensors_per_twin();
        BoundParams {
            nodes: source.nodes[twin * per..(twin + 1) * per].to_vec(),
        }
    }

    /// Raw network output of one twin: the offset in offset mode, the plain
    /// Q-value otherwise.
    pub fn raw_output(
        &self,
        tape: &Tape,
        states: Node,
        actions: Node,
        twin: usize,
        use_target: bool,
    ) -> Result<Node> {
        let source = if use_target { &self.target } else { &self.online };
        let bound = self.twin_bound(source, twin);
        let input = tape.concat_rows(states, actions);
        mlp_apply(tape, &self.pair.arch, &bound, input)
    }

    fn compose(&self, tape: &Tape, states: Node, actions: Node, raw: Node) -> Result<Node> {
        if self.pair.config.use_offset_representation {
            let b = self
                .behavior
                .as_ref()
                .expect("offset mode requires behavior");
            let log_mu = b.log_prob(tape, states, actions)?;
            Ok(tape.add(raw, log_mu))
        } else {
            Ok(raw)
        }
    }

    /// Composed critic value `1 x B`.
    pub fn q_value(
        &self,
        tape: &Tape,
        states: Node,
        actions: Node,
        which: QSelect,
    ) -> Result<Node> {
        let q = match which {
            QSelect::Online1 => {
                let raw = self.raw_output(tape, states, actions, 0, false)?;
                self.compose(tape, states, actions, raw)?
            }
            QSelect::Online2 => {
                let raw = self.raw_output(tape, states, actions, 1, false)?;
                self.compose(tape, states, actions, raw)?
            }
            QSelect::OnlineMin => {
                let q1 = self.q_value(tape, states, actions, QSelect::Online1)?;
                let q2 = self.q_value(tape, states, actions, QSelect::Online2)?;
                tape.min(q1, q2)
            }
            QSelect::TargetMin => {
                let r1 = self.raw_output(tape, states, actions, 0, true)?;
                let r2 = self.raw_output(tape, states, actions, 1, true)?;
                let m = tape.min(r1, r2);
                self.compose(tape, states, actions, m)?
            }
        };
        Ok(q)
    }

    /// Squared TD loss, averaged over the batch and over both online twins.
    /// The bootstrap target is gradient-blocked.
    pub fn td_loss(
        &self,
        tape: &Tape,
        batch: &BatchOnTape,
        next_actions: Node,
        next_log_pi: Option<Node>,
        temperature: f64,
    ) -> Result<Node> {
        let cfg = &self.pair.config;
        let target_q = self.q_value(tape, batch.next_states, next_actions, QSelect::TargetMin)?;
        let mut boot = target_q;
        if cfg.soft_targets {
            let lp = next_log_pi.ok_or_else(|| {
                OfrlError::InvalidConfig("soft targets need next-action log-probs".into())
            })?;
            boot = tape.sub(boot, tape.scale(lp, temperature));
        }
        let discounted = tape.mul(tape.scale(boot, cfg.discount), batch.not_done);
        let shifted_r = tape.add_const(batch.rewards, cfg.reward_bonus);
        let y = tape.detach(tape.add(shifted_r, discounted));
        tape.forward(y)?;

        let q1 = self.q_value(tape, batch.states, batch.actions, QSelect::Online1)?;
        let q2 = self.q_value(tape, batch.states, batch.actions, QSelect::Online2)?;
        let e1 = tape.square(tape.sub(y, q1));
        let e2 = tape.square(tape.sub(y, q2));
        Ok(tape.scale(tape.add(tape.mean_all(e1), tape.mean_all(e2)), 0.5))
    }

    /// Mean squared action-gradient of the raw twin outputs at the supplied
    /// penalty actions (constants), aggregated across twins per config.
    /// The result is an ordinary tape expression, so it can be minimized
    /// over the critic parameters.
    pub fn gradient_penalty(&self, tape: &Tape, states: Node, penalty_actions: &[Array2<f64>])
        -> Result<Node> {
        if penalty_actions.is_empty() {
            return Err(OfrlError::InvalidConfig(
                "gradient penalty needs at least one action set".into(),
            ));
        }
        let cfg = &self.pair.config;
        let mut terms: Vec<Node> = Vec::new();
        for actions in penalty_actions {
            let a_in = tape.input(crate::dist::clamp_actions(actions.clone()));
            for twin in 0..2 {
                let out = self.raw_output(tape, states, a_in, twin, false)?;
                let root = tape.sum_all(out);
                let g = tape.grad(root, &[a_in])?[0];
                let sq = tape.col_sum(tape.square(g));
                terms.push(tape.mean_all(sq));
            }
        }
        let mut acc = terms[0];
        for &t in &terms[1..] {
            acc = tape.add(acc, t);
        }
        let denom = match cfg.penalty_aggregation {
            TwinAggregation::Sum => penalty_actions.len() as f64,
            TwinAggregation::Mean => (2 * penalty_actions.len()) as f64,
        };
        Ok(tape.scale(acc, 1.0 / denom))
    }
}

/// Batch constants bound onto a tape.
pub struct BatchOnTape {
    pub states: Node,
    pub actions: Node,
    pub rewards: Node,
    pub next_states: Node,
    pub not_done: Node,
}

impl BatchOnTape {
    pub fn bind(tape: &Tape, packed: &PackedBatch) -> Self {
        BatchOnTape {
            states: tape.constant(packed.states.clone()),
            actions: tape.constant(packed.actions.clone()),
            rewards: tape.constant(packed.rewards.clone()),
            next_states: tape.constant(packed.next_states.clone()),
            not_done: tape.constant(packed.not_done.clone()),
        }
    }
}

/// One critic optimization step: Adam on `td + lambda * penalty`, then the
/// Polyak target update. Both loss terms are reported separately.
#[allow(clippy::too_many_arguments)]
pub fn critic_update(
    pair: &mut CriticPair,
    behavior: Option<&BehaviorDensity>,
    packed: &PackedBatch,
    next_actions: Array2<f64>,
    next_log_pi: Option<Array2<f64>>,
    penalty_actions: &[Array2<f64>],
    temperature: f64,
    optimizer: &mut AdamState,
    step: u64,
) -> Result<CriticDiagnostics> {
    let tape = Tape::new();
    let ctx = pair.on_tape(&tape, behavior);
    let batch = BatchOnTape::bind(&tape, packed);
    let na = tape.constant(crate::dist::clamp_actions(next_actions));
    let nlp = next_log_pi.map(|m| tape.constant(m));
    let td = ctx.td_loss(&tape, &batch, na, nlp, temperature)?;

    let (total, penalty_v) = if !penalty_actions.is_empty() {
        let gp = ctx.gradient_penalty(&tape, batch.states, penalty_actions)?;
        let total = tape.add(td, tape.scale(gp, pair.config.lambda));
        (total, tape.scalar(gp))
    } else {
        (td, 0.0)
    };

    let diag = CriticDiagnostics {
        td_term: tape.scalar(td),
        penalty_term: penalty_v,
        total_loss: tape.scalar(total),
    };
    tape.forward(total).map_err(|e| OfrlError::Diverged {
        step,
        what: format!("critic loss: {e}"),
    })?;

    let grad_nodes = tape.grad(total, &ctx.online.nodes)?;
    let grads: Vec<Array2<f64>> = grad_nodes.iter().map(|&g| tape.value_owned(g)).collect();
    drop(ctx);
    optimizer.step(&mut pair.online, &grads).map_err(|e| match e {
        OfrlError::Diverged { what, .. } => OfrlError::Diverged { step, what },
        other => other,
    })?;
    pair.polyak_update()?;
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BehaviorModel;
    use crate::dist::TruncatedLaplace;
    use crate::env::Transition;
    use rand::Rng;

    fn laplace_behavior() -> BehaviorDensity {
        BehaviorDensity::Laplace(TruncatedLaplace {
            loc: 0.0,
            scale: 0.25,
            log_trunc_mass: -0.018_316_341_274_9, // ln of mass of Laplace(0,0.25) on [-1,1]
        })
    }

    fn mixture_behavior(state_dim: usize, action_dim: usize) -> BehaviorDensity {
        let cfg = crate::bc::BCConfig {
            hidden: vec![16],
            mixture_k: 3,
            ..Default::default()
        };
        BehaviorDensity::Mixture(BehaviorModel::init(state_dim, action_dim, &cfg, 99))
    }

    fn batch_consts(tape: &Tape, sd: usize, ad: usize, b: usize, seed: u64) -> (Node, Node) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = tape.constant(Array2::from_shape_fn((sd, b), |_| rng.random_range(-1.0..1.0)));
        let a = tape.constant(Array2::from_shape_fn((ad, b), |_| rng.random_range(-0.9..0.9)));
        (s, a)
    }

    #[test]
    fn zero_init_composed_critic_equals_log_mu() {
        let behavior = laplace_behavior();
        let pair = CriticPair::init(1, 1, &CriticConfig::default(), 0);
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, Some(&behavior));
        let (s, a) = batch_consts(&tape, 1, 1, 8, 1);
        let q = ctx.q_value(&tape, s, a, QSelect::OnlineMin).unwrap();
        let lm = behavior.on_tape(&tape).log_prob(&tape, s, a).unwrap();
        let qv = tape.value_owned(q);
        let lv = tape.value_owned(lm);
        for j in 0..8 {
            assert_eq!(qv[[0, j]], lv[[0, j]]);
        }
    }

    #[test]
    fn online_min_below_both_twins() {
        let behavior = mixture_behavior(2, 2);
        let mut cfg = CriticConfig::default();
        cfg.hidden = vec![16, 16];
        let mut pair = CriticPair::init(2, 2, &cfg, 3);
        // randomize the zero-initialized heads so the twins differ
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..pair.online.len() {
            pair.online
                .value_mut(i)
                .mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
        }
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, Some(&behavior));
        let (s, a) = batch_consts(&tape, 2, 2, 16, 5);
        let q1 = tape.value_owned(ctx.q_value(&tape, s, a, QSelect::Online1).unwrap());
        let q2 = tape.value_owned(ctx.q_value(&tape, s, a, QSelect::Online2).unwrap());
        let qm = tape.value_owned(ctx.q_value(&tape, s, a, QSelect::OnlineMin).unwrap());
        for j in 0..16 {
            assert!(qm[[0, j]] <= q1[[0, j]] && qm[[0, j]] <= q2[[0, j]]);
        }
    }

    #[test]
    fn q_minus_log_mu_is_raw_offset() {
        let behavior = mixture_behavior(1, 1);
        let mut pair = CriticPair::init(1, 1, &CriticConfig::default(), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in 0..pair.online.len() {
            pair.online
                .value_mut(i)
                .mapv_inplace(|v| v + rng.random_range(-0.5..0.5));
        }
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, Some(&behavior));
        let (s, a) = batch_consts(&tape, 1, 1, 8, 9);
        let q = tape.value_owned(ctx.q_value(&tape, s, a, QSelect::Online1).unwrap());
        let lm = {
            let b = behavior.on_tape(&tape);
            tape.value_owned(b.log_prob(&tape, s, a).unwrap())
        };
        let raw = tape.value_owned(ctx.raw_output(&tape, s, a, 0, false).unwrap());
        for j in 0..8 {
            assert!((q[[0, j]] - lm[[0, j]] - raw[[0, j]]).abs() < 1e-12);
        }
    }

    fn single_transition_batch(r: f64, done: bool) -> PackedBatch {
        let t = Transition {
            state: vec![0.2],
            action: vec![0.1],
            reward: r,
            next_state: vec![0.3],
            done,
        };
        PackedBatch::from_transitions(&[&t])
    }

    /// Critic whose raw output is exactly `c` everywhere: single linear
    /// layer with zero weights and bias `c`.
    fn constant_critic(c1: f64, c2: f64) -> CriticPair {
        let cfg = CriticConfig {
            hidden: vec![],
            use_offset_representation: false,
            ..CriticConfig::default()
        };
        let mut pair = CriticPair::init(1, 1, &cfg, 0);
        // entries: o1.w0, o1.b0, o2.w0, o2.b0
        pair.online.value_mut(1)[[0, 0]] = c1;
        pair.online.value_mut(3)[[0, 0]] = c2;
        pair.target = pair.online.clone();
        pair
    }

    #[test]
    fn terminal_td_loss_analytic() {
        let pair = constant_critic(0.3, 0.3);
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let packed = single_transition_batch(1.0, true);
        let batch = BatchOnTape::bind(&tape, &packed);
        let na = tape.constant(Array2::zeros((1, 1)));
        let loss = ctx.td_loss(&tape, &batch, na, None, 0.0).unwrap();
        assert!((tape.scalar(loss) - 0.49).abs() < 1e-12);
    }

    #[test]
    fn zero_discount_regresses_on_reward_plus_bonus() {
        let cfg = CriticConfig {
            hidden: vec![],
            use_offset_representation: false,
            discount: 0.0,
            reward_bonus: 0.25,
            ..CriticConfig::default()
        };
        cfg.validate().unwrap();
        let mut pair = CriticPair::init(1, 1, &cfg, 0);
        pair.online.value_mut(1)[[0, 0]] = 0.5;
        pair.online.value_mut(3)[[0, 0]] = 0.5;
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let packed = single_transition_batch(1.0, false); // non-terminal
        let batch = BatchOnTape::bind(&tape, &packed);
        // absurd next action; gamma = 0 must ignore it
        let na = tape.constant(Array2::from_elem((1, 1), 0.9));
        let loss = ctx.td_loss(&tape, &batch, na, None, 0.0).unwrap();
        // target = 1.25, q = 0.5 on both twins
        assert!((tape.scalar(loss) - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_has_zero_penalty() {
        let pair = constant_critic(1.7, -0.4);
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let s = tape.constant(Array2::zeros((1, 4)));
        let pen = ctx
            .gradient_penalty(&tape, s, &[Array2::zeros((1, 4))])
            .unwrap();
        assert_eq!(tape.scalar(pen), 0.0);
    }

    #[test]
    fn linear_offset_penalty_analytic() {
        // O(s, a) = 2a on both twins: w = [0, 2], b = 0
        let cfg = CriticConfig {
            hidden: vec![],
            use_offset_representation: false,
            ..CriticConfig::default()
        };
        let mut pair = CriticPair::init(1, 1, &cfg, 0);
        for i in [0usize, 2] {
            pair.online.value_mut(i)[[0, 0]] = 0.0; // state weight
            pair.online.value_mut(i)[[0, 1]] = 2.0; // action weight
        }
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let s = tape.constant(Array2::zeros((1, 4)));
        let pen = ctx
            .gradient_penalty(&tape, s, &[Array2::from_elem((1, 4), 0.3)])
            .unwrap();
        // per twin 4, summed over twins = 8
        assert!((tape.scalar(pen) - 8.0).abs() < 1e-12);
        // mean aggregation halves it
        let mut pair_mean = pair.clone();
        pair_mean.config.penalty_aggregation = TwinAggregation::Mean;
        let tape2 = Tape::new();
        let ctx2 = pair_mean.on_tape(&tape2, None);
        let s2 = tape2.constant(Array2::zeros((1, 4)));
        let pen2 = ctx2
            .gradient_penalty(&tape2, s2, &[Array2::from_elem((1, 4), 0.3)])
            .unwrap();
        assert!((tape2.scalar(pen2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = CriticConfig {
            hidden: vec![24, 24],
            use_offset_representation: false,
            ..CriticConfig::default()
        };
        let mut pair = CriticPair::init(2, 2, &cfg, 13);
        for i in 0..pair.online.len() {
            pair.online
                .value_mut(i)
                .mapv_inplace(|v| v + rng.random_range(-0.4..0.4));
        }
        let b = 6;
        let states = Array2::from_shape_fn((2, b), |_| rng.random_range(-1.0..1.0));
        let actions = Array2::from_shape_fn((2, b), |_| rng.random_range(-0.8..0.8));

        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let s = tape.constant(states.clone());
        let pen = ctx.gradient_penalty(&tape, s, &[actions.clone()]).unwrap();
        let ad = tape.scalar(pen);

        // finite-difference route per twin and sample
        let raw_eval = |twin: usize, a: &Array2<f64>| -> Vec<f64> {
            let t = Tape::new();
            let c = pair.on_tape(&t, None);
            let sn = t.constant(states.clone());
            let an = t.constant(a.clone());
            let out = c.raw_output(&t, sn, an, twin, false).unwrap();
            let v = t.value_owned(out);
            v.iter().copied().collect()
        };
        let h = 1e-5;
        let mut fd_total = 0.0;
        for twin in 0..2 {
            let mut per_sample = vec![0.0; b];
            for dim in 0..2 {
                let mut hi = actions.clone();
                let mut lo = actions.clone();
                for j in 0..b {
                    hi[[dim, j]] += h;
                    lo[[dim, j]] -= h;
                }
                let vh = raw_eval(twin, &hi);
                let vl = raw_eval(twin, &lo);
                for j in 0..b {
                    let g = (vh[j] - vl[j]) / (2.0 * h);
                    per_sample[j] += g * g;
                }
            }
            fd_total += per_sample.iter().sum::<f64>() / b as f64;
        }
        let rel = (ad - fd_total).abs() / fd_total.abs().max(1e-12);
        assert!(rel < 1e-5, "ad {ad} vs fd {fd_total}");
    }

    #[test]
    fn penalty_source_only_changes_action_sets() {
        // identical action sets supplied -> identical penalties and grads
        let mut cfg = CriticConfig::default();
        cfg.hidden = vec![16];
        cfg.use_offset_representation = false;
        let pair_policy = CriticPair::init(1, 1, &cfg, 21);
        let mut cfg2 = cfg.clone();
        cfg2.penalty_action_source = PenaltySource::Data;
        let mut pair_data = CriticPair::init(1, 1, &cfg2, 21);
        pair_data.online = pair_policy.online.clone();
        pair_data.target = pair_policy.target.clone();

        let actions = Array2::from_elem((1, 5), 0.2);
        let run = |pair: &CriticPair| -> (f64, u64) {
            let tape = Tape::new();
            let ctx = pair.on_tape(&tape, None);
            let s = tape.constant(Array2::zeros((1, 5)));
            let pen = ctx.gradient_penalty(&tape, s, &[actions.clone()]).unwrap();
            let g = tape.grad(pen, &ctx.online.nodes).unwrap();
            let mut hash = ParameterSet::new();
            for (i, n) in g.iter().enumerate() {
                hash.push(format!("g{i}"), tape.value_owned(*n));
            }
            (tape.scalar(pen), hash.content_hash())
        };
        assert_eq!(run(&pair_policy), run(&pair_data));
    }

    #[test]
    fn lambda_zero_update_matches_td_only_step() {
        let behavior = laplace_behavior();
        let mut cfg = CriticConfig::default();
        cfg.lambda = 0.0;
        cfg.hidden = vec![16];
        let make = || {
            let mut p = CriticPair::init(1, 1, &cfg, 17);
            let mut rng = ChaCha8Rng::seed_from_u64(18);
            for i in 0..p.online.len() {
                p.online
                    .value_mut(i)
                    .mapv_inplace(|v| v + rng.random_range(-0.2..0.2));
            }
            p.target = p.online.clone();
            p
        };
        let t = Transition {
            state: vec![0.1],
            action: vec![0.2],
            reward: 0.5,
            next_state: vec![0.15],
            done: false,
        };
        let packed = PackedBatch::from_transitions(&[&t]);
        let next_a = Array2::from_elem((1, 1), 0.1);

        let mut with_pen = make();
        let mut opt1 = AdamState::new(&with_pen.online, cfg.lr);
        critic_update(
            &mut with_pen,
            Some(&behavior),
            &packed,
            next_a.clone(),
            None,
            &[Array2::from_elem((1, 1), 0.3)],
            0.0,
            &mut opt1,
            0,
        )
        .unwrap();

        let mut without = make();
        let mut opt2 = AdamState::new(&without.online, cfg.lr);
        critic_update(
            &mut without,
            Some(&behavior),
            &packed,
            next_a,
            None,
            &[],
            0.0,
            &mut opt2,
            0,
        )
        .unwrap();

        assert_eq!(
            with_pen.online.content_hash(),
            without.online.content_hash()
        );
    }

    #[test]
    fn tau_one_copies_online_to_target() {
        let behavior = laplace_behavior();
        let mut cfg = CriticConfig::default();
        cfg.tau = 1.0;
        cfg.hidden = vec![8];
        let mut pair = CriticPair::init(1, 1, &cfg, 2);
        let t = Transition {
            state: vec![0.0],
            action: vec![0.1],
            reward: 1.0,
            next_state: vec![0.0],
            done: true,
        };
        let packed = PackedBatch::from_transitions(&[&t]);
        let mut opt = AdamState::new(&pair.online, cfg.lr);
        critic_update(
            &mut pair,
            Some(&behavior),
            &packed,
            Array2::zeros((1, 1)),
            None,
            &[],
            0.0,
            &mut opt,
            0,
        )
        .unwrap();
        assert_eq!(pair.online.content_hash(), pair.target.content_hash());
    }

    #[test]
    fn diagnostics_totals_are_consistent() {
        let behavior = laplace_behavior();
        let mut cfg = CriticConfig::default();
        cfg.hidden = vec![16];
        cfg.lambda = 0.37;
        let mut pair = CriticPair::init(1, 1, &cfg, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for i in 0..pair.online.len() {
            pair.online
                .value_mut(i)
                .mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
        }
        let t = Transition {
            state: vec![0.1],
            action: vec![-0.2],
            reward: 0.3,
            next_state: vec![0.2],
            done: false,
        };
        let packed = PackedBatch::from_transitions(&[&t]);
        let mut opt = AdamState::new(&pair.online, cfg.lr);
        let diag = critic_update(
            &mut pair,
            Some(&behavior),
            &packed,
            Array2::from_elem((1, 1), 0.05),
            None,
            &[Array2::from_elem((1, 1), 0.4)],
            0.0,
            &mut opt,
            0,
        )
        .unwrap();
        assert!(
            (diag.total_loss - (diag.td_term + cfg.lambda * diag.penalty_term)).abs() < 1e-10
        );
    }

    #[test]
    fn survival_bonus_gradient_identity() {
        // grad_theta[-2c Q + (y - Q)^2] equals grad_theta[(y + c - Q)^2]
        let behavior = mixture_behavior(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for trial in 0..5 {
            let mut cfg = CriticConfig::default();
            cfg.hidden = vec![12, 12];
            let mut pair = CriticPair::init(1, 1, &cfg, 100 + trial);
            for i in 0..pair.online.len() {
                pair.online
                    .value_mut(i)
                    .mapv_inplace(|v| v + rng.random_range(-0.4..0.4));
            }
            let c: f64 = rng.random_range(0.5..5.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            let b = 4;

            let tape = Tape::new();
            let ctx = pair.on_tape(&tape, Some(&behavior));
            let (s, a) = batch_consts(&tape, 1, 1, b, 200 + trial);
            let q = ctx.q_value(&tape, s, a, QSelect::Online1).unwrap();
            let yn = tape.constant(Array2::from_elem((1, b), y));

            let resid = tape.sub(yn, q);
            let linear_form = tape.mean_all(tape.add(
                tape.scale(q, -2.0 * c),
                tape.square(resid),
            ));
            let shifted = tape.sub(tape.add_const(yn, c), q);
            let shifted_form = tape.mean_all(tape.square(shifted));

            let g1 = tape.grad(linear_form, &ctx.online.nodes).unwrap();
            let g2 = tape.grad(shifted_form, &ctx.online.nodes).unwrap();
            for (n1, n2) in g1.iter().zip(&g2) {
                let v1 = tape.value_owned(*n1);
                let v2 = tape.value_owned(*n2);
                for (x, z) in v1.iter().zip(v2.iter()) {
                    assert!((x - z).abs() < 1e-10, "{x} vs {z}");
                }
            }
        }
    }

    #[test]
    fn reward_bonus_shifts_terminal_fixed_point_by_c() {
        // one-step tabular oracle: fitted terminal Q converges to r + c
        let run = |bonus: f64| -> f64 {
            let cfg = CriticConfig {
                hidden: vec![8],
                use_offset_representation: false,
                reward_bonus: bonus,
                lr: 3e-3,
                tau: 1.0,
                ..CriticConfig::default()
            };
            let mut pair = CriticPair::init(1, 1, &cfg, 77);
            let t = Transition {
                state: vec![0.0],
                action: vec![0.1],
                reward: 0.4,
                next_state: vec![0.0],
                done: true,
            };
            let packed = PackedBatch::from_transitions(&[&t]);
            let mut opt = AdamState::new(&pair.online, cfg.lr);
            for step in 0..3000 {
                critic_update(
                    &mut pair,
                    None,
                    &packed,
                    Array2::zeros((1, 1)),
                    None,
                    &[],
                    0.0,
                    &mut opt,
                    step,
                )
                .unwrap();
            }
            let tape = Tape::new();
            let ctx = pair.on_tape(&tape, None);
            let s = tape.constant(Array2::zeros((1, 1)));
            let a = tape.constant(Array2::from_elem((1, 1), 0.1));
            tape.scalar(ctx.q_value(&tape, s, a, QSelect::OnlineMin).unwrap())
        };
        let q0 = run(0.0);
        let q5 = run(0.5);
        assert!((q0 - 0.4).abs() < 1e-3, "q0 {q0}");
        assert!((q5 - q0 - 0.5).abs() < 2e-3, "shift {}", q5 - q0);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let pair = CriticPair::init(2, 2, &CriticConfig::default(), 3);
        let section = pair.to_section();
        let back = CriticPair::from_section(&section).unwrap();
        assert_eq!(back.online, pair.online);
        assert_eq!(back.target, pair.target);
        assert_eq!(back.config, pair.config);
    }
}
