//! Reproducible training runs: configuration, seeding, the alternating
//! critic/actor loop, metrics logging, and run artifacts.

mod ablate;
mod landscape;

pub use ablate::{
    run_ablation, AblationDatasets, AblationRow, AblationSummary, AblationSuite,
    LAMBDA_SWEEP_VALUES,
};
pub use landscape::{export_landscape, global_maxima, parse_landscape_column, LandscapeInputs};

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actor::{actor_update, ActorConfig, ActorObjective, PolicyModel};
use crate::autodiff::AdamState;
use crate::baselines::{cql_penalty, uniform_proposal, CQLConfig, ProposalDraw};
use crate::bc::{fit_laplace, train_bc, BCConfig, BehaviorDensity};
use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::critic::{
    critic_update, CriticConfig, CriticPair, PackedBatch, PenaltySource, TwinAggregation,
};
use crate::dist::clamp_actions;
use crate::env::{
    evaluate_policy, read_dataset, Dataset, EnvKind, RolloutPolicy, Transition,
};
use crate::error::{OfrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    FisherBrc,
    Brac,
    Cql,
    Sac,
    Bc,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::FisherBrc => "fisher-brc",
            Algo::Brac => "brac",
            Algo::Cql => "cql",
            Algo::Sac => "sac",
            Algo::Bc => "bc",
        }
    }

    fn needs_behavior(&self) -> bool {
        matches!(self, Algo::FisherBrc | Algo::Brac | Algo::Bc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BehaviorFamily {
    /// Laplace on the bandit, mixture everywhere else.
    Auto,
    Mixture,
    Laplace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: Algo,
    pub dataset_path: PathBuf,
    /// Load the behavior model from here instead of fitting it.
    pub bc_checkpoint: Option<PathBuf>,
    pub behavior_family: BehaviorFamily,
    pub seed: u64,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub batch_size: usize,
    pub bc: BCConfig,
    pub critic: CriticConfig,
    pub actor: ActorConfig,
    pub cql: CQLConfig,
    /// KL coefficient for the policy-regularized baseline.
    pub brac_alpha_kl: f64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(algo: Algo, dataset_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            algo,
            dataset_path: dataset_path.into(),
            bc_checkpoint: None,
            behavior_family: BehaviorFamily::Auto,
            seed: 0,
            total_steps: 50_000,
            eval_interval: 1_000,
            eval_episodes: 10,
            batch_size: 256,
            bc: BCConfig::default(),
            critic: CriticConfig::default(),
            actor: ActorConfig::default(),
            cql: CQLConfig::default(),
            brac_alpha_kl: 1.0,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.eval_interval == 0 || self.batch_size == 0 {
            return Err(OfrlError::InvalidConfig("zero-sized run field".into()));
        }
        self.bc.validate()?;
        self.critic.validate()?;
        self.cql.validate()?;
        Ok(())
    }
}

/// One metrics row per evaluation point. Quantities an algorithm does not
/// produce stay empty so every run shares one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub mean_return: f64,
    pub normalized_return: f64,
    pub td_loss: Option<f64>,
    pub penalty: Option<f64>,
    pub actor_loss: Option<f64>,
    pub temperature: Option<f64>,
    pub offset_grad_norm_sq: Option<f64>,
    pub behavior_loglik_policy_actions: Option<f64>,
}

pub const METRICS_HEADER: &str = "step,mean_return,normalized_return,td_loss,penalty,actor_loss,temperature,offset_grad_norm_sq,behavior_loglik_policy_actions";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.mean_return,
            self.normalized_return,
            fmt_opt(self.td_loss),
            fmt_opt(self.penalty),
            fmt_opt(self.actor_loss),
            fmt_opt(self.temperature),
            fmt_opt(self.offset_grad_norm_sq),
            fmt_opt(self.behavior_loglik_policy_actions),
        )
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub algo: Algo,
    pub seed: u64,
    pub final_mean_return: f64,
    pub final_normalized_return: f64,
    /// Step at which training collapsed with non-finite values, if it did.
    pub collapsed_at: Option<u64>,
    pub steps_completed: u64,
    pub eval_seed_rule: String,
    pub behavior_family: String,
    pub out_dir: PathBuf,
}

/// Everything a finished run leaves behind, in memory and on disk.
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub metrics: Vec<MetricsRow>,
}

fn derive_seed(base: u64, tag: u64) -> u64 {
    // splitmix64 over (base, tag); decouples the RNG streams
    let mut z = base ^ tag.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn eval_seed(run_seed: u64, interval_index: u64) -> u64 {
    derive_seed(run_seed, 0xE7A1_0000 + interval_index)
}

/// Fit or load the behavior density for a dataset per the configured family.
pub fn obtain_behavior(config: &RunConfig, dataset: &Dataset) -> Result<BehaviorDensity> {
    if let Some(path) = &config.bc_checkpoint {
        return BehaviorDensity::load(path);
    }
    let env = EnvKind::from_spec_id(&dataset.meta.spec_id);
    let family = match config.behavior_family {
        BehaviorFamily::Auto => {
            if env == Some(EnvKind::Bandit) {
                BehaviorFamily::Laplace
            } else {
                BehaviorFamily::Mixture
            }
        }
        f => f,
    };
    Ok(match family {
        BehaviorFamily::Laplace => BehaviorDensity::Laplace(fit_laplace(dataset)?),
        _ => BehaviorDensity::Mixture(train_bc(dataset, &config.bc, config.seed)?),
    })
}

struct EvalProbe {
    states: Array2<f64>,
}

impl EvalProbe {
    fn new(dataset: &Dataset, cap: usize) -> Self {
        let n = dataset.len().min(cap);
        let sd = dataset.meta.state_dim;
        let mut states = Array2::zeros((sd, n));
        for j in 0..n {
            for i in 0..sd {
                states[[i, j]] = dataset.transitions[j].state[i];
            }
        }
        EvalProbe { states }
    }

    /// Mean per-twin squared action-gradient of the raw critic outputs at
    /// deterministic policy actions.
    fn offset_grad_norm_sq(&self, critic: &CriticPair, policy: &PolicyModel) -> f64 {
        let tape = crate::autodiff::Tape::new();
        let s = tape.constant(self.states.clone());
        let b = self.states.dim().1;
        let mut actions = Array2::zeros((policy.action_dim, b));
        let bound = policy.params.bind_const(&tape);
        if let Ok(heads) = policy.heads(&tape, &bound, s) {
            let mean = tape.value_owned(heads.mean);
            for j in 0..b {
                for d in 0..policy.action_dim {
                    actions[[d, j]] = mean[[d, j]].tanh();
                }
            }
        }
        let mut mean_cfg = critic.clone();
        mean_cfg.config.penalty_aggregation = TwinAggregation::Mean;
        let ctx = mean_cfg.on_tape_frozen(&tape, None);
        match ctx.gradient_penalty(&tape, s, &[actions]) {
            Ok(n) => tape.scalar(n),
            Err(_) => f64::NAN,
        }
    }

    /// Mean behavior log-density of deterministic policy actions.
    fn behavior_loglik(&self, behavior: &BehaviorDensity, policy: &PolicyModel) -> f64 {
        let tape = crate::autodiff::Tape::new();
        let b = self.states.dim().1;
        let bound = policy.params.bind_const(&tape);
        let sn = tape.constant(self.states.clone());
        let Ok(heads) = policy.heads(&tape, &bound, sn) else {
            return f64::NAN;
        };
        let mean = tape.value_owned(heads.mean);
        let actions = clamp_actions(mean.mapv(f64::tanh));
        let a = tape.constant(actions);
        let on_tape = behavior.on_tape(&tape);
        match on_tape.log_prob(&tape, sn, a) {
            Ok(n) => {
                let v = tape.value_owned(n);
                v.iter().sum::<f64>() / b as f64
            }
            Err(_) => f64::NAN,
        }
    }
}

struct LoopAverages {
    td: f64,
    penalty: f64,
    actor: f64,
    count: f64,
}

impl LoopAverages {
    fn new() -> Self {
        LoopAverages {
            td: 0.0,
            penalty: 0.0,
            actor: 0.0,
            count: 0.0,
        }
    }

    fn mean(&self) -> (f64, f64, f64) {
        let c = self.count.max(1.0);
        (self.td / c, self.penalty / c, self.actor / c)
    }
}

/// Run one full training configuration, writing artifacts into
/// `config.out_dir`: the verbatim config echo, a metrics CSV, checkpoints,
/// and a summary. A run that produces non-finite values is marked collapsed
/// at the failing step and keeps its partial metrics.
pub fn run_training(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let config_echo = serde_json::to_string_pretty(config)
        .map_err(|e| OfrlError::InvalidConfig(format!("config echo: {e}")))?;
    std::fs::write(config.out_dir.join("config.json"), &config_echo)?;

    let dataset = read_dataset(&config.dataset_path)?;
    let env = EnvKind::from_spec_id(&dataset.meta.spec_id).ok_or_else(|| {
        OfrlError::Dataset(format!("unknown environment '{}'", dataset.meta.spec_id))
    })?;

    let behavior = if config.algo.needs_behavior() {
        let b = obtain_behavior(config, &dataset)?;
        b.save(&config.out_dir.join("behavior.ofcp"))?;
        Some(b)
    } else {
        None
    };

    let result = train_loop(config, &dataset, env, behavior.as_ref());
    let (metrics, collapsed_at, steps_completed, policy, critic) = match result {
        Ok(done) => (done.metrics, None, config.total_steps as u64, done.policy, done.critic),
        Err(TrainAbort::Collapse {
            step,
            metrics,
            policy,
            critic,
        }) => (metrics, Some(step), step, policy, critic),
        Err(TrainAbort::Fatal(e)) => return Err(e),
    };

    let (final_return, final_norm) = metrics
        .last()
        .map(|m| (m.mean_return, m.normalized_return))
        .unwrap_or((f64::NAN, f64::NAN));

    std::fs::write(config.out_dir.join("metrics.csv"), metrics_to_csv(&metrics))?;
    if let Some(p) = &policy {
        write_checkpoint(&config.out_dir.join("policy.ofcp"), &[p.to_section()])?;
    }
    if let Some(c) = &critic {
        write_checkpoint(&config.out_dir.join("critic.ofcp"), &[c.to_section()])?;
    }

    let summary = RunSummary {
        algo: config.algo,
        seed: config.seed,
        final_mean_return: final_return,
        final_normalized_return: final_norm,
        collapsed_at,
        steps_completed,
        eval_seed_rule: "splitmix64(run_seed, 0xE7A10000 + interval_index)".to_string(),
        behavior_family: match &behavior {
            Some(BehaviorDensity::Mixture(_)) => "mixture".to_string(),
            Some(BehaviorDensity::Laplace(_)) => "laplace".to_string(),
            None => "none".to_string(),
        },
        out_dir: config.out_dir.clone(),
    };
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| OfrlError::InvalidConfig(format!("summary: {e}")))?;
    std::fs::write(config.out_dir.join("summary.json"), summary_json)?;
    Ok(RunArtifacts { summary, metrics })
}

struct TrainDone {
    metrics: Vec<MetricsRow>,
    policy: Option<PolicyModel>,
    critic: Option<CriticPair>,
}

enum TrainAbort {
    Collapse {
        step: u64,
        metrics: Vec<MetricsRow>,
        policy: Option<PolicyModel>,
        critic: Option<CriticPair>,
    },
    Fatal(OfrlError),
}

impl From<OfrlError> for TrainAbort {
    fn from(e: OfrlError) -> Self {
        TrainAbort::Fatal(e)
    }
}

fn train_loop(
    config: &RunConfig,
    dataset: &Dataset,
    env: EnvKind,
    behavior: Option<&BehaviorDensity>,
) -> std::result::Result<TrainDone, TrainAbort> {
    let refs = dataset.meta.normalization;
    let probe = EvalProbe::new(dataset, 256);

    // pure behavioral cloning: no critic or actor, evaluate the clone
    if config.algo == Algo::Bc {
        let b = behavior.expect("bc requires a behavior density");
        let mut metrics = Vec::new();
        let intervals = config.total_steps / config.eval_interval;
        for k in 0..intervals.max(1) {
            let step = ((k + 1) * config.eval_interval).min(config.total_steps) as u64;
            let eval = evaluate_policy(
                env,
                &BehaviorGreedy(b),
                config.eval_episodes,
                eval_seed(config.seed, k as u64),
                &refs,
            );
            metrics.push(MetricsRow {
                step,
                mean_return: eval.mean_return,
                normalized_return: eval.normalized_return,
                td_loss: None,
                penalty: None,
                actor_loss: None,
                temperature: None,
                offset_grad_norm_sq: None,
                behavior_loglik_policy_actions: None,
            });
        }
        return Ok(TrainDone {
            metrics,
            policy: None,
            critic: None,
        });
    }

    let state_dim = dataset.meta.state_dim;
    let action_dim = dataset.meta.action_dim;

    let mut critic_cfg = config.critic.clone();
    match config.algo {
        Algo::FisherBrc => {}
        Algo::Sac => {
            // plain critic; a positive lambda turns on the penalty-without-
            // offset-representation ablation
            critic_cfg.use_offset_representation = false;
        }
        _ => {
            critic_cfg.use_offset_representation = false;
            critic_cfg.lambda = 0.0;
        }
    }
    let mut critic = CriticPair::init(
        state_dim,
        action_dim,
        &critic_cfg,
        derive_seed(config.seed, 0xC817),
    );
    let mut policy = PolicyModel::init(
        state_dim,
        action_dim,
        &config.actor,
        derive_seed(config.seed, 0xAC70),
    );
    let mut copt = AdamState::new(&critic.online, critic_cfg.lr);
    let mut aopt = AdamState::new(&policy.params, config.actor.lr);
    let mut topt = AdamState::new(
        &policy.log_temperature,
        config.actor.temperature_lr.unwrap_or(config.actor.lr),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x7211));

    let offset_behavior = if critic_cfg.use_offset_representation {
        behavior
    } else {
        None
    };
    let use_penalty = critic_cfg.lambda > 0.0;

    let mut metrics = Vec::new();
    let mut avg = LoopAverages::new();
    let n = dataset.len();

    macro_rules! collapse_on {
        ($expr:expr, $step:expr) => {
            match $expr {
                Ok(v) => v,
                Err(OfrlError::Diverged { .. }) => {
                    return Err(TrainAbort::Collapse {
                        step: $step,
                        metrics,
                        policy: Some(policy.clone()),
                        critic: Some(critic.clone()),
                    });
                }
                Err(other) => return Err(TrainAbort::Fatal(other)),
            }
        };
    }

    for step in 0..config.total_steps as u64 {
        let idx: Vec<usize> = (0..config.batch_size)
            .map(|_| rng.random_range(0..n))
            .collect();
        let batch: Vec<&Transition> = idx.iter().map(|&i| &dataset.transitions[i]).collect();
        let packed = PackedBatch::from_transitions(&batch);

        let (next_actions, next_log_pi) = policy.sample_values(&packed.next_states, &mut rng);
        let nlp = critic_cfg.soft_targets.then_some(next_log_pi);

        // critic step
        match config.algo {
            Algo::Cql => {
                let diag = collapse_on!(
                    cql_critic_step(
                        &mut critic,
                        &packed,
                        next_actions,
                        nlp,
                        &policy,
                        &config.cql,
                        &mut copt,
                        &mut rng,
                        step,
                    ),
                    step
                );
                avg.td += diag.0;
                avg.penalty += diag.1;
            }
            _ => {
                let penalty_actions: Vec<Array2<f64>> = if use_penalty {
                    (0..critic_cfg.penalty_samples)
                        .map(|_| match critic_cfg.penalty_action_source {
                            PenaltySource::Policy => {
                                policy.sample_values(&packed.states, &mut rng).0
                            }
                            PenaltySource::Data => packed.actions.clone(),
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                let diag = collapse_on!(
                    critic_update(
                        &mut critic,
                        offset_behavior,
                        &packed,
                        next_actions,
                        nlp,
                        &penalty_actions,
                        policy.temperature(),
                        &mut copt,
                        step,
                    ),
                    step
                );
                avg.td += diag.td_term;
                avg.penalty += diag.penalty_term;
            }
        }

        // actor step
        let objective = match config.algo {
            Algo::FisherBrc => ActorObjective::EntropyRegularized {
                critic: &critic,
                behavior,
            },
            Algo::Brac => ActorObjective::KlPenalized {
                critic: &critic,
                behavior: behavior.expect("brac requires behavior"),
                alpha_kl: config.brac_alpha_kl,
            },
            _ => ActorObjective::EntropyRegularized {
                critic: &critic,
                behavior: None,
            },
        };
        let (aloss, _ent, _temp) = collapse_on!(
            actor_update(
                &mut policy,
                objective,
                &packed.states,
                &mut aopt,
                &mut topt,
                &mut rng,
                step,
            ),
            step
        );
        avg.actor += aloss;
        avg.count += 1.0;

        if (step + 1) % config.eval_interval as u64 == 0 {
            let k = (step + 1) / config.eval_interval as u64 - 1;
            let eval = evaluate_policy(
                env,
                &policy,
                config.eval_episodes,
                eval_seed(config.seed, k),
                &refs,
            );
            let (td, pen, actor) = avg.mean();
            let grad_sq = critic_cfg
                .use_offset_representation
                .then(|| probe.offset_grad_norm_sq(&critic, &policy));
            let bll = behavior.map(|b| probe.behavior_loglik(b, &policy));
            let penalty_used = use_penalty || config.algo == Algo::Cql;
            metrics.push(MetricsRow {
                step: step + 1,
                mean_return: eval.mean_return,
                normalized_return: eval.normalized_return,
                td_loss: Some(td),
                penalty: penalty_used.then_some(pen),
                actor_loss: Some(actor),
                temperature: Some(policy.temperature()),
                offset_grad_norm_sq: grad_sq,
                behavior_loglik_policy_actions: bll,
            });
            avg = LoopAverages::new();
        }
    }

    Ok(TrainDone {
        metrics,
        policy: Some(policy),
        critic: Some(critic),
    })
}

/// TD step plus the conservative penalty on the same tape.
#[allow(clippy::too_many_arguments)]
fn cql_critic_step(
    critic: &mut CriticPair,
    packed: &PackedBatch,
    next_actions: Array2<f64>,
    next_log_pi: Option<Array2<f64>>,
    policy: &PolicyModel,
    cfg: &CQLConfig,
    optimizer: &mut AdamState,
    rng: &mut ChaCha8Rng,
    step: u64,
) -> Result<(f64, f64)> {
    use crate::autodiff::Tape;
    use crate::baselines::CqlProposal;
    use crate::critic::BatchOnTape;

    let b = packed.states.dim().1;
    let dim = packed.actions.dim().0;
    let mut proposals: Vec<ProposalDraw> = Vec::with_capacity(cfg.n_samples);
    let (n_uniform, n_policy) = match cfg.proposal {
        CqlProposal::Uniform => (cfg.n_samples, 0),
        CqlProposal::Policy => (0, cfg.n_samples),
        CqlProposal::Mixed => (cfg.n_samples / 2, cfg.n_samples - cfg.n_samples / 2),
    };
    for _ in 0..n_uniform {
        proposals.push(uniform_proposal(rng, dim, b));
    }
    for _ in 0..n_policy {
        let (actions, log_density) = policy.sample_values(&packed.states, rng);
        proposals.push(ProposalDraw {
            actions,
            log_density,
        });
    }

    let tape = Tape::new();
    let ctx = critic.on_tape(&tape, None);
    let batch = BatchOnTape::bind(&tape, packed);
    let na = tape.constant(clamp_actions(next_actions));
    let nlp = next_log_pi.map(|m| tape.constant(m));
    let td = ctx.td_loss(&tape, &batch, na, nlp, policy.temperature())?;
    let pen = cql_penalty(&tape, &ctx, batch.states, batch.actions, &proposals)?;
    let total = tape.add(td, tape.scale(pen, cfg.penalty_weight));
    tape.forward(total).map_err(|e| OfrlError::Diverged {
        step,
        what: format!("cql critic loss: {e}"),
    })?;
    let td_v = tape.scalar(td);
    let pen_v = tape.scalar(pen);
    let grad_nodes = tape.grad(total, &ctx.online.nodes)?;
    let grads: Vec<Array2<f64>> = grad_nodes.iter().map(|&g| tape.value_owned(g)).collect();
    drop(ctx);
    optimizer.step(&mut critic.online, &grads).map_err(|e| match e {
        OfrlError::Diverged { what, .. } => OfrlError::Diverged { step, what },
        other => other,
    })?;
    critic.polyak_update()?;
    Ok((td_v, pen_v))
}

/// Greedy rollout adapter over a behavior density.
pub struct BehaviorGreedy<'a>(pub &'a BehaviorDensity);

impl RolloutPolicy for BehaviorGreedy<'_> {
    fn act(&self, state: &[f64], deterministic: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if deterministic {
            self.0.greedy_action(state)
        } else {
            self.0.sample_action(state, rng)
        }
    }
}

/// Load a policy checkpoint and evaluate it.
pub fn eval_from_checkpoint(
    policy_path: &Path,
    env: EnvKind,
    episodes: usize,
    seed: u64,
    refs: &crate::env::NormalizationRefs,
) -> Result<crate::env::EvalResult> {
    let sections = read_checkpoint(policy_path)?;
    let eval = if let Ok(sec) = crate::checkpoint::find_section(&sections, crate::checkpoint::TAG_POLICY)
    {
        let policy = PolicyModel::from_section(sec)?;
        evaluate_policy(env, &policy, episodes, seed, refs)
    } else {
        let behavior = BehaviorDensity::load(policy_path)?;
        evaluate_policy(env, &BehaviorGreedy(&behavior), episodes, seed, refs)
    };
    Ok(eval)
}
