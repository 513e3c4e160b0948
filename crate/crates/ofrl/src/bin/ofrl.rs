//! Command-line entry point for the offline RL laboratory.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use ofrl::bc::BehaviorDensity;
use ofrl::checkpoint::{find_section, read_checkpoint, TAG_CRITIC_OFFSET, TAG_CRITIC_PLAIN};
use ofrl::critic::{CriticPair, PenaltySource};
use ofrl::env::{
    bandit_refs, gen_bandit_dataset, gen_pointmass_dataset, read_dataset, write_dataset, EnvKind,
    Tier,
};
use ofrl::harness::{
    eval_from_checkpoint, export_landscape, run_ablation, run_training, AblationDatasets,
    AblationSuite, Algo, BehaviorFamily, LandscapeInputs, RunConfig,
};
use ofrl::oracle::Grid1D;

#[derive(Parser)]
#[command(
    name = "ofrl",
    about = "Desk-scale offline RL laboratory: offset-critic training with gradient-penalty regularization, plus baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an offline dataset.
    GenData {
        #[arg(long, value_enum)]
        env: EnvKind,
        #[arg(long, value_enum, default_value = "medium")]
        tier: Tier,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Transition count (point mass only; the bandit is fixed at 1000).
        #[arg(long, default_value_t = 20_000)]
        size: usize,
        /// Also write a CSV export next to the binary file.
        #[arg(long, default_value_t = false)]
        csv: bool,
    },
    /// Fit a behavior density to a dataset and save the checkpoint.
    TrainBc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value = "auto")]
        family: BehaviorFamily,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a policy on an offline dataset.
    Train {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        data: PathBuf,
        /// Behavior checkpoint; fitted on the fly when omitted.
        #[arg(long)]
        bc: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Plain critic: apply any penalty directly to Q.
        #[arg(long, default_value_t = false)]
        no_offset: bool,
        #[arg(long, value_enum, default_value = "policy")]
        penalty_source: PenaltySource,
        #[arg(long, default_value_t = 0.0)]
        reward_bonus: f64,
        /// KL coefficient for the policy-regularized baseline.
        #[arg(long, default_value_t = 1.0)]
        alpha_kl: f64,
        /// Conservative penalty weight for the cql baseline.
        #[arg(long, default_value_t = 5.0)]
        cql_weight: f64,
    },
    /// Export objective landscapes over a 1-D action grid.
    Landscape {
        /// Behavior checkpoint.
        #[arg(long)]
        behavior: PathBuf,
        /// Offset-critic checkpoints (one landscape column each).
        #[arg(long = "model", num_args = 0..)]
        models: Vec<PathBuf>,
        /// Plain reward-critic checkpoint for coefficient-scaled columns.
        #[arg(long)]
        reward_critic: Option<PathBuf>,
        /// Coefficients for the reward-critic columns.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.03, 0.1, 0.3, 1.0, 3.0, 10.0])]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 4001)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an ablation suite.
    Ablate {
        #[arg(long, value_enum)]
        suite: AblationSuite,
        #[arg(long)]
        medium: PathBuf,
        #[arg(long)]
        expert: Option<PathBuf>,
        #[arg(long)]
        bc_medium: Option<PathBuf>,
        #[arg(long)]
        bc_expert: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 128)]
        batch_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained policy checkpoint.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_enum)]
        env: EnvKind,
        #[arg(long, default_value_t = 10)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset whose stored normalization references to use.
        #[arg(long)]
        refs_from: Option<PathBuf>,
    },
}

fn load_critic(path: &PathBuf) -> anyhow::Result<CriticPair> {
    let sections = read_checkpoint(path).with_context(|| format!("reading {}", path.display()))?;
    let section = find_section(&sections, TAG_CRITIC_OFFSET)
        .or_else(|_| find_section(&sections, TAG_CRITIC_PLAIN))
        .context("no critic section in checkpoint")?;
    Ok(CriticPair::from_section(section)?)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData {
            env,
            tier,
            seed,
            out,
            size,
            csv,
        } => {
            let dataset = match env {
                EnvKind::Bandit => gen_bandit_dataset(seed),
                EnvKind::Pointmass => gen_pointmass_dataset(tier, size, seed)?,
            };
            write_dataset(&out, &dataset)?;
            if csv {
                let mut csv_path = out.clone().into_os_string();
                csv_path.push(".csv");
                std::fs::write(csv_path, dataset.to_csv())?;
            }
            println!(
                "wrote {} transitions ({}, {:?}) to {}",
                dataset.len(),
                dataset.meta.spec_id,
                tier,
                out.display()
            );
        }
        Command::TrainBc {
            data,
            out,
            steps,
            family,
            seed,
        } => {
            let dataset = read_dataset(&data)?;
            let env = EnvKind::from_spec_id(&dataset.meta.spec_id);
            let family = match family {
                BehaviorFamily::Auto => {
                    if env == Some(EnvKind::Bandit) {
                        BehaviorFamily::Laplace
                    } else {
                        BehaviorFamily::Mixture
                    }
                }
                f => f,
            };
            let behavior = match family {
                BehaviorFamily::Laplace => {
                    BehaviorDensity::Laplace(ofrl::bc::fit_laplace(&dataset)?)
                }
                _ => {
                    let mut cfg = ofrl::bc::BCConfig::default();
                    if let Some(s) = steps {
                        cfg.steps = s;
                    }
                    BehaviorDensity::Mixture(ofrl::bc::train_bc(&dataset, &cfg, seed)?)
                }
            };
            behavior.save(&out)?;
            println!("behavior model written to {}", out.display());
        }
        Command::Train {
            algo,
            data,
            bc,
            lambda,
            seed,
            out,
            steps,
            batch_size,
            no_offset,
            penalty_source,
            reward_bonus,
            alpha_kl,
            cql_weight,
        } => {
            let mut config = RunConfig::new(algo, data, out);
            config.bc_checkpoint = bc;
            config.seed = seed;
            config.critic.lambda = lambda;
            config.critic.penalty_action_source = penalty_source;
            config.critic.reward_bonus = reward_bonus;
            config.brac_alpha_kl = alpha_kl;
            config.cql.penalty_weight = cql_weight;
            if no_offset {
                config.critic.use_offset_representation = false;
            }
            let dataset = read_dataset(&config.dataset_path)?;
            if EnvKind::from_spec_id(&dataset.meta.spec_id) == Some(EnvKind::Bandit) {
                config.total_steps = 5_000;
            }
            if let Some(s) = steps {
                config.total_steps = s;
            }
            if let Some(b) = batch_size {
                config.batch_size = b;
            }
            let artifacts = run_training(&config)?;
            match artifacts.summary.collapsed_at {
                Some(step) => println!(
                    "run collapsed at step {step}; partial metrics in {}",
                    artifacts.summary.out_dir.display()
                ),
                None => println!(
                    "final return {:.3} (normalized {:.1}) in {}",
                    artifacts.summary.final_mean_return,
                    artifacts.summary.final_normalized_return,
                    artifacts.summary.out_dir.display()
                ),
            }
        }
        Command::Landscape {
            behavior,
            models,
            reward_critic,
            alphas,
            grid,
            out,
        } => {
            let behavior = BehaviorDensity::load(&behavior)?;
            let critics: Vec<(String, CriticPair)> = models
                .iter()
                .map(|p| -> anyhow::Result<(String, CriticPair)> {
                    let c = load_critic(p)?;
                    let label = format!("offset_critic_lambda_{}", c.config.lambda);
                    Ok((label, c))
                })
                .collect::<anyhow::Result<_>>()?;
            let reward = reward_critic.as_ref().map(load_critic).transpose()?;
            if critics.is_empty() && reward.is_none() {
                bail!("landscape needs at least one --model or --reward-critic");
            }
            let count = if grid % 2 == 1 { grid } else { grid + 1 };
            let g = Grid1D::new(-1.0 + 1e-4, 1.0 - 1e-4, count);
            let inputs = LandscapeInputs {
                behavior: &behavior,
                offset_critics: critics.iter().map(|(l, c)| (l.clone(), c)).collect(),
                reward_critic: reward.as_ref(),
                alphas,
            };
            let csv = export_landscape(&inputs, &g)?;
            std::fs::write(&out, csv)?;
            println!("landscape written to {}", out.display());
        }
        Command::Ablate {
            suite,
            medium,
            expert,
            bc_medium,
            bc_expert,
            seeds,
            steps,
            batch_size,
            out,
        } => {
            let mut base = RunConfig::new(Algo::FisherBrc, &medium, &out);
            base.total_steps = steps;
            base.batch_size = batch_size;
            let datasets = AblationDatasets {
                medium: &medium,
                expert: expert.as_deref(),
                bc_medium: bc_medium.as_deref(),
                bc_expert: bc_expert.as_deref(),
            };
            let summary = run_ablation(suite, &datasets, &base, seeds, &out)?;
            print!("{}", summary.to_csv());
        }
        Command::Eval {
            policy,
            env,
            episodes,
            seed,
            refs_from,
        } => {
            let refs = match refs_from {
                Some(p) => read_dataset(&p)?.meta.normalization,
                None => match env {
                    EnvKind::Bandit => bandit_refs(),
                    EnvKind::Pointmass => bail!(
                        "point-mass evaluation needs --refs-from <dataset> for normalization"
                    ),
                },
            };
            let result = eval_from_checkpoint(&policy, env, episodes as usize, seed, &refs)?;
            println!(
                "mean return {:.3}, normalized {:.1} over {} episodes",
                result.mean_return, result.normalized_return, result.episodes
            );
        }
    }
    Ok(())
}
