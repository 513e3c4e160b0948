//! Ablation drivers: the gradient-penalty coefficient sweep and the
//! plain-critic-plus-penalty comparison, each over several seeds with a
//! collapse-tolerant summary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_training, Algo, RunConfig};
use crate::error::{OfrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AblationSuite {
    /// Penalty coefficient sweep over {0.0, 0.1, 1.0} on medium and expert
    /// tiers.
    LambdaSweep,
    /// Offset critic at the default coefficient versus a plain critic with
    /// the same penalty, medium tier.
    NoOffsetGp,
}

pub const LAMBDA_SWEEP_VALUES: [f64; 3] = [0.0, 0.1, 1.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub tier: String,
    pub seeds: usize,
    pub mean_final_normalized: f64,
    pub std_final_normalized: f64,
    pub collapses: usize,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSummary {
    pub suite: AblationSuite,
    pub rows: Vec<AblationRow>,
}

impl AblationSummary {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("name,tier,seeds,mean_final_normalized,std_final_normalized,collapses\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.name,
                r.tier,
                r.seeds,
                r.mean_final_normalized,
                r.std_final_normalized,
                r.collapses
            ));
        }
        out
    }

    pub fn row(&self, name: &str, tier: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name && r.tier == tier)
    }
}

/// One ablation cell: a named configuration to run over all seeds.
struct Cell {
    name: String,
    tier: String,
    make: Box<dyn Fn(u64, PathBuf) -> RunConfig + Sync + Send>,
}

/// Datasets and shared knobs for an ablation run.
pub struct AblationDatasets<'a> {
    pub medium: &'a Path,
    pub expert: Option<&'a Path>,
    /// Pre-fitted behavior checkpoints, keyed like the dataset paths.
    pub bc_medium: Option<&'a Path>,
    pub bc_expert: Option<&'a Path>,
}

/// Execute a suite over `seeds` seeds per configuration, in parallel, and
/// summarize. Individual collapses are recorded and the suite continues; a
/// collapsed run scores as deeply negative for ordering purposes.
pub fn run_ablation(
    suite: AblationSuite,
    datasets: &AblationDatasets<'_>,
    base: &RunConfig,
    seeds: usize,
    out_dir: &Path,
) -> Result<AblationSummary> {
    if seeds == 0 {
        return Err(OfrlError::InvalidConfig("ablation needs >= 1 seed".into()));
    }
    let mut cells: Vec<Cell> = Vec::new();
    let medium = datasets.medium.to_path_buf();
    let bc_medium = datasets.bc_medium.map(Path::to_path_buf);

    match suite {
        AblationSuite::LambdaSweep => {
            let mut tiers: Vec<(String, PathBuf, Option<PathBuf>)> = vec![(
                "medium".to_string(),
                medium.clone(),
                bc_medium.clone(),
            )];
            if let Some(expert) = datasets.expert {
                tiers.push((
                    "expert".to_string(),
                    expert.to_path_buf(),
                    datasets.bc_expert.map(Path::to_path_buf),
                ));
            }
            for (tier, data, bc) in tiers {
                for lambda in LAMBDA_SWEEP_VALUES {
                    let base = base.clone();
                    let data = data.clone();
                    let bc = bc.clone();
                    let tier_name = tier.clone();
                    cells.push(Cell {
                        name: format!("fisher-brc-lambda-{lambda}"),
                        tier: tier.clone(),
                        make: Box::new(move |seed, out| {
                            let mut c = base.clone();
                            c.algo = Algo::FisherBrc;
                            c.dataset_path = data.clone();
                            c.bc_checkpoint = bc.clone();
                            c.critic.lambda = lambda;
                            c.critic.use_offset_representation = true;
                            c.seed = seed;
                            c.out_dir = out;
                            let _ = &tier_name;
                            c
                        }),
                    });
                }
            }
        }
        AblationSuite::NoOffsetGp => {
            for (name, offset) in [("fisher-brc", true), ("plain-critic-gp", false)] {
                let base = base.clone();
                let data = medium.clone();
                let bc = bc_medium.clone();
                cells.push(Cell {
                    name: name.to_string(),
                    tier: "medium".to_string(),
                    make: Box::new(move |seed, out| {
                        let mut c = base.clone();
                        c.algo = if offset { Algo::FisherBrc } else { Algo::Sac };
                        c.dataset_path = data.clone();
                        c.bc_checkpoint = if offset { bc.clone() } else { None };
                        c.critic.lambda = 0.1;
                        c.critic.use_offset_representation = offset;
                        c.seed = seed;
                        c.out_dir = out;
                        c
                    }),
                });
            }
        }
    }

    let jobs: Vec<(usize, u64, RunConfig)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, cell)| {
            (0..seeds as u64).map(move |seed| {
                let run_dir = out_dir
                    .join(format!("{}-{}", cell.name, cell.tier))
                    .join(format!("seed{seed}"));
                (ci, seed, (cell.make)(seed, run_dir))
            })
        })
        .collect();

    let results: Vec<(usize, u64, Result<(f64, bool)>)> = jobs
        .into_par_iter()
        .map(|(ci, seed, config)| {
            let outcome = run_training(&config).map(|art| {
                (
                    art.summary.final_normalized_return,
                    art.summary.collapsed_at.is_some(),
                )
            });
            (ci, seed, outcome)
        })
        .collect();

    let mut rows = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let mut scores = Vec::new();
        let mut collapses = 0;
        for (rci, _seed, outcome) in &results {
            if *rci != ci {
                continue;
            }
            match outcome {
                Ok((score, collapsed)) => {
                    if *collapsed || !score.is_finite() {
                        collapses += 1;
                        scores.push(f64::NEG_INFINITY);
                    } else {
                        scores.push(*score);
                    }
                }
                Err(_) => {
                    collapses += 1;
                    scores.push(f64::NEG_INFINITY);
                }
            }
        }
        let finite: Vec<f64> = scores.iter().copied().filter(|v| v.is_finite()).collect();
        let mean = if finite.is_empty() {
            f64::NEG_INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let std = if finite.len() > 1 {
            (finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (finite.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        rows.push(AblationRow {
            name: cell.name.clone(),
            tier: cell.tier.clone(),
            seeds,
            mean_final_normalized: mean,
            std_final_normalized: std,
            collapses,
            per_seed: scores,
        });
    }

    let summary = AblationSummary { suite, rows };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("ablation_summary.csv"), summary.to_csv())?;
    std::fs::write(
        out_dir.join("ablation_summary.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| OfrlError::InvalidConfig(format!("summary: {e}")))?,
    )?;
    Ok(summary)
}
