//! Conservative critic penalty and its grid identities.
//!
//! The penalty pushes the log-integral of `exp(Q)` over the action space
//! down toward the dataset action's value. The integral is estimated by
//! importance sampling; on 1-D grids the same quantity has an exact
//! enumeration, which the identity checks exploit.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Node, Tape};
use crate::critic::{CriticOnTape, QSelect};
use crate::dist::clamp_actions;
use crate::error::{OfrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CqlProposal {
    Uniform,
    Policy,
    /// Half the samples uniform, half from the policy, with halved weights.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CQLConfig {
    /// Penalty weight.
    pub penalty_weight: f64,
    /// Importance samples per state.
    pub n_samples: usize,
    pub proposal: CqlProposal,
}

impl Default for CQLConfig {
    fn default() -> Self {
        CQLConfig {
            penalty_weight: 5.0,
            n_samples: 16,
            proposal: CqlProposal::Mixed,
        }
    }
}

impl CQLConfig {
    pub fn validate(&self) -> Result<()> {
        if self.penalty_weight < 0.0 {
            return Err(OfrlError::InvalidConfig("cql weight must be >= 0".into()));
        }
        if self.n_samples == 0 {
            return Err(OfrlError::InvalidConfig("cql needs >= 1 sample".into()));
        }
        Ok(())
    }
}

/// One importance sample set: actions plus the log proposal density of each.
pub struct ProposalDraw {
    pub actions: Array2<f64>,
    pub log_density: Array2<f64>,
}

/// Draw uniform proposal actions on `(-1,1)^d` with their log density.
pub fn uniform_proposal(rng: &mut ChaCha8Rng, dim: usize, batch: usize) -> ProposalDraw {
    let actions = Array2::from_shape_fn((dim, batch), |_| rng.random_range(-1.0..1.0));
    let log_density = Array2::from_elem((1, batch), -(dim as f64) * std::f64::consts::LN_2);
    ProposalDraw {
        actions,
        log_density,
    }
}

/// Importance-sampled estimate of `mean_s [ log integral_a exp(Q(s,a)) da
/// - Q(s, a_data) ]` as a tape expression. Proposal log-densities must be
/// finite (a zero proposal density is an error). Gradients flow only into
/// the critic.
pub fn cql_penalty(
    tape: &Tape,
    critic: &CriticOnTape<'_>,
    states: Node,
    data_actions: Node,
    proposals: &[ProposalDraw],
) -> Result<Node> {
    if proposals.is_empty() {
        return Err(OfrlError::InvalidConfig("cql penalty needs proposals".into()));
    }
    for p in proposals {
        if p.log_density.iter().any(|v| !v.is_finite()) {
            return Err(OfrlError::ZeroProposalDensity);
        }
    }
    let n = proposals.len();
    let mut rows: Option<Node> = None;
    for p in proposals {
        let a = tape.constant(clamp_actions(p.actions.clone()));
        let q = critic.q_value(tape, states, a, QSelect::Online1)?;
        let q2 = critic.q_value(tape, states, a, QSelect::Online2)?;
        let q_mean = tape.scale(tape.add(q, q2), 0.5);
        let logq = tape.constant(p.log_density.clone());
        let term = tape.sub(q_mean, logq);
        rows = Some(match rows {
            Some(r) => tape.concat_rows(r, term),
            None => term,
        });
    }
    let stacked = rows.unwrap();
    let lse = tape.logsumexp_rows(stacked);
    let log_integral = tape.add_const(lse, -(n as f64).ln());

    let qd1 = critic.q_value(tape, states, data_actions, QSelect::Online1)?;
    let qd2 = critic.q_value(tape, states, data_actions, QSelect::Online2)?;
    let q_data = tape.scale(tape.add(qd1, qd2), 0.5);
    Ok(tape.mean_all(tape.sub(log_integral, q_data)))
}

/// Value residual of the grid identity
/// `KL(mu || softmax(Q)) = logsumexp(Q) - E_mu[Q] + E_mu[log mu]`,
/// computing both sides by independent routes.
pub fn cql_kl_identity_check(q_values: &[f64], mu: &[f64]) -> f64 {
    assert_eq!(q_values.len(), mu.len());
    let p = crate::oracle::boltzmann_on_grid(q_values);
    let kl: f64 = mu
        .iter()
        .zip(&p)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &pi)| m * (m.ln() - pi.ln()))
        .sum();

    let m = q_values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + q_values.iter().map(|&q| (q - m).exp()).sum::<f64>().ln();
    let e_q: f64 = mu.iter().zip(q_values).map(|(&w, &q)| w * q).sum();
    let e_log_mu: f64 = mu
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.ln())
        .sum();
    (kl - (lse - e_q + e_log_mu)).abs()
}

/// Maximum absolute difference between the Q-gradients of the two identity
/// routes on a tabular grid: the explicit-KL route and the
/// `logsumexp - E_mu[Q]` route (the `E_mu[log mu]` term is constant in Q).
pub fn cql_kl_gradient_residual(q_values: &[f64], mu: &[f64]) -> f64 {
    let n = q_values.len();
    let tape = Tape::new();
    let q = tape.parameter(Array2::from_shape_vec((n, 1), q_values.to_vec()).unwrap());
    let mu_c = tape.constant(Array2::from_shape_vec((n, 1), mu.to_vec()).unwrap());

    // route A: KL(mu || softmax(Q)) built explicitly
    let lse_a = tape.logsumexp_rows(q);
    let log_p = tape.sub(q, lse_a);
    let log_mu = tape.constant(
        Array2::from_shape_vec((n, 1), mu.iter().map(|&w| w.max(1e-300).ln()).collect())
            .unwrap(),
    );
    let kl = tape.sum_all(tape.mul(mu_c, tape.sub(log_mu, log_p)));

    // route B: logsumexp(Q) - E_mu[Q]
    let lse_b = tape.logsumexp_rows(q);
    let e_q = tape.sum_all(tape.mul(mu_c, q));
    let form_b = tape.sub(tape.sum_all(lse_b), e_q);

    let ga = tape.grad(kl, &[q]).unwrap()[0];
    let gb = tape.grad(form_b, &[q]).unwrap()[0];
    let va = tape.value_owned(ga);
    let vb = tape.value_owned(gb);
    va.iter()
        .zip(vb.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Full training run for one of the comparison algorithms, emitting the
/// same artifacts and metrics schema as the main method's runs.
pub fn run_baseline(
    algo: crate::harness::Algo,
    dataset_path: &std::path::Path,
    config: &crate::harness::RunConfig,
    seed: u64,
) -> Result<crate::harness::RunArtifacts> {
    let mut c = config.clone();
    c.algo = algo;
    c.seed = seed;
    c.dataset_path = dataset_path.to_path_buf();
    crate::harness::run_training(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::{CriticConfig, CriticPair};
    use crate::oracle::Grid1D;
    use rand::SeedableRng;

    fn plain_critic(seed: u64, hidden: Vec<usize>) -> CriticPair {
        let cfg = CriticConfig {
            hidden,
            use_offset_representation: false,
            ..CriticConfig::default()
        };
        let mut pair = CriticPair::init(1, 1, &cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        for i in 0..pair.online.len() {
            pair.online
                .value_mut(i)
                .mapv_inplace(|v| v + rng.random_range(-0.5..0.5));
        }
        pair
    }

    #[test]
    fn constant_q_uniform_proposal_gives_log_volume() {
        // Q constant c: log integral over (-1,1) is c + ln 2, penalty = ln 2
        let cfg = CriticConfig {
            hidden: vec![],
            use_offset_representation: false,
            ..CriticConfig::default()
        };
        let mut pair = CriticPair::init(1, 1, &cfg, 0);
        pair.online.value_mut(1)[[0, 0]] = 0.7;
        pair.online.value_mut(3)[[0, 0]] = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = 4;
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let s = tape.constant(Array2::zeros((1, b)));
        let a_data = tape.constant(Array2::from_elem((1, b), 0.1));
        let proposals: Vec<ProposalDraw> =
            (0..256).map(|_| uniform_proposal(&mut rng, 1, b)).collect();
        let pen = cql_penalty(&tape, &ctx, s, a_data, &proposals).unwrap();
        let v = tape.scalar(pen);
        assert!((v - std::f64::consts::LN_2).abs() < 0.02, "penalty {v}");
    }

    #[test]
    fn is_estimate_converges_to_quadrature() {
        let pair = plain_critic(3, vec![16, 16]);
        let b = 1;
        // quadrature of exp(Q) over the action interval
        let grid = Grid1D::new(-1.0, 1.0, 4001);
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let s_grid = tape.constant(Array2::zeros((1, grid.count)));
        let a_grid = tape.constant(Array2::from_shape_vec(
            (1, grid.count),
            grid.points(),
        )
        .unwrap());
        let q1 = ctx.q_value(&tape, s_grid, a_grid, QSelect::Online1).unwrap();
        let q2 = ctx.q_value(&tape, s_grid, a_grid, QSelect::Online2).unwrap();
        let qv1 = tape.value_owned(q1);
        let qv2 = tape.value_owned(q2);
        let evals: Vec<f64> = (0..grid.count)
            .map(|i| (0.5 * (qv1[[0, i]] + qv2[[0, i]])).exp())
            .collect();
        let log_integral = grid.trapezoid(&evals).ln();

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let proposals: Vec<ProposalDraw> = (0..10_000)
            .map(|_| uniform_proposal(&mut rng, 1, b))
            .collect();
        let s = tape.constant(Array2::zeros((1, b)));
        let a_data = tape.constant(Array2::from_elem((1, b), 0.0));
        let pen = cql_penalty(&tape, &ctx, s, a_data, &proposals).unwrap();
        // add back Q(s, a_data) to recover the log-integral estimate
        let qd1 = ctx.q_value(&tape, s, a_data, QSelect::Online1).unwrap();
        let qd2 = ctx.q_value(&tape, s, a_data, QSelect::Online2).unwrap();
        let est = tape.scalar(pen)
            + 0.5 * (tape.scalar(qd1) + tape.scalar(qd2));
        let rel = (est - log_integral).abs() / log_integral.abs().max(1e-9);
        assert!(rel < 0.01, "is {est} vs quadrature {log_integral}");
    }

    #[test]
    fn peaked_q_at_data_action_gives_small_penalty() {
        // sharply peaked tabular Q: the log-integral collapses onto the max
        let grid: Vec<f64> = (0..101).map(|i| -1.0 + 0.02 * i as f64).collect();
        let sharp = 200.0;
        let a0 = 0.3;
        let q: Vec<f64> = grid.iter().map(|&a| -sharp * (a - a0) * (a - a0)).collect();
        let h = 0.02;
        let m = q.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
        let log_integral =
            m + (q.iter().map(|&v| (v - m).exp()).sum::<f64>() * h).ln();
        // Q at the data action (the peak) is 0
        let penalty = log_integral - 0.0;
        assert!(penalty < 0.0, "expected collapse below zero, got {penalty}");
        assert!(penalty > -5.0);
    }

    #[test]
    fn zero_proposal_density_is_error() {
        let pair = plain_critic(1, vec![8]);
        let tape = Tape::new();
        let ctx = pair.on_tape(&tape, None);
        let s = tape.constant(Array2::zeros((1, 2)));
        let a = tape.constant(Array2::zeros((1, 2)));
        let bad = ProposalDraw {
            actions: Array2::zeros((1, 2)),
            log_density: Array2::from_elem((1, 2), f64::NEG_INFINITY),
        };
        assert!(matches!(
            cql_penalty(&tape, &ctx, s, a, &[bad]),
            Err(OfrlError::ZeroProposalDensity)
        ));
    }

    #[test]
    fn kl_identity_uniform_case() {
        let res = cql_kl_identity_check(&[0.0, 0.0], &[0.5, 0.5]);
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn kl_identity_matched_distributions() {
        let q = [0.3, -0.2, 1.1];
        let p = crate::oracle::boltzmann_on_grid(&q);
        let res = cql_kl_identity_check(&q, &p);
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn kl_identity_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = 101;
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            let z: f64 = raw.iter().sum();
            let mu: Vec<f64> = raw.iter().map(|&x| x / z).collect();
            let res = cql_kl_identity_check(&q, &mu);
            assert!(res < 1e-10, "value residual {res}");
            let gres = cql_kl_gradient_residual(&q, &mu);
            assert!(gres < 1e-10, "gradient residual {gres}");
        }
    }

    #[test]
    fn grid_enumeration_matches_quadrature_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let grid = Grid1D::new(-1.0, 1.0, 101);
        let q: Vec<f64> = (0..grid.count).map(|_| rng.random_range(-2.0..2.0)).collect();
        // route 1: weighted exact enumeration in log space
        let m = q.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
        let mut weighted = 0.0;
        for (i, &v) in q.iter().enumerate() {
            let w = if i == 0 || i == grid.count - 1 { 0.5 } else { 1.0 };
            weighted += w * (v - m).exp();
        }
        let route1 = m + (weighted * grid.spacing()).ln();
        // route 2: quadrature of the exponentiated values
        let evals: Vec<f64> = q.iter().map(|&v| v.exp()).collect();
        let route2 = grid.trapezoid(&evals).ln();
        assert!((route1 - route2).abs() < 1e-6, "{route1} vs {route2}");
    }
}
