//! Probability machinery for tanh-squashed diagonal Gaussians, squashed
//! mixtures of Gaussians, and a truncated Laplace family.
//!
//! All densities live on the open action cube `(-1,1)^d`. Log-densities are
//! exact, including the tanh change-of-variables term, and are recorded on a
//! tape so both their parameter gradients and their action gradients (the
//! score) come out of the same machinery.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Node, Tape};

/// Clamp margin applied before inverse-tanh: dataset actions may sit
/// numerically on the boundary after serialization round-trips.
pub const BOUNDARY_EPS: f64 = 1e-6;

/// Bounds for the pre-squash log standard deviation.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Map an unbounded head output into `[LOG_STD_MIN, LOG_STD_MAX]` smoothly.
pub fn bounded_log_std(tape: &Tape, raw: Node) -> Node {
    let t = tape.tanh(raw);
    let half = tape.scale(tape.add_const(t, 1.0), 0.5);
    tape.add_const(tape.scale(half, LOG_STD_MAX - LOG_STD_MIN), LOG_STD_MIN)
}

pub fn clamp_actions(mut a: Array2<f64>) -> Array2<f64> {
    a.mapv_inplace(|x| x.clamp(-1.0 + BOUNDARY_EPS, 1.0 - BOUNDARY_EPS));
    a
}

pub fn standard_normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Sum of independent Gaussian log-densities down the feature rows:
/// `u, mean, log_std` are `d x batch`; the result is `1 x batch`.
fn diag_gaussian_log_prob(tape: &Tape, u: Node, mean: Node, log_std: Node) -> Node {
    let inv_std = tape.exp(tape.neg(log_std));
    let z = tape.mul(tape.sub(u, mean), inv_std);
    let quad = tape.scale(tape.square(z), -0.5);
    let per_dim = tape.add_const(tape.sub(quad, log_std), -HALF_LN_2PI);
    tape.col_sum(per_dim)
}

/// `log |d tanh(u) / du|` summed down the rows, written in the numerically
/// stable softplus form `2 (ln 2 - u - softplus(-2u))`.
fn tanh_log_jacobian_from_pre_squash(tape: &Tape, u: Node) -> Node {
    let sp = tape.softplus(tape.scale(u, -2.0));
    let inner = tape.sub(tape.add_const(tape.neg(u), std::f64::consts::LN_2), sp);
    tape.col_sum(tape.scale(inner, 2.0))
}

/// `log |d tanh / du|` evaluated from the squashed value: `sum ln(1 - a^2)`.
fn tanh_log_jacobian_from_action(tape: &Tape, a: Node) -> Node {
    let one_minus = tape.add_const(tape.neg(tape.square(a)), 1.0);
    tape.col_sum(tape.ln(one_minus))
}

/// A sampled squashed action along with its pre-squash value.
#[derive(Clone, Copy)]
pub struct SquashedSample {
    pub action: Node,
    pub pre_squash: Node,
}

/// Tanh-squashed diagonal Gaussian, parameterized on-tape. `mean` and
/// `log_std` are `d x batch` nodes; `log_std` must already be bounded.
#[derive(Clone, Copy)]
pub struct SquashedGaussian {
    pub mean: Node,
    pub log_std: Node,
}

impl SquashedGaussian {
    /// Reparameterized draw: `a = tanh(mean + exp(log_std) * noise)`.
    /// `noise` enters as a constant, so gradients flow into the parameters.
    pub fn sample_reparameterized(&self, tape: &Tape, noise: Array2<f64>) -> SquashedSample {
        let eps = tape.constant(noise);
        let std = tape.exp(self.log_std);
        let u = tape.add(self.mean, tape.mul(std, eps));
        SquashedSample {
            action: tape.tanh(u),
            pre_squash: u,
        }
    }

    /// Exact log-density of a sample produced by `sample_reparameterized`,
    /// using the pre-squash value (no inverse-tanh round trip).
    pub fn log_prob_pre_squash(&self, tape: &Tape, sample: SquashedSample) -> Node {
        let base = diag_gaussian_log_prob(tape, sample.pre_squash, self.mean, self.log_std);
        let corr = tanh_log_jacobian_from_pre_squash(tape, sample.pre_squash);
        tape.sub(base, corr)
    }

    /// Exact log-density of an arbitrary action node strictly inside
    /// `(-1,1)^d` (clamp values with [`clamp_actions`] first).
    pub fn log_prob_action(&self, tape: &Tape, action: Node) -> Node {
        let u = tape.atanh(action);
        let base = diag_gaussian_log_prob(tape, u, self.mean, self.log_std);
        let corr = tanh_log_jacobian_from_action(tape, action);
        tape.sub(base, corr)
    }

    /// Monte-Carlo entropy estimate `-mean log pi(a)` over `n_samples`
    /// fresh draws per batch column.
    pub fn entropy_estimate(&self, tape: &Tape, n_samples: usize, rng: &mut impl Rng) -> f64 {
        assert!(n_samples >= 1);
        let (d, b) = tape.shape(self.mean);
        let mut acc = 0.0;
        for _ in 0..n_samples {
            let s = self.sample_reparameterized(tape, standard_normal(rng, d, b));
            let lp = self.log_prob_pre_squash(tape, s);
            acc += tape.value(lp).iter().sum::<f64>() / b as f64;
        }
        -acc / n_samples as f64
    }
}

/// Tanh-squashed mixture of diagonal Gaussians, parameterized on-tape.
/// `logits` is `k x batch`; `means` and `log_stds` are `(k*dim) x batch`
/// with component `j` occupying rows `j*dim .. (j+1)*dim`.
#[derive(Clone, Copy)]
pub struct SquashedMixture {
    pub logits: Node,
    pub means: Node,
    pub log_stds: Node,
    pub components: usize,
    pub dim: usize,
}

impl SquashedMixture {
    fn component(&self, tape: &Tape, j: usize) -> (Node, Node) {
        let from = j * self.dim;
        let to = from + self.dim;
        (
            tape.slice_rows(self.means, from, to),
            tape.slice_rows(self.log_stds, from, to),
        )
    }

    fn log_weights(&self, tape: &Tape) -> Node {
        let lse = tape.logsumexp_rows(self.logits);
        tape.sub(self.logits, lse)
    }

    /// Exact mixture log-density of actions strictly inside `(-1,1)^d`.
    /// The squash is applied to the mixture in pre-squash space, so there is
    /// a single Jacobian correction shared by all components.
    pub fn log_prob_action(&self, tape: &Tape, action: Node) -> Node {
        let u = tape.atanh(action);
        let log_w = self.log_weights(tape);
        let mut rows: Option<Node> = None;
        for j in 0..self.components {
            let (m, ls) = self.component(tape, j);
            let lp = diag_gaussian_log_prob(tape, u, m, ls);
            let w = tape.slice_rows(log_w, j, j + 1);
            let term = tape.add(lp, w);
            rows = Some(match rows {
                Some(r) => tape.concat_rows(r, term),
                None => term,
            });
        }
        let stacked = rows.expect("mixture has at least one component");
        let base = tape.logsumexp_rows(stacked);
        let corr = tanh_log_jacobian_from_action(tape, action);
        tape.sub(base, corr)
    }

    /// Draw one action per batch column. The component index is sampled from
    /// the softmax weights and treated as a constant; the within-component
    /// draw is reparameterized, so gradients reach means and log-stds.
    pub fn sample(&self, tape: &Tape, rng: &mut impl Rng) -> SquashedSample {
        let (k, b) = tape.shape(self.logits);
        let weights = {
            let v = tape.value_owned(self.logits);
            let mut w = Array2::<f64>::zeros((k, b));
            for j in 0..b {
                let col = v.column(j);
                let m = col.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
                let mut z = col.mapv(|x| (x - m).exp());
                let s = z.sum();
                z.mapv_inplace(|x| x / s);
                w.column_mut(j).assign(&z);
            }
            w
        };
        let mut mask = Array2::<f64>::zeros((k, b));
        for j in 0..b {
            let r: f64 = rng.random();
            let mut cum = 0.0;
            let mut chosen = k - 1;
            for c in 0..k {
                cum += weights[[c, j]];
                if r < cum {
                    chosen = c;
                    break;
                }
            }
            mask[[chosen, j]] = 1.0;
        }
        let mut mean_sel: Option<Node> = None;
        let mut ls_sel: Option<Node> = None;
        for j in 0..self.components {
            let (m, ls) = self.component(tape, j);
            let row = tape.constant(mask.slice(ndarray::s![j..j + 1, ..]).to_owned());
            let m_term = tape.mul(m, row);
            let ls_term = tape.mul(ls, row);
            mean_sel = Some(match mean_sel {
                Some(acc) => tape.add(acc, m_term),
                None => m_term,
            });
            ls_sel = Some(match ls_sel {
                Some(acc) => tape.add(acc, ls_term),
                None => ls_term,
            });
        }
        let gauss = SquashedGaussian {
            mean: mean_sel.unwrap(),
            log_std: ls_sel.unwrap(),
        };
        gauss.sample_reparameterized(tape, standard_normal(rng, self.dim, b))
    }

    /// Mass of the mixture over `(-1,1)^d`, computed with one-dimensional
    /// quadrature per component and dimension. Diagonal components factor, so
    /// the total is `sum_k w_k prod_d integral_d`. Exactly 1 up to quadrature
    /// error and the tail clipped by the boundary clamp.
    pub fn normalization_mass_quadrature(&self, tape: &Tape, points_per_dim: usize) -> f64 {
        let (_, b) = tape.shape(self.logits);
        assert_eq!(b, 1, "normalization check expects a single-state batch");
        let logits = tape.value_owned(self.logits);
        let means = tape.value_owned(self.means);
        let log_stds = tape.value_owned(self.log_stds);
        let maxl = logits.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
        let z: f64 = logits.iter().map(|&l| (l - maxl).exp()).sum();
        let lo = -1.0 + BOUNDARY_EPS;
        let hi = 1.0 - BOUNDARY_EPS;
        let h = (hi - lo) / (points_per_dim - 1) as f64;
        let mut total = 0.0;
        for j in 0..self.components {
            let w = (logits[[j, 0]] - maxl).exp() / z;
            let mut comp = 1.0;
            for d in 0..self.dim {
                let m = means[[j * self.dim + d, 0]];
                let ls = log_stds[[j * self.dim + d, 0]];
                let inv_std = (-ls).exp();
                // density of tanh(N(m, s)) at a, integrated by trapezoid
                let mut integral = 0.0;
                for i in 0..points_per_dim {
                    let a: f64 = lo + h * i as f64;
                    let u = a.atanh();
                    let zed = (u - m) * inv_std;
                    let log_pdf =
                        -0.5 * zed * zed - ls - HALF_LN_2PI - (1.0 - a * a).ln();
                    let weight = if i == 0 || i == points_per_dim - 1 { 0.5 } else { 1.0 };
                    integral += weight * log_pdf.exp();
                }
                comp *= integral * h;
            }
            total += w * comp;
        }
        total
    }
}

/// Laplace density truncated and renormalized on `[-1, 1]`.
///
/// The fit is the plain maximum-likelihood estimate (median location, mean
/// absolute deviation scale); the truncation mass is then computed by
/// quadrature so the density is proper on the action interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruncatedLaplace {
    pub loc: f64,
    pub scale: f64,
    /// Log of the un-truncated mass on `[-1,1]`, subtracted from the density.
    pub log_trunc_mass: f64,
}

impl TruncatedLaplace {
    pub fn fit(samples: &[f64]) -> Self {
        assert!(!samples.is_empty(), "cannot fit Laplace to empty sample");
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let loc = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let scale = (samples.iter().map(|&x| (x - loc).abs()).sum::<f64>() / n as f64)
            .max(1e-6);
        let mut out = TruncatedLaplace {
            loc,
            scale,
            log_trunc_mass: 0.0,
        };
        out.log_trunc_mass = out.quadrature_mass_untruncated(20_001).ln();
        out
    }

    fn log_prob_untruncated_value(&self, a: f64) -> f64 {
        -(2.0 * self.scale).ln() - (a - self.loc).abs() / self.scale
    }

    fn quadrature_mass_untruncated(&self, points: usize) -> f64 {
        let lo = -1.0;
        let hi = 1.0;
        let h = (hi - lo) / (points - 1) as f64;
        let mut acc = 0.0;
        for i in 0..points {
            let a = lo + h * i as f64;
            let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            acc += w * self.log_prob_untruncated_value(a).exp();
        }
        acc * h
    }

    pub fn log_prob_value(&self, a: f64) -> f64 {
        self.log_prob_untruncated_value(a) - self.log_trunc_mass
    }

    /// Score `d/da log p(a)`; piecewise constant `-sign(a - loc) / scale`.
    pub fn score_value(&self, a: f64) -> f64 {
        if a >= self.loc {
            -1.0 / self.scale
        } else {
            1.0 / self.scale
        }
    }

    /// Log-density as a tape expression of an action node (`1 x batch`
    /// result for a `1 x batch` action).
    pub fn log_prob(&self, tape: &Tape, action: Node) -> Node {
        let dev = tape.abs(tape.add_const(action, -self.loc));
        let scaled = tape.scale(dev, -1.0 / self.scale);
        tape.add_const(scaled, -(2.0 * self.scale).ln() - self.log_trunc_mass)
    }
}
