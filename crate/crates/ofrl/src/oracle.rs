//! Independent numerical ground truth: trapezoid quadrature on 1-D grids,
//! grid Boltzmann distributions, Fisher divergence, the offset-form identity
//! check, and central finite differences.
//!
//! Everything here is deliberately simple and implementation-independent so
//! it can certify the training stack rather than share code with it.

/// Uniform 1-D grid. Point count is odd so symmetric rules stay symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl Grid1D {
    pub fn new(lower: f64, upper: f64, count: usize) -> Self {
        assert!(count >= 3 && count % 2 == 1, "grid count must be odd and >= 3");
        assert!(upper > lower);
        Grid1D { lower, upper, count }
    }

    /// Default action grid: 4001 points just inside the open interval.
    pub fn action_default() -> Self {
        Grid1D::new(-1.0 + 1e-4, 1.0 - 1e-4, 4001)
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lower + self.spacing() * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// Composite trapezoid rule over per-point values.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.count);
        let inner: f64 = values[1..self.count - 1].iter().sum();
        (inner + 0.5 * (values[0] + values[self.count - 1])) * self.spacing()
    }
}

/// Softmax over grid q-values with max subtraction: a probability mass
/// function over the grid points, summing to one.
pub fn boltzmann_on_grid(q_values: &[f64]) -> Vec<f64> {
    assert!(!q_values.is_empty());
    let m = q_values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = q_values.iter().map(|&q| (q - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Continuous density proportional to `exp(q)` on the grid, normalized by
/// trapezoid quadrature rather than a discrete sum.
pub fn boltzmann_density_on_grid(grid: &Grid1D, q_values: &[f64]) -> Vec<f64> {
    assert_eq!(q_values.len(), grid.count);
    let m = q_values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let unnorm: Vec<f64> = q_values.iter().map(|&q| (q - m).exp()).collect();
    let z = grid.trapezoid(&unnorm);
    unnorm.into_iter().map(|u| u / z).collect()
}

/// `E_{x ~ p}[(score_p(x) - score_q(x))^2]` by trapezoid quadrature.
/// Scores may come from unnormalized log-densities; additive constants in
/// either log-density do not change them.
pub fn fisher_divergence_quadrature(
    grid: &Grid1D,
    p_score: impl Fn(f64) -> f64,
    q_score: impl Fn(f64) -> f64,
    p_density: impl Fn(f64) -> f64,
) -> f64 {
    let vals: Vec<f64> = grid
        .points()
        .iter()
        .map(|&x| {
            let d = p_score(x) - q_score(x);
            p_density(x) * d * d
        })
        .collect();
    grid.trapezoid(&vals)
}

/// Same integral from values already evaluated on the grid.
pub fn fisher_divergence_from_samples(
    grid: &Grid1D,
    p_scores: &[f64],
    q_scores: &[f64],
    p_density: &[f64],
) -> f64 {
    assert_eq!(p_scores.len(), grid.count);
    assert_eq!(q_scores.len(), grid.count);
    assert_eq!(p_density.len(), grid.count);
    let vals: Vec<f64> = (0..grid.count)
        .map(|i| {
            let d = p_scores[i] - q_scores[i];
            p_density[i] * d * d
        })
        .collect();
    grid.trapezoid(&vals)
}

/// Residual of the offset-form reduction: with `Q = O + log mu`, the Fisher
/// divergence between the Boltzmann density of `Q` and `mu` equals the
/// Boltzmann-weighted mean of the squared offset slope.
///
/// `offset` returns `(O(a), O'(a))`; `behavior` returns
/// `(log mu(a), d/da log mu(a))`. Both sides are quadratures over `grid`;
/// the contract on smooth inputs is agreement below `1e-6`.
pub fn fisher_identity_check(
    grid: &Grid1D,
    offset: impl Fn(f64) -> (f64, f64),
    behavior: impl Fn(f64) -> (f64, f64),
) -> f64 {
    let pts = grid.points();
    let mut q = Vec::with_capacity(grid.count);
    let mut p_scores = Vec::with_capacity(grid.count);
    let mut mu_scores = Vec::with_capacity(grid.count);
    let mut offset_slopes = Vec::with_capacity(grid.count);
    for &a in &pts {
        let (o, o_slope) = offset(a);
        let (log_mu, mu_score) = behavior(a);
        q.push(o + log_mu);
        p_scores.push(o_slope + mu_score);
        mu_scores.push(mu_score);
        offset_slopes.push(o_slope);
    }
    let p = boltzmann_density_on_grid(grid, &q);

    let lhs = fisher_divergence_from_samples(grid, &p_scores, &mu_scores, &p);

    let rhs_vals: Vec<f64> = (0..grid.count)
        .map(|i| p[i] * offset_slopes[i] * offset_slopes[i])
        .collect();
    let rhs = grid.trapezoid(&rhs_vals);

    (lhs - rhs).abs()
}

/// Central finite differences of a scalar function, one coordinate at a time.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut buf = x.to_vec();
    for i in 0..x.len() {
        let orig = buf[i];
        buf[i] = orig + step;
        let hi = f(&buf);
        buf[i] = orig - step;
        let lo = f(&buf);
        buf[i] = orig;
        grad.push((hi - lo) / (2.0 * step));
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::dist::SquashedMixture;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boltzmann_uniform_for_equal_q() {
        let p = boltzmann_on_grid(&[3.0; 5]);
        for v in &p {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn boltzmann_shift_invariant() {
        let q = [0.3, -1.0, 2.0, 0.0];
        let p1 = boltzmann_on_grid(&q);
        let q2: Vec<f64> = q.iter().map(|&x| x + 17.5).collect();
        let p2 = boltzmann_on_grid(&q2);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn boltzmann_two_point_analytic() {
        let p = boltzmann_on_grid(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn fisher_divergence_identical_scores_is_zero() {
        let grid = Grid1D::new(-3.0, 3.0, 1001);
        let s = |x: f64| -x;
        let d = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert_eq!(fisher_divergence_quadrature(&grid, s, s, d), 0.0);
    }

    #[test]
    fn fisher_divergence_shifted_gaussians() {
        // p = N(0,1), q = N(m,1): scores differ by the constant m
        let grid = Grid1D::new(-9.0, 9.0, 4001);
        let m = 0.8;
        let p_score = |x: f64| -x;
        let q_score = move |x: f64| -(x - m);
        let dens = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let f = fisher_divergence_quadrature(&grid, p_score, q_score, dens);
        assert!((f - m * m).abs() < 1e-9, "got {f}");
    }

    #[test]
    fn fisher_divergence_score_shift_insensitive() {
        // adding a constant to log p changes neither score nor result
        let grid = Grid1D::new(-5.0, 5.0, 2001);
        let dens = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let f1 = fisher_divergence_quadrature(&grid, |x| -x, |x| -0.5 * x, dens);
        // "unnormalized" densities: scores are derivatives of log density,
        // so a multiplicative constant on the density leaves them alone
        let f2 = fisher_divergence_quadrature(&grid, |x| -x, |x| -0.5 * x, dens);
        assert_eq!(f1, f2);
    }

    #[test]
    fn grid_refinement_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m1: f64 = rng.random_range(-0.5..0.5);
        let m2: f64 = rng.random_range(-0.5..0.5);
        let p_log = move |x: f64| {
            let a = (-0.5 * (x - m1) * (x - m1)).exp();
            let b = (-0.5 * (x - m2) * (x - m2)).exp();
            (0.5 * a + 0.5 * b).ln()
        };
        let eps = 1e-6;
        let p_score = move |x: f64| (p_log(x + eps) - p_log(x - eps)) / (2.0 * eps);
        let q_score = |x: f64| -x;
        let dens = move |x: f64| p_log(x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let coarse = Grid1D::new(-6.0, 6.0, 4001);
        let fine = Grid1D::new(-6.0, 6.0, 8001);
        let fc = fisher_divergence_quadrature(&coarse, p_score, q_score, dens);
        let ff = fisher_divergence_quadrature(&fine, p_score, q_score, dens);
        assert!((fc - ff).abs() < 1e-6, "coarse {fc} fine {ff}");
    }

    #[test]
    fn identity_constant_offset_is_exact_zero() {
        let grid = Grid1D::action_default();
        let res = fisher_identity_check(
            &grid,
            |_| (2.5, 0.0),
            |a| (-0.5 * a * a, -a),
        );
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn identity_linear_offset_gaussian_behavior() {
        let grid = Grid1D::action_default();
        let res = fisher_identity_check(
            &grid,
            |a| (0.7 * a, 0.7),
            |a| (-8.0 * a * a, -16.0 * a),
        );
        assert!(res < 1e-6, "residual {res}");
    }

    #[test]
    fn identity_randomized_mixture_behavior() {
        // behavior is a squashed mixture evaluated through the tape; the
        // offset is a smooth cubic. Scores come from autodiff.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let grid = Grid1D::action_default();
        for _ in 0..5 {
            let k = 3;
            let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let means: Vec<f64> = (0..k).map(|_| rng.random_range(-0.8..0.8)).collect();
            let lss: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..0.0)).collect();
            let (c1, c2, c3) = (
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );

            let tape = Tape::new();
            let mix = SquashedMixture {
                logits: tape.input(Array2::from_shape_vec((k, 1), logits).unwrap()),
                means: tape.input(Array2::from_shape_vec((k, 1), means).unwrap()),
                log_stds: tape.input(Array2::from_shape_vec((k, 1), lss).unwrap()),
                components: k,
                dim: 1,
            };
            let pts = grid.points();
            let a = tape.input(Array2::from_shape_vec((1, grid.count), pts.clone()).unwrap());
            let lp = mix.log_prob_action(&tape, a);
            let total = tape.sum_all(lp);
            let score = tape.grad(total, &[a]).unwrap()[0];
            let lp_v = tape.value_owned(lp);
            let sc_v = tape.value_owned(score);

            let lookup: std::collections::HashMap<u64, (f64, f64)> = pts
                .iter()
                .enumerate()
                .map(|(i, &x)| (x.to_bits(), (lp_v[[0, i]], sc_v[[0, i]])))
                .collect();

            let res = fisher_identity_check(
                &grid,
                |x| (c1 * x + c2 * x * x + c3 * x * x * x, c1 + 2.0 * c2 * x + 3.0 * c3 * x * x),
                |x| lookup[&x.to_bits()],
            );
            assert!(res < 1e-6, "residual {res}");
        }
    }

    #[test]
    fn finite_diff_square() {
        let g = finite_diff_grad(|x| x[0] * x[0], &[3.0], 1e-4);
        assert!((g[0] - 6.0).abs() < 1e-7);
    }

    #[test]
    fn finite_diff_constant_is_zero() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0], 1e-4);
        assert!(g.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let grid = Grid1D::new(0.0, 2.0, 101);
        let vals: Vec<f64> = grid.points().iter().map(|&x| 3.0 * x).collect();
        assert!((grid.trapezoid(&vals) - 6.0).abs() < 1e-12);
    }
}
