//! Reverse-mode autodiff: tape, parameter sets, dense networks, Adam.

mod adam;
mod mlp;
mod params;
mod tape;

pub use adam::AdamState;
pub use mlp::{mlp_apply, mlp_init, Activation, MlpArch};
pub use params::{BoundParams, ParamEntry, ParameterSet};
pub use tape::{Node, Tape};

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(tape: &Tape, v: f64) -> Node {
        tape.input(Array2::from_elem((1, 1), v))
    }

    #[test]
    fn forward_square() {
        let tape = Tape::new();
        let x = scalar(&tape, 3.0);
        let y = tape.mul(x, x);
        assert_eq!(tape.forward(y).unwrap()[[0, 0]], 9.0);
    }

    #[test]
    fn forward_tanh_zero() {
        let tape = Tape::new();
        let x = scalar(&tape, 0.0);
        let y = tape.tanh(x);
        assert_eq!(tape.scalar(y), 0.0);
    }

    #[test]
    fn forward_logsumexp_two_zeros() {
        let tape = Tape::new();
        let x = tape.input(Array2::zeros((2, 1)));
        let l = tape.logsumexp_rows(x);
        assert!((tape.scalar(l) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_reports_nonfinite_op() {
        let tape = Tape::new();
        let x = scalar(&tape, -1.0);
        let y = tape.ln(x); // NaN
        let z = tape.add(y, y);
        let err = tape.forward(z).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ln"), "unexpected diagnostic: {msg}");
    }

    #[test]
    fn grad_square() {
        let tape = Tape::new();
        let x = scalar(&tape, 3.0);
        let y = tape.mul(x, x);
        let g = tape.grad(y, &[x]).unwrap();
        assert_eq!(tape.scalar(g[0]), 6.0);
    }

    #[test]
    fn grad_rejects_nonscalar_root() {
        let tape = Tape::new();
        let x = tape.input(Array2::zeros((2, 1)));
        assert!(tape.grad(x, &[x]).is_err());
    }

    #[test]
    fn second_order_chain() {
        // f(x) = (d/dx x^3)^2 = 9x^4, f'(1) = 36.
        let tape = Tape::new();
        let x = scalar(&tape, 1.0);
        let x3 = tape.mul(tape.mul(x, x), x);
        let inner = tape.grad(x3, &[x]).unwrap()[0];
        assert_eq!(tape.scalar(inner), 3.0);
        let outer = tape.mul(inner, inner);
        let g = tape.grad(outer, &[x]).unwrap();
        assert!((tape.scalar(g[0]) - 36.0).abs() < 1e-12);
    }

    #[test]
    fn detach_blocks_gradient() {
        let tape = Tape::new();
        let x = scalar(&tape, 2.0);
        let d = tape.detach(x);
        let y = tape.mul(x, d); // dy/dx = d = 2, not 2x = 4
        let g = tape.grad(y, &[x]).unwrap();
        assert_eq!(tape.scalar(g[0]), 2.0);
    }

    #[test]
    fn broadcast_bias_gradient_sums_over_batch() {
        let tape = Tape::new();
        let x = tape.input(Array2::from_shape_vec((2, 3), vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let b = tape.input(Array2::from_elem((2, 1), 0.5));
        let y = tape.add(x, b);
        let s = tape.sum_all(y);
        let g = tape.grad(s, &[b]).unwrap();
        let gb = tape.value_owned(g[0]);
        assert_eq!(gb.dim(), (2, 1));
        assert_eq!(gb[[0, 0]], 3.0);
        assert_eq!(gb[[1, 0]], 3.0);
    }

    #[test]
    fn zero_init_mlp_outputs_zero() {
        let tape = Tape::new();
        let arch = MlpArch::new(3, &[8], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = mlp_init(&arch, &mut rng, true);
        let bound = params.bind(&tape);
        let x = tape.input(Array2::from_elem((3, 5), 1.3));
        let y = mlp_apply(&tape, &arch, &bound, x).unwrap();
        assert!(tape.value(y).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer() {
        let tape = Tape::new();
        let arch = MlpArch::new(2, &[], 2);
        let mut params = ParameterSet::new();
        params.push("w0", Array2::eye(2));
        params.push("b0", Array2::zeros((2, 1)));
        let bound = params.bind(&tape);
        let x = tape.input(Array2::from_shape_vec((2, 1), vec![1.0, 2.0]).unwrap());
        let y = mlp_apply(&tape, &arch, &bound, x).unwrap();
        let v = tape.value_owned(y);
        assert_eq!(v[[0, 0]], 1.0);
        assert_eq!(v[[1, 0]], 2.0);
    }

    #[test]
    fn mlp_input_gradient_matches_finite_differences() {
        let arch = MlpArch::new(4, &[16, 16], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = mlp_init(&arch, &mut rng, false);
        let x0: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

        let eval = |x: &[f64]| -> f64 {
            let tape = Tape::new();
            let bound = params.bind(&tape);
            let xin = tape.input(Array2::from_shape_vec((4, 1), x.to_vec()).unwrap());
            let y = mlp_apply(&tape, &arch, &bound, xin).unwrap();
            tape.scalar(y)
        };

        let tape = Tape::new();
        let bound = params.bind(&tape);
        let xin = tape.input(Array2::from_shape_vec((4, 1), x0.clone()).unwrap());
        let y = mlp_apply(&tape, &arch, &bound, xin).unwrap();
        let g = tape.grad(y, &[xin]).unwrap();
        let gv = tape.value_owned(g[0]);

        let step = 1e-4;
        for i in 0..4 {
            let mut hi = x0.clone();
            let mut lo = x0.clone();
            hi[i] += step;
            lo[i] -= step;
            let fd = (eval(&hi) - eval(&lo)) / (2.0 * step);
            let rel = (gv[[i, 0]] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-6, "dim {i}: ad {} vs fd {fd}", gv[[i, 0]]);
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut params = ParameterSet::new();
        params.push("p", Array2::from_elem((2, 2), 1.5));
        let before = params.clone();
        let mut adam = AdamState::new(&params, 1e-3);
        let zeros = vec![Array2::zeros((2, 2))];
        adam.step(&mut params, &zeros).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn adam_first_step_matches_hand_computation() {
        // From zero state with gradient g: m = (1-b1)g, v = (1-b2)g^2,
        // mhat = g, vhat = g^2, so dp = -lr * g / (|g| + eps).
        let g = 0.37;
        let lr = 1e-3;
        let mut params = ParameterSet::new();
        params.push("p", Array2::from_elem((1, 1), 2.0));
        let mut adam = AdamState::new(&params, lr);
        adam.step(&mut params, &[Array2::from_elem((1, 1), g)]).unwrap();
        let expected = 2.0 - lr * g / (g.abs() + 1e-8);
        assert!((params.entry(0).value[[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_constant_gradient_displacement_approaches_lr() {
        let lr = 1e-3;
        let mut params = ParameterSet::new();
        params.push("p", Array2::from_elem((1, 1), 0.0));
        let mut adam = AdamState::new(&params, lr);
        let g = Array2::from_elem((1, 1), 0.25);
        let mut prev = 0.0;
        let mut disp = 0.0;
        for _ in 0..2000 {
            adam.step(&mut params, &[g.clone()]).unwrap();
            let cur = params.entry(0).value[[0, 0]];
            disp = (cur - prev).abs();
            prev = cur;
        }
        assert!((disp - lr).abs() < 1e-6, "displacement {disp}");
    }

    #[test]
    fn adam_rejects_nonfinite_gradient() {
        let mut params = ParameterSet::new();
        params.push("p", Array2::zeros((1, 1)));
        let mut adam = AdamState::new(&params, 1e-3);
        let bad = vec![Array2::from_elem((1, 1), f64::NAN)];
        assert!(adam.step(&mut params, &bad).is_err());
    }

    #[test]
    fn determinism_same_seed_same_values() {
        let run = || {
            let arch = MlpArch::new(3, &[8, 8], 2);
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let params = mlp_init(&arch, &mut rng, false);
            let tape = Tape::new();
            let bound = params.bind(&tape);
            let x = tape.input(Array2::from_shape_vec((3, 2), vec![0.1; 6]).unwrap());
            let y = mlp_apply(&tape, &arch, &bound, x).unwrap();
            let s = tape.sum_all(y);
            let g = tape.grad(s, &bound.nodes).unwrap();
            let mut bits = Vec::new();
            for n in g {
                for &v in tape.value(n).iter() {
                    bits.push(v.to_bits());
                }
            }
            (tape.scalar(s).to_bits(), bits)
        };
        assert_eq!(run(), run());
    }
}
