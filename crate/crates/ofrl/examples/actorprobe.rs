use ndarray::Array2;
use ofrl::actor::*;
use ofrl::autodiff::*;
use ofrl::bc::*;
use ofrl::critic::*;
use ofrl::env::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let ds = gen_bandit_dataset(0);
    let te: Option<f64> = std::env::args().nth(1).and_then(|s| s.parse().ok());
    let bc_cfg = BCConfig { target_entropy: te, ..Default::default() };
    let behavior = BehaviorDensity::Mixture(train_bc(&ds, &bc_cfg, 0).unwrap());
    {
        // inspect log mu interior smoothness
        let tape = Tape::new();
        let b = behavior.on_tape(&tape);
        let n = 21;
        let grid = Array2::from_shape_fn((1, n), |(_, j)| -0.3 + 0.6 * j as f64 / (n - 1) as f64);
        let s = tape.constant(Array2::zeros((1, n)));
        let a = tape.constant(grid.clone());
        let lm = tape.value_owned(b.log_prob(&tape, s, a).unwrap());
        print!("logmu:");
        for j in 0..n { print!(" {:+.2}", lm[[0, j]]); }
        println!();
    }
    let ccfg = CriticConfig { lambda: 0.1, lr: 1e-3, penalty_action_source: PenaltySource::Data, ..Default::default() };
    let mut critic = CriticPair::init(1, 1, &ccfg, 7);
    let mut copt = AdamState::new(&critic.online, ccfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for step in 0..5000u64 {
        let idx: Vec<usize> = (0..256).map(|_| rng.random_range(0..ds.len())).collect();
        let batch: Vec<&Transition> = idx.iter().map(|&i| &ds.transitions[i]).collect();
        let packed = PackedBatch::from_transitions(&batch);
        let na = Array2::zeros((1, 256));
        critic_update(&mut critic, Some(&behavior), &packed, na, None, &[packed.actions.clone()], 0.0, &mut copt, step).unwrap();
    }
    // composed critic value along the action axis (OnlineMin)
    let tape = Tape::new();
    let ctx = critic.on_tape_frozen(&tape, Some(&behavior));
    let n = 41;
    let grid = Array2::from_shape_fn((1, n), |(_, j)| -0.4 + 0.8 * j as f64 / (n - 1) as f64);
    let s = tape.constant(Array2::zeros((1, n)));
    let a = tape.constant(grid.clone());
    let q = ctx.q_value(&tape, s, a, QSelect::OnlineMin).unwrap();
    let qv = tape.value_owned(q);
    for j in (0..n).step_by(2) {
        println!("a={:+.3} v={:+.4}", grid[[0, j]], qv[[0, j]]);
    }
}
