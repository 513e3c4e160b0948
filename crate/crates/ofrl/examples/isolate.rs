use ndarray::Array2;
use ofrl::autodiff::*;
use ofrl::bc::*;
use ofrl::critic::*;
use ofrl::env::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let ds = gen_bandit_dataset(0);
    let behavior = BehaviorDensity::Laplace(fit_laplace(&ds).unwrap());
    let cfg = CriticConfig { lambda: 0.0, ..Default::default() };
    let mut critic = CriticPair::init(1, 1, &cfg, 0);
    let mut opt = AdamState::new(&critic.online, 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for step in 0..2001u64 {
        let idx: Vec<usize> = (0..256).map(|_| rng.random_range(0..ds.len())).collect();
        let batch: Vec<&Transition> = idx.iter().map(|&i| &ds.transitions[i]).collect();
        let packed = PackedBatch::from_transitions(&batch);
        let na = Array2::zeros((1, 256));
        let diag = critic_update(&mut critic, Some(&behavior), &packed, na, None, &[], 0.0, &mut opt, step).unwrap();
        if step % 500 == 0 {
            // final-layer bias of twin 1 is entry "o1.b2" = index 5
            let b2 = critic.online.entry(5).value[[0, 0]];
            println!("step {step}: td {:.5} o1.b2 {:.4}", diag.td_term, b2);
        }
    }
}
