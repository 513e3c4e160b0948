use ndarray::Array2;
use ofrl::autodiff::*;
use ofrl::bc::*;
use ofrl::critic::*;
use ofrl::env::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    // train the critic exactly as in the stalled runs, then map m -> E[v(tanh(m + sigma*eps))]
    let ds = gen_bandit_dataset(0);
    let behavior = BehaviorDensity::Mixture(train_bc(&ds, &BCConfig::default(), 0).unwrap());
    let ccfg = CriticConfig { lambda: 0.1, lr: 1e-3, ..Default::default() };
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
    let tape = Tape::new();
    let ctx = critic.on_tape_frozen(&tape, Some(&behavior));
    for sigma_ls in [-2.0f64, -2.6, -3.4, -4.4] {
        let sigma = sigma_ls.exp();
        print!("sigma {:.3}: E[v] at m =", sigma);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &m in &[-0.35f64, -0.3, -0.25, -0.2, -0.15, -0.1, -0.055, 0.0, 0.1, 0.2, 0.25, 0.3] {
            let nmc = 4000;
            let mut local = ChaCha8Rng::seed_from_u64(1);
            let noise = Array2::from_shape_fn((1, nmc), |_| {
                let e: f64 = local.sample(rand_distr::StandardNormal);
                (m + sigma * e).tanh()
            });
            let s = tape.constant(Array2::zeros((1, nmc)));
            let a = tape.constant(ofrl::dist::clamp_actions(noise));
            let q = ctx.q_value(&tape, s, a, QSelect::OnlineMin).unwrap();
            let ev = tape.value(q).iter().sum::<f64>() / nmc as f64;
            if ev > best.0 { best = (ev, m); }
            print!(" {m}:{ev:.3}");
        }
        println!("  => best m {}", best.1);
    }
}
