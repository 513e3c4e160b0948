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
    let bc_te: Option<f64> = std::env::args().nth(5).and_then(|s| s.parse().ok());
    let bc_cfg = BCConfig { target_entropy: bc_te, ..Default::default() };
    let behavior = BehaviorDensity::Mixture(train_bc(&ds, &bc_cfg, 0).unwrap());
    let src = if std::env::args().nth(3).as_deref() == Some("data") { PenaltySource::Data } else { PenaltySource::Policy };
    let ccfg = CriticConfig { lambda: 0.1, lr: 1e-3, penalty_action_source: src, ..Default::default() };
    let mut critic = CriticPair::init(1, 1, &ccfg, 7);
    let te: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(-1.0);
    let tlr: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let alr: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let acfg = ActorConfig { lr: alr, target_entropy: Some(te), temperature_lr: Some(tlr), ..Default::default() };
    let mut policy = PolicyModel::init(1, 1, &acfg, 8);
    let mut copt = AdamState::new(&critic.online, ccfg.lr);
    let mut aopt = AdamState::new(&policy.params, acfg.lr);
    let mut topt = AdamState::new(&policy.log_temperature, tlr);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for step in 0..5000u64 {
        let idx: Vec<usize> = (0..256).map(|_| rng.random_range(0..ds.len())).collect();
        let batch: Vec<&Transition> = idx.iter().map(|&i| &ds.transitions[i]).collect();
        let packed = PackedBatch::from_transitions(&batch);
        let (na, _) = policy.sample_values(&packed.next_states, &mut rng);
        let pa = match ccfg.penalty_action_source {
            PenaltySource::Policy => policy.sample_values(&packed.states, &mut rng).0,
            PenaltySource::Data => packed.actions.clone(),
        };
        critic_update(&mut critic, Some(&behavior), &packed, na, None, &[pa], policy.temperature(), &mut copt, step).unwrap();
        let (_, ent, temp) = actor_update(&mut policy, ActorObjective::EntropyRegularized { critic: &critic, behavior: Some(&behavior) }, &packed.states, &mut aopt, &mut topt, &mut rng, step).unwrap();
        if step % 500 == 0 || step == 4999 {
            let tape = Tape::new();
            let bound = policy.params.bind_const(&tape);
            let s = tape.constant(Array2::zeros((1, 1)));
            let heads = policy.heads(&tape, &bound, s).unwrap();
            let m = tape.value(heads.mean)[[0, 0]];
            let ls = tape.value(heads.log_std)[[0, 0]];
            println!("step {step}: mean {:.4} (a={:.4}) log_std {:.3} entropy {:.3} temp {:.4}", m, m.tanh(), ls, ent, temp);
        }
    }
}
