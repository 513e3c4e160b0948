use ndarray::Array2;
use ofrl::actor::*;
use ofrl::autodiff::AdamState;
use ofrl::bc::{BCConfig, BehaviorDensity, BehaviorModel};
use ofrl::critic::*;
use ofrl::env::Transition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    for (hid, b) in [(vec![64usize, 64], 256usize), (vec![64, 64], 128), (vec![48, 48], 128), (vec![32, 32], 128), (vec![32, 32], 64)] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bcfg = BCConfig { hidden: hid.clone(), ..Default::default() };
        let behavior = BehaviorDensity::Mixture(BehaviorModel::init(4, 2, &bcfg, 1));
        let ccfg = CriticConfig { hidden: hid.clone(), ..Default::default() };
        let mut critic = CriticPair::init(4, 2, &ccfg, 2);
        let acfg = ActorConfig { hidden: hid.clone(), ..Default::default() };
        let mut policy = PolicyModel::init(4, 2, &acfg, 3);
        let mut copt = AdamState::new(&critic.online, 3e-4);
        let mut aopt = AdamState::new(&policy.params, 3e-4);
        let mut topt = AdamState::new(&policy.log_temperature, 3e-4);

        let transitions: Vec<Transition> = (0..b).map(|_| Transition {
            state: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..2).map(|_| rng.random_range(-0.9..0.9)).collect(),
            reward: rng.random_range(-1.0..0.0),
            next_state: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: false,
        }).collect();
        let refs: Vec<&Transition> = transitions.iter().collect();
        let packed = PackedBatch::from_transitions(&refs);

        let n_steps = 200;
        let t0 = Instant::now();
        for step in 0..n_steps {
            let (na, _nlp) = policy.sample_values(&packed.next_states, &mut rng);
            let (pa, _) = policy.sample_values(&packed.states, &mut rng);
            critic_update(&mut critic, Some(&behavior), &packed, na, None, &[pa], policy.temperature(), &mut copt, step).unwrap();
            actor_update(&mut policy, ActorObjective::EntropyRegularized { critic: &critic, behavior: Some(&behavior) }, &packed.states, &mut aopt, &mut topt, &mut rng, step).unwrap();
        }
        let dt = t0.elapsed().as_secs_f64() / n_steps as f64;
        println!("hidden {:?} batch {}: {:.2} ms/step -> 10k steps = {:.0} s", hid, b, dt * 1e3, dt * 10_000.0);
    }
}
