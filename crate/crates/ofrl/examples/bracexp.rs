use ofrl::bc::BehaviorDensity;
use ofrl::checkpoint::*;
use ofrl::critic::CriticPair;
use ofrl::env::*;
use ofrl::harness::*;
use ofrl::oracle::Grid1D;

fn main() {
    let ds_path = std::path::Path::new("/tmp/exp/bandit.ofrl");
    if !ds_path.exists() {
        write_dataset(ds_path, &gen_bandit_dataset(0)).unwrap();
    }
    for seed in 0..5u64 {
        let out = format!("/tmp/exp/brac_seed{seed}");
        let mut cfg = RunConfig::new(Algo::Brac, ds_path, &out);
        cfg.seed = seed;
        cfg.total_steps = 5000;
        cfg.critic.lr = 1e-3;
        cfg.behavior_family = BehaviorFamily::Laplace;
        let _ = run_training(&cfg).unwrap();
        let sections = read_checkpoint(std::path::Path::new(&out).join("critic.ofcp").as_path()).unwrap();
        let critic = CriticPair::from_section(find_section(&sections, TAG_CRITIC_PLAIN).unwrap()).unwrap();
        let behavior = BehaviorDensity::load(std::path::Path::new(&out).join("behavior.ofcp").as_path()).unwrap();
        let grid = Grid1D::action_default();
        let alphas = vec![0.03, 0.1, 0.3, 1.0, 3.0, 10.0];
        let inputs = LandscapeInputs { behavior: &behavior, offset_critics: vec![], reward_critic: Some(&critic), alphas: alphas.clone() };
        let csv = export_landscape(&inputs, &grid).unwrap();
        print!("seed {seed}:");
        for a in &alphas {
            let label = format!("brac_alpha_{a}");
            let (acts, vals) = parse_landscape_column(&csv, &label).unwrap();
            let im = (0..acts.len()).max_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap()).unwrap();
            print!("  a{a}:argmax {:+.3}", acts[im]);
        }
        println!();
    }
}
