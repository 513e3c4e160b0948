use ofrl::harness::*;
use ofrl::env::*;
use ofrl::oracle::Grid1D;
use ofrl::bc::BehaviorDensity;
use ofrl::checkpoint::*;
use ofrl::critic::CriticPair;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let alr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let ds_path = std::path::Path::new("/tmp/exp/bandit.ofrl");
    if !ds_path.exists() {
        write_dataset(ds_path, &gen_bandit_dataset(0)).unwrap();
    }
    for seed in 0..3u64 {
        let out = format!("/tmp/exp/fb_lr{lr}_s{steps}_seed{seed}");
        let mut cfg = RunConfig::new(Algo::FisherBrc, ds_path, &out);
        cfg.seed = seed;
        cfg.total_steps = steps;
        cfg.critic.lr = lr;
        cfg.actor.lr = alr;
        cfg.critic.lambda = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(0.1);
        cfg.behavior_family = if std::env::args().nth(5).as_deref() == Some("laplace") { BehaviorFamily::Laplace } else { BehaviorFamily::Mixture };
        if let Some(te) = std::env::args().nth(6).and_then(|s| s.parse().ok()) {
            cfg.actor.target_entropy = Some(te);
        }
        let art = run_training(&cfg).unwrap();
        // landscape analysis
        let sections = read_checkpoint(std::path::Path::new(&out).join("critic.ofcp").as_path()).unwrap();
        let critic = CriticPair::from_section(find_section(&sections, TAG_CRITIC_OFFSET).unwrap()).unwrap();
        let behavior = BehaviorDensity::load(std::path::Path::new(&out).join("behavior.ofcp").as_path()).unwrap();
        let grid = Grid1D::action_default();
        let inputs = LandscapeInputs { behavior: &behavior, offset_critics: vec![("fb".into(), &critic)], reward_critic: None, alphas: vec![] };
        let csv = export_landscape(&inputs, &grid).unwrap();
        let (acts, vals) = parse_landscape_column(&csv, "fb").unwrap();
        let maxima = global_maxima(&grid, &vals, 1e-9);
        let at = |t: f64| { let i = (0..acts.len()).min_by_key(|&j| ((acts[j]-t).abs()*1e9) as i64).unwrap(); vals[i] };
        let td = art.metrics.last().unwrap().td_loss.unwrap();
        println!("seed {seed}: ret {:.3} argmax {:?} v(.25) {:.3} v(.75) {:.3} v(-.25) {:.3} v(-.75) {:.3} td {:.4}",
            art.summary.final_mean_return, &maxima[..maxima.len().min(3)], at(0.25), at(0.75), at(-0.25), at(-0.75), td);
    }
}
