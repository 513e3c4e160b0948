use ofrl::env::*;
use ofrl::harness::*;
use rayon::prelude::*;
use std::path::PathBuf;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let root = PathBuf::from("/tmp/exp/pm");
    std::fs::create_dir_all(&root).unwrap();
    // datasets (cached)
    let med_path = root.join("medium.ofrl");
    let exp_path = root.join("expert.ofrl");
    if !med_path.exists() {
        let gen_seed = 0;
        let trained = train_online_sac(&PointMassSpec::default(), &OnlineSacConfig::default(), gen_seed).unwrap();
        println!("refs: random {:.1} expert {:.1}", trained.refs.random_score, trained.refs.expert_score);
        for (tier, path) in [(Tier::Medium, &med_path), (Tier::Expert, &exp_path)] {
            let ds = gen_pointmass_dataset(tier, 20_000, gen_seed).unwrap();
            write_dataset(path, &ds).unwrap();
            println!("{tier:?}: behavior '{}'", ds.meta.behavior_policy);
        }
    }
    println!("datasets ready at {:.0}s", t0.elapsed().as_secs_f64());
    // behavior models (cached)
    let bc_med = root.join("bc_medium.ofcp");
    let bc_exp = root.join("bc_expert.ofcp");
    for (data, out) in [(&med_path, &bc_med), (&exp_path, &bc_exp)] {
        if !out.exists() {
            let ds = read_dataset(data).unwrap();
            let model = ofrl::bc::train_bc(&ds, &ofrl::bc::BCConfig::default(), 0).unwrap();
            ofrl::bc::BehaviorDensity::Mixture(model).save(out).unwrap();
        }
    }
    println!("bc ready at {:.0}s", t0.elapsed().as_secs_f64());

    let seeds: Vec<u64> = (0..5).collect();
    let mut jobs: Vec<(String, RunConfig)> = Vec::new();
    let mk = |algo: Algo, data: &PathBuf, bc: Option<&PathBuf>, lambda: f64, offset: bool, seed: u64, name: &str| {
        let mut c = RunConfig::new(algo, data, root.join(format!("{name}-s{seed}")));
        c.bc_checkpoint = bc.cloned();
        c.seed = seed;
        c.total_steps = 10_000;
        c.batch_size = 128;
        c.critic.lambda = lambda;
        c.critic.use_offset_representation = offset;
        (format!("{name}"), c)
    };
    for &s in &seeds {
        jobs.push(mk(Algo::FisherBrc, &med_path, Some(&bc_med), 0.1, true, s, "fbrc01-med"));
        jobs.push(mk(Algo::FisherBrc, &med_path, Some(&bc_med), 0.0, true, s, "fbrc00-med"));
        jobs.push(mk(Algo::FisherBrc, &med_path, Some(&bc_med), 1.0, true, s, "fbrc10-med"));
        jobs.push(mk(Algo::Bc, &med_path, Some(&bc_med), 0.0, true, s, "bc-med"));
        jobs.push(mk(Algo::Sac, &med_path, None, 0.0, false, s, "sac-med"));
        jobs.push(mk(Algo::Sac, &med_path, None, 0.1, false, s, "gp-noofs-med"));
        jobs.push(mk(Algo::FisherBrc, &exp_path, Some(&bc_exp), 0.1, true, s, "fbrc01-exp"));
        jobs.push(mk(Algo::FisherBrc, &exp_path, Some(&bc_exp), 1.0, true, s, "fbrc10-exp"));
        jobs.push(mk(Algo::FisherBrc, &exp_path, Some(&bc_exp), 0.0, true, s, "fbrc00-exp"));
    }
    let results: Vec<(String, u64, Option<f64>, Option<u64>)> = jobs
        .par_iter()
        .map(|(name, cfg)| {
            let art = run_training(cfg).unwrap();
            (name.clone(), cfg.seed, Some(art.summary.final_normalized_return), art.summary.collapsed_at)
        })
        .collect();
    println!("runs done at {:.0}s", t0.elapsed().as_secs_f64());
    let mut names: Vec<String> = results.iter().map(|r| r.0.clone()).collect();
    names.sort(); names.dedup();
    for n in names {
        let scores: Vec<String> = results.iter().filter(|r| r.0 == n).map(|r| {
            match r.3 { Some(st) => format!("COLLAPSE@{st}"), None => format!("{:.1}", r.2.unwrap()) }
        }).collect();
        let fin: Vec<f64> = results.iter().filter(|r| r.0 == n && r.3.is_none()).map(|r| r.2.unwrap()).collect();
        let mean = if fin.is_empty() { f64::NAN } else { fin.iter().sum::<f64>() / fin.len() as f64 };
        println!("{n:<14} mean {mean:7.1}  [{}]", scores.join(", "));
    }
}
