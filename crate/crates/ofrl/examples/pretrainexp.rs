use ofrl::env::*;
use std::time::Instant;

fn main() {
    let spec = PointMassSpec::default();
    let cfg = OnlineSacConfig::default();
    let t0 = Instant::now();
    match train_online_sac(&spec, &cfg, 0) {
        Ok(out) => {
            println!("random_ref {:.2} expert_ref {:.2}", out.refs.random_score, out.refs.expert_score);
            for (s, r) in &out.eval_trace {
                println!("step {s}: return {r:.2} normalized {:.1}", out.refs.normalize(*r));
            }
            let med = eval_trace_score(&out);
            println!("medium policy normalized: {:.1}", med);
        }
        Err(e) => println!("FAILED: {e}"),
    }
    println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
}

fn eval_trace_score(out: &PretrainedPolicies) -> f64 {
    let r = evaluate_policy(EnvKind::Pointmass, &out.medium, 10, 7, &out.refs);
    r.normalized_return
}
