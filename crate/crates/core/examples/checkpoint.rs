use std::time::Instant;
use zzest::bayes::*;

fn main() {
    let start = Instant::now();
    let hp = run_protocol(&BayesConfig::new(Scheme::Hybrid, SampleKind::Perfect, 20)).unwrap();
    println!("hybrid/perfect: mse {:.3e} ({:.0}s)", hp.mse, start.elapsed().as_secs_f64());
    for seed in [20u64, 37] {
        let t = Instant::now();
        let hi = run_protocol(&BayesConfig::new(Scheme::Hybrid, SampleKind::Imperfect, seed)).unwrap();
        println!("hybrid/imperfect seed {seed}: mse {:.3e} ({:.0}s)", hi.mse, t.elapsed().as_secs_f64());
    }
}
