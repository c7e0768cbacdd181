use gaussrefine::model::WeightVector;
use gaussrefine::oracle;
use gaussrefine::solver::{solve_weighted, SolveOptions};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let mut worst_resid = 0.0f64;
    let mut worst_spread = 0.0f64;
    let mut fails = 0;
    for seed in 0..50u64 {
        let p = 1 + (seed as usize % 3);
        let l = 1 + ((seed / 3) as usize % 3);
        let inst = oracle::random_instance(seed, p, l);
        let mu: Vec<f64> = (0..l).map(|i| 1.0 - 0.3 * i as f64 / l as f64).collect();
        let w = WeightVector::new(mu).unwrap();
        let mut objectives = Vec::new();
        for s in 0..4u64 {
            let opts = SolveOptions { seed: 1000 + s, ..Default::default() };
            match solve_weighted(&inst, &w, &opts) {
                Ok(r) => {
                    worst_resid = worst_resid.max(r.residuals.max_residual());
                    objectives.push(r.objective());
                }
                Err(e) => {
                    println!("seed {seed} (p={p} L={l}) start-seed {s}: FAIL {e}");
                    fails += 1;
                }
            }
        }
        if objectives.len() >= 2 {
            let mn = objectives.iter().cloned().fold(f64::INFINITY, f64::min);
            let mx = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            worst_spread = worst_spread.max(mx - mn);
            if mx - mn > 1e-6 { println!("seed {seed}: spread {:.3e} objs {objectives:?}", mx-mn); }
        }
    }
    println!("elapsed {:.2?}s worst_resid {worst_resid:.3e} worst_spread {worst_spread:.3e} fails {fails}", t0.elapsed());
}
