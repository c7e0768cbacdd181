use gaussrefine::linalg;
use gaussrefine::model::WeightVector;
use gaussrefine::oracle;
use gaussrefine::solver::{solve_weighted, SolveOptions, SolverError};

fn main() {
    for trial in [2u64, 14] {
        let p = 1 + (trial as usize % 3);
        let l = 1 + ((trial / 2) as usize % 3);
        let inst = oracle::random_instance(trial * 31 + 1, p, l);
        let mu: Vec<f64> = (0..l).map(|i| 1.0 - 0.4 * i as f64 / l.max(1) as f64).collect();
        let w = WeightVector::new(mu).unwrap();
        let opts = SolveOptions { seed: trial, max_iters: 20000, ..Default::default() };
        let best = match solve_weighted(&inst, &w, &opts) {
            Ok(r) => { println!("trial {trial}: converged obj {:.9} res {:.3e} iters {}", r.objective(), r.residuals.max_residual(), r.iterations); r }
            Err(SolverError::NotConverged { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        println!("trial {trial} p={p} l={l} obj {:.9} res {:.3e} iters {}", best.objective(), best.residuals.max_residual(), best.iterations);
        for i in 1..=l {
            println!("  B{} eigs {:?}", i, linalg::eig_sym(best.allocation.b(i)).unwrap().eigenvalues.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
            let slack = linalg::inv_pd(inst.k0()).unwrap() + linalg::inv_pd(inst.k(i)).unwrap()
                + best.allocation.s(i) - linalg::inv_pd(inst.d(i)).unwrap();
            println!("  slack{} eigs {:?}", i, linalg::eig_sym(&slack).unwrap().eigenvalues.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
            println!("  psi{} eigs {:?}", i, linalg::eig_sym(&best.certificate.psi[i-1]).unwrap().eigenvalues.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
            println!("  lam{} eigs {:?}", i, linalg::eig_sym(&best.certificate.lambda[i-1]).unwrap().eigenvalues.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
        }
        for (name, v) in best.residuals.entries() {
            if *v > 1e-8 { println!("  resid {name} = {v:.3e}"); }
        }
    }
}
