use gaussrefine::extremal::*;
use gaussrefine::model::WeightVector;
use gaussrefine::oracle;
use gaussrefine::region::aux_spec_from_alloc;
use gaussrefine::solver::{solve_weighted, SolveOptions};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let mut worst_mono = 0.0f64;
    let mut worst_end0_coarse = 0.0f64;
    let mut worst_end1_coarse = 0.0f64;
    let mut worst_end0_fine = 0.0f64;
    let mut worst_end1_fine = 0.0f64;
    let mut worst_dx = 0.0f64;
    let mut worst_dy = 0.0f64;
    let mut worst_inv = 0.0f64;
    let mut worst_ei_margin = f64::INFINITY;
    let mut worst_tight = 0.0f64;
    let mut worst_offset = 0.0f64;
    for trial in 0..20u64 {
        let p = 1 + (trial as usize % 3);
        let l = 1 + ((trial / 2) as usize % 3);
        let inst = oracle::random_instance(trial * 31 + 1, p, l);
        let mu: Vec<f64> = (0..l).map(|i| 1.0 - 0.4 * i as f64 / l.max(1) as f64).collect();
        let w = WeightVector::new(mu).unwrap();
        let opts = SolveOptions { seed: trial, ..Default::default() };
        let sol = match solve_weighted(&inst, &w, &opts) {
            Ok(r) => r,
            Err(e) => { println!("trial {trial} (p={p} L={l}): solve FAIL {e}"); continue; }
        };
        let alloc = &sol.allocation;
        let aux = if trial % 2 == 0 {
            aux_spec_from_alloc(&inst, alloc, 1e-8).unwrap()
        } else {
            oracle::random_feasible_aux(trial + 500, &inst, alloc).unwrap()
        };
        // Monotonicity on 101 points.
        let rep = check_g_monotone(&inst, alloc, &aux, &w, 101).unwrap();
        worst_mono = worst_mono.max(rep.worst_violation);
        // Endpoints.
        let lhs = ei_lhs_entropic(&inst, &aux, &w).unwrap();
        let end = ei_rhs_endpoint(&inst, alloc, &w).unwrap();
        let printed = ei_rhs_printed(&inst, alloc, &w).unwrap();
        for (margin, w0, w1) in [(1e-4, &mut worst_end0_coarse, &mut worst_end1_coarse),
                                 (1e-7, &mut worst_end0_fine, &mut worst_end1_fine)] {
            let g0 = eval_g(&build_path_joint(&inst, alloc, &aux, margin).unwrap(), &w).unwrap();
            let g1 = eval_g(&build_path_joint(&inst, alloc, &aux, 1.0 - margin).unwrap(), &w).unwrap();
            *w0 = w0.max((g0 - lhs).abs());
            *w1 = w1.max((g1 - end).abs());
        }
        // Derivatives at {0.1, 0.5, 0.9}.
        for gamma in [0.1, 0.5, 0.9] {
            let rx = derivative_x_check(&inst, alloc, &aux, &w, gamma, 1e-5).unwrap();
            worst_dx = worst_dx.max(rx.worst_rel_err);
            let ry = derivative_y_check(&inst, alloc, &aux, &w, gamma, 1e-5).unwrap();
            worst_dy = worst_dy.max(ry.worst_rel_err);
            worst_inv = worst_inv.max(invariance_check(&inst, alloc, &aux, gamma, 1e-5).unwrap());
        }
        // EI margins.
        let v = ei_verify(&inst, alloc, &sol.certificate, &aux, &w).unwrap();
        if !v.pass { println!("trial {trial}: EI verdict failed {:?}", v.failures); }
        worst_ei_margin = worst_ei_margin.min(v.margin_endpoint);
        worst_offset = worst_offset.max((v.offset - v.offset_expected).abs());
        // Tightness at canonical aux.
        let canon = aux_spec_from_alloc(&inst, alloc, 1e-8).unwrap();
        let lhs_c = ei_lhs_entropic(&inst, &canon, &w).unwrap();
        worst_tight = worst_tight.max((lhs_c - end).abs());
        let _ = (lhs, printed);
    }
    println!("mono {worst_mono:.3e}");
    println!("end0 coarse {worst_end0_coarse:.3e} fine {worst_end0_fine:.3e}");
    println!("end1 coarse {worst_end1_coarse:.3e} fine {worst_end1_fine:.3e}");
    println!("dx {worst_dx:.3e} dy {worst_dy:.3e} inv {worst_inv:.3e}");
    println!("ei min margin {worst_ei_margin:.3e} tight {worst_tight:.3e} offset {worst_offset:.3e}");
    println!("elapsed {:.2?}", t0.elapsed());
}
