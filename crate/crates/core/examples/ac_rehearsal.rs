//! Scratch rehearsal of the noisy acceptance criteria.

use gpcsolve_core::hamiltonian::build_reduced_hamiltonian;
use gpcsolve_core::integrals::linear_h3_integrals;
use gpcsolve_core::qdevice::builtin_calibration;
use gpcsolve_core::reference::{fci, rohf};
use gpcsolve_core::solver::{macro_loop, RunMode, SolverConfig};

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn main() {
    let r = 1.34;
    let ints = linear_h3_integrals(r).unwrap();
    let hf = rohf(&ints).unwrap();
    let ham = build_reduced_hamiltonian(&ints, &hf.mos).unwrap();
    let e_fci = fci(&ham).unwrap().energy;
    let noise = builtin_calibration(1).unwrap();

    let base = SolverConfig {
        mode: RunMode::Noisy,
        noise: Some(noise),
        ..SolverConfig::default()
    };

    // 20-seed medians, mitigation on vs off on identical seeds.
    let mut on_err = Vec::new();
    let mut off_err = Vec::new();
    let mut on_q = Vec::new();
    let mut off_q = Vec::new();
    let mut iters = Vec::new();
    let t0 = std::time::Instant::now();
    for seed in 0..20u64 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let out_on = macro_loop(&cfg, &ints, None).unwrap();
        on_err.push((out_on.energy - e_fci) * 1e3);
        on_q.push((out_on.e_quantum - e_fci) * 1e3);
        iters.push(out_on.macro_iters as f64);
        cfg.mitigation = false;
        let out_off = macro_loop(&cfg, &ints, None).unwrap();
        off_err.push((out_off.energy - e_fci) * 1e3);
        off_q.push((out_off.e_quantum - e_fci) * 1e3);
        if seed < 6 {
            println!(
                "  seed {seed}: ON err {:+.4} q {:+.4} occ ({:.4},{:.4},{:.4}) | OFF err {:+.4} q {:+.4} occ ({:.4},{:.4},{:.4})",
                on_err.last().unwrap(),
                on_q.last().unwrap(),
                out_on.occupations[0],
                out_on.occupations[1],
                out_on.occupations[2],
                off_err.last().unwrap(),
                off_q.last().unwrap(),
                out_off.occupations[0],
                out_off.occupations[1],
                out_off.occupations[2],
            );
        }
    }
    println!("20-seed noisy R=1.34 in {:?}", t0.elapsed());
    println!(
        "  ON : median err = {:.4} mH  (min {:.4}, max {:.4})  median e_q err = {:.4}",
        median(&mut on_err.clone()),
        on_err.iter().cloned().fold(f64::INFINITY, f64::min),
        on_err.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        median(&mut on_q.clone()),
    );
    println!(
        "  OFF: median err = {:.4} mH  median e_q err = {:.4}",
        median(&mut off_err.clone()),
        median(&mut off_q.clone())
    );
    println!("  median iters = {}", median(&mut iters.clone()));
    let wins = on_err.iter().zip(&off_err).filter(|(a, b)| a < b).count();
    println!("  ON beats OFF on {wins}/20 seeds");

    // 50-seed floor check across mitigation settings.
    let t0 = std::time::Instant::now();
    let mut worst = f64::INFINITY;
    let mut n_evals = 0usize;
    for seed in 100..150u64 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.mitigation = seed % 2 == 0;
        let out = macro_loop(&cfg, &ints, None).unwrap();
        for ev in &out.trace.evals {
            n_evals += 1;
            let slack = ev.energy - (e_fci - 1e-9);
            if slack < worst {
                worst = slack;
            }
        }
    }
    println!(
        "50-seed floor sweep in {:?}: {} evals, min(E - (E_fci - 1e-9)) = {:+.3e} Ha",
        t0.elapsed(),
        n_evals,
        worst
    );
}
