//! Scratch diagnostic: macro-loop behavior at stretched geometries and the
//! full exact dissociation scan against FCI.

use gpcsolve_core::hamiltonian::build_reduced_hamiltonian;
use gpcsolve_core::integrals::linear_h3_integrals;
use gpcsolve_core::reference::{fci, rohf};
use gpcsolve_core::solver::{macro_loop, scan, SolverConfig};

fn grid(r_min: f64, r_max: f64, step: f64) -> Vec<f64> {
    let n = ((r_max - r_min) / step).round() as usize;
    (0..=n).map(|i| r_min + step * i as f64).collect()
}

fn main() {
    let config = SolverConfig::default();

    for &r in &[2.0_f64, 2.2, 2.6] {
        let ints = linear_h3_integrals(r).unwrap();
        let hf = rohf(&ints).unwrap();
        let ham = build_reduced_hamiltonian(&ints, &hf.mos).unwrap();
        let exact = fci(&ham).unwrap();
        let out = macro_loop(&config, &ints, None).unwrap();
        println!(
            "R = {r}: err = {:+.4} mH after {} macros (conv = {})",
            (out.energy - exact.energy) * 1e3,
            out.macro_iters,
            out.converged
        );
        for m in &out.trace.macros {
            println!(
                "   macro {}: e_q = {:+.4} e_o = {:+.4} mH  theta = ({:.3}, {:.3})  apps = {}  qev = {} oev = {}",
                m.index,
                (m.e_quantum - exact.energy) * 1e3,
                (m.e_orbital - exact.energy) * 1e3,
                m.theta[0],
                m.theta[1],
                m.rotation_applications,
                m.quantum_evals,
                m.orbital_evals
            );
        }
    }

    let rs = grid(0.6, 3.0, 0.2);

    println!("--- full exact scan, default config, warm-started (1 thread) ---");
    let t0 = std::time::Instant::now();
    let points = scan(&config, &rs);
    let dt = t0.elapsed();
    let mut worst = 0.0_f64;
    for p in &points {
        match &p.record {
            Some(rec) => {
                println!(
                    "R = {:.1}: err = {:+.4} mH  macros = {:2}  conv = {}",
                    rec.r_angstrom, rec.error_mh, rec.macro_iters, rec.converged
                );
                worst = worst.max(rec.error_mh.abs());
            }
            None => println!("R = {:.1}: FAILED: {:?}", p.r_angstrom, p.failure),
        }
    }
    println!("worst |err| = {:.4} mH, {} points in {:?}", worst, points.len(), dt);

    println!("--- same scan, 4 threads (independent cold starts) ---");
    let mut cfg4 = config.clone();
    cfg4.scan_threads = 4;
    let t0 = std::time::Instant::now();
    let points = scan(&cfg4, &rs);
    let dt = t0.elapsed();
    let mut worst = 0.0_f64;
    for p in &points {
        match &p.record {
            Some(rec) => {
                println!(
                    "R = {:.1}: err = {:+.4} mH  macros = {:2}  conv = {}",
                    rec.r_angstrom, rec.error_mh, rec.macro_iters, rec.converged
                );
                worst = worst.max(rec.error_mh.abs());
            }
            None => println!("R = {:.1}: FAILED: {:?}", p.r_angstrom, p.failure),
        }
    }
    println!("worst |err| = {:.4} mH, {} points in {:?}", worst, points.len(), dt);
}
