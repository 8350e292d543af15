//! Classical reference methods: restricted open-shell Hartree-Fock and
//! full configuration interaction.
//!
//! Both operate on the same three-spatial-orbital problem as the hybrid
//! solver. ROHF supplies the starting orbitals and the mean-field baseline;
//! FCI diagonalizes the doublet Sz = +1/2 sector (nine determinants) and
//! supplies the exact energy, reduced density matrices and natural
//! occupation numbers that the solver and the acceptance suite compare
//! against.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    slot_of, MolecularOrbitals, OrbitalSource, ReducedHamiltonian, N_SLOTS, PAIRS,
};
use crate::integrals::{lowdin_orthogonalizer, IntegralSet};
use crate::rdm::TwoRDM;

// ---------------------------------------------------------------------------
// ROHF
// ---------------------------------------------------------------------------

/// Converged ROHF result.
#[derive(Debug, Clone)]
pub struct RohfSolution {
    pub energy: f64,
    pub mos: MolecularOrbitals,
    /// Eigenvalues of the final effective Fock operator, ascending; the
    /// columns of the MOs are ordered to match (docc, socc, virtual).
    pub orbital_energies: [f64; 3],
    pub iterations: usize,
}

const SCF_MAX_ITERS: usize = 2000;
const SCF_ENERGY_TOL: f64 = 1e-10;
/// Default weight of the freshly computed density in the damped update;
/// shrunk adaptively when the energy change stops decreasing (stretched
/// geometries drive the bare Roothaan iteration into limit cycles).
const SCF_MIX_NEW: f64 = 0.7;
const SCF_MIX_MIN: f64 = 0.05;

fn coulomb(ints: &IntegralSet, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ints.n;
    let mut j = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            let mut acc = 0.0;
            for la in 0..n {
                for si in 0..n {
                    acc += d[(la, si)] * ints.eri_at(mu, nu, la, si);
                }
            }
            j[(mu, nu)] = acc;
        }
    }
    j
}

fn exchange(ints: &IntegralSet, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ints.n;
    let mut k = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            let mut acc = 0.0;
            for la in 0..n {
                for si in 0..n {
                    acc += d[(la, si)] * ints.eri_at(mu, la, nu, si);
                }
            }
            k[(mu, nu)] = acc;
        }
    }
    k
}

fn density(c: &DMatrix<f64>, n_occ: usize) -> DMatrix<f64> {
    let n = c.nrows();
    let mut d = DMatrix::zeros(n, n);
    for m in 0..n_occ {
        for mu in 0..n {
            for nu in 0..n {
                d[(mu, nu)] += c[(mu, m)] * c[(nu, m)];
            }
        }
    }
    d
}

fn rohf_energy(
    ints: &IntegralSet,
    h: &DMatrix<f64>,
    da: &DMatrix<f64>,
    db: &DMatrix<f64>,
) -> (f64, DMatrix<f64>, DMatrix<f64>) {
    let dt = da + db;
    let j = coulomb(ints, &dt);
    let ka = exchange(ints, da);
    let kb = exchange(ints, db);
    let fa = h + &j - &ka;
    let fb = h + &j - &kb;
    let mut e = ints.e_nn;
    for mu in 0..ints.n {
        for nu in 0..ints.n {
            e += 0.5
                * (dt[(mu, nu)] * h[(mu, nu)]
                    + da[(mu, nu)] * fa[(mu, nu)]
                    + db[(mu, nu)] * fb[(mu, nu)]);
        }
    }
    (e, fa, fb)
}

/// Eigenvectors of a symmetric matrix, columns sorted by ascending
/// eigenvalue.
fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Effective ROHF Fock operator in the current MO basis. Spaces by
/// column: 0 = doubly occupied, 1 = singly occupied, 2 = virtual. The
/// closed-open coupling is driven by the beta Fock, open-virtual by the
/// alpha Fock, everything else keeps the spin average; zeroing those
/// couplings is exactly the ROHF stationarity condition.
fn effective_fock(c: &DMatrix<f64>, fa: &DMatrix<f64>, fb: &DMatrix<f64>) -> DMatrix<f64> {
    let fam = c.transpose() * fa * c;
    let fbm = c.transpose() * fb * c;
    let mut r = (&fam + &fbm) * 0.5;
    r[(0, 1)] = fbm[(0, 1)];
    r[(1, 0)] = fbm[(1, 0)];
    r[(1, 2)] = fam[(1, 2)];
    r[(2, 1)] = fam[(2, 1)];
    r
}

/// One damped, level-shifted Roothaan iteration sequence from the core
/// guess. The shift raises the open and virtual diagonal of the effective
/// Fock (by shift/2 and shift), which slows occupied-virtual mixing
/// without moving the fixed point.
fn rohf_attempt(
    ints: &IntegralSet,
    h: &DMatrix<f64>,
    guess: &DMatrix<f64>,
    shift: f64,
) -> Result<RohfSolution> {
    let (n_alpha, n_beta) = (2usize, 1usize);
    let mut c = guess.clone();
    let mut da = density(&c, n_alpha);
    let mut db = density(&c, n_beta);
    let mut e_prev = f64::INFINITY;
    let mut last_delta = f64::INFINITY;
    let mut prev_delta = f64::INFINITY;
    let mut mix = SCF_MIX_NEW;

    for it in 1..=SCF_MAX_ITERS {
        let (e, fa, fb) = rohf_energy(ints, &h, &da, &db);
        let mut r = effective_fock(&c, &fa, &fb);
        r[(1, 1)] += 0.5 * shift;
        r[(2, 2)] += shift;
        let (_, v) = sorted_eigen(&r);
        c = &c * v;

        let da_new = density(&c, n_alpha);
        let db_new = density(&c, n_beta);
        da = &da_new * mix + &da * (1.0 - mix);
        db = &db_new * mix + &db * (1.0 - mix);

        last_delta = (e - e_prev).abs();
        e_prev = e;
        // Shrink the mixing weight whenever the iteration stops making
        // progress; stretched geometries drive the bare iteration into
        // limit cycles, and with 3x3 matrices extra iterations are free.
        if last_delta >= prev_delta * 0.999 {
            mix = (mix * 0.7).max(SCF_MIX_MIN);
        }
        prev_delta = last_delta;
        if last_delta < SCF_ENERGY_TOL {
            // Recompute cleanly from the final orbitals: undamped
            // densities, unshifted Fock.
            let da_f = density(&c, n_alpha);
            let db_f = density(&c, n_beta);
            let (e_final, fa_f, fb_f) = rohf_energy(ints, &h, &da_f, &db_f);
            let r_f = effective_fock(&c, &fa_f, &fb_f);
            return Ok(RohfSolution {
                energy: e_final,
                mos: MolecularOrbitals::restricted(c, OrbitalSource::Rohf),
                orbital_energies: [r_f[(0, 0)], r_f[(1, 1)], r_f[(2, 2)]],
                iterations: it,
            });
        }
    }
    Err(Error::ScfDivergence {
        iterations: SCF_MAX_ITERS,
        delta_e: last_delta,
    })
}

/// Restricted open-shell Hartree-Fock for the doublet (2 alpha, 1 beta).
///
/// Uses the single effective Fock operator whose off-diagonal blocks
/// enforce the ROHF stationarity conditions, density damping, and an
/// escalating level shift when the plain iteration refuses to settle.
/// Near dissociation the SCF landscape splits into several stationary
/// solutions (including symmetry-broken ones), so a small deterministic
/// set of starting guesses is tried and the lowest converged energy wins.
pub fn rohf(ints: &IntegralSet) -> Result<RohfSolution> {
    if ints.n != 3 {
        return Err(Error::Precondition(format!(
            "ROHF reference expects 3 orbitals, got {}",
            ints.n
        )));
    }
    let h = ints.core_hamiltonian();
    let x = lowdin_orthogonalizer(&ints.s)?;

    // Core guess in the orthogonalized basis.
    let h_ortho = x.transpose() * &h * &x;
    let (_, u) = sorted_eigen(&h_ortho);
    let guess = &x * u;

    let mut guesses = vec![guess.clone()];
    {
        // Occupation-swapped start: catches solutions where the singly and
        // doubly occupied characters trade places.
        let mut g = guess.clone();
        g.swap_columns(0, 1);
        guesses.push(g);
    }
    for &(p, q) in &[(0usize, 1usize), (1usize, 2usize), (0usize, 2usize)] {
        // Half-mixed starts seed symmetry-broken branches that the exactly
        // symmetric core guess can never reach.
        let mut rot = DMatrix::identity(3, 3);
        let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
        rot[(p, p)] = c;
        rot[(q, q)] = c;
        rot[(p, q)] = -s;
        rot[(q, p)] = s;
        guesses.push(&guess * rot);
    }

    let mut best: Option<RohfSolution> = None;
    let mut last_err = None;
    for g in &guesses {
        for &shift in &[0.0, 0.25, 1.0, 4.0] {
            match rohf_attempt(ints, &h, g, shift) {
                Ok(sol) => {
                    if best.as_ref().map_or(true, |b| sol.energy < b.energy) {
                        best = Some(sol);
                    }
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.ok_or_else(|| last_err.expect("at least one SCF attempt ran"))
}

/// Spin-orbital 1-RDM of the ROHF determinant in its own MO slot basis.
pub fn hf_determinant_1rdm() -> DMatrix<f64> {
    let mut d = DMatrix::zeros(N_SLOTS, N_SLOTS);
    for s in 0..3 {
        d[(s, s)] = 1.0;
    }
    d
}

// ---------------------------------------------------------------------------
// FCI
// ---------------------------------------------------------------------------

/// Full CI result in the Sz = +1/2 sector.
#[derive(Debug, Clone)]
pub struct FciResult {
    pub energy: f64,
    /// Determinants as 6-bit slot masks, fixed enumeration order.
    pub dets: Vec<u8>,
    /// Ground-state CI coefficients; overall sign fixed so the largest
    /// component is positive.
    pub ci: Vec<f64>,
    pub one_rdm: DMatrix<f64>,
    pub two_rdm: TwoRDM,
    /// Natural occupations sorted descending.
    pub natural_occupations: [f64; N_SLOTS],
    pub s_squared: f64,
}

/// The nine Sz = +1/2 determinants: two alpha electrons (slots {0,1,3})
/// times one beta electron (slots {2,4,5}), alpha-major order.
pub fn fci_determinants() -> Vec<u8> {
    let alpha_slots = [0usize, 1, 3];
    let beta_slots = [2usize, 4, 5];
    let mut dets = Vec::with_capacity(9);
    for i in 0..3 {
        for j in (i + 1)..3 {
            let amask = (1u8 << alpha_slots[i]) | (1 << alpha_slots[j]);
            for &b in &beta_slots {
                dets.push(amask | (1 << b));
            }
        }
    }
    dets
}

fn occupied_slots(mask: u8) -> Vec<usize> {
    (0..N_SLOTS).filter(|&s| mask & (1 << s) != 0).collect()
}

/// Parity sign of the occupied slots strictly between `a` and `b` in `det`.
fn between_sign(det: u8, a: usize, b: usize) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mask = ((1u16 << hi) - 1) as u8 & !(((1u16 << (lo + 1)) - 1) as u8);
    if (det & mask).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Slater-Condon matrix element between two determinants.
fn sc_element(ham: &ReducedHamiltonian, d1: u8, d2: u8) -> f64 {
    let diff = d1 ^ d2;
    match diff.count_ones() {
        0 => {
            let occ = occupied_slots(d1);
            let mut e = 0.0;
            for (a, &i) in occ.iter().enumerate() {
                e += ham.h_spin(i, i);
                for &j in occ.iter().skip(a + 1) {
                    e += ham.v_antisym(i, j, i, j);
                }
            }
            e
        }
        2 => {
            let m = (d1 & !d2).trailing_zeros() as usize;
            let p = (d2 & !d1).trailing_zeros() as usize;
            let common = d1 & d2;
            let mut e = ham.h_spin(m, p);
            for k in occupied_slots(common) {
                e += ham.v_antisym(m, k, p, k);
            }
            between_sign(d1, m, p) * e
        }
        4 => {
            let holes = occupied_slots(d1 & !d2);
            let parts = occupied_slots(d2 & !d1);
            let (m, n) = (holes[0], holes[1]);
            let (p, q) = (parts[0], parts[1]);
            let s1 = between_sign(d1, m, p);
            let mid = (d1 & !(1 << m)) | (1 << p);
            let s2 = between_sign(mid, n, q);
            s1 * s2 * ham.v_antisym(m, n, p, q)
        }
        _ => 0.0,
    }
}

fn parity_below(mask: u8, slot: usize) -> f64 {
    if (mask & ((1u8 << slot) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Exact diagonalization in the nine-determinant doublet sector.
pub fn fci(ham: &ReducedHamiltonian) -> Result<FciResult> {
    let dets = fci_determinants();
    let nd = dets.len();
    let mut det_index = vec![None; 64];
    for (i, &d) in dets.iter().enumerate() {
        det_index[d as usize] = Some(i);
    }

    let mut h = DMatrix::zeros(nd, nd);
    for i in 0..nd {
        for j in 0..nd {
            h[(i, j)] = sc_element(ham, dets[i], dets[j]);
        }
    }

    let (vals, vecs) = sorted_eigen(&h);
    let e_elec = vals[0];
    let mut ci: Vec<f64> = vecs.column(0).iter().copied().collect();
    // Deterministic global sign: largest component positive.
    let imax = (0..nd)
        .max_by(|&a, &b| ci[a].abs().total_cmp(&ci[b].abs()))
        .expect("nonempty CI vector");
    if ci[imax] < 0.0 {
        for c in &mut ci {
            *c = -*c;
        }
    }

    // One-particle RDM: <a+_i a_j>.
    let mut one_rdm = DMatrix::zeros(N_SLOTS, N_SLOTS);
    for (di, &d) in dets.iter().enumerate() {
        if ci[di] == 0.0 {
            continue;
        }
        for j in occupied_slots(d) {
            let s1 = parity_below(d, j);
            let removed = d & !(1 << j);
            for i in 0..N_SLOTS {
                if removed & (1 << i) != 0 {
                    continue;
                }
                let s2 = parity_below(removed, i);
                let created = removed | (1 << i);
                if let Some(db) = det_index[created as usize] {
                    one_rdm[(i, j)] += ci[db] * ci[di] * s1 * s2;
                }
            }
        }
    }

    // Two-particle RDM in the ordered-pair basis: <a+_i a+_j a_l a_k>.
    let mut two = TwoRDM::zeros();
    for (di, &d) in dets.iter().enumerate() {
        if ci[di] == 0.0 {
            continue;
        }
        for (col, &(k, l)) in PAIRS.iter().enumerate() {
            if d & (1 << k) == 0 {
                continue;
            }
            let sk = parity_below(d, k);
            let m1 = d & !(1 << k);
            if m1 & (1 << l) == 0 {
                continue;
            }
            let sl = parity_below(m1, l);
            let m2 = m1 & !(1 << l);
            for (row, &(i, j)) in PAIRS.iter().enumerate() {
                if m2 & (1 << j) != 0 {
                    continue;
                }
                let sj = parity_below(m2, j);
                let m3 = m2 | (1 << j);
                if m3 & (1 << i) != 0 {
                    continue;
                }
                let si = parity_below(m3, i);
                let m4 = m3 | (1 << i);
                if let Some(db) = det_index[m4 as usize] {
                    two.mat[(row, col)] += ci[db] * ci[di] * sk * sl * sj * si;
                }
            }
        }
    }

    // Natural occupations: eigenvalues of the (block-diagonal) 1-RDM.
    let eig = one_rdm.clone().symmetric_eigen();
    let mut nat: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nat.sort_by(|a, b| b.total_cmp(a));
    let natural_occupations: [f64; N_SLOTS] = nat.try_into().expect("six occupations");

    // S^2 = S- S+ + Sz(Sz + 1) with Sz = 1/2: apply the spin-raising
    // operator determinant-wise; the doublet ground state is annihilated.
    let mut s_plus_norm2 = 0.0;
    {
        use std::collections::BTreeMap;
        let mut raised: BTreeMap<u8, f64> = BTreeMap::new();
        for (di, &d) in dets.iter().enumerate() {
            for m in 0..3 {
                let from = slot_of(m, false);
                let to = slot_of(m, true);
                if d & (1 << from) == 0 || d & (1 << to) != 0 {
                    continue;
                }
                let s1 = parity_below(d, from);
                let removed = d & !(1 << from);
                let s2 = parity_below(removed, to);
                let new_det = removed | (1 << to);
                *raised.entry(new_det).or_insert(0.0) += ci[di] * s1 * s2;
            }
        }
        for v in raised.values() {
            s_plus_norm2 += v * v;
        }
    }
    let s_squared = s_plus_norm2 + 0.5 * 1.5;

    Ok(FciResult {
        energy: e_elec + ham.e_nn,
        dets,
        ci,
        one_rdm,
        two_rdm: two,
        natural_occupations,
        s_squared,
    })
}

/// The generalized Pauli constraint residual n5 + n6 - n4 of a sorted
/// descending occupation spectrum; zero means exactly pinned.
pub fn pinning_defect(natural_occupations: &[f64; N_SLOTS]) -> f64 {
    natural_occupations[4] + natural_occupations[5] - natural_occupations[3]
}
