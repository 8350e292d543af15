//! Second-quantization oracle over six spin orbitals.
//!
//! States are linear combinations of determinants encoded as bitmasks:
//! bit i (0-based) set means spin orbital i+1 (1-based labels 1..=6) is
//! occupied, and |m1 m2 ...> denotes creation operators applied in ascending
//! label order to the vacuum. Operators are applied literally, fermionic
//! signs and all, which makes this slow and obviously correct.

use std::collections::BTreeMap;

/// Wavefunction as mask -> coefficient.
pub type Wf = BTreeMap<u8, f64>;

/// GPC slot (1-based label i+1) -> spatial orbital index 0..3.
pub const SLOT_SPATIAL: [usize; 6] = [0, 1, 0, 2, 1, 2];
/// GPC slot -> alpha spin?
pub const SLOT_ALPHA: [bool; 6] = [true, true, false, true, false, false];

/// Determinants of the pinned expansion, as masks over labels 1..=6:
/// |111000>, |100110>, |010101>.
pub const DET_A: u8 = 0b000111;
pub const DET_B: u8 = 0b011001;
pub const DET_C: u8 = 0b101010;

fn parity_below(mask: u8, orb: usize) -> f64 {
    let below = mask & ((1u8 << orb) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Apply the annihilation operator a_orb (orb is a 1-based label).
pub fn annihilate(wf: &Wf, orb: usize) -> Wf {
    let bit = orb - 1;
    let mut out = Wf::new();
    for (&mask, &coef) in wf {
        if mask & (1 << bit) != 0 {
            let sign = parity_below(mask, bit);
            *out.entry(mask & !(1 << bit)).or_insert(0.0) += sign * coef;
        }
    }
    out
}

/// Apply the creation operator a†_orb (orb is a 1-based label).
pub fn create(wf: &Wf, orb: usize) -> Wf {
    let bit = orb - 1;
    let mut out = Wf::new();
    for (&mask, &coef) in wf {
        if mask & (1 << bit) == 0 {
            let sign = parity_below(mask, bit);
            *out.entry(mask | (1 << bit)).or_insert(0.0) += sign * coef;
        }
    }
    out
}

pub fn inner(bra: &Wf, ket: &Wf) -> f64 {
    let mut acc = 0.0;
    for (mask, c) in bra {
        if let Some(d) = ket.get(mask) {
            acc += c * d;
        }
    }
    acc
}

pub fn unit(mask: u8) -> Wf {
    let mut wf = Wf::new();
    wf.insert(mask, 1.0);
    wf
}

pub fn scale_add(acc: &mut Wf, wf: &Wf, factor: f64) {
    if factor == 0.0 {
        return;
    }
    for (&mask, &c) in wf {
        *acc.entry(mask).or_insert(0.0) += factor * c;
    }
}

/// The pinned three-determinant state with amplitudes
/// (p_alpha sqrt(1-n5-n6), p_beta sqrt(n5), sqrt(n6)).
pub fn pinned_wavefunction(n5: f64, n6: f64, p_alpha: f64, p_beta: f64) -> Wf {
    let a2 = (1.0 - n5 - n6).max(0.0);
    let mut wf = Wf::new();
    wf.insert(DET_A, p_alpha * a2.sqrt());
    wf.insert(DET_B, p_beta * n5.max(0.0).sqrt());
    wf.insert(DET_C, n6.max(0.0).sqrt());
    wf
}

/// <psi| a†_i a†_j a_l a_k |psi> with 1-based labels — the (ij),(kl) element
/// of the 2-RDM in the ordered-pair convention.
pub fn rdm2_element(wf: &Wf, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let mut ket = annihilate(wf, k);
    ket = annihilate(&ket, l);
    ket = create(&ket, j);
    ket = create(&ket, i);
    inner(wf, &ket)
}

/// <psi| a†_i a_j |psi> with 1-based labels.
pub fn rdm1_element(wf: &Wf, i: usize, j: usize) -> f64 {
    let ket = annihilate(wf, j);
    let ket = create(&ket, i);
    inner(wf, &ket)
}

/// Spin-orbital integrals over the six GPC slots, derived from a spatial
/// one-electron matrix (3x3, row-major) and chemists'-notation spatial ERI
/// (index ((p*3+q)*3+r)*3+s for (pq|rs)).
pub struct SpinOrbIntegrals {
    pub h: [[f64; 6]; 6],
    /// Physicists' notation <ij|kl>, flattened over 1-based labels minus 1.
    pub v: Vec<f64>,
}

impl SpinOrbIntegrals {
    pub fn from_spatial(h_spatial: &[[f64; 3]; 3], eri_chem: &[f64]) -> Self {
        assert_eq!(eri_chem.len(), 81);
        let mut h = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                if SLOT_ALPHA[i] == SLOT_ALPHA[j] {
                    h[i][j] = h_spatial[SLOT_SPATIAL[i]][SLOT_SPATIAL[j]];
                }
            }
        }
        let mut v = vec![0.0; 1296];
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    for l in 0..6 {
                        // <ij|kl> = (ik|jl) delta(sigma_i,sigma_k) delta(sigma_j,sigma_l)
                        if SLOT_ALPHA[i] == SLOT_ALPHA[k] && SLOT_ALPHA[j] == SLOT_ALPHA[l] {
                            let (p, q, r, s) = (
                                SLOT_SPATIAL[i],
                                SLOT_SPATIAL[k],
                                SLOT_SPATIAL[j],
                                SLOT_SPATIAL[l],
                            );
                            v[((i * 6 + j) * 6 + k) * 6 + l] =
                                eri_chem[((p * 3 + q) * 3 + r) * 3 + s];
                        }
                    }
                }
            }
        }
        SpinOrbIntegrals { h, v }
    }

    fn v_at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.v[(((i - 1) * 6 + (j - 1)) * 6 + (k - 1)) * 6 + (l - 1)]
    }
}

/// Apply H = sum h_ij a†_i a_j + (1/2) sum <ij|kl> a†_i a†_j a_l a_k.
pub fn apply_hamiltonian(wf: &Wf, ints: &SpinOrbIntegrals) -> Wf {
    let mut out = Wf::new();
    for i in 1..=6 {
        for j in 1..=6 {
            let hij = ints.h[i - 1][j - 1];
            if hij == 0.0 {
                continue;
            }
            let term = create(&annihilate(wf, j), i);
            scale_add(&mut out, &term, hij);
        }
    }
    for i in 1..=6 {
        for j in 1..=6 {
            for k in 1..=6 {
                for l in 1..=6 {
                    let vijkl = ints.v_at(i, j, k, l);
                    if vijkl == 0.0 {
                        continue;
                    }
                    let mut term = annihilate(wf, k);
                    term = annihilate(&term, l);
                    term = create(&term, j);
                    term = create(&term, i);
                    scale_add(&mut out, &term, 0.5 * vijkl);
                }
            }
        }
    }
    out
}

/// <psi|H|psi> for a normalized state (no normalization is applied here).
pub fn expectation_h(wf: &Wf, ints: &SpinOrbIntegrals) -> f64 {
    inner(wf, &apply_hamiltonian(wf, ints))
}

/// <bra|H|ket> between two determinant masks — the Slater-Condon oracle.
pub fn hamiltonian_element(bra: u8, ket: u8, ints: &SpinOrbIntegrals) -> f64 {
    inner(&unit(bra), &apply_hamiltonian(&unit(ket), ints))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn creation_annihilation_signs() {
        // a†_2 a†_1 |vac> = |110000 reversed labels> must equal -a†_1 a†_2 |vac>.
        let vac = unit(0);
        let ab = create(&create(&vac, 1), 2);
        let ba = create(&create(&vac, 2), 1);
        let mask = 0b000011;
        assert!((ab[&mask] + ba[&mask]).abs() < 1e-15);
    }

    #[test]
    fn pinned_state_norm_and_occupations() {
        let wf = pinned_wavefunction(0.2, 0.1, -1.0, 1.0);
        let norm = inner(&wf, &wf);
        assert!((norm - 1.0).abs() < 1e-14);
        // n5 slot is label 5, occupied only by DET_B.
        assert!((rdm1_element(&wf, 5, 5) - 0.2).abs() < 1e-14);
        assert!((rdm1_element(&wf, 6, 6) - 0.1).abs() < 1e-14);
        assert!((rdm1_element(&wf, 1, 1) - 0.9).abs() < 1e-14);
    }

    #[test]
    fn rdm2_diagonal_counts_pairs() {
        // For a single determinant, <a†_i a†_j a_j a_i> = 1 iff both occupied.
        let wf = unit(DET_A);
        assert!((rdm2_element(&wf, 1, 2, 1, 2) - 1.0).abs() < 1e-15);
        assert!((rdm2_element(&wf, 1, 4, 1, 4)).abs() < 1e-15);
    }
}
