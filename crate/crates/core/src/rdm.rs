//! Pinned two-particle reduced density matrices from occupation numbers.
//!
//! For three electrons in six spin orbitals, saturating the generalized
//! Pauli constraint n5 + n6 - n4 >= 0 collapses the wavefunction onto a
//! three-determinant form built from the slot sets {1,2,3}, {1,4,5} and
//! {2,4,6} (1-based). That structure makes the full 2-RDM an explicit
//! function of just two occupation numbers (n5, n6) and two relative signs,
//! which is exactly the information a sampled three-qubit device plus a
//! deterministic sign rule can provide. This module reconstructs the
//! 15 x 15 matrix, contracts it to the one-particle RDM, assigns the signs
//! as a continuous function of the circuit angles, and computes the
//! off-diagonal localization measure used to diagnose the
//! metal-to-insulator crossover.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    pair_index, slot_of, N_PAIRS, N_SLOTS,
};

/// All six natural-orbital occupation numbers of a pinned state.
///
/// Slots are 0-based here; the complement structure ties slot k to slot
/// 5 - k: n1 = 1 - n6, n2 = 1 - n5, n3 = 1 - n4 (1-based labels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationVector {
    pub n: [f64; N_SLOTS],
}

impl OccupationVector {
    /// The (n4, n5, n6) triple that parametrizes the pinned family.
    pub fn upper_triple(&self) -> (f64, f64, f64) {
        (self.n[3], self.n[4], self.n[5])
    }
}

/// Extend the (n4, n5, n6) triple to all six occupations through the
/// complement sums.
///
/// Inputs must lie on the pinned surface n4 = n5 + n6 (to 1e-12) with every
/// occupation in [0, 1]; ordering among n4, n5, n6 is *not* required, the
/// slot labels are physical.
pub fn complete_occupations(n4: f64, n5: f64, n6: f64) -> Result<OccupationVector> {
    for (name, v) in [("n4", n4), ("n5", n5), ("n6", n6)] {
        if !v.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::Precondition(format!(
                "occupation {name} = {v} is outside [0, 1]"
            )));
        }
    }
    if (n4 - (n5 + n6)).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "occupations are off the pinned surface: n4 - (n5 + n6) = {:.3e}",
            n4 - (n5 + n6)
        )));
    }
    Ok(OccupationVector {
        n: [1.0 - n6, 1.0 - n5, 1.0 - n4, n4, n5, n6],
    })
}

/// The two relative signs of the three-determinant expansion (the third is
/// gauge-fixed to +1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignAssignment {
    pub p_alpha: f64,
    pub p_beta: f64,
}

fn sgn(x: f64) -> f64 {
    // sgn(0) := +1 keeps the map total; at every zero of the argument the
    // coherence the sign multiplies vanishes as well.
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Deterministic sign rule over the circuit angles.
///
/// Requirements: all four sign combinations must be reachable (one per
/// quadrant of [0, 2pi]^2) and the reconstructed energy surface must stay
/// continuous. Both sin(theta1) and sin(theta2) change sign exactly where
/// the coherences they control vanish; the extra half-angle factor on
/// p_alpha flips it together with p_beta across theta2 = pi, where only
/// their product survives, keeping the surface seam-free.
pub fn sign_map(theta1: f64, theta2: f64) -> SignAssignment {
    SignAssignment {
        p_alpha: sgn(theta1.sin()) * sgn((theta2 / 2.0).cos()),
        p_beta: sgn(theta2.sin()),
    }
}

/// Branch-centered angle coordinate: the distance of `theta` from the
/// center of its quarter-period branch, with alternating orientation.
///
/// phi is a triangle wave with phi(0) = -pi/4, phi(pi/4) = 0,
/// phi(pi/2) = +pi/4, taking values in [-pi/4, pi/4]. It is a diagnostic
/// coordinate for how close an angle sits to a branch boundary of the
/// occupation map; the sign rule itself does not consume it.
pub fn phi(theta: f64) -> f64 {
    let k = libm::floor(2.0 * theta / std::f64::consts::PI);
    let x = theta - k * std::f64::consts::FRAC_PI_2;
    let sign = if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * (x - std::f64::consts::FRAC_PI_4)
}

/// Two-particle reduced density matrix in the ordered-pair basis,
/// convention D2[(ij),(kl)] = <a+_i a+_j a_l a_k> with i < j, k < l.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRDM {
    pub mat: DMatrix<f64>,
}

impl TwoRDM {
    pub fn zeros() -> Self {
        Self {
            mat: DMatrix::zeros(N_PAIRS, N_PAIRS),
        }
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }
}

/// Reconstruct the pinned 2-RDM from occupations and signs.
///
/// The three determinants A = {1,2,3}, B = {1,4,5}, C = {2,4,6} carry
/// weights alpha^2 = 1 - n5 - n6, n5 and n6; diagonal pair occupancies
/// count shared pairs, and the three independent coherences (with their
/// Hermitian mirrors) connect pairs that differ by a double excitation.
/// A radicand below -1e-10 is a normalization error; tiny negatives from
/// rounding are clamped to zero.
pub fn reconstruct_2rdm(occ: &OccupationVector, signs: &SignAssignment) -> Result<TwoRDM> {
    let (n4, n5, n6) = occ.upper_triple();
    if (n4 - (n5 + n6)).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "occupations are off the pinned surface: n4 - (n5 + n6) = {:.3e}",
            n4 - (n5 + n6)
        )));
    }
    if signs.p_alpha.abs() != 1.0 || signs.p_beta.abs() != 1.0 {
        return Err(Error::Precondition(format!(
            "signs must be +/-1, got ({}, {})",
            signs.p_alpha, signs.p_beta
        )));
    }
    let raw_a2 = 1.0 - n5 - n6;
    if raw_a2 < -1e-10 {
        return Err(Error::Normalization(format!(
            "determinant weight 1 - n5 - n6 = {raw_a2:.3e} is negative beyond tolerance"
        )));
    }
    let a2 = raw_a2.max(0.0);
    let (pa, pb) = (signs.p_alpha, signs.p_beta);

    let mut m = DMatrix::zeros(N_PAIRS, N_PAIRS);
    // 1-based slot pairs shared by each pair of determinants, with the
    // determinant weight each diagonal entry carries.
    let diag: [((usize, usize), f64); 9] = [
        // pairs inside A = {1,2,3}
        ((1, 2), a2),
        ((1, 3), a2),
        ((2, 3), a2),
        // pairs inside B = {1,4,5}
        ((1, 4), n5),
        ((1, 5), n5),
        ((4, 5), n5),
        // pairs inside C = {2,4,6}
        ((2, 4), n6),
        ((2, 6), n6),
        ((4, 6), n6),
    ];
    for &((i, j), w) in &diag {
        let p = pair_index(i - 1, j - 1);
        m[(p, p)] = w;
    }
    // Coherences between determinants: (row pair, column pair, value).
    let coh: [((usize, usize), (usize, usize), f64); 3] = [
        ((2, 6), (1, 5), pb * (n5 * n6).sqrt()),
        ((4, 5), (2, 3), pa * pb * (a2 * n5).sqrt()),
        ((4, 6), (1, 3), -pa * (a2 * n6).sqrt()),
    ];
    for &((ri, rj), (ci, cj), v) in &coh {
        let r = pair_index(ri - 1, rj - 1);
        let c = pair_index(ci - 1, cj - 1);
        m[(r, c)] = v;
        m[(c, r)] = v;
    }
    Ok(TwoRDM { mat: m })
}

/// Contract the 2-RDM to the one-particle RDM:
/// D1[i][j] = 1/(N-1) * sum_k <a+_i a+_k a_k a_j>, expressed through the
/// ordered-pair storage with antisymmetry signs.
pub fn contract_to_1rdm(d2: &TwoRDM) -> DMatrix<f64> {
    let mut d1 = DMatrix::zeros(N_SLOTS, N_SLOTS);
    for i in 0..N_SLOTS {
        for j in 0..N_SLOTS {
            let mut acc = 0.0;
            for k in 0..N_SLOTS {
                if k == i || k == j {
                    continue;
                }
                let (r, sr) = if i < k { (pair_index(i, k), 1.0) } else { (pair_index(k, i), -1.0) };
                let (c, sc) = if j < k { (pair_index(j, k), 1.0) } else { (pair_index(k, j), -1.0) };
                acc += sr * sc * d2.mat[(r, c)];
            }
            d1[(i, j)] = acc / 2.0;
        }
    }
    d1
}

/// Off-diagonal localization measure of a spin-orbital 1-RDM.
///
/// Each spin block is taken from its own MO frame to the symmetrically
/// orthogonalized atomic basis and the spins are summed,
/// D_L = S^1/2 * (C_a D_a C_a^T + C_b D_b C_b^T) * S^1/2; tau sums the
/// squared off-diagonal elements: large for delocalized (metallic) states,
/// near zero once the electrons localize one-per-site.
pub fn mott_tau(
    d1_spin: &DMatrix<f64>,
    mos: &crate::hamiltonian::MolecularOrbitals,
    lowdin_x: &DMatrix<f64>,
) -> Result<f64> {
    if d1_spin.nrows() != N_SLOTS || d1_spin.ncols() != N_SLOTS {
        return Err(Error::Precondition(format!(
            "spin-orbital 1-RDM must be 6x6, got {}x{}",
            d1_spin.nrows(),
            d1_spin.ncols()
        )));
    }
    let mut d_ao = DMatrix::zeros(3, 3);
    for alpha in [true, false] {
        let mut d_sp = DMatrix::zeros(3, 3);
        for m in 0..3 {
            for mp in 0..3 {
                d_sp[(m, mp)] = d1_spin[(slot_of(m, alpha), slot_of(mp, alpha))];
            }
        }
        let c = mos.c_spin(alpha);
        d_ao += c * d_sp * c.transpose();
    }
    let s_half = lowdin_x.clone().try_inverse().ok_or_else(|| {
        Error::Precondition("orthogonalizer X is not invertible".into())
    })?;
    let d_local = &s_half * d_ao * &s_half;
    let mut tau = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                tau += d_local[(i, j)] * d_local[(i, j)];
            }
        }
    }
    Ok(tau)
}
