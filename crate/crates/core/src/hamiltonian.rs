//! Two-particle reduced Hamiltonian in the pair basis of six spin orbitals.
//!
//! The six spin orbitals (slots) interleave three spatial orbitals with
//! alternating spin so that slot k and slot 7-k (1-based) form the
//! particle-hole partner pairs of the three-electron constraint structure:
//!
//! | slot (1-based) | 1  | 2  | 3  | 4  | 5  | 6  |
//! |----------------|----|----|----|----|----|----|
//! | spatial        | 0  | 1  | 0  | 2  | 1  | 2  |
//! | spin           | a  | a  | b  | a  | b  | b  |
//!
//! Ordered slot pairs (i < j) in lexicographic order span the 15-dimensional
//! pair space. The energy of any three-electron state is the trace of its
//! two-particle reduced density matrix against the reduced Hamiltonian
//! built here, plus the nuclear repulsion; no other object is needed, which
//! is what lets a sampled device drive the whole optimization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::IntegralSet;
use crate::rdm::TwoRDM;

/// Number of spin orbitals.
pub const N_SLOTS: usize = 6;
/// Number of ordered slot pairs i < j.
pub const N_PAIRS: usize = 15;
/// Number of electrons.
pub const N_ELECTRONS: usize = 3;

/// Spatial orbital of each slot (0-based slots and spatial indices).
pub const SLOT_SPATIAL: [usize; N_SLOTS] = [0, 1, 0, 2, 1, 2];
/// Spin of each slot: true = alpha.
pub const SLOT_IS_ALPHA: [bool; N_SLOTS] = [true, true, false, true, false, false];

/// Ordered pairs (i, j), i < j, lexicographic; the row/column basis of the
/// pair-space matrices.
pub const PAIRS: [(usize, usize); N_PAIRS] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (0, 4),
    (0, 5),
    (1, 2),
    (1, 3),
    (1, 4),
    (1, 5),
    (2, 3),
    (2, 4),
    (2, 5),
    (3, 4),
    (3, 5),
    (4, 5),
];

/// Index of the ordered pair (i, j) with i < j in [`PAIRS`].
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < N_SLOTS);
    i * (2 * N_SLOTS - i - 1) / 2 + (j - i - 1)
}

/// The slot hosting a given (spatial orbital, spin) combination.
pub fn slot_of(spatial: usize, alpha: bool) -> usize {
    for s in 0..N_SLOTS {
        if SLOT_SPATIAL[s] == spatial && SLOT_IS_ALPHA[s] == alpha {
            return s;
        }
    }
    unreachable!("every (spatial, spin) combination has a slot")
}

/// Where the molecular-orbital coefficients came from; recorded so traces
/// and outputs can say which orbital set an energy refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitalSource {
    Rohf,
    Lowdin,
    Rotated,
}

/// Molecular orbitals, one spatial frame per spin sector: columns of
/// `c_alpha` (`c_beta`) are the alpha (beta) MO coefficient vectors in the
/// AO basis, each set S-orthonormal.
///
/// Spin-restricted sources (Hartree-Fock, Lowdin) set both frames equal;
/// the orbital-optimization stage rotates them independently, because the
/// natural orbitals of a doublet are different spatial functions for the
/// two spins and the pinned ansatz lives in exactly that basis.
#[derive(Debug, Clone)]
pub struct MolecularOrbitals {
    pub c_alpha: DMatrix<f64>,
    pub c_beta: DMatrix<f64>,
    pub source: OrbitalSource,
}

impl MolecularOrbitals {
    /// A spin-restricted frame: the same spatial orbitals for both spins.
    pub fn restricted(c: DMatrix<f64>, source: OrbitalSource) -> Self {
        Self { c_alpha: c.clone(), c_beta: c, source }
    }

    /// Coefficient matrix of one spin sector.
    pub fn c_spin(&self, alpha: bool) -> &DMatrix<f64> {
        if alpha {
            &self.c_alpha
        } else {
            &self.c_beta
        }
    }
}

/// Three planar rotation angles for one spin sector's spatial frame,
/// applied to the MO columns as C * G(1,2) * G(1,3) * G(2,3).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GivensAngles {
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
}

impl GivensAngles {
    /// Euclidean size of the rotation in angle space.
    pub fn norm(&self) -> f64 {
        (self.g12 * self.g12 + self.g13 * self.g13 + self.g23 * self.g23).sqrt()
    }
}

fn spin_ix(alpha: bool) -> usize {
    if alpha {
        0
    } else {
        1
    }
}

/// The reduced Hamiltonian of one orbital frame pair: per-spin MO core
/// Hamiltonians, the four spin blocks of the MO two-electron integrals,
/// nuclear repulsion, and the 15 x 15 pair-space matrix whose trace
/// against a 2-RDM is the electronic energy.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    /// Core Hamiltonian per spin sector, [alpha, beta].
    h: [DMatrix<f64>; 2],
    /// Chemists' (pq|rs) with p,q in the bra-spin frame and r,s in the
    /// ket-spin frame; `eri[bra][ket]`, flat index ((p*3+q)*3+r)*3+s.
    eri: [[Vec<f64>; 2]; 2],
    pub e_nn: f64,
    pub k2: DMatrix<f64>,
}

impl ReducedHamiltonian {
    /// MO core-Hamiltonian block of one spin sector.
    pub fn h_block(&self, alpha: bool) -> &DMatrix<f64> {
        &self.h[spin_ix(alpha)]
    }

    /// Chemists' (pq|rs) with the pq charge density in the `bra_alpha`
    /// frame and rs in the `ket_alpha` frame.
    pub fn eri_block(
        &self,
        bra_alpha: bool,
        ket_alpha: bool,
        p: usize,
        q: usize,
        r: usize,
        s: usize,
    ) -> f64 {
        self.eri[spin_ix(bra_alpha)][spin_ix(ket_alpha)][((p * 3 + q) * 3 + r) * 3 + s]
    }

    /// Full (pq|rs) block of one spin-sector pair as a flat slice.
    pub fn eri_block_slice(&self, bra_alpha: bool, ket_alpha: bool) -> &[f64] {
        &self.eri[spin_ix(bra_alpha)][spin_ix(ket_alpha)]
    }

    /// One-body integral between spin orbitals (zero across spins).
    pub fn h_spin(&self, i: usize, j: usize) -> f64 {
        if SLOT_IS_ALPHA[i] == SLOT_IS_ALPHA[j] {
            self.h[spin_ix(SLOT_IS_ALPHA[i])][(SLOT_SPATIAL[i], SLOT_SPATIAL[j])]
        } else {
            0.0
        }
    }

    /// Physicists' two-body integral <ij|kl> between spin orbitals.
    pub fn v_phys(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        if SLOT_IS_ALPHA[i] == SLOT_IS_ALPHA[k] && SLOT_IS_ALPHA[j] == SLOT_IS_ALPHA[l] {
            self.eri_block(
                SLOT_IS_ALPHA[i],
                SLOT_IS_ALPHA[j],
                SLOT_SPATIAL[i],
                SLOT_SPATIAL[k],
                SLOT_SPATIAL[j],
                SLOT_SPATIAL[l],
            )
        } else {
            0.0
        }
    }

    /// Antisymmetrized two-body integral <ij||kl>.
    pub fn v_antisym(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.v_phys(i, j, k, l) - self.v_phys(i, j, l, k)
    }
}

/// Verify that the columns of `c` are orthonormal under the metric `s`.
pub fn check_orthonormal(c: &DMatrix<f64>, s: &DMatrix<f64>, tol: f64) -> Result<()> {
    let gram = c.transpose() * s * c;
    let n = gram.nrows();
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (gram[(i, j)] - expect).abs() > tol {
                return Err(Error::Precondition(format!(
                    "molecular orbitals are not S-orthonormal: |CtSC - I| reaches {:.3e} at ({i},{j})",
                    (gram[(i, j)] - expect).abs()
                )));
            }
        }
    }
    Ok(())
}

/// One-index transforms applied four times: AO (pq|rs) -> MO (pq|rs), with
/// the pq pair taken to the `c_bra` frame and rs to the `c_ket` frame.
fn transform_eri(eri: &[f64], c_bra: &DMatrix<f64>, c_ket: &DMatrix<f64>) -> Vec<f64> {
    let n = c_bra.nrows();
    let idx = |p: usize, q: usize, r: usize, s: usize| ((p * n + q) * n + r) * n + s;
    let mut cur = eri.to_vec();
    for stage in 0..4 {
        let c = if stage < 2 { c_bra } else { c_ket };
        let mut next = vec![0.0; cur.len()];
        for a in 0..n {
            for b in 0..n {
                for c_ix in 0..n {
                    for d in 0..n {
                        let mut acc = 0.0;
                        for m in 0..n {
                            let (src, w) = match stage {
                                0 => (idx(m, b, c_ix, d), c[(m, a)]),
                                1 => (idx(a, m, c_ix, d), c[(m, b)]),
                                2 => (idx(a, b, m, d), c[(m, c_ix)]),
                                _ => (idx(a, b, c_ix, m), c[(m, d)]),
                            };
                            acc += w * cur[src];
                        }
                        next[idx(a, b, c_ix, d)] = acc;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Build the reduced Hamiltonian for three electrons in the given orbitals.
///
/// The pair-space matrix distributes the one-body part over pairs with the
/// 1/(N-1) weight and adds the antisymmetrized two-body integrals, so that
/// Tr(K2 * D2) over any normalized three-electron 2-RDM is the full
/// electronic energy.
pub fn build_reduced_hamiltonian(
    ints: &IntegralSet,
    mos: &MolecularOrbitals,
) -> Result<ReducedHamiltonian> {
    if ints.n != 3 {
        return Err(Error::Precondition(format!(
            "the pair-space Hamiltonian needs exactly 3 spatial orbitals, got {}",
            ints.n
        )));
    }
    for (name, c) in [("alpha", &mos.c_alpha), ("beta", &mos.c_beta)] {
        if c.nrows() != 3 || c.ncols() != 3 {
            return Err(Error::Precondition(format!(
                "{name} MO coefficient matrix must be 3x3, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        check_orthonormal(c, &ints.s, 1e-10)?;
    }

    let h_core = ints.core_hamiltonian();
    let h = [
        mos.c_alpha.transpose() * &h_core * &mos.c_alpha,
        mos.c_beta.transpose() * &h_core * &mos.c_beta,
    ];
    let frames = [&mos.c_alpha, &mos.c_beta];
    let eri = frames.map(|bra| frames.map(|ket| transform_eri(&ints.eri, bra, ket)));
    let mut ham = ReducedHamiltonian {
        h,
        eri,
        e_nn: ints.e_nn,
        k2: DMatrix::zeros(N_PAIRS, N_PAIRS),
    };

    let kron = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let weight = 1.0 / (N_ELECTRONS as f64 - 1.0);
    let mut k2 = DMatrix::zeros(N_PAIRS, N_PAIRS);
    for (a, &(i, j)) in PAIRS.iter().enumerate() {
        for (b, &(k, l)) in PAIRS.iter().enumerate() {
            let one_body = weight
                * (ham.h_spin(i, k) * kron(j, l) + ham.h_spin(j, l) * kron(i, k)
                    - ham.h_spin(i, l) * kron(j, k)
                    - ham.h_spin(j, k) * kron(i, l));
            k2[(a, b)] = one_body + ham.v_antisym(i, j, k, l);
        }
    }
    ham.k2 = k2;
    Ok(ham)
}

/// Planar rotation by `theta` in columns (p, q) of a 3x3 identity.
fn givens(p: usize, q: usize, theta: f64) -> DMatrix<f64> {
    let mut g = DMatrix::identity(3, 3);
    let (s, c) = theta.sin_cos();
    g[(p, p)] = c;
    g[(q, q)] = c;
    g[(p, q)] = -s;
    g[(q, p)] = s;
    g
}

/// The composite rotation G(1,2; g12) * G(1,3; g13) * G(2,3; g23).
fn rotation_matrix(angles: &GivensAngles) -> DMatrix<f64> {
    givens(0, 1, angles.g12) * givens(0, 2, angles.g13) * givens(1, 2, angles.g23)
}

/// Rotate both spin sectors by the same three Givens angles
/// (a spin-restricted rotation).
pub fn apply_givens(mos: &MolecularOrbitals, angles: &GivensAngles) -> MolecularOrbitals {
    apply_spin_givens(mos, angles, angles)
}

/// Rotate the two spin sectors independently. Spin projection is conserved,
/// so the most general orbital freedom the energy can see is one spatial
/// rotation per sector; this is what lets the orbital stage reach the
/// spin-dependent natural orbitals of the exact doublet state.
pub fn apply_spin_givens(
    mos: &MolecularOrbitals,
    alpha: &GivensAngles,
    beta: &GivensAngles,
) -> MolecularOrbitals {
    MolecularOrbitals {
        c_alpha: &mos.c_alpha * rotation_matrix(alpha),
        c_beta: &mos.c_beta * rotation_matrix(beta),
        source: OrbitalSource::Rotated,
    }
}

/// Total energy functional E = Tr(K2 * D2) + E_nn.
///
/// An all-zero matrix is admitted as the empty electronic sector (the
/// result is then just the nuclear repulsion); any other matrix must carry
/// the full three-electron normalization Tr(D2) = N(N-1)/2 = 3.
pub fn energy(ham: &ReducedHamiltonian, d2: &TwoRDM) -> Result<f64> {
    let m = &d2.mat;
    if m.nrows() != N_PAIRS || m.ncols() != N_PAIRS {
        return Err(Error::Precondition(format!(
            "2-RDM must be {N_PAIRS}x{N_PAIRS}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let is_zero = m.iter().all(|&x| x == 0.0);
    if !is_zero {
        let trace = m.trace();
        if (trace - 3.0).abs() > 1e-8 {
            return Err(Error::Normalization(format!(
                "2-RDM trace must be 3 for three electrons, got {trace:.12}"
            )));
        }
    }
    let mut e = ham.e_nn;
    for a in 0..N_PAIRS {
        for b in 0..N_PAIRS {
            e += ham.k2[(a, b)] * m[(b, a)];
        }
    }
    Ok(e)
}
