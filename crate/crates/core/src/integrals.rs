//! Gaussian-basis one- and two-electron integrals.
//!
//! Only contracted s-type Gaussians are supported, which is all a minimal
//! hydrogen-chain basis needs; the closed forms for overlap, kinetic,
//! nuclear-attraction and electron-repulsion integrals over s primitives
//! are implemented directly. Coulomb integrals go through the zeroth-order
//! Boys function, evaluated from the error function with a series fallback
//! at tiny arguments. All quantities are in atomic units (bohr, hartree);
//! geometry constructors accept angstrom where noted.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};

/// CODATA conversion: one angstrom in bohr.
pub const ANGSTROM_TO_BOHR: f64 = 1.889_725_988_6;

/// Overlap eigenvalues below this are treated as a linear dependence.
pub const LINDEP_LIMIT: f64 = 1e-8;

/// Zeroth-order Boys function F0(t) = integral of exp(-t u^2) over u in [0,1].
///
/// For t away from zero this is erf(sqrt(t)) * sqrt(pi/t) / 2; below a
/// crossover of 1e-10 the Maclaurin series is used to avoid 0/0. Negative
/// arguments are rejected: they cannot arise from a real geometry.
pub fn boys_f0(t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Argument(format!(
            "Boys function argument must be finite and non-negative, got {t}"
        )));
    }
    Ok(f0(t))
}

fn f0(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < 1e-10 {
        1.0 - t / 3.0 + t * t / 10.0 - t * t * t / 42.0
    } else {
        let s = t.sqrt();
        0.5 * (std::f64::consts::PI / t).sqrt() * libm::erf(s)
    }
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// A molecular geometry: nuclear charges and positions in bohr.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// (nuclear charge, position in bohr) per atom.
    pub atoms: Vec<(u32, [f64; 3])>,
}

impl Geometry {
    /// Symmetric linear H3 chain on the x axis with nearest-neighbor
    /// spacing `r_angstrom`, centered on the middle atom.
    pub fn linear_h3(r_angstrom: f64) -> Result<Self> {
        if !r_angstrom.is_finite() || r_angstrom <= 0.0 {
            return Err(Error::Argument(format!(
                "H3 spacing must be positive, got {r_angstrom}"
            )));
        }
        let r = r_angstrom * ANGSTROM_TO_BOHR;
        Ok(Self {
            atoms: vec![
                (1, [-r, 0.0, 0.0]),
                (1, [0.0, 0.0, 0.0]),
                (1, [r, 0.0, 0.0]),
            ],
        })
    }

    /// Nuclear-nuclear repulsion energy in hartree.
    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for i in 0..self.atoms.len() {
            for j in (i + 1)..self.atoms.len() {
                let (zi, ri) = self.atoms[i];
                let (zj, rj) = self.atoms[j];
                e += f64::from(zi) * f64::from(zj) / dist(ri, rj);
            }
        }
        e
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    dist2(a, b).sqrt()
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

// ---------------------------------------------------------------------------
// Basis set
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct BasisFileShell {
    #[serde(rename = "type")]
    kind: String,
    primitives: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct BasisFile {
    element: String,
    shells: Vec<BasisFileShell>,
}

/// One contracted s shell: (exponent, coefficient) pairs where the
/// coefficients already include primitive normalization and are scaled so
/// the contracted function has unit self-overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub primitives: Vec<(f64, f64)>,
}

impl Shell {
    /// Build from raw (exponent, coefficient-on-normalized-primitive) pairs.
    fn normalized(raw: &[(f64, f64)]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Schema("shell with no primitives".into()));
        }
        let mut prims = Vec::with_capacity(raw.len());
        for &(a, c) in raw {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Schema(format!("non-positive exponent {a}")));
            }
            // Coefficient on the normalized primitive: fold in (2a/pi)^(3/4).
            let norm = (2.0 * a / std::f64::consts::PI).powf(0.75);
            prims.push((a, c * norm));
        }
        // Rescale so the contracted function has <phi|phi> = 1.
        let mut self_overlap = 0.0;
        for &(ai, ci) in &prims {
            for &(aj, cj) in &prims {
                self_overlap += ci * cj * (std::f64::consts::PI / (ai + aj)).powf(1.5);
            }
        }
        if self_overlap <= 0.0 {
            return Err(Error::Schema("contracted shell has non-positive norm".into()));
        }
        let scale = self_overlap.sqrt().recip();
        for p in &mut prims {
            p.1 *= scale;
        }
        Ok(Self { primitives: prims })
    }
}

/// The basis shells of one element, parsed from the JSON basis format.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    pub element: String,
    pub shells: Vec<Shell>,
}

impl ElementBasis {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: BasisFile = serde_json::from_str(text)?;
        let mut shells = Vec::with_capacity(file.shells.len());
        for shell in &file.shells {
            if shell.kind != "s" {
                return Err(Error::Schema(format!(
                    "only s shells are supported, found type {:?}",
                    shell.kind
                )));
            }
            shells.push(Shell::normalized(&shell.primitives)?);
        }
        if shells.is_empty() {
            return Err(Error::Schema("basis has no shells".into()));
        }
        Ok(Self {
            element: file.element,
            shells,
        })
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// The built-in STO-3G hydrogen basis shipped with the crate.
    pub fn sto3g_hydrogen() -> Self {
        Self::from_json_str(include_str!("../data/sto3g_h.json"))
            .expect("built-in STO-3G data must parse")
    }
}

/// Basis functions attached to the atoms of a concrete geometry.
#[derive(Debug, Clone)]
pub struct BasisSet {
    /// One entry per atomic orbital: (atom index, shell).
    pub functions: Vec<(usize, Shell)>,
}

impl BasisSet {
    /// Attach an element basis to every atom of a geometry. Only hydrogen
    /// chains are in scope, so every nuclear charge must match Z = 1.
    pub fn for_geometry(geometry: &Geometry, basis: &ElementBasis) -> Result<Self> {
        if geometry.atoms.is_empty() {
            return Err(Error::Argument("geometry has no atoms".into()));
        }
        if basis.element != "H" {
            return Err(Error::Domain(format!(
                "only hydrogen basis sets are supported, got element {:?}",
                basis.element
            )));
        }
        let mut functions = Vec::new();
        for (idx, &(z, _)) in geometry.atoms.iter().enumerate() {
            if z != 1 {
                return Err(Error::Domain(format!(
                    "only hydrogen atoms are supported, atom {idx} has Z = {z}"
                )));
            }
            for shell in &basis.shells {
                functions.push((idx, shell.clone()));
            }
        }
        Ok(Self { functions })
    }
}

// ---------------------------------------------------------------------------
// Integral evaluation
// ---------------------------------------------------------------------------

/// All molecular integrals of one geometry/basis combination, in the AO
/// basis: overlap S, kinetic T, nuclear attraction V (both n x n), the full
/// chemists'-notation two-electron tensor (pq|rs) stored flat, and the
/// nuclear repulsion energy.
#[derive(Debug, Clone)]
pub struct IntegralSet {
    pub n: usize,
    pub s: DMatrix<f64>,
    pub t_kin: DMatrix<f64>,
    pub v_nuc: DMatrix<f64>,
    /// (pq|rs) at flat index ((p*n + q)*n + r)*n + s.
    pub eri: Vec<f64>,
    pub e_nn: f64,
}

impl IntegralSet {
    /// Core Hamiltonian h = T + V.
    pub fn core_hamiltonian(&self) -> DMatrix<f64> {
        &self.t_kin + &self.v_nuc
    }

    /// Chemists'-notation two-electron integral (pq|rs).
    pub fn eri_at(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.eri[((p * self.n + q) * self.n + r) * self.n + s]
    }
}

/// Product-Gaussian data for a primitive pair: total exponent, center, and
/// the Gaussian product prefactor K = exp(-a b / p * |A - B|^2).
struct PairGaussian {
    p: f64,
    center: [f64; 3],
    k: f64,
}

fn pair_gaussian(a: f64, ca: [f64; 3], b: f64, cb: [f64; 3]) -> PairGaussian {
    let p = a + b;
    let center = [
        (a * ca[0] + b * cb[0]) / p,
        (a * ca[1] + b * cb[1]) / p,
        (a * ca[2] + b * cb[2]) / p,
    ];
    let k = (-a * b / p * dist2(ca, cb)).exp();
    PairGaussian { p, center, k }
}

/// Build all integrals for a geometry with its attached basis.
///
/// Fails on coincident nuclei and on non-hydrogen charges; the returned
/// overlap matrix is *not* checked for linear dependence here (that happens
/// in [`lowdin_orthogonalizer`], where the inverse square root is needed).
pub fn build_integrals(geometry: &Geometry, basis: &BasisSet) -> Result<IntegralSet> {
    if geometry.atoms.is_empty() {
        return Err(Error::Argument("geometry has no atoms".into()));
    }
    for i in 0..geometry.atoms.len() {
        let (zi, ri) = geometry.atoms[i];
        if zi != 1 {
            return Err(Error::Domain(format!(
                "only hydrogen atoms are supported, atom {i} has Z = {zi}"
            )));
        }
        for j in (i + 1)..geometry.atoms.len() {
            if dist(ri, geometry.atoms[j].1) < 1e-10 {
                return Err(Error::Geometry(format!("atoms {i} and {j} coincide")));
            }
        }
    }

    let n = basis.functions.len();
    let center = |ao: usize| geometry.atoms[basis.functions[ao].0].1;
    let prims = |ao: usize| &basis.functions[ao].1.primitives;

    let mut s = DMatrix::zeros(n, n);
    let mut t_kin = DMatrix::zeros(n, n);
    let mut v_nuc = DMatrix::zeros(n, n);

    for p in 0..n {
        for q in 0..n {
            let (cp, cq) = (center(p), center(q));
            let r2 = dist2(cp, cq);
            let mut s_pq = 0.0;
            let mut t_pq = 0.0;
            let mut v_pq = 0.0;
            for &(a, ca) in prims(p) {
                for &(b, cb) in prims(q) {
                    let pg = pair_gaussian(a, cp, b, cq);
                    let s_prim = (std::f64::consts::PI / pg.p).powf(1.5) * pg.k;
                    let mu = a * b / pg.p;
                    s_pq += ca * cb * s_prim;
                    t_pq += ca * cb * mu * (3.0 - 2.0 * mu * r2) * s_prim;
                    for &(z, rc) in &geometry.atoms {
                        let t = pg.p * dist2(pg.center, rc);
                        v_pq -= ca * cb * f64::from(z)
                            * 2.0
                            * std::f64::consts::PI
                            / pg.p
                            * pg.k
                            * f0(t);
                    }
                }
            }
            s[(p, q)] = s_pq;
            t_kin[(p, q)] = t_pq;
            v_nuc[(p, q)] = v_pq;
        }
    }

    // Full four-index loop with no symmetry shortcuts; the n = 3 tensor is
    // tiny and the eightfold permutation symmetry stays a testable property
    // instead of a construction artifact.
    let mut eri = vec![0.0; n * n * n * n];
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for sx in 0..n {
                    let mut val = 0.0;
                    for &(a, ca) in prims(p) {
                        for &(b, cb) in prims(q) {
                            let bra = pair_gaussian(a, center(p), b, center(q));
                            for &(c, cc) in prims(r) {
                                for &(d, cd) in prims(sx) {
                                    let ket = pair_gaussian(c, center(r), d, center(sx));
                                    let denom = bra.p * ket.p * (bra.p + ket.p).sqrt();
                                    let t = bra.p * ket.p / (bra.p + ket.p)
                                        * dist2(bra.center, ket.center);
                                    val += ca * cb * cc * cd
                                        * 2.0
                                        * std::f64::consts::PI.powf(2.5)
                                        / denom
                                        * bra.k
                                        * ket.k
                                        * f0(t);
                                }
                            }
                        }
                    }
                    eri[((p * n + q) * n + r) * n + sx] = val;
                }
            }
        }
    }

    Ok(IntegralSet {
        n,
        s,
        t_kin,
        v_nuc,
        eri,
        e_nn: geometry.nuclear_repulsion(),
    })
}

/// STO-3G integrals for the symmetric linear H3 chain with nearest-neighbor
/// spacing `r_angstrom`: the one geometry family the rest of the crate
/// scans over.
pub fn linear_h3_integrals(r_angstrom: f64) -> Result<IntegralSet> {
    let geometry = Geometry::linear_h3(r_angstrom)?;
    let basis = BasisSet::for_geometry(&geometry, &ElementBasis::sto3g_hydrogen())?;
    build_integrals(&geometry, &basis)
}

/// Symmetric (Lowdin) orthogonalizer X = S^(-1/2).
///
/// Fails with [`Error::LinearDependence`] when the smallest overlap
/// eigenvalue drops below [`LINDEP_LIMIT`].
pub fn lowdin_orthogonalizer(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.nrows() != s.ncols() || s.is_empty() {
        return Err(Error::Precondition(format!(
            "overlap matrix must be square and non-empty, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let eig = s.clone().symmetric_eigen();
    let eigmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if eigmin < LINDEP_LIMIT {
        return Err(Error::LinearDependence {
            eigmin,
            limit: LINDEP_LIMIT,
        });
    }
    let n = s.nrows();
    let mut x = DMatrix::zeros(n, n);
    for k in 0..n {
        let u = eig.eigenvectors.column(k);
        let w = eig.eigenvalues[k].sqrt().recip();
        for i in 0..n {
            for j in 0..n {
                x[(i, j)] += w * u[i] * u[j];
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use gpcsolve_testkit::quad;

    fn h3_integrals(r_angstrom: f64) -> IntegralSet {
        let geom = Geometry::linear_h3(r_angstrom).unwrap();
        let basis = BasisSet::for_geometry(&geom, &ElementBasis::sto3g_hydrogen()).unwrap();
        build_integrals(&geom, &basis).unwrap()
    }

    /// Raw STO-3G primitives with coefficients on normalized primitives,
    /// normalization folded in by hand for the quadrature oracle.
    fn sto3g_oracle_shell() -> Vec<(f64, f64)> {
        let raw = [
            (3.42525091, 0.15432897),
            (0.62391373, 0.53532814),
            (0.16885540, 0.44463454),
        ];
        let mut prims: Vec<(f64, f64)> = raw
            .iter()
            .map(|&(a, c)| (a, c * (2.0 * a / std::f64::consts::PI).powf(0.75)))
            .collect();
        let mut s = 0.0;
        for &(ai, ci) in &prims {
            for &(aj, cj) in &prims {
                s += ci * cj * (std::f64::consts::PI / (ai + aj)).powf(1.5);
            }
        }
        let scale = s.sqrt().recip();
        for p in &mut prims {
            p.1 *= scale;
        }
        prims
    }

    #[test]
    fn boys_matches_quadrature_and_limits() {
        assert_abs_diff_eq!(boys_f0(0.0).unwrap(), 1.0, epsilon = 1e-15);
        for &t in &[1e-12, 1e-8, 1e-4, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0, 100.0] {
            let oracle = quad::boys_f0_quadrature(t);
            assert_abs_diff_eq!(boys_f0(t).unwrap(), oracle, epsilon = 1e-12);
        }
        // Known anchors.
        assert_abs_diff_eq!(boys_f0(1.0).unwrap(), 0.746_824_132_8, epsilon = 1e-9);
        assert_abs_diff_eq!(boys_f0(100.0).unwrap(), 0.088_622_692_5, epsilon = 1e-9);
        assert!(boys_f0(-1e-3).is_err());
        assert!(boys_f0(f64::NAN).is_err());
    }

    #[test]
    fn boys_is_continuous_at_series_crossover() {
        let below = boys_f0(0.999_999e-10).unwrap();
        let above = boys_f0(1.000_001e-10).unwrap();
        assert!((below - above).abs() < 1e-13);
    }

    #[test]
    fn contracted_shell_has_unit_self_overlap() {
        let ints = h3_integrals(1.0);
        for i in 0..3 {
            assert_abs_diff_eq!(ints.s[(i, i)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn h2_overlap_matches_quadrature_oracle() {
        // Two hydrogens at 1.4 bohr: a classic minimal-basis benchmark.
        let r = 1.4 / ANGSTROM_TO_BOHR;
        let geom = Geometry {
            atoms: vec![(1, [0.0, 0.0, 0.0]), (1, [1.4, 0.0, 0.0])],
        };
        assert_abs_diff_eq!(geom.nuclear_repulsion(), 1.0 / 1.4, epsilon = 1e-14);
        let basis = BasisSet::for_geometry(&geom, &ElementBasis::sto3g_hydrogen()).unwrap();
        let ints = build_integrals(&geom, &basis).unwrap();

        let shell = sto3g_oracle_shell();
        let oracle = quad::contracted_overlap_numeric(
            &shell,
            [0.0, 0.0, 0.0],
            &shell,
            [1.4, 0.0, 0.0],
        );
        assert_abs_diff_eq!(ints.s[(0, 1)], oracle, epsilon = 1e-10);
        // Literature value for STO-3G H2 at 1.4 bohr.
        assert_abs_diff_eq!(ints.s[(0, 1)], 0.6593, epsilon = 1e-3);
        let _ = r;
    }

    #[test]
    fn integrals_are_translation_invariant() {
        let geom = Geometry::linear_h3(1.1).unwrap();
        let shift = [0.37, -1.2, 2.1];
        let moved = Geometry {
            atoms: geom
                .atoms
                .iter()
                .map(|&(z, r)| (z, [r[0] + shift[0], r[1] + shift[1], r[2] + shift[2]]))
                .collect(),
        };
        let eb = ElementBasis::sto3g_hydrogen();
        let a = build_integrals(&geom, &BasisSet::for_geometry(&geom, &eb).unwrap()).unwrap();
        let b = build_integrals(&moved, &BasisSet::for_geometry(&moved, &eb).unwrap()).unwrap();
        assert_abs_diff_eq!(a.e_nn, b.e_nn, epsilon = 1e-12);
        for p in 0..3 {
            for q in 0..3 {
                assert_abs_diff_eq!(a.s[(p, q)], b.s[(p, q)], epsilon = 1e-12);
                assert_abs_diff_eq!(a.t_kin[(p, q)], b.t_kin[(p, q)], epsilon = 1e-12);
                assert_abs_diff_eq!(a.v_nuc[(p, q)], b.v_nuc[(p, q)], epsilon = 1e-12);
            }
        }
        for (x, y) in a.eri.iter().zip(b.eri.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn eri_has_eightfold_permutation_symmetry() {
        let ints = h3_integrals(0.9);
        for p in 0..3 {
            for q in 0..3 {
                for r in 0..3 {
                    for s in 0..3 {
                        let v = ints.eri_at(p, q, r, s);
                        for &(a, b, c, d) in &[
                            (q, p, r, s),
                            (p, q, s, r),
                            (q, p, s, r),
                            (r, s, p, q),
                            (s, r, p, q),
                            (r, s, q, p),
                            (s, r, q, p),
                        ] {
                            assert_abs_diff_eq!(v, ints.eri_at(a, b, c, d), epsilon = 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn linear_chain_has_mirror_symmetry() {
        // Reversing the AO order (end-atom swap) must leave the linear-chain
        // integrals invariant.
        let ints = h3_integrals(1.3);
        let m = [2usize, 1, 0];
        for p in 0..3 {
            for q in 0..3 {
                assert_abs_diff_eq!(ints.s[(p, q)], ints.s[(m[p], m[q])], epsilon = 1e-12);
                assert_abs_diff_eq!(
                    ints.t_kin[(p, q)],
                    ints.t_kin[(m[p], m[q])],
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(
                    ints.v_nuc[(p, q)],
                    ints.v_nuc[(m[p], m[q])],
                    epsilon = 1e-12
                );
                for r in 0..3 {
                    for s in 0..3 {
                        assert_abs_diff_eq!(
                            ints.eri_at(p, q, r, s),
                            ints.eri_at(m[p], m[q], m[r], m[s]),
                            epsilon = 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn nuclear_repulsion_of_h3_chain() {
        let r_bohr = 1.0 * ANGSTROM_TO_BOHR;
        let ints = h3_integrals(1.0);
        let expected = 1.0 / r_bohr + 1.0 / r_bohr + 1.0 / (2.0 * r_bohr);
        assert_abs_diff_eq!(ints.e_nn, expected, epsilon = 1e-12);
    }

    #[test]
    fn kinetic_diagonal_matches_single_gaussian_formula() {
        // For a single normalized s Gaussian with exponent a, <T> = 3a/2.
        // Check the contracted diagonal against an explicit primitive sum.
        let shell = sto3g_oracle_shell();
        let mut t = 0.0;
        for &(a, ca) in &shell {
            for &(b, cb) in &shell {
                let p = a + b;
                let mu = a * b / p;
                t += ca * cb * mu * 3.0 * (std::f64::consts::PI / p).powf(1.5);
            }
        }
        let ints = h3_integrals(2.0);
        assert_abs_diff_eq!(ints.t_kin[(0, 0)], t, epsilon = 1e-12);
    }

    #[test]
    fn coincident_atoms_are_rejected() {
        let geom = Geometry {
            atoms: vec![(1, [0.0, 0.0, 0.0]), (1, [0.0, 0.0, 0.0])],
        };
        let eb = ElementBasis::sto3g_hydrogen();
        let basis = BasisSet::for_geometry(&geom, &eb).unwrap();
        match build_integrals(&geom, &basis) {
            Err(Error::Geometry(_)) => {}
            other => panic!("expected geometry error, got {other:?}"),
        }
    }

    #[test]
    fn non_hydrogen_is_rejected() {
        let geom = Geometry {
            atoms: vec![(2, [0.0, 0.0, 0.0])],
        };
        let eb = ElementBasis::sto3g_hydrogen();
        match BasisSet::for_geometry(&geom, &eb) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn lowdin_orthogonalizes_the_overlap() {
        let ints = h3_integrals(1.0);
        let x = lowdin_orthogonalizer(&ints.s).unwrap();
        let should_be_identity = &x * &ints.s * &x;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(should_be_identity[(i, j)], expect, epsilon = 1e-10);
            }
        }
        // X is symmetric.
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(x[(i, j)], x[(j, i)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lowdin_on_identity_is_identity() {
        let s = DMatrix::identity(3, 3);
        let x = lowdin_orthogonalizer(&s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(x[(i, j)], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn lowdin_rejects_near_singular_overlap() {
        let mut s = DMatrix::identity(2, 2);
        s[(0, 1)] = 1.0 - 5e-10;
        s[(1, 0)] = 1.0 - 5e-10;
        match lowdin_orthogonalizer(&s) {
            Err(Error::LinearDependence { eigmin, .. }) => assert!(eigmin < 1e-8),
            other => panic!("expected linear-dependence error, got {other:?}"),
        }
    }

    #[test]
    fn single_atom_gives_trivial_overlap() {
        let geom = Geometry {
            atoms: vec![(1, [0.4, -0.3, 0.9])],
        };
        let eb = ElementBasis::sto3g_hydrogen();
        let basis = BasisSet::for_geometry(&geom, &eb).unwrap();
        let ints = build_integrals(&geom, &basis).unwrap();
        assert_eq!(ints.n, 1);
        assert_abs_diff_eq!(ints.s[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ints.e_nn, 0.0, epsilon = 1e-15);
        // <T> + <V> for STO-3G hydrogen: close to the well-known -0.4666 Ha.
        let e_atom = ints.t_kin[(0, 0)] + ints.v_nuc[(0, 0)];
        assert_abs_diff_eq!(e_atom, -0.46658, epsilon = 5e-5);
    }

    #[test]
    fn invalid_h3_spacing_is_rejected() {
        assert!(Geometry::linear_h3(0.0).is_err());
        assert!(Geometry::linear_h3(-1.0).is_err());
        assert!(Geometry::linear_h3(f64::NAN).is_err());
    }
}
