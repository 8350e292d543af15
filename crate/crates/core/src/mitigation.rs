//! Borland-Dennis polytope geometry and the calibrated error-mitigation map.
//!
//! Mitigation decomposes into three stages. A piecewise-affine correction —
//! calibrated once per device by measuring a lattice of angles over the
//! parameter triangle and fitting one homogeneous affine transform per
//! lattice simplex — pulls measured qubit marginals back toward their ideal
//! values. The analytic surface-to-pinned map then converts the corrected
//! marginals (p2, p3) into occupations (n4, n5, n6) that saturate the
//! pinning constraint n5 + n6 = n4 exactly. Finally, a nearest-point
//! projection inside the pinned plane clamps the triple into the region the
//! 2-RDM reconstruction accepts.
//!
//! The ordering-sorted polytope planes are enforced on the canonically
//! sorted spectrum rather than on the raw working labels: the working triple
//! legitimately carries unsorted labels for most angles (which spatial
//! orbital each slot reads is fixed by the qubit map, while sortedness is a
//! property of the spectrum), and sorting a pinned triple provably lands
//! inside all five planes.

use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qdevice::{ideal_populations, CircuitParams, DeviceContext, MeasurementRecord};
use crate::seeds::{self, stream};

// ---------------------------------------------------------------------------
// Polytope geometry
// ---------------------------------------------------------------------------

/// Human-readable names of the five constraint planes in (n4, n5, n6),
/// index-matched to [`polytope_margins`].
pub const POLYTOPE_PLANES: [&str; 5] = [
    "n4 - n5 >= 0",
    "n5 - n6 >= 0",
    "n6 >= 0",
    "1/2 - n4 >= 0",
    "n5 + n6 - n4 >= 0",
];

/// Vertices of the sorted pinned polytope (intersections of the planes).
pub const POLYTOPE_VERTICES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.5, 0.5, 0.0],
    [0.5, 0.25, 0.25],
    [0.5, 0.5, 0.5],
];

/// Extreme pinned spectra under the three ordering saturations; a
/// diagnostic reference triangle, not used by the mitigation map itself.
pub const GPC_TRIANGLE: [[f64; 3]; 3] = [
    [0.0, 0.0, 0.0],
    [0.5, 0.5, 0.0],
    [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
];

/// Signed margins of the five planes; nonnegative means satisfied.
pub fn polytope_margins(n4: f64, n5: f64, n6: f64) -> [f64; 5] {
    [n4 - n5, n5 - n6, n6, 0.5 - n4, n5 + n6 - n4]
}

/// Membership test returning the violated plane names, worst first is not
/// promised — they come in plane order.
pub fn polytope_membership(n4: f64, n5: f64, n6: f64, tol: f64) -> (bool, Vec<&'static str>) {
    let margins = polytope_margins(n4, n5, n6);
    let violated: Vec<&'static str> = margins
        .iter()
        .zip(POLYTOPE_PLANES)
        .filter(|(m, _)| **m < -tol)
        .map(|(_, name)| name)
        .collect();
    (violated.is_empty(), violated)
}

/// Analytic inversion of the ideal measurement surface.
///
/// Takes the three qubit marginals (p1 is redundant and unused) and returns
/// (n4, n5, n6) with n4 built as n5 + n6, so the pinning constraint is
/// saturated bitwise. Pure arithmetic; callers clamp afterwards.
pub fn surface_to_pinned(p: [f64; 3]) -> [f64; 3] {
    let n5 = p[1] * p[2];
    let n6 = p[2] * (1.0 - p[1]);
    [n5 + n6, n5, n6]
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// One calibration lattice point: the prepared angles, the analytically
/// known ideal marginals, and what the device actually reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub theta1: f64,
    pub theta2: f64,
    pub ideal: [f64; 3],
    pub measured: [f64; 3],
}

/// Piecewise-affine correction in (p2, p3) space.
///
/// `simplices` index into `points`; `transforms[k]` is the homogeneous 3x3
/// affine piece of simplex k, acting on column vectors (p2, p3, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationMap {
    pub points: Vec<CalibrationPoint>,
    pub simplices: Vec<[usize; 3]>,
    pub transforms: Vec<[[f64; 3]; 3]>,
    pub grid_order: u32,
}

impl MitigationMap {
    /// The empty map: mitigate passes marginals through unchanged.
    /// Used when mitigation is switched off.
    pub fn identity() -> Self {
        MitigationMap {
            points: Vec::new(),
            simplices: Vec::new(),
            transforms: Vec::new(),
            grid_order: 0,
        }
    }
}

/// Lattice of angle pairs over the parameter triangle {0 <= t2 <= t1 <= pi}
/// with its triangulation. Order g puts g+1 points along each edge.
fn triangle_lattice(grid_order: u32) -> (Vec<(u32, u32)>, Vec<[usize; 3]>) {
    let g = grid_order;
    let mut points = Vec::new();
    for i in 0..=g {
        for j in 0..=i {
            points.push((i, j));
        }
    }
    // Row-major index of lattice node (i, j).
    let idx = |i: u32, j: u32| -> usize { (i * (i + 1) / 2 + j) as usize };
    let mut simplices = Vec::new();
    for i in 0..g {
        for j in 0..=i {
            simplices.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            if j < i {
                simplices.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    (points, simplices)
}

/// Measure the calibration lattice and fit one affine piece per simplex.
///
/// Each piece solves T_k Q_k = G_k in homogeneous coordinates, where the
/// columns of Q_k are the measured (p2, p3, 1) at the simplex corners and
/// G_k the ideal ones, so measured corners map to their ideal images
/// exactly. A simplex whose measured corners coincide bitwise with the
/// ideal ones is snapped to the exact identity, keeping the noiseless path
/// transparent to the last bit. Shot counts and the noise model come from
/// the device context itself.
pub fn calibrate(device: &DeviceContext, seed: u64, grid_order: u32) -> Result<MitigationMap> {
    if grid_order == 0 {
        return Err(Error::Argument("calibration grid order must be >= 1".into()));
    }
    let g = grid_order as f64;
    let (lattice, simplices) = triangle_lattice(grid_order);

    let mut points = Vec::with_capacity(lattice.len());
    for &(i, j) in &lattice {
        let params = CircuitParams {
            theta1: std::f64::consts::PI * i as f64 / g,
            theta2: std::f64::consts::PI * j as f64 / g,
        };
        let ideal = ideal_populations(params)?;
        let record = device.run(params, seeds::derive(seed, &[stream::CALIBRATION, i as u64, j as u64]))?;
        points.push(CalibrationPoint {
            theta1: params.theta1,
            theta2: params.theta2,
            ideal,
            measured: record.occupations,
        });
    }

    let mut transforms = Vec::with_capacity(simplices.len());
    for corners in &simplices {
        let snap = corners
            .iter()
            .all(|&c| points[c].measured == points[c].ideal);
        if snap {
            transforms.push([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
            continue;
        }
        let col = |p: &CalibrationPoint, of: fn(&CalibrationPoint) -> [f64; 3]| {
            let v = of(p);
            [v[1], v[2], 1.0]
        };
        let mut q = Matrix3::zeros();
        let mut gm = Matrix3::zeros();
        for (k, &c) in corners.iter().enumerate() {
            let mc = col(&points[c], |p| p.measured);
            let gc = col(&points[c], |p| p.ideal);
            for r in 0..3 {
                q[(r, k)] = mc[r];
                gm[(r, k)] = gc[r];
            }
        }
        // det(Q) is twice the signed area of the measured triangle; a
        // collapsed triangle (e.g. readout error 1/2 erasing the signal)
        // cannot anchor an affine piece.
        let det = q.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::Calibration(format!(
                "measured calibration simplex is degenerate (area {:.3e}); \
                 the device response does not resolve the lattice",
                det / 2.0
            )));
        }
        let q_inv = q.try_inverse().ok_or_else(|| {
            Error::Calibration("measured calibration simplex is not invertible".into())
        })?;
        let t = gm * q_inv;
        let mut piece = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                piece[r][c] = t[(r, c)];
            }
        }
        // The bottom row is (0,0,1) algebraically; remove inversion fuzz.
        piece[2] = [0.0, 0.0, 1.0];
        transforms.push(piece);
    }

    Ok(MitigationMap {
        points,
        simplices,
        transforms,
        grid_order,
    })
}

// ---------------------------------------------------------------------------
// Simplex lookup
// ---------------------------------------------------------------------------

/// Barycentric coordinates of p in the triangle (a, b, c), or None when the
/// triangle is degenerate.
fn barycentric(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<[f64; 3]> {
    let m = Matrix2::new(b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
    let rhs = Vector2::new(p[0] - a[0], p[1] - a[1]);
    let lam = m.lu().solve(&rhs)?;
    Some([1.0 - lam[0] - lam[1], lam[0], lam[1]])
}

/// Squared distance from p to the segment a-b.
fn segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    let dx = p[0] - (a[0] + t * d[0]);
    let dy = p[1] - (a[1] + t * d[1]);
    dx * dx + dy * dy
}

/// Containing simplex in measured space, or the nearest one for points
/// outside the calibrated region.
fn locate_simplex(map: &MitigationMap, p: [f64; 2]) -> usize {
    let corner = |s: usize, k: usize| -> [f64; 2] {
        let m = map.points[map.simplices[s][k]].measured;
        [m[1], m[2]]
    };
    for s in 0..map.simplices.len() {
        if let Some(lam) = barycentric(p, corner(s, 0), corner(s, 1), corner(s, 2)) {
            if lam.iter().all(|&l| l >= -1e-12) {
                return s;
            }
        }
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for s in 0..map.simplices.len() {
        let (a, b, c) = (corner(s, 0), corner(s, 1), corner(s, 2));
        let d = segment_dist2(p, a, b)
            .min(segment_dist2(p, b, c))
            .min(segment_dist2(p, c, a));
        if d < best_d {
            best_d = d;
            best = s;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Clamp and canonical spectrum
// ---------------------------------------------------------------------------

/// Quadratic form of the pinned-plane metric: moving (dn5, dn6) inside the
/// plane also moves n4 by dn5 + dn6, so Euclidean distance in (n4, n5, n6)
/// restricted to the plane is dn' M dn with M = [[2,1],[1,2]].
fn pinned_metric(u: [f64; 2], v: [f64; 2]) -> f64 {
    2.0 * u[0] * v[0] + u[0] * v[1] + u[1] * v[0] + 2.0 * u[1] * v[1]
}

/// Nearest point of {n5 >= 0, n6 >= 0, n5 + n6 <= 1} in the pinned metric.
fn clamp_to_reconstruction_triangle(n5: f64, n6: f64) -> ([f64; 2], bool) {
    if n5 >= 0.0 && n6 >= 0.0 && n5 + n6 <= 1.0 {
        return ([n5, n6], false);
    }
    let p = [n5, n6];
    let edges: [([f64; 2], [f64; 2]); 3] = [
        ([0.0, 0.0], [1.0, 0.0]),
        ([0.0, 0.0], [0.0, 1.0]),
        ([1.0, 0.0], [-1.0, 1.0]),
    ];
    let mut best = [0.0, 0.0];
    let mut best_d = f64::INFINITY;
    for (a, d) in edges {
        let diff = [p[0] - a[0], p[1] - a[1]];
        let t = (pinned_metric(d, diff) / pinned_metric(d, d)).clamp(0.0, 1.0);
        let cand = [a[0] + t * d[0], a[1] + t * d[1]];
        let delta = [p[0] - cand[0], p[1] - cand[1]];
        let dist = pinned_metric(delta, delta);
        if dist < best_d {
            best_d = dist;
            best = cand;
        }
    }
    (best, true)
}

/// Sorted spectrum of a pinned triple: each complement pair contributes its
/// smaller half, sorted descending. Always a polytope member.
fn canonical_triple(n4: f64, n5: f64, n6: f64) -> [f64; 3] {
    let mut mins = [n4.min(1.0 - n4), n5.min(1.0 - n5), n6.min(1.0 - n6)];
    mins.sort_by(|a, b| b.total_cmp(a));
    mins
}

// ---------------------------------------------------------------------------
// Mitigation
// ---------------------------------------------------------------------------

/// Full mitigation result for one measurement record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationOutcome {
    /// Marginals (p2, p3) after the affine correction.
    pub corrected: [f64; 2],
    /// Pinned triple straight off the corrected surface, before clamping.
    pub pinned_raw: [f64; 3],
    /// Clamped triple handed to the 2-RDM reconstruction; pinning exact.
    pub working: [f64; 3],
    /// Canonically sorted spectrum; satisfies all five polytope planes.
    pub canonical: [f64; 3],
    /// Whether the clamp had to move the point.
    pub clamped: bool,
    /// Index of the affine piece used, if the map is non-empty.
    pub simplex: Option<usize>,
}

/// Correct a measurement record and produce the pinned occupation triple.
pub fn mitigate(map: &MitigationMap, record: &MeasurementRecord) -> Result<MitigationOutcome> {
    let occ = record.occupations;
    for v in occ {
        if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(Error::Precondition(format!(
                "measured occupations must be probabilities, got {occ:?}"
            )));
        }
    }
    let p = [occ[1], occ[2]];
    let (corrected, simplex) = if map.simplices.is_empty() {
        (p, None)
    } else {
        let s = locate_simplex(map, p);
        let t = &map.transforms[s];
        (
            [
                t[0][0] * p[0] + t[0][1] * p[1] + t[0][2],
                t[1][0] * p[0] + t[1][1] * p[1] + t[1][2],
            ],
            Some(s),
        )
    };
    let pinned_raw = surface_to_pinned([occ[0], corrected[0], corrected[1]]);
    let ([n5, n6], clamped) = clamp_to_reconstruction_triangle(pinned_raw[1], pinned_raw[2]);
    let working = if clamped { [n5 + n6, n5, n6] } else { pinned_raw };
    let canonical = canonical_triple(working[0], working[1], working[2]);
    Ok(MitigationOutcome {
        corrected,
        pinned_raw,
        working,
        canonical,
        clamped,
        simplex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdevice::NoiseModel;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn polytope_constants_satisfy_their_planes() {
        for v in POLYTOPE_VERTICES {
            let margins = polytope_margins(v[0], v[1], v[2]);
            for m in margins {
                assert!(m >= -1e-12, "vertex {v:?} violates a plane: {margins:?}");
            }
        }
        // Diagnostic triangle: every vertex saturates pinning exactly.
        for v in GPC_TRIANGLE {
            assert_eq!(v[1] + v[2], v[0]);
        }
        let (member, _) = polytope_membership(0.0, 0.0, 0.0, 1e-12);
        assert!(member);
        let (member, violated) = polytope_membership(0.4, 0.1, 0.1, 1e-12);
        assert!(!member);
        assert_eq!(violated, vec!["n5 + n6 - n4 >= 0"]);
        let (member, _) = polytope_membership(0.5, 0.5, 0.0, 1e-12);
        assert!(member);
    }

    #[test]
    fn surface_map_saturates_pinning_bitwise() {
        assert_eq!(surface_to_pinned([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        // theta = (pi, pi) marginals: state |011>.
        let n = surface_to_pinned([0.0, 1.0, 1.0]);
        assert_eq!(n, [1.0, 1.0, 0.0]);
        let mut rng = seeds::rng(11);
        for _ in 0..500 {
            let a: f64 = rng.random_range(0.0..PI);
            let b: f64 = rng.random_range(0.0..PI);
            let params = CircuitParams {
                theta1: 2.0 * a,
                theta2: 2.0 * b,
            };
            let p = ideal_populations(params).unwrap();
            let n = surface_to_pinned(p);
            assert_eq!(n[0], n[1] + n[2]);
            assert_abs_diff_eq!(n[1], a.sin().powi(2) * b.sin().powi(2), epsilon = 1e-14);
            assert_abs_diff_eq!(n[2], a.sin().powi(2) * b.cos().powi(2), epsilon = 1e-14);
        }
    }

    #[test]
    fn lattice_counts_match_grid_order() {
        let (p1, s1) = triangle_lattice(1);
        assert_eq!((p1.len(), s1.len()), (3, 1));
        let (p2, s2) = triangle_lattice(2);
        assert_eq!((p2.len(), s2.len()), (6, 4));
        let (p3, s3) = triangle_lattice(3);
        assert_eq!((p3.len(), s3.len()), (10, 9));
        // Every simplex references valid, distinct points.
        for s in &s3 {
            assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
            assert!(s.iter().all(|&i| i < p3.len()));
        }
        assert!(calibrate(&DeviceContext::exact(), 0, 0).is_err());
    }

    #[test]
    fn noiseless_calibration_snaps_to_exact_identity() {
        let map = calibrate(&DeviceContext::exact(), 9, 2).unwrap();
        assert_eq!(map.points.len(), 6);
        assert_eq!(map.simplices.len(), 4);
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for t in &map.transforms {
            assert_eq!(*t, id);
        }
        // Transparency: mitigate(measure(prepare)) equals the analytic
        // pinned triple across a theta grid, and nothing gets clamped.
        let device = DeviceContext::exact();
        for i in 0..8 {
            for j in 0..8 {
                let params = CircuitParams {
                    theta1: PI * i as f64 / 7.0,
                    theta2: PI * j as f64 / 7.0,
                };
                let rec = device.run(params, 0).unwrap();
                let out = mitigate(&map, &rec).unwrap();
                let ideal = surface_to_pinned(ideal_populations(params).unwrap());
                for k in 0..3 {
                    assert_abs_diff_eq!(out.working[k], ideal[k], epsilon = 1e-10);
                }
                assert!(!out.clamped);
                assert_eq!(out.working[0], out.working[1] + out.working[2]);
            }
        }
    }

    #[test]
    fn three_corner_calibration_is_a_single_exact_piece() {
        let noise = NoiseModel {
            p_ry1: 0.0,
            p_cx13: 0.0,
            p_ry2: 0.0,
            p_cx21: 0.0,
            readout: [0.0, 0.0, 0.05],
        };
        let device = DeviceContext {
            noise: Some(noise),
            sampling: crate::qdevice::SamplingMode::Exact,
        };
        let map = calibrate(&device, 1, 1).unwrap();
        assert_eq!(map.simplices.len(), 1);
        // The HF corner measures (0, 0, 0.05) and must come back to the
        // exact HF point.
        let rec = device
            .run(CircuitParams { theta1: 0.0, theta2: 0.0 }, 0)
            .unwrap();
        assert_abs_diff_eq!(rec.occupations[2], 0.05, epsilon = 1e-12);
        let out = mitigate(&map, &rec).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(out.working[k], 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn calibrated_pieces_are_exact_at_their_corners() {
        let noise = crate::qdevice::builtin_calibration(1).unwrap();
        let device = DeviceContext {
            noise: Some(noise),
            sampling: crate::qdevice::SamplingMode::Exact,
        };
        let map = calibrate(&device, 5, 2).unwrap();
        for (s, corners) in map.simplices.iter().enumerate() {
            let t = &map.transforms[s];
            for &c in corners {
                let m = map.points[c].measured;
                let g = map.points[c].ideal;
                let mapped = [
                    t[0][0] * m[1] + t[0][1] * m[2] + t[0][2],
                    t[1][0] * m[1] + t[1][1] * m[2] + t[1][2],
                ];
                assert_abs_diff_eq!(mapped[0], g[1], epsilon = 1e-12);
                assert_abs_diff_eq!(mapped[1], g[2], epsilon = 1e-12);
            }
        }
        // Corner exactness through the full mitigate path: every lattice
        // record returns the ideal pinned image.
        for pt in &map.points {
            let params = CircuitParams {
                theta1: pt.theta1,
                theta2: pt.theta2,
            };
            let rec = device.run(params, 0).unwrap();
            let out = mitigate(&map, &rec).unwrap();
            let ideal = surface_to_pinned(pt.ideal);
            for k in 0..3 {
                assert_abs_diff_eq!(out.working[k], ideal[k], epsilon = 1e-10);
            }
        }
        // Adjacent pieces agree along their shared edge.
        for s1 in 0..map.simplices.len() {
            for s2 in s1 + 1..map.simplices.len() {
                let shared: Vec<usize> = map.simplices[s1]
                    .iter()
                    .filter(|i| map.simplices[s2].contains(i))
                    .copied()
                    .collect();
                if shared.len() != 2 {
                    continue;
                }
                let (a, b) = (
                    map.points[shared[0]].measured,
                    map.points[shared[1]].measured,
                );
                for frac in [0.25, 0.5, 0.75] {
                    let p = [
                        a[1] + frac * (b[1] - a[1]),
                        a[2] + frac * (b[2] - a[2]),
                    ];
                    let apply = |t: &[[f64; 3]; 3]| {
                        [
                            t[0][0] * p[0] + t[0][1] * p[1] + t[0][2],
                            t[1][0] * p[0] + t[1][1] * p[1] + t[1][2],
                        ]
                    };
                    let u = apply(&map.transforms[s1]);
                    let v = apply(&map.transforms[s2]);
                    assert_abs_diff_eq!(u[0], v[0], epsilon = 1e-9);
                    assert_abs_diff_eq!(u[1], v[1], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn interior_points_improve_under_mitigation() {
        let noise = crate::qdevice::builtin_calibration(1).unwrap();
        let device = DeviceContext {
            noise: Some(noise),
            sampling: crate::qdevice::SamplingMode::Exact,
        };
        let map = calibrate(&device, 5, 2).unwrap();
        for (t1, t2) in [(1.1, 0.4), (2.2, 1.0), (2.9, 2.0), (0.6, 0.2)] {
            let params = CircuitParams {
                theta1: t1,
                theta2: t2,
            };
            let rec = device.run(params, 0).unwrap();
            let ideal = ideal_populations(params).unwrap();
            let out = mitigate(&map, &rec).unwrap();
            let raw_err = ((rec.occupations[1] - ideal[1]).powi(2)
                + (rec.occupations[2] - ideal[2]).powi(2))
            .sqrt();
            let corr_err = ((out.corrected[0] - ideal[1]).powi(2)
                + (out.corrected[1] - ideal[2]).powi(2))
            .sqrt();
            assert!(
                corr_err < 0.35 * raw_err,
                "mitigation too weak at ({t1}, {t2}): {corr_err:.2e} vs raw {raw_err:.2e}"
            );
        }
    }

    #[test]
    fn degenerate_device_response_is_rejected() {
        // Readout error 1/2 on every qubit erases all angle dependence.
        let noise = NoiseModel {
            p_ry1: 0.0,
            p_cx13: 0.0,
            p_ry2: 0.0,
            p_cx21: 0.0,
            readout: [0.5, 0.5, 0.5],
        };
        let device = DeviceContext {
            noise: Some(noise),
            sampling: crate::qdevice::SamplingMode::Exact,
        };
        match calibrate(&device, 1, 2) {
            Err(Error::Calibration(_)) => {}
            other => panic!("expected calibration failure, got {other:?}"),
        }
    }

    #[test]
    fn clamp_is_the_nearest_feasible_point_in_the_pinned_metric() {
        let mut rng = seeds::rng(77);
        for _ in 0..300 {
            let n5: f64 = rng.random_range(-0.8..1.8);
            let n6: f64 = rng.random_range(-0.8..1.8);
            let ([c5, c6], clamped) = clamp_to_reconstruction_triangle(n5, n6);
            assert!(c5 >= 0.0 && c6 >= 0.0 && c5 + c6 <= 1.0 + 1e-15);
            let inside = n5 >= 0.0 && n6 >= 0.0 && n5 + n6 <= 1.0;
            assert_eq!(clamped, !inside);
            if !clamped {
                assert_eq!([c5, c6], [n5, n6]);
                continue;
            }
            // Optimality oracle: no feasible grid point may be closer in
            // the pinned-plane metric.
            let d = [n5 - c5, n6 - c6];
            let best = pinned_metric(d, d);
            for i in 0..=40 {
                for j in 0..=(40 - i) {
                    let q = [i as f64 / 40.0, j as f64 / 40.0];
                    let dq = [n5 - q[0], n6 - q[1]];
                    assert!(pinned_metric(dq, dq) >= best - 1e-9);
                }
            }
        }
    }

    #[test]
    fn canonical_spectrum_is_always_a_polytope_member() {
        let mut rng = seeds::rng(0xC0DE);
        for _ in 0..2000 {
            let n5: f64 = rng.random_range(0.0..1.0);
            let n6: f64 = rng.random_range(0.0..(1.0 - n5));
            let n4 = n5 + n6;
            let c = canonical_triple(n4, n5, n6);
            let margins = polytope_margins(c[0], c[1], c[2]);
            for m in margins {
                assert!(
                    m >= -1e-12,
                    "canonical of ({n4}, {n5}, {n6}) = {c:?} violates {margins:?}"
                );
            }
            assert!(c[0] >= c[1] && c[1] >= c[2]);
        }
        // Boundary spot checks.
        assert_eq!(canonical_triple(1.0, 1.0, 0.0), [0.0, 0.0, 0.0]);
        assert_eq!(canonical_triple(1.0, 0.5, 0.5), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn out_of_region_points_use_the_nearest_piece_continuously() {
        let noise = crate::qdevice::builtin_calibration(2).unwrap();
        let device = DeviceContext {
            noise: Some(noise),
            sampling: crate::qdevice::SamplingMode::Exact,
        };
        let map = calibrate(&device, 3, 2).unwrap();
        // A marginal vector with p2 > p3 lies outside the calibrated
        // triangle; mitigation must still resolve a piece and stay finite.
        let rec = MeasurementRecord::exact([0.45, 0.52, 0.08]);
        let out = mitigate(&map, &rec).unwrap();
        assert!(out.simplex.is_some());
        assert!(out.working.iter().all(|v| v.is_finite()));
        // Continuity across the lookup seam: nearby inputs, nearby outputs.
        let rec2 = MeasurementRecord::exact([0.45, 0.52 + 1e-9, 0.08]);
        let out2 = mitigate(&map, &rec2).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(out.working[k], out2.working[k], epsilon = 1e-6);
        }
    }

    #[test]
    fn identity_map_passes_marginals_through() {
        let map = MitigationMap::identity();
        let rec = MeasurementRecord::exact([0.3, 0.41, 0.27]);
        let out = mitigate(&map, &rec).unwrap();
        assert_eq!(out.corrected, [0.41, 0.27]);
        assert_eq!(out.simplex, None);
        assert_eq!(out.working[0], out.working[1] + out.working[2]);

        let bad = MeasurementRecord::exact([0.3, f64::NAN, 0.2]);
        assert!(mitigate(&map, &bad).is_err());
    }

    #[test]
    fn map_serializes_and_restores() {
        let noise = crate::qdevice::builtin_calibration(4).unwrap();
        let device = DeviceContext {
            noise: Some(noise),
            sampling: crate::qdevice::SamplingMode::Exact,
        };
        let map = calibrate(&device, 12, 2).unwrap();
        let json = serde_json::to_string(&map).unwrap();
        let back: MitigationMap = serde_json::from_str(&json).unwrap();
        assert_eq!(map, back);
        let rec = device
            .run(CircuitParams { theta1: 1.9, theta2: 0.8 }, 0)
            .unwrap();
        assert_eq!(
            mitigate(&map, &rec).unwrap(),
            mitigate(&back, &rec).unwrap()
        );
    }
}
