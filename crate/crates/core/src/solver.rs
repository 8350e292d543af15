//! Hybrid solver loop: a sampled two-angle circuit stage alternating with a
//! classical orbital-rotation stage, plus the dissociation-scan driver.
//!
//! One quantum-stage evaluation runs the whole short pipeline: prepare the
//! three-qubit state for (theta1, theta2), measure the qubit occupations on
//! the configured device, push them through the calibrated mitigation map
//! onto the pinned occupation surface, reconstruct the three-determinant
//! 2-RDM with the angle-derived coherence signs, and trace it against the
//! reduced Hamiltonian of the current orbitals. A Nelder-Mead simplex walks
//! the two angles; a second Nelder-Mead then relaxes the orbitals at fixed
//! 2-RDM through six Givens angles, three per spin sector, because the
//! natural orbitals the ansatz is pinned to are different spatial functions
//! for the two spins. The macro loop alternates the two stages until their
//! energies agree, which typically takes two to four rounds.
//!
//! Every reconstructed 2-RDM is the reduced density matrix of an actual
//! three-electron wavefunction, so each evaluated energy sits above the FCI
//! ground state no matter how noisy the measurement was: noise loosens the
//! variational bound, it cannot break it.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    apply_spin_givens, build_reduced_hamiltonian, energy, GivensAngles, MolecularOrbitals,
    OrbitalSource, ReducedHamiltonian,
};
use crate::integrals::{linear_h3_integrals, lowdin_orthogonalizer, IntegralSet};
use crate::mitigation::{calibrate, mitigate, MitigationMap, MitigationOutcome};
use crate::qdevice::{CircuitParams, DeviceContext, MeasurementRecord, NoiseModel, DEFAULT_SHOTS};
use crate::rdm::{
    complete_occupations, contract_to_1rdm, mott_tau, reconstruct_2rdm, sign_map,
    OccupationVector, SignAssignment, TwoRDM,
};
use crate::reference::{fci, hf_determinant_1rdm, rohf};
use crate::seeds::{self, stream};

/// Default quantum-stage termination: simplex radius of a tenth of a degree.
pub const THETA_RADIUS_DEFAULT: f64 = 0.1 * PI / 180.0;

/// Smallest nearest-neighbor separation a scan will accept, in angstrom;
/// below this the STO-3G overlap matrix heads toward linear dependence.
pub const MIN_SCAN_R: f64 = 0.3;

/// Cold-start simplex for the two circuit angles: wide enough to span the
/// whole occupation triangle, because the energy surface is flat along the
/// theta1 = 0 axis (every point there is the bare Hartree-Fock determinant)
/// and a small simplex started next to that axis collapses onto it.
const BASE_SIMPLEX: [[f64; 2]; 3] = [[0.3, 0.3], [2.4, 0.3], [0.3, 2.4]];

/// Quadrant images of a point probed on a cold start: reflecting an angle
/// across pi (theta -> 2 pi - theta) leaves every squared half-angle, and
/// with it the whole occupation landscape, untouched while flipping the
/// coherence signs of the reconstruction. One simplex per image therefore
/// probes every sign class from the same occupation-space position.
const QUADRANT_REFLECTIONS: [[bool; 2]; 4] = [
    [false, false],
    [true, false],
    [false, true],
    [true, true],
];

/// Edge length of the warm-start simplex around the incumbent angles.
const WARM_OFFSET: f64 = 0.25;

/// Edge length of the orbital-stage initial simplex (radians).
const ORBITAL_SIMPLEX_STEP: f64 = 0.15;

/// Evaluation budget of one valley-extrapolation angle search.
const VALLEY_MAX_EVALS: usize = 32;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How the emulated device produces measurement statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Infinite shots, no noise: deterministic populations.
    Exact,
    /// Finite shot sampling of the ideal state.
    Sampled,
    /// Finite shot sampling with the gate/readout noise model applied.
    Noisy,
}

/// Everything the solver needs besides the geometry.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: RunMode,
    /// Shots per energy evaluation (ignored in exact mode).
    pub shots: u64,
    /// Noise model; required when `mode` is [`RunMode::Noisy`].
    pub noise: Option<NoiseModel>,
    /// Whether to calibrate and apply the occupation-space mitigation map.
    pub mitigation: bool,
    /// Subdivision order of the calibration lattice.
    pub grid_order: u32,
    /// Root seed; every stochastic consumer derives its own stream from it.
    pub seed: u64,
    /// Quantum-stage termination: maximum vertex-to-centroid distance.
    pub theta_radius: f64,
    pub quantum_max_evals: usize,
    /// Orbital-stage termination: energy spread across the simplex.
    pub orbital_spread: f64,
    pub orbital_max_evals: usize,
    /// Macro-loop termination: |E_quantum - E_orbital| below this, in Ha.
    pub macro_threshold: f64,
    pub max_macro_iters: u32,
    /// Worker threads for [`scan`]; above 1 every point runs independently
    /// (no warm starts) on its own derived seed.
    pub scan_threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: RunMode::Exact,
            shots: DEFAULT_SHOTS,
            noise: None,
            mitigation: true,
            grid_order: 2,
            seed: 7,
            theta_radius: THETA_RADIUS_DEFAULT,
            quantum_max_evals: 200,
            orbital_spread: 1e-9,
            orbital_max_evals: 400,
            macro_threshold: 1e-4,
            max_macro_iters: 10,
            scan_threads: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_radius > 0.0) {
            return Err(Error::Argument(format!(
                "quantum-stage simplex radius must be positive, got {}",
                self.theta_radius
            )));
        }
        if !(self.orbital_spread > 0.0) {
            return Err(Error::Argument(format!(
                "orbital-stage energy spread must be positive, got {}",
                self.orbital_spread
            )));
        }
        if !(self.macro_threshold > 0.0) {
            return Err(Error::Argument(format!(
                "macro convergence threshold must be positive, got {}",
                self.macro_threshold
            )));
        }
        if self.max_macro_iters == 0 {
            return Err(Error::Argument("need at least one macro iteration".into()));
        }
        if self.quantum_max_evals < 3 || self.orbital_max_evals < 4 {
            return Err(Error::Argument(
                "evaluation budgets must cover at least the initial simplex".into(),
            ));
        }
        if self.mode != RunMode::Exact && self.shots == 0 {
            return Err(Error::Argument("shot count must be positive".into()));
        }
        if self.mode == RunMode::Noisy && self.noise.is_none() {
            return Err(Error::Argument(
                "noisy mode needs a noise model (load or build a calibration first)".into(),
            ));
        }
        if self.scan_threads == 0 {
            return Err(Error::Argument("scan needs at least one thread".into()));
        }
        Ok(())
    }

    /// The emulated device this configuration describes.
    pub fn device(&self) -> Result<DeviceContext> {
        self.validate()?;
        Ok(match self.mode {
            RunMode::Exact => DeviceContext::exact(),
            RunMode::Sampled => DeviceContext::sampled(self.shots),
            RunMode::Noisy => DeviceContext::noisy(
                self.noise.clone().expect("validated above"),
                self.shots,
            ),
        })
    }
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// Which half of the alternation produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Quantum,
    Orbital,
}

/// One objective evaluation as stored in the solver trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub stage: Stage,
    pub macro_iter: u32,
    /// (theta1, theta2) for quantum records; the six Givens angles for
    /// orbital records, alpha sector (g12, g13, g23) then beta.
    pub params: Vec<f64>,
    /// Qubit occupations straight off the device (quantum stage only).
    pub raw_occupations: Option<[f64; 3]>,
    /// Mitigated working triple (n4, n5, n6) (quantum stage only).
    pub mitigated: Option<[f64; 3]>,
    pub energy: f64,
    /// Running minimum over all evaluations so far; non-increasing.
    pub best_energy: f64,
}

/// Summary of one macro iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacroRecord {
    pub index: u32,
    /// Best quantum-stage energy of this iteration.
    pub e_quantum: f64,
    /// Energy of the last orbital relaxation this iteration (after the
    /// valley extension when one was accepted).
    pub e_orbital: f64,
    /// Circuit angles the iteration ended with.
    pub theta: [f64; 2],
    /// Alpha-sector rotation of the iteration's last orbital relaxation.
    pub givens_alpha: GivensAngles,
    /// Beta-sector rotation of the iteration's last orbital relaxation.
    pub givens_beta: GivensAngles,
    /// Rotation steps the frame advanced this iteration: 1 is the plain
    /// stage optimum, more means the valley extension accepted links.
    pub rotation_applications: u32,
    /// Device evaluations this iteration (stage plus valley extension).
    pub quantum_evals: usize,
    pub orbital_evals: usize,
}

/// Full evaluation history of one solver run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverTrace {
    pub evals: Vec<EvalRecord>,
    pub macros: Vec<MacroRecord>,
}

// ---------------------------------------------------------------------------
// Quantum-stage objective
// ---------------------------------------------------------------------------

/// Borrowed state shared by every quantum-stage evaluation within one macro
/// iteration: the reduced Hamiltonian of the current orbitals, the device,
/// and the calibration-derived mitigation map.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub ham: &'a ReducedHamiltonian,
    pub device: &'a DeviceContext,
    pub map: &'a MitigationMap,
}

/// Everything one quantum-stage evaluation produces.
#[derive(Debug, Clone)]
pub struct QuantumEval {
    pub energy: f64,
    pub theta: [f64; 2],
    pub occupations: OccupationVector,
    pub signs: SignAssignment,
    pub d2: TwoRDM,
    pub mitigation: MitigationOutcome,
    pub record: MeasurementRecord,
}

/// Run the measure-mitigate-reconstruct-trace pipeline once.
///
/// The returned energy is the exact pair-space trace of the reconstructed
/// 2-RDM; sampling noise enters only through the measured occupations.
pub fn quantum_energy(
    theta1: f64,
    theta2: f64,
    ctx: &EvalContext<'_>,
    seed: u64,
) -> Result<QuantumEval> {
    let params = CircuitParams::new(theta1, theta2)?;
    let record = ctx.device.run(params, seed)?;
    let outcome = mitigate(ctx.map, &record)?;
    let [n4, n5, n6] = outcome.working;
    let occupations = complete_occupations(n4, n5, n6)?;
    let signs = sign_map(theta1, theta2);
    let d2 = reconstruct_2rdm(&occupations, &signs)?;
    let e = energy(ctx.ham, &d2)?;
    Ok(QuantumEval {
        energy: e,
        theta: [theta1, theta2],
        occupations,
        signs,
        d2,
        mitigation: outcome,
        record,
    })
}

// ---------------------------------------------------------------------------
// Nelder-Mead
// ---------------------------------------------------------------------------

/// Termination and domain options for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NmOptions {
    /// Stop once every vertex lies within this distance of the simplex
    /// centroid (0 disables the criterion).
    pub radius_tol: f64,
    /// Stop once the objective spread across the simplex drops to or below
    /// this value (0 disables the criterion).
    pub spread_tol: f64,
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Component-wise clamp applied to every candidate before evaluation.
    pub bounds: Option<Vec<(f64, f64)>>,
}

/// One recorded evaluation of a [`nelder_mead`] run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NmEval {
    pub x: Vec<f64>,
    pub f: f64,
}

/// Result of a [`nelder_mead`] run: the best point ever evaluated plus the
/// full evaluation history.
#[derive(Debug, Clone)]
pub struct NmResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Index into `evals` of the winning evaluation.
    pub best_tag: usize,
    pub evals: Vec<NmEval>,
    /// False when the evaluation budget ran out before a termination
    /// criterion was met; `best_x` is then simply the best point so far.
    pub converged: bool,
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
    /// Evaluation index at creation; ties in the objective are broken
    /// toward the earlier evaluation so runs are bitwise reproducible.
    tag: usize,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn eval_point<F>(objective: &mut F, evals: &mut Vec<NmEval>, x: Vec<f64>) -> Result<Vertex>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let f = objective(&x)?;
    if !f.is_finite() {
        return Err(Error::Optimizer(format!(
            "objective returned non-finite value {f} at {x:?}"
        )));
    }
    let tag = evals.len();
    evals.push(NmEval { x: x.clone(), f });
    Ok(Vertex { x, f, tag })
}

/// Downhill simplex with the classic coefficients (reflection 1,
/// expansion 2, contraction 1/2, shrink 1/2).
///
/// `initial` must hold n+1 points of dimension n. Candidates are clamped to
/// `bounds` before evaluation, so the objective never sees points outside
/// the box. A non-finite objective value aborts with
/// [`Error::Optimizer`]; errors from the objective itself propagate as-is.
pub fn nelder_mead<F>(mut objective: F, initial: &[Vec<f64>], opts: &NmOptions) -> Result<NmResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let m = initial.len();
    if m < 2 {
        return Err(Error::Argument(
            "simplex needs at least two vertices".into(),
        ));
    }
    let dim = m - 1;
    if initial.iter().any(|v| v.len() != dim) {
        return Err(Error::Argument(format!(
            "{m} simplex vertices must each have dimension {dim}"
        )));
    }
    if let Some(b) = &opts.bounds {
        if b.len() != dim {
            return Err(Error::Argument(format!(
                "bounds cover {} coordinates, the simplex has {dim}",
                b.len()
            )));
        }
    }
    if opts.max_evals < m {
        return Err(Error::Argument(
            "evaluation budget is smaller than the initial simplex".into(),
        ));
    }

    let clip = |mut x: Vec<f64>| -> Vec<f64> {
        if let Some(b) = &opts.bounds {
            for (xi, (lo, hi)) in x.iter_mut().zip(b.iter()) {
                *xi = xi.clamp(*lo, *hi);
            }
        }
        x
    };

    let mut evals: Vec<NmEval> = Vec::new();
    let mut simplex: Vec<Vertex> = Vec::with_capacity(m);
    for v in initial {
        simplex.push(eval_point(&mut objective, &mut evals, clip(v.clone()))?);
    }

    let mut converged = false;
    'outer: loop {
        // Lexicographic order (objective, insertion index).
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f).then(a.tag.cmp(&b.tag)));

        let mut centroid_all = vec![0.0; dim];
        for v in &simplex {
            for k in 0..dim {
                centroid_all[k] += v.x[k] / m as f64;
            }
        }
        let max_dist = simplex
            .iter()
            .map(|v| euclid(&v.x, &centroid_all))
            .fold(0.0, f64::max);
        let spread = simplex[m - 1].f - simplex[0].f;
        if (opts.radius_tol > 0.0 && max_dist < opts.radius_tol)
            || (opts.spread_tol > 0.0 && spread <= opts.spread_tol)
        {
            converged = true;
            break;
        }
        if evals.len() >= opts.max_evals {
            break;
        }

        // Centroid of everything but the worst vertex.
        let mut c = vec![0.0; dim];
        for v in &simplex[..dim] {
            for k in 0..dim {
                c[k] += v.x[k] / dim as f64;
            }
        }
        let x_worst = simplex[m - 1].x.clone();
        let toward = |alpha: f64| -> Vec<f64> {
            (0..dim).map(|k| c[k] + alpha * (c[k] - x_worst[k])).collect()
        };

        let reflected = eval_point(&mut objective, &mut evals, clip(toward(1.0)))?;
        if reflected.f < simplex[0].f {
            if evals.len() < opts.max_evals {
                let expanded = eval_point(&mut objective, &mut evals, clip(toward(2.0)))?;
                simplex[m - 1] = if expanded.f < reflected.f {
                    expanded
                } else {
                    reflected
                };
            } else {
                simplex[m - 1] = reflected;
            }
            continue;
        }
        if reflected.f < simplex[m - 2].f {
            simplex[m - 1] = reflected;
            continue;
        }
        if evals.len() >= opts.max_evals {
            break;
        }
        if reflected.f < simplex[m - 1].f {
            let outside = eval_point(&mut objective, &mut evals, clip(toward(0.5)))?;
            if outside.f <= reflected.f {
                simplex[m - 1] = outside;
                continue;
            }
        } else {
            let inside = eval_point(&mut objective, &mut evals, clip(toward(-0.5)))?;
            if inside.f < simplex[m - 1].f {
                simplex[m - 1] = inside;
                continue;
            }
        }
        // Shrink toward the best vertex; convex combinations stay in the box.
        for i in 1..m {
            if evals.len() >= opts.max_evals {
                break 'outer;
            }
            let x: Vec<f64> = (0..dim)
                .map(|k| simplex[0].x[k] + 0.5 * (simplex[i].x[k] - simplex[0].x[k]))
                .collect();
            simplex[i] = eval_point(&mut objective, &mut evals, x)?;
        }
    }

    let mut best = 0;
    for (i, e) in evals.iter().enumerate() {
        if e.f < evals[best].f {
            best = i;
        }
    }
    Ok(NmResult {
        best_x: evals[best].x.clone(),
        best_f: evals[best].f,
        best_tag: best,
        evals,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

fn reflected_simplex(reflect: [bool; 2]) -> [[f64; 2]; 3] {
    BASE_SIMPLEX.map(|v| {
        [
            if reflect[0] { TAU - v[0] } else { v[0] },
            if reflect[1] { TAU - v[1] } else { v[1] },
        ]
    })
}

fn warm_simplex(theta: [f64; 2]) -> [[f64; 2]; 3] {
    let step = |t: f64| if t + WARM_OFFSET <= TAU { WARM_OFFSET } else { -WARM_OFFSET };
    [
        theta,
        [theta[0] + step(theta[0]), theta[1]],
        [theta[0], theta[1] + step(theta[1])],
    ]
}

/// Append one orbital-stage evaluation to the trace.
fn record_orbital_eval(
    trace: &mut SolverTrace,
    best_overall: &mut f64,
    macro_idx: u32,
    x: &[f64],
    e: f64,
) {
    if e < *best_overall {
        *best_overall = e;
    }
    trace.evals.push(EvalRecord {
        stage: Stage::Orbital,
        macro_iter: macro_idx,
        params: x.to_vec(),
        raw_occupations: None,
        mitigated: None,
        energy: e,
        best_energy: *best_overall,
    });
}

/// One traced Nelder-Mead descent over the two circuit angles. Every
/// evaluation draws its seed from `tag` / the macro index / a running
/// counter and lands in the trace as a quantum record.
#[allow(clippy::too_many_arguments)]
fn theta_simplex_search(
    cfg: &SolverConfig,
    ctx: &EvalContext<'_>,
    macro_idx: u32,
    initial: &[[f64; 2]; 3],
    tag: u64,
    counter: &mut u64,
    max_evals: usize,
    trace: &mut SolverTrace,
    best_overall: &mut f64,
) -> Result<(f64, [f64; 2], QuantumEval, usize)> {
    let mut cache: Vec<QuantumEval> = Vec::new();
    let result = {
        let objective = |x: &[f64]| -> Result<f64> {
            let seed = seeds::derive(cfg.seed, &[tag, u64::from(macro_idx), *counter]);
            *counter += 1;
            let qe = quantum_energy(x[0], x[1], ctx, seed)?;
            if qe.energy < *best_overall {
                *best_overall = qe.energy;
            }
            trace.evals.push(EvalRecord {
                stage: Stage::Quantum,
                macro_iter: macro_idx,
                params: x.to_vec(),
                raw_occupations: Some(qe.record.occupations),
                mitigated: Some(qe.mitigation.working),
                energy: qe.energy,
                best_energy: *best_overall,
            });
            let e = qe.energy;
            cache.push(qe);
            Ok(e)
        };
        let initial: Vec<Vec<f64>> = initial.iter().map(|v| v.to_vec()).collect();
        nelder_mead(
            objective,
            &initial,
            &NmOptions {
                radius_tol: cfg.theta_radius,
                spread_tol: 0.0,
                max_evals,
                bounds: Some(vec![(0.0, TAU), (0.0, TAU)]),
            },
        )?
    };
    let evals = result.evals.len();
    let qe = cache[result.best_tag].clone();
    Ok((result.best_f, [result.best_x[0], result.best_x[1]], qe, evals))
}

/// Minimize the measured energy over the two circuit angles.
///
/// A cold start runs one simplex per sign quadrant and keeps the best; a
/// warm start re-evaluates the incumbent angles as a fresh simplex vertex
/// (so a lucky noisy measurement cannot survive into the next iteration)
/// and searches around them.
fn quantum_stage(
    cfg: &SolverConfig,
    ctx: &EvalContext<'_>,
    macro_idx: u32,
    warm_theta: Option<[f64; 2]>,
    trace: &mut SolverTrace,
    best_overall: &mut f64,
) -> Result<([f64; 2], QuantumEval, f64, usize)> {
    let starts: Vec<[[f64; 2]; 3]> = match warm_theta {
        Some(t) => vec![warm_simplex(t)],
        None => QUADRANT_REFLECTIONS
            .iter()
            .map(|r| reflected_simplex(*r))
            .collect(),
    };
    let mut eval_counter: u64 = 0;
    let mut total_evals = 0usize;
    let mut winner: Option<(f64, [f64; 2], QuantumEval)> = None;
    for simplex in &starts {
        let (best_f, theta, qe, evals) = theta_simplex_search(
            cfg,
            ctx,
            macro_idx,
            simplex,
            stream::EVAL,
            &mut eval_counter,
            cfg.quantum_max_evals,
            trace,
            best_overall,
        )?;
        total_evals += evals;
        if winner.as_ref().map_or(true, |w| best_f < w.0) {
            winner = Some((best_f, theta, qe));
        }
    }
    let (best_f, theta, qe) = winner.expect("at least one start runs");
    Ok((theta, qe, best_f, total_evals))
}

fn givens_pair(x: &[f64]) -> (GivensAngles, GivensAngles) {
    (
        GivensAngles { g12: x[0], g13: x[1], g23: x[2] },
        GivensAngles { g12: x[3], g13: x[4], g23: x[5] },
    )
}

/// Result of one orbital stage.
#[derive(Debug, Clone)]
pub struct OrbitalStageOutcome {
    pub mos: MolecularOrbitals,
    /// Winning rotation of the alpha sector.
    pub alpha: GivensAngles,
    /// Winning rotation of the beta sector.
    pub beta: GivensAngles,
    pub energy: f64,
}

/// Relax the orbitals at fixed 2-RDM: minimize the pair-space trace over
/// six Givens angles, one spatial rotation per spin sector.
///
/// The zero-rotation point is the first simplex vertex, so the returned
/// energy never exceeds the input energy (up to float noise), and the stage
/// is a no-op whenever the current orbitals are already optimal for `d2`.
pub fn orbital_stage(
    d2: &TwoRDM,
    mos: &MolecularOrbitals,
    ints: &IntegralSet,
    spread_tol: f64,
    max_evals: usize,
) -> Result<OrbitalStageOutcome> {
    orbital_stage_traced(d2, mos, ints, spread_tol, max_evals, &mut |_, _| {})
}

fn orbital_stage_traced(
    d2: &TwoRDM,
    mos: &MolecularOrbitals,
    ints: &IntegralSet,
    spread_tol: f64,
    max_evals: usize,
    sink: &mut dyn FnMut(&[f64], f64),
) -> Result<OrbitalStageOutcome> {
    let mut objective = |x: &[f64]| -> Result<f64> {
        let (alpha, beta) = givens_pair(x);
        let rotated = apply_spin_givens(mos, &alpha, &beta);
        let ham = build_reduced_hamiltonian(ints, &rotated)?;
        let e = energy(&ham, d2)?;
        sink(x, e);
        Ok(e)
    };
    let d = ORBITAL_SIMPLEX_STEP;
    let mut initial = vec![vec![0.0; 6]];
    for k in 0..6 {
        let mut vertex = vec![0.0; 6];
        vertex[k] = d;
        initial.push(vertex);
    }
    let result = nelder_mead(
        &mut objective,
        &initial,
        &NmOptions {
            radius_tol: 0.0,
            spread_tol,
            max_evals,
            bounds: None,
        },
    )?;
    let (alpha, beta) = givens_pair(&result.best_x);
    Ok(OrbitalStageOutcome {
        mos: apply_spin_givens(mos, &alpha, &beta),
        alpha,
        beta,
        energy: result.best_f,
    })
}

// ---------------------------------------------------------------------------
// Macro loop
// ---------------------------------------------------------------------------

/// Optional continuation state: starting orbitals and, if known, incumbent
/// circuit angles from a neighboring calculation.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub mos: MolecularOrbitals,
    pub theta: Option<[f64; 2]>,
}

/// Final state of one hybrid run.
///
/// The reported energy is always the exact pair-space trace of `d2` in the
/// returned orbitals, but which snapshot gets reported depends on the run
/// mode. Exact-expectation runs return the joint optimum reached after the
/// last orbital stage. Finite-shot runs return the best simplex point of
/// the last quantum stage in the orbitals it was measured in -- the same
/// best-point energy the run tracked while optimizing, so the answer can
/// be more accurate than single-evaluation sampling noise but is never
/// polished after the fact. A finite-shot run that exhausts its iteration
/// budget falls back to the lowest measured round winner instead.
#[derive(Debug, Clone)]
pub struct SolverOutcome {
    /// Reported final energy (see the type-level rules).
    pub energy: f64,
    /// Measured energy of the reported quantum-stage point. Equals `energy`
    /// under finite shots; in exact mode `energy` is lower by the final
    /// orbital relaxation.
    pub e_quantum: f64,
    pub theta: [f64; 2],
    /// Working occupation triple (n4, n5, n6) behind `d2`.
    pub occupations: [f64; 3],
    /// Canonically ordered occupation spectrum (diagnostic).
    pub canonical: [f64; 3],
    pub signs: SignAssignment,
    pub d2: TwoRDM,
    /// Orbitals the reported state lives in: the last rotated frame in
    /// exact mode, the measurement frame of the reported point otherwise.
    pub mos: MolecularOrbitals,
    /// False when the macro loop exhausted its iteration budget; the fields
    /// then hold the best state found so far.
    pub converged: bool,
    pub macro_iters: u32,
    pub trace: SolverTrace,
}

/// Alternate the quantum and orbital stages until their energies agree.
///
/// Without a warm start the orbitals begin at the ROHF solution and the
/// first quantum stage probes all four sign quadrants. Later iterations
/// search around the incumbent angles only.
///
/// In exact-expectation mode each round ends with a valley extension. The
/// two stages couple through the shared wavefunction, so at stretched
/// geometries the alternation creeps down a diagonal valley in steps
/// proportional to the per-round energy gap -- the very quantity the loop
/// uses as its convergence measure -- and the bare alternation stalls an
/// order of magnitude short of the joint optimum while formally converged.
/// The extension repeats the round's winning rotation a doubling number of
/// extra times, lets a short device-driven angle search respond in the
/// extended frame, re-relaxes the orbitals at the accepted state to pick
/// up a fresh direction, and keeps going while each link lowers the
/// energy. A round whose extension gains more than the convergence
/// threshold is not allowed to declare convergence, so the loop ends only
/// when the stage energies agree and extending the step buys nothing.
/// Under finite shots the extension is skipped: the creep it removes sits
/// an order of magnitude below the sampling noise, and its acceptance test
/// would be comparing noise with noise.
pub fn macro_loop(
    config: &SolverConfig,
    ints: &IntegralSet,
    warm: Option<&WarmStart>,
) -> Result<SolverOutcome> {
    config.validate()?;
    let device = config.device()?;
    let map = if config.mitigation {
        calibrate(&device, config.seed, config.grid_order)?
    } else {
        MitigationMap::identity()
    };

    let mut mos = match warm {
        Some(w) => w.mos.clone(),
        None => rohf(ints)?.mos,
    };
    let mut warm_theta = warm.and_then(|w| w.theta);
    let mut trace = SolverTrace::default();
    let mut best_overall = f64::INFINITY;
    let mut converged = false;
    let mut macro_iters = 0u32;
    let mut best: Option<([f64; 2], QuantumEval)> = None;
    let mut e_final = f64::NAN;
    // Finite-shot reporting snapshots: each round's winner in the orbitals
    // it was measured in, plus the lowest-energy winner seen so far for the
    // exhausted-budget fallback.
    let mut shot_last: Option<([f64; 2], QuantumEval, MolecularOrbitals)> = None;
    let mut shot_best: Option<([f64; 2], QuantumEval, MolecularOrbitals)> = None;

    for macro_idx in 0..config.max_macro_iters {
        macro_iters = macro_idx + 1;
        let ham = build_reduced_hamiltonian(ints, &mos)?;
        let ctx = EvalContext {
            ham: &ham,
            device: &device,
            map: &map,
        };
        let (theta, qe, e_quantum, mut quantum_evals) =
            quantum_stage(config, &ctx, macro_idx, warm_theta, &mut trace, &mut best_overall)?;

        let mut orbital_evals = 0usize;
        let stage = {
            let mut sink = |x: &[f64], e: f64| {
                orbital_evals += 1;
                record_orbital_eval(&mut trace, &mut best_overall, macro_idx, x, e);
            };
            orbital_stage_traced(
                &qe.d2,
                &mos,
                ints,
                config.orbital_spread,
                config.orbital_max_evals,
                &mut sink,
            )?
        };
        let gap_converged = (e_quantum - stage.energy).abs() < config.macro_threshold;

        // End-of-round state; the valley extension moves it further down.
        let mut next_theta = theta;
        let mut next_qe = qe;
        let mut next_mos = stage.mos.clone();
        let mut e_round = stage.energy;
        let mut direction = (stage.alpha, stage.beta);
        let mut applications = 1u32;
        if config.mode == RunMode::Exact
            && macro_idx + 1 < config.max_macro_iters
            && direction.0.norm().hypot(direction.1.norm()) > 1e-9
        {
            let mut extra = 1u32;
            let mut probe: u64 = 0;
            while applications < 1024 {
                let mut cand_mos = next_mos.clone();
                for _ in 0..extra {
                    cand_mos = apply_spin_givens(&cand_mos, &direction.0, &direction.1);
                }
                let cand_ham = build_reduced_hamiltonian(ints, &cand_mos)?;
                let cand_ctx = EvalContext {
                    ham: &cand_ham,
                    device: &device,
                    map: &map,
                };
                let simplex = warm_simplex(next_theta);
                let (e_cand, cand_theta, cand_qe, evals) = theta_simplex_search(
                    config,
                    &cand_ctx,
                    macro_idx,
                    &simplex,
                    stream::VALLEY,
                    &mut probe,
                    VALLEY_MAX_EVALS,
                    &mut trace,
                    &mut best_overall,
                )?;
                quantum_evals += evals;
                if !(e_cand < e_round - 1e-13) {
                    break;
                }
                // Re-relax the orbitals at the accepted state so the next
                // link follows the valley instead of the stale direction.
                let relaxed = {
                    let mut sink = |x: &[f64], e: f64| {
                        orbital_evals += 1;
                        record_orbital_eval(&mut trace, &mut best_overall, macro_idx, x, e);
                    };
                    orbital_stage_traced(
                        &cand_qe.d2,
                        &cand_mos,
                        ints,
                        config.orbital_spread,
                        config.orbital_max_evals,
                        &mut sink,
                    )?
                };
                e_round = relaxed.energy;
                next_theta = cand_theta;
                next_qe = cand_qe;
                next_mos = relaxed.mos;
                direction = (relaxed.alpha, relaxed.beta);
                applications += extra;
                extra = applications;
            }
        }

        trace.macros.push(MacroRecord {
            index: macro_idx,
            e_quantum,
            e_orbital: e_round,
            theta: next_theta,
            givens_alpha: direction.0,
            givens_beta: direction.1,
            rotation_applications: applications,
            quantum_evals,
            orbital_evals,
        });
        if config.mode != RunMode::Exact {
            let snap = (next_theta, next_qe.clone(), mos.clone());
            if shot_best
                .as_ref()
                .map_or(true, |(_, qe, _)| next_qe.energy < qe.energy)
            {
                shot_best = Some(snap.clone());
            }
            shot_last = Some(snap);
        }
        mos = next_mos;
        warm_theta = Some(next_theta);
        best = Some((next_theta, next_qe));
        e_final = e_round;
        if gap_converged && stage.energy - e_round < config.macro_threshold {
            converged = true;
            break;
        }
    }

    if config.mode != RunMode::Exact {
        // Finite-shot runs report the best simplex point rather than the
        // subsequently rotated state: the answer is a measured point, in
        // the orbitals it was measured in. Converged runs take the last
        // round's winner (whose incumbent was freshly re-measured at the
        // round's warm start); exhausted runs fall back on the lowest
        // round winner recorded along the way.
        let (theta, qe, frame) = if converged { shot_last } else { shot_best }
            .expect("at least one macro iteration runs");
        return Ok(SolverOutcome {
            energy: qe.energy,
            e_quantum: qe.energy,
            theta,
            occupations: qe.mitigation.working,
            canonical: qe.mitigation.canonical,
            signs: qe.signs,
            d2: qe.d2,
            mos: frame,
            converged,
            macro_iters,
            trace,
        });
    }

    let (theta, qe) = best.expect("at least one macro iteration runs");
    Ok(SolverOutcome {
        energy: e_final,
        e_quantum: qe.energy,
        theta,
        occupations: qe.mitigation.working,
        canonical: qe.mitigation.canonical,
        signs: qe.signs,
        d2: qe.d2,
        mos,
        converged,
        macro_iters,
        trace,
    })
}

// ---------------------------------------------------------------------------
// Dissociation scan
// ---------------------------------------------------------------------------

/// One row of a dissociation scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRecord {
    pub r_angstrom: f64,
    pub e_hybrid: f64,
    pub e_fci: f64,
    pub e_rohf: f64,
    /// (E_hybrid - E_FCI) in millihartree.
    pub error_mh: f64,
    pub tau_hybrid: f64,
    pub tau_fci: f64,
    pub tau_hf: f64,
    pub n4: f64,
    pub n5: f64,
    pub n6: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub macro_iters: u32,
    pub converged: bool,
    /// Seed the point actually ran with (derived from the root seed).
    pub seed: u64,
}

/// Scan result for one separation: either a record plus its trace, or the
/// error that stopped this point (the scan itself continues).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub r_angstrom: f64,
    pub record: Option<ScanRecord>,
    pub trace: Option<SolverTrace>,
    pub failure: Option<String>,
}

/// Run the hybrid solver across a list of separations.
///
/// Sequential scans warm-start each point from its predecessor (orbitals
/// re-orthonormalized against the new overlap, incumbent angles reused);
/// with `scan_threads > 1` the points run independently instead. Either
/// way every point derives its own seed from the root seed and its index,
/// and a failed point is recorded without aborting the rest.
pub fn scan(config: &SolverConfig, rs: &[f64]) -> Vec<ScanPoint> {
    let threads = config.scan_threads.max(1).min(rs.len().max(1));
    if threads <= 1 {
        scan_sequential(config, rs)
    } else {
        scan_parallel(config, rs, threads)
    }
}

fn scan_sequential(config: &SolverConfig, rs: &[f64]) -> Vec<ScanPoint> {
    let mut carry: Option<(MolecularOrbitals, [f64; 2])> = None;
    let mut out = Vec::with_capacity(rs.len());
    for (idx, &r) in rs.iter().enumerate() {
        match scan_point(config, idx, r, carry.as_ref()) {
            Ok((record, trace, next)) => {
                carry = Some(next);
                out.push(ScanPoint {
                    r_angstrom: r,
                    record: Some(record),
                    trace: Some(trace),
                    failure: None,
                });
            }
            Err(e) => {
                carry = None;
                out.push(ScanPoint {
                    r_angstrom: r,
                    record: None,
                    trace: None,
                    failure: Some(e.to_string()),
                });
            }
        }
    }
    out
}

fn scan_parallel(config: &SolverConfig, rs: &[f64], threads: usize) -> Vec<ScanPoint> {
    let mut out: Vec<Option<ScanPoint>> = vec![None; rs.len()];
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for t in 0..threads {
            handles.push(scope.spawn(move || {
                let mut mine = Vec::new();
                let mut idx = t;
                while idx < rs.len() {
                    let r = rs[idx];
                    let point = match scan_point(config, idx, r, None) {
                        Ok((record, trace, _)) => ScanPoint {
                            r_angstrom: r,
                            record: Some(record),
                            trace: Some(trace),
                            failure: None,
                        },
                        Err(e) => ScanPoint {
                            r_angstrom: r,
                            record: None,
                            trace: None,
                            failure: Some(e.to_string()),
                        },
                    };
                    mine.push((idx, point));
                    idx += threads;
                }
                mine
            }));
        }
        for handle in handles {
            for (idx, point) in handle.join().expect("scan worker panicked") {
                out[idx] = Some(point);
            }
        }
    });
    out.into_iter()
        .map(|p| p.expect("every scan index filled"))
        .collect()
}

/// Re-orthonormalize one frame's MO coefficients against a new overlap
/// matrix: C0 = C (C^T S C)^(-1/2). Keeps the orbital character of the
/// previous scan point as a warm start.
fn transport_frame(c_prev: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = c_prev.transpose() * s * c_prev;
    let eig = SymmetricEigen::new(m);
    let mut inv_sqrt = DMatrix::zeros(3, 3);
    for k in 0..3 {
        let lambda = eig.eigenvalues[k];
        if lambda <= 1e-10 {
            return Err(Error::Precondition(format!(
                "warm-start orbitals collapsed: overlap eigenvalue {lambda:.3e}"
            )));
        }
        inv_sqrt[(k, k)] = 1.0 / lambda.sqrt();
    }
    let m_inv_sqrt = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    Ok(c_prev * m_inv_sqrt)
}

fn transported_orbitals(
    prev: &MolecularOrbitals,
    ints: &IntegralSet,
) -> Result<MolecularOrbitals> {
    Ok(MolecularOrbitals {
        c_alpha: transport_frame(&prev.c_alpha, &ints.s)?,
        c_beta: transport_frame(&prev.c_beta, &ints.s)?,
        source: OrbitalSource::Rotated,
    })
}

fn scan_point(
    config: &SolverConfig,
    idx: usize,
    r: f64,
    carry: Option<&(MolecularOrbitals, [f64; 2])>,
) -> Result<(ScanRecord, SolverTrace, (MolecularOrbitals, [f64; 2]))> {
    if !(r > MIN_SCAN_R) {
        return Err(Error::Argument(format!(
            "R = {r} angstrom: separations must exceed {MIN_SCAN_R} angstrom"
        )));
    }
    let ints = linear_h3_integrals(r)?;
    let hf = rohf(&ints)?;
    let ham0 = build_reduced_hamiltonian(&ints, &hf.mos)?;
    let exact = fci(&ham0)?;
    let x = lowdin_orthogonalizer(&ints.s)?;
    let tau_fci = mott_tau(&exact.one_rdm, &hf.mos, &x)?;
    let tau_hf = mott_tau(&hf_determinant_1rdm(), &hf.mos, &x)?;

    let mut point_config = config.clone();
    point_config.seed = seeds::derive(config.seed, &[stream::SCAN_POINT, idx as u64]);

    let warm = match carry {
        Some((mos_prev, theta)) => WarmStart {
            mos: transported_orbitals(mos_prev, &ints)?,
            theta: Some(*theta),
        },
        None => WarmStart {
            mos: hf.mos.clone(),
            theta: None,
        },
    };
    let out = macro_loop(&point_config, &ints, Some(&warm))?;
    let d1 = contract_to_1rdm(&out.d2);
    let tau_hybrid = mott_tau(&d1, &out.mos, &x)?;

    let record = ScanRecord {
        r_angstrom: r,
        e_hybrid: out.energy,
        e_fci: exact.energy,
        e_rohf: hf.energy,
        error_mh: (out.energy - exact.energy) * 1.0e3,
        tau_hybrid,
        tau_fci,
        tau_hf,
        n4: out.occupations[0],
        n5: out.occupations[1],
        n6: out.occupations[2],
        theta1: out.theta[0],
        theta2: out.theta[1],
        macro_iters: out.macro_iters,
        converged: out.converged,
        seed: point_config.seed,
    };
    let carry_next = (out.mos.clone(), out.theta);
    Ok((record, out.trace, carry_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitigation::polytope_membership;
    use crate::qdevice::builtin_calibration;
    use approx::assert_abs_diff_eq;

    fn h3(r: f64) -> IntegralSet {
        linear_h3_integrals(r).unwrap()
    }

    fn fci_energy(ints: &IntegralSet) -> f64 {
        let hf = rohf(ints).unwrap();
        let ham = build_reduced_hamiltonian(ints, &hf.mos).unwrap();
        fci(&ham).unwrap().energy
    }

    #[test]
    fn nelder_mead_minimizes_the_reference_quadratic() {
        let objective = |x: &[f64]| Ok((x[0] - 0.3).powi(2) + (x[1] - 0.7).powi(2));
        let initial: Vec<Vec<f64>> = BASE_SIMPLEX.iter().map(|v| v.to_vec()).collect();
        let opts = NmOptions {
            radius_tol: 1e-6,
            spread_tol: 0.0,
            max_evals: 500,
            bounds: None,
        };
        let res = nelder_mead(objective, &initial, &opts).unwrap();
        assert!(res.converged);
        assert_abs_diff_eq!(res.best_x[0], 0.3, epsilon = 1e-4);
        assert_abs_diff_eq!(res.best_x[1], 0.7, epsilon = 1e-4);

        // Identical call, identical evaluation history.
        let res2 = nelder_mead(
            |x: &[f64]| Ok((x[0] - 0.3).powi(2) + (x[1] - 0.7).powi(2)),
            &initial,
            &opts,
        )
        .unwrap();
        assert_eq!(res.evals.len(), res2.evals.len());
        assert!(res
            .evals
            .iter()
            .zip(&res2.evals)
            .all(|(a, b)| a.x == b.x && a.f == b.f));
    }

    #[test]
    fn nelder_mead_aborts_on_non_finite_objective() {
        let objective = |x: &[f64]| Ok(if x[0] > 0.5 { f64::NAN } else { x[0] });
        let initial = vec![vec![0.0], vec![1.0]];
        let opts = NmOptions {
            radius_tol: 1e-8,
            spread_tol: 0.0,
            max_evals: 100,
            bounds: None,
        };
        match nelder_mead(objective, &initial, &opts) {
            Err(Error::Optimizer(_)) => {}
            other => panic!("expected an optimizer abort, got {other:?}"),
        }
    }

    #[test]
    fn nelder_mead_respects_bounds_and_budget() {
        // True minimum far outside the box: every candidate must stay inside
        // and the budget must hold.
        let objective = |x: &[f64]| Ok((x[0] + 2.0).powi(2) + (x[1] + 2.0).powi(2));
        let initial = vec![vec![0.5, 0.5], vec![0.9, 0.5], vec![0.5, 0.9]];
        let opts = NmOptions {
            radius_tol: 1e-9,
            spread_tol: 0.0,
            max_evals: 60,
            bounds: Some(vec![(0.0, 1.0), (0.0, 1.0)]),
        };
        let res = nelder_mead(objective, &initial, &opts).unwrap();
        assert!(res.evals.len() <= 60);
        assert!(res
            .evals
            .iter()
            .all(|e| e.x.iter().all(|&v| (0.0..=1.0).contains(&v))));
        assert!(res.best_x[0] < 0.05 && res.best_x[1] < 0.05);
    }

    #[test]
    fn quantum_energy_at_zero_angles_matches_rohf() {
        let ints = h3(1.0);
        let hf = rohf(&ints).unwrap();
        let ham = build_reduced_hamiltonian(&ints, &hf.mos).unwrap();
        let device = DeviceContext::exact();
        let map = MitigationMap::identity();
        let ctx = EvalContext {
            ham: &ham,
            device: &device,
            map: &map,
        };
        let qe = quantum_energy(0.0, 0.0, &ctx, 1).unwrap();
        assert_abs_diff_eq!(qe.energy, hf.energy, epsilon = 1e-10);
        assert_eq!(qe.mitigation.working, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rohf_is_stationary_under_shared_rotations() {
        // Converged SCF means no rotation applied identically to both spins
        // can lower the HF-determinant energy to first order: the central
        // finite difference of each shared angle vanishes and the curvature
        // is non-negative. (Spin-split rotations are a different story; see
        // the next test.)
        let ints = h3(1.0);
        let hf = rohf(&ints).unwrap();
        let occ = complete_occupations(0.0, 0.0, 0.0).unwrap();
        let d2 = reconstruct_2rdm(&occ, &sign_map(0.0, 0.0)).unwrap();
        let e_at = |angles: &GivensAngles| {
            let rotated = crate::hamiltonian::apply_givens(&hf.mos, angles);
            let ham = build_reduced_hamiltonian(&ints, &rotated).unwrap();
            energy(&ham, &d2).unwrap()
        };
        let e0 = e_at(&GivensAngles::default());
        assert_abs_diff_eq!(e0, hf.energy, epsilon = 1e-9);
        let h = 1e-4;
        for k in 0..3 {
            let mut plus = GivensAngles::default();
            let mut minus = GivensAngles::default();
            match k {
                0 => {
                    plus.g12 = h;
                    minus.g12 = -h;
                }
                1 => {
                    plus.g13 = h;
                    minus.g13 = -h;
                }
                _ => {
                    plus.g23 = h;
                    minus.g23 = -h;
                }
            }
            let (ep, em) = (e_at(&plus), e_at(&minus));
            let gradient = (ep - em) / (2.0 * h);
            assert!(
                gradient.abs() < 1e-6,
                "shared-angle {k} gradient {gradient:.3e} is not stationary"
            );
            assert!(ep + em - 2.0 * e0 > -1e-10, "negative curvature at ROHF");
        }
    }

    #[test]
    fn orbital_stage_spin_polarizes_the_hf_determinant() {
        // Under independent per-spin rotations the single determinant is
        // free to spin-polarize, which lowers it well below the
        // spin-restricted SCF energy at equilibrium. The stage must find
        // that relaxation and must never end above its input.
        let ints = h3(1.0);
        let hf = rohf(&ints).unwrap();
        let occ = complete_occupations(0.0, 0.0, 0.0).unwrap();
        let d2 = reconstruct_2rdm(&occ, &sign_map(0.0, 0.0)).unwrap();
        let ham = build_reduced_hamiltonian(&ints, &hf.mos).unwrap();
        let e_in = energy(&ham, &d2).unwrap();
        let out = orbital_stage(&d2, &hf.mos, &ints, 1e-9, 600).unwrap();
        assert!(out.energy <= e_in + 1e-12);
        // Independent minimization of the same six-angle objective puts the
        // fully relaxed determinant about 17.4 mH below the restricted one
        // at this geometry; the stage should capture most of that.
        assert!(
            out.energy < e_in - 0.015,
            "expected spin polarization of at least 15 mH, got {:.4} mH",
            (e_in - out.energy) * 1e3
        );
        let shared = (out.alpha.g12 - out.beta.g12).abs()
            + (out.alpha.g13 - out.beta.g13).abs()
            + (out.alpha.g23 - out.beta.g23).abs();
        assert!(shared > 1e-3, "relaxation should split the spin frames");
    }

    #[test]
    fn orbital_stage_cannot_undercut_fci() {
        // The FCI 2-RDM is a valid three-electron reduced density matrix, so
        // rotating the one-body frame underneath it can never drop below the
        // FCI energy; zero rotation is already optimal.
        let ints = h3(1.2);
        let hf = rohf(&ints).unwrap();
        let ham = build_reduced_hamiltonian(&ints, &hf.mos).unwrap();
        let exact = fci(&ham).unwrap();
        let e_in = energy(&ham, &exact.two_rdm).unwrap();
        assert_abs_diff_eq!(e_in, exact.energy, epsilon = 1e-10);
        let out = orbital_stage(&exact.two_rdm, &hf.mos, &ints, 1e-9, 600).unwrap();
        assert!(out.energy <= e_in + 1e-12);
        assert!(out.energy >= exact.energy - 1e-9);
        assert_abs_diff_eq!(out.energy, exact.energy, epsilon = 1e-9);
    }

    #[test]
    fn orbital_stage_lowers_a_suboptimal_reconstruction() {
        // A coherent reconstruction away from the ROHF minimum: the orbital
        // frame is no longer optimal for it and the stage must help.
        let ints = h3(1.6);
        let hf = rohf(&ints).unwrap();
        let ham = build_reduced_hamiltonian(&ints, &hf.mos).unwrap();
        let device = DeviceContext::exact();
        let map = MitigationMap::identity();
        let ctx = EvalContext {
            ham: &ham,
            device: &device,
            map: &map,
        };
        let qe = quantum_energy(2.8, 0.9, &ctx, 1).unwrap();
        let out = orbital_stage(&qe.d2, &hf.mos, &ints, 1e-9, 600).unwrap();
        assert!(out.energy <= qe.energy + 1e-12);
        assert!(out.energy < qe.energy, "expected a strict improvement");
        let moved = out.alpha.g12.abs()
            + out.alpha.g13.abs()
            + out.alpha.g23.abs()
            + out.beta.g12.abs()
            + out.beta.g13.abs()
            + out.beta.g23.abs();
        assert!(moved > 1e-6, "expected a nonzero rotation");
    }

    #[test]
    fn exact_macro_loop_reaches_fci_at_equilibrium() {
        let ints = h3(1.0);
        let e_fci = fci_energy(&ints);
        let config = SolverConfig::default();
        let out = macro_loop(&config, &ints, None).unwrap();
        assert!(out.converged, "macro loop should converge in exact mode");
        assert!(out.macro_iters <= 5, "took {} macro iterations", out.macro_iters);
        assert!(out.energy >= e_fci - 1e-9, "variational floor broken");
        assert!(
            (out.energy - e_fci) * 1e3 < 0.16,
            "error {} mH too large",
            (out.energy - e_fci) * 1e3
        );

        // The reported energy is the exact functional of the returned state.
        let ham_final = build_reduced_hamiltonian(&ints, &out.mos).unwrap();
        assert_abs_diff_eq!(
            out.energy,
            energy(&ham_final, &out.d2).unwrap(),
            epsilon = 1e-12
        );

        let [n4, n5, n6] = out.canonical;
        let (inside, violated) = polytope_membership(n4, n5, n6, 1e-10);
        assert!(inside, "final occupations violate {violated:?}");

        // Best-energy history never increases.
        assert!(out
            .trace
            .evals
            .windows(2)
            .all(|w| w[1].best_energy <= w[0].best_energy));
    }

    #[test]
    fn noisy_runs_are_reproducible_and_variational() {
        let ints = h3(1.34);
        let e_fci = fci_energy(&ints);
        let config = SolverConfig {
            mode: RunMode::Noisy,
            noise: Some(builtin_calibration(1).unwrap()),
            seed: 11,
            ..SolverConfig::default()
        };
        let a = macro_loop(&config, &ints, None).unwrap();
        let b = macro_loop(&config, &ints, None).unwrap();
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert_eq!(
            serde_json::to_string(&a.trace).unwrap(),
            serde_json::to_string(&b.trace).unwrap()
        );
        assert!(a.energy >= e_fci - 1e-9);

        // Finite-shot runs report the best measured simplex point: the
        // returned energy is the exact functional of the returned state in
        // the returned orbitals, with no after-the-fact polish.
        assert_eq!(a.energy.to_bits(), a.e_quantum.to_bits());
        let ham_final = build_reduced_hamiltonian(&ints, &a.mos).unwrap();
        assert_abs_diff_eq!(
            a.energy,
            energy(&ham_final, &a.d2).unwrap(),
            epsilon = 1e-12
        );
        for rec in &a.trace.evals {
            assert!(
                rec.energy >= e_fci - 1e-9,
                "eval at {:?} undercuts FCI by {}",
                rec.params,
                e_fci - rec.energy
            );
        }
    }

    #[test]
    fn exact_scan_tracks_fci_and_localizes() {
        let config = SolverConfig::default();
        let rs = [1.0, 1.4, 2.0];
        let points = scan(&config, &rs);
        assert_eq!(points.len(), rs.len());
        for (idx, point) in points.iter().enumerate() {
            let rec = point
                .record
                .as_ref()
                .unwrap_or_else(|| panic!("point {idx} failed: {:?}", point.failure));
            assert!(rec.converged);
            assert!(
                rec.error_mh.abs() < 0.16,
                "R = {}: error {} mH",
                rec.r_angstrom,
                rec.error_mh
            );
            assert!(rec.e_hybrid >= rec.e_fci - 1e-9);
            assert_eq!(
                rec.seed,
                seeds::derive(config.seed, &[stream::SCAN_POINT, idx as u64])
            );
            assert!(
                (rec.tau_hybrid - rec.tau_fci).abs() <= 0.05 * rec.tau_fci,
                "R = {}: tau {} vs FCI {}",
                rec.r_angstrom,
                rec.tau_hybrid,
                rec.tau_fci
            );
        }
    }

    #[test]
    fn scan_records_failures_and_continues() {
        let config = SolverConfig::default();
        let points = scan(&config, &[0.2, 1.0]);
        assert!(points[0].record.is_none());
        assert!(points[0].failure.as_deref().unwrap().contains("exceed"));
        assert!(points[1].record.is_some(), "scan must continue past a failure");
    }

    #[test]
    fn parallel_scan_matches_pointwise_quality() {
        let config = SolverConfig {
            scan_threads: 2,
            ..SolverConfig::default()
        };
        let points = scan(&config, &[1.0, 1.8]);
        for point in &points {
            let rec = point.record.as_ref().expect("parallel point failed");
            assert!(rec.converged);
            assert!(rec.error_mh.abs() < 0.16);
        }
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        let config = SolverConfig {
            macro_threshold: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(config.validate(), Err(Error::Argument(_))));

        let config = SolverConfig {
            mode: RunMode::Noisy,
            noise: None,
            ..SolverConfig::default()
        };
        assert!(matches!(config.validate(), Err(Error::Argument(_))));

        let config = SolverConfig {
            mode: RunMode::Sampled,
            shots: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(config.validate(), Err(Error::Argument(_))));
    }
}
