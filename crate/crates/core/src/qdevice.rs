//! Three-qubit device emulator: state preparation, shot sampling, and the
//! calibration-derived noise model.
//!
//! The preparation circuit is Ry(theta1) on qubit 1, CNOT 1->3, Ry(theta2)
//! on qubit 2, CNOT 2->1, applied to |000>. Every gate is a real orthogonal
//! matrix, so a pure state is eight real amplitudes and the exact noisy mode
//! works with an 8x8 real density matrix. Basis index is 4*q1 + 2*q2 + q3
//! with qubit 1 the leftmost label.
//!
//! Noise enters at four points — a depolarizing channel after each gate,
//! sized by the calibration's per-qubit gate error (Y rotations) or
//! multi-qubit error (CNOTs) — plus an independent readout flip per qubit.
//! Shot sampling draws from the RNG only for channels with nonzero
//! probability, so a zero-noise trajectory consumes exactly one uniform per
//! shot and reproduces ideal sampling bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

type Mat8 = SMatrix<f64, 8, 8>;
type Vec8 = SVector<f64, 8>;

/// Shot count used when the caller does not specify one.
pub const DEFAULT_SHOTS: u64 = 2048;

// ---------------------------------------------------------------------------
// State preparation
// ---------------------------------------------------------------------------

/// Rotation angles (radians) of the two Y rotations in the preparation
/// circuit. Any finite values are accepted; the circuit is 2*pi-periodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub theta1: f64,
    pub theta2: f64,
}

impl CircuitParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::Argument(format!(
                "circuit angles must be finite, got ({theta1}, {theta2})"
            )));
        }
        Ok(CircuitParams { theta1, theta2 })
    }
}

/// Prepared pure state: eight real amplitudes plus the angles that built it,
/// carried along so downstream sign assignment reads the generating theta.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub amps: [f64; 8],
    pub params: CircuitParams,
}

/// Closed-form amplitudes of the prepared state.
///
/// The circuit reaches only |000>, |110>, |101> and |011>; the other four
/// amplitudes are identically zero.
pub fn prepare_state(params: CircuitParams) -> Result<StateVector> {
    let params = CircuitParams::new(params.theta1, params.theta2)?;
    let (sa, ca) = (0.5 * params.theta1).sin_cos();
    let (sb, cb) = (0.5 * params.theta2).sin_cos();
    let mut amps = [0.0; 8];
    amps[0b000] = ca * cb;
    amps[0b110] = ca * sb;
    amps[0b101] = sa * cb;
    amps[0b011] = sa * sb;
    Ok(StateVector { amps, params })
}

/// Exact excitation probability of each qubit in the noiseless state.
pub fn ideal_populations(params: CircuitParams) -> Result<[f64; 3]> {
    let params = CircuitParams::new(params.theta1, params.theta2)?;
    let sa2 = (0.5 * params.theta1).sin().powi(2);
    let sb2 = (0.5 * params.theta2).sin().powi(2);
    let p1 = (1.0 - sa2) * sb2 + sa2 * (1.0 - sb2);
    Ok([p1, sb2, sa2])
}

/// Qubit marginals of an 8-outcome probability vector.
fn populations_from_pmf(pmf: &[f64; 8]) -> [f64; 3] {
    let mut occ = [0.0; 3];
    for (idx, p) in pmf.iter().enumerate() {
        for (q, o) in occ.iter_mut().enumerate() {
            if (idx >> (2 - q)) & 1 == 1 {
                *o += p;
            }
        }
    }
    occ
}

// ---------------------------------------------------------------------------
// Gate and Pauli matrices (real form)
// ---------------------------------------------------------------------------

/// Ry(theta) embedded on one qubit (1-based, 1 = most significant).
fn ry8(qubit: usize, theta: f64) -> Mat8 {
    let (s, c) = (0.5 * theta).sin_cos();
    let bit = 3 - qubit;
    let mut m = Mat8::zeros();
    for col in 0..8 {
        let flipped = col ^ (1 << bit);
        m[(col, col)] = c;
        m[(flipped, col)] = if (col >> bit) & 1 == 0 { s } else { -s };
    }
    m
}

/// CNOT with 1-based control and target labels.
fn cnot8(control: usize, target: usize) -> Mat8 {
    let cb = 3 - control;
    let tb = 3 - target;
    let mut m = Mat8::zeros();
    for col in 0..8 {
        let row = if (col >> cb) & 1 == 1 { col ^ (1 << tb) } else { col };
        m[(row, col)] = 1.0;
    }
    m
}

/// The four circuit gates in application order.
fn circuit_gates(params: CircuitParams) -> [Mat8; 4] {
    [
        ry8(1, params.theta1),
        cnot8(1, 3),
        ry8(2, params.theta2),
        cnot8(2, 1),
    ]
}

/// Apply a single-qubit Pauli in place. Y is kept real as [[0,-1],[1,0]];
/// the dropped global phase i never reaches a probability.
fn apply_pauli(v: &mut Vec8, qubit: usize, code: u8) {
    let bit = 3 - qubit;
    for i in 0..8usize {
        if (i >> bit) & 1 == 1 {
            continue;
        }
        let j = i | (1 << bit);
        match code {
            1 => v.swap_rows(i, j),
            2 => {
                let (lo, hi) = (v[i], v[j]);
                v[i] = -hi;
                v[j] = lo;
            }
            3 => v[j] = -v[j],
            _ => {}
        }
    }
}

/// Full 8x8 matrix of a single-qubit Pauli (real Y convention).
fn pauli8(qubit: usize, code: u8) -> Mat8 {
    let mut m = Mat8::identity();
    if code == 0 {
        return m;
    }
    let bit = 3 - qubit;
    m = Mat8::zeros();
    for col in 0..8usize {
        let b = (col >> bit) & 1;
        let flipped = col ^ (1 << bit);
        match code {
            1 => m[(flipped, col)] = 1.0,
            2 => m[(flipped, col)] = if b == 0 { 1.0 } else { -1.0 },
            3 => m[(col, col)] = if b == 0 { 1.0 } else { -1.0 },
            _ => unreachable!("pauli code is 0..=3"),
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Noise model and calibration tables
// ---------------------------------------------------------------------------

/// Error probabilities for one calibration date, mapped onto the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability after Ry(theta1) on qubit 1.
    pub p_ry1: f64,
    /// Two-qubit depolarizing probability after CNOT 1->3.
    pub p_cx13: f64,
    /// Depolarizing probability after Ry(theta2) on qubit 2.
    pub p_ry2: f64,
    /// Two-qubit depolarizing probability after CNOT 2->1.
    pub p_cx21: f64,
    /// Readout flip probability per logical qubit (q1, q2, q3).
    pub readout: [f64; 3],
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            p_ry1: 0.0,
            p_cx13: 0.0,
            p_ry2: 0.0,
            p_cx21: 0.0,
            readout: [0.0; 3],
        }
    }

    /// Every probability must be finite and in [0, 1/2]; beyond 1/2 a
    /// readout flip is no longer an error model but a relabeling.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.p_ry1,
            self.p_cx13,
            self.p_ry2,
            self.p_cx21,
            self.readout[0],
            self.readout[1],
            self.readout[2],
        ];
        for p in all {
            if !p.is_finite() || !(0.0..=0.5).contains(&p) {
                return Err(Error::Calibration(format!(
                    "noise probability {p} outside [0, 0.5]"
                )));
            }
        }
        Ok(())
    }
}

const BUILTIN_CALIBRATION: &str = include_str!("../data/ibmqx4_calibration.csv");

/// Noise model from the bundled five-qubit device snapshots.
pub fn builtin_calibration(date: u32) -> Result<NoiseModel> {
    load_calibration_str(BUILTIN_CALIBRATION, date)
}

/// Noise model from a calibration CSV file on disk.
pub fn load_calibration(path: &Path, date: u32) -> Result<NoiseModel> {
    let content = std::fs::read_to_string(path)?;
    load_calibration_str(&content, date)
}

/// Parse a calibration table and assemble the noise model for one date.
///
/// Format: `#` comment lines; a `logical,q1=<id>,q2=<id>,q3=<id>` line naming
/// the device qubit behind each circuit qubit; a `kind,id,1,2,...` header
/// enumerating the date columns; then `readout`/`gate`/`cnot` rows with one
/// value per date, all in units of 1e-3. CNOT rows are keyed by the directed
/// device pair (`Qa-Qb`) and looked up in either order.
pub fn load_calibration_str(content: &str, date: u32) -> Result<NoiseModel> {
    let mut logical: Option<[String; 3]> = None;
    let mut n_dates: Option<usize> = None;
    let mut readout: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut gate: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut cnot: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match fields[0] {
            "logical" => {
                if fields.len() != 4 {
                    return Err(Error::Schema(format!(
                        "line {}: logical line needs q1=,q2=,q3= entries",
                        lineno + 1
                    )));
                }
                let mut names = [String::new(), String::new(), String::new()];
                for f in &fields[1..] {
                    let (key, value) = f.split_once('=').ok_or_else(|| {
                        Error::Schema(format!("line {}: expected qk=<id>, got '{f}'", lineno + 1))
                    })?;
                    let slot = match key {
                        "q1" => 0,
                        "q2" => 1,
                        "q3" => 2,
                        _ => {
                            return Err(Error::Schema(format!(
                                "line {}: unknown logical qubit '{key}'",
                                lineno + 1
                            )))
                        }
                    };
                    if value.is_empty() || !names[slot].is_empty() {
                        return Err(Error::Schema(format!(
                            "line {}: bad or duplicate mapping for {key}",
                            lineno + 1
                        )));
                    }
                    names[slot] = value.to_string();
                }
                if names[0] == names[1] || names[0] == names[2] || names[1] == names[2] {
                    return Err(Error::Schema(
                        "logical qubits must map to distinct device qubits".into(),
                    ));
                }
                logical = Some(names);
            }
            "kind" => {
                if fields.len() < 3 || fields[1] != "id" {
                    return Err(Error::Schema(format!(
                        "line {}: header must start 'kind,id,...'",
                        lineno + 1
                    )));
                }
                for (k, f) in fields[2..].iter().enumerate() {
                    if f.parse::<usize>() != Ok(k + 1) {
                        return Err(Error::Schema(format!(
                            "line {}: date columns must be 1..=N in order",
                            lineno + 1
                        )));
                    }
                }
                n_dates = Some(fields.len() - 2);
            }
            kind @ ("readout" | "gate" | "cnot") => {
                let n = n_dates.ok_or_else(|| {
                    Error::Schema(format!(
                        "line {}: data row before the 'kind,id,...' header",
                        lineno + 1
                    ))
                })?;
                if fields.len() != n + 2 {
                    return Err(Error::Schema(format!(
                        "line {}: expected {} values, got {}",
                        lineno + 1,
                        n,
                        fields.len().saturating_sub(2)
                    )));
                }
                let mut values = Vec::with_capacity(n);
                for f in &fields[2..] {
                    let v: f64 = f.parse().map_err(|_| {
                        Error::Schema(format!("line {}: bad number '{f}'", lineno + 1))
                    })?;
                    let p = v * 1e-3;
                    if !p.is_finite() || !(0.0..=0.5).contains(&p) {
                        return Err(Error::Calibration(format!(
                            "line {}: probability {p} outside [0, 0.5]",
                            lineno + 1
                        )));
                    }
                    values.push(p);
                }
                let table = match kind {
                    "readout" => &mut readout,
                    "gate" => &mut gate,
                    _ => &mut cnot,
                };
                if table.insert(fields[1].to_string(), values).is_some() {
                    return Err(Error::Schema(format!(
                        "line {}: duplicate {kind} row for '{}'",
                        lineno + 1,
                        fields[1]
                    )));
                }
            }
            other => {
                return Err(Error::Schema(format!(
                    "line {}: unknown row kind '{other}'",
                    lineno + 1
                )))
            }
        }
    }

    let logical = logical.ok_or_else(|| Error::Schema("missing 'logical' line".into()))?;
    let n_dates = n_dates.ok_or_else(|| Error::Schema("missing 'kind,id,...' header".into()))?;
    if date == 0 || date as usize > n_dates {
        return Err(Error::Argument(format!(
            "calibration date must be in 1..={n_dates}, got {date}"
        )));
    }
    let col = date as usize - 1;

    let lookup = |table: &BTreeMap<String, Vec<f64>>, id: &str, what: &str| -> Result<f64> {
        table
            .get(id)
            .map(|v| v[col])
            .ok_or_else(|| Error::Calibration(format!("no {what} row for device qubit '{id}'")))
    };
    let cnot_pair = |a: &str, b: &str| -> Result<f64> {
        cnot.get(&format!("{a}-{b}"))
            .or_else(|| cnot.get(&format!("{b}-{a}")))
            .map(|v| v[col])
            .ok_or_else(|| Error::Calibration(format!("no cnot row for pair {a}-{b}")))
    };

    Ok(NoiseModel {
        p_ry1: lookup(&gate, &logical[0], "gate")?,
        p_cx13: cnot_pair(&logical[0], &logical[2])?,
        p_ry2: lookup(&gate, &logical[1], "gate")?,
        p_cx21: cnot_pair(&logical[1], &logical[0])?,
        readout: [
            lookup(&readout, &logical[0], "readout")?,
            lookup(&readout, &logical[1], "readout")?,
            lookup(&readout, &logical[2], "readout")?,
        ],
    })
}

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

/// Outcome histogram of one device run plus the derived qubit marginals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Counts per 3-bit outcome (basis index); empty in exact mode.
    pub counts: BTreeMap<u8, u64>,
    /// Shots drawn; 0 marks an exact (infinite-shot) record.
    pub shots: u64,
    pub seed: u64,
    /// Estimated excitation probability of each qubit (q1, q2, q3).
    pub occupations: [f64; 3],
}

impl MeasurementRecord {
    /// Synthetic record holding exact populations instead of counts.
    pub fn exact(occupations: [f64; 3]) -> Self {
        MeasurementRecord {
            counts: BTreeMap::new(),
            shots: 0,
            seed: 0,
            occupations,
        }
    }
}

/// Depolarizing/readout noise sites in circuit order.
#[derive(Clone, Copy)]
enum NoiseSite {
    OneQ(usize),
    TwoQ(usize, usize),
}

fn noise_sites(noise: Option<&NoiseModel>) -> [(f64, NoiseSite); 4] {
    let (p1, p2, p3, p4) = match noise {
        Some(n) => (n.p_ry1, n.p_cx13, n.p_ry2, n.p_cx21),
        None => (0.0, 0.0, 0.0, 0.0),
    };
    [
        (p1, NoiseSite::OneQ(1)),
        (p2, NoiseSite::TwoQ(1, 3)),
        (p3, NoiseSite::OneQ(2)),
        (p4, NoiseSite::TwoQ(2, 1)),
    ]
}

/// Insert one sampled Pauli fault at a noise site.
///
/// Single-qubit codes 0..3 pick X/Y/Z; two-qubit codes 0..15 enumerate the
/// fifteen non-identity Pauli pairs.
fn apply_fault(v: &mut Vec8, site: NoiseSite, which: u8) {
    match site {
        NoiseSite::OneQ(q) => apply_pauli(v, q, which + 1),
        NoiseSite::TwoQ(qa, qb) => {
            let pair = which + 1;
            apply_pauli(v, qa, pair >> 2);
            apply_pauli(v, qb, pair & 3);
        }
    }
}

/// Shot-sample the prepared state, optionally through the noise model.
///
/// Per shot, in fixed order: one fire/no-fire draw per noise site with
/// nonzero probability (plus a Pauli choice when it fires), one uniform for
/// the basis outcome, and one flip draw per qubit with nonzero readout
/// error. With no noise this is exactly one uniform per shot.
pub fn measure(
    state: &StateVector,
    shots: u64,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<MeasurementRecord> {
    if shots == 0 {
        return Err(Error::Argument("shot count must be positive".into()));
    }
    if let Some(n) = noise {
        n.validate()?;
    }
    let sites = noise_sites(noise);
    let gates = circuit_gates(state.params);
    let mut clean_cum = [0.0; 8];
    let mut acc = 0.0;
    for (c, a) in clean_cum.iter_mut().zip(state.amps) {
        acc += a * a;
        *c = acc;
    }

    let mut rng = seeds::rng(seed);
    let mut counts: BTreeMap<u8, u64> = BTreeMap::new();
    let mut faulty_cum = [0.0; 8];
    for _ in 0..shots {
        let mut fired: [Option<u8>; 4] = [None; 4];
        let mut any_fault = false;
        for (slot, (p, site)) in fired.iter_mut().zip(sites) {
            if p > 0.0 && rng.random::<f64>() < p {
                let n_paulis = match site {
                    NoiseSite::OneQ(_) => 3,
                    NoiseSite::TwoQ(..) => 15,
                };
                *slot = Some(rng.random_range(0..n_paulis));
                any_fault = true;
            }
        }
        let cum = if any_fault {
            // Rare path: replay the circuit with the sampled faults spliced
            // in after their gates.
            let mut v = Vec8::zeros();
            v[0] = 1.0;
            for (k, g) in gates.iter().enumerate() {
                v = g * v;
                if let Some(which) = fired[k] {
                    apply_fault(&mut v, sites[k].1, which);
                }
            }
            let mut acc = 0.0;
            for (c, a) in faulty_cum.iter_mut().zip(v.iter()) {
                acc += a * a;
                *c = acc;
            }
            &faulty_cum
        } else {
            &clean_cum
        };
        let u: f64 = rng.random();
        let mut outcome = 7u8;
        for (i, c) in cum.iter().enumerate() {
            if u < *c {
                outcome = i as u8;
                break;
            }
        }
        if let Some(n) = noise {
            for (q, r) in n.readout.iter().enumerate() {
                if *r > 0.0 && rng.random::<f64>() < *r {
                    outcome ^= 1 << (2 - q);
                }
            }
        }
        *counts.entry(outcome).or_insert(0) += 1;
    }

    let mut occupations = [0.0; 3];
    for (&outcome, &count) in &counts {
        for (q, o) in occupations.iter_mut().enumerate() {
            if (outcome >> (2 - q)) & 1 == 1 {
                *o += count as f64;
            }
        }
    }
    for o in &mut occupations {
        *o /= shots as f64;
    }
    Ok(MeasurementRecord {
        counts,
        shots,
        seed,
        occupations,
    })
}

/// Exact qubit marginals of the noisy circuit via the density matrix.
///
/// Applies each gate as rho -> G rho G^T, mixes in the depolarizing channel
/// at the four noise sites, and pushes the final diagonal through the
/// per-qubit readout confusion. The infinite-shot limit of [`measure`].
pub fn exact_noisy_populations(params: CircuitParams, noise: &NoiseModel) -> Result<[f64; 3]> {
    noise.validate()?;
    let gates = circuit_gates(params);
    let sites = noise_sites(Some(noise));
    let mut rho = Mat8::zeros();
    rho[(0, 0)] = 1.0;
    for (g, (p, site)) in gates.iter().zip(sites) {
        rho = g * rho * g.transpose();
        if p > 0.0 {
            match site {
                NoiseSite::OneQ(q) => {
                    let mut mixed = rho * (1.0 - p);
                    for code in 1..=3u8 {
                        let pm = pauli8(q, code);
                        mixed += (pm * rho * pm.transpose()) * (p / 3.0);
                    }
                    rho = mixed;
                }
                NoiseSite::TwoQ(qa, qb) => {
                    let mut mixed = rho * (1.0 - p);
                    for pair in 1..=15u8 {
                        let pm = pauli8(qa, pair >> 2) * pauli8(qb, pair & 3);
                        mixed += (pm * rho * pm.transpose()) * (p / 15.0);
                    }
                    rho = mixed;
                }
            }
        }
    }
    let mut pmf = [0.0; 8];
    for (i, v) in pmf.iter_mut().enumerate() {
        *v = rho[(i, i)];
    }
    // Readout confusion acts independently per qubit on the outcome pmf.
    for (q, &r) in noise.readout.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let bit = 2 - q;
        for i in 0..8usize {
            if (i >> bit) & 1 == 1 {
                continue;
            }
            let j = i | (1 << bit);
            let (p0, p1) = (pmf[i], pmf[j]);
            pmf[i] = (1.0 - r) * p0 + r * p1;
            pmf[j] = r * p0 + (1.0 - r) * p1;
        }
    }
    Ok(populations_from_pmf(&pmf))
}

// ---------------------------------------------------------------------------
// Device context
// ---------------------------------------------------------------------------

/// How measurement statistics are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    /// Infinite-shot limit: exact populations, no RNG.
    Exact,
    /// Finite shot sampling.
    Shots(u64),
}

/// A configured device: noise model (or none) plus sampling mode.
#[derive(Debug, Clone)]
pub struct DeviceContext {
    pub noise: Option<NoiseModel>,
    pub sampling: SamplingMode,
}

impl DeviceContext {
    /// Noiseless infinite-shot device.
    pub fn exact() -> Self {
        DeviceContext {
            noise: None,
            sampling: SamplingMode::Exact,
        }
    }

    /// Noiseless finite-shot device.
    pub fn sampled(shots: u64) -> Self {
        DeviceContext {
            noise: None,
            sampling: SamplingMode::Shots(shots),
        }
    }

    /// Noisy finite-shot device.
    pub fn noisy(noise: NoiseModel, shots: u64) -> Self {
        DeviceContext {
            noise: Some(noise),
            sampling: SamplingMode::Shots(shots),
        }
    }

    /// Prepare the state for the given angles and measure it.
    pub fn run(&self, params: CircuitParams, seed: u64) -> Result<MeasurementRecord> {
        match (self.sampling, &self.noise) {
            (SamplingMode::Exact, None) => {
                Ok(MeasurementRecord::exact(ideal_populations(params)?))
            }
            (SamplingMode::Exact, Some(n)) => Ok(MeasurementRecord::exact(
                exact_noisy_populations(params, n)?,
            )),
            (SamplingMode::Shots(shots), noise) => {
                let state = prepare_state(params)?;
                measure(&state, shots, noise.as_ref(), seed)
            }
        }
    }
}
