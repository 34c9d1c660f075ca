//! Emulation of the postselected measurement circuit: rotated non-unitary
//! evolution, block embedding into a unitary on one extra ancilla qubit,
//! measurement-basis rotations, and exact or shot-sampled readout.
//!
//! Basis index convention: the ancilla is the most significant bit, followed
//! by the system qubits in order, so bitstring `"011"` means ancilla 0,
//! first system qubit 1, second system qubit 1.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    self, eig, eig_tracked, expm, hermitian_eigh, inner, norm, qr_unitary_leading, ComplexMatrix, EigenDecomposition,
    NumericsError, C64, I, ONE, ZERO,
};
use crate::twister::{build_hamiltonian, TwisterError, TwisterSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] TwisterError),
    #[error("band {band} at k = {k:.6}: best overlap {overlap:.6} below the selectivity threshold")]
    WeakSelectivity { k: f64, band: usize, overlap: f64 },
    #[error("band {band} out of range for {bands} bands")]
    BandOutOfRange { band: usize, bands: usize },
    #[error("I - u²U†U has eigenvalue {0:.3e} below the clamping window")]
    PsdViolation(f64),
    #[error("postselection retained no shots")]
    AllShotsDiscarded,
    #[error("postselection success probability vanished")]
    ZeroSuccess,
    #[error("operator to embed is zero or non-finite")]
    DegenerateOperator,
    #[error("{0} qubit settings supplied for {1} system qubits")]
    SettingMismatch(usize, usize),
    #[error("built-in observable sets exist for 2 and 4 bands, not {0}")]
    UnsupportedBands(usize),
    #[error("sampled mode needs at least one shot")]
    NoShots,
}

pub type Result<T> = std::result::Result<T, CircuitError>;

/// `e^{−i e^{iλ} h t}`.
pub fn nonunitary_evolution(h: &ComplexMatrix, t: f64, lambda: f64) -> Result<ComplexMatrix> {
    Ok(expm(&h.scale((I * lambda).exp()), t)?.matrix)
}

pub const SELECTIVITY_THRESHOLD: f64 = 0.99;
/// Rotation overlap below which the `Filter` policy prepares the state with
/// the spectral filter instead.
pub const FILTER_THRESHOLD: f64 = 0.999;
pub const DEFAULT_LAMBDA_SAMPLES: usize = 720;
const TIE_TOLERANCE: f64 = 1e-12;

/// Outcome of the λ sweep for one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSelection {
    pub lambda: f64,
    pub overlap: f64,
}

/// Normalised `e^{−i e^{iλ} H t}|0⟩` for every λ on the grid, using one
/// eigendecomposition of `H`.
fn evolved_overlaps(dec: &EigenDecomposition, target: &[C64], t: f64, n_samples: usize) -> Vec<f64> {
    let n = dec.len();
    let v = dec.vector_matrix();
    let mut coeffs: Vec<C64> = match &dec.left {
        Some(left) => left.iter().map(|row| row[0]).collect(),
        None => match v.inverse() {
            Ok(inv) => inv.column(0),
            Err(_) => return vec![0.0; n_samples],
        },
    };
    // Rounding-level components must not be amplified into a selected band.
    let largest = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for c in coeffs.iter_mut() {
        if c.norm() < 1e-12 * largest {
            *c = ZERO;
        }
    }
    (0..n_samples)
        .map(|s| {
            let lambda = 2.0 * PI * s as f64 / n_samples as f64;
            let rot = (I * lambda).exp();
            let exps: Vec<C64> = dec.eigenvalues.iter().map(|e| -I * rot * e * t).collect();
            let shift = exps.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let mut psi = vec![ZERO; n];
            for j in 0..n {
                let w = (exps[j] - shift).exp() * coeffs[j];
                for (p, x) in psi.iter_mut().enumerate() {
                    *x += v[(p, j)] * w;
                }
            }
            let nrm = norm(&psi);
            if nrm == 0.0 || !nrm.is_finite() {
                return 0.0;
            }
            inner(&psi, target).norm() / nrm
        })
        .collect()
}

/// Sweeps λ over `2πs/n_samples` and returns the angle maximising the overlap
/// of the evolved start state with `target` (unit norm). Ties go to the
/// smallest λ.
pub fn sweep_rotation_angle(
    h: &ComplexMatrix,
    target: &[C64],
    t: f64,
    n_samples: usize,
) -> Result<(AngleSelection, Vec<f64>)> {
    let dec = eig(h)?;
    let overlaps = evolved_overlaps(&dec, target, t, n_samples.max(2));
    let mut best = AngleSelection { lambda: 0.0, overlap: overlaps[0] };
    for (s, &o) in overlaps.iter().enumerate() {
        if o > best.overlap + TIE_TOLERANCE {
            best = AngleSelection { lambda: 2.0 * PI * s as f64 / overlaps.len() as f64, overlap: o };
        }
    }
    Ok((best, overlaps))
}

/// λ that best isolates `band` (descending-Im ordering at this `k`).
pub fn select_rotation_angle(
    spec: &TwisterSpec,
    k: f64,
    t: f64,
    band: usize,
    n_samples: usize,
) -> Result<AngleSelection> {
    let h = build_hamiltonian(spec, k)?;
    let dec = eig(&h)?;
    if band >= dec.len() {
        return Err(CircuitError::BandOutOfRange { band, bands: dec.len() });
    }
    let (best, _) = sweep_rotation_angle(&h, &dec.right[band], t, n_samples)?;
    if best.overlap < SELECTIVITY_THRESHOLD {
        return Err(CircuitError::WeakSelectivity { k, band, overlap: best.overlap });
    }
    Ok(best)
}

/// Spectral filter `Π_{j≠i} (H − E_j)/(E_i − E_j)`, the projector onto band `i`.
pub fn spectral_filter(h: &ComplexMatrix, eigenvalues: &[C64], band: usize) -> ComplexMatrix {
    let n = h.dim();
    let mut out = ComplexMatrix::identity(n);
    for (j, &ej) in eigenvalues.iter().enumerate() {
        if j == band {
            continue;
        }
        let mut factor = h.clone();
        for d in 0..n {
            factor[(d, d)] -= ej;
        }
        out = (&out * &factor).scale(ONE / (eigenvalues[band] - ej));
    }
    out
}

/// A unitary on `M+1` qubits whose ancilla-0 block is `scale_u · u_h`.
#[derive(Debug, Clone)]
pub struct EmbeddedUnitary {
    pub u_matrix: ComplexMatrix,
    pub scale_u: f64,
}

impl EmbeddedUnitary {
    pub fn system_dim(&self) -> usize {
        self.u_matrix.dim() / 2
    }
}

pub const PSD_CLAMP: f64 = 1e-9;

/// Dilates `u_h` into `Q` from the QR factorisation of `[[u·u_h, I], [C, I]]`
/// with `C = √(I − u² u_h†u_h)` and `u = λ_max(u_h†u_h)^{−1/2}`.
pub fn block_embed(u_h: &ComplexMatrix) -> Result<EmbeddedUnitary> {
    if !u_h.is_finite() || u_h.max_abs() == 0.0 {
        return Err(CircuitError::DegenerateOperator);
    }
    // Pre-scaling keeps u_h†u_h finite for strongly amplifying evolutions.
    let pre = 1.0 / u_h.max_abs();
    let scaled = u_h.scale(C64::new(pre, 0.0));
    let gram = &scaled.adjoint() * &scaled;
    let gram = ComplexMatrix::from_fn(gram.dim(), |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)].conj()));
    let (values, vecs) = hermitian_eigh(&gram)?;
    let top = values.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(CircuitError::DegenerateOperator);
    }
    let u_rel = 1.0 / top.sqrt();
    let n = u_h.dim();
    let mut sqrt_diag = Vec::with_capacity(n);
    for &d in &values {
        let x = 1.0 - u_rel * u_rel * d;
        if x < -PSD_CLAMP {
            return Err(CircuitError::PsdViolation(x));
        }
        sqrt_diag.push(C64::new(x.max(0.0).sqrt(), 0.0));
    }
    let c = &(&vecs * &ComplexMatrix::diag(&sqrt_diag)) * &vecs.adjoint();
    let top_left = scaled.scale(C64::new(u_rel, 0.0));
    let id = ComplexMatrix::identity(n);
    let big = ComplexMatrix::from_blocks(&top_left, &id, &c, &id);
    let (q, _) = qr_unitary_leading(&big, n)?;
    Ok(EmbeddedUnitary { u_matrix: q, scale_u: u_rel * pre })
}

/// Measurement basis of one system qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    /// `R^y(−π/2)` before readout.
    X,
    /// `R^x(π/2)` before readout.
    Y,
    /// No rotation.
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn rotation(self) -> ComplexMatrix {
        let c = (PI / 4.0).cos();
        let s = (PI / 4.0).sin();
        let r = |a: C64, b: C64, cc: C64, d: C64| ComplexMatrix::from_rows(&[vec![a, b], vec![cc, d]]).unwrap();
        match self {
            // R^y(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]] at θ = −π/2.
            Axis::X => r(C64::new(c, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(c, 0.0)),
            // R^x(θ) = [[cos θ/2, −i sin θ/2], [−i sin θ/2, cos θ/2]] at θ = π/2.
            Axis::Y => r(C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)),
            Axis::Z => ComplexMatrix::identity(2),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Which conditional expectation a four-band circuit feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SettingFamily {
    /// Two-band Pauli expectation.
    Single,
    /// Second qubit rotated, conditioned on first qubit in sector A.
    SectorA,
    /// Second qubit rotated, conditioned on first qubit in sector B.
    SectorB,
    /// First qubit rotated, conditioned on second qubit in `−`.
    InterMinus,
    /// First qubit rotated, unconditioned.
    InterBoth,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub family: SettingFamily,
    /// The varied axis.
    pub alpha: Axis,
    /// One axis per system qubit.
    pub axes: Vec<Axis>,
}

impl MeasurementSetting {
    pub fn label(&self) -> String {
        let axes: String = self.axes.iter().map(|a| a.letter()).collect();
        match self.family {
            SettingFamily::Single => axes,
            SettingFamily::SectorA => format!("A:{axes}"),
            SettingFamily::SectorB => format!("B:{axes}"),
            SettingFamily::InterMinus => format!("AB-:{axes}"),
            SettingFamily::InterBoth => format!("AB:{axes}"),
        }
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Circuits run per band and k-point: three for two bands, twelve for four.
pub fn protocol_settings(n_bands: usize) -> Result<Vec<MeasurementSetting>> {
    match n_bands {
        2 => Ok(Axis::ALL
            .iter()
            .map(|&a| MeasurementSetting { family: SettingFamily::Single, alpha: a, axes: vec![a] })
            .collect()),
        4 => {
            let mut out = Vec::with_capacity(12);
            for family in
                [SettingFamily::SectorA, SettingFamily::SectorB, SettingFamily::InterMinus, SettingFamily::InterBoth]
            {
                for a in Axis::ALL {
                    let axes = match family {
                        SettingFamily::SectorA | SettingFamily::SectorB => vec![Axis::Z, a],
                        _ => vec![a, Axis::Z],
                    };
                    out.push(MeasurementSetting { family, alpha: a, axes });
                }
            }
            Ok(out)
        }
        n => Err(CircuitError::UnsupportedBands(n)),
    }
}

/// `(I ⊗ A_1 ⊗ … ⊗ A_M) · U`.
pub fn apply_measurement_rotations(u: &EmbeddedUnitary, axes: &[Axis]) -> Result<ComplexMatrix> {
    let m = u.system_dim().trailing_zeros() as usize;
    if axes.len() != m {
        return Err(CircuitError::SettingMismatch(axes.len(), m));
    }
    let rot = axes.iter().fold(ComplexMatrix::identity(2), |acc, a| acc.kron(&a.rotation()));
    Ok(&rot * &u.u_matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotConfig {
    pub shots: u64,
    pub seed: u64,
    pub mode: ShotMode,
}

impl ShotConfig {
    pub fn exact() -> Self {
        Self { shots: 0, seed: 0, mode: ShotMode::Exact }
    }

    pub fn sampled(shots: u64, seed: u64) -> Self {
        Self { shots, seed, mode: ShotMode::Sampled }
    }
}

/// Postselected readout of one circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Outcome {
    /// Retained-bitstring probabilities, renormalised.
    Exact { probabilities: BTreeMap<String, f64> },
    /// Retained-bitstring counts out of `shots` total draws.
    Sampled { counts: BTreeMap<String, u64>, shots: u64 },
}

impl Outcome {
    /// Renormalised retained distribution.
    pub fn probabilities(&self) -> BTreeMap<String, f64> {
        match self {
            Outcome::Exact { probabilities } => probabilities.clone(),
            Outcome::Sampled { counts, .. } => {
                let total: u64 = counts.values().sum();
                counts.iter().map(|(b, &c)| (b.clone(), c as f64 / total.max(1) as f64)).collect()
            }
        }
    }

    pub fn retained(&self) -> Option<u64> {
        match self {
            Outcome::Exact { .. } => None,
            Outcome::Sampled { counts, .. } => Some(counts.values().sum()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreparationMethod {
    /// Rotated evolution `e^{−i e^{iλ}Ht}`.
    Rotation,
    /// Spectral-filter fallback.
    Filter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub k: f64,
    pub k_index: usize,
    pub band: usize,
    pub setting: MeasurementSetting,
    pub outcome: Outcome,
    pub discarded_fraction: f64,
    pub method: PreparationMethod,
    pub lambda: f64,
    /// Overlap of the prepared state with the target eigenvector.
    pub selection_overlap: f64,
}

fn bitstring(index: usize, bits: usize) -> String {
    (0..bits).rev().map(|b| if (index >> b) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Reads out `u_rot|0…0⟩`, keeping ancilla-0 outcomes. Returns the outcome
/// and the discarded fraction.
pub fn simulate_measurement(u_rot: &ComplexMatrix, cfg: &ShotConfig, rng: &mut ChaCha8Rng) -> Result<(Outcome, f64)> {
    let dim = u_rot.dim();
    let bits = dim.trailing_zeros() as usize;
    let half = dim / 2;
    let probs: Vec<f64> = (0..dim).map(|i| u_rot[(i, 0)].norm_sqr()).collect();
    let total: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    match cfg.mode {
        ShotMode::Exact => {
            let kept: f64 = probs[..half].iter().sum();
            if kept <= 0.0 {
                return Err(CircuitError::ZeroSuccess);
            }
            let probabilities = (0..half).map(|i| (bitstring(i, bits), probs[i] / kept)).collect();
            Ok((Outcome::Exact { probabilities }, 1.0 - kept))
        }
        ShotMode::Sampled => {
            if cfg.shots == 0 {
                return Err(CircuitError::NoShots);
            }
            let draws = multinomial(cfg.shots, &probs, rng);
            let kept: u64 = draws[..half].iter().sum();
            if kept == 0 {
                return Err(CircuitError::AllShotsDiscarded);
            }
            let counts = (0..half).filter(|&i| draws[i] > 0).map(|i| (bitstring(i, bits), draws[i])).collect();
            Ok((Outcome::Sampled { counts, shots: cfg.shots }, 1.0 - kept as f64 / cfg.shots as f64))
        }
    }
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial(n: u64, probs: &[f64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0_f64;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[i] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

/// Deterministic sub-seed for one circuit.
pub fn job_seed(seed: u64, k_index: usize, band: usize, setting: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    [k_index as u64, band as u64, setting as u64]
        .iter()
        .fold(splitmix(seed), |acc, &x| splitmix(acc ^ splitmix(x.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// What to do when no λ reaches the selectivity threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPolicy {
    /// Fail with `WeakSelectivity`.
    Strict,
    /// Use the best λ anyway.
    BestEffort,
    /// Switch to the spectral filter below [`FILTER_THRESHOLD`].
    #[default]
    Filter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub t: f64,
    pub lambda_samples: usize,
    pub policy: SelectionPolicy,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self { t: 20.0, lambda_samples: DEFAULT_LAMBDA_SAMPLES, policy: SelectionPolicy::Filter }
    }
}

/// Diagonalisation of `H(k)` along a grid with bands labelled by continuity
/// from the descending-Im ordering at the first point.
pub fn tracked_bands(spec: &TwisterSpec, k_grid: &[f64]) -> Result<Vec<EigenDecomposition>> {
    let mut out: Vec<EigenDecomposition> = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let h = build_hamiltonian(spec, k)?;
        let dec = match out.last() {
            Some(prev) => eig_tracked(&h, prev)?,
            None => eig(&h)?,
        };
        out.push(dec);
    }
    Ok(out)
}

/// State preparation chosen for one `(k, band)`.
#[derive(Debug, Clone)]
pub struct Preparation {
    pub method: PreparationMethod,
    pub lambda: f64,
    pub overlap: f64,
    pub embedded: EmbeddedUnitary,
}

pub fn prepare_band(
    h: &ComplexMatrix,
    dec: &EigenDecomposition,
    band: usize,
    k: f64,
    opts: &ProtocolOptions,
) -> Result<Preparation> {
    let target = &dec.right[band];
    let (best, _) = sweep_rotation_angle(h, target, opts.t, opts.lambda_samples)?;
    if best.overlap < SELECTIVITY_THRESHOLD && opts.policy == SelectionPolicy::Strict {
        return Err(CircuitError::WeakSelectivity { k, band, overlap: best.overlap });
    }
    if best.overlap < FILTER_THRESHOLD && opts.policy == SelectionPolicy::Filter {
        let filter = spectral_filter(h, &dec.eigenvalues, band);
        // Start from the basis state |j⟩ (X gates on the system) with the
        // largest projection onto the band.
        let n = filter.dim();
        let start = (0..n).max_by(|&a, &b| norm(&filter.column(a)).total_cmp(&norm(&filter.column(b)))).unwrap_or(0);
        let flip = ComplexMatrix::from_fn(n, |r, c| if r == c ^ start { ONE } else { ZERO });
        let filter = &filter * &flip;
        let embedded = block_embed(&filter)?;
        let out = filter.column(0);
        let overlap = inner(&numerics::normalized(&out), target).norm();
        return Ok(Preparation { method: PreparationMethod::Filter, lambda: 0.0, overlap, embedded });
    }
    let u_h = nonunitary_evolution(h, opts.t, best.lambda)?;
    let embedded = block_embed(&u_h)?;
    Ok(Preparation { method: PreparationMethod::Rotation, lambda: best.lambda, overlap: best.overlap, embedded })
}

/// Runs every circuit of the protocol: for each k-point and band, prepare
/// the band's eigenstate and read it out in every measurement setting.
/// Records are ordered by `(k_index, band, setting)`.
pub fn run_protocol(
    spec: &TwisterSpec,
    k_grid: &[f64],
    cfg: &ShotConfig,
    opts: &ProtocolOptions,
) -> Result<Vec<MeasurementRecord>> {
    let settings = protocol_settings(spec.n_bands)?;
    let bands = tracked_bands(spec, k_grid)?;
    run_protocol_with_bands(spec, k_grid, &bands, &settings, cfg, opts)
}

pub fn run_protocol_with_bands(
    spec: &TwisterSpec,
    k_grid: &[f64],
    bands: &[EigenDecomposition],
    settings: &[MeasurementSetting],
    cfg: &ShotConfig,
    opts: &ProtocolOptions,
) -> Result<Vec<MeasurementRecord>> {
    let n = spec.n_bands;
    let jobs: Vec<(usize, usize)> = (0..k_grid.len()).flat_map(|ki| (0..n).map(move |b| (ki, b))).collect();
    let per_job: Vec<Result<Vec<MeasurementRecord>>> = jobs
        .par_iter()
        .map(|&(ki, band)| {
            let k = k_grid[ki];
            let h = build_hamiltonian(spec, k)?;
            let prep = prepare_band(&h, &bands[ki], band, k, opts)?;
            settings
                .iter()
                .enumerate()
                .map(|(si, setting)| {
                    let u_rot = apply_measurement_rotations(&prep.embedded, &setting.axes)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(job_seed(cfg.seed, ki, band, si));
                    let (outcome, discarded_fraction) = simulate_measurement(&u_rot, cfg, &mut rng)?;
                    Ok(MeasurementRecord {
                        k,
                        k_index: ki,
                        band,
                        setting: setting.clone(),
                        outcome,
                        discarded_fraction,
                        method: prep.method,
                        lambda: prep.lambda,
                        selection_overlap: prep.overlap,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(jobs.len() * settings.len());
    for r in per_job {
        out.extend(r?);
    }
    Ok(out)
}

/// Uniform grid of `points` values from 0 to 2π inclusive.
pub fn k_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|i| 2.0 * PI * i as f64 / (points - 1) as f64).collect()
}
