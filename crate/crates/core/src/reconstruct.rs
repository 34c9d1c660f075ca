//! Eigenstate reconstruction from postselected expectation values.
//!
//! Two-band states are recovered from the three Pauli expectations of the
//! single system qubit. Four-band states use six Bloch angles: a polar and
//! azimuthal angle for each of the A and B sectors of the first qubit, plus a
//! pair describing the weight and relative phase between the sectors.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Axis, MeasurementRecord, Outcome, SettingFamily};
use crate::numerics::{inner, norm, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("missing measurement setting {0}")]
    IncompleteSettings(String),
    #[error("records mix different (k, band) pairs")]
    MixedRecords,
    #[error("expectation {value} exceeds the unit range beyond tolerance")]
    Overshoot { value: f64 },
    #[error("state vector has dimension {0}; expected 2 or 4")]
    BadDimension(usize),
    #[error("malformed state row: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ReconstructError>;

/// Sector weight below which conditional expectations are not trusted.
pub const EMPTY_SECTOR: f64 = 1e-10;
/// Transverse magnitude below which an azimuthal angle is undefined.
pub const DEGENERATE_PHASE: f64 = 1e-12;
/// Allowed overshoot of arccos arguments in exact mode.
pub const EXACT_OVERSHOOT: f64 = 1e-6;

/// Conditions encountered while reconstructing one state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFlags {
    /// At least one azimuthal angle was undefined and set to zero.
    pub degenerate_phase: bool,
    /// At least one conditioning sector was empty.
    pub empty_sector: bool,
    /// An arccos argument was clamped into `[−1, 1]`.
    pub clamped: bool,
}

impl StateFlags {
    fn merge(self, other: Self) -> Self {
        Self {
            degenerate_phase: self.degenerate_phase || other.degenerate_phase,
            empty_sector: self.empty_sector || other.empty_sector,
            clamped: self.clamped || other.clamped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles2 {
    pub theta: f64,
    pub phi: f64,
    pub flags: StateFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles4 {
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_ab: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub phi_ab: f64,
    pub flags: StateFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedState {
    pub k: f64,
    pub band: usize,
    pub amplitudes: Vec<C64>,
    #[serde(default)]
    pub flags: StateFlags,
}

impl ReconstructedState {
    /// `|⟨self|other⟩|` for unit vectors.
    pub fn overlap(&self, other: &[C64]) -> f64 {
        inner(&self.amplitudes, other).norm() / (norm(&self.amplitudes) * norm(other))
    }

    /// One text row: `k band re0 im0 re1 im1 …`, with round-trip float formatting.
    pub fn to_row(&self) -> String {
        let mut parts = vec![format!("{:?}", self.k), self.band.to_string()];
        for a in &self.amplitudes {
            parts.push(format!("{:?}", a.re));
            parts.push(format!("{:?}", a.im));
        }
        parts.join(" ")
    }

    pub fn from_row(row: &str) -> Result<Self> {
        let bad = || ReconstructError::Parse(row.to_string());
        let fields: Vec<&str> = row.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if fields.len() < 4 || !fields.len().is_multiple_of(2) {
            return Err(bad());
        }
        let k: f64 = fields[0].parse().map_err(|_| bad())?;
        let band: usize = fields[1].parse().map_err(|_| bad())?;
        let nums: Vec<f64> =
            fields[2..].iter().map(|f| f.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let amplitudes = nums.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        Ok(Self { k, band, amplitudes, flags: StateFlags::default() })
    }
}

impl fmt::Display for ReconstructedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_row())
    }
}

/// Multiplies by a global phase so the last nonvanishing component is real
/// and non-negative, then normalises.
pub fn gauge(v: &[C64]) -> Vec<C64> {
    let n = norm(v);
    if n == 0.0 {
        return v.to_vec();
    }
    let pivot = v.iter().rev().find(|z| z.norm() > 1e-12 * n).copied().unwrap_or(v[v.len() - 1]);
    let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { C64::new(1.0, 0.0) };
    v.iter().map(|z| z * phase / n).collect()
}

fn clamp_unit(x: f64, exact: bool, flags: &mut StateFlags) -> Result<f64> {
    if x.abs() > 1.0 {
        if exact && x.abs() > 1.0 + EXACT_OVERSHOOT {
            return Err(ReconstructError::Overshoot { value: x });
        }
        flags.clamped = true;
        return Ok(x.clamp(-1.0, 1.0));
    }
    Ok(x)
}

fn azimuth(y: f64, x: f64, flags: &mut StateFlags) -> f64 {
    if x * x + y * y < DEGENERATE_PHASE {
        flags.degenerate_phase = true;
        0.0
    } else {
        y.atan2(x)
    }
}

fn is_exact(records: &[&MeasurementRecord]) -> bool {
    records.iter().all(|r| matches!(r.outcome, Outcome::Exact { .. }))
}

fn check_same_point(records: &[&MeasurementRecord]) -> Result<()> {
    match records.first() {
        Some(first) if records.iter().all(|r| r.k_index == first.k_index && r.band == first.band) => Ok(()),
        Some(_) => Err(ReconstructError::MixedRecords),
        None => Err(ReconstructError::IncompleteSettings("any".into())),
    }
}

fn find(records: &[&MeasurementRecord], family: SettingFamily, alpha: Axis) -> Result<BTreeMap<String, f64>> {
    records
        .iter()
        .find(|r| r.setting.family == family && r.setting.alpha == alpha)
        .map(|r| r.outcome.probabilities())
        .ok_or_else(|| ReconstructError::IncompleteSettings(format!("{family:?}/{}", alpha.letter())))
}

fn p(dist: &BTreeMap<String, f64>, bits: &str) -> f64 {
    dist.get(bits).copied().unwrap_or(0.0)
}

/// `(⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩)` of the single system qubit.
pub fn pauli_expectations_2band(records: &[&MeasurementRecord]) -> Result<[f64; 3]> {
    check_same_point(records)?;
    let mut out = [0.0; 3];
    for (slot, alpha) in Axis::ALL.into_iter().enumerate() {
        let d = find(records, SettingFamily::Single, alpha)?;
        out[slot] = p(&d, "00") - p(&d, "01");
    }
    Ok(out)
}

/// Expectations `[x, y, z]` straight from a state, for oracles and tests.
pub fn pauli_of_state(psi: &[C64]) -> [f64; 3] {
    let c = psi[0].conj() * psi[1];
    let n = psi[0].norm_sqr() + psi[1].norm_sqr();
    [2.0 * c.re / n, 2.0 * c.im / n, (psi[0].norm_sqr() - psi[1].norm_sqr()) / n]
}

pub fn bloch_angles_2band(s: [f64; 3], exact: bool) -> Result<BlochAngles2> {
    let mut flags = StateFlags::default();
    let r2 = s.iter().map(|x| x * x).sum::<f64>();
    if exact && r2.sqrt() > 1.0 + EXACT_OVERSHOOT {
        return Err(ReconstructError::Overshoot { value: r2.sqrt() });
    }
    let theta = clamp_unit(s[2], exact, &mut flags)?.acos();
    let phi = azimuth(s[1], s[0], &mut flags);
    Ok(BlochAngles2 { theta, phi, flags })
}

pub fn reconstruct_2band(angles: &BlochAngles2, k: f64, band: usize) -> ReconstructedState {
    let (s, c) = (angles.theta / 2.0).sin_cos();
    let v = [C64::new(c, 0.0), C64::from_polar(s, angles.phi)];
    ReconstructedState { k, band, amplitudes: gauge(&v), flags: angles.flags }
}

/// Conditional expectations of the four-band protocol at one `(k, band)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectations4 {
    /// `⟨σ^α⟩_{+−,A}` for α = x, y, z (unnormalised by the sector weight).
    pub sector_a: [f64; 3],
    /// `⟨σ^α⟩_{+−,B}`.
    pub sector_b: [f64; 3],
    /// `⟨σ^α⟩_{−,AB}`.
    pub inter_minus: [f64; 3],
    /// `⟨σ^z⟩_{+−,AB}`.
    pub inter_z: f64,
    /// `⟨I⟩_{+−,A}` and `⟨I⟩_{+−,B}`: retained weight of each sector.
    pub weight_a: f64,
    pub weight_b: f64,
    /// Retained weight of the `−` sector of the second qubit.
    pub weight_minus: f64,
    pub exact: bool,
}

pub fn conditional_expectations_4band(records: &[&MeasurementRecord]) -> Result<Expectations4> {
    check_same_point(records)?;
    let mut sector_a = [0.0; 3];
    let mut sector_b = [0.0; 3];
    let mut inter_minus = [0.0; 3];
    for (slot, alpha) in Axis::ALL.into_iter().enumerate() {
        let a = find(records, SettingFamily::SectorA, alpha)?;
        sector_a[slot] = p(&a, "000") - p(&a, "001");
        let b = find(records, SettingFamily::SectorB, alpha)?;
        sector_b[slot] = p(&b, "010") - p(&b, "011");
        let m = find(records, SettingFamily::InterMinus, alpha)?;
        inter_minus[slot] = p(&m, "001") - p(&m, "011");
    }
    let az = find(records, SettingFamily::SectorA, Axis::Z)?;
    let bz = find(records, SettingFamily::SectorB, Axis::Z)?;
    let mz = find(records, SettingFamily::InterMinus, Axis::Z)?;
    let abz = find(records, SettingFamily::InterBoth, Axis::Z)?;
    Ok(Expectations4 {
        sector_a,
        sector_b,
        inter_minus,
        inter_z: p(&abz, "000") + p(&abz, "001") - p(&abz, "010") - p(&abz, "011"),
        weight_a: p(&az, "000") + p(&az, "001"),
        weight_b: p(&bz, "010") + p(&bz, "011"),
        weight_minus: p(&mz, "001") + p(&mz, "011"),
        exact: is_exact(records),
    })
}

/// Exact conditional expectations of a four-component state.
pub fn expectations_of_state_4band(psi: &[C64]) -> Expectations4 {
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let pair = |a: C64, b: C64| {
        let c = a.conj() * b;
        [2.0 * c.re / n, 2.0 * c.im / n, (a.norm_sqr() - b.norm_sqr()) / n]
    };
    Expectations4 {
        sector_a: pair(psi[0], psi[1]),
        sector_b: pair(psi[2], psi[3]),
        inter_minus: pair(psi[1], psi[3]),
        inter_z: (psi[0].norm_sqr() + psi[1].norm_sqr() - psi[2].norm_sqr() - psi[3].norm_sqr()) / n,
        weight_a: (psi[0].norm_sqr() + psi[1].norm_sqr()) / n,
        weight_b: (psi[2].norm_sqr() + psi[3].norm_sqr()) / n,
        weight_minus: (psi[1].norm_sqr() + psi[3].norm_sqr()) / n,
        exact: true,
    }
}

pub fn bloch_angles_4band(e: &Expectations4) -> Result<BlochAngles4> {
    let mut flags = StateFlags::default();
    let polar = |z: f64, weight: f64, flags: &mut StateFlags| -> Result<f64> {
        if weight < EMPTY_SECTOR {
            flags.empty_sector = true;
            return Ok(0.0);
        }
        Ok(clamp_unit(z / weight, e.exact, flags)?.acos())
    };
    let theta_a = polar(e.sector_a[2], e.weight_a, &mut flags)?;
    let theta_b = polar(e.sector_b[2], e.weight_b, &mut flags)?;
    let theta_ab = polar(e.inter_z, 1.0, &mut flags)?;
    let phase = |v: [f64; 3], weight: f64, flags: &mut StateFlags| {
        if weight < EMPTY_SECTOR {
            flags.empty_sector = true;
            return 0.0;
        }
        azimuth(-v[1] / weight, v[0] / weight, flags)
    };
    let phi_a = phase(e.sector_a, e.weight_a, &mut flags);
    let phi_b = phase(e.sector_b, e.weight_b, &mut flags);
    let phi_ab = phase(e.inter_minus, e.weight_minus, &mut flags);
    Ok(BlochAngles4 { theta_a, theta_b, theta_ab, phi_a, phi_b, phi_ab, flags })
}

pub fn reconstruct_4band(angles: &BlochAngles4, k: f64, band: usize) -> ReconstructedState {
    let half = |t: f64| ((t / 2.0).cos(), (t / 2.0).sin());
    let (ca, sa) = half(angles.theta_a);
    let (cb, sb) = half(angles.theta_b);
    let (cab, sab) = half(angles.theta_ab);
    let v = [
        C64::from_polar(ca * cab, angles.phi_a + angles.phi_ab),
        C64::from_polar(sa * cab, angles.phi_ab),
        C64::from_polar(cb * sab, angles.phi_b),
        C64::new(sb * sab, 0.0),
    ];
    ReconstructedState { k, band, amplitudes: gauge(&v), flags: angles.flags }
}

/// Reconstructs one state from the records of a single `(k, band)`.
pub fn reconstruct_point(records: &[&MeasurementRecord], n_bands: usize) -> Result<ReconstructedState> {
    check_same_point(records)?;
    let (k, band) = (records[0].k, records[0].band);
    match n_bands {
        2 => {
            let s = pauli_expectations_2band(records)?;
            Ok(reconstruct_2band(&bloch_angles_2band(s, is_exact(records))?, k, band))
        }
        4 => {
            let e = conditional_expectations_4band(records)?;
            Ok(reconstruct_4band(&bloch_angles_4band(&e)?, k, band))
        }
        n => Err(ReconstructError::BadDimension(n)),
    }
}

/// Reconstructed states indexed `[band][k_index]`.
pub fn reconstruct_series(records: &[MeasurementRecord], n_bands: usize) -> Result<Vec<Vec<ReconstructedState>>> {
    let mut groups: BTreeMap<(usize, usize), Vec<&MeasurementRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.band, r.k_index)).or_default().push(r);
    }
    let mut out: Vec<Vec<ReconstructedState>> = vec![Vec::new(); n_bands];
    for ((band, _), recs) in groups {
        if band >= n_bands {
            return Err(ReconstructError::BadDimension(band));
        }
        out[band].push(reconstruct_point(&recs, n_bands)?);
    }
    Ok(out)
}

/// States from a general unit vector, routed through expectations and angles.
pub fn round_trip(psi: &[C64]) -> Result<Vec<C64>> {
    match psi.len() {
        2 => Ok(reconstruct_2band(&bloch_angles_2band(pauli_of_state(psi), true)?, 0.0, 0).amplitudes),
        4 => Ok(reconstruct_4band(&bloch_angles_4band(&expectations_of_state_4band(psi))?, 0.0, 0).amplitudes),
        n => Err(ReconstructError::BadDimension(n)),
    }
}

/// Merges the flags of a series.
pub fn series_flags(states: &[ReconstructedState]) -> StateFlags {
    states.iter().fold(StateFlags::default(), |acc, s| acc.merge(s.flags))
}
