//! End-to-end runs: simulated circuits → reconstructed states → trajectories
//! → windings and braid word → knot invariants and link class. A classical
//! route through exact diagonalisation serves as the oracle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::braid::BraidWord;
use crate::braidtrace::{
    analyze_trajectories, lambda_2band, lambda_4band, permutation_from_bands, permutation_matrix, winding_matrix,
    BraidAnalysis, BraidTraceError, PermutationMatrix, Reference, SignConvention, TrajectorySeries, WindingMatrix,
    EXACT_WINDING_TOLERANCE, SAMPLED_WINDING_TOLERANCE,
};
use crate::circuit::{
    k_grid, protocol_settings, run_protocol_with_bands, tracked_bands, CircuitError, MeasurementRecord,
    ProtocolOptions, ShotConfig, ShotMode,
};
use crate::class::KnotClass;
use crate::knots::{alexander, classify_link, jones, KnotError, LaurentPoly};
use crate::numerics::{inner, norm, ComplexMatrix, EigenDecomposition, C64};
use crate::reconstruct::{reconstruct_series, ReconstructError, ReconstructedState};
use crate::twister::{build_hamiltonian, TwisterError, TwisterSpec};

/// Failure of one pipeline stage.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("model: {0}")]
    Model(#[from] TwisterError),
    #[error("circuit: {0}")]
    Circuit(#[from] CircuitError),
    #[error("reconstruction: {0}")]
    Reconstruct(#[from] ReconstructError),
    #[error("braid tracing: {0}")]
    BraidTrace(#[from] BraidTraceError),
    #[error("knot invariants: {0}")]
    Knots(#[from] KnotError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec: TwisterSpec,
    pub k_points: usize,
    pub shots: ShotConfig,
    pub protocol: ProtocolOptions,
    pub convention: SignConvention,
    /// Projection plane; the model default when `None`.
    pub reference: Option<Reference>,
}

impl RunConfig {
    pub fn exact(spec: TwisterSpec) -> Self {
        Self {
            spec,
            k_points: 100,
            shots: ShotConfig::exact(),
            protocol: ProtocolOptions::default(),
            convention: SignConvention::Geometric,
            reference: None,
        }
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.protocol.t = t;
        self
    }

    pub fn with_shots(mut self, shots: ShotConfig) -> Self {
        self.shots = shots;
        self
    }

    pub fn with_k_points(mut self, k_points: usize) -> Self {
        self.k_points = k_points;
        self
    }

    fn winding_tolerance(&self) -> f64 {
        match self.shots.mode {
            ShotMode::Exact => EXACT_WINDING_TOLERANCE,
            ShotMode::Sampled => SAMPLED_WINDING_TOLERANCE,
        }
    }
}

/// Where the Λ trajectories came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectorySource {
    /// Projector observables of the reconstructed states.
    Observables,
    /// Energy expectation `⟨ψ|H|ψ⟩` of the reconstructed states, used where
    /// the projector denominator vanishes identically.
    Energy,
    /// Exact band energies.
    Spectrum,
}

/// Topological read-out shared by both routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub trajectories: TrajectorySeries,
    pub source: TrajectorySource,
    pub analysis: BraidAnalysis,
    /// Four-band 𝒲; also computed for two bands.
    pub winding: WindingMatrix,
    pub reduced_word: BraidWord,
    pub alexander: LaurentPoly,
    pub jones: LaurentPoly,
    /// `None` when the closure matches no tabulated link.
    pub class: Option<KnotClass>,
}

impl Topology {
    pub fn permutation(&self) -> &PermutationMatrix {
        &self.analysis.permutation
    }

    pub fn word(&self) -> &BraidWord {
        &self.analysis.word
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub k_grid: Vec<f64>,
    pub records: Vec<MeasurementRecord>,
    /// `states[band][k_index]`.
    pub states: Vec<Vec<ReconstructedState>>,
    /// `fidelity[band][k_index]` against the diagonalisation eigenvector.
    pub fidelity: Vec<Vec<f64>>,
    pub topology: Topology,
}

impl RunResult {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelity.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Median of `1 − fidelity²` over all bands and k-points.
    pub fn median_infidelity(&self) -> f64 {
        let mut v: Vec<f64> = self.fidelity.iter().flatten().map(|f| 1.0 - f * f).collect();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return f64::NAN;
        }
        let mid = v.len() / 2;
        if v.len() % 2 == 1 {
            v[mid]
        } else {
            0.5 * (v[mid - 1] + v[mid])
        }
    }
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).norm() / (norm(a) * norm(b))
}

/// Amplitude pairs whose relative phase the measurement settings determine.
fn phase_links(n: usize) -> &'static [(usize, usize)] {
    match n {
        2 => &[(0, 1)],
        _ => &[(0, 1), (2, 3), (1, 3)],
    }
}

const NEGLIGIBLE_AMPLITUDE: f64 = 1e-5;

/// Groups of nonzero amplitudes whose phase relative to the gauge component
/// no measured coherence fixes.
pub fn free_phase_groups(psi: &[C64]) -> Vec<Vec<usize>> {
    let n = psi.len();
    let live: Vec<bool> = psi.iter().map(|z| z.norm() > NEGLIGIBLE_AMPLITUDE).collect();
    let mut root: Vec<usize> = (0..n).collect();
    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    for &(a, b) in phase_links(n) {
        if live[a] && live[b] {
            let (ra, rb) = (find(&mut root, a), find(&mut root, b));
            root[ra] = rb;
        }
    }
    let Some(gauge) = (0..n).rev().find(|&i| live[i]) else { return Vec::new() };
    let gauge_root = find(&mut root, gauge);
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in (0..n).filter(|&i| live[i]) {
        let r = find(&mut root, i);
        if r == gauge_root {
            continue;
        }
        match groups.iter_mut().find(|(g, _)| *g == r) {
            Some((_, members)) => members.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

fn eigen_residual(h: &ComplexMatrix, psi: &[C64]) -> f64 {
    let hv = h.mul_vec(psi);
    let e = inner(psi, &hv) / inner(psi, psi);
    hv.iter().zip(psi).map(|(a, b)| (a - e * b).norm_sqr()).sum::<f64>().sqrt() / norm(psi)
}

fn with_phases(psi: &[C64], groups: &[Vec<usize>], phases: &[f64]) -> Vec<C64> {
    let mut out = psi.to_vec();
    for (g, &phi) in groups.iter().zip(phases) {
        for &i in g {
            out[i] *= C64::from_polar(1.0, phi);
        }
    }
    out
}

/// Fills in phases the settings cannot see by minimising the eigen-residual
/// `‖Hψ − ⟨H⟩ψ‖`; measured phases are left untouched.
pub fn complete_phases(h: &ComplexMatrix, psi: &[C64]) -> Vec<C64> {
    let groups = free_phase_groups(psi);
    if groups.is_empty() {
        return psi.to_vec();
    }
    let g = groups.len();
    let steps: usize = if g == 1 { 360 } else { 48 };
    let cost = |phases: &[f64]| eigen_residual(h, &with_phases(psi, &groups, phases));
    let mut best = (f64::INFINITY, vec![0.0; g]);
    for idx in 0..steps.pow(g as u32) {
        let phases: Vec<f64> =
            (0..g).map(|d| (idx / steps.pow(d as u32) % steps) as f64 * TAU / steps as f64).collect();
        let c = cost(&phases);
        if c < best.0 {
            best = (c, phases);
        }
    }
    let mut phases = best.1;
    let mut width = TAU / steps as f64;
    for _ in 0..3 {
        for d in 0..g {
            let (mut lo, mut hi) = (phases[d] - width, phases[d] + width);
            let eval = |x: f64, p: &mut Vec<f64>| {
                p[d] = x;
                cost(p)
            };
            let mut trial = phases.clone();
            for _ in 0..60 {
                let a = lo + (hi - lo) * 0.381_966;
                let b = hi - (hi - lo) * 0.381_966;
                if eval(a, &mut trial) < eval(b, &mut trial) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            phases[d] = 0.5 * (lo + hi);
        }
        width *= 0.5;
    }
    with_phases(psi, &groups, &phases)
}

fn energy_trajectories(spec: &TwisterSpec, states: &[Vec<ReconstructedState>]) -> Result<TrajectorySeries> {
    let k: Vec<f64> = states[0].iter().map(|s| s.k).collect();
    let mut lambda = Vec::with_capacity(states.len());
    for band in states {
        let mut l = Vec::with_capacity(band.len());
        for s in band {
            let h = build_hamiltonian(spec, s.k)?;
            let psi = complete_phases(&h, &s.amplitudes);
            let hv = h.mul_vec(&psi);
            l.push(inner(&psi, &hv) / inner(&psi, &psi));
        }
        lambda.push(l);
    }
    Ok(TrajectorySeries::new(k, lambda)?)
}

fn topology(
    cfg: &RunConfig,
    trajectories: TrajectorySeries,
    source: TrajectorySource,
    permutation: PermutationMatrix,
) -> Result<Topology> {
    let n = cfg.spec.n_bands;
    let reference = cfg.reference.unwrap_or_else(|| Reference::default_for(n));
    let analysis = analyze_trajectories(&trajectories, permutation, reference, cfg.convention)?;
    let winding = winding_matrix(&analysis.trace, &analysis.permutation, cfg.winding_tolerance())?;
    let reduced_word = analysis.word.free_reduce();
    let alexander = alexander(&reduced_word)?;
    let jones = jones(&reduced_word)?;
    let w = (n == 4).then_some(winding.entries.as_slice());
    let class = classify_link(&reduced_word, w).ok();
    Ok(Topology { trajectories, source, analysis, winding, reduced_word, alexander, jones, class })
}

/// Reads trajectories off reconstructed states, falling back to the energy
/// expectation when the projector route is singular.
pub fn trajectories_from_states(
    spec: &TwisterSpec,
    states: &[Vec<ReconstructedState>],
) -> Result<(TrajectorySeries, TrajectorySource)> {
    let projected = if spec.n_bands == 2 { lambda_2band(&states[0], &states[1]) } else { lambda_4band(states) };
    match projected {
        Ok(t) => Ok((t, TrajectorySource::Observables)),
        Err(BraidTraceError::ProjectionDegenerate { .. } | BraidTraceError::PoleHit { .. }) => {
            Ok((energy_trajectories(spec, states)?, TrajectorySource::Energy))
        }
        Err(e) => Err(e.into()),
    }
}

/// Full simulated experiment.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.spec.validate()?;
    let grid = k_grid(cfg.k_points);
    let bands = tracked_bands(&cfg.spec, &grid)?;
    let settings = protocol_settings(cfg.spec.n_bands)?;
    let records = run_protocol_with_bands(&cfg.spec, &grid, &bands, &settings, &cfg.shots, &cfg.protocol)?;
    let states = reconstruct_series(&records, cfg.spec.n_bands)?;
    let fidelity = fidelities(&states, &bands);
    let n = cfg.spec.n_bands;
    let last = grid.len() - 1;
    let at0: Vec<ReconstructedState> = (0..n).map(|b| states[b][0].clone()).collect();
    let at_end: Vec<ReconstructedState> = (0..n).map(|b| states[b][last].clone()).collect();
    let permutation = permutation_matrix(&at0, &at_end)?;
    let (traj, source) = trajectories_from_states(&cfg.spec, &states)?;
    let topology = topology(cfg, traj, source, permutation)?;
    Ok(RunResult { config: cfg.clone(), k_grid: grid, records, states, fidelity, topology })
}

fn fidelities(states: &[Vec<ReconstructedState>], bands: &[EigenDecomposition]) -> Vec<Vec<f64>> {
    states
        .iter()
        .enumerate()
        .map(|(b, series)| series.iter().zip(bands).map(|(s, d)| fidelity(&s.amplitudes, &d.right[b])).collect())
        .collect()
}

/// Classical oracle: trajectories from exact diagonalisation. Four-band Λ
/// uses the eigenvector component ratio, or the energies themselves on the
/// line where that ratio is singular.
pub fn run_spectral(cfg: &RunConfig) -> Result<Topology> {
    cfg.spec.validate()?;
    let grid = k_grid(cfg.k_points);
    let bands = tracked_bands(&cfg.spec, &grid)?;
    let permutation = permutation_from_bands(&bands)?;
    let (traj, source) = spectral_trajectories(&cfg.spec, &grid, &bands)?;
    topology(cfg, traj, source, permutation)
}

pub fn spectral_trajectories(
    spec: &TwisterSpec,
    grid: &[f64],
    bands: &[EigenDecomposition],
) -> Result<(TrajectorySeries, TrajectorySource)> {
    if spec.n_bands == 4 {
        let ratio: Option<Vec<Vec<C64>>> = (0..4)
            .map(|b| {
                bands.iter().map(|d| (d.right[b][3].norm() > 1e-9).then(|| d.right[b][2] / d.right[b][3])).collect()
            })
            .collect();
        if let Some(lambda) = ratio {
            if let Ok(t) = TrajectorySeries::new(grid.to_vec(), lambda) {
                return Ok((t, TrajectorySource::Observables));
            }
        }
    }
    Ok((TrajectorySeries::from_spectrum(grid.to_vec(), bands)?, TrajectorySource::Spectrum))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solomon_exact_run() {
        let res = run(&RunConfig::exact(TwisterSpec::four_band(-0.5, -0.4))).unwrap();
        assert!(res.min_fidelity() > 0.999);
        assert_eq!(res.topology.word().to_string(), "s1 s3 s2 s1 s3 s2");
        assert_eq!(res.topology.class, Some(KnotClass::SolomonKnot));
        assert_eq!(res.topology.jones.to_string(), "-s^(3/2)-s^(7/2)+s^(9/2)-s^(11/2)");
        assert_eq!(res.records.len(), 4800);
    }

    #[test]
    fn spectral_route_classifies_anchors() {
        for (m0, m1, class) in crate::twister::ANCHORS_2BAND {
            let t = run_spectral(&RunConfig::exact(TwisterSpec::two_band(m0, m1))).unwrap();
            assert_eq!(t.class, Some(class));
        }
        let t = run_spectral(&RunConfig::exact(TwisterSpec::four_band(1.5, -1.0))).unwrap();
        assert_eq!(t.source, TrajectorySource::Spectrum);
        assert!(t.winding.entries.iter().flatten().all(|&w| w == 0.0));
    }

    #[test]
    fn free_phases_follow_missing_links() {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        assert!(free_phase_groups(&[o, o, o, o]).is_empty());
        assert_eq!(free_phase_groups(&[o, z, z, o]), vec![vec![0]]);
        assert_eq!(free_phase_groups(&[o, z, o, z]), vec![vec![0]]);
        assert!(free_phase_groups(&[o, z]).is_empty());
    }

    #[test]
    fn phase_completion_recovers_eigenvector() {
        let spec = TwisterSpec::four_band(1.5, -1.0);
        let h = build_hamiltonian(&spec, 0.4).unwrap();
        let dec = crate::numerics::eig(&h).unwrap();
        let target = crate::reconstruct::gauge(&dec.right[3]);
        let mut scrambled = target.clone();
        scrambled[0] *= C64::from_polar(1.0, 2.0);
        let fixed = complete_phases(&h, &scrambled);
        assert!(fidelity(&fixed, &target) > 1.0 - 1e-10);
        let untouched = complete_phases(&h, &dec.right[0]);
        assert_eq!(untouched, dec.right[0]);
    }

    #[test]
    fn double_unlinks_exact_run() {
        let res = run(&RunConfig::exact(TwisterSpec::four_band(1.5, -1.0))).unwrap();
        assert_eq!(res.topology.source, TrajectorySource::Energy);
        assert!(res.topology.word().is_empty());
        assert_eq!(res.topology.class, Some(KnotClass::DoubleUnlinks));
    }

    #[test]
    fn hopf_chain_exact_run() {
        let res = run(&RunConfig::exact(TwisterSpec::four_band(2.0, 1.1))).unwrap();
        assert!(res.min_fidelity() > 0.999);
        assert_eq!(res.topology.word().to_string(), "s1 s3 s1 s3 s2");
        assert_eq!(res.topology.class, Some(KnotClass::HopfChain));
    }

    #[test]
    fn two_band_exact_runs() {
        let expected = [("s1 s1", 20.0), ("s1", 25.0), ("", 25.0)];
        for ((m0, m1, class), (word, t)) in crate::twister::ANCHORS_2BAND.into_iter().zip(expected) {
            let res = run(&RunConfig::exact(TwisterSpec::two_band(m0, m1)).with_t(t)).unwrap();
            assert!(res.min_fidelity() > 0.999, "{m0}");
            assert_eq!(res.topology.reduced_word.to_string(), word);
            assert_eq!(res.topology.class, Some(class));
        }
    }
}
