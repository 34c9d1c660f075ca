//! From eigenstate series to braids: projected trajectories Λ, pairwise
//! winding traces, the end-of-period band permutation, the topological
//! winding matrix 𝒲, crossing detection, braid-word extraction and the
//! global biorthogonal Berry phase of the two-band model.
//!
//! A crossing on the braid diagram happens when `Λ_i − Λ_j` is
//! perpendicular to the projection direction `e^{iχ}`, i.e. when the
//! phase-shifted winding `W̃_ij` passes a level `1/4 + r/2`. Strand positions
//! are ordered by the projection coordinate `Re(e^{−iχ}Λ)`, largest first.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::braid::{BraidError, BraidWord, Generator};
use crate::numerics::{eig, eig_tracked, inner, EigenDecomposition, NumericsError, C64};
use crate::reconstruct::{pauli_of_state, ReconstructedState};
use crate::twister::{build_hamiltonian, TwisterError, TwisterSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BraidTraceError {
    #[error("stereographic pole hit at k = {k:.6} (1 − ⟨σz⟩ = {gap:.3e})")]
    PoleHit { k: f64, gap: f64 },
    #[error("projection degenerate for band {band} at k = {k:.6}")]
    ProjectionDegenerate { k: f64, band: usize },
    #[error("bands {i} and {j} coincide at k = {k:.6}")]
    CoincidentBands { k: f64, i: usize, j: usize },
    #[error("phase step {step:.3} rad for pair ({i},{j}) at k = {k:.6} is too large; refine the k-grid")]
    StepTooLarge { i: usize, j: usize, k: f64, step: f64 },
    #[error("series lengths or grids disagree")]
    GridMismatch,
    #[error("end-of-period overlaps do not define a permutation: {0:?}")]
    NotAPermutation(Vec<usize>),
    #[error("crossing between bands {i} and {j} at k = {k:.6} is not between adjacent strands")]
    NonAdjacentCrossing { k: f64, i: usize, j: usize },
    #[error("winding W({i},{j}) = {value:.4} deviates {deviation:.4} from the nearest multiple of 1/{denominator}")]
    WindingDeviation { i: usize, j: usize, value: f64, deviation: f64, denominator: usize },
    #[error("continuity tracking failed at k = {k:.6} (overlap {overlap:.3})")]
    SortingFailure { k: f64, overlap: f64 },
    #[error("band-swap count is undefined on the line m1 = -1")]
    SpecialLine,
    #[error("left eigenvectors unavailable at k = {0:.6}")]
    MissingLeftVectors(f64),
    #[error(transparent)]
    Braid(#[from] BraidError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] TwisterError),
}

pub type Result<T> = std::result::Result<T, BraidTraceError>;

/// Λ values per band along a closed k-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    pub k_grid: Vec<f64>,
    /// `lambda[band][k_index]`.
    pub lambda: Vec<Vec<C64>>,
}

impl TrajectorySeries {
    pub fn new(k_grid: Vec<f64>, lambda: Vec<Vec<C64>>) -> Result<Self> {
        if lambda.iter().any(|l| l.len() != k_grid.len()) || k_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BraidTraceError::GridMismatch);
        }
        for (m, &k) in k_grid.iter().enumerate() {
            for i in 0..lambda.len() {
                for j in i + 1..lambda.len() {
                    if (lambda[i][m] - lambda[j][m]).norm() < 1e-10 {
                        return Err(BraidTraceError::CoincidentBands { k, i, j });
                    }
                }
            }
        }
        Ok(Self { k_grid, lambda })
    }

    /// Trajectories taken directly from band energies. Differences wind
    /// exactly like the observable-built Λ, which makes this the classical
    /// oracle route.
    pub fn from_spectrum(k_grid: Vec<f64>, bands: &[EigenDecomposition]) -> Result<Self> {
        let n = bands.first().map_or(0, |d| d.len());
        let lambda = (0..n).map(|b| bands.iter().map(|d| d.eigenvalues[b]).collect()).collect();
        Self::new(k_grid, lambda)
    }

    pub fn n_bands(&self) -> usize {
        self.lambda.len()
    }

    /// Complex conjugate of every trajectory.
    pub fn conjugate(&self) -> Self {
        Self {
            k_grid: self.k_grid.clone(),
            lambda: self.lambda.iter().map(|l| l.iter().map(|z| z.conj()).collect()).collect(),
        }
    }
}

fn check_grid(series: &[&[ReconstructedState]]) -> Result<Vec<f64>> {
    let first = series.first().ok_or(BraidTraceError::GridMismatch)?;
    let k: Vec<f64> = first.iter().map(|s| s.k).collect();
    for s in series {
        if s.len() != k.len() || s.iter().zip(&k).any(|(a, b)| (a.k - b).abs() > 1e-12) {
            return Err(BraidTraceError::GridMismatch);
        }
    }
    Ok(k)
}

/// Stereographic coordinate `(⟨σx⟩ + i⟨σy⟩)/(1 − ⟨σz⟩)`.
fn stereographic(state: &ReconstructedState) -> Result<C64> {
    let [x, y, z] = pauli_of_state(&state.amplitudes);
    let gap = 1.0 - z;
    if gap < 1e-9 {
        return Err(BraidTraceError::PoleHit { k: state.k, gap });
    }
    Ok(C64::new(x, y) / gap)
}

/// `Λ = p₊p₋/4` with `p₊ = z₊ + z₋`, `p₋ = z̄₊ − z̄₋`; band `+` gets `Λ` and
/// band `−` gets `−Λ`.
pub fn lambda_2band(plus: &[ReconstructedState], minus: &[ReconstructedState]) -> Result<TrajectorySeries> {
    let k = check_grid(&[plus, minus])?;
    let mut lp = Vec::with_capacity(k.len());
    for (a, b) in plus.iter().zip(minus) {
        let (za, zb) = (stereographic(a)?, stereographic(b)?);
        let l = (za + zb) * (za.conj() - zb.conj()) / 4.0;
        lp.push(l);
    }
    let lm = lp.iter().map(|z| -z).collect();
    TrajectorySeries::new(k, vec![lp, lm])
}

/// `(X, Y, Z)` of the projector observables for a four-component state.
pub fn projector_observables(psi: &[C64]) -> (f64, f64, f64) {
    let c = psi[2].conj() * psi[3];
    (4.0 * c.re, -4.0 * c.im, 4.0 * psi[3].norm_sqr())
}

/// `Λ_i = (X_i + iY_i)/Z_i` for one band.
pub fn lambda_4band_single(series: &[ReconstructedState]) -> Result<Vec<C64>> {
    series
        .iter()
        .map(|s| {
            let (x, y, z) = projector_observables(&s.amplitudes);
            if z.abs() < 1e-9 {
                return Err(BraidTraceError::ProjectionDegenerate { k: s.k, band: s.band });
            }
            Ok(C64::new(x, y) / z)
        })
        .collect()
}

pub fn lambda_4band(series: &[Vec<ReconstructedState>]) -> Result<TrajectorySeries> {
    let refs: Vec<&[ReconstructedState]> = series.iter().map(|s| s.as_slice()).collect();
    let k = check_grid(&refs)?;
    let lambda = series.iter().map(|s| lambda_4band_single(s)).collect::<Result<Vec<_>>>()?;
    TrajectorySeries::new(k, lambda)
}

/// Unwrapped winding of `Λ_i − Λ_j` along the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrace {
    pub i: usize,
    pub j: usize,
    /// `arg(Λ_i − Λ_j)` at the first grid point.
    pub chi0: f64,
    /// Cumulative winding, starting at 0; shifted values after [`phase_shift`].
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingTrace {
    pub k_grid: Vec<f64>,
    pub n_bands: usize,
    pub pairs: Vec<PairTrace>,
    /// Projection angle the values are referenced to; `None` for raw windings.
    pub reference: Option<f64>,
}

impl WindingTrace {
    pub fn pair(&self, i: usize, j: usize) -> Option<&PairTrace> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().find(|p| p.i == a && p.j == b)
    }

    /// `W_ij(2π)` as a symmetric matrix with zero diagonal.
    pub fn end_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_bands]; self.n_bands];
        for p in &self.pairs {
            let v = p.values.last().copied().unwrap_or(0.0);
            m[p.i][p.j] = v;
            m[p.j][p.i] = v;
        }
        m
    }

    /// Tab-separated table: `k` then one column per pair.
    pub fn to_table(&self) -> String {
        let mut out = String::from("k");
        for p in &self.pairs {
            out.push_str(&format!("\tW{}{}", p.i + 1, p.j + 1));
        }
        out.push('\n');
        for (m, k) in self.k_grid.iter().enumerate() {
            out.push_str(&format!("{k:?}"));
            for p in &self.pairs {
                out.push_str(&format!("\t{:?}", p.values[m]));
            }
            out.push('\n');
        }
        out
    }
}

/// Maximum phase increment per grid step.
pub const STEP_GUARD: f64 = PI / 2.0;

pub fn winding_trace(traj: &TrajectorySeries) -> Result<WindingTrace> {
    let n = traj.n_bands();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let traces = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d: Vec<C64> = traj.lambda[i].iter().zip(&traj.lambda[j]).map(|(a, b)| a - b).collect();
            let mut values = Vec::with_capacity(d.len());
            let mut acc = 0.0;
            values.push(0.0);
            for m in 1..d.len() {
                let step = (d[m] / d[m - 1]).arg();
                if step.abs() >= STEP_GUARD {
                    return Err(BraidTraceError::StepTooLarge { i, j, k: traj.k_grid[m], step });
                }
                acc += step;
                values.push(acc / (2.0 * PI));
            }
            Ok(PairTrace { i, j, chi0: d[0].arg(), values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WindingTrace { k_grid: traj.k_grid.clone(), n_bands: n, pairs: traces, reference: None })
}

/// Projection plane used to read crossings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reference {
    /// `χ = χ_ij(0)` of the given pair.
    Pair(usize, usize),
    /// A fixed angle.
    Angle(f64),
}

impl Reference {
    /// Own first-pair phase for two bands, `π/2` otherwise.
    pub fn default_for(n_bands: usize) -> Self {
        if n_bands == 2 {
            Reference::Pair(0, 1)
        } else {
            Reference::Angle(PI / 2.0)
        }
    }
}

/// `W̃_ij = W_ij + (χ_ij(0) − χ)/2π`.
pub fn phase_shift(trace: &WindingTrace, reference: Reference) -> Result<WindingTrace> {
    let chi = match reference {
        Reference::Angle(a) => a,
        Reference::Pair(i, j) => {
            let p = trace.pair(i, j).ok_or(BraidTraceError::GridMismatch)?;
            if i < j {
                p.chi0
            } else {
                p.chi0 + PI
            }
        }
    };
    let raw = trace.reference.unwrap_or(0.0);
    let pairs = trace
        .pairs
        .iter()
        .map(|p| {
            // Undo any previous shift before applying the new one.
            let undo = if trace.reference.is_some() { (p.chi0 - raw) / (2.0 * PI) } else { 0.0 };
            let offset = (p.chi0 - chi) / (2.0 * PI) - undo;
            PairTrace { values: p.values.iter().map(|w| w + offset).collect(), ..p.clone() }
        })
        .collect();
    Ok(WindingTrace { pairs, reference: Some(chi), ..trace.clone() })
}

/// `mapping[j]` is the k=0 band whose state the band `j` reaches at 2π.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationMatrix {
    pub mapping: Vec<usize>,
}

impl PermutationMatrix {
    pub fn identity(n: usize) -> Self {
        Self { mapping: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.mapping.len()
    }

    /// Smallest `a ≥ 1` with `P^a = I`.
    pub fn order(&self) -> usize {
        let mut cur: Vec<usize> = self.mapping.clone();
        let mut a = 1;
        while cur.iter().enumerate().any(|(i, &v)| i != v) {
            cur = cur.iter().map(|&v| self.mapping[v]).collect();
            a += 1;
        }
        a
    }

    /// Matrix entries with `P[mapping[j]][j] = 1`.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for (j, &s) in self.mapping.iter().enumerate() {
            m[s][j] = 1.0;
        }
        m
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.n()];
        for (j, &s) in self.mapping.iter().enumerate() {
            inv[s] = j;
        }
        Self { mapping: inv }
    }

    /// Parity: `true` for odd permutations.
    pub fn is_odd(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut transpositions = 0;
        for s in 0..n {
            let mut len = 0;
            let mut p = s;
            while !seen[p] {
                seen[p] = true;
                p = self.mapping[p];
                len += 1;
            }
            if len > 0 {
                transpositions += len - 1;
            }
        }
        transpositions % 2 == 1
    }
}

fn permutation_from_overlaps(start: &[Vec<C64>], end: &[Vec<C64>]) -> Result<PermutationMatrix> {
    if start.len() != end.len() {
        return Err(BraidTraceError::GridMismatch);
    }
    let mapping: Vec<usize> = end
        .iter()
        .map(|e| {
            let mut best = (0, f64::NEG_INFINITY);
            for (s, v) in start.iter().enumerate() {
                let o = inner(v, e).norm() / (crate::numerics::norm(v) * crate::numerics::norm(e));
                if o > best.1 {
                    best = (s, o);
                }
            }
            best.0
        })
        .collect();
    let mut seen = vec![false; mapping.len()];
    for &m in &mapping {
        if seen[m] {
            return Err(BraidTraceError::NotAPermutation(mapping));
        }
        seen[m] = true;
    }
    Ok(PermutationMatrix { mapping })
}

/// `P[j] = argmax_s |⟨ψ_s(0)|ψ_j(2π)⟩|`.
pub fn permutation_matrix(
    at_zero: &[ReconstructedState],
    at_two_pi: &[ReconstructedState],
) -> Result<PermutationMatrix> {
    let a: Vec<Vec<C64>> = at_zero.iter().map(|s| s.amplitudes.clone()).collect();
    let b: Vec<Vec<C64>> = at_two_pi.iter().map(|s| s.amplitudes.clone()).collect();
    permutation_from_overlaps(&a, &b)
}

pub fn permutation_from_bands(bands: &[EigenDecomposition]) -> Result<PermutationMatrix> {
    let (first, last) = (bands.first().ok_or(BraidTraceError::GridMismatch)?, bands.last().unwrap());
    permutation_from_overlaps(&first.right, &last.right)
}

/// Label-independent winding matrix, quantised to multiples of `1/(2n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingMatrix {
    pub entries: Vec<Vec<f64>>,
    /// Period count `n` of the permutation.
    pub order: usize,
    /// Largest deviation of the averaged matrix from its rounded value.
    pub max_deviation: f64,
}

impl WindingMatrix {
    /// Sorted upper-triangle entries.
    pub fn sorted_entries(&self) -> Vec<f64> {
        let n = self.entries.len();
        let mut v: Vec<f64> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.entries[i][j]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

/// Deviation allowed before rounding, in exact mode.
pub const EXACT_WINDING_TOLERANCE: f64 = 0.005;
/// Deviation allowed before rounding, with shot noise.
pub const SAMPLED_WINDING_TOLERANCE: f64 = 0.05;

/// `𝒲 = (1/n) Σ_a (Pᵀ)^a W̄ P^a` with `W̄ = W(2π)`, rounded to `1/(2n)`.
pub fn winding_matrix(one_period: &WindingTrace, p: &PermutationMatrix, tolerance: f64) -> Result<WindingMatrix> {
    let wbar = one_period.end_matrix();
    let n = wbar.len();
    let order = p.order();
    let mut acc = vec![vec![0.0; n]; n];
    // (Pᵀ)^a W̄ P^a has entries W̄[σ_a(r)][σ_a(c)] with σ_a the a-fold mapping.
    let mut sigma: Vec<usize> = (0..n).collect();
    for _ in 0..order {
        for r in 0..n {
            for c in 0..n {
                acc[r][c] += wbar[sigma[r]][sigma[c]];
            }
        }
        sigma = sigma.iter().map(|&s| p.mapping[s]).collect();
    }
    let quantum = 1.0 / (2 * order) as f64;
    let mut max_deviation: f64 = 0.0;
    let mut entries = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            let v = acc[r][c] / order as f64;
            let q = (v / quantum).round() * quantum;
            let dev = (v - q).abs();
            if r != c && dev > tolerance {
                return Err(BraidTraceError::WindingDeviation {
                    i: r,
                    j: c,
                    value: v,
                    deviation: dev,
                    denominator: 2 * order,
                });
            }
            max_deviation = max_deviation.max(dev);
            entries[r][c] = if r == c { 0.0 } else { q + 0.0 };
        }
    }
    Ok(WindingMatrix { entries, order, max_deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub k: f64,
    pub i: usize,
    pub j: usize,
    pub r: i64,
}

impl Crossing {
    pub fn level(&self) -> f64 {
        0.25 + self.r as f64 / 2.0
    }
}

/// Crossings in processing order together with the strand ordering they
/// act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSet {
    pub events: Vec<Crossing>,
    /// `initial_order[p]` is the band label at position `p` (0 = largest
    /// projection coordinate) where the braid starts.
    pub initial_order: Vec<usize>,
    /// Points where a trace touches a crossing level without passing it.
    pub tangential: Vec<Crossing>,
    pub n_bands: usize,
    pub grid_step: f64,
}

/// Distance to a level below which a grid value counts as on it.
pub const LEVEL_TOLERANCE: f64 = 1e-6;

fn nearest_level(w: f64) -> (i64, f64) {
    let r = (2.0 * (w - 0.25)).round() as i64;
    (r, w - 0.25 - r as f64 / 2.0)
}

fn levels_between(a: f64, b: f64) -> impl Iterator<Item = i64> {
    let lo = (2.0 * (a.min(b) - 0.25)).floor() as i64 - 1;
    let hi = (2.0 * (a.max(b) - 0.25)).ceil() as i64 + 1;
    lo..=hi
}

/// Finds level crossings of every shifted pair trace and resolves the ones
/// that fall at the period seam. A crossing within two grid steps after
/// `k = 0` is the same event as one just after `2π` in the next period; it
/// is moved there (relabelled through `P`) unless the end of the period
/// already records it.
pub fn detect_crossings(traj: &TrajectorySeries, shifted: &WindingTrace, p: &PermutationMatrix) -> Result<CrossingSet> {
    let chi = shifted.reference.ok_or(BraidTraceError::GridMismatch)?;
    let k = &shifted.k_grid;
    let last = k.len() - 1;
    let span = k[last] - k[0];
    let h = span / last as f64;
    let mut events = Vec::new();
    let mut tangential = Vec::new();
    for pt in &shifted.pairs {
        let w = &pt.values;
        for &m in &[0, last] {
            let (r, dev) = nearest_level(w[m]);
            if dev.abs() < LEVEL_TOLERANCE {
                events.push(Crossing { k: k[m], i: pt.i, j: pt.j, r });
            }
        }
        for m in 1..last {
            let (r, dev) = nearest_level(w[m]);
            if dev.abs() < LEVEL_TOLERANCE {
                let lev = 0.25 + r as f64 / 2.0;
                let c = Crossing { k: k[m], i: pt.i, j: pt.j, r };
                if (w[m - 1] - lev) * (w[m + 1] - lev) < 0.0 {
                    events.push(c);
                } else {
                    tangential.push(c);
                }
            }
        }
        for m in 0..last {
            let (a, b) = (w[m], w[m + 1]);
            for r in levels_between(a, b) {
                let lev = 0.25 + r as f64 / 2.0;
                if (a - lev) * (b - lev) < 0.0
                    && (a - lev).abs() >= LEVEL_TOLERANCE
                    && (b - lev).abs() >= LEVEL_TOLERANCE
                {
                    let kc = k[m] + (lev - a) / (b - a) * (k[m + 1] - k[m]);
                    events.push(Crossing { k: kc, i: pt.i, j: pt.j, r });
                }
            }
        }
    }
    let window = 2.0 * h;
    let (start, rest): (Vec<Crossing>, Vec<Crossing>) = events.into_iter().partition(|c| c.k - k[0] < window);
    let end_pairs: Vec<(usize, usize)> = rest.iter().filter(|c| k[last] - c.k < window).map(|c| (c.i, c.j)).collect();
    let inv = p.inverse();
    let mut all = rest;
    for c in &start {
        let (a, b) = (inv.mapping[c.i], inv.mapping[c.j]);
        let (a, b) = (a.min(b), a.max(b));
        if end_pairs.contains(&(a, b)) {
            continue;
        }
        let here = shifted.pair(c.i, c.j).ok_or(BraidTraceError::GridMismatch)?;
        let there = shifted.pair(a, b).ok_or(BraidTraceError::GridMismatch)?;
        let level = there.values[last] + (c.level() - here.values[0]);
        let (r, _) = nearest_level(level);
        all.push(Crossing { k: c.k + span, i: a, j: b, r });
    }
    all.sort_by(|x, y| x.k.total_cmp(&y.k));
    // The braid starts on the first grid point past every seam crossing.
    let i_s = match start.iter().map(|c| c.k).reduce(f64::max) {
        Some(latest) => k.iter().position(|&kk| kk > latest).unwrap_or(last),
        None => 0,
    };
    let rot = C64::from_polar(1.0, -chi);
    let mut initial_order: Vec<usize> = (0..traj.n_bands()).collect();
    initial_order.sort_by(|&x, &y| (rot * traj.lambda[y][i_s]).re.total_cmp(&(rot * traj.lambda[x][i_s]).re));
    Ok(CrossingSet { events: all, initial_order, tangential, n_bands: traj.n_bands(), grid_step: h })
}

/// How a crossing's generator sign is read off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignConvention {
    /// `s = (−1)^r · ord`, with `ord = +1` when the first band of the pair
    /// sits at the lower position. Equals the sign of `dW̃/dk`.
    #[default]
    Geometric,
    /// Geometric sign times `(−1)^{δ_{4N}}`: flipped for four bands.
    PaperDelta,
}

/// Crossings closer than this fraction of a grid step cannot be ordered by
/// the grid; commuting generators among them are written lowest index first.
pub const SIMULTANEOUS_FRACTION: f64 = 0.25;

/// Result of reading a braid off a crossing set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraidExtraction {
    pub word: BraidWord,
    /// Band label at each position after the last crossing.
    pub final_order: Vec<usize>,
}

pub fn extract_braid(crossings: &CrossingSet, convention: SignConvention) -> Result<BraidExtraction> {
    let n = crossings.n_bands;
    let mut order = crossings.initial_order.clone();
    let flip = convention == SignConvention::PaperDelta && n == 4;
    let mut emitted: Vec<(f64, Generator)> = Vec::with_capacity(crossings.events.len());
    for c in &crossings.events {
        let pi = order.iter().position(|&b| b == c.i);
        let pj = order.iter().position(|&b| b == c.j);
        let (pi, pj) = match (pi, pj) {
            (Some(a), Some(b)) if a.abs_diff(b) == 1 => (a, b),
            _ => return Err(BraidTraceError::NonAdjacentCrossing { k: c.k, i: c.i, j: c.j }),
        };
        let ord = if pi < pj { 1 } else { -1 };
        let parity = if c.r.rem_euclid(2) == 0 { 1 } else { -1 };
        let s = if flip { -parity * ord } else { parity * ord };
        emitted.push((c.k, Generator::new(pi.min(pj) + 1, s > 0)));
        order.swap(pi, pj);
    }
    let window = SIMULTANEOUS_FRACTION * crossings.grid_step;
    let mut swapped = true;
    while swapped {
        swapped = false;
        for e in 1..emitted.len() {
            let ((ka, ga), (kb, gb)) = (emitted[e - 1], emitted[e]);
            if kb - ka < window && ga.index.abs_diff(gb.index) >= 2 && gb.index < ga.index {
                emitted.swap(e - 1, e);
                swapped = true;
            }
        }
    }
    let word = BraidWord::new(n, emitted.into_iter().map(|(_, g)| g).collect())?;
    Ok(BraidExtraction { word, final_order: order })
}

pub fn extract_braid_word(crossings: &CrossingSet, convention: SignConvention) -> Result<BraidWord> {
    Ok(extract_braid(crossings, convention)?.word)
}

/// Everything read off one set of trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraidAnalysis {
    pub trace: WindingTrace,
    pub shifted: WindingTrace,
    pub permutation: PermutationMatrix,
    pub crossings: CrossingSet,
    pub word: BraidWord,
    pub final_order: Vec<usize>,
}

pub fn analyze_trajectories(
    traj: &TrajectorySeries,
    permutation: PermutationMatrix,
    reference: Reference,
    convention: SignConvention,
) -> Result<BraidAnalysis> {
    let trace = winding_trace(traj)?;
    let shifted = phase_shift(&trace, reference)?;
    let crossings = detect_crossings(traj, &shifted, &permutation)?;
    let ex = extract_braid(&crossings, convention)?;
    Ok(BraidAnalysis { trace, shifted, permutation, crossings, word: ex.word, final_order: ex.final_order })
}

/// Number of points in `[0, 2π)` where `E_+²` meets the negative real axis.
pub fn count_band_swaps_2band(m0: f64, m1: f64) -> Result<usize> {
    if (m1 + 1.0).abs() < 1e-12 {
        return Err(BraidTraceError::SpecialLine);
    }
    let mut count = 0;
    if m1.abs() < 2.0 && m1 > -m0 * m0 - 1.0 {
        count += 2;
    }
    if (m1 + 1.0).powi(2) - m0 * m0 < 0.0 {
        count += 1;
    }
    if 1.0 - m1 * m1 - m0 * m0 < 0.0 {
        count += 1;
    }
    Ok(count)
}

/// Global biorthogonal Berry phase of a two-band spec in units of π, reduced
/// to `{0, 1}`.
pub fn global_biorthogonal_berry_phase(spec: &TwisterSpec, k_grid: &[f64]) -> Result<u8> {
    let raw = berry_phase_sum(spec, k_grid)?;
    Ok((raw.round() as i64).rem_euclid(2) as u8)
}

/// Unreduced Wilson-loop sum `(1/π) Σ_n Σ_i Im ln(⟨L_n(k_{i+1})|R_n(k_i)⟩ / ⟨L_n(k_i)|R_n(k_i)⟩)`,
/// closed through the end-of-period permutation.
pub fn berry_phase_sum(spec: &TwisterSpec, k_grid: &[f64]) -> Result<f64> {
    let mut bands: Vec<EigenDecomposition> = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let h = build_hamiltonian(spec, k)?;
        let dec = match bands.last() {
            Some(prev) => {
                let d = eig_tracked(&h, prev)?;
                for (a, b) in prev.right.iter().zip(&d.right) {
                    let o = inner(a, b).norm();
                    if o < 0.5 {
                        return Err(BraidTraceError::SortingFailure { k, overlap: o });
                    }
                }
                d
            }
            None => eig(&h)?,
        };
        bands.push(dec);
    }
    let p = permutation_from_bands(&bands)?;
    let left = |m: usize| bands[m].left.as_ref().ok_or(BraidTraceError::MissingLeftVectors(k_grid[m]));
    let dot = |l: &[C64], r: &[C64]| l.iter().zip(r).map(|(a, b)| a * b).sum::<C64>();
    let last = bands.len() - 1;
    let mut total = 0.0;
    for n in 0..bands[0].len() {
        for m in 0..last {
            let num = dot(&left(m + 1)?[n], &bands[m].right[n]);
            let den = dot(&left(m)?[n], &bands[m].right[n]);
            total += (num / den).arg();
        }
        let num = dot(&left(0)?[p.mapping[n]], &bands[last].right[n]);
        let den = dot(&left(last)?[n], &bands[last].right[n]);
        total += (num / den).arg();
    }
    Ok(total / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{k_grid, tracked_bands};
    use crate::twister::{analytic_spectrum_2band, ANCHORS_4BAND};
    use crate::KnotClass;
    use proptest::prelude::*;

    fn spectral(spec: &TwisterSpec, points: usize) -> (TrajectorySeries, PermutationMatrix, Vec<EigenDecomposition>) {
        let grid = k_grid(points);
        let bands = tracked_bands(spec, &grid).unwrap();
        let p = permutation_from_bands(&bands).unwrap();
        let lambda: Vec<Vec<C64>> = if spec.n_bands == 4 {
            (0..4).map(|b| bands.iter().map(|d| d.right[b][2] / d.right[b][3]).collect()).collect()
        } else {
            (0..2).map(|b| bands.iter().map(|d| d.eigenvalues[b]).collect()).collect()
        };
        (TrajectorySeries::new(grid, lambda).unwrap(), p, bands)
    }

    fn word_at(spec: &TwisterSpec, convention: SignConvention) -> BraidWord {
        let (traj, p, _) = spectral(spec, 100);
        analyze_trajectories(&traj, p, Reference::default_for(spec.n_bands), convention).unwrap().word
    }

    #[test]
    fn unit_circle_winds_once() {
        let grid = k_grid(100);
        let l1 = grid.iter().map(|&k| C64::from_polar(1.0, k)).collect();
        let l2 = vec![C64::new(0.0, 0.0); 100];
        let tr = winding_trace(&TrajectorySeries::new(grid, vec![l1, l2]).unwrap()).unwrap();
        assert!((tr.pairs[0].values[99] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_trajectories_do_not_wind() {
        let grid = k_grid(10);
        let tr = winding_trace(
            &TrajectorySeries::new(grid, vec![vec![C64::new(1.0, 0.0); 10], vec![C64::new(-1.0, 2.0); 10]]).unwrap(),
        )
        .unwrap();
        assert!(tr.pairs[0].values.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = k_grid(6);
        let l1 = grid.iter().map(|&k| C64::from_polar(1.0, 3.0 * k)).collect();
        let traj = TrajectorySeries::new(grid, vec![l1, vec![C64::new(0.0, 0.0); 6]]).unwrap();
        assert!(matches!(winding_trace(&traj), Err(BraidTraceError::StepTooLarge { .. })));
    }

    #[test]
    fn own_reference_is_identity_and_period_shift_keeps_crossings() {
        let (traj, p, _) = spectral(&TwisterSpec::four_band(-0.5, -0.4), 100);
        let tr = winding_trace(&traj).unwrap();
        let own = phase_shift(&tr, Reference::Pair(0, 1)).unwrap();
        assert_eq!(own.pair(0, 1).unwrap().values, tr.pair(0, 1).unwrap().values);
        let a = detect_crossings(&traj, &phase_shift(&tr, Reference::Angle(PI / 2.0)).unwrap(), &p).unwrap();
        let b = detect_crossings(&traj, &phase_shift(&tr, Reference::Angle(PI / 2.0 + 2.0 * PI)).unwrap(), &p).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        let key = |c: &Crossing| (c.i, c.j, (c.k * 1e6).round() as i64);
        let (mut ea, mut eb) = (a.events.clone(), b.events.clone());
        ea.sort_by_key(key);
        eb.sort_by_key(key);
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x.k - y.k).abs() < 1e-9 && (x.i, x.j) == (y.i, y.j));
        }
    }

    #[test]
    fn published_words_from_spectral_route() {
        let cases = [
            (TwisterSpec::two_band(0.5338, 0.6), "s1 s1"),
            (TwisterSpec::two_band(1.8889, 0.6), ""),
            (TwisterSpec::four_band(-0.5, -0.4), "s1 s3 s2 s1 s3 s2"),
            (TwisterSpec::four_band(2.0, 1.1), "s1 s3 s1 s3 s2"),
        ];
        for (spec, want) in cases {
            assert_eq!(word_at(&spec, SignConvention::Geometric).to_string(), want);
        }
        let unknot = word_at(&TwisterSpec::two_band(1.273, 0.6), SignConvention::Geometric);
        assert_eq!(unknot.to_string(), "s1 s1^-1 s1");
        assert_eq!(unknot.free_reduce().to_string(), "s1");
    }

    #[test]
    fn crossing_counts() {
        let count = |spec: TwisterSpec| {
            let (traj, p, _) = spectral(&spec, 100);
            analyze_trajectories(&traj, p, Reference::default_for(spec.n_bands), SignConvention::Geometric)
                .unwrap()
                .crossings
                .events
                .len()
        };
        assert_eq!(count(TwisterSpec::two_band(0.5338, 0.6)), 2);
        assert_eq!(count(TwisterSpec::two_band(1.273, 0.6)), 3);
        assert_eq!(count(TwisterSpec::four_band(-0.5, -0.4)), 6);
        assert_eq!(count(TwisterSpec::four_band(2.0, 1.1)), 5);
    }

    #[test]
    fn hopf_crossing_levels() {
        let (traj, p, _) = spectral(&TwisterSpec::two_band(0.5338, 0.6), 100);
        let a = analyze_trajectories(&traj, p, Reference::Pair(0, 1), SignConvention::Geometric).unwrap();
        let levels: Vec<f64> = a.crossings.events.iter().map(|c| c.level()).collect();
        assert_eq!(levels, vec![0.25, 0.75]);
        assert!((a.trace.pairs[0].values[99] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn paper_delta_on_conjugated_trajectories_reproduces_published_words() {
        for (spec, want) in [
            (TwisterSpec::four_band(-0.5, -0.4), "s1 s3 s2 s1 s3 s2"),
            (TwisterSpec::four_band(2.0, 1.1), "s1 s3 s1 s3 s2"),
        ] {
            let (traj, p, _) = spectral(&spec, 100);
            let conj = traj.conjugate();
            let a =
                analyze_trajectories(&conj, p.clone(), Reference::Angle(PI / 2.0), SignConvention::PaperDelta).unwrap();
            assert_eq!(a.word.to_string(), want);
            assert!(a.crossings.events.iter().all(|c| c.level() < 0.0));
            let mirror = analyze_trajectories(&conj, p, Reference::Angle(PI / 2.0), SignConvention::Geometric).unwrap();
            assert_eq!(mirror.word, a.word.mirror());
        }
    }

    #[test]
    fn permutations_at_published_points() {
        let p = |spec: TwisterSpec| spectral(&spec, 100).1.mapping;
        assert_eq!(p(TwisterSpec::two_band(1.8889, 0.6)), vec![0, 1]);
        assert_eq!(p(TwisterSpec::two_band(1.273, 0.6)), vec![1, 0]);
        assert_eq!(p(TwisterSpec::four_band(-0.5, -0.4)), vec![3, 2, 1, 0]);
    }

    #[test]
    fn braid_permutation_and_crossing_parity_match_p() {
        for spec in [
            TwisterSpec::two_band(0.5338, 0.6),
            TwisterSpec::two_band(1.273, 0.6),
            TwisterSpec::four_band(-0.5, -0.4),
            TwisterSpec::four_band(2.0, 1.1),
            TwisterSpec::four_band(1.5, -3.0),
            TwisterSpec::four_band(1.0, -1.5),
            TwisterSpec::four_band(1.5, -1.8),
        ] {
            let (traj, p, _) = spectral(&spec, 100);
            let a =
                analyze_trajectories(&traj, p.clone(), Reference::default_for(spec.n_bands), SignConvention::Geometric)
                    .unwrap();
            assert_eq!(a.crossings.events.len() % 2 == 1, p.is_odd());
            let start = &a.crossings.initial_order;
            let perm = a.word.permutation();
            for (pos, &from) in perm.iter().enumerate() {
                assert_eq!(start[from], a.final_order[pos], "{spec:?}");
                assert_eq!(start[pos], p.mapping[a.final_order[pos]], "{spec:?}");
            }
        }
    }

    #[test]
    fn table_s1_winding_matrices() {
        for (m0, m1, class) in ANCHORS_4BAND {
            let spec = TwisterSpec::four_band(m0, m1);
            let grid = k_grid(100);
            let bands = tracked_bands(&spec, &grid).unwrap();
            let p = permutation_from_bands(&bands).unwrap();
            let traj = TrajectorySeries::from_spectrum(grid, &bands).unwrap();
            let w = winding_matrix(&winding_trace(&traj).unwrap(), &p, EXACT_WINDING_TOLERANCE).unwrap();
            assert_eq!(w.sorted_entries(), crate::knots::reference_winding_entries(class), "{class}");
        }
        let _ = KnotClass::ALL;
    }

    #[test]
    fn lambda_two_band_is_proportional_to_energy() {
        let spec = TwisterSpec::two_band(0.5338, 0.6);
        let grid = k_grid(100);
        let bands = tracked_bands(&spec, &grid).unwrap();
        let states = |b: usize| -> Vec<ReconstructedState> {
            bands
                .iter()
                .zip(&grid)
                .map(|(d, &k)| ReconstructedState {
                    k,
                    band: b,
                    amplitudes: crate::reconstruct::gauge(&d.right[b]),
                    flags: Default::default(),
                })
                .collect()
        };
        let traj = lambda_2band(&states(0), &states(1)).unwrap();
        let factor = C64::new(0.0, -0.5338) / (1.6f64 * 1.6);
        for (m, &k) in grid.iter().enumerate() {
            let want = factor * bands[m].eigenvalues[0];
            assert!((traj.lambda[0][m] - want).norm() < 1e-9 * want.norm().max(1.0), "k {k}");
            let an = analytic_spectrum_2band(0.5338, 0.6, k);
            assert!(an.iter().any(|e| (e - bands[m].eigenvalues[0]).norm() < 1e-9));
        }
    }

    #[test]
    fn lambda_four_band_differences_follow_energy() {
        let spec = TwisterSpec::four_band(-0.5, -0.4);
        let grid = k_grid(50);
        let bands = tracked_bands(&spec, &grid).unwrap();
        let series: Vec<Vec<ReconstructedState>> = (0..4)
            .map(|b| {
                bands
                    .iter()
                    .zip(&grid)
                    .map(|(d, &k)| ReconstructedState {
                        k,
                        band: b,
                        amplitudes: crate::reconstruct::gauge(&d.right[b]),
                        flags: Default::default(),
                    })
                    .collect()
            })
            .collect();
        let traj = lambda_4band(&series).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                let ref_phase = ((traj.lambda[i][0] - traj.lambda[j][0])
                    / (bands[0].eigenvalues[i] - bands[0].eigenvalues[j]))
                    .arg();
                for m in 0..grid.len() {
                    let ph = ((traj.lambda[i][m] - traj.lambda[j][m])
                        / (bands[m].eigenvalues[i] - bands[m].eigenvalues[j]))
                        .arg();
                    let d = (ph - ref_phase + PI).rem_euclid(2.0 * PI) - PI;
                    assert!(d.abs() < 1e-3);
                }
            }
        }
        let (x, y, z) =
            projector_observables(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!((x, y, z), (0.0, 0.0, 4.0));
    }

    #[test]
    fn band_swap_counts() {
        assert_eq!(count_band_swaps_2band(0.5338, 0.6).unwrap(), 2);
        assert_eq!(count_band_swaps_2band(1.273, 0.6).unwrap() % 2, 1);
        assert!(count_band_swaps_2band(1.0, -1.0).is_err());
    }

    #[test]
    fn band_swap_count_matches_dense_scan() {
        for (m0, m1) in [(0.5338, 0.6), (1.273, 0.6), (1.8889, 0.6), (0.3, -2.5), (2.5, 1.5), (0.2, 0.1)] {
            let n = 20000;
            let mut hits = 0;
            let e2 = |k: f64| {
                let e = analytic_spectrum_2band(m0, m1, k)[0];
                e * e
            };
            for s in 0..n {
                let (k0, k1) = (2.0 * PI * s as f64 / n as f64, 2.0 * PI * (s + 1) as f64 / n as f64);
                let (a, b) = (e2(k0), e2(k1));
                if a.im.signum() != b.im.signum() && (a.re + b.re) < 0.0 || (a.im == 0.0 && a.re < 0.0) {
                    hits += 1;
                }
            }
            assert_eq!(hits, count_band_swaps_2band(m0, m1).unwrap(), "({m0},{m1})");
        }
    }

    #[test]
    fn berry_phase_at_two_band_anchors() {
        let grid = k_grid(200);
        assert_eq!(global_biorthogonal_berry_phase(&TwisterSpec::two_band(1.8889, 0.6), &grid).unwrap(), 0);
        assert_eq!(global_biorthogonal_berry_phase(&TwisterSpec::two_band(1.273, 0.6), &grid).unwrap(), 1);
        assert_eq!(global_biorthogonal_berry_phase(&TwisterSpec::two_band(0.5338, 0.6), &grid).unwrap(), 0);
    }

    #[test]
    fn permutation_matrix_helpers() {
        let p = PermutationMatrix { mapping: vec![2, 0, 3, 1] };
        assert_eq!(p.order(), 4);
        assert!(p.is_odd());
        assert_eq!(PermutationMatrix { mapping: vec![3, 2, 1, 0] }.order(), 2);
        let m = p.matrix();
        assert_eq!(m[2][0], 1.0);
        assert_eq!(p.inverse().inverse(), p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn winding_matrix_is_relabeling_invariant(shuffle in Just(()).prop_perturb(|_, mut rng| {
            let mut v: Vec<usize> = (0..4).collect();
            for i in (1..4).rev() { v.swap(i, (rng.next_u32() as usize) % (i + 1)); }
            v
        }), anchor in 0usize..8) {
            let (m0, m1, _) = ANCHORS_4BAND[anchor];
            let spec = TwisterSpec::four_band(m0, m1);
            let grid = k_grid(100);
            let bands = tracked_bands(&spec, &grid).unwrap();
            let p = permutation_from_bands(&bands).unwrap();
            let traj = TrajectorySeries::from_spectrum(grid.clone(), &bands).unwrap();
            let w = winding_matrix(&winding_trace(&traj).unwrap(), &p, EXACT_WINDING_TOLERANCE).unwrap();
            // Relabel band q as shuffle[q].
            let mut lambda = vec![Vec::new(); 4];
            for q in 0..4 { lambda[shuffle[q]] = traj.lambda[q].clone(); }
            let mut mapping = vec![0; 4];
            for j in 0..4 { mapping[shuffle[j]] = shuffle[p.mapping[j]]; }
            let t2 = TrajectorySeries::new(grid, lambda).unwrap();
            let w2 = winding_matrix(&winding_trace(&t2).unwrap(), &PermutationMatrix { mapping }, EXACT_WINDING_TOLERANCE).unwrap();
            for a in 0..4 { for b in 0..4 {
                prop_assert!((w.entries[a][b] - w2.entries[shuffle[a]][shuffle[b]]).abs() < 1e-12);
            }}
        }

        #[test]
        fn refined_grid_agrees(anchor in 0usize..8) {
            let (m0, m1, _) = ANCHORS_4BAND[anchor];
            let spec = TwisterSpec::four_band(m0, m1);
            let from = |n: usize| {
                let grid = k_grid(n);
                let bands = tracked_bands(&spec, &grid).unwrap();
                TrajectorySeries::from_spectrum(grid, &bands).unwrap()
            };
            let (coarse, fine) = (from(101), from(201));
            let (a, b) = (winding_trace(&coarse).unwrap(), winding_trace(&fine).unwrap());
            for (x, y) in a.pairs.iter().zip(&b.pairs) {
                prop_assert!((x.values[100] - y.values[200]).abs() < 1e-6);
            }
        }
    }
}
