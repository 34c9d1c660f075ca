//! Twister Hamiltonians `H(k) = c·Σ + Σ_v m_v T_v(k)`, their spectra and
//! the classification of parameter space into link types.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::KnotClass;
use crate::numerics::{ComplexMatrix, C64, I, ONE, ZERO};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwisterError {
    #[error("invalid dimension {0}: at least two bands are required")]
    InvalidDimension(usize),
    #[error("invalid harmonic order {0}: harmonics start at v = 1")]
    InvalidHarmonic(usize),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("({m0}, {m1}) lies within tolerance of phase boundary {boundary}")]
    OnBoundary { m0: f64, m1: f64, boundary: &'static str },
    #[error("({m0}, {m1}) is the degenerate point where all boundaries meet")]
    DegeneratePoint { m0: f64, m1: f64 },
    #[error("no published region anchor shares the region of ({m0}, {m1})")]
    NoAnchor { m0: f64, m1: f64 },
}

pub type Result<T> = std::result::Result<T, TwisterError>;

/// `n_bands`-band twister model with `Σ` coefficient `m0` and harmonic
/// coefficients `m_1 … m_V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwisterSpec {
    pub n_bands: usize,
    pub m0: C64,
    pub harmonics: Vec<C64>,
}

impl TwisterSpec {
    pub fn new(n_bands: usize, m0: C64, harmonics: Vec<C64>) -> Result<Self> {
        let spec = Self { n_bands, m0, harmonics };
        spec.validate()?;
        Ok(spec)
    }

    /// The two-band model `i m0 σ^z + m1 T_1 + T_2`.
    pub fn two_band(m0: f64, m1: f64) -> Self {
        Self::concrete(2, m0, m1)
    }

    /// The four-band model `i m0 Σ^(4) + m1 T_1 + T_2`.
    pub fn four_band(m0: f64, m1: f64) -> Self {
        Self::concrete(4, m0, m1)
    }

    fn concrete(n: usize, m0: f64, m1: f64) -> Self {
        Self { n_bands: n, m0: C64::new(0.0, m0), harmonics: vec![C64::new(m1, 0.0), ONE] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bands < 2 {
            return Err(TwisterError::InvalidDimension(self.n_bands));
        }
        if self.harmonics.is_empty() {
            return Err(TwisterError::InvalidSpec("harmonics must be non-empty".into()));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !finite(&self.m0) || !self.harmonics.iter().all(finite) {
            return Err(TwisterError::InvalidSpec("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// `(m0, m1)` when this is one of the two concrete models.
    pub fn concrete_params(&self) -> Option<(f64, f64)> {
        let is_concrete = matches!(self.n_bands, 2 | 4)
            && self.m0.re == 0.0
            && self.harmonics.len() == 2
            && self.harmonics[0].im == 0.0
            && self.harmonics[1] == ONE;
        is_concrete.then(|| (self.m0.im, self.harmonics[0].re))
    }
}

/// `Σ = diag(1 − 2p/(N−1))`, `p = 0 … N−1`.
pub fn shift_matrix(n: usize) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(TwisterError::InvalidDimension(n));
    }
    let d: Vec<C64> = (0..n).map(|p| C64::new(1.0 - 2.0 * p as f64 / (n - 1) as f64, 0.0)).collect();
    Ok(ComplexMatrix::diag(&d))
}

/// Ones on the subdiagonal and `e^{ivk}` in the top-right corner.
pub fn twister_matrix(n: usize, v: usize, k: f64) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(TwisterError::InvalidDimension(n));
    }
    if v == 0 {
        return Err(TwisterError::InvalidHarmonic(v));
    }
    let mut m = ComplexMatrix::zeros(n);
    for p in 1..n {
        m[(p, p - 1)] = ONE;
    }
    m[(0, n - 1)] = (I * (v as f64 * k)).exp();
    Ok(m)
}

pub fn build_hamiltonian(spec: &TwisterSpec, k: f64) -> Result<ComplexMatrix> {
    spec.validate()?;
    let n = spec.n_bands;
    let mut h = shift_matrix(n)?.scale(spec.m0);
    for (idx, m) in spec.harmonics.iter().enumerate() {
        if *m != ZERO {
            h = &h + &twister_matrix(n, idx + 1, k)?.scale(*m);
        }
    }
    Ok(h)
}

/// `E_± = ±√((m1+1)e^{2ik} + m1(m1+1)e^{ik} − m0²)`, principal branch.
pub fn analytic_spectrum_2band(m0: f64, m1: f64, k: f64) -> [C64; 2] {
    let z = (I * k).exp();
    let e2 = (m1 + 1.0) * z * z + m1 * (m1 + 1.0) * z - m0 * m0;
    let e = e2.sqrt();
    [e, -e]
}

/// `E_{a,b} = (a/3)√(−5m0² + b·S)` with
/// `S = √(16m0⁴ + 81 e^{ik}(m1+1)³(m1 + e^{ik}))`, ordered
/// `(a,b) = (+,+), (+,−), (−,+), (−,−)`.
pub fn analytic_spectrum_4band(m0: f64, m1: f64, k: f64) -> [C64; 4] {
    let z = (I * k).exp();
    let s = (16.0 * m0.powi(4) + 81.0 * z * (m1 + 1.0).powi(3) * (m1 + z)).sqrt();
    let base = C64::new(-5.0 * m0 * m0, 0.0);
    let plus = (base + s).sqrt() / 3.0;
    let minus = (base - s).sqrt() / 3.0;
    [plus, minus, -plus, -minus]
}

/// `E_j = e^{i(vk + 2πj)/n}`.
pub fn pure_twister_eigenvalues(n: usize, v: usize, k: f64) -> Vec<C64> {
    (0..n).map(|j| (I * ((v as f64 * k + 2.0 * PI * j as f64) / n as f64)).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusLinkType {
    /// Number of disjoint components `d = gcd(v, n)`.
    pub components: usize,
    /// Each component is a `(v/d, n/d)` torus knot.
    pub component_type: (usize, usize),
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn torus_link_components(v: usize, n: usize) -> TorusLinkType {
    let d = gcd(v, n).max(1);
    TorusLinkType { components: d, component_type: (v / d, n / d) }
}

/// Point of strand `j` on the standard torus of radii (2, 1).
pub fn torus_embedding(n: usize, v: usize, j: usize, k: f64) -> [f64; 3] {
    let theta = (v as f64 * k + 2.0 * PI * j as f64) / n as f64;
    let r = 2.0 + theta.cos();
    [r * k.cos(), r * k.sin(), -theta.sin()]
}

pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRegion {
    pub label: KnotClass,
    /// Boundary function values; `None` where a clipped function does not apply.
    pub boundary_values: Vec<Option<f64>>,
}

pub const BOUNDARY_NAMES_2BAND: [&str; 3] = ["F1", "F2", "F3"];
pub const BOUNDARY_NAMES_4BAND: [&str; 6] = ["F1", "F2", "F3", "G1", "G2", "G3"];

/// `F1 = (m1+1)² − m0²`, `F2 = m1² − 1 + m0²`, `F3 = 1 + m0² + m1` (|m1| ≤ 2).
pub fn boundary_values_2band(m0: f64, m1: f64) -> Vec<Option<f64>> {
    vec![
        Some((m1 + 1.0).powi(2) - m0 * m0),
        Some(m1 * m1 - 1.0 + m0 * m0),
        (m1.abs() <= 2.0).then_some(1.0 + m0 * m0 + m1),
    ]
}

/// The six four-band boundary functions, with `F3` clipped to |m1| ≤ 2 and
/// `G3` to −2 ≤ m1 ≤ −1.
pub fn boundary_values_4band(m0: f64, m1: f64) -> Vec<Option<f64>> {
    let a = m1 + 1.0;
    let m04 = m0.powi(4);
    vec![
        Some(16.0 * m04 + 81.0 * a.powi(4)),
        Some(16.0 * m04 + 81.0 * a.powi(3) * (1.0 - m1)),
        (m1.abs() <= 2.0).then(|| 16.0 * m04 - 81.0 * a.powi(3)),
        Some(m04 - 9.0 * a.powi(4)),
        Some(m04 - 9.0 * a.powi(3) * (1.0 - m1)),
        ((-2.0..=-1.0).contains(&m1)).then(|| m04 + 9.0 * a.powi(3)),
    ]
}

/// Two patterns describe the same region locally when they agree wherever
/// both are defined; the clipping windows are not boundaries themselves.
fn compatible(a: &[i8], b: &[i8]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x == 0 || *y == 0 || x == y)
}

fn sign_pattern(values: &[Option<f64>]) -> Vec<i8> {
    values
        .iter()
        .map(|v| match v {
            None => 0,
            Some(x) if *x > 0.0 => 1,
            Some(_) => -1,
        })
        .collect()
}

/// Published parameter points of the two-band model and their link types.
pub const ANCHORS_2BAND: [(f64, f64, KnotClass); 3] =
    [(0.5338, 0.6, KnotClass::HopfLink), (1.273, 0.6, KnotClass::Unknot), (1.8889, 0.6, KnotClass::Unlink)];

/// Published parameter points of the four-band model and their link types.
pub const ANCHORS_4BAND: [(f64, f64, KnotClass); 8] = [
    (1.5, 1.0, KnotClass::HopfChain),
    (1.5, 0.5, KnotClass::SolomonKnot),
    (1.5, -0.08, KnotClass::HopfLinkPlusUnlink),
    (1.5, -3.0, KnotClass::Unknot),
    (1.5, -0.18, KnotClass::UnknotPlusUnlink),
    (1.5, -1.0, KnotClass::DoubleUnlinks),
    (1.0, -1.5, KnotClass::HopfLink),
    (1.5, -1.8, KnotClass::Unlink),
];

/// Region raster: every cell of a square grid labelled by its connected
/// component of constant sign pattern, with anchors attached to components.
struct RegionAtlas {
    lo: f64,
    step: f64,
    size: usize,
    component: Vec<u32>,
    component_label: Vec<Option<KnotClass>>,
}

const ATLAS_HALF_WIDTH: f64 = 4.0;
const ATLAS_STEP: f64 = 0.01;

impl RegionAtlas {
    fn build(values: fn(f64, f64) -> Vec<Option<f64>>, anchors: &[(f64, f64, KnotClass)]) -> Self {
        let lo = -ATLAS_HALF_WIDTH;
        let step = ATLAS_STEP;
        let size = (2.0 * ATLAS_HALF_WIDTH / step).round() as usize + 1;
        // Offsetting cell centres by a fraction of a step keeps them off the
        // special lines m0 = 0 and m1 = −1.
        let coord = |i: usize| lo + i as f64 * step + 0.37 * step;
        let patterns: Vec<Vec<i8>> =
            (0..size * size).map(|idx| sign_pattern(&values(coord(idx / size), coord(idx % size)))).collect();
        let mut component = vec![u32::MAX; size * size];
        let mut next = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..size * size {
            if component[start] != u32::MAX {
                continue;
            }
            component[start] = next;
            queue.push_back(start);
            while let Some(cell) = queue.pop_front() {
                let (i, j) = (cell / size, cell % size);
                let neighbours = [
                    (i > 0).then(|| cell - size),
                    (i + 1 < size).then(|| cell + size),
                    (j > 0).then(|| cell - 1),
                    (j + 1 < size).then(|| cell + 1),
                ];
                for nb in neighbours.into_iter().flatten() {
                    if component[nb] == u32::MAX && compatible(&patterns[nb], &patterns[cell]) {
                        component[nb] = next;
                        queue.push_back(nb);
                    }
                }
            }
            next += 1;
        }
        let mut atlas = Self { lo, step, size, component, component_label: vec![None; next as usize] };
        // The boundary functions are even in m0 and the mirrored anchors
        // carry the same link type.
        for sign in [1.0, -1.0] {
            for &(m0, m1, label) in anchors {
                if let Some(c) = atlas.locate(values, sign * m0, m1) {
                    atlas.component_label[c as usize].get_or_insert(label);
                }
            }
        }
        atlas
    }

    /// Component of the nearest cell sharing the point's sign pattern.
    fn locate(&self, values: fn(f64, f64) -> Vec<Option<f64>>, m0: f64, m1: f64) -> Option<u32> {
        let pattern = sign_pattern(&values(m0, m1));
        let fi = (m0 - self.lo) / self.step;
        let fj = (m1 - self.lo) / self.step;
        let (ci, cj) = (fi.round() as i64, fj.round() as i64);
        let coord = |i: i64| self.lo + i as f64 * self.step + 0.37 * self.step;
        let mut best: Option<(f64, u32)> = None;
        for di in -2..=2 {
            for dj in -2..=2 {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= self.size as i64 || j >= self.size as i64 {
                    continue;
                }
                let (x, y) = (coord(i), coord(j));
                if !compatible(&sign_pattern(&values(x, y)), &pattern) {
                    continue;
                }
                let dist = (x - m0).powi(2) + (y - m1).powi(2);
                if best.is_none_or(|b| dist < b.0) {
                    best = Some((dist, self.component[i as usize * self.size + j as usize]));
                }
            }
        }
        best.map(|b| b.1)
    }
}

fn atlas_2band() -> &'static RegionAtlas {
    static ATLAS: OnceLock<RegionAtlas> = OnceLock::new();
    ATLAS.get_or_init(|| RegionAtlas::build(boundary_values_2band, &ANCHORS_2BAND))
}

fn atlas_4band() -> &'static RegionAtlas {
    static ATLAS: OnceLock<RegionAtlas> = OnceLock::new();
    ATLAS.get_or_init(|| RegionAtlas::build(boundary_values_4band, &ANCHORS_4BAND))
}

fn classify_region(
    m0: f64,
    m1: f64,
    values: fn(f64, f64) -> Vec<Option<f64>>,
    names: &[&'static str],
    anchors: &[(f64, f64, KnotClass)],
    atlas: &RegionAtlas,
) -> Result<PhaseRegion> {
    if m0.abs() <= BOUNDARY_TOLERANCE && (m1 + 1.0).abs() <= BOUNDARY_TOLERANCE {
        return Err(TwisterError::DegeneratePoint { m0, m1 });
    }
    let boundary_values = values(m0, m1);
    for (v, name) in boundary_values.iter().zip(names) {
        if v.is_some_and(|x| x.abs() <= BOUNDARY_TOLERANCE) {
            return Err(TwisterError::OnBoundary { m0, m1, boundary: name });
        }
    }
    let pattern = sign_pattern(&boundary_values);
    let inside = m0.abs() < ATLAS_HALF_WIDTH && m1.abs() < ATLAS_HALF_WIDTH;
    let label = if inside {
        atlas.locate(values, m0, m1).and_then(|c| atlas.component_label[c as usize])
    } else {
        let matching: Vec<KnotClass> =
            anchors.iter().filter(|(a0, a1, _)| sign_pattern(&values(*a0, *a1)) == pattern).map(|a| a.2).collect();
        (matching.len() == 1).then(|| matching[0])
    };
    label.map(|label| PhaseRegion { label, boundary_values }).ok_or(TwisterError::NoAnchor { m0, m1 })
}

pub fn phase_region_2band(m0: f64, m1: f64) -> Result<PhaseRegion> {
    classify_region(m0, m1, boundary_values_2band, &BOUNDARY_NAMES_2BAND, &ANCHORS_2BAND, atlas_2band())
}

pub fn phase_region_4band(m0: f64, m1: f64) -> Result<PhaseRegion> {
    classify_region(m0, m1, boundary_values_4band, &BOUNDARY_NAMES_4BAND, &ANCHORS_4BAND, atlas_4band())
}
