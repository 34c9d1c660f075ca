//! Small dense complex linear algebra.
//!
//! Everything here works on matrices of dimension 2, 4 or 8 and favours
//! accuracy and determinism over asymptotic speed.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("eigen-solver did not converge (residual {residual:.3e})")]
    NonConvergence { residual: f64 },
    #[error("rank deficient input: Householder pivot norm {pivot:.3e} in column {column}")]
    RankDeficient { column: usize, pivot: f64 },
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(NumericsError::DimensionMismatch { expected: dim, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        let dim = cols.len();
        Self::from_fn(dim, |i, j| cols[j][i])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.data[i * self.dim..(i + 1) * self.dim].to_vec()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * other[(i % b, j % b)])
    }

    /// Assemble `[[tl, tr], [bl, br]]` from four equal-size blocks.
    pub fn from_blocks(tl: &Self, tr: &Self, bl: &Self, br: &Self) -> Self {
        let n = tl.dim;
        Self::from_fn(2 * n, |i, j| match (i < n, j < n) {
            (true, true) => tl[(i, j)],
            (true, false) => tr[(i, j - n)],
            (false, true) => bl[(i - n, j)],
            (false, false) => br[(i - n, j - n)],
        })
    }

    /// The `size × size` block starting at `(row, col)`.
    pub fn block(&self, row: usize, col: usize, size: usize) -> Self {
        Self::from_fn(size, |i, j| self[(row + i, col + j)])
    }

    /// Gauss–Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n).max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm())).unwrap_or(col);
            if a[(pivot, col)].norm() <= 1e-300_f64.max(scale * 1e-300) {
                return Err(NumericsError::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let d = a[(col, col)].inv();
            for j in 0..n {
                a[(col, j)] *= d;
                inv[(col, j)] *= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    if f != ZERO {
                        for j in 0..n {
                            let (acj, icj) = (a[(col, j)], inv[(col, j)]);
                            a[(r, j)] -= f * acj;
                            inv[(r, j)] -= f * icj;
                        }
                    }
                }
            }
        }
        if inv.is_finite() {
            Ok(inv)
        } else {
            Err(NumericsError::Singular)
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> =
                (0..self.dim).map(|j| format!("{:+.6}{:+.6}i", self[(i, j)].re, self[(i, j)].im)).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n = norm(v);
    v.iter().map(|z| z / n).collect()
}

/// Eigenvalues with column-aligned right eigenvectors and, when the
/// eigenvector matrix is invertible, the biorthogonal left eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<C64>,
    pub right: Vec<Vec<C64>>,
    /// Row vectors `⟨ψ_i^L|` with `⟨ψ_i^L|ψ_j^R⟩ = δ_ij`.
    pub left: Option<Vec<Vec<C64>>>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&self.right)
    }

    fn permuted(&self, order: &[usize]) -> Self {
        Self {
            eigenvalues: order.iter().map(|&i| self.eigenvalues[i]).collect(),
            right: order.iter().map(|&i| self.right[i].clone()).collect(),
            left: self.left.as_ref().map(|l| order.iter().map(|&i| l[i].clone()).collect()),
        }
    }
}

/// Characteristic polynomial coefficients, lowest degree first, monic.
pub fn characteristic_polynomial(m: &ComplexMatrix) -> Vec<C64> {
    let n = m.dim();
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[n] = ONE;
    let mut mk = ComplexMatrix::zeros(n);
    for k in 1..=n {
        let mut next = m * &mk;
        for i in 0..n {
            next[(i, i)] += coeffs[n - k + 1];
        }
        mk = next;
        coeffs[n - k] = -(m * &mk).trace() / k as f64;
    }
    coeffs
}

fn horner(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Durand–Kerner simultaneous root finding for a monic polynomial.
pub fn polynomial_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let bound = 1.0 + coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = C64::new(0.4, 0.9);
    let mut roots: Vec<C64> = (0..n).map(|j| seed.powu(j as u32 + 1) * bound.min(2.0)).collect();
    let tol = 1e-15 * bound;
    let mut converged = false;
    for _ in 0..2000 {
        let mut delta = 0.0_f64;
        for i in 0..n {
            let zi = roots[i];
            let (p, _) = horner(coeffs, zi);
            let mut denom = ONE;
            for (j, zj) in roots.iter().enumerate() {
                if j != i {
                    let d = zi - zj;
                    denom *= if d.norm() < 1e-300 { C64::new(1e-300, 0.0) } else { d };
                }
            }
            let step = p / denom;
            roots[i] = zi - step;
            delta = delta.max(step.norm());
        }
        if delta <= tol {
            converged = true;
            break;
        }
    }
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NumericsError::NonConvergence { residual: f64::INFINITY });
    }
    // Newton polish of simple roots; repeated roots converge linearly and are left alone.
    for z in roots.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(coeffs, *z);
            if dp.norm() > 1e-8 * bound {
                let step = p / dp;
                if step.norm() < 1e-6 * bound {
                    *z -= step;
                }
            }
        }
    }
    let _ = converged;
    Ok(roots)
}

fn solve_shifted(m: &ComplexMatrix, mu: C64, rhs: &[C64]) -> Vec<C64> {
    let n = m.dim();
    let scale = m.max_abs().max(1.0);
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= mu;
    }
    let mut b = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm())).unwrap_or(col);
        if pivot != col {
            for j in 0..n {
                let tmp = a[(pivot, j)];
                a[(pivot, j)] = a[(col, j)];
                a[(col, j)] = tmp;
            }
            b.swap(pivot, col);
        }
        if a[(col, col)].norm() < 1e-14 * scale {
            a[(col, col)] = C64::new(1e-14 * scale, 0.0);
        }
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            if f != ZERO {
                for j in col..n {
                    let acj = a[(col, j)];
                    a[(r, j)] -= f * acj;
                }
                let bc = b[col];
                b[r] -= f * bc;
            }
        }
    }
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let s: C64 = (i + 1..n).map(|j| a[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / a[(i, i)];
    }
    x
}

fn inverse_iteration(m: &ComplexMatrix, lambda: C64, start: &[C64], against: &[Vec<C64>]) -> Vec<C64> {
    let mut v = normalized(start);
    for _ in 0..4 {
        let mut x = solve_shifted(m, lambda, &v);
        for q in against {
            let c = inner(q, &x);
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= c * qi;
            }
        }
        let nx = norm(&x);
        if !nx.is_finite() || nx == 0.0 {
            break;
        }
        v = x.iter().map(|z| z / nx).collect();
    }
    v
}

fn residual(m: &ComplexMatrix, lambda: C64, v: &[C64]) -> f64 {
    let mv = m.mul_vec(v);
    mv.iter().zip(v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt()
}

fn default_order(values: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (za, zb) = (values[a], values[b]);
        if (za.im - zb.im).abs() > 1e-9 {
            zb.im.total_cmp(&za.im)
        } else {
            zb.re.total_cmp(&za.re)
        }
    });
    order
}

/// Eigendecomposition ordered by descending imaginary part (real-part tiebreak).
pub fn eig(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let n = m.dim();
    let norm_m = m.frobenius_norm();
    let scale = norm_m.max(f64::MIN_POSITIVE);
    if norm_m == 0.0 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![ZERO; n],
            right: ComplexMatrix::identity(n).adjoint().data.chunks(n).map(|c| c.to_vec()).collect(),
            left: Some(ComplexMatrix::identity(n).data.chunks(n).map(|c| c.to_vec()).collect()),
        });
    }
    // Work on the scaled matrix so tolerances are relative.
    let ms = m.scale(C64::new(1.0 / scale, 0.0));
    let roots = polynomial_roots(&characteristic_polynomial(&ms))?;

    let cluster_tol = 1e-6;
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut cluster_of: Vec<usize> = Vec::with_capacity(n);
    for (idx, &root) in roots.iter().enumerate() {
        let cluster = (0..idx).find(|&j| (roots[j] - root).norm() < cluster_tol).unwrap_or(idx);
        let siblings: Vec<Vec<C64>> =
            (0..idx).filter(|&j| cluster_of[j] == cluster).map(|j| vectors[j].clone()).collect();
        let mut best: Option<(f64, Vec<C64>, C64)> = None;
        for s in 0..n {
            let mut start = vec![C64::new(0.1, 0.05); n];
            start[s] = ONE;
            let v = inverse_iteration(&ms, root, &start, &siblings);
            if !siblings.is_empty() {
                let overlap: f64 = siblings.iter().map(|q| inner(q, &v).norm()).fold(0.0, f64::max);
                if overlap > 1e-6 {
                    continue;
                }
            }
            let lam = rayleigh(&ms, &v, root);
            let r = residual(&ms, lam, &v);
            if best.as_ref().is_none_or(|b| r < b.0) {
                best = Some((r, v, lam));
            }
            if r < 1e-13 {
                break;
            }
        }
        let (r, v, lam) = match best {
            Some(b) => b,
            None => {
                // Defective: no independent vector exists; reuse the plain iterate.
                let v = inverse_iteration(&ms, root, &vec![ONE; n], &[]);
                let lam = rayleigh(&ms, &v, root);
                (residual(&ms, lam, &v), v, lam)
            }
        };
        if r > 1e-10 {
            return Err(NumericsError::NonConvergence { residual: r * scale });
        }
        values.push(lam * scale);
        vectors.push(v);
        cluster_of.push(cluster);
    }
    let left = ComplexMatrix::from_columns(&vectors).inverse().ok().and_then(|inv| {
        let cond = inv.frobenius_norm() * (n as f64).sqrt();
        (cond < 1e12).then(|| (0..n).map(|i| inv.row(i)).collect())
    });
    let dec = EigenDecomposition { eigenvalues: values, right: vectors, left };
    let order = default_order(&dec.eigenvalues);
    Ok(dec.permuted(&order))
}

fn rayleigh(m: &ComplexMatrix, v: &[C64], fallback: C64) -> C64 {
    let mv = m.mul_vec(v);
    let q = inner(v, &mv) / inner(v, v);
    // The plain quotient is only trustworthy when it actually lowers the residual.
    if residual(m, q, v) <= residual(m, fallback, v) {
        q
    } else {
        fallback
    }
}

/// Eigendecomposition reordered for continuity with `prev`: each previous
/// band is matched greedily to the new eigenvector of largest overlap.
pub fn eig_tracked(m: &ComplexMatrix, prev: &EigenDecomposition) -> Result<EigenDecomposition> {
    let dec = eig(m)?;
    let order = continuity_order(&prev.right, &dec.right);
    Ok(dec.permuted(&order))
}

/// `order[i]` is the index in `new` matched to `old[i]`.
pub fn continuity_order(old: &[Vec<C64>], new: &[Vec<C64>]) -> Vec<usize> {
    let n = old.len();
    let mut pairs = Vec::with_capacity(n * n);
    for (i, a) in old.iter().enumerate() {
        for (j, b) in new.iter().enumerate() {
            pairs.push((inner(a, b).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut order = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if order[i] == usize::MAX && !used[j] {
            order[i] = j;
            used[j] = true;
        }
    }
    order
}

/// Which route `expm` took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpmPath {
    Eigen,
    ScalingSquaring,
}

#[derive(Debug, Clone)]
pub struct Expm {
    pub matrix: ComplexMatrix,
    pub path: ExpmPath,
}

pub const EXPM_CONDITION_LIMIT: f64 = 1e8;

/// `e^{-i m t}`, via the eigendecomposition when it is well conditioned and
/// scaling-and-squaring otherwise.
pub fn expm(m: &ComplexMatrix, t: f64) -> Result<Expm> {
    if !m.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    if let Ok(dec) = eig(m) {
        let v = dec.vector_matrix();
        if let Ok(vinv) = v.inverse() {
            let cond = v.frobenius_norm() * vinv.frobenius_norm() / m.dim() as f64;
            if cond < EXPM_CONDITION_LIMIT {
                let d: Vec<C64> = dec.eigenvalues.iter().map(|e| (-I * e * t).exp()).collect();
                let out = &(&v * &ComplexMatrix::diag(&d)) * &vinv;
                return Ok(Expm { matrix: out, path: ExpmPath::Eigen });
            }
        }
    }
    Ok(Expm { matrix: expm_taylor(&m.scale(-I * t)), path: ExpmPath::ScalingSquaring })
}

/// `e^{a}` by scaling and squaring around a truncated Taylor series.
pub fn expm_taylor(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.dim();
    let norm1 = (0..n).map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(C64::new(0.5_f64.powi(squarings as i32), 0.0));
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for k in 1..=30 {
        term = (&term * &scaled).scale(C64::new(1.0 / k as f64, 0.0));
        sum = &sum + &term;
        if term.max_abs() < 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Householder QR with the diagonal of `r` made real and positive.
pub fn qr_unitary(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    qr_unitary_leading(m, m.dim())
}

/// Householder QR that requires full rank only on the first `required`
/// columns. Later columns in the span of earlier ones get no reflector, so
/// `q` stays unitary and `r` has a zero on that diagonal entry.
pub fn qr_unitary_leading(m: &ComplexMatrix, required: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = m.dim();
    let mut r = m.clone();
    let mut q = ComplexMatrix::identity(n);
    for k in 0..n {
        let x: Vec<C64> = (k..n).map(|i| r[(i, k)]).collect();
        let xnorm = norm(&x);
        if xnorm < 1e-12 {
            if k < required {
                return Err(NumericsError::RankDeficient { column: k, pivot: xnorm });
            }
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm = norm(&v);
        if vnorm < 1e-300 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // r <- (I - 2 v v†) r on rows k..n
        for j in 0..n {
            let s: C64 = (k..n).map(|i| v[i - k].conj() * r[(i, j)]).sum();
            for i in k..n {
                r[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
        // q <- q (I - 2 v v†) on columns k..n
        for i in 0..n {
            let s: C64 = (k..n).map(|j| q[(i, j)] * v[j - k]).sum();
            for j in k..n {
                q[(i, j)] -= 2.0 * s * v[j - k].conj();
            }
        }
    }
    for k in 0..n {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for j in 0..n {
            r[(k, j)] *= ph.conj();
            q[(j, k)] *= ph;
        }
        r[(k, k)] = C64::new(r[(k, k)].norm(), 0.0);
        for i in k + 1..n {
            r[(i, k)] = ZERO;
        }
    }
    Ok((q, r))
}

fn hermitian_asymmetry(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// Hermitian matrix by cyclic complex Jacobi rotations.
pub fn hermitian_eigh(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let asym = hermitian_asymmetry(m);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(NumericsError::NotHermitian { asymmetry: asym });
    }
    let n = m.dim();
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = D·P with D = diag(.., 1, e^{-iφ}, ..) and the real rotation P.
                let mut j = ComplexMatrix::identity(n);
                j[(p, p)] = C64::new(c, 0.0);
                j[(p, q)] = C64::new(s, 0.0);
                j[(q, p)] = -phase.conj() * s;
                j[(q, q)] = phase.conj() * c;
                a = &(&j.adjoint() * &a) * &j;
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                for i in 0..n {
                    a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
                }
                v = &v * &j;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = ComplexMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok((values, vecs))
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn hermitian_max_eig(m: &ComplexMatrix) -> Result<f64> {
    let (values, _) = hermitian_eigh(m)?;
    Ok(values.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pseudo_random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        ComplexMatrix::from_fn(n, |_, _| c(next(), next()))
    }

    #[test]
    fn identity_eigenpairs() {
        let d = eig(&ComplexMatrix::identity(2)).unwrap();
        for e in &d.eigenvalues {
            assert!((e - ONE).norm() < 1e-12);
        }
        assert!(inner(&d.right[0], &d.right[1]).norm() < 1e-8);
    }

    #[test]
    fn two_band_hopf_point_at_k0() {
        let (m0, m1) = (0.5338, 0.6);
        let h = ComplexMatrix::from_rows(&[vec![c(0.0, m0), c(1.0 + m1, 0.0)], vec![c(1.0 + m1, 0.0), c(0.0, -m0)]])
            .unwrap();
        let expected = ((1.0 + m1) * (1.0 + m1) - m0 * m0).sqrt();
        let d = eig(&h).unwrap();
        assert!((d.eigenvalues[0].re - expected).abs() < 1e-12);
        assert!((d.eigenvalues[1].re + expected).abs() < 1e-12);
    }

    #[test]
    fn constructed_spectrum_is_recovered() {
        for seed in 0..20 {
            let v = pseudo_random_matrix(4, seed);
            let d: Vec<C64> = (0..4).map(|i| c(i as f64 - 1.5, 0.3 * i as f64)).collect();
            let m = &(&v * &ComplexMatrix::diag(&d)) * &v.inverse().unwrap();
            let dec = eig(&m).unwrap();
            for e in &d {
                let best = dec.eigenvalues.iter().map(|x| (x - e).norm()).fold(f64::MAX, f64::min);
                assert!(best < 1e-9, "seed {seed}: {best}");
            }
        }
    }

    #[test]
    fn eig_invariants_hold() {
        for seed in 0..30 {
            let m = pseudo_random_matrix(4, 100 + seed);
            let dec = eig(&m).unwrap();
            let norm_m = m.frobenius_norm();
            for (e, v) in dec.eigenvalues.iter().zip(&dec.right) {
                assert!(residual(&m, *e, v) <= 1e-10 * norm_m);
                assert!((norm(v) - 1.0).abs() < 1e-12);
            }
            let left = dec.left.as_ref().unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let ov: C64 = left[i].iter().zip(&dec.right[j]).map(|(a, b)| a * b).sum();
                    let want = if i == j { ONE } else { ZERO };
                    assert!((ov - want).norm() < 1e-8);
                }
            }
            for w in dec.eigenvalues.windows(2) {
                assert!(w[0].im >= w[1].im - 1e-9);
            }
        }
    }

    #[test]
    fn tracking_follows_vectors() {
        let a = ComplexMatrix::diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let prev = eig(&a).unwrap();
        let b = ComplexMatrix::diag(&[c(0.0, -1.0), c(0.0, 1.0)]);
        let next = eig_tracked(&b, &prev).unwrap();
        assert!((next.eigenvalues[0] - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn expm_trivial_cases() {
        let z = expm(&ComplexMatrix::zeros(3), 20.0).unwrap();
        assert!((&z.matrix - &ComplexMatrix::identity(3)).frobenius_norm() < 1e-14);
        let d = ComplexMatrix::diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let e = expm(&d, std::f64::consts::PI).unwrap().matrix;
        let pi = std::f64::consts::PI;
        assert!((e[(0, 0)].re - pi.exp()).abs() < 1e-9 * pi.exp());
        assert!((e[(1, 1)].re - (-pi).exp()).abs() < 1e-12);
    }

    #[test]
    fn expm_paths_agree() {
        for seed in 0..10 {
            let m = pseudo_random_matrix(4, 300 + seed);
            let eigen = expm(&m, 1.3).unwrap();
            assert_eq!(eigen.path, ExpmPath::Eigen);
            let taylor = expm_taylor(&m.scale(-I * 1.3));
            let rel = (&eigen.matrix - &taylor).frobenius_norm() / taylor.frobenius_norm();
            assert!(rel < 1e-9, "{rel}");
        }
    }

    #[test]
    fn expm_defective_uses_fallback() {
        let j = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![ZERO, ONE]]).unwrap();
        let e = expm(&j, 0.5).unwrap();
        assert_eq!(e.path, ExpmPath::ScalingSquaring);
        // e^{-iJt} = e^{-it}[[1, -it],[0, 1]]
        let ph = (-I * 0.5).exp();
        assert!((e.matrix[(0, 1)] - ph * (-I * 0.5)).norm() < 1e-12);
    }

    #[test]
    fn qr_identity_and_unitary_fixed_point() {
        let (q, r) = qr_unitary(&ComplexMatrix::identity(4)).unwrap();
        assert!((&q - &ComplexMatrix::identity(4)).frobenius_norm() < 1e-14);
        assert!((&r - &ComplexMatrix::identity(4)).frobenius_norm() < 1e-14);
        let u = expm(&ComplexMatrix::diag(&[c(0.3, 0.0), c(-1.0, 0.0)]), 1.0).unwrap().matrix;
        let (q, r) = qr_unitary(&u).unwrap();
        assert!((&r - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-12);
        assert!((&q - &u).frobenius_norm() < 1e-12);
    }

    #[test]
    fn qr_rank_deficient() {
        let m = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![ONE, ONE]]).unwrap();
        assert!(matches!(qr_unitary(&m), Err(NumericsError::RankDeficient { column: 1, .. })));
        assert!(matches!(qr_unitary_leading(&m, 2), Err(NumericsError::RankDeficient { column: 1, .. })));
        let (q, r) = qr_unitary_leading(&m, 1).unwrap();
        assert!((&(&q.adjoint() * &q) - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-12);
        assert!((&(&q * &r) - &m).frobenius_norm() < 1e-12);
    }

    #[test]
    fn hermitian_examples() {
        assert!((hermitian_max_eig(&ComplexMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-14);
        let d = ComplexMatrix::diag(&[c(4.0, 0.0), c(1.0, 0.0)]);
        assert!((hermitian_max_eig(&d).unwrap() - 4.0).abs() < 1e-14);
        let bad = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![ZERO, ONE]]).unwrap();
        assert!(matches!(hermitian_max_eig(&bad), Err(NumericsError::NotHermitian { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn qr_factorization_properties(seed in 0u64..10_000) {
            let m = pseudo_random_matrix(8, seed);
            let (q, r) = qr_unitary(&m).unwrap();
            let recon = &q * &r;
            prop_assert!((&recon - &m).frobenius_norm() < 1e-10 * m.frobenius_norm().max(1.0));
            let qq = &q.adjoint() * &q;
            prop_assert!((&qq - &ComplexMatrix::identity(8)).frobenius_norm() < 1e-10);
            for i in 0..8 {
                prop_assert!(r[(i, i)].im == 0.0 && r[(i, i)].re > 0.0);
                for j in 0..i {
                    prop_assert!(r[(i, j)] == ZERO);
                }
            }
            let (q2, r2) = qr_unitary(&m).unwrap();
            prop_assert!(q2 == q && r2 == r);
        }

        #[test]
        fn eig_round_trip(seed in 0u64..10_000) {
            let m = pseudo_random_matrix(4, seed);
            let dec = eig(&m).unwrap();
            let v = dec.vector_matrix();
            let recon = &(&v * &ComplexMatrix::diag(&dec.eigenvalues)) * &v.inverse().unwrap();
            prop_assert!((&recon - &m).frobenius_norm() <= 1e-8 * m.frobenius_norm());
        }

        #[test]
        fn expm_semigroup(seed in 0u64..10_000, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let m = pseudo_random_matrix(4, seed);
            let a = expm(&m, t1 + t2).unwrap().matrix;
            let b = &expm(&m, t1).unwrap().matrix * &expm(&m, t2).unwrap().matrix;
            prop_assert!((&a - &b).frobenius_norm() <= 1e-8 * a.frobenius_norm());
        }

        #[test]
        fn rayleigh_bound(seed in 0u64..10_000, xs in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let u = pseudo_random_matrix(4, seed);
            let g = &u.adjoint() * &u;
            let top = hermitian_max_eig(&g).unwrap();
            let x = normalized(&[c(xs[0], xs[1]), c(xs[2], xs[3]), c(xs[4], xs[5]), c(xs[6], xs[7] + 1e-3)]);
            let ux = u.mul_vec(&x);
            prop_assert!(top >= norm(&ux).powi(2) - 1e-10);
        }
    }
}
