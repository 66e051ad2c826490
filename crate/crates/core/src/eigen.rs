//! Dense complex non-Hermitian eigensolver.
//!
//! Eigenvalues come from a unitary Hessenberg reduction followed by
//! single-shift complex QR with deflation. Eigenvectors come from inverse
//! iteration on the original matrix with a slightly perturbed shift.
//!
//! Near an exceptional point the eigenvalues of an `N x N` Jordan block
//! move by `O(eps^(1/N))` under `O(eps)` perturbations, so the solver flags
//! clustered spectra instead of pretending the eigenvectors are reliable.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dense::{vec_norm, CMatrix, C64};
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `v[0] = 1`, matching the `psi_1 = 1` ansatz.
    FirstComponent,
    /// Largest-modulus component equals 1.
    #[default]
    MaxAbs,
    /// Unit 2-norm, largest component real and positive.
    Unit2Norm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// QR sweeps allowed per deflated eigenvalue before giving up.
    pub qr_max_sweeps: usize,
    /// Subdiagonal entries below `deflation_tol * (|h_kk| + |h_k+1,k+1|)` are
    /// set to zero.
    pub deflation_tol: f64,
    /// Relative shift perturbation for inverse iteration.
    pub invit_shift_jitter: f64,
    pub normalization: Normalization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            qr_max_sweeps: 60,
            deflation_tol: 100.0 * f64::EPSILON,
            invit_shift_jitter: 1e-8,
            normalization: Normalization::MaxAbs,
        }
    }
}

impl SolverConfig {
    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.qr_max_sweeps == 0
            || !(self.deflation_tol > 0.0)
            || !(self.invit_shift_jitter > 0.0)
        {
            return Err(Error::InvalidSpec(
                "solver tolerances and sweep limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConditionNote {
    WellSeparated,
    /// Some eigenvalue pairs are closer than `1e3 * eps * ||A||`; their
    /// eigenvectors may coincide and should not be trusted individually.
    Clustered {
        close_pairs: usize,
        min_separation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    /// Column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
    /// `||A v - lambda v|| / (||A|| ||v||)`, Frobenius norm for `A`.
    pub residuals: Vec<f64>,
    pub condition_note: ConditionNote,
    pub normalization: Normalization,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    pub fn is_clustered(&self) -> bool {
        matches!(self.condition_note, ConditionNote::Clustered { .. })
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Phase folded into `(-pi, pi]`.
pub fn phase(z: C64) -> f64 {
    let p = z.arg();
    if p <= -PI {
        p + 2.0 * PI
    } else {
        p
    }
}

fn mode_order(a: C64, b: C64) -> Ordering {
    phase(a)
        .total_cmp(&phase(b))
        .then(a.norm().total_cmp(&b.norm()))
}

pub fn eig(a: &CMatrix, cfg: &SolverConfig) -> Result<Spectrum> {
    cfg.validate()?;
    let n = a.ensure_square()?;
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let values = eigvals(a, cfg)?;
    let anorm = a.norm_fro();

    let mut vectors = CMatrix::zeros(n, n);
    let mut residuals = Vec::with_capacity(n);
    for (k, &lambda) in values.iter().enumerate() {
        let (v, r) = inverse_iteration(a, lambda, k, anorm, cfg)?;
        vectors.set_column(k, &normalize(v, cfg.normalization));
        residuals.push(r);
    }

    let spectrum = Spectrum {
        condition_note: cluster_note(&values, anorm),
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        normalization: cfg.normalization,
    };
    Ok(sort_modes(spectrum))
}

/// Eigenvalues only, in deflation order.
pub fn eigvals(a: &CMatrix, cfg: &SolverConfig) -> Result<Vec<C64>> {
    cfg.validate()?;
    let n = a.ensure_square()?;
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    hessenberg_qr(&mut h, n, cfg)
}

/// Stable sort by phase in `(-pi, pi]`, ties by modulus; eigenvector
/// columns and residuals follow their eigenvalues.
pub fn sort_modes(s: Spectrum) -> Spectrum {
    let n = s.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| mode_order(s.eigenvalues[i], s.eigenvalues[j]));
    let rows = s.eigenvectors.rows();
    let mut vectors = CMatrix::zeros(rows, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &s.eigenvectors.column(src));
    }
    Spectrum {
        eigenvalues: order.iter().map(|&i| s.eigenvalues[i]).collect(),
        residuals: order.iter().map(|&i| s.residuals[i]).collect(),
        eigenvectors: vectors,
        condition_note: s.condition_note,
        normalization: s.normalization,
    }
}

/// Householder reduction to upper Hessenberg form. Columns that are already
/// reduced are left untouched, so exact zeros survive.
fn hessenberg_in_place(h: &mut CMatrix) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        let tail: f64 = (k + 2..n).map(|i| h[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let xnorm = (tail + x0.norm_sqr()).sqrt();
        let unit = if x0 == ZERO {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -unit * xnorm;

        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vn = vec_norm(&v);
        v.iter_mut().for_each(|z| *z /= vn);

        // H <- (I - 2 v v*) H
        for j in k..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * h[(k + 1 + t, j)])
                .sum();
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vi * dot * 2.0;
            }
        }
        // H <- H (I - 2 v v*)
        for i in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| h[(i, k + 1 + t)] * vi)
                .sum();
            for (t, vi) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= dot * vi.conj() * 2.0;
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

fn hessenberg_qr(h: &mut CMatrix, n: usize, cfg: &SolverConfig) -> Result<Vec<C64>> {
    let mut values = Vec::with_capacity(n);
    if n == 0 {
        return Ok(values);
    }
    let anorm = h.norm_fro();
    let mut hi = n - 1;
    let mut its = 0usize;
    loop {
        if hi == 0 {
            values.push(h[(0, 0)]);
            break;
        }
        // start of the unreduced block ending at `hi`
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if scale == 0.0 {
                scale = anorm;
            }
            if sub <= cfg.deflation_tol * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            values.push(h[(hi, hi)]);
            hi -= 1;
            its = 0;
            continue;
        }

        its += 1;
        if its > cfg.qr_max_sweeps {
            return Err(Error::NoConvergence {
                sweeps: cfg.qr_max_sweeps,
                deflated: values.len(),
                n,
            });
        }
        let sigma = if its.is_multiple_of(10) {
            // exceptional shift to break cycles (e.g. permutation-like blocks)
            h[(hi, hi)] + C64::from_polar(0.75 * h[(hi, hi - 1)].norm(), 0.3 * its as f64)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        qr_sweep(h, lo, hi, sigma);
    }
    Ok(values)
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let p = (a - d) * 0.5;
    let bc = b * c;
    if bc == ZERO {
        return d;
    }
    let disc = (p * p + bc).sqrt();
    let den = if (p + disc).norm() >= (p - disc).norm() {
        p + disc
    } else {
        p - disc
    };
    if den == ZERO {
        d
    } else {
        d - bc / den
    }
}

/// One explicit shifted QR step on the block `lo..=hi`.
fn qr_sweep(h: &mut CMatrix, lo: usize, hi: usize, sigma: C64) {
    for i in lo..=hi {
        h[(i, i)] -= sigma;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        rots.push((c, s));
    }
    for (t, &(c, s)) in rots.iter().enumerate() {
        let k = lo + t;
        for i in lo..=(k + 2).min(hi) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + s.conj() * y;
            h[(i, k + 1)] = -s * x + y * c;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += sigma;
    }
}

/// `(c, s)` with `[[c, s], [-conj(s), c]] * [a, b]^T = [r, 0]^T`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, C64::new(1.0, 0.0));
    }
    let an = a.norm();
    let r = an.hypot(b.norm());
    (an / r, (a / an) * b.conj() / r)
}

fn start_vector(n: usize, k: usize) -> Vec<C64> {
    // deterministic, generic, and different per column so repeated
    // eigenvalues of diagonalizable matrices get distinct vectors
    (0..n)
        .map(|i| {
            let x =
                (i as f64 + 1.0) * 0.618_033_988_749_895 + (k as f64 + 1.0) * 0.414_213_562_373_095;
            C64::new(1.0 + 0.5 * (7.0 * x).sin(), 0.5 * (3.0 * x).cos())
        })
        .collect()
}

fn inverse_iteration(
    a: &CMatrix,
    lambda: C64,
    k: usize,
    anorm: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<C64>, f64)> {
    let scale = lambda.norm().max(anorm);
    if scale == 0.0 {
        // zero matrix: every vector is an eigenvector
        return Ok((start_vector(a.rows(), k), 0.0));
    }
    // The offset is relative to ||A||, not |lambda|: a tiny nonzero lambda on
    // a near-defective block would otherwise overflow the solve. Widen it if
    // that still happens.
    let mut best = (start_vector(a.rows(), k), f64::INFINITY);
    for widen in [1.0, 1e4, 1e8] {
        let offset = cfg.invit_shift_jitter * widen * scale;
        let found = inverse_iteration_at(a, lambda, lambda + offset, k, anorm)?;
        if found.1 < best.1 {
            best = found;
        }
        if best.1.is_finite() {
            break;
        }
    }
    Ok(best)
}

fn inverse_iteration_at(
    a: &CMatrix,
    lambda: C64,
    sigma: C64,
    k: usize,
    anorm: f64,
) -> Result<(Vec<C64>, f64)> {
    let n = a.rows();
    let mut lu = a.add_diagonal(-sigma).lu()?;
    if lu.is_singular() {
        lu.regularize(f64::EPSILON * anorm);
    }
    let residual = |v: &[C64]| -> f64 {
        let av = a.mul_vec(v);
        let r: Vec<C64> = av.iter().zip(v).map(|(x, y)| x - lambda * y).collect();
        vec_norm(&r) / (anorm * vec_norm(v))
    };

    let mut x = start_vector(n, k);
    let mut best = (x.clone(), f64::INFINITY);
    let target = 2.0 * f64::EPSILON;
    for _ in 0..6 {
        let mut y = lu.solve(&x)?;
        let yn = vec_norm(&y);
        if !(yn.is_finite() && yn > 0.0) {
            break;
        }
        y.iter_mut().for_each(|z| *z /= yn);
        let r = residual(&y);
        if r < best.1 {
            best = (y.clone(), r);
        }
        x = y;
        if r <= target {
            break;
        }
    }
    Ok(best)
}

pub fn normalize(mut v: Vec<C64>, how: Normalization) -> Vec<C64> {
    let (imax, vmax) = v
        .iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm()))
        .fold((0, 0.0), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    if vmax == 0.0 {
        return v;
    }
    let divisor = match how {
        Normalization::MaxAbs => v[imax],
        Normalization::FirstComponent if v[0].norm() > f64::EPSILON * vmax => v[0],
        // first component vanishes: fall back to max-abs
        Normalization::FirstComponent => v[imax],
        Normalization::Unit2Norm => v[imax] / v[imax].norm() * vec_norm(&v),
    };
    v.iter_mut().for_each(|z| *z /= divisor);
    if how != Normalization::Unit2Norm {
        // exact 1 at the reference entry
        let at = if how == Normalization::FirstComponent && v[0].norm() > 0.5 {
            0
        } else {
            imax
        };
        v[at] = C64::new(1.0, 0.0);
    }
    v
}

fn cluster_note(values: &[C64], anorm: f64) -> ConditionNote {
    let threshold = 1e3 * f64::EPSILON * anorm;
    let mut close = 0;
    let mut min_sep = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = (values[i] - values[j]).norm();
            min_sep = min_sep.min(d);
            if d <= threshold {
                close += 1;
            }
        }
    }
    if close == 0 {
        ConditionNote::WellSeparated
    } else {
        ConditionNote::Clustered {
            close_pairs: close,
            min_separation: min_sep,
        }
    }
}
