//! Fourier-side machinery on a uniform circle grid.
//!
//! Boundary data live on `n` equispaced points `θ_j = 2πj/n` with `n` a power
//! of two. Analytic functions are finite one-sided power series
//! `Σ_{k=0..M} c_k z^k`; having no negative modes is the holomorphy
//! certificate, so nothing outside [`AnalyticFn`] is ever claimed analytic.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::pairwise_sum_complex;

pub const MIN_GRID: usize = 8;
pub const MAX_GRID: usize = 1 << 22;

/// Default radius bound for interior evaluation.
pub const DEFAULT_R_MAX: f64 = 1.0 - 1.0 / 1024.0;

/// Uniform grid of `n` points on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleGrid {
    n: usize,
}

impl CircleGrid {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() || !(MIN_GRID..=MAX_GRID).contains(&n) {
            return Err(Error::GridSize(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.point(j))
    }

    /// `e^{iθ_j}` for every grid point.
    pub fn unit_points(&self) -> Vec<Complex64> {
        self.points()
            .map(|t| Complex64::from_polar(1.0, t))
            .collect()
    }

    /// Arc length of one grid cell.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Index of the grid point nearest to angle `theta` (any real angle).
    pub fn nearest_index(&self, theta: f64) -> usize {
        let t = theta.rem_euclid(2.0 * PI);
        ((t / self.cell_measure()).round() as usize) % self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Real,
    Complex,
}

/// Samples of a function on a [`CircleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFn {
    grid: CircleGrid,
    values: Vec<Complex64>,
    kind: Kind,
}

impl BoundaryFn {
    pub fn real(grid: CircleGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid, values.len())?;
        Ok(Self {
            grid,
            values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            kind: Kind::Real,
        })
    }

    pub fn complex(grid: CircleGrid, values: Vec<Complex64>) -> Result<Self> {
        check_len(grid, values.len())?;
        Ok(Self {
            grid,
            values,
            kind: Kind::Complex,
        })
    }

    /// Complex samples that happen to be real are tagged [`Kind::Real`].
    pub fn auto(grid: CircleGrid, values: Vec<Complex64>) -> Result<Self> {
        check_len(grid, values.len())?;
        let kind = if values.iter().all(|v| v.im == 0.0) {
            Kind::Real
        } else {
            Kind::Complex
        };
        Ok(Self { grid, values, kind })
    }

    pub fn from_real_fn(grid: CircleGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(|t| Complex64::new(f(t), 0.0)).collect();
        Self {
            grid,
            values,
            kind: Kind::Real,
        }
    }

    pub fn from_complex_fn(grid: CircleGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        Self {
            grid,
            values,
            kind: Kind::Complex,
        }
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn is_real(&self) -> bool {
        self.kind == Kind::Real
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Complex64 {
        pairwise_sum_complex(&self.values) / self.values.len() as f64
    }

    /// Real part as a real-kind function.
    pub fn real_part(&self) -> BoundaryFn {
        BoundaryFn::from_values_real(self.grid, self.re())
    }

    pub fn scale(&self, s: f64) -> BoundaryFn {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
            kind: self.kind,
        }
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &BoundaryFn) -> Result<BoundaryFn> {
        if self.grid != other.grid {
            return Err(Error::Length {
                expected: self.grid.n(),
                got: other.grid.n(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        let kind = if self.is_real() && other.is_real() {
            Kind::Real
        } else {
            Kind::Complex
        };
        Ok(Self {
            grid: self.grid,
            values,
            kind,
        })
    }

    pub(crate) fn from_values_real(grid: CircleGrid, values: Vec<f64>) -> Self {
        Self {
            grid,
            values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            kind: Kind::Real,
        }
    }

    pub(crate) fn from_values_complex(grid: CircleGrid, values: Vec<Complex64>) -> Self {
        Self {
            grid,
            values,
            kind: Kind::Complex,
        }
    }
}

fn check_len(grid: CircleGrid, got: usize) -> Result<()> {
    if got != grid.n() {
        return Err(Error::Length {
            expected: grid.n(),
            got,
        });
    }
    Ok(())
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    plan.process(buf);
}

/// Signed frequency of FFT bin `idx` on an `n`-point grid; bin `n/2` maps to `-n/2`.
#[inline]
pub fn frequency(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Normalized Fourier coefficients `û(k) = (1/n) Σ_j u_j e^{-ikθ_j}`, for
/// `k = -n/2 .. n/2-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: CircleGrid,
    // FFT bin order
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn forward(u: &BoundaryFn) -> Self {
        let n = u.grid.n();
        let mut bins = u.values.clone();
        fft_in_place(&mut bins, false);
        let scale = 1.0 / n as f64;
        bins.iter_mut().for_each(|b| *b *= scale);
        Self { grid: u.grid, bins }
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    /// Coefficient of `e^{ikθ}`; `k` must lie in `-n/2 .. n/2`.
    pub fn mode(&self, k: i64) -> Complex64 {
        let n = self.grid.n() as i64;
        assert!(k >= -n / 2 && k < n / 2, "mode {k} outside the grid band");
        self.bins[k.rem_euclid(n) as usize]
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Applies `m(k)` to every mode.
    pub fn apply(&mut self, m: impl Fn(i64) -> Complex64) {
        let n = self.grid.n();
        for (idx, b) in self.bins.iter_mut().enumerate() {
            *b *= m(frequency(idx, n));
        }
    }

    /// Grid samples reconstructed from the coefficients.
    pub fn inverse(&self) -> Vec<Complex64> {
        let mut buf = self.bins.clone();
        fft_in_place(&mut buf, true);
        buf
    }

    /// Largest modulus among strictly negative modes.
    pub fn max_negative_mode(&self) -> f64 {
        let n = self.grid.n();
        (n / 2..n).map(|i| self.bins[i].norm()).fold(0.0, f64::max)
    }
}

/// Finite one-sided power series `Σ_{k=0..M} c_k z^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFn {
    coeffs: Vec<Complex64>,
}

impl AnalyticFn {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::param("coeffs", "at least one coefficient required"));
        }
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::param("coeffs", "coefficients must be finite"));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `z ↦ z^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }

    pub fn zero(degree: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn value_at_origin(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Horner evaluation over all coefficients, no domain check.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.coeffs, z)
    }

    pub fn scale(&self, s: f64) -> AnalyticFn {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &AnalyticFn) -> AnalyticFn {
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        let coeffs = (0..len)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(zero)
                    + other.coeffs.get(k).copied().unwrap_or(zero)
            })
            .collect();
        Self { coeffs }
    }

    /// Values on the circle of radius `r` at the grid angles.
    pub fn ring(&self, grid: CircleGrid, r: f64) -> Vec<Complex64> {
        let n = grid.n();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut rk = 1.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            buf[k % n] += c * rk;
            rk *= r;
        }
        fft_in_place(&mut buf, true);
        buf
    }

    /// Boundary trace on the grid.
    pub fn trace(&self, grid: CircleGrid) -> BoundaryFn {
        BoundaryFn::from_values_complex(grid, self.ring(grid, 1.0))
    }

    /// `max_j |F(r e^{iθ_j})|`.
    pub fn sup_on_ring(&self, grid: CircleGrid, r: f64) -> f64 {
        self.ring(grid, r)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Bound on `|Σ_{k>M} c_k z^k|` for a continuation with coefficients of
    /// modulus at most `coeff_bound`, at `|z| = r`.
    pub fn truncation_tail_bound(&self, coeff_bound: f64, r: f64) -> f64 {
        coeff_bound * r.powi(self.coeffs.len() as i32) / (1.0 - r)
    }

    /// Evaluator that truncates the series adaptively in `|z|`.
    pub fn evaluator(&self) -> SeriesEvaluator<'_> {
        SeriesEvaluator::new(self)
    }
}

#[inline]
fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

const EVAL_BUCKETS: usize = 4096;

/// Power-series evaluator for the inner loop of path simulation.
///
/// For each radius bucket `[i/B, (i+1)/B)` it stores the number of leading
/// terms after which `Σ_{k≥K} |c_k| ρ^k ≤ tol` at `ρ = (i+1)/B`. Points deep
/// inside the disk therefore cost a handful of terms instead of `M + 1`.
#[derive(Debug, Clone)]
pub struct SeriesEvaluator<'a> {
    coeffs: &'a [Complex64],
    terms: Vec<u32>,
    tol: f64,
}

impl<'a> SeriesEvaluator<'a> {
    fn new(f: &'a AnalyticFn) -> Self {
        let abs: Vec<f64> = f.coeffs.iter().map(|c| c.norm()).collect();
        let max = abs.iter().copied().fold(0.0, f64::max);
        let tol = 1e-12 * (1.0 + max);
        let m = abs.len();
        let mut tail = vec![0.0; m + 1];
        let terms = (0..EVAL_BUCKETS)
            .map(|i| {
                let rho = ((i + 1) as f64 / EVAL_BUCKETS as f64).min(1.0);
                let mut p = 1.0;
                let mut powers = Vec::with_capacity(m);
                for _ in 0..m {
                    powers.push(p);
                    p *= rho;
                }
                tail[m] = 0.0;
                for k in (0..m).rev() {
                    tail[k] = tail[k + 1] + abs[k] * powers[k];
                }
                // smallest K with tail[K] <= tol; tail is nonincreasing in K
                let k = tail.partition_point(|&t| t > tol);
                k.max(1) as u32
            })
            .collect();
        Self {
            coeffs: &f.coeffs,
            terms,
            tol,
        }
    }

    /// Absolute truncation tolerance used to build the table.
    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    #[inline]
    pub fn terms_for(&self, modulus: f64) -> usize {
        let i = ((modulus * EVAL_BUCKETS as f64) as usize).min(EVAL_BUCKETS - 1);
        self.terms[i] as usize
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let k = self.terms_for(z.norm());
        horner(&self.coeffs[..k], z)
    }
}

fn require_real(u: &BoundaryFn) -> Result<()> {
    if u.is_real() {
        Ok(())
    } else {
        Err(Error::NotReal)
    }
}

/// Conjugate function: Fourier multiplier `-i·sign(k)`; the mean and the
/// Nyquist mode map to zero so the output stays real.
pub fn hilbert_transform(u: &BoundaryFn) -> Result<BoundaryFn> {
    require_real(u)?;
    let n = u.grid.n() as i64;
    let mut s = Spectrum::forward(u);
    s.apply(|k| {
        if k == 0 || k == -n / 2 {
            Complex64::new(0.0, 0.0)
        } else if k > 0 {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        }
    });
    let values = s.inverse().into_iter().map(|v| v.re).collect();
    Ok(BoundaryFn::from_values_real(u.grid, values))
}

/// Analytic function with boundary values `u + i ũ`: `c_0 = mean(u)`,
/// `c_k = 2 û(k)` for `1 ≤ k ≤ n/2 - 1`.
///
/// The Nyquist mode of `u` has no analytic counterpart at this degree and is
/// dropped; the trace therefore equals `u + iũ` exactly when `û(-n/2) = 0`.
pub fn analytic_completion(u: &BoundaryFn) -> Result<AnalyticFn> {
    require_real(u)?;
    let n = u.grid.n();
    let s = Spectrum::forward(u);
    let mut coeffs = Vec::with_capacity(n / 2);
    coeffs.push(Complex64::new(s.mode(0).re, 0.0));
    for k in 1..(n / 2) as i64 {
        coeffs.push(s.mode(k) * 2.0);
    }
    Ok(AnalyticFn { coeffs })
}

/// `u + i·hilbert_transform(u)` as grid samples (keeps the Nyquist mode in
/// the real part, so `Re` of the result is exactly `u`).
pub fn completion_trace(u: &BoundaryFn) -> Result<BoundaryFn> {
    let ut = hilbert_transform(u)?;
    let values = u
        .values
        .iter()
        .zip(&ut.values)
        .map(|(a, b)| Complex64::new(a.re, b.re))
        .collect();
    Ok(BoundaryFn::from_values_complex(u.grid, values))
}

/// Keeps modes `0..n/2-1` and discards every negative mode.
pub fn riesz_project(h: &BoundaryFn) -> AnalyticFn {
    let n = h.grid.n();
    let s = Spectrum::forward(h);
    AnalyticFn {
        coeffs: (0..n / 2).map(|k| s.mode(k as i64)).collect(),
    }
}

/// `F(z)` for `|z| ≤ r_max`.
pub fn eval_interior(f: &AnalyticFn, z: Complex64, r_max: f64) -> Result<Complex64> {
    let m = z.norm();
    if m > r_max || r_max >= 1.0 {
        return Err(Error::Domain {
            modulus: m,
            limit: r_max,
        });
    }
    Ok(f.eval(z))
}

/// Poisson kernel `(1 - |z|²) / |e^{iθ} - z|²` without a domain check.
#[inline]
pub fn poisson_kernel_unchecked(theta: f64, z: Complex64) -> f64 {
    poisson_kernel_unit(Complex64::from_polar(1.0, theta), z)
}

/// Poisson kernel with the boundary point `w = e^{iθ}` precomputed.
#[inline]
pub fn poisson_kernel_unit(w: Complex64, z: Complex64) -> f64 {
    (1.0 - z.norm_sqr()) / (w - z).norm_sqr()
}

pub fn poisson_kernel(theta: f64, z: Complex64) -> Result<f64> {
    let m = z.norm();
    if m >= 1.0 {
        return Err(Error::Domain {
            modulus: m,
            limit: 1.0,
        });
    }
    Ok(poisson_kernel_unchecked(theta, z))
}

/// Harmonic extension of `u` to `z` by grid quadrature,
/// `(1/2π) Σ_j u_j P_{θ_j}(z) · (2π/n)`.
pub fn poisson_extend(u: &BoundaryFn, z: Complex64, r_max: f64) -> Result<Complex64> {
    let m = z.norm();
    if m > r_max || r_max >= 1.0 {
        return Err(Error::Domain {
            modulus: m,
            limit: r_max,
        });
    }
    let terms: Vec<Complex64> = u
        .grid
        .points()
        .zip(&u.values)
        .map(|(t, v)| v * poisson_kernel_unchecked(t, z))
        .collect();
    Ok(pairwise_sum_complex(&terms) / u.grid.n() as f64)
}

/// Dyadic BMO norm: the largest mean oscillation `(1/|I|) Σ_I |u - u_I|`
/// over aligned dyadic arcs of `n, n/2, …, 8` cells.
pub fn bmo_norm(u: &BoundaryFn) -> f64 {
    let v = &u.values;
    if v.iter().all(|x| *x == v[0]) {
        return 0.0;
    }
    let n = v.len();
    let mut best: f64 = 0.0;
    let mut len = n;
    while len >= MIN_GRID.min(n) {
        for start in (0..n).step_by(len) {
            let arc = &v[start..start + len];
            let mean = pairwise_sum_complex(arc) / len as f64;
            let osc: f64 = arc.iter().map(|x| (x - mean).norm()).sum::<f64>() / len as f64;
            best = best.max(osc);
        }
        if len == MIN_GRID {
            break;
        }
        len /= 2;
    }
    best
}

impl fmt::Display for CircleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CircleGrid(n={})", self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> CircleGrid {
        CircleGrid::new(n).unwrap()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_points_and_cells() {
        let g = grid(8);
        let pts: Vec<f64> = g.points().collect();
        for (j, p) in pts.iter().enumerate() {
            assert_eq!(*p, j as f64 * PI / 4.0);
        }
        assert_eq!(grid(4096).cell_measure(), 2.0 * PI / 4096.0);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(matches!(CircleGrid::new(7), Err(Error::GridSize(7))));
        assert!(CircleGrid::new(4).is_err());
        assert!(CircleGrid::new(1 << 23).is_err());
        assert!(CircleGrid::new(1 << 22).is_ok());
    }

    #[test]
    fn hilbert_of_cos_is_sin() {
        let g = grid(256);
        let u = BoundaryFn::from_real_fn(g, f64::cos);
        let h = hilbert_transform(&u).unwrap();
        let want: Vec<f64> = g.points().map(f64::sin).collect();
        assert!(max_err(&h.re(), &want) < 1e-12);
        assert!(h.is_real());
    }

    #[test]
    fn hilbert_kills_constants() {
        let g = grid(64);
        let u = BoundaryFn::from_real_fn(g, |_| 1.0);
        let h = hilbert_transform(&u).unwrap();
        assert!(h.sup_norm() < 1e-15);
    }

    #[test]
    fn hilbert_mixed_modes() {
        // -i sign(k) per mode: cos3θ -> sin3θ, 2 sinθ -> -2 cosθ
        let g = grid(128);
        let u = BoundaryFn::from_real_fn(g, |t| (3.0 * t).cos() + 2.0 * t.sin());
        let h = hilbert_transform(&u).unwrap();
        let want: Vec<f64> = g
            .points()
            .map(|t| (3.0 * t).sin() - 2.0 * t.cos())
            .collect();
        assert!(max_err(&h.re(), &want) < 1e-12);
    }

    #[test]
    fn hilbert_rejects_complex() {
        let g = grid(8);
        let u = BoundaryFn::from_complex_fn(g, |t| Complex64::from_polar(1.0, t));
        assert!(matches!(hilbert_transform(&u), Err(Error::NotReal)));
        assert!(analytic_completion(&u).is_err());
    }

    #[test]
    fn completion_examples() {
        let g = grid(64);
        let f = analytic_completion(&BoundaryFn::from_real_fn(g, f64::cos)).unwrap();
        assert!((f.coeffs()[1] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(f
            .coeffs()
            .iter()
            .enumerate()
            .all(|(k, c)| k == 1 || c.norm() < 1e-14));

        let f = analytic_completion(&BoundaryFn::from_real_fn(g, |_| 1.0)).unwrap();
        assert!((f.coeffs()[0] - 1.0).norm() < 1e-14);
        assert!(f.coeffs()[1..].iter().all(|c| c.norm() < 1e-14));

        // cos2θ - 0.5 -> z² - 0.5
        let f =
            analytic_completion(&BoundaryFn::from_real_fn(g, |t| (2.0 * t).cos() - 0.5)).unwrap();
        assert!((f.coeffs()[0] - Complex64::new(-0.5, 0.0)).norm() < 1e-14);
        assert!((f.coeffs()[2] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(f.degree(), 31);
    }

    #[test]
    fn completion_trace_matches_u_plus_i_conjugate() {
        let g = grid(1024);
        let u = crate::fixtures::square_wave(g);
        let f = analytic_completion(&u).unwrap();
        let tr = f.trace(g);
        let want = completion_trace(&u).unwrap();
        let err = tr
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "trace error {err}");
    }

    #[test]
    fn riesz_examples() {
        let g = grid(32);
        let neg = BoundaryFn::from_complex_fn(g, |t| Complex64::from_polar(1.0, -t));
        assert!(riesz_project(&neg)
            .coeffs()
            .iter()
            .all(|c| c.norm() < 1e-15));

        let pos = BoundaryFn::from_complex_fn(g, |t| Complex64::from_polar(1.0, t));
        let p = riesz_project(&pos);
        assert!((p.coeffs()[1] - 1.0).norm() < 1e-15);

        let two_cos = BoundaryFn::from_real_fn(g, |t| 2.0 * t.cos());
        let p = riesz_project(&two_cos);
        assert!((p.coeffs()[1] - 1.0).norm() < 1e-15);
        assert!(p.coeffs()[0].norm() < 1e-15);
    }

    #[test]
    fn riesz_round_trips_analytic_traces() {
        let g = grid(512);
        let f = analytic_completion(&crate::fixtures::square_wave(g)).unwrap();
        let back = riesz_project(&f.trace(g));
        let err = back
            .coeffs()
            .iter()
            .zip(f.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn eval_interior_examples() {
        let f = AnalyticFn::monomial(2);
        let v = eval_interior(&f, Complex64::new(0.0, 0.5), DEFAULT_R_MAX).unwrap();
        assert!((v - Complex64::new(-0.25, 0.0)).norm() < 1e-15);

        let f = AnalyticFn::new(vec![Complex64::new(0.3, -0.2), Complex64::new(5.0, 1.0)]).unwrap();
        assert_eq!(f.eval(Complex64::new(0.0, 0.0)), Complex64::new(0.3, -0.2));

        assert!(matches!(
            eval_interior(&f, Complex64::new(0.9999, 0.0), DEFAULT_R_MAX),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn eval_interior_matches_poisson_integral_for_square_wave() {
        let g = grid(4096);
        let u = crate::fixtures::square_wave(g);
        let f = analytic_completion(&u).unwrap();
        let trace = completion_trace(&u).unwrap();
        for z in [
            Complex64::new(0.9, 0.0),
            Complex64::from_polar(0.9, 1.0),
            Complex64::from_polar(0.5, -2.0),
        ] {
            let a = eval_interior(&f, z, DEFAULT_R_MAX).unwrap();
            let b = poisson_extend(&trace, z, DEFAULT_R_MAX).unwrap();
            assert!((a - b).norm() < 1e-6, "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn evaluator_agrees_with_full_horner() {
        let g = grid(2048);
        let f = analytic_completion(&crate::fixtures::square_wave(g)).unwrap();
        let ev = f.evaluator();
        for (r, t) in [
            (0.1, 0.3),
            (0.5, 2.0),
            (0.9, -1.0),
            (0.99, 0.01),
            (0.999, 3.0),
        ] {
            let z = Complex64::from_polar(r, t);
            let err = (ev.eval(z) - f.eval(z)).norm();
            assert!(err < 1e-11, "r={r}: {err}");
        }
        assert!(ev.terms_for(0.1) < 40);
        assert_eq!(ev.terms_for(0.9999), f.degree() + 1);
    }

    #[test]
    fn truncated_tail_matches_direct_summation() {
        // compensated direct summation as the higher-precision reference
        let g = grid(1024);
        let f = analytic_completion(&crate::fixtures::square_wave(g)).unwrap();
        let z = Complex64::from_polar(DEFAULT_R_MAX, 0.7);
        let (mut s, mut comp) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut p = Complex64::new(1.0, 0.0);
        for c in f.coeffs() {
            let y = c * p - comp;
            let t = s + y;
            comp = (t - s) - y;
            s = t;
            p *= z;
        }
        assert!((f.eval(z) - s).norm() < 1e-12);
    }

    #[test]
    fn poisson_kernel_examples() {
        let z0 = Complex64::new(0.0, 0.0);
        assert!((poisson_kernel(1.234, z0).unwrap() - 1.0).abs() < 1e-15);
        let h = Complex64::new(0.5, 0.0);
        assert!((poisson_kernel(0.0, h).unwrap() - 3.0).abs() < 1e-14);
        assert!((poisson_kernel(PI, h).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!(poisson_kernel(0.0, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn poisson_extend_examples() {
        let g = grid(512);
        let c = BoundaryFn::from_real_fn(g, |_| 2.5);
        let z = Complex64::from_polar(0.7, 0.4);
        assert!((poisson_extend(&c, z, DEFAULT_R_MAX).unwrap() - 2.5).norm() < 1e-12);

        let cos = BoundaryFn::from_real_fn(g, f64::cos);
        let v = poisson_extend(&cos, Complex64::new(0.6, 0.0), DEFAULT_R_MAX).unwrap();
        assert!((v - 0.6).norm() < 1e-12);

        let u = crate::fixtures::square_wave(g);
        let v = poisson_extend(&u, Complex64::new(0.0, 0.0), DEFAULT_R_MAX).unwrap();
        assert!((v - u.mean()).norm() < 1e-14);
    }

    #[test]
    fn poisson_kernel_grid_mean_is_one() {
        for n in [256usize, 1024, 4096] {
            let g = grid(n);
            for z in [
                Complex64::from_polar(0.5, 0.3),
                Complex64::from_polar(0.9, 2.0),
            ] {
                let mean: f64 = g
                    .points()
                    .map(|t| poisson_kernel_unchecked(t, z))
                    .sum::<f64>()
                    / n as f64;
                assert!((mean - 1.0).abs() < 10.0 / (n * n) as f64, "n={n}: {mean}");
            }
        }
    }

    #[test]
    fn bmo_examples() {
        let g = grid(256);
        assert_eq!(bmo_norm(&BoundaryFn::from_real_fn(g, |_| 0.7)), 0.0);
        let b = bmo_norm(&BoundaryFn::from_real_fn(g, f64::cos));
        assert!(b > 0.0 && b <= 2.0);
    }

    #[test]
    fn bmo_of_log_singularity_is_stable_under_refinement() {
        // independent brute force over every dyadic arc at two resolutions
        let brute = |n: usize| {
            let g = grid(n);
            let u = crate::fixtures::log_singularity(g);
            let v = u.re();
            let mut best: f64 = 0.0;
            let mut len = n;
            while len >= 8 {
                for s in (0..n).step_by(len) {
                    let m: f64 = v[s..s + len].iter().sum::<f64>() / len as f64;
                    let o: f64 = v[s..s + len].iter().map(|x| (x - m).abs()).sum::<f64>();
                    best = best.max(o / len as f64);
                }
                len /= 2;
            }
            (best, bmo_norm(&u))
        };
        let (b1, m1) = brute(2048);
        let (b2, m2) = brute(4096);
        assert!((b1 - m1).abs() < 1e-12 && (b2 - m2).abs() < 1e-12);
        assert!(m1.is_finite() && (m2 - m1).abs() / m1 < 0.1, "{m1} vs {m2}");
    }

    #[test]
    fn maximum_principle_on_rings() {
        let g = grid(1024);
        let f = analytic_completion(&crate::fixtures::square_wave(g)).unwrap();
        let boundary = f.sup_on_ring(g, 1.0);
        for r in [0.5, 0.9, 0.99, DEFAULT_R_MAX] {
            let tail = f.truncation_tail_bound(0.0, r);
            assert!(f.sup_on_ring(g, r) <= boundary + tail + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn hilbert_squared_is_minus_identity_minus_mean(
            a in prop::collection::vec(-1.0f64..1.0, 8..40),
        ) {
            let g = grid(64);
            let u = BoundaryFn::from_real_fn(g, |t| {
                a.iter().enumerate().map(|(k, c)| c * ((k as f64) * t + c).cos()).sum()
            });
            let hh = hilbert_transform(&hilbert_transform(&u).unwrap()).unwrap();
            let mean = u.mean().re;
            let spec = Spectrum::forward(&u);
            let nyq = spec.mode(-32).re;
            for (j, (x, y)) in hh.re().iter().zip(u.re()).enumerate() {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                // the Nyquist mode is annihilated along with the mean
                prop_assert!((x + (y - mean - nyq * sign)).abs() < 1e-10);
            }
        }

        #[test]
        fn riesz_is_idempotent(re in prop::collection::vec(-2.0f64..2.0, 32), im in prop::collection::vec(-2.0f64..2.0, 32)) {
            let g = grid(32);
            let h = BoundaryFn::complex(g, re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect()).unwrap();
            let p = riesz_project(&h);
            let pp = riesz_project(&p.trace(g));
            for (a, b) in p.coeffs().iter().zip(pp.coeffs()) {
                prop_assert!((a - b).norm() < 1e-13);
            }
        }

        #[test]
        fn bmo_bounded_by_twice_sup(v in prop::collection::vec(-3.0f64..3.0, 64)) {
            let g = grid(64);
            let u = BoundaryFn::real(g, v).unwrap();
            prop_assert!(bmo_norm(&u) <= 2.0 * u.sup_norm());
        }

        #[test]
        fn spectrum_round_trip(v in prop::collection::vec(-5.0f64..5.0, 128)) {
            let g = grid(128);
            let u = BoundaryFn::real(g, v.clone()).unwrap();
            let back = Spectrum::forward(&u).inverse();
            let scale = v.iter().map(|x| x.abs()).fold(1e-300, f64::max);
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a.re - b).abs() / scale < 1e-12);
            }
        }
    }
}
