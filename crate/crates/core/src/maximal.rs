//! Maximal functions on the circle grid: nontangential and Hardy–Littlewood
//! maximal functions, level sets, the pointwise bound comparing a stopped
//! projection with `M_HL(χ_{H_λ})`, the good set `B`, and exponential tail
//! fits.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correction::CalibrationConstants;
use crate::error::{Error, Result};
use crate::martingale::linear_fit;
use crate::par::map_indexed;
use crate::spectral::{hilbert_transform, AnalyticFn, BoundaryFn, CircleGrid, DEFAULT_R_MAX};

/// Grid sizes above this use the dyadic Hardy–Littlewood approximation.
pub const HL_EXACT_LIMIT: usize = 8192;

/// Subset of grid points with the normalized counting measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMask {
    grid: CircleGrid,
    members: Vec<bool>,
}

impl GridMask {
    pub fn new(grid: CircleGrid, members: Vec<bool>) -> Result<Self> {
        if members.len() != grid.n() {
            return Err(Error::Length {
                expected: grid.n(),
                got: members.len(),
            });
        }
        Ok(Self { grid, members })
    }

    pub fn full(grid: CircleGrid) -> Self {
        Self {
            grid,
            members: vec![true; grid.n()],
        }
    }

    pub fn empty(grid: CircleGrid) -> Self {
        Self {
            grid,
            members: vec![false; grid.n()],
        }
    }

    pub fn from_predicate(grid: CircleGrid, f: impl Fn(usize) -> bool) -> Self {
        Self {
            grid,
            members: (0..grid.n()).map(f).collect(),
        }
    }

    pub fn from_indices(grid: CircleGrid, indices: &[usize]) -> Result<Self> {
        let mut members = vec![false; grid.n()];
        for &i in indices {
            *members
                .get_mut(i)
                .ok_or_else(|| Error::param("indices", format!("{i} out of range")))? = true;
        }
        Ok(Self { grid, members })
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn contains(&self, j: usize) -> bool {
        self.members[j]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.members.len())
            .filter(|&j| self.members[j])
            .collect()
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    /// Arc-length measure `(2π/n)·count`.
    pub fn measure(&self) -> f64 {
        self.grid.cell_measure() * self.count() as f64
    }

    /// Measure divided by `2π`.
    pub fn normalized_measure(&self) -> f64 {
        self.count() as f64 / self.members.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    fn zip(&self, other: &GridMask, op: impl Fn(bool, bool) -> bool) -> Result<GridMask> {
        if self.grid != other.grid {
            return Err(Error::Length {
                expected: self.grid.n(),
                got: other.grid.n(),
            });
        }
        Ok(GridMask {
            grid: self.grid,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    pub fn intersect(&self, other: &GridMask) -> Result<GridMask> {
        self.zip(other, |a, b| a && b)
    }

    pub fn union(&self, other: &GridMask) -> Result<GridMask> {
        self.zip(other, |a, b| a || b)
    }

    pub fn difference(&self, other: &GridMask) -> Result<GridMask> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> GridMask {
        GridMask {
            grid: self.grid,
            members: self.members.iter().map(|m| !m).collect(),
        }
    }

    pub fn is_subset(&self, other: &GridMask) -> bool {
        self.members
            .iter()
            .zip(&other.members)
            .all(|(&a, &b)| !a || b)
    }

    /// Indicator function as a real boundary function.
    pub fn indicator(&self) -> BoundaryFn {
        BoundaryFn::from_values_real(
            self.grid,
            self.members
                .iter()
                .map(|&m| if m { 1.0 } else { 0.0 })
                .collect(),
        )
    }
}

/// Radii `r_0 < … < r_K ≤ r_max` over a base circle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskGrid {
    pub base: CircleGrid,
    pub radii: Vec<f64>,
}

impl DiskGrid {
    pub fn new(base: CircleGrid, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty()
            || radii.windows(2).any(|w| !(w[0] < w[1]))
            || !(radii[0] >= 0.0)
            || radii[radii.len() - 1] > DEFAULT_R_MAX
        {
            return Err(Error::param(
                "radii",
                "need strictly increasing radii in [0, r_max]",
            ));
        }
        Ok(Self { base, radii })
    }

    /// `r_k = 1 - 2^{-k}` for `k = 1..=k_max`.
    pub fn ladder(base: CircleGrid, k_max: u32) -> Result<Self> {
        Self::new(
            base,
            (1..=k_max).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect(),
        )
    }
}

/// `out[j] = max_{|d| ≤ m} v[(j + d) mod n]`.
pub fn circular_window_max(v: &[f64], m: usize) -> Vec<f64> {
    let n = v.len();
    if 2 * m + 1 >= n {
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return vec![max; n];
    }
    let w = 2 * m + 1;
    let ext: Vec<f64> = (0..n + 2 * m).map(|t| v[(t + n - m) % n]).collect();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    for t in 0..ext.len() {
        while dq.back().is_some_and(|&b| ext[b] <= ext[t]) {
            dq.pop_back();
        }
        dq.push_back(t);
        if dq[0] + w <= t {
            dq.pop_front();
        }
        if t + 1 >= w {
            out.push(ext[dq[0]]);
        }
    }
    out
}

/// Largest `m` with `4 r sin²(π m / n) ≤ (a² - 1)(1 - r)²`: the half-width,
/// in cells, of the cone `|z - e^{iθ}| ≤ a(1 - |z|)` at radius `r`.
fn cone_half_width(n: usize, r: f64, aperture: f64) -> usize {
    if r == 0.0 {
        return if aperture >= 1.0 { n / 2 } else { 0 };
    }
    let bound = (aperture * aperture - 1.0) * (1.0 - r) * (1.0 - r);
    let inside = |m: usize| {
        let s = (PI * m as f64 / n as f64).sin();
        4.0 * r * s * s <= bound
    };
    let mut m = 0;
    while m < n / 2 && inside(m + 1) {
        m += 1;
    }
    m
}

#[derive(Debug, Clone)]
pub struct NontangentialMax {
    pub values: BoundaryFn,
    /// Every cone reduced to its radial segment at this grid resolution.
    pub radial_only: bool,
}

/// `f#(θ_j)`: max of `|F|` over disk-grid points in the cone at `e^{iθ_j}`,
/// boundary sample included.
pub fn nontangential_max(
    f: &AnalyticFn,
    disk: &DiskGrid,
    aperture: f64,
) -> Result<NontangentialMax> {
    if !(1.0..=4.0).contains(&aperture) {
        return Err(Error::param(
            "aperture",
            format!("{aperture} not in [1, 4]"),
        ));
    }
    let grid = disk.base;
    let n = grid.n();
    let mut best: Vec<f64> = f.trace(grid).moduli();
    let mut radial_only = true;
    for &r in &disk.radii {
        let ring: Vec<f64> = f.ring(grid, r).iter().map(|v| v.norm()).collect();
        let m = cone_half_width(n, r, aperture);
        radial_only &= m == 0;
        for (b, v) in best.iter_mut().zip(circular_window_max(&ring, m)) {
            *b = b.max(v);
        }
    }
    Ok(NontangentialMax {
        values: BoundaryFn::from_values_real(grid, best),
        radial_only,
    })
}

/// Max of `|F|` along the radius at each grid angle, boundary included.
pub fn radial_max(f: &AnalyticFn, disk: &DiskGrid) -> BoundaryFn {
    let grid = disk.base;
    let mut best = f.trace(grid).moduli();
    for &r in &disk.radii {
        for (b, v) in best.iter_mut().zip(f.ring(grid, r)) {
            *b = b.max(v.norm());
        }
    }
    BoundaryFn::from_values_real(grid, best)
}

/// Hardy–Littlewood maximal function with, per point, an arc attaining it.
#[derive(Debug, Clone)]
pub struct HardyLittlewood {
    pub values: BoundaryFn,
    /// `(Σ_I |h|, cells in I)` for the maximizing arc `I`.
    pub witness: Vec<(f64, usize)>,
    /// `false` in dyadic mode.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlMode {
    Auto,
    Exact,
    Dyadic,
}

pub fn hardy_littlewood(h: &BoundaryFn) -> HardyLittlewood {
    hardy_littlewood_with(h, HlMode::Auto)
}

/// `a / la > b / lb` without dividing.
#[inline]
fn ratio_gt(a: f64, la: usize, b: f64, lb: usize) -> bool {
    a * lb as f64 > b * la as f64
}

pub fn hardy_littlewood_with(h: &BoundaryFn, mode: HlMode) -> HardyLittlewood {
    let a = h.moduli();
    let n = a.len();
    let exact = match mode {
        HlMode::Exact => true,
        HlMode::Dyadic => false,
        HlMode::Auto => n <= HL_EXACT_LIMIT,
    };
    let witness = if exact { hl_exact(&a) } else { hl_dyadic(&a) };
    let values = witness.iter().map(|&(s, l)| s / l as f64).collect();
    HardyLittlewood {
        values: BoundaryFn::from_values_real(h.grid(), values),
        witness,
        exact,
    }
}

fn prefix(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut p = vec![0.0; 2 * n + 1];
    for t in 0..2 * n {
        p[t + 1] = p[t] + a[t % n];
    }
    p
}

fn hl_exact(a: &[f64]) -> Vec<(f64, usize)> {
    let n = a.len();
    let p = prefix(a);
    let chunks = 64.min(n);
    let per = n.div_ceil(chunks);
    let partial = map_indexed(chunks, 0, |c| {
        let lo = 1 + c * per;
        let hi = (lo + per).min(n + 1);
        let mut best = vec![(0.0f64, 1usize); n];
        let mut first = true;
        let mut sums = vec![0.0; n];
        let mut dq: VecDeque<usize> = VecDeque::new();
        for len in lo..hi {
            for (s, v) in sums.iter_mut().enumerate() {
                *v = p[s + len] - p[s];
            }
            // starts admissible for point j: j - len + 1 ..= j (mod n)
            let span = len.min(n);
            let at = |t: usize| sums[(t + n * 2 - (span - 1)) % n];
            dq.clear();
            for t in 0..n + span - 1 {
                let v = at(t);
                while dq.back().is_some_and(|&b| at(b) <= v) {
                    dq.pop_back();
                }
                dq.push_back(t);
                if dq[0] + span <= t {
                    dq.pop_front();
                }
                if t + 1 >= span {
                    let j = t + 1 - span;
                    let s = at(dq[0]);
                    if first || ratio_gt(s, len, best[j].0, best[j].1) {
                        best[j] = (s, len);
                    }
                }
            }
            first = false;
        }
        best
    });
    let mut best = partial[0].clone();
    for part in &partial[1..] {
        for (b, &c) in best.iter_mut().zip(part) {
            if ratio_gt(c.0, c.1, b.0, b.1) {
                *b = c;
            }
        }
    }
    best
}

fn hl_dyadic(a: &[f64]) -> Vec<(f64, usize)> {
    let n = a.len();
    let p = prefix(a);
    let mut best: Vec<(f64, usize)> = a.iter().map(|&v| (v, 1)).collect();
    let mut len = 2;
    while len <= n {
        for shift in [0, len / 2] {
            for (j, b) in best.iter_mut().enumerate() {
                let rel = (j + n - shift) % n;
                let start = rel / len * len + shift;
                let s = p[start + len] - p[start];
                if ratio_gt(s, len, b.0, b.1) {
                    *b = (s, len);
                }
            }
        }
        len *= 2;
    }
    best
}

/// `{θ_j : h(θ_j) > λ}`.
pub fn level_set(h: &BoundaryFn, lambda: f64) -> Result<GridMask> {
    if !h.is_real() {
        return Err(Error::NotReal);
    }
    let v = h.values();
    Ok(GridMask::from_predicate(h.grid(), |j| v[j].re > lambda))
}

fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1]
}

/// Monte Carlo evidence from the run that produced `g`.
#[derive(Debug, Clone)]
pub struct StepEvidence {
    pub std_error: Vec<f64>,
    /// Entry points `z_τ` of fired paths.
    pub tau_points: Vec<Complex64>,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonDiagnostic {
    pub boxes: usize,
    /// `max ω(S_h) / h`.
    pub max_mass_over_h: f64,
    /// `max ω(S_h) / (|H ∩ 3I_h| / 2π)` over boxes with `H ∩ 3I_h ≠ ∅`.
    pub max_ratio: f64,
    /// Boxes carrying sweep mass while `H ∩ 3I_h` is empty.
    pub uncovered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub lambda: f64,
    pub h_measure: f64,
    /// Per-point `|f - g| / ((|f| + λ) M_HL(χ_{H_λ}))`; empty when `H_λ = ∅`.
    pub ratios: Vec<f64>,
    pub c_emp: f64,
    pub max_ratio: f64,
    /// `H_λ = ∅`: largest `|f - g|` and whether it is within 4 standard errors.
    pub zero_branch_max_diff: f64,
    pub zero_branch_ok: bool,
    pub carleson: Option<CarlesonDiagnostic>,
}

/// Compares `|f - g|` with `(|f| + λ) M_HL(χ_{H_λ})` pointwise.
pub fn theorem3_pointwise_check(
    f: &AnalyticFn,
    g: &BoundaryFn,
    lambda: f64,
    disk: &DiskGrid,
    aperture: f64,
    evidence: &StepEvidence,
) -> Result<Theorem3Report> {
    let grid = g.grid();
    if disk.base != grid {
        return Err(Error::param("disk", "base grid differs from g"));
    }
    let ft = f.trace(grid);
    let fs = nontangential_max(f, disk, aperture)?.values;
    let h = level_set(&fs, lambda)?;
    let diff: Vec<f64> = ft
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| (a - b).norm())
        .collect();
    let mut report = Theorem3Report {
        lambda,
        h_measure: h.normalized_measure(),
        ratios: Vec::new(),
        c_emp: 0.0,
        max_ratio: 0.0,
        zero_branch_max_diff: 0.0,
        zero_branch_ok: true,
        carleson: None,
    };
    if h.is_empty() {
        report.zero_branch_max_diff = diff.iter().copied().fold(0.0, f64::max);
        report.zero_branch_ok = diff
            .iter()
            .zip(&evidence.std_error)
            .all(|(d, se)| *d <= 4.0 * se + 1e-9);
        return Ok(report);
    }
    let m = hardy_littlewood(&h.indicator()).values.re();
    let fm = ft.moduli();
    report.ratios = (0..grid.n())
        .map(|j| diff[j] / ((fm[j] + lambda) * m[j]))
        .collect();
    report.c_emp = percentile(&report.ratios, 0.99);
    report.max_ratio = report.ratios.iter().copied().fold(0.0, f64::max);
    report.carleson = Some(carleson_diagnostic(&h, evidence));
    Ok(report)
}

/// Sweep mass of `∂E_λ` in Carleson boxes `S_h` against `|H ∩ 3I_h|`.
pub fn carleson_diagnostic(h: &GridMask, evidence: &StepEvidence) -> CarlesonDiagnostic {
    let grid = h.grid();
    let n = grid.n();
    let stride = (n / 128).max(1);
    let np = evidence.n_paths.max(1) as f64;
    let mut out = CarlesonDiagnostic {
        boxes: 0,
        max_mass_over_h: 0.0,
        max_ratio: 0.0,
        uncovered: 0,
    };
    let angle_dist = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    };
    for k in 1..=7 {
        let hh = 0.5f64.powi(k);
        for c in (0..n).step_by(stride) {
            let theta = grid.point(c);
            let mass = evidence
                .tau_points
                .iter()
                .filter(|z| z.norm() >= 1.0 - hh && angle_dist(z.arg(), theta) <= hh)
                .count() as f64
                / np;
            let covered = h
                .indices()
                .iter()
                .filter(|&&j| angle_dist(grid.point(j), theta) <= 3.0 * hh)
                .count() as f64
                / n as f64;
            out.boxes += 1;
            out.max_mass_over_h = out.max_mass_over_h.max(mass / hh);
            if covered > 0.0 {
                out.max_ratio = out.max_ratio.max(mass / covered);
            } else if mass > 0.0 {
                out.uncovered += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSetReport {
    pub lambda: f64,
    pub n_bound: f64,
    pub threshold: f64,
    pub h_measure: f64,
    pub j_measure: f64,
    pub g_complement_measure: f64,
    /// `|𝕋 ∖ B| / 2π`.
    pub defect: f64,
    /// `e^{-Nδ₀} C₀` (arc-length units).
    pub tail_f: f64,
    /// `e^{-λδ₁}`.
    pub tail_h: f64,
    pub max_hl_on_b: f64,
    /// Every point of `B` passes `M_HL(χ_H) ≤ e^{-λδ₁}` with the witness arc.
    pub bound_exact: bool,
    /// `|J| ≤ 3 |H| e^{λδ₁}`.
    pub weak_type_ok: bool,
}

#[derive(Debug, Clone)]
pub struct GoodSet {
    pub lambda: f64,
    pub b: GridMask,
    pub j: GridMask,
    pub report: GoodSetReport,
}

/// `B = G ∖ J` with `H = {f# > λ}`, `G = {|f| < N}`, `J` the union of arcs
/// `I` with `|H ∩ I| > e^{-λδ₁}|I|`, and `λ = N`.
pub fn good_set_b(
    f_sharp: &BoundaryFn,
    f_boundary: &BoundaryFn,
    n_bound: f64,
    consts: &CalibrationConstants,
) -> Result<GoodSet> {
    if !(n_bound > 0.0) {
        return Err(Error::param("n_bound", "must be positive"));
    }
    let grid = f_sharp.grid();
    if f_boundary.grid() != grid {
        return Err(Error::param("f_boundary", "grid differs from f_sharp"));
    }
    let n = grid.n();
    let lambda = n_bound;
    let t = (-lambda * consts.delta1).exp();
    let h = level_set(f_sharp, lambda)?;
    let fm = f_boundary.moduli();
    let g = GridMask::from_predicate(grid, |j| fm[j] < n_bound);
    if g.is_empty() {
        return Err(Error::param("n_bound", "below min |f|: G is empty"));
    }
    let ind: Vec<f64> = h
        .members()
        .iter()
        .map(|&m| if m { 1.0 } else { 0.0 })
        .collect();
    let p = prefix(&ind);
    let qualifies = |cnt: f64, len: usize| cnt > t * len as f64;
    let longest = map_indexed(n, 0, |s| {
        (1..=n).rev().find(|&len| qualifies(p[s + len] - p[s], len))
    });
    let mut cover = vec![0i64; n + 1];
    for (s, l) in longest.iter().enumerate() {
        if let Some(len) = *l {
            if len >= n {
                cover[0] += 1;
                cover[n] -= 1;
            } else if s + len <= n {
                cover[s] += 1;
                cover[s + len] -= 1;
            } else {
                cover[s] += 1;
                cover[n] -= 1;
                cover[0] += 1;
                cover[s + len - n] -= 1;
            }
        }
    }
    let mut run = 0;
    let jm: Vec<bool> = (0..n)
        .map(|i| {
            run += cover[i];
            run > 0
        })
        .collect();
    let j = GridMask::new(grid, jm)?;
    let b = g.difference(&j)?;
    let hl = hardy_littlewood_with(&h.indicator(), HlMode::Exact);
    let on_b: Vec<usize> = b.indices();
    let bound_exact = on_b
        .iter()
        .all(|&k| !qualifies(hl.witness[k].0, hl.witness[k].1));
    let max_hl_on_b = on_b
        .iter()
        .map(|&k| hl.values.values()[k].re)
        .fold(0.0, f64::max);
    let report = GoodSetReport {
        lambda,
        n_bound,
        threshold: t,
        h_measure: h.normalized_measure(),
        j_measure: j.normalized_measure(),
        g_complement_measure: g.complement().normalized_measure(),
        defect: b.complement().normalized_measure(),
        tail_f: (-n_bound * consts.delta0).exp() * consts.c0,
        tail_h: t,
        max_hl_on_b,
        bound_exact,
        weak_type_ok: j.measure() <= 3.0 * h.measure() * (lambda * consts.delta1).exp(),
    };
    Ok(GoodSet {
        lambda,
        b,
        j,
        report,
    })
}

/// Log-linear fit of level-set measure against `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub lambdas: Vec<f64>,
    /// `ln |{h > λ}|` (arc length) at the fitted levels.
    pub log_measures: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Some requested levels had empty level sets and were left out.
    pub truncated: bool,
}

impl TailFit {
    pub fn delta0(&self) -> f64 {
        -self.slope
    }

    pub fn c0(&self) -> f64 {
        self.intercept.exp()
    }
}

pub const MIN_FIT_POINTS: usize = 4;

pub fn jn_distribution(f_sharp: &BoundaryFn, lambda_grid: &[f64]) -> Result<TailFit> {
    if lambda_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("lambda_grid", "must be increasing"));
    }
    let mut lambdas = Vec::new();
    let mut logs = Vec::new();
    for &l in lambda_grid {
        let m = level_set(f_sharp, l)?.measure();
        if m > 0.0 {
            lambdas.push(l);
            logs.push(m.ln());
        }
    }
    if lambdas.len() < MIN_FIT_POINTS {
        return Err(Error::Insufficient(format!(
            "{} of {} levels have nonempty level sets; need {MIN_FIT_POINTS}",
            lambdas.len(),
            lambda_grid.len()
        )));
    }
    let (slope, intercept, r2) = linear_fit(&lambdas, &logs);
    Ok(TailFit {
        truncated: lambdas.len() < lambda_grid.len(),
        lambdas,
        log_measures: logs,
        slope,
        intercept,
        r2,
    })
}

/// Oscillation tails of the conjugate function over dyadic arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub lambdas: Vec<f64>,
    /// `sup_I |{θ ∈ I : |ũ - ũ_I| > λ}| / |I|` over aligned dyadic arcs.
    pub tails: Vec<f64>,
    pub max_oscillation: f64,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// `-slope` when a fit exists.
    pub exponent: Option<f64>,
    /// Tails vanish beyond the largest oscillation.
    pub bounded: bool,
    pub note: String,
}

pub fn jn_oscillation(u: &BoundaryFn, lambdas: &[f64]) -> Result<OscillationReport> {
    let ut = hilbert_transform(u)?.re();
    let n = ut.len();
    let mut arcs: Vec<Vec<f64>> = Vec::new();
    let mut len = n;
    while len >= 8.min(n) {
        for start in (0..n).step_by(len) {
            let s = &ut[start..start + len];
            let mean = s.iter().sum::<f64>() / len as f64;
            arcs.push(s.iter().map(|v| (v - mean).abs()).collect());
        }
        if len == 8 {
            break;
        }
        len /= 2;
    }
    let max_oscillation = arcs.iter().flatten().copied().fold(0.0, f64::max);
    let tails: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            arcs.iter()
                .map(|a| a.iter().filter(|&&d| d > l).count() as f64 / a.len() as f64)
                .fold(0.0, f64::max)
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = lambdas
        .iter()
        .zip(&tails)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&l, &t)| (l, t.ln()))
        .unzip();
    let bounded = tails.contains(&0.0);
    let (slope, intercept, r2) = if xs.len() >= 2 {
        let (s, b, r) = linear_fit(&xs, &ys);
        (Some(s), Some(b), Some(r))
    } else {
        (None, None, None)
    };
    Ok(OscillationReport {
        lambdas: lambdas.to_vec(),
        tails,
        max_oscillation,
        slope,
        intercept,
        r2,
        exponent: slope.map(|s| -s),
        bounded,
        note:
            "necessary-condition diagnostic only: exponential oscillation tails of the conjugate \
               function do not by themselves establish distance zero to Re H-infinity"
                .into(),
    })
}
