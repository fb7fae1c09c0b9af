//! Monte Carlo engine for complex Brownian motion in the unit disk.
//!
//! A path is an Euler–Maruyama walk `z_{k+1} = z_k + √dt (ξ₁ + iξ₂)` started
//! at `start` and stopped at `σ_r`, the first step with `|z| ≥ r_exit`; the
//! exit point is projected radially onto `|z| = r_exit`. Along the way the
//! walk tracks `F(z_k)` for an analytic `F`: its running maximum `F*`, and the
//! first entry into `{|F| > λ}` (the stopping time `τ`) for each requested
//! level `λ`.
//!
//! Randomness is counter based: path `i` draws from the ChaCha8 stream `i` of
//! the configured seed, so a path's increments never depend on which worker
//! simulated it or in which order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, mean_and_stderr, pairwise_sum};
use crate::spectral::{poisson_kernel_unit, AnalyticFn, BoundaryFn, CircleGrid};

/// Largest admissible fraction of paths that may hit `max_steps`.
pub const MAX_DISCARD_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub r_exit: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub max_steps: u64,
    /// Worker threads (0 = rayon default). Never affects results, so it is
    /// left out of serialized reports.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            r_exit: 1.0 - 1.0 / 1024.0,
            seed: 0,
            n_paths: 20_000,
            max_steps: 10_000_000,
            workers: 0,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::param("dt", format!("{} not in (0, 1e-3]", self.dt)));
        }
        let r_hi = 1.0 - 1.0 / 4096.0;
        if !(self.r_exit >= 0.9 && self.r_exit <= r_hi) {
            return Err(Error::param(
                "r_exit",
                format!("{} not in [0.9, 1 - 2^-12]", self.r_exit),
            ));
        }
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be positive"));
        }
        Ok(())
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct WalkEnd {
    point: Complex64,
    steps: u64,
    stopped: bool,
}

/// Core walk. `visit` sees the start, every interior step and the projected
/// exit point; returning `true` stops the walk at that point.
fn walk(
    start: Complex64,
    cfg: &PathConfig,
    index: u64,
    mut visit: impl FnMut(Complex64) -> bool,
) -> Result<WalkEnd> {
    let mut rng = path_rng(cfg.seed, index);
    let sd = cfg.dt.sqrt();
    let r2 = cfg.r_exit * cfg.r_exit;
    let mut z = start;
    if visit(z) {
        return Ok(WalkEnd {
            point: z,
            steps: 0,
            stopped: true,
        });
    }
    let mut steps = 0u64;
    loop {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        z += Complex64::new(sd * dx, sd * dy);
        steps += 1;
        if z.norm_sqr() >= r2 {
            z *= cfg.r_exit / z.norm();
            let stopped = visit(z);
            return Ok(WalkEnd {
                point: z,
                steps,
                stopped,
            });
        }
        if visit(z) {
            return Ok(WalkEnd {
                point: z,
                steps,
                stopped: true,
            });
        }
        if steps >= cfg.max_steps {
            return Err(Error::MaxSteps {
                index,
                max_steps: cfg.max_steps,
            });
        }
    }
}

fn check_start(start: Complex64, cfg: &PathConfig) -> Result<()> {
    if start.norm() >= cfg.r_exit {
        return Err(Error::Domain {
            modulus: start.norm(),
            limit: cfg.r_exit,
        });
    }
    Ok(())
}

/// First entry of the path into `{|F| > λ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: Complex64,
    pub value: Complex64,
}

/// One path tracked against an increasing ladder of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPath {
    pub exit_point: Complex64,
    pub terminal_value: Complex64,
    pub f_star: f64,
    pub steps: u64,
    /// `crossings[i]` is the first entry above `levels[i]`; only levels the
    /// path actually exceeded are present.
    pub crossings: Vec<Crossing>,
}

fn simulate_ladder(
    ev: &crate::spectral::SeriesEvaluator<'_>,
    levels: &[f64],
    start: Complex64,
    cfg: &PathConfig,
    index: u64,
) -> Result<LadderPath> {
    let mut f_star: f64 = 0.0;
    let mut last = Complex64::new(0.0, 0.0);
    let mut crossings = Vec::new();
    let end = walk(start, cfg, index, |z| {
        let v = ev.eval(z);
        let m = v.norm();
        last = v;
        if m > f_star {
            f_star = m;
            while crossings.len() < levels.len() && m > levels[crossings.len()] {
                crossings.push(Crossing { point: z, value: v });
            }
        }
        false
    })?;
    Ok(LadderPath {
        exit_point: end.point,
        terminal_value: last,
        f_star,
        steps: end.steps,
        crossings,
    })
}

/// Outcome of one simulated path for a single level `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub exit_point: Complex64,
    /// `F(z_{σ_r ∧ τ})`, keeping the discrete overshoot past `λ`.
    pub stopped_value: Complex64,
    pub terminal_value: Complex64,
    pub tau_fired: bool,
    pub f_star: f64,
    /// `z_τ` when `τ < σ_r`.
    pub tau_point: Option<Complex64>,
    pub steps: u64,
}

impl LadderPath {
    /// Projection onto level `level_index` (`None` = unstopped, `λ = ∞`).
    pub fn sample(&self, level_index: Option<usize>) -> PathSample {
        let crossing = level_index.and_then(|i| self.crossings.get(i));
        PathSample {
            exit_point: self.exit_point,
            stopped_value: crossing.map_or(self.terminal_value, |c| c.value),
            terminal_value: self.terminal_value,
            tau_fired: crossing.is_some(),
            f_star: self.f_star,
            tau_point: crossing.map(|c| c.point),
            steps: self.steps,
        }
    }
}

/// Paths for a ladder of levels, all driven by the same increments.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub levels: Vec<f64>,
    pub start: Complex64,
    pub cfg: PathConfig,
    pub paths: Vec<LadderPath>,
    pub discarded: usize,
}

impl PathEnsemble {
    /// Samples for `levels[i]`.
    pub fn at_level(&self, i: usize) -> SampleSet {
        SampleSet {
            lambda: self.levels[i],
            cfg: self.cfg.clone(),
            samples: self.paths.iter().map(|p| p.sample(Some(i))).collect(),
            discarded: self.discarded,
        }
    }

    /// Samples with `λ = ∞` (τ never fires).
    pub fn unstopped(&self) -> SampleSet {
        SampleSet {
            lambda: f64::INFINITY,
            cfg: self.cfg.clone(),
            samples: self.paths.iter().map(|p| p.sample(None)).collect(),
            discarded: self.discarded,
        }
    }

    pub fn discarded_fraction(&self) -> f64 {
        self.discarded as f64 / self.cfg.n_paths as f64
    }
}

/// Simulates `cfg.n_paths` paths of `F(z_t)` against the increasing `levels`.
pub fn simulate_ensemble(
    f: &AnalyticFn,
    levels: &[f64],
    start: Complex64,
    cfg: &PathConfig,
) -> Result<PathEnsemble> {
    cfg.validate()?;
    check_start(start, cfg)?;
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels.iter().any(|l| l.is_nan()) {
        return Err(Error::param("levels", "must be strictly increasing"));
    }
    let ev = f.evaluator();
    let results = map_indexed(cfg.n_paths, cfg.workers, |i| {
        simulate_ladder(&ev, levels, start, cfg, i as u64)
    });
    let mut paths = Vec::with_capacity(results.len());
    let mut discarded = 0;
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(Error::MaxSteps { .. }) => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    if discarded as f64 >= MAX_DISCARD_FRACTION * cfg.n_paths as f64 && discarded > 0 {
        return Err(Error::TooManyDiscarded {
            discarded,
            total: cfg.n_paths,
        });
    }
    Ok(PathEnsemble {
        levels: levels.to_vec(),
        start,
        cfg: cfg.clone(),
        paths,
        discarded,
    })
}

/// One path for a single `λ` (`f64::INFINITY` disables τ).
pub fn simulate_path(
    f: &AnalyticFn,
    lambda: f64,
    start: Complex64,
    cfg: &PathConfig,
    path_index: u64,
) -> Result<PathSample> {
    cfg.validate()?;
    check_start(start, cfg)?;
    let levels: &[f64] = if lambda.is_finite() { &[lambda] } else { &[] };
    let ev = f.evaluator();
    let p = simulate_ladder(&ev, levels, start, cfg, path_index)?;
    Ok(p.sample(if lambda.is_finite() { Some(0) } else { None }))
}

/// Samples from one `(F, λ, cfg)` triple.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub lambda: f64,
    pub cfg: PathConfig,
    pub samples: Vec<PathSample>,
    pub discarded: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fired_fraction(&self) -> f64 {
        self.samples.iter().filter(|s| s.tau_fired).count() as f64 / self.len().max(1) as f64
    }

    /// Distribution of `|F(z_τ)| - λ` over fired paths: (mean, max).
    pub fn overshoot(&self) -> (f64, f64) {
        let over: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.tau_fired)
            .map(|s| s.stopped_value.norm() - self.lambda)
            .collect();
        if over.is_empty() {
            return (0.0, 0.0);
        }
        (
            pairwise_sum(&over) / over.len() as f64,
            over.iter().copied().fold(0.0, f64::max),
        )
    }

    pub fn mean_exit_time(&self) -> (f64, f64) {
        let t: Vec<f64> = self
            .samples
            .iter()
            .map(|s| s.steps as f64 * self.cfg.dt)
            .collect();
        mean_and_stderr(&t)
    }
}

/// Grid estimate with pointwise standard errors.
#[derive(Debug, Clone)]
pub struct ProjectionEstimate {
    pub values: BoundaryFn,
    pub std_error: Vec<f64>,
}

fn complex_mean_stderr(xs: &[Complex64]) -> (Complex64, f64) {
    let re: Vec<f64> = xs.iter().map(|x| x.re).collect();
    let im: Vec<f64> = xs.iter().map(|x| x.im).collect();
    let (mr, sr) = mean_and_stderr(&re);
    let (mi, si) = mean_and_stderr(&im);
    (Complex64::new(mr, mi), sr.hypot(si))
}

/// Monte Carlo projection `N`: `(1/n_paths) Σ value · P_θ(exit_point)` at
/// every grid angle, with `value` the stopped or terminal value.
pub fn estimate_projection(
    samples: &SampleSet,
    grid: CircleGrid,
    use_stopped: bool,
) -> Result<ProjectionEstimate> {
    if samples.is_empty() {
        return Err(Error::Insufficient("empty sample set".into()));
    }
    let units = grid.unit_points();
    let rows = map_indexed(grid.n(), samples.cfg.workers, |j| {
        let w = units[j];
        let xs: Vec<Complex64> = samples
            .samples
            .iter()
            .map(|s| {
                let v = if use_stopped {
                    s.stopped_value
                } else {
                    s.terminal_value
                };
                v * poisson_kernel_unit(w, s.exit_point)
            })
            .collect();
        complex_mean_stderr(&xs)
    });
    let (values, std_error): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(ProjectionEstimate {
        values: BoundaryFn::complex(grid, values)?,
        std_error,
    })
}

/// Which value of `F` a fired path contributes after τ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopValue {
    /// `F(z_τ)` as sampled, including the discrete overshoot past `λ`.
    Overshoot,
    /// `λ F(z_τ) / |F(z_τ)|`: the point where a continuous path meets `|F| = λ`.
    LevelSet,
}

/// Projection of the stopped martingale computed through the strong Markov
/// property at τ.
///
/// With `β(θ) = E[1{τ<σ} P_θ(z_τ)]` (the sweep of harmonic measure on
/// `∂E_λ`) and `γ(θ) = E[1{τ<σ} G_τ P_θ(z_τ)]`, the projection is
/// `N(G) = (1 - β) f + γ`. On `{|f| > λ}` every path exiting there has
/// fired, so `β = 1` is imposed; elsewhere `β` is clipped to `[0, 1]`. The
/// result is `(1 - b) f + b m` with `m = γ/β`, a convex combination whose
/// modulus never exceeds `max(λ, |f|)` off `{|f| > λ}`.
#[derive(Debug, Clone)]
pub struct SweptProjection {
    pub values: BoundaryFn,
    /// Raw sweep estimate `β̂(θ_j)`.
    pub balayage: Vec<f64>,
    /// Standard error of the estimate of `N(G) - f` at each grid point.
    pub std_error: Vec<f64>,
    /// Grid points with `|f| > λ`, where `β = 1` was imposed.
    pub forced: usize,
    /// Forced points with no sampled entry at all (fallback `λ f/|f|`).
    pub fallback: usize,
}

pub fn sweep_projection(
    samples: &SampleSet,
    trace: &BoundaryFn,
    stop_value: StopValue,
) -> Result<SweptProjection> {
    if samples.is_empty() {
        return Err(Error::Insufficient("empty sample set".into()));
    }
    let lambda = samples.lambda;
    let grid = trace.grid();
    let n_paths = samples.len() as f64;
    let fired: Vec<(Complex64, Complex64)> = samples
        .samples
        .iter()
        .filter_map(|s| {
            let z = s.tau_point?;
            let g = match stop_value {
                StopValue::Overshoot => s.stopped_value,
                StopValue::LevelSet => s.stopped_value * (lambda / s.stopped_value.norm()),
            };
            Some((z, g))
        })
        .collect();
    let units = grid.unit_points();
    let f = trace.values();
    let rows = map_indexed(grid.n(), samples.cfg.workers, |j| {
        let w = units[j];
        let fj = f[j];
        let mut beta = Vec::with_capacity(fired.len());
        let mut gamma = Vec::with_capacity(fired.len());
        let mut diff_sq = Vec::with_capacity(fired.len());
        for &(z, g) in &fired {
            let p = poisson_kernel_unit(w, z);
            beta.push(p);
            gamma.push(g * p);
            diff_sq.push(((g - fj) * p).norm_sqr());
        }
        let b = pairwise_sum(&beta) / n_paths;
        let gr: Vec<f64> = gamma.iter().map(|c| c.re).collect();
        let gi: Vec<f64> = gamma.iter().map(|c| c.im).collect();
        let gm = Complex64::new(pairwise_sum(&gr), pairwise_sum(&gi)) / n_paths;
        // variance of X = 1{fired} (G - f_j) P over all paths, zeros included
        let mean_x = gm - fj * b;
        let var = if n_paths > 1.0 {
            ((pairwise_sum(&diff_sq) - n_paths * mean_x.norm_sqr()) / (n_paths - 1.0)).max(0.0)
        } else {
            0.0
        };
        (b, gm, (var / n_paths).sqrt())
    });

    let mut values = Vec::with_capacity(grid.n());
    let mut balayage = Vec::with_capacity(grid.n());
    let mut std_error = Vec::with_capacity(grid.n());
    let (mut forced, mut fallback) = (0, 0);
    for (j, (b, gm, se)) in rows.into_iter().enumerate() {
        let fj = f[j];
        let inside = fj.norm() > lambda;
        let weight = if inside {
            forced += 1;
            1.0
        } else {
            b.clamp(0.0, 1.0)
        };
        let m = if b > 0.0 {
            gm / b
        } else if inside {
            fallback += 1;
            fj * (lambda / fj.norm())
        } else {
            Complex64::new(0.0, 0.0)
        };
        values.push(fj * (1.0 - weight) + m * weight);
        balayage.push(b);
        std_error.push(se);
    }
    Ok(SweptProjection {
        values: BoundaryFn::complex(grid, values)?,
        balayage,
        std_error,
        forced,
        fallback,
    })
}

/// Value in `[0, 1]` with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Set when no path ever registered the event.
    pub degenerate: bool,
}

impl MeasureEstimate {
    fn from_indicators(hits: &[f64]) -> Self {
        let (value, std_error) = mean_and_stderr(hits);
        Self {
            value,
            std_error,
            n_samples: hits.len(),
            degenerate: value == 0.0,
        }
    }
}

/// `ω(A)`: probability that the walk visits `A` before `σ_r`.
pub fn harmonic_measure(
    set: &(dyn Fn(Complex64) -> bool + Sync),
    start: Complex64,
    cfg: &PathConfig,
) -> Result<MeasureEstimate> {
    cfg.validate()?;
    check_start(start, cfg)?;
    let hits = map_indexed(cfg.n_paths, cfg.workers, |i| {
        walk(start, cfg, i as u64, set).map(|end| if end.stopped { 1.0 } else { 0.0 })
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(MeasureEstimate::from_indicators(&hits))
}

/// Normalized harmonic measure of the arc `[a, b]` seen from `start`, by
/// composite Simpson quadrature of the Poisson kernel.
pub fn poisson_arc_measure(start: Complex64, a: f64, b: f64) -> f64 {
    let len = b - a;
    if len >= 2.0 * PI {
        return 1.0;
    }
    let m = 1 << 14;
    let h = len / m as f64;
    let p = |t: f64| poisson_kernel_unit(Complex64::from_polar(1.0, t), start);
    let mut s = p(a) + p(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * p(a + k as f64 * h);
    }
    s * h / 3.0 / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitLawReport {
    pub empirical: MeasureEstimate,
    pub poisson: f64,
}

impl ExitLawReport {
    pub fn within(&self, n_se: f64) -> bool {
        (self.empirical.value - self.poisson).abs() <= n_se * self.empirical.std_error.max(1e-300)
            || self.empirical.value == self.poisson
    }
}

/// Fraction of exit points whose angle lies in `[a, b]`, against the Poisson
/// integral over the same arc.
pub fn exit_law_check(
    samples: &SampleSet,
    a: f64,
    b: f64,
    start: Complex64,
) -> Result<ExitLawReport> {
    if b <= a {
        return Err(Error::param("arc", "need a < b"));
    }
    let full = b - a >= 2.0 * PI;
    let hits: Vec<f64> = samples
        .samples
        .iter()
        .map(|s| {
            let t = (s.exit_point.arg() - a).rem_euclid(2.0 * PI);
            if full || t <= b - a {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(ExitLawReport {
        empirical: MeasureEstimate::from_indicators(&hits),
        poisson: poisson_arc_measure(start, a, b),
    })
}

/// Point estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Sweep of harmonic measure on `∂E_λ` seen from `e^{iθ}`:
/// `E[1{τ < σ} P_θ(z_τ)]` with the walk started at the origin.
pub fn balayage(f: &AnalyticFn, lambda: f64, theta: f64, cfg: &PathConfig) -> Result<Estimate> {
    cfg.validate()?;
    let origin = Complex64::new(0.0, 0.0);
    if !(lambda > f.value_at_origin().norm()) {
        return Err(Error::param("lambda", "must exceed |F(0)|"));
    }
    let ev = f.evaluator();
    let w = Complex64::from_polar(1.0, theta);
    let xs = map_indexed(cfg.n_paths, cfg.workers, |i| {
        let end = walk(origin, cfg, i as u64, |z| ev.eval(z).norm() > lambda)?;
        Ok(if end.stopped {
            poisson_kernel_unit(w, end.point)
        } else {
            0.0
        })
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let (value, std_error) = mean_and_stderr(&xs);
    Ok(Estimate { value, std_error })
}

/// Sweep profile `β̂(θ_j)` and its standard errors from existing samples.
pub fn balayage_profile(samples: &SampleSet, grid: CircleGrid) -> (Vec<f64>, Vec<f64>) {
    let units = grid.unit_points();
    map_indexed(grid.n(), samples.cfg.workers, |j| {
        let xs: Vec<f64> = samples
            .samples
            .iter()
            .map(|s| {
                s.tau_point
                    .map_or(0.0, |z| poisson_kernel_unit(units[j], z))
            })
            .collect();
        mean_and_stderr(&xs)
    })
    .into_iter()
    .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub lambda: f64,
    /// Empirical `‖F - G‖₁ = E|F(z_σ) - G|`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// `2 E[1{F* > λ} |F(z_σ)|]`.
    pub rhs: f64,
    pub rhs_se: f64,
    pub combined_se: f64,
    pub holds: bool,
    /// `(λ', P(F* > λ'))` over the requested ladder.
    pub tail: Vec<(f64, f64)>,
}

/// Checks `‖F - G‖₁ ≤ 2 ∫_{F* > λ} |F| dP` on the samples.
pub fn tail_bound_check(samples: &SampleSet, tail_levels: &[f64]) -> TailReport {
    let lambda = samples.lambda;
    let diff: Vec<f64> = samples
        .samples
        .iter()
        .map(|s| (s.terminal_value - s.stopped_value).norm())
        .collect();
    let mass: Vec<f64> = samples
        .samples
        .iter()
        .map(|s| {
            if s.f_star > lambda {
                2.0 * s.terminal_value.norm()
            } else {
                0.0
            }
        })
        .collect();
    let (lhs, lhs_se) = mean_and_stderr(&diff);
    let (rhs, rhs_se) = mean_and_stderr(&mass);
    let combined_se = lhs_se.hypot(rhs_se);
    let n = samples.len().max(1) as f64;
    let tail = tail_levels
        .iter()
        .map(|&l| {
            let c = samples.samples.iter().filter(|s| s.f_star > l).count();
            (l, c as f64 / n)
        })
        .collect();
    TailReport {
        lambda,
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        combined_se,
        holds: lhs <= rhs + 3.0 * combined_se,
        tail,
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`, with `r²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, intercept, r2)
}

/// Fitted constants for the tail bound.
///
/// `rhs(λ) = 2 E[1{F* > λ} |F(z_σ)|]` bounds `‖F - G‖₁`; a log-linear fit
/// gives the decay rate `c1`, and `c2` is the smallest prefactor for which
/// `2π · rhs(λ) ≤ c2 e^{-c1 λ}` at every fitted level (arc-length units, so
/// `|𝕋 ∖ E| ≤ (1/ε) c2 e^{-c1 λ}` by Chebyshev).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCalibration {
    pub lambdas: Vec<f64>,
    pub rhs: Vec<f64>,
    pub tail_prob: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub r2: f64,
    /// Decay rate of `P(F* > λ)` itself.
    pub prob_rate: f64,
}

pub fn calibrate_tail(samples: &SampleSet, lambdas: &[f64]) -> Result<TailCalibration> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rhs_all = Vec::new();
    let mut prob_all = Vec::new();
    let mut px = Vec::new();
    let mut py = Vec::new();
    for &l in lambdas {
        let n = samples.len() as f64;
        let mass: Vec<f64> = samples
            .samples
            .iter()
            .map(|s| {
                if s.f_star > l {
                    2.0 * s.terminal_value.norm()
                } else {
                    0.0
                }
            })
            .collect();
        let rhs = pairwise_sum(&mass) / n;
        let prob = samples.samples.iter().filter(|s| s.f_star > l).count() as f64 / n;
        rhs_all.push(rhs);
        prob_all.push(prob);
        if rhs > 0.0 {
            xs.push(l);
            ys.push(rhs.ln());
        }
        if prob > 0.0 {
            px.push(l);
            py.push(prob.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Insufficient(format!(
            "only {} tail levels with F* above them",
            xs.len()
        )));
    }
    let (slope, _, r2) = linear_fit(&xs, &ys);
    if !(slope < 0.0) {
        return Err(Error::Insufficient("tail does not decay".into()));
    }
    let c1 = -slope;
    let c2 = xs
        .iter()
        .zip(&ys)
        .map(|(l, y)| 2.0 * PI * (y + c1 * l).exp())
        .fold(0.0, f64::max);
    let prob_rate = if px.len() >= 2 {
        -linear_fit(&px, &py).0
    } else {
        f64::NAN
    };
    Ok(TailCalibration {
        lambdas: lambdas.to_vec(),
        rhs: rhs_all,
        tail_prob: prob_all,
        c1,
        c2,
        r2,
        prob_rate,
    })
}
