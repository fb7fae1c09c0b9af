//! The correction iteration: truncation `T_δ`, the single bounded-analytic
//! correction step, the `λ_n` schedule and the full iteration producing `g`
//! with `u₀ = Re g` (up to the final residual) on a set `E` of large measure.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::martingale::{
    calibrate_tail, simulate_ensemble, sweep_projection, tail_bound_check, PathConfig, SampleSet,
    StopValue, TailCalibration, TailReport,
};
use crate::maximal::{
    hardy_littlewood, jn_distribution, level_set, nontangential_max, DiskGrid, GridMask,
    StepEvidence, TailFit,
};
use crate::spectral::{
    analytic_completion, completion_trace, riesz_project, AnalyticFn, BoundaryFn, CircleGrid,
    Spectrum,
};

/// Empirical stand-ins for the constants the existence proofs leave open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub c0: f64,
    pub c_bgs: f64,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0, 1.0)
    }
}

impl CalibrationConstants {
    /// Sets `δ₁ = δ₀/2` and `c₃ = δ₁`.
    pub fn new(c1: f64, c2: f64, delta0: f64, c0: f64, c_bgs: f64) -> Self {
        let delta1 = delta0 / 2.0;
        Self {
            c1,
            c2,
            c3: delta1,
            delta0,
            delta1,
            c0,
            c_bgs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c1,
            self.c2,
            self.c3,
            self.delta0,
            self.delta1,
            self.c0,
            self.c_bgs,
        ];
        if all.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::param("constants", "all must be positive and finite"));
        }
        if self.delta1 != self.delta0 / 2.0 {
            return Err(Error::param("delta1", "must equal delta0 / 2"));
        }
        Ok(())
    }
}

/// `T_δ`: values with `|h| ≤ δ` pass through, larger ones are clamped
/// radially to modulus `δ`.
pub fn truncate(h: &BoundaryFn, delta: f64) -> Result<BoundaryFn> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be positive"));
    }
    if h.is_real() {
        let v = h
            .re()
            .into_iter()
            .map(|x| {
                if x.abs() <= delta {
                    x
                } else {
                    delta.copysign(x)
                }
            })
            .collect();
        return Ok(BoundaryFn::from_values_real(h.grid(), v));
    }
    let v = h
        .values()
        .iter()
        .map(|&w| {
            if w.norm() <= delta {
                return w;
            }
            let mut c = w * (delta / w.norm());
            while c.norm() > delta {
                c *= 1.0 - f64::EPSILON;
            }
            c
        })
        .collect();
    Ok(BoundaryFn::from_values_complex(h.grid(), v))
}

/// Levels `λ_0..λ_{n_max}` with `e^{-λ_n c₁} c₂ 2ⁿ = (ε/4) 2^{-n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eps: f64,
    pub c1: f64,
    pub c2: f64,
    pub n_max: usize,
    pub lambdas: Vec<f64>,
    /// `Σ_{n ≥ 0} e^{-λ_n c₁} c₂ 2ⁿ`: stored terms plus the geometric tail.
    pub series_sum: f64,
    /// `Σ_{n ≥ 0} λ_n 2^{-n}`, likewise closed.
    pub lambda_weighted_sum: f64,
}

impl Schedule {
    pub fn lambda(&self, n: usize) -> f64 {
        (n as f64 * 4f64.ln() + (4.0 * self.c2 / self.eps).ln()) / self.c1
    }
}

pub fn make_schedule(eps: f64, consts: &CalibrationConstants, n_max: usize) -> Result<Schedule> {
    if !(eps > 0.0 && eps < 2.0 * PI) {
        return Err(Error::param("eps", format!("{eps} not in (0, 2π)")));
    }
    if !(consts.c1 > 0.0 && consts.c2 > 0.0) {
        return Err(Error::param("constants", "c1 and c2 must be positive"));
    }
    let (c1, c2) = (consts.c1, consts.c2);
    let mut s = Schedule {
        eps,
        c1,
        c2,
        n_max,
        lambdas: Vec::new(),
        series_sum: 0.0,
        lambda_weighted_sum: 0.0,
    };
    s.lambdas = (0..=n_max).map(|n| s.lambda(n)).collect();
    let terms: Vec<f64> = s
        .lambdas
        .iter()
        .enumerate()
        .map(|(n, l)| (-l * c1).exp() * c2 * 2f64.powi(n as i32))
        .collect();
    let tail = eps / 4.0 * 0.5f64.powi(n_max as i32);
    s.series_sum = terms.iter().sum::<f64>() + tail;
    // λ_n = a n + b, so Σ_{n > N} λ_n 2^{-n} = (a (N + 2) + b) 2^{-N}
    let a = 2.0 * LN_2 / c1;
    let b = (4.0 * c2 / eps).ln() / c1;
    let head: f64 = s
        .lambdas
        .iter()
        .enumerate()
        .map(|(n, l)| l * 0.5f64.powi(n as i32))
        .sum();
    s.lambda_weighted_sum = head + (a * (n_max as f64 + 2.0) + b) * 0.5f64.powi(n_max as i32);
    Ok(s)
}

/// Radial clamp of `h` onto `|w| ≤ bound`, alternated with the Riesz
/// projection until the analytic trace fits within `bound·(1 + slack)`.
pub fn bounded_riesz_project(
    h: &BoundaryFn,
    bound: f64,
    slack: f64,
    max_iter: usize,
) -> (AnalyticFn, usize) {
    let grid = h.grid();
    let mut g = riesz_project(h);
    for it in 0..max_iter {
        let t = g.trace(grid);
        if t.sup_norm() <= bound * (1.0 + slack) {
            return (g, it);
        }
        let clamped = truncate(&t, bound).expect("positive bound");
        g = riesz_project(&clamped);
    }
    (g, max_iter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Options {
    pub stop_value: StopValue,
    /// Target slack for the analytic projection's sup norm.
    pub sup_slack: f64,
    pub max_projection_iters: usize,
    /// `sup |g| ≤ λ (1 + sup_tol)` is asserted.
    pub sup_tol: f64,
}

impl Default for Lemma2Options {
    fn default() -> Self {
        Self {
            stop_value: StopValue::LevelSet,
            sup_slack: 0.01,
            max_projection_iters: 500,
            sup_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Diagnostics {
    pub lambda: f64,
    pub eps_step: f64,
    /// `false` when the level is out of reach of `|F|` and no paths were run.
    pub simulated: bool,
    /// Max of `|g|` over the disk grid (boundary included).
    pub sup_g: f64,
    /// Sup of the swept projection before the analytic projection.
    pub sup_raw: f64,
    /// `|𝕋 ∖ E| / 2π`.
    pub defect: f64,
    /// `(1/2π) ∫ |f - g|`.
    pub l1_diff: f64,
    pub chebyshev_bound: f64,
    pub fired_fraction: f64,
    pub overshoot_mean: f64,
    pub overshoot_max: f64,
    pub forced_points: usize,
    pub fallback_points: usize,
    pub max_std_error: f64,
    pub projection_iters: usize,
    pub discarded_paths: usize,
    pub tail: TailReport,
}

#[derive(Debug, Clone)]
pub struct Lemma2Outcome {
    pub g: AnalyticFn,
    pub g_trace: BoundaryFn,
    pub e: GridMask,
    pub diagnostics: Lemma2Diagnostics,
    pub evidence: StepEvidence,
}

fn disk_sup(g: &AnalyticFn, grid: CircleGrid) -> f64 {
    let disk = DiskGrid::ladder(grid, 10).expect("ladder radii are valid");
    disk.radii
        .iter()
        .map(|&r| g.sup_on_ring(grid, r))
        .fold(g.trace(grid).sup_norm(), f64::max)
}

/// Monte Carlo input to one step; `None` when `τ` provably cannot fire.
struct StepSamples<'a> {
    lambda: f64,
    n_paths: usize,
    samples: Option<&'a SampleSet>,
}

fn lemma2_from_samples(
    trace: &BoundaryFn,
    input: StepSamples<'_>,
    eps_step: f64,
    opts: &Lemma2Options,
) -> Result<Lemma2Outcome> {
    let lambda = input.lambda;
    let grid = trace.grid();
    let (values, std_error, forced, fallback) = match input.samples {
        Some(samples) => {
            let sw = sweep_projection(samples, trace, opts.stop_value)?;
            (sw.values, sw.std_error, sw.forced, sw.fallback)
        }
        None => (trace.clone(), vec![0.0; grid.n()], 0, 0),
    };
    let (g, iters) =
        bounded_riesz_project(&values, lambda, opts.sup_slack, opts.max_projection_iters);
    let g_trace = g.trace(grid);
    let diff: Vec<f64> = trace
        .values()
        .iter()
        .zip(g_trace.values())
        .map(|(a, b)| (a - b).norm())
        .collect();
    let e = GridMask::from_predicate(grid, |j| diff[j] <= eps_step);
    let defect = e.complement().normalized_measure();
    let l1_diff = crate::par::pairwise_sum(&diff) / grid.n() as f64;
    let (overshoot_mean, overshoot_max) = input.samples.map_or((0.0, 0.0), |s| s.overshoot());
    let tail = match input.samples {
        Some(s) => tail_bound_check(s, &[]),
        None => TailReport {
            lambda,
            lhs: 0.0,
            lhs_se: 0.0,
            rhs: 0.0,
            rhs_se: 0.0,
            combined_se: 0.0,
            holds: true,
            tail: Vec::new(),
        },
    };
    let diagnostics = Lemma2Diagnostics {
        lambda,
        eps_step,
        simulated: input.samples.is_some(),
        sup_g: disk_sup(&g, grid),
        sup_raw: values.sup_norm(),
        defect,
        l1_diff,
        chebyshev_bound: l1_diff / eps_step,
        fired_fraction: input.samples.map_or(0.0, |s| s.fired_fraction()),
        overshoot_mean,
        overshoot_max,
        forced_points: forced,
        fallback_points: fallback,
        max_std_error: std_error.iter().copied().fold(0.0, f64::max),
        projection_iters: iters,
        discarded_paths: input.samples.map_or(0, |s| s.discarded),
        tail,
    };
    if diagnostics.defect > diagnostics.chebyshev_bound * (1.0 + 1e-12) {
        return Err(Error::Internal(format!(
            "defect {} exceeds Chebyshev bound {}",
            diagnostics.defect, diagnostics.chebyshev_bound
        )));
    }
    if diagnostics.sup_g > lambda * (1.0 + opts.sup_tol) {
        return Err(Error::Bound(format!(
            "sup |g| = {} exceeds λ(1 + {}) with λ = {lambda}",
            diagnostics.sup_g, opts.sup_tol
        )));
    }
    let evidence = StepEvidence {
        std_error,
        tau_points: input
            .samples
            .map(|s| s.samples.iter().filter_map(|p| p.tau_point).collect())
            .unwrap_or_default(),
        n_paths: input.n_paths,
    };
    Ok(Lemma2Outcome {
        g,
        g_trace,
        e,
        diagnostics,
        evidence,
    })
}

/// `τ` cannot fire before `σ_r` and `{|f| > λ}` is empty, so the stopped
/// projection equals `f` exactly.
fn out_of_reach(f: &AnalyticFn, trace: &BoundaryFn, lambda: f64, r_exit: f64) -> bool {
    let mut rk = 1.0;
    let mut reach = 0.0;
    for c in f.coeffs() {
        reach += c.norm() * rk;
        rk *= r_exit;
    }
    reach <= lambda && trace.sup_norm() <= lambda
}

/// Bounded correction step from an existing sample set at level `samples.lambda`.
pub fn lemma2_from_sample_set(
    trace: &BoundaryFn,
    samples: &SampleSet,
    eps_step: f64,
    opts: &Lemma2Options,
) -> Result<Lemma2Outcome> {
    if !(eps_step > 0.0) {
        return Err(Error::param("eps_step", "must be positive"));
    }
    let input = StepSamples {
        lambda: samples.lambda,
        n_paths: samples.len(),
        samples: Some(samples),
    };
    lemma2_from_samples(trace, input, eps_step, opts)
}

fn check_level(f: &AnalyticFn, lambda: f64) -> Result<()> {
    if !(lambda > f.value_at_origin().norm()) {
        return Err(Error::param("lambda", "must exceed |F(0)|"));
    }
    Ok(())
}

/// One bounded correction: `‖g‖_∞ ≤ λ`, `|f - g| ≤ ε` on `E`.
pub fn lemma2_step(
    f: &AnalyticFn,
    grid: CircleGrid,
    lambda: f64,
    eps_step: f64,
    cfg: &PathConfig,
) -> Result<Lemma2Outcome> {
    lemma2_on_trace(
        f,
        &f.trace(grid),
        lambda,
        eps_step,
        cfg,
        &Lemma2Options::default(),
    )
}

/// As [`lemma2_step`], with `E` measured against the given boundary trace.
pub fn lemma2_on_trace(
    f: &AnalyticFn,
    trace: &BoundaryFn,
    lambda: f64,
    eps_step: f64,
    cfg: &PathConfig,
    opts: &Lemma2Options,
) -> Result<Lemma2Outcome> {
    Ok(lemma2_sweep(f, trace, &[lambda], eps_step, cfg, opts)?.remove(0))
}

/// Bounded correction steps for several levels driven by one batch of paths.
pub fn lemma2_sweep(
    f: &AnalyticFn,
    trace: &BoundaryFn,
    lambdas: &[f64],
    eps_step: f64,
    cfg: &PathConfig,
    opts: &Lemma2Options,
) -> Result<Vec<Lemma2Outcome>> {
    if !(eps_step > 0.0) {
        return Err(Error::param("eps_step", "must be positive"));
    }
    for &l in lambdas {
        check_level(f, l)?;
    }
    let live: Vec<f64> = lambdas
        .iter()
        .copied()
        .filter(|&l| !out_of_reach(f, trace, l, cfg.r_exit))
        .collect();
    let ens = if live.is_empty() {
        None
    } else {
        Some(simulate_ensemble(f, &live, Complex64::new(0.0, 0.0), cfg)?)
    };
    lambdas
        .iter()
        .map(|&l| {
            let idx = live.iter().position(|&x| x == l);
            let set = match (&ens, idx) {
                (Some(e), Some(i)) => Some(e.at_level(i)),
                _ => None,
            };
            let input = StepSamples {
                lambda: l,
                n_paths: cfg.n_paths,
                samples: set.as_ref(),
            };
            lemma2_from_samples(trace, input, eps_step, opts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub lambda_j: f64,
    /// Factor `2^j` applied to the residual before the step.
    pub scale: f64,
    pub seed: u64,
    /// `‖g_j‖_∞` over the disk grid.
    pub sup_g: f64,
    /// `λ_j 2^{-j}`.
    pub bound: f64,
    pub defect: f64,
    /// `max_{E_j} |u_{j-1} - Re g_j|`.
    pub sup_residual_on_e: f64,
    /// `‖u_j‖_∞` after truncation.
    pub residual_sup: f64,
    /// `T_{2^{-j}}` left `u_{j-1} - Re g_j` unchanged on `E_j`.
    pub truncation_identity_on_e: bool,
    pub diagnostics: Lemma2Diagnostics,
    #[serde(skip)]
    pub g: Option<AnalyticFn>,
    #[serde(skip)]
    pub e: Option<GridMask>,
}

#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub g: AnalyticFn,
    pub e: GridMask,
    pub steps: Vec<StepRecord>,
    /// `|𝕋 ∖ E| / 2π`.
    pub final_defect: f64,
    pub max_agreement_error: f64,
    /// `Σ_j |𝕋 ∖ E_j| / 2π`.
    pub summed_defects: f64,
    /// `u₀` was divided by this before iterating.
    pub input_scale: f64,
    pub eps: f64,
    pub stop_tol: f64,
    pub schedule: Schedule,
    pub cfg: PathConfig,
    pub consts: CalibrationConstants,
}

/// Failure inside the iteration, with the steps completed before it.
#[derive(Debug)]
pub struct CorrectionFailure {
    pub error: Error,
    pub completed: Vec<StepRecord>,
}

impl std::fmt::Display for CorrectionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {} failed: {}",
            self.completed.len() + 1,
            self.error
        )
    }
}

impl std::error::Error for CorrectionFailure {}

impl From<Error> for CorrectionFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            completed: Vec::new(),
        }
    }
}

/// Number of steps `N`: the least `N` with `2^{-N} < stop_tol`.
pub fn step_count(stop_tol: f64) -> usize {
    let mut n = 0;
    while 0.5f64.powi(n as i32) >= stop_tol {
        n += 1;
    }
    n
}

fn step_seed(seed: u64, j: usize) -> u64 {
    seed.wrapping_add(j as u64)
}

/// The full iteration.
///
/// Step `j` applies the bounded correction to `w = 2^j u_{j-1}` (so
/// `‖w‖_∞ ≤ 2`) at level `λ_j` with `ε = 1`, then scales back: `g_j` has
/// `‖g_j‖_∞ ≤ λ_j 2^{-j}` and `|u_{j-1} - Re g_j| ≤ 2^{-j}` on `E_j`. The
/// constants should therefore be calibrated on the doubled input.
pub fn correct(
    u0: &BoundaryFn,
    eps: f64,
    cfg: &PathConfig,
    consts: &CalibrationConstants,
    stop_tol: f64,
) -> std::result::Result<CorrectionResult, CorrectionFailure> {
    correct_with(u0, eps, cfg, consts, stop_tol, &Lemma2Options::default())
}

pub fn correct_with(
    u0: &BoundaryFn,
    eps: f64,
    cfg: &PathConfig,
    consts: &CalibrationConstants,
    stop_tol: f64,
    opts: &Lemma2Options,
) -> std::result::Result<CorrectionResult, CorrectionFailure> {
    if !u0.is_real() {
        return Err(Error::NotReal.into());
    }
    if !(stop_tol > 0.0 && stop_tol < 1.0) {
        return Err(Error::param("stop_tol", "must lie in (0, 1)").into());
    }
    cfg.validate()?;
    consts.validate()?;
    let n_steps = step_count(stop_tol);
    let schedule = make_schedule(eps, consts, n_steps)?;
    let grid = u0.grid();
    let input_scale = u0.sup_norm().max(1.0);
    let u_start = u0.scale(1.0 / input_scale);
    let mut u = u_start.clone();
    let mut g_sum = AnalyticFn::zero(grid.n() / 2 - 1);
    let mut e_all = GridMask::full(grid);
    let mut steps: Vec<StepRecord> = Vec::new();
    for j in 1..=n_steps {
        let scale = 2f64.powi(j as i32);
        let w = u.scale(scale);
        let fail = |error: Error, steps: &Vec<StepRecord>| CorrectionFailure {
            error,
            completed: steps.clone(),
        };
        let f = analytic_completion(&w).map_err(|e| fail(e, &steps))?;
        let trace = completion_trace(&w).map_err(|e| fail(e, &steps))?;
        let lambda_j = schedule.lambdas[j];
        let step_cfg = PathConfig {
            seed: step_seed(cfg.seed, j),
            ..cfg.clone()
        };
        let out = lemma2_on_trace(&f, &trace, lambda_j, 1.0, &step_cfg, opts)
            .map_err(|e| fail(e, &steps))?;
        let g_j = out.g.scale(1.0 / scale);
        let g_j_re = out.g_trace.scale(1.0 / scale).real_part();
        let diff = u.sub(&g_j_re).map_err(|e| fail(e, &steps))?;
        let delta = 1.0 / scale;
        let next = truncate(&diff, delta).map_err(|e| fail(e, &steps))?;
        let dv = diff.re();
        let nv = next.re();
        let on_e = out.e.indices();
        let truncation_identity_on_e = on_e.iter().all(|&k| dv[k] == nv[k]);
        let sup_residual_on_e = on_e.iter().map(|&k| dv[k].abs()).fold(0.0, f64::max);
        e_all = e_all.intersect(&out.e).map_err(|e| fail(e, &steps))?;
        g_sum = g_sum.add(&g_j);
        steps.push(StepRecord {
            index: j,
            lambda_j,
            scale,
            seed: step_cfg.seed,
            sup_g: out.diagnostics.sup_g / scale,
            bound: lambda_j / scale,
            defect: out.diagnostics.defect,
            sup_residual_on_e,
            residual_sup: next.sup_norm(),
            truncation_identity_on_e,
            diagnostics: out.diagnostics,
            g: Some(g_j),
            e: Some(out.e),
        });
        u = next;
    }
    let g = g_sum.scale(input_scale);
    let max_agreement_error = agreement_error(u0, &g, &e_all);
    Ok(CorrectionResult {
        final_defect: e_all.complement().normalized_measure(),
        summed_defects: steps.iter().map(|s| s.defect).sum(),
        max_agreement_error,
        g,
        e: e_all,
        steps,
        input_scale,
        eps,
        stop_tol,
        schedule,
        cfg: cfg.clone(),
        consts: consts.clone(),
    })
}

fn agreement_error(u0: &BoundaryFn, g: &AnalyticFn, e: &GridMask) -> f64 {
    let gr = g.trace(u0.grid()).re();
    let u = u0.re();
    e.indices()
        .iter()
        .map(|&k| (u[k] - gr[k]).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub max_agreement_error: f64,
    pub agreement_bound: f64,
    pub agreement_ok: bool,
    pub defect: f64,
    pub defect_bound: f64,
    pub defect_ok: bool,
    /// `|𝕋 ∖ ⋂E_j| ≤ Σ |𝕋 ∖ E_j|` on the stored masks.
    pub bookkeeping_ok: bool,
    pub step_norms_ok: bool,
    pub worst_step_ratio: f64,
    pub holomorphic: bool,
    pub max_negative_mode: f64,
    pub lambda_probe: f64,
    pub probe_h_measure: f64,
    pub probe_c_emp: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerances {
    /// Added to `ε/2π` for the defect check.
    pub defect: f64,
    /// Added to `2·stop_tol` for the agreement check.
    pub agreement: f64,
    /// Relative slack on `‖g_j‖_∞ ≤ λ_j 2^{-j}`.
    pub step_norm: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            defect: 0.005,
            agreement: 1e-9,
            step_norm: 0.05,
        }
    }
}

/// Post-hoc audit of a correction run.
pub fn verify_result(
    u0: &BoundaryFn,
    result: &CorrectionResult,
    lambda_probe: f64,
    tol: &VerifyTolerances,
) -> Result<VerifyReport> {
    let grid = u0.grid();
    let n = grid.n();
    let max_agreement_error = agreement_error(u0, &result.g, &result.e);
    let agreement_bound = (2.0 * result.stop_tol + tol.agreement) * result.input_scale;
    let defect = result.e.complement().normalized_measure();
    let defect_bound = result.eps / (2.0 * PI) + tol.defect;
    let bookkeeping_ok = {
        let mut inter = GridMask::full(grid);
        let mut total = 0usize;
        for s in &result.steps {
            if let Some(e) = &s.e {
                inter = inter.intersect(e)?;
                total += e.complement().count();
            }
        }
        inter == result.e && inter.complement().count() <= total
    };
    let worst_step_ratio = result
        .steps
        .iter()
        .map(|s| s.sup_g / s.bound)
        .fold(0.0, f64::max);
    let coeffs = result.g.coeffs();
    let aliased = coeffs
        .iter()
        .skip(n / 2)
        .any(|c| *c != Complex64::new(0.0, 0.0));
    let max_negative_mode = Spectrum::forward(&result.g.trace(grid)).max_negative_mode();
    let scale = 1.0 + coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let holomorphic = !aliased && max_negative_mode <= 1e-12 * scale;

    let f = analytic_completion(u0)?;
    let disk = DiskGrid::ladder(grid, 10)?;
    let fs = nontangential_max(&f, &disk, 2.0)?.values;
    let h = level_set(&fs, lambda_probe)?;
    let probe_c_emp = if h.is_empty() {
        0.0
    } else {
        let m = hardy_littlewood(&h.indicator()).values.re();
        let ft = completion_trace(u0)?;
        let gt = result.g.trace(grid);
        let mut r: Vec<f64> = (0..n)
            .map(|k| {
                (ft.values()[k] - gt.values()[k]).norm()
                    / ((ft.values()[k].norm() + lambda_probe) * m[k])
            })
            .collect();
        r.sort_by(f64::total_cmp);
        r[((0.99 * n as f64).ceil() as usize).clamp(1, n) - 1]
    };
    let agreement_ok = max_agreement_error <= agreement_bound;
    let defect_ok = defect <= defect_bound;
    let step_norms_ok = worst_step_ratio <= 1.0 + tol.step_norm;
    Ok(VerifyReport {
        max_agreement_error,
        agreement_bound,
        agreement_ok,
        defect,
        defect_bound,
        defect_ok,
        bookkeeping_ok,
        step_norms_ok,
        worst_step_ratio,
        holomorphic,
        max_negative_mode,
        lambda_probe,
        probe_h_measure: h.normalized_measure(),
        probe_c_emp,
        passed: agreement_ok && defect_ok && bookkeeping_ok && step_norms_ok && holomorphic,
    })
}

/// Constants fitted on one input family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constants: CalibrationConstants,
    pub tail: TailCalibration,
    pub jn: TailFit,
    /// `(λ, P(F* > λ) / (|{f# > λ}|/2π))` at levels with nonempty `{f# > λ}`.
    pub bgs_ratios: Vec<(f64, f64)>,
}

/// Calibration that tolerates inputs whose tails are too short to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoCalibration {
    pub constants: CalibrationConstants,
    pub tail: Option<TailCalibration>,
    pub jn: Option<TailFit>,
    pub bgs_ratios: Vec<(f64, f64)>,
    /// Constants that fell back to 1 and why.
    pub fallbacks: Vec<String>,
}

/// As [`calibrate`], with level grids at `k/10` of the observed maxima of
/// `F*` and `f#` (`k = 1..9`). Constants that cannot be fitted (no decay,
/// too few levels) fall back to 1 and are listed in `fallbacks`.
pub fn calibrate_auto(u: &BoundaryFn, cfg: &PathConfig) -> Result<AutoCalibration> {
    let grid = u.grid();
    let f = analytic_completion(u)?;
    let ens = simulate_ensemble(&f, &[], Complex64::new(0.0, 0.0), cfg)?;
    let samples = ens.unstopped();
    let fmax = samples.samples.iter().map(|s| s.f_star).fold(0.0, f64::max);
    let tail_lambdas: Vec<f64> = (1..=9).map(|k| fmax * k as f64 / 10.0).collect();
    let mut fallbacks = Vec::new();
    let tail = if fmax > 0.0 {
        match calibrate_tail(&samples, &tail_lambdas) {
            Ok(t) => Some(t),
            Err(e) => {
                fallbacks.push(format!("c1, c2: {e}"));
                None
            }
        }
    } else {
        fallbacks.push("c1, c2: F* vanishes".into());
        None
    };
    let disk = DiskGrid::ladder(grid, 10)?;
    let fs = nontangential_max(&f, &disk, 2.0)?.values;
    let smax = fs.sup_norm();
    let jn_lambdas: Vec<f64> = (1..=9).map(|k| smax * k as f64 / 10.0).collect();
    let jn = match jn_distribution(&fs, &jn_lambdas) {
        Ok(fit) if fit.slope < 0.0 => Some(fit),
        Ok(_) => {
            fallbacks.push("delta0, C0: level sets of f# do not decay".into());
            None
        }
        Err(e) => {
            fallbacks.push(format!("delta0, C0: {e}"));
            None
        }
    };
    let bgs_ratios: Vec<(f64, f64)> = match &tail {
        Some(t) => t
            .lambdas
            .iter()
            .zip(&t.tail_prob)
            .filter_map(|(&l, &p)| {
                let m = level_set(&fs, l).ok()?.normalized_measure();
                (m > 0.0).then_some((l, p / m))
            })
            .collect(),
        None => Vec::new(),
    };
    let c_bgs = bgs_ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let c_bgs = if c_bgs > 0.0 {
        c_bgs
    } else {
        fallbacks.push("C_bgs: no level with both tails positive".into());
        1.0
    };
    let (c1, c2) = tail.as_ref().map_or((1.0, 1.0), |t| (t.c1, t.c2));
    let (d0, c0) = jn.as_ref().map_or((1.0, 1.0), |j| (j.delta0(), j.c0()));
    let constants = CalibrationConstants::new(c1, c2, d0, c0, c_bgs);
    constants.validate()?;
    Ok(AutoCalibration {
        constants,
        tail,
        jn,
        bgs_ratios,
        fallbacks,
    })
}

/// Fits `c₁, c₂` from the tail of `F*` for the completion of `u`, `δ₀, C₀`
/// from the level sets of `f#`, and the Brownian-versus-nontangential
/// comparison constant.
pub fn calibrate(
    u: &BoundaryFn,
    cfg: &PathConfig,
    tail_lambdas: &[f64],
    jn_lambdas: &[f64],
) -> Result<Calibration> {
    let grid = u.grid();
    let f = analytic_completion(u)?;
    let ens = simulate_ensemble(&f, &[], Complex64::new(0.0, 0.0), cfg)?;
    let samples = ens.unstopped();
    let tail = calibrate_tail(&samples, tail_lambdas)?;
    let disk = DiskGrid::ladder(grid, 10)?;
    let fs = nontangential_max(&f, &disk, 2.0)?.values;
    let jn = jn_distribution(&fs, jn_lambdas)?;
    let bgs_ratios: Vec<(f64, f64)> = tail
        .lambdas
        .iter()
        .zip(&tail.tail_prob)
        .filter_map(|(&l, &p)| {
            let m = level_set(&fs, l).ok()?.normalized_measure();
            (m > 0.0).then_some((l, p / m))
        })
        .collect();
    let c_bgs = bgs_ratios
        .iter()
        .map(|r| r.1)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let constants = CalibrationConstants::new(tail.c1, tail.c2, jn.delta0(), jn.c0(), c_bgs);
    constants.validate()?;
    Ok(Calibration {
        constants,
        tail,
        jn,
        bgs_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{cosine, square_wave};
    use proptest::prelude::*;

    fn grid(n: usize) -> CircleGrid {
        CircleGrid::new(n).unwrap()
    }

    #[test]
    fn truncate_examples() {
        let g = grid(8);
        let h = BoundaryFn::from_real_fn(g, |_| 0.5);
        assert_eq!(truncate(&h, 1.0).unwrap(), h);
        let h = BoundaryFn::from_real_fn(g, |_| -3.0);
        assert!(truncate(&h, 1.0).unwrap().re().iter().all(|&v| v == -1.0));
        let h = BoundaryFn::from_complex_fn(g, |t| Complex64::from_polar(2.0, t));
        let t = truncate(&h, 1.0).unwrap();
        for (k, v) in t.values().iter().enumerate() {
            assert!((v - Complex64::from_polar(1.0, g.point(k))).norm() < 1e-15);
        }
        assert!(truncate(&h, 0.0).is_err());
    }

    #[test]
    fn schedule_closed_form() {
        let c = CalibrationConstants::new(1.0, 1.0, 1.0, 1.0, 1.0);
        let s = make_schedule(0.5, &c, 40).unwrap();
        assert!((s.lambdas[0] - 8f64.ln()).abs() < 1e-14);
        assert!((s.lambdas[1] - 32f64.ln()).abs() < 1e-14);
        assert!((s.series_sum - 0.25).abs() < 1e-12);
        let half = make_schedule(0.25, &c, 40).unwrap();
        for (a, b) in s.lambdas.iter().zip(&half.lambdas) {
            assert!((b - a - LN_2).abs() < 1e-12);
        }
        let c2 = CalibrationConstants::new(2.0, 1.0, 1.0, 1.0, 1.0);
        let d = make_schedule(0.5, &c2, 40).unwrap();
        for (a, b) in s.lambdas.iter().zip(&d.lambdas) {
            assert!((b - a / 2.0).abs() < 1e-12);
        }
        // Σ λ_n 2^{-n} via a long direct sum
        let direct: f64 = (0..200).map(|n| s.lambda(n) * 0.5f64.powi(n as i32)).sum();
        assert!((s.lambda_weighted_sum - direct).abs() < 1e-12);
        assert!(make_schedule(7.0, &c, 3).is_err());
        assert!(make_schedule(0.0, &c, 3).is_err());
    }

    #[test]
    fn step_count_examples() {
        assert_eq!(step_count(0.5f64.powi(8)), 9);
        assert_eq!(step_count(0.3), 2);
    }

    #[test]
    fn constants_validation() {
        assert!(CalibrationConstants::default().validate().is_ok());
        let c = CalibrationConstants {
            delta1: 0.3,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = CalibrationConstants::new(-1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn bounded_projection_of_analytic_input_is_exact() {
        let g = grid(64);
        let z = AnalyticFn::monomial(1);
        let (p, it) = bounded_riesz_project(&z.trace(g), 1.0, 0.01, 10);
        assert_eq!(it, 0);
        assert!((p.coeffs()[1] - 1.0).norm() < 1e-14);
    }

    fn cfg(n_paths: usize, seed: u64) -> PathConfig {
        PathConfig {
            n_paths,
            seed,
            r_exit: 0.99,
            ..Default::default()
        }
    }

    #[test]
    fn lemma2_out_of_reach_level_is_identity() {
        let g = grid(128);
        let f = analytic_completion(&cosine(g)).unwrap();
        let out = lemma2_step(&f, g, 1.5, 0.1, &cfg(200, 3)).unwrap();
        assert_eq!(out.e.count(), 128);
        assert_eq!(out.diagnostics.fired_fraction, 0.0);
        assert!((out.g.coeffs()[1] - 1.0).norm() < 1e-12);
        assert!(lemma2_step(
            &AnalyticFn::constant(Complex64::new(2.0, 0.0)),
            g,
            1.0,
            0.1,
            &cfg(10, 0)
        )
        .is_err());
    }

    #[test]
    fn lemma2_square_wave_is_bounded() {
        let g = grid(512);
        let f = analytic_completion(&square_wave(g)).unwrap();
        let out = lemma2_step(&f, g, 2.0, 0.25, &cfg(600, 5)).unwrap();
        assert!(out.diagnostics.sup_g <= 2.0 * 1.05);
        let ft = f.trace(g);
        for k in out.e.indices() {
            assert!((ft.values()[k] - out.g_trace.values()[k]).norm() <= 0.25);
        }
        assert!(out.diagnostics.defect > 0.0 && out.diagnostics.defect < 0.5);
        assert!(out.diagnostics.tail.holds);
    }

    #[test]
    fn correct_cosine_is_captured_in_one_step() {
        let g = grid(128);
        let consts = CalibrationConstants::new(1.0, 1.0, 1.0, 1.0, 1.0);
        let res = correct(&cosine(g), 0.1, &cfg(100, 1), &consts, 0.25).unwrap();
        assert_eq!(res.final_defect, 0.0);
        assert!(res.max_agreement_error < 1e-12);
        assert!((res.g.coeffs()[1] - 1.0).norm() < 1e-12);
        for s in &res.steps[1..] {
            assert!(s.sup_g < 1e-12);
        }
        let v = verify_result(&cosine(g), &res, 5.0, &VerifyTolerances::default()).unwrap();
        assert!(v.passed, "{v:?}");

        let mut bad = res.clone();
        let mut c = bad.g.coeffs().to_vec();
        c.resize(128, Complex64::new(0.0, 0.0));
        c[127] = Complex64::new(0.1, 0.0);
        bad.g = AnalyticFn::new(c).unwrap();
        let v = verify_result(&cosine(g), &bad, 5.0, &VerifyTolerances::default()).unwrap();
        assert!(!v.holomorphic && !v.passed);
    }

    #[test]
    fn correct_rejects_complex_input_and_bad_eps() {
        let g = grid(64);
        let h = BoundaryFn::from_complex_fn(g, |t| Complex64::from_polar(1.0, t));
        let c = CalibrationConstants::default();
        assert!(correct(&h, 0.1, &cfg(10, 0), &c, 0.25).is_err());
        assert!(correct(&cosine(g), 7.0, &cfg(10, 0), &c, 0.25).is_err());
    }

    proptest! {
        #[test]
        fn truncate_idempotent_and_bounded(v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 16), d in 0.01f64..3.0) {
            let h = BoundaryFn::complex(grid(16), v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let t = truncate(&h, d).unwrap();
            prop_assert!(t.sup_norm() <= d);
            prop_assert_eq!(&truncate(&t, d).unwrap(), &t);
            let r = BoundaryFn::real(grid(16), v.iter().map(|p| p.0).collect()).unwrap();
            let tr = truncate(&r, d).unwrap();
            prop_assert!(tr.is_real() && tr.sup_norm() <= d);
            prop_assert_eq!(&truncate(&tr, d).unwrap(), &tr);
        }

        #[test]
        fn schedule_sums_to_half_eps(eps in 0.01f64..6.0, c1 in 0.2f64..5.0, c2 in 0.1f64..50.0) {
            let s = make_schedule(eps, &CalibrationConstants::new(c1, c2, 1.0, 1.0, 1.0), 30).unwrap();
            prop_assert!((s.series_sum - eps / 2.0).abs() < 1e-12);
            prop_assert!(s.series_sum < eps && s.lambda_weighted_sum.is_finite());
        }
    }
}
