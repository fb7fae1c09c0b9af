use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use menshov::correction::{
    calibrate_auto, correct, lemma2_from_sample_set, verify_result, AutoCalibration,
    CalibrationConstants, Lemma2Diagnostics, Lemma2Options, Lemma2Outcome, Schedule, StepRecord,
    VerifyReport, VerifyTolerances,
};
use menshov::fixtures;
use menshov::io::{
    read_boundary_csv, to_json, write_boundary_csv, write_coefficients_csv, write_mask_csv,
    write_path_dump, write_series_csv,
};
use menshov::martingale::{calibrate_tail, simulate_ensemble, PathConfig, TailCalibration};
use menshov::maximal::{
    good_set_b, jn_distribution, jn_oscillation, nontangential_max, DiskGrid, GoodSetReport,
    OscillationReport, TailFit, Theorem3Report,
};
use menshov::spectral::{analytic_completion, completion_trace, BoundaryFn, CircleGrid};
use menshov::{Complex64, Error};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

const APERTURE: f64 = 2.0;
const LADDER_DEPTH: u32 = 10;
const DEFAULT_LAMBDA: f64 = 3.0;
const DEFAULT_N_BOUND: f64 = 4.0;

fn load_input(cfg: &RunConfig) -> Result<BoundaryFn, Error> {
    let path = cfg.input_path.as_deref().ok_or(Error::Param {
        name: "input",
        reason: "an input CSV is required".into(),
    })?;
    let u = read_boundary_csv(BufReader::new(File::open(path)?))?;
    if let Some(n) = cfg.grid_n {
        if n != u.grid().n() {
            return Err(Error::Length {
                expected: n,
                got: u.grid().n(),
            });
        }
    }
    if !u.is_real() {
        return Err(Error::NotReal);
    }
    Ok(u)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Error> {
    let mut w = create(dir, name)?;
    w.write_all(to_json(value)?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Levels at `k/10` of `max` for `k = 1..9`.
fn relative_levels(max: f64) -> Vec<f64> {
    (1..=9).map(|k| max * k as f64 / 10.0).collect()
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl Into<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn finish(failures: Vec<String>) -> Result<(), CliError> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(4, "assertion", failures.join("; ")))
    }
}

struct Lemma2Run {
    outcome: Lemma2Outcome,
    tail_fit: Option<TailCalibration>,
    tail_fit_note: Option<String>,
}

fn run_lemma2(
    u: &BoundaryFn,
    lambda: f64,
    cfg: &RunConfig,
    pcfg: &PathConfig,
    opts: &Lemma2Options,
) -> Result<Lemma2Run, Error> {
    let f = analytic_completion(u)?;
    let trace = completion_trace(u)?;
    let ens = simulate_ensemble(&f, &[lambda], Complex64::new(0.0, 0.0), pcfg)?;
    let samples = ens.at_level(0);
    if cfg.dump_paths {
        let mut w = create(&cfg.output_dir, "paths.bin")?;
        write_path_dump(&mut w, &samples)?;
        w.flush()?;
    }
    let outcome = lemma2_from_sample_set(&trace, &samples, cfg.eps, opts)?;
    let unstopped = ens.unstopped();
    let fmax = unstopped
        .samples
        .iter()
        .map(|s| s.f_star)
        .fold(0.0, f64::max);
    let (tail_fit, tail_fit_note) = match calibrate_tail(&unstopped, &relative_levels(fmax)) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Lemma2Run {
        outcome,
        tail_fit,
        tail_fit_note,
    })
}

#[derive(Serialize)]
struct Lemma2Checks {
    sup_ok: bool,
    agreement_ok: bool,
    tail_ok: bool,
    defect_ok: bool,
}

#[derive(Serialize)]
struct Lemma2Report<'a> {
    command: &'static str,
    config: &'a RunConfig,
    path_config: &'a PathConfig,
    options: &'a Lemma2Options,
    lambda: f64,
    diagnostics: &'a Lemma2Diagnostics,
    tail_fit: Option<&'a TailCalibration>,
    tail_fit_note: Option<&'a str>,
    /// `e^{-λĉ₁} ĉ₂ / (2π ε)` from the fitted tail.
    defect_bound: Option<f64>,
    max_diff_on_e: f64,
    checks: Lemma2Checks,
    passed: bool,
}

pub fn lemma2(cfg: &RunConfig) -> Result<(), CliError> {
    let lambda = cfg.lambda.ok_or(Error::Param {
        name: "lambda",
        reason: "lemma2 needs --lambda".into(),
    })?;
    let u = load_input(cfg)?;
    let pcfg = cfg.path_config();
    let opts = Lemma2Options::default();
    let run = run_lemma2(&u, lambda, cfg, &pcfg, &opts)?;
    let out = &run.outcome;
    let d = &out.diagnostics;
    let trace = completion_trace(&u)?;
    let max_diff_on_e = out
        .e
        .indices()
        .into_iter()
        .map(|j| (trace.values()[j] - out.g_trace.values()[j]).norm())
        .fold(0.0, f64::max);
    let defect_bound = run
        .tail_fit
        .as_ref()
        .map(|t| (-lambda * t.c1).exp() * t.c2 / (2.0 * PI * cfg.eps));
    let checks = Lemma2Checks {
        sup_ok: d.sup_g <= lambda * (1.0 + opts.sup_tol),
        agreement_ok: max_diff_on_e <= cfg.eps,
        tail_ok: d.tail.holds,
        defect_ok: defect_bound.is_none_or(|b| d.defect <= b),
    };
    let mut failures = Vec::new();
    check(
        &mut failures,
        checks.sup_ok,
        format!("sup|g| = {} exceeds λ(1+tol)", d.sup_g),
    );
    check(
        &mut failures,
        checks.agreement_ok,
        format!("|f-g| = {max_diff_on_e} on E"),
    );
    check(
        &mut failures,
        checks.tail_ok,
        "‖F-G‖₁ exceeds the tail bound",
    );
    check(
        &mut failures,
        checks.defect_ok,
        format!(
            "defect {} above calibrated bound {:?}",
            d.defect, defect_bound
        ),
    );
    let report = Lemma2Report {
        command: "lemma2",
        config: cfg,
        path_config: &pcfg,
        options: &opts,
        lambda,
        diagnostics: d,
        tail_fit: run.tail_fit.as_ref(),
        tail_fit_note: run.tail_fit_note.as_deref(),
        defect_bound,
        max_diff_on_e,
        checks,
        passed: failures.is_empty(),
    };
    let dir = &cfg.output_dir;
    let mut w = create(dir, "g_coefficients.csv")?;
    write_coefficients_csv(&mut w, &out.g)?;
    w.flush()?;
    let mut w = create(dir, "e_mask.csv")?;
    write_mask_csv(&mut w, &out.e)?;
    w.flush()?;
    write_json(dir, "lemma2_report.json", &report)?;
    println!(
        "lemma2: lambda {lambda}, defect {:.6}, sup|g| {:.4}, passed {}",
        d.defect, d.sup_g, report.passed
    );
    finish(failures)
}

#[derive(Serialize)]
struct CorrectReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    path_config: &'a PathConfig,
    calibration: &'a AutoCalibration,
    schedule: Option<&'a Schedule>,
    input_scale: Option<f64>,
    steps: &'a [StepRecord],
    final_defect: Option<f64>,
    max_agreement_error: Option<f64>,
    summed_defects: Option<f64>,
    verify: Option<&'a VerifyReport>,
    error: Option<String>,
    passed: bool,
}

pub fn correct_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let u0 = load_input(cfg)?;
    let pcfg = cfg.path_config();
    let scale = u0.sup_norm().max(1.0);
    let doubled = u0.scale(2.0 / scale);
    let calibration = calibrate_auto(&doubled, &pcfg)?;
    let dir = &cfg.output_dir;
    let mut report = CorrectReport {
        command: "correct",
        config: cfg,
        path_config: &pcfg,
        calibration: &calibration,
        schedule: None,
        input_scale: None,
        steps: &[],
        final_defect: None,
        max_agreement_error: None,
        summed_defects: None,
        verify: None,
        error: None,
        passed: false,
    };
    let result = match correct(&u0, cfg.eps, &pcfg, &calibration.constants, cfg.stop_tol) {
        Ok(r) => r,
        Err(fail) => {
            report.steps = &fail.completed;
            report.error = Some(fail.to_string());
            write_json(dir, "correct_report.json", &report)?;
            return Err(fail.error.into());
        }
    };
    let lambda_probe = cfg.lambda.unwrap_or(DEFAULT_LAMBDA);
    let verify = verify_result(&u0, &result, lambda_probe, &VerifyTolerances::default())?;
    report.schedule = Some(&result.schedule);
    report.input_scale = Some(result.input_scale);
    report.steps = &result.steps;
    report.final_defect = Some(result.final_defect);
    report.max_agreement_error = Some(result.max_agreement_error);
    report.summed_defects = Some(result.summed_defects);
    report.verify = Some(&verify);
    report.passed = verify.passed;

    let mut w = create(dir, "g_coefficients.csv")?;
    write_coefficients_csv(&mut w, &result.g)?;
    w.flush()?;
    let mut w = create(dir, "e_mask.csv")?;
    write_mask_csv(&mut w, &result.e)?;
    w.flush()?;
    write_json(dir, "correct_report.json", &report)?;
    println!(
        "correct: {} steps, defect {:.6}, agreement {:.3e}, passed {}",
        result.steps.len(),
        result.final_defect,
        result.max_agreement_error,
        verify.passed
    );
    let mut failures = Vec::new();
    check(&mut failures, verify.agreement_ok, "agreement on E");
    check(&mut failures, verify.defect_ok, "final defect");
    check(&mut failures, verify.bookkeeping_ok, "mask bookkeeping");
    check(&mut failures, verify.step_norms_ok, "per-step sup norms");
    check(
        &mut failures,
        verify.holomorphic,
        "negative Fourier modes of g",
    );
    finish(failures)
}

#[derive(Serialize)]
struct DiagnoseReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    path_config: &'a PathConfig,
    aperture: f64,
    radial_only: bool,
    jn_fit: &'a TailFit,
    constants: &'a CalibrationConstants,
    constant_fallbacks: &'a [String],
    lemma2: &'a Lemma2Diagnostics,
    theorem3: &'a Theorem3Report,
    good_set: &'a GoodSetReport,
    passed: bool,
}

pub fn diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    let u = load_input(cfg)?;
    let grid: CircleGrid = u.grid();
    let pcfg = cfg.path_config();
    let f = analytic_completion(&u)?;
    let trace = completion_trace(&u)?;
    let disk = DiskGrid::ladder(grid, LADDER_DEPTH)?;
    let nt = nontangential_max(&f, &disk, APERTURE)?;
    let fs = &nt.values;
    let levels = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => relative_levels(fs.sup_norm()),
    };
    let jn_fit = jn_distribution(fs, &levels)?;

    let mut fallbacks = Vec::new();
    let (delta0, c0) = if jn_fit.slope < 0.0 {
        (jn_fit.delta0(), jn_fit.c0())
    } else {
        fallbacks.push("delta0, C0: level sets of f# do not decay".to_string());
        (1.0, 1.0)
    };
    let consts = CalibrationConstants::new(1.0, 1.0, delta0, c0, 1.0);

    let lambda = cfg.lambda.unwrap_or(DEFAULT_LAMBDA);
    let opts = Lemma2Options::default();
    let run = run_lemma2(&u, lambda, cfg, &pcfg, &opts)?;
    let mut t3 = menshov::maximal::theorem3_pointwise_check(
        &f,
        &run.outcome.g_trace,
        lambda,
        &disk,
        APERTURE,
        &run.outcome.evidence,
    )?;
    let ratios: Vec<(f64, f64)> = t3
        .ratios
        .iter()
        .enumerate()
        .map(|(j, &r)| (grid.point(j), r))
        .collect();
    t3.ratios.clear();

    let n_bound = cfg.n_bound.unwrap_or(DEFAULT_N_BOUND);
    let gs = good_set_b(fs, &trace, n_bound, &consts)?;

    let mut failures = Vec::new();
    check(
        &mut failures,
        t3.zero_branch_ok,
        "|f-g| off the Carleson region",
    );
    check(&mut failures, t3.c_emp.is_finite(), "C_emp is not finite");
    check(&mut failures, gs.report.bound_exact, "M_HL bound on B");

    let report = DiagnoseReport {
        command: "diagnose",
        config: cfg,
        path_config: &pcfg,
        aperture: APERTURE,
        radial_only: nt.radial_only,
        jn_fit: &jn_fit,
        constants: &consts,
        constant_fallbacks: &fallbacks,
        lemma2: &run.outcome.diagnostics,
        theorem3: &t3,
        good_set: &gs.report,
        passed: failures.is_empty(),
    };
    let dir = &cfg.output_dir;
    write_json(dir, "diagnose_report.json", &report)?;
    let mut w = create(dir, "b_mask.csv")?;
    write_mask_csv(&mut w, &gs.b)?;
    w.flush()?;
    let rows: Vec<(f64, f64)> = (0..grid.n())
        .map(|j| (grid.point(j), fs.values()[j].re))
        .collect();
    let mut w = create(dir, "f_sharp.csv")?;
    write_series_csv(&mut w, ["theta", "f_sharp"], &rows)?;
    w.flush()?;
    let rows: Vec<(f64, f64)> = jn_fit
        .lambdas
        .iter()
        .copied()
        .zip(jn_fit.log_measures.iter().copied())
        .collect();
    let mut w = create(dir, "jn_tail.csv")?;
    write_series_csv(&mut w, ["lambda", "log_measure"], &rows)?;
    w.flush()?;
    let mut w = create(dir, "theorem3_ratios.csv")?;
    write_series_csv(&mut w, ["theta", "ratio"], &ratios)?;
    w.flush()?;
    println!(
        "diagnose: jn slope {:.4} (r2 {:.3}), C_emp {:.4}, |T\\B|/2pi {:.5}, passed {}",
        jn_fit.slope, jn_fit.r2, t3.c_emp, gs.report.defect, report.passed
    );
    finish(failures)
}

#[derive(Serialize)]
struct JnReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    oscillation: &'a OscillationReport,
}

pub fn jn(cfg: &RunConfig) -> Result<(), CliError> {
    let u = load_input(cfg)?;
    let levels = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => (1..=16).map(|k| k as f64 / 4.0).collect(),
    };
    let rep = jn_oscillation(&u, &levels)?;
    let dir = &cfg.output_dir;
    write_json(
        dir,
        "jn_report.json",
        &JnReport {
            command: "jn",
            config: cfg,
            oscillation: &rep,
        },
    )?;
    let rows: Vec<(f64, f64)> = rep
        .lambdas
        .iter()
        .copied()
        .zip(rep.tails.iter().copied())
        .collect();
    let mut w = create(dir, "jn_tails.csv")?;
    write_series_csv(&mut w, ["lambda", "tail"], &rows)?;
    w.flush()?;
    match rep.exponent {
        Some(e) => println!("jn: fitted exponent {e:.4}, bounded {}", rep.bounded),
        None => println!("jn: no decay fit, bounded {}", rep.bounded),
    }
    println!("note: {}", rep.note);
    Ok(())
}

pub fn gen_fixture(name: &str, grid_n: usize, output: Option<&Path>) -> Result<(), CliError> {
    let grid = CircleGrid::new(grid_n)?;
    let u = fixtures::by_name(name, grid).ok_or_else(|| Error::Param {
        name: "name",
        reason: format!("unknown fixture `{name}` (square, cosine, log)"),
    })?;
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut w = BufWriter::new(File::create(p)?);
            write_boundary_csv(&mut w, &u)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write_boundary_csv(&mut w, &u)?;
        }
    }
    Ok(())
}
