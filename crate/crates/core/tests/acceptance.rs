//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use menshov::correction::{
    calibrate_auto, correct, lemma2_sweep, make_schedule, truncate, verify_result,
    CalibrationConstants, Lemma2Options, VerifyTolerances,
};
use menshov::fixtures;
use menshov::martingale::{estimate_projection, simulate_ensemble, PathConfig};
use menshov::maximal::{
    good_set_b, hardy_littlewood, jn_distribution, level_set, nontangential_max,
    theorem3_pointwise_check, DiskGrid, GridMask,
};
use menshov::spectral::{
    analytic_completion, completion_trace, hilbert_transform, AnalyticFn, BoundaryFn, CircleGrid,
};
use menshov::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn grid(n: usize) -> CircleGrid {
    CircleGrid::new(n).unwrap()
}

/// Ordinary least squares: `(slope, r²)`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (
        slope,
        if syy == 0.0 {
            1.0
        } else {
            sxy * sxy / (sxx * syy)
        },
    )
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let g = grid(4096);
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for k in 1..=1024 {
        let kf = k as f64;
        let u = BoundaryFn::from_real_fn(g, |t| (kf * t).cos());
        let t0 = Instant::now();
        let h = hilbert_transform(&u).map_err(|e| e.to_string())?;
        slowest = slowest.max(t0.elapsed());
        for (j, v) in h.values().iter().enumerate() {
            let want = (kf * g.point(j)).sin();
            worst = worst.max((v.re - want).abs()).max(v.im.abs());
        }
    }
    verdict(
        worst <= 1e-10 && slowest < Duration::from_millis(100),
        format!("max error {worst:.2e} over k <= 1024, slowest transform {slowest:?}"),
    )
}

fn criterion_2() -> Outcome {
    let g = grid(4096);
    let cfg = PathConfig {
        n_paths: 20_000,
        dt: 1e-4,
        r_exit: 1.0 - 1.0 / 1024.0,
        seed: 2,
        ..Default::default()
    };
    let t0 = Instant::now();
    let f = AnalyticFn::monomial(1);
    let ens =
        simulate_ensemble(&f, &[], Complex64::new(0.0, 0.0), &cfg).map_err(|e| e.to_string())?;
    let est = estimate_projection(&ens.unstopped(), g, false).map_err(|e| e.to_string())?;
    let within = (0..g.n())
        .filter(|&j| {
            let want = Complex64::from_polar(1.0, g.point(j));
            (est.values.values()[j] - want).norm() <= 4.0 * est.std_error[j]
        })
        .count();
    let frac = within as f64 / g.n() as f64;
    verdict(
        frac >= 0.99,
        format!(
            "{:.2}% of grid points within 4 se, {:?}",
            100.0 * frac,
            t0.elapsed()
        ),
    )
}

fn criterion_3() -> Outcome {
    let g = grid(4096);
    let u = fixtures::square_wave(g);
    let f = analytic_completion(&u).map_err(|e| e.to_string())?;
    let trace = completion_trace(&u).map_err(|e| e.to_string())?;
    let cfg = PathConfig {
        n_paths: 20_000,
        seed: 3,
        ..Default::default()
    };
    let eps = 0.25;
    let levels = [2.0, 3.0, 4.0, 5.0];
    let outs = lemma2_sweep(&f, &trace, &levels, eps, &cfg, &Lemma2Options::default())
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut logs = Vec::new();
    let mut parts = Vec::new();
    for (l, o) in levels.iter().zip(&outs) {
        let d = &o.diagnostics;
        let sup_ok = d.sup_g <= l * 1.05;
        let diffs: Vec<f64> = (0..g.n())
            .map(|j| (trace.values()[j] - o.g_trace.values()[j]).norm())
            .collect();
        let on_e = o.e.indices().iter().map(|&j| diffs[j]).fold(0.0, f64::max);
        let defect = diffs.iter().filter(|&&x| x > eps).count() as f64 / g.n() as f64;
        let bookkeeping = (defect - d.defect).abs() == 0.0;
        ok &= sup_ok && on_e <= eps && bookkeeping && d.tail.holds;
        logs.push(d.defect.ln());
        parts.push(format!(
            "λ={l}: sup {:.3}, defect {:.2e}, ‖F-G‖₁ {:.4} vs {:.4}",
            d.sup_g, d.defect, d.tail.lhs, d.tail.rhs
        ));
    }
    let decreasing = logs.windows(2).all(|w| w[1] < w[0]);
    let (slope, r2) = ols(&levels, &logs);
    ok &= decreasing && r2 >= 0.8;
    parts.push(format!("log-defect slope {slope:.3}, r² {r2:.3}"));
    verdict(ok, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let g = grid(4096);
    let u0 = fixtures::square_wave(g);
    let cfg = PathConfig {
        n_paths: 20_000,
        seed: 4,
        ..Default::default()
    };
    let cal = calibrate_auto(&u0.scale(2.0), &cfg).map_err(|e| e.to_string())?;
    let eps = 0.1;
    let res = correct(&u0, eps, &cfg, &cal.constants, 1.0 / 256.0).map_err(|e| e.to_string())?;
    let rep =
        verify_result(&u0, &res, 3.0, &VerifyTolerances::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let defect_ok = res.final_defect <= eps / (2.0 * PI) + 0.005;
    let agree_ok = res.max_agreement_error <= 1.0 / 128.0;
    let steps_ok = res
        .steps
        .iter()
        .all(|s| s.sup_g <= s.lambda_j * 0.5f64.powi(s.index as i32) * 1.05);
    let modes = res.g.coeffs().len() <= g.n() / 2;
    verdict(
        defect_ok && agree_ok && steps_ok && modes && rep.passed && elapsed.as_secs() <= 1800,
        format!(
            "c1 {:.3}, c2 {:.2}, λ_1 {:.2}, defect {:.2e}, agreement {:.2e}, worst step ratio {:.3}, \
             holomorphic {}, {} steps simulated, {elapsed:?}",
            cal.constants.c1,
            cal.constants.c2,
            res.schedule.lambda(1),
            res.final_defect,
            res.max_agreement_error,
            rep.worst_step_ratio,
            rep.holomorphic,
            res.steps.iter().filter(|s| s.diagnostics.simulated).count()
        ),
    )
}

fn criterion_5() -> Outcome {
    let consts = CalibrationConstants::new(0.69, 130.0, 1.7, 2.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut weighted = 0.0;
    for eps in [0.01, 0.1, 1.0, 6.0] {
        let s = make_schedule(eps, &consts, 12).map_err(|e| e.to_string())?;
        worst = worst.max((s.series_sum - eps / 2.0).abs());
        let brute: f64 = (0..1000).map(|n| s.lambda(n) * 0.5f64.powi(n as i32)).sum();
        worst = worst.max((s.lambda_weighted_sum - brute).abs() / brute);
        weighted = s.lambda_weighted_sum;
        let direct: f64 = (0..1000)
            .map(|n| (-s.lambda(n) * s.c1).exp() * s.c2 * 2f64.powi(n as i32))
            .sum();
        worst = worst.max((direct - eps / 2.0).abs());
    }
    verdict(
        worst <= 1e-12 && weighted.is_finite(),
        format!("max closed-form deviation {worst:.1e}, Σλ_n 2^-n = {weighted:.4}"),
    )
}

fn criterion_6() -> Outcome {
    let g = grid(4096);
    let u = fixtures::square_wave(g);
    let f = analytic_completion(&u).map_err(|e| e.to_string())?;
    let trace = completion_trace(&u).map_err(|e| e.to_string())?;
    let disk = DiskGrid::ladder(g, 10).map_err(|e| e.to_string())?;
    let levels = [2.0, 3.0, 6.0];
    let mut c = vec![Vec::new(); levels.len()];
    let mut zero_ok = true;
    for seed in [61u64, 62] {
        let cfg = PathConfig {
            n_paths: 20_000,
            seed,
            ..Default::default()
        };
        let outs = lemma2_sweep(&f, &trace, &levels, 0.25, &cfg, &Lemma2Options::default())
            .map_err(|e| e.to_string())?;
        for (i, o) in outs.iter().enumerate() {
            let rep = theorem3_pointwise_check(&f, &o.g_trace, levels[i], &disk, 2.0, &o.evidence)
                .map_err(|e| e.to_string())?;
            if rep.h_measure == 0.0 {
                zero_ok &= rep.zero_branch_ok;
            } else {
                c[i].push(rep.c_emp);
            }
        }
    }
    let mut ok = zero_ok;
    let mut parts = Vec::new();
    for (i, cs) in c.iter().enumerate() {
        if cs.len() == 2 {
            let spread = (cs[0] - cs[1]).abs() / (0.5 * (cs[0] + cs[1]));
            ok &= cs.iter().all(|x| x.is_finite() && *x > 0.0) && spread <= 0.25;
            parts.push(format!(
                "λ={}: C_emp {:.4} / {:.4}",
                levels[i], cs[0], cs[1]
            ));
        } else {
            parts.push(format!(
                "λ={}: H empty, |f-g| within 4 se: {zero_ok}",
                levels[i]
            ));
        }
    }
    verdict(ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let g = grid(4096);
    let f = analytic_completion(&fixtures::square_wave(g)).map_err(|e| e.to_string())?;
    let disk = DiskGrid::ladder(g, 10).map_err(|e| e.to_string())?;
    let fs = nontangential_max(&f, &disk, 2.0)
        .map_err(|e| e.to_string())?
        .values;
    let levels: Vec<f64> = (2..=10).map(|k| k as f64 * 0.5).collect();
    let fit = jn_distribution(&fs, &levels).map_err(|e| e.to_string())?;
    let consts = CalibrationConstants::new(1.0, 1.0, fit.delta0(), fit.c0(), 1.0);
    let boundary = f.trace(g);
    let bounds = [2.0, 3.0, 4.0, 5.0];
    let mut ok = true;
    let mut defects = Vec::new();
    for &nb in &bounds {
        let gs = good_set_b(&fs, &boundary, nb, &consts).map_err(|e| e.to_string())?;
        let h = level_set(&fs, nb).map_err(|e| e.to_string())?;
        let hl = hardy_littlewood(&h.indicator());
        let t = gs.report.threshold;
        let direct = gs.b.indices().iter().all(|&j| {
            let (s, len) = hl.witness[j];
            s <= t * len as f64
        });
        ok &= gs.report.bound_exact && direct;
        defects.push(gs.report.defect);
    }
    let xs: Vec<f64> = bounds.to_vec();
    let ys: Vec<f64> = defects.iter().map(|d| d.ln()).collect();
    let (slope, r2) = ols(&xs, &ys);
    ok &= slope < 0.0;
    verdict(
        ok,
        format!(
            "δ1 {:.3}, |T\\B|/2π = {:?}, log slope {slope:.3} (r² {r2:.3})",
            consts.delta1,
            defects
                .iter()
                .map(|d| (d * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    )
}

fn criterion_8() -> Outcome {
    let levels: Vec<f64> = (2..=10).map(|k| k as f64 * 0.5).collect();
    let mut fits = Vec::new();
    for n in [4096, 8192] {
        let g = grid(n);
        let f = analytic_completion(&fixtures::square_wave(g)).map_err(|e| e.to_string())?;
        let disk = DiskGrid::ladder(g, 10).map_err(|e| e.to_string())?;
        let fs = nontangential_max(&f, &disk, 2.0)
            .map_err(|e| e.to_string())?
            .values;
        let fit = jn_distribution(&fs, &levels).map_err(|e| e.to_string())?;
        let (slope, r2) = ols(&fit.lambdas, &fit.log_measures);
        if (slope - fit.slope).abs() > 1e-9 {
            return Err(format!("fit mismatch at n={n}: {slope} vs {}", fit.slope));
        }
        fits.push((slope, r2));
    }
    let drift = (fits[1].0 - fits[0].0).abs() / fits[0].0.abs();
    verdict(
        fits.iter().all(|f| f.1 >= 0.9) && drift <= 0.15,
        format!(
            "n=4096 slope {:.4} r² {:.4}; n=8192 slope {:.4} r² {:.4}; drift {:.1}%",
            fits[0].0,
            fits[0].1,
            fits[1].0,
            fits[1].1,
            100.0 * drift
        ),
    )
}

fn criterion_9() -> Outcome {
    let t0 = Instant::now();
    let g = grid(1024);
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();

    for trial in 0..20 {
        let re: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let cx: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let delta = rng.gen_range(0.01..2.0);
        for h in [
            BoundaryFn::real(g, re).unwrap(),
            BoundaryFn::complex(g, cx).unwrap(),
        ] {
            let once = truncate(&h, delta).unwrap();
            let twice = truncate(&once, delta).unwrap();
            if once.values() != twice.values() || once.moduli().iter().any(|&m| m > delta) {
                failures.push(format!("truncate trial {trial}"));
            }
        }

        let a = GridMask::new(g, (0..n).map(|_| rng.gen_bool(0.6)).collect()).unwrap();
        let b = GridMask::new(g, (0..n).map(|_| rng.gen_bool(0.3)).collect()).unwrap();
        let (u, i) = (a.union(&b).unwrap(), a.intersect(&b).unwrap());
        let lost = a.intersect(&b).unwrap().complement().count();
        if u.count() + i.count() != a.count() + b.count()
            || a.count() + a.complement().count() != n
            || lost > a.complement().count() + b.complement().count()
            || a.difference(&b).unwrap().count() != a.count() - i.count()
        {
            failures.push(format!("mask bookkeeping trial {trial}"));
        }

        let ha: Vec<u32> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let hb: Vec<u32> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let to_fn = |v: &[u32]| BoundaryFn::real(g, v.iter().map(|&x| x as f64).collect()).unwrap();
        let sum: Vec<u32> = ha.iter().zip(&hb).map(|(x, y)| x + y).collect();
        let (ma, mb, ms) = (
            hardy_littlewood(&to_fn(&ha)),
            hardy_littlewood(&to_fn(&hb)),
            hardy_littlewood(&to_fn(&sum)),
        );
        let sublinear = (0..n).all(|j| {
            let (sa, la) = ma.witness[j];
            let (sb, lb) = mb.witness[j];
            let (ss, ls) = ms.witness[j];
            (ss as u64) * (la * lb) as u64
                <= ((sa as u64) * lb as u64 + (sb as u64) * la as u64) * ls as u64
        });
        if !sublinear {
            failures.push(format!("M_HL sublinearity trial {trial}"));
        }

        let h = to_fn(&sum);
        let mut prev = level_set(&h, -1.0).unwrap();
        for l in 0..9 {
            let next = level_set(&h, l as f64 + rng.gen_range(0.0..1.0)).unwrap();
            if !next.is_subset(&prev) {
                failures.push(format!("level-set nesting trial {trial}"));
            }
            prev = next;
        }
    }
    let elapsed = t0.elapsed();
    if elapsed.as_secs_f64() >= 10.0 {
        failures.push(format!("took {elapsed:?}"));
    }
    if failures.is_empty() {
        Ok(format!(
            "20 trials of four exact identities at n=1024, {elapsed:?}"
        ))
    } else {
        Err(failures.join(", "))
    }
}

fn criterion_10() -> Outcome {
    let g = grid(1024);
    let u0 = fixtures::square_wave(g);
    let consts = CalibrationConstants::default();
    let mut reports = Vec::new();
    let mut simulated = 0;
    for workers in [1, 8, 8] {
        let cfg = PathConfig {
            n_paths: 2000,
            seed: 10,
            workers,
            ..Default::default()
        };
        let res = correct(&u0, 0.1, &cfg, &consts, 1.0 / 256.0).map_err(|e| e.to_string())?;
        simulated = res.steps.iter().filter(|s| s.diagnostics.simulated).count();
        let report = serde_json::json!({
            "config": res.cfg,
            "constants": res.consts,
            "schedule": res.schedule,
            "steps": res.steps,
            "final_defect": res.final_defect,
            "max_agreement_error": res.max_agreement_error,
            "g": res.g.coeffs().iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
            "e": res.e.indices(),
        });
        reports.push(serde_json::to_vec_pretty(&report).unwrap());
    }
    verdict(
        reports[0] == reports[1] && reports[1] == reports[2] && simulated > 0,
        format!(
            "{} byte report, {simulated} simulated steps, workers 1/8/8 identical: {}",
            reports[0].len(),
            reports[0] == reports[1] && reports[1] == reports[2]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (k, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {k}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {k}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
