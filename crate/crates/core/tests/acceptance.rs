//! Acceptance criteria. Runs sequentially and prints one line per
//! criterion; pass criterion numbers as arguments to run a subset. The
//! exit status is nonzero on a failure only with `ACCEPTANCE_STRICT=1`.

use std::time::Instant;

use bmcp::clock::trial_seed;
use bmcp::engine::SimOptions;
use bmcp::estimators::{
    clt_diagnostics, compare_tails, estimate_edge_speed, extinction_tail, increments, iid_null_series,
    large_deviation_profile, mixing_profile, renewal_statistics, run_trials, survival_curve, StopRule,
    TrialSummary,
};
use bmcp::harness::{
    coupling_batch, named_suites, oracle_agreement_table, path_oracle_batch, renewal_batch, replay,
    run_experiment_with_threads, suite_descriptor, verify_output_dir,
};
use bmcp::lattice::{InitialCondition, Params, Variant, LAMBDA_C_ESTIMATE};
use bmcp::paths::{fit_box_scaling, fit_edge_envelope, half_line_edge_supremum};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn boosted(eps: f64) -> Params {
    Params::boosted(LAMBDA_C_ESTIMATE, eps, Variant::BoundaryModified).unwrap()
}

const STATIONARY_TRIALS: usize = 520;

#[derive(Default)]
struct Shared {
    stationary: Option<Vec<TrialSummary>>,
}

impl Shared {
    fn stationary(&mut self) -> &[TrialSummary] {
        self.stationary.get_or_insert_with(|| {
            run_trials(
                boosted(0.5),
                &InitialCondition::StationaryApprox { burn_in: 200.0 },
                0x5eed_0003,
                STATIONARY_TRIALS,
                StopRule::horizon(512.0),
                SimOptions::default(),
            )
            .unwrap()
        })
    }
}

fn valid_count(b: &[TrialSummary]) -> usize {
    b.iter().filter(|t| t.is_valid()).count()
}

fn c1_oracle(_: &mut Shared) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    let mut bad = 0;
    let mut analytic: f64 = 0.0;
    for (li, le) in [(1.0, 1.5), (LAMBDA_C_ESTIMATE, 2.1489)] {
        let p = Params::new(li, le, Variant::BoundaryModified).unwrap();
        let (_, table) = oracle_agreement_table(p, 3, &[1.0, 5.0], 10_000, 0x5eed_0001).unwrap();
        for c in &table {
            cells += 1;
            worst = worst.max(c.z.abs());
            bad += !c.within_3se as usize;
            if c.n == 1 {
                analytic = analytic.max((c.oracle - (1.0 - (-c.t).exp())).abs());
            }
        }
    }
    outcome(
        bad == 0 && analytic <= 1e-9,
        format!("{cells} cells, {bad} outside 3 SE, max |z| = {worst:.2}, n=1 analytic error {analytic:.1e}"),
    )
}

fn c2_coupling(_: &mut Shared) -> Outcome {
    let reports = coupling_batch(
        boosted(0.5),
        &InitialCondition::interval(-5, 5),
        5.0,
        50.0,
        1000,
        0x5eed_0002,
        SimOptions::default(),
    )
    .unwrap();
    let checks: usize = reports.iter().map(|r| r.checks).sum();
    let failures: usize = reports.iter().map(|r| r.failures.len()).sum();
    let invalid = reports.iter().filter(|r| r.invalid.is_some()).count();
    let empty = reports.iter().filter(|r| r.parent_empty).count();
    outcome(
        failures == 0 && invalid == 0 && checks > 0,
        format!(
            "{} pairs ({empty} with empty parent at spawn), {checks} checked event times, {failures} failures, {invalid} invalid",
            reports.len()
        ),
    )
}

fn c3_speed(sh: &mut Shared) -> Outcome {
    let a = sh.stationary();
    let ea = estimate_edge_speed(a, 512.0).unwrap();
    let control = run_trials(
        boosted(0.0),
        &InitialCondition::StationaryApprox { burn_in: 200.0 },
        0x5eed_0030,
        STATIONARY_TRIALS,
        StopRule::horizon(512.0),
        SimOptions::default(),
    )
    .unwrap();
    let e0 = estimate_edge_speed(&control, 512.0).unwrap();
    let pass = ea.trials >= 500
        && e0.trials >= 500
        && ea.alpha >= 0.5 - 3.0 * ea.se
        && e0.alpha.abs() <= 3.0 * e0.se + 0.05;
    outcome(
        pass,
        format!(
            "eps=0.5: alpha={:.4} se={:.4} ({} valid, unit increment {:.4}); eps=0: alpha={:.4} se={:.4} ({} valid)",
            ea.alpha, ea.se, ea.trials, ea.unit_increment_mean, e0.alpha, e0.se, e0.trials
        ),
    )
}

fn c4_clt(sh: &mut Shared) -> Outcome {
    let a = sh.stationary();
    let alpha = estimate_edge_speed(a, 512.0).unwrap().alpha;
    let r = clt_diagnostics(a, &[64.0, 128.0, 256.0, 512.0], alpha).unwrap();
    let last = r.scales.last().unwrap();
    let pass = r.variance_fit.r_squared >= 0.95
        && last.var_over_t >= 0.01
        && last.normality_p >= 1e-3
        && last.trials >= 500;
    outcome(
        pass,
        format!(
            "R^2={:.4}, Var(R(512))/512={:.3}, sigma2={:.3}+-{:.3}, JB p={:.2e} ({} trials)",
            r.variance_fit.r_squared, last.var_over_t, r.sigma2_hat, r.sigma2_se, last.normality_p, last.trials
        ),
    )
}

fn c5_tail(_: &mut Shared) -> Outcome {
    let k = 100;
    let stop = StopRule {
        t_max: 1000.0,
        certify_size: Some(k),
    };
    let seed = 0x5eed_0005;
    let main = run_trials(boosted(0.5), &InitialCondition::SingleOrigin, seed, 20_000, stop, SimOptions::default()).unwrap();
    let fit = extinction_tail(&main, 1000, 20).unwrap();
    let control = run_trials(
        boosted(0.0),
        &InitialCondition::SingleOrigin,
        0x5eed_0050,
        2000,
        StopRule::horizon(1000.0),
        SimOptions::default(),
    )
    .unwrap();
    let grid: Vec<f64> = fit
        .points
        .iter()
        .filter(|p| p.t >= fit.fit_range.0 && p.t <= fit.fit_range.1)
        .map(|p| p.t)
        .collect();
    let (_, below) = compare_tails(&main, &control, &grid);
    // Certification check: the same seeds stopped at 2K instead of K.
    let check = run_trials(
        boosted(0.5),
        &InitialCondition::SingleOrigin,
        seed,
        1000,
        StopRule {
            t_max: 1000.0,
            certify_size: Some(2 * k),
        },
        SimOptions::default(),
    )
    .unwrap();
    let late = main[..1000]
        .iter()
        .zip(&check)
        .filter(|(a, b)| a.certified && b.extinct_at().is_some())
        .count();
    outcome(
        fit.exponent_positive() && below && fit.extinct >= 1000,
        format!(
            "a={:.3} CI=({:.3}, {:.3}) over t in [{:.2}, {:.2}], {} extinct / {} trials, eps=0.5 tail below eps=0: {below}, deaths between |xi|={k} and {}: {late}/1000",
            fit.exponent,
            fit.exponent_ci.0,
            fit.exponent_ci.1,
            fit.fit_range.0,
            fit.fit_range.1,
            fit.extinct,
            fit.trials,
            2 * k
        ),
    )
}

fn c6_survival(_: &mut Shared) -> Outcome {
    let stop = StopRule {
        t_max: 1000.0,
        certify_size: Some(100),
    };
    let curve = survival_curve(boosted(0.5), &[1, 2, 4, 8, 16], stop, 4000, 0x5eed_0006, SimOptions::default()).unwrap();
    let fit = curve.fit.clone().unwrap();
    let thetas: Vec<String> = curve.points.iter().map(|p| format!("{}:{:.4}", p.n, p.theta)).collect();
    outcome(
        curve.monotone_within_3sigma && fit.slope > 0.0,
        format!("theta {}, slope={:.3}+-{:.3}", thetas.join(" "), fit.slope, fit.slope_se),
    )
}

fn c7_deviation(sh: &mut Shared) -> Outcome {
    let a = sh.stationary();
    let alpha = estimate_edge_speed(a, 512.0).unwrap().alpha;
    let p = large_deviation_profile(a, alpha, &[64.0, 128.0, 256.0, 512.0], 0.25, 1.0, 2.0);
    let probs: Vec<String> = p.points.iter().map(|x| format!("{}:{:.4}", x.x, x.probability)).collect();
    outcome(p.nonincreasing, format!("P(|R(t)-alpha t| > t^0.75): {}", probs.join(" ")))
}

fn c8_boxes(_: &mut Shared) -> Outcome {
    let p = Params::standard(LAMBDA_C_ESTIMATE).unwrap();
    let fit = fit_box_scaling(p, &[8.0, 16.0, 32.0, 64.0], 0.5, 1000, 0x5eed_0008).unwrap();
    let in_band = fit.points.iter().all(|q| (0.2..=0.8).contains(&q.p_at_w));
    let t = 64.0;
    let sup: Vec<f64> = (0..1200u64)
        .into_par_iter()
        .map(|i| half_line_edge_supremum(p, t, trial_seed(0x5eed_0080, i)).unwrap())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let grid: Vec<f64> = (1..=16).map(|k| 0.25 * k as f64).collect();
    let env = fit_edge_envelope(&sup, t, fit.delta_hat, &grid, 1000, 20).unwrap();
    let widths: Vec<String> = fit.points.iter().map(|q| format!("{}:{}({:.2})", q.n, q.w, q.p_at_w)).collect();
    outcome(
        in_band && fit.exponent_ci.1 < 1.0 && env.fit.r_squared >= 0.9,
        format!(
            "w(n) {}, exponent={:.3} CI=({:.3}, {:.3}), envelope R^2={:.3} over {} points ({} runs)",
            widths.join(" "),
            fit.exponent,
            fit.exponent_ci.0,
            fit.exponent_ci.1,
            env.fit.r_squared,
            env.fit.n,
            env.trials
        ),
    )
}

fn c9_mixing(sh: &mut Shared) -> Outcome {
    let series: Vec<Vec<f64>> = sh.stationary().iter().filter(|t| t.is_valid()).map(|t| increments(t, 512.0)).collect();
    let r = mixing_profile(&series, 10);
    let null = mixing_profile(&iid_null_series(&series, 0x5eed_0009), 10);
    let exp = r.decay_exponent.unwrap_or(f64::NAN);
    let head: Vec<String> = r.alpha_hat.iter().take(6).map(|a| format!("{a:.4}")).collect();
    outcome(
        r.decreasing() && exp > 0.0 && null.within_floor(),
        format!(
            "alpha(0..5) {}, trend slope {:.2e}, decay exponent {:.3}, iid null within floor: {}",
            head.join(" "),
            r.trend.slope,
            exp,
            null.within_floor()
        ),
    )
}

fn c10_renewal(_: &mut Shared) -> Outcome {
    let recs = renewal_batch(
        boosted(0.5),
        &InitialCondition::interval(-5, 5),
        200.0,
        1000,
        0x5eed_0010,
        SimOptions::default(),
    )
    .unwrap();
    let failed = recs.iter().filter(|r| r.is_err()).count();
    let ok: Vec<_> = recs.into_iter().filter_map(|r| r.ok()).collect();
    let rep = renewal_statistics(&ok, 20).unwrap();
    let tail = rep.tail_fit.clone();
    let a = tail.as_ref().map_or(f64::NAN, |f| f.exponent);
    let ci = tail.as_ref().map_or((f64::NAN, f64::NAN), |f| f.exponent_ci);
    outcome(
        rep.chi2_p >= 1e-3 && a > 0.0,
        format!(
            "{} records ({failed} errors), mean I={:.3}, chi2={:.2} df={} p={:.3}, P(T>n) exponent {:.3} CI=({:.3}, {:.3})",
            ok.len(),
            rep.mean_attempts,
            rep.chi2,
            rep.chi2_df,
            rep.chi2_p,
            a,
            ci.0,
            ci.1
        ),
    )
}

fn c11_determinism(_: &mut Shared) -> Outcome {
    let mut cfg = suite_descriptor("edge-speed").unwrap().config;
    cfg.initial = InitialCondition::SingleOrigin;
    cfg.t_max = 50.0;
    cfg.trials = 48;
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let runs: Vec<_> = [1usize, 2, 4]
        .iter()
        .zip(&dirs)
        .map(|(&n, d)| {
            let mut c = cfg.clone();
            c.output_dir = d.path().to_path_buf();
            run_experiment_with_threads(&c, n).unwrap()
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0].manifest.artifacts == w[1].manifest.artifacts && w[0].manifest.trials == w[1].manifest.trials);
    let mut replayed = 0;
    for r in &runs {
        verify_output_dir(r.manifest_path.parent().unwrap()).unwrap();
        for i in 0..cfg.trials {
            if replay(&r.manifest_path, i).is_ok() {
                replayed += 1;
            }
        }
    }
    let total = 3 * cfg.trials;
    outcome(
        same && replayed == total,
        format!("artifacts identical across 1/2/4 threads: {same}, {replayed}/{total} replays digest-identical"),
    )
}

fn c12_paths(_: &mut Shared) -> Outcome {
    let p = Params::standard(LAMBDA_C_ESTIMATE).unwrap();
    let r = path_oracle_batch(p, 1000, 1.0, 22, 0x5eed_0012).unwrap();
    outcome(
        r.disagreements.is_empty() && r.skipped == 0 && r.comparisons == 16 * 1000,
        format!(
            "{} windows, {} comparisons, {} skipped, {} disagreements",
            r.windows,
            r.comparisons,
            r.skipped,
            r.disagreements.len()
        ),
    )
}

type Criterion = (u8, &'static str, f64, fn(&mut Shared) -> Outcome);

fn main() {
    let wanted: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 12] = [
        (1, "oracle agreement", 120.0, c1_oracle),
        (2, "coupling exactness", 60.0, c2_coupling),
        (3, "edge speed", 600.0, c3_speed),
        (4, "CLT shape", 600.0, c4_clt),
        (5, "extinction-time tail", 600.0, c5_tail),
        (6, "survival vs size", 300.0, c6_survival),
        (7, "large-deviation shape", 600.0, c7_deviation),
        (8, "box crossing", 600.0, c8_boxes),
        (9, "mixing", 180.0, c9_mixing),
        (10, "renewal structure", 300.0, c10_renewal),
        (11, "determinism", f64::INFINITY, c11_determinism),
        (12, "path oracle", f64::INFINITY, c12_paths),
    ];
    let covered: std::collections::BTreeSet<u8> = named_suites().iter().flat_map(|d| d.criteria.clone()).collect();
    assert_eq!(covered.len(), 12, "suite registry must cover every criterion");
    let mut shared = Shared::default();
    let mut failed = Vec::new();
    for (n, name, limit, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = run(&mut shared);
        let secs = start.elapsed().as_secs_f64();
        let pass = o.pass && secs <= limit;
        if !pass {
            failed.push(n);
        }
        let budget = if limit.is_finite() { format!("{secs:.1}s of {limit:.0}s") } else { format!("{secs:.1}s") };
        println!(
            "criterion {n:>2} {:<22} {}  [{budget}] {}",
            name,
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if let Some(s) = &shared.stationary {
        println!("shared eps=0.5 stationary batch: {} of {} trials valid", valid_count(s), s.len());
    }
    if failed.is_empty() {
        println!("all selected criteria pass");
        return;
    }
    println!("failed criteria: {failed:?}");
    // Red criteria are reported, not hidden; set ACCEPTANCE_STRICT=1 to
    // turn them into a failing exit status.
    if std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
        std::process::exit(1);
    }
}
