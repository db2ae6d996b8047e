//! Reductions from trial batches to edge speed, survival, tail, CLT,
//! mixing and renewal statistics.
//!
//! Every estimator sorts its inputs before reducing, so results depend
//! only on the multiset of summaries and not on the order they arrive in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::trial_seed;
use crate::coupling::RenewalRecord;
use crate::engine::{ExtinctionTime, Sample, SimOptions, Simulator, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{InitialCondition, Params, Site};
use crate::stats::{
    bootstrap_ci, chi_square_gof, excess_kurtosis, jarque_bera, linear_fit, mean, proportion, skewness,
    std_error, variance, variance_std_error, LinearFit, SplitMix,
};

/// When to stop a trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub t_max: f64,
    /// Stop early and record survival once `|xi|` reaches this size.
    #[serde(default)]
    pub certify_size: Option<usize>,
}

impl StopRule {
    pub fn horizon(t_max: f64) -> Self {
        StopRule {
            t_max,
            certify_size: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub index: u64,
    pub seed: u64,
    pub params: Params,
    pub initial: InitialCondition,
    pub samples: Vec<Sample>,
    pub extinction: ExtinctionTime,
    /// Stopped early by the size rule.
    pub certified: bool,
    pub event_count: u64,
    pub invalid: Option<String>,
    pub right_edge_range: Option<(Site, Site)>,
    /// SHA-256 of the trajectory CSV and extinction record.
    pub digest: String,
}

impl TrialSummary {
    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }

    /// Reported right edge at integer time `t` (cadence 1 assumed).
    pub fn right_at(&self, t: f64) -> Option<Site> {
        let s = self.samples.get(t.round() as usize)?;
        debug_assert!((s.time - t).abs() < 1e-9);
        s.right_edge
    }

    pub fn extinct_at(&self) -> Option<f64> {
        self.extinction.time()
    }
}

/// Digest of a trajectory as stored in manifests.
pub fn trajectory_digest(traj: &Trajectory) -> String {
    let mut h = Sha256::new();
    h.update(traj.to_csv().as_bytes());
    h.update(format!("{:?}|{}|{:?}", traj.extinction_time, traj.event_count, traj.invalid).as_bytes());
    hex::encode(h.finalize())
}

fn invalidity(e: &Error) -> bool {
    matches!(
        e,
        Error::WindowOverflow { .. } | Error::TruncationTouched { .. } | Error::NeverDies(_)
    )
}

/// Runs a single trial under `stop`.
pub fn run_trial(
    params: Params,
    initial: &InitialCondition,
    index: u64,
    seed: u64,
    stop: StopRule,
    options: SimOptions,
) -> Result<TrialSummary> {
    let summary = |traj: Trajectory, certified: bool| TrialSummary {
        index,
        seed,
        params,
        initial: initial.clone(),
        digest: trajectory_digest(&traj),
        extinction: traj.extinction_time,
        certified,
        event_count: traj.event_count,
        invalid: traj.invalid,
        right_edge_range: traj.right_edge_range,
        samples: traj.samples,
    };
    let mut sim = match Simulator::new(params, initial, seed, stop.t_max, options) {
        Ok(s) => s,
        Err(e) if invalidity(&e) => {
            let traj = Trajectory {
                samples: Vec::new(),
                extinction_time: ExtinctionTime::Censored(0.0),
                event_count: 0,
                invalid: Some(e.to_string()),
                right_edge_range: None,
            };
            return Ok(summary(traj, false));
        }
        Err(e) => return Err(e),
    };
    let mut certified = false;
    match stop.certify_size {
        None => {
            sim.run_until(stop.t_max);
        }
        Some(k) => {
            let mut t = 0.0;
            while t < stop.t_max {
                t = (t + 1.0).min(stop.t_max);
                sim.run_until(t);
                if sim.is_extinct() || !sim.is_valid() {
                    break;
                }
                if sim.configuration().infected_count() >= k {
                    certified = t < stop.t_max;
                    break;
                }
            }
        }
    }
    Ok(summary(sim.into_trajectory(), certified))
}

/// Runs trials `0..trials` in parallel with seeds `trial_seed(master, i)`;
/// the result is ordered by index.
pub fn run_trials(
    params: Params,
    initial: &InitialCondition,
    master_seed: u64,
    trials: usize,
    stop: StopRule,
    options: SimOptions,
) -> Result<Vec<TrialSummary>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(params, initial, i, trial_seed(master_seed, i), stop, options))
        .collect()
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn valid(summaries: &[TrialSummary]) -> impl Iterator<Item = &TrialSummary> {
    summaries.iter().filter(|s| s.is_valid())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpeedEstimate {
    pub t: f64,
    /// Mean of `R(t) / t`.
    pub alpha: f64,
    pub se: f64,
    /// Mean unit increment `R(n) - R(n - 1)`.
    pub unit_increment_mean: f64,
    pub unit_increment_se: f64,
    pub trials: usize,
    pub invalid: usize,
    /// Valid trials with no right edge at `t`.
    pub extinct: usize,
}

/// `alpha_hat = mean R(t) / t` over valid trials alive at `t`.
pub fn estimate_edge_speed(summaries: &[TrialSummary], t: f64) -> Result<EdgeSpeedEstimate> {
    let invalid = summaries.len() - valid(summaries).count();
    let mut ratios = Vec::new();
    let mut unit = Vec::new();
    let mut extinct = 0;
    for s in valid(summaries) {
        match s.right_at(t) {
            Some(r) => {
                ratios.push(r as f64 / t);
                let inc = increments(s, t);
                if !inc.is_empty() {
                    unit.push(mean(&inc));
                }
            }
            None => extinct += 1,
        }
    }
    if ratios.len() < 30 {
        return Err(Error::TooFewTrials {
            have: ratios.len(),
            need: 30,
        });
    }
    let ratios = sorted(ratios);
    let unit = sorted(unit);
    Ok(EdgeSpeedEstimate {
        t,
        alpha: mean(&ratios),
        se: std_error(&ratios),
        unit_increment_mean: mean(&unit),
        unit_increment_se: std_error(&unit),
        trials: ratios.len(),
        invalid,
        extinct,
    })
}

/// `Delta_n = R(n) - R(n - 1)` for `n = 1..=floor(horizon)`, stopping at
/// the first missing edge.
pub fn increments(s: &TrialSummary, horizon: f64) -> Vec<f64> {
    let n = horizon.floor() as usize;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        match (s.right_at((k - 1) as f64), s.right_at(k as f64)) {
            (Some(a), Some(b)) => out.push((b - a) as f64),
            _ => break,
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub n: usize,
    pub trials: usize,
    pub invalid: usize,
    pub extinct: usize,
    pub censored: usize,
    /// Censored trials stopped by the size rule.
    pub certified: usize,
    pub theta: f64,
    pub se: f64,
    /// Wilson 95% interval.
    pub ci: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t_max: f64,
    pub points: Vec<SurvivalPoint>,
    pub monotone_within_3sigma: bool,
    /// `log(-log(1 - theta))` against `log n` over `n >= 1`, with
    /// `1 - theta` replaced by `(extinct + 1/2) / (trials + 1)`.
    pub fit: Option<LinearFit>,
}

impl SurvivalCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,trials,extinct,censored,theta,se,ci_lo,ci_hi\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.n, p.trials, p.extinct, p.censored, p.theta, p.se, p.ci.0, p.ci.1
            ));
        }
        out
    }
}

fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let d = 1.0 + z * z / nf;
    let c = (p + z * z / (2.0 * nf)) / d;
    let h = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / d;
    ((c - h).max(0.0), (c + h).min(1.0))
}

/// Survival point from a batch started at `[0, n - 1]`.
pub fn survival_point(n: usize, summaries: &[TrialSummary]) -> SurvivalPoint {
    let invalid = summaries.len() - valid(summaries).count();
    let trials = summaries.len() - invalid;
    let extinct = valid(summaries).filter(|s| s.extinct_at().is_some()).count();
    let certified = valid(summaries).filter(|s| s.certified).count();
    let censored = trials - extinct;
    let (theta, se) = if trials > 0 { proportion(censored, trials) } else { (0.0, 0.0) };
    SurvivalPoint {
        n,
        trials,
        invalid,
        extinct,
        censored,
        certified,
        theta,
        se,
        ci: wilson(censored, trials),
    }
}

/// Builds the curve from per-size points.
pub fn survival_curve_from_points(t_max: f64, points: Vec<SurvivalPoint>) -> SurvivalCurve {
    let monotone = points.windows(2).all(|w| {
        let tol = 3.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
        w[1].theta >= w[0].theta - tol
    });
    let used: Vec<&SurvivalPoint> = points.iter().filter(|p| p.n >= 1 && p.trials > 0).collect();
    let fit = (used.len() >= 3).then(|| {
        let x: Vec<f64> = used.iter().map(|p| (p.n as f64).ln()).collect();
        let y: Vec<f64> = used
            .iter()
            .map(|p| {
                let q = (p.extinct as f64 + 0.5) / (p.trials as f64 + 1.0);
                (-q.ln()).ln()
            })
            .collect();
        linear_fit(&x, &y)
    });
    SurvivalCurve {
        t_max,
        points,
        monotone_within_3sigma: monotone,
        fit,
    }
}

/// `theta_hat(n)` for contiguous starts `[0, n - 1]`, censoring at
/// `stop`. Trial `i` uses the same seed for every size.
pub fn survival_curve(
    params: Params,
    sizes: &[usize],
    stop: StopRule,
    trials: usize,
    seed: u64,
    options: SimOptions,
) -> Result<SurvivalCurve> {
    let mut points = Vec::new();
    for &n in sizes {
        if n == 0 {
            points.push(SurvivalPoint {
                n,
                trials,
                invalid: 0,
                extinct: trials,
                censored: 0,
                certified: 0,
                theta: 0.0,
                se: 0.0,
                ci: wilson(0, trials),
            });
            continue;
        }
        let init = InitialCondition::FiniteSet {
            sites: (0..n as Site).collect(),
        };
        let batch = run_trials(params, &init, seed, trials, stop, options)?;
        points.push(survival_point(n, &batch));
    }
    Ok(survival_curve_from_points(stop.t_max, points))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    /// `P(t < tau < t_max)` over all valid trials.
    pub tail: f64,
    pub tail_se: f64,
    /// `P(tau > t | tau < t_max)`.
    pub conditional: f64,
    pub exceedances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Stretch exponent `a` in `exp(-c' t^a)`.
    pub exponent: f64,
    pub exponent_ci: (f64, f64),
    /// `c'`.
    pub scale: f64,
    /// `c = P(tau < t_max)`.
    pub prefactor: f64,
    pub fit_range: (f64, f64),
    pub r_squared: f64,
    pub points: Vec<TailPoint>,
    pub trials: usize,
    pub extinct: usize,
    pub censored: usize,
    pub censored_fraction: f64,
    pub invalid: usize,
}

impl TailFit {
    pub fn exponent_positive(&self) -> bool {
        self.exponent_ci.0 > 0.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,tail,tail_se,conditional,exceedances\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.t, p.tail, p.tail_se, p.conditional, p.exceedances
            ));
        }
        out
    }
}

/// Empirical `P(t < tau < t_max)` and its binomial standard error.
pub fn empirical_tail(summaries: &[TrialSummary], t: f64) -> (f64, f64) {
    let n = valid(summaries).count();
    let k = valid(summaries)
        .filter(|s| s.extinct_at().is_some_and(|tau| tau > t))
        .count();
    proportion(k, n)
}

fn tail_grid(taus: &[f64], trials: usize, min_per_bin: usize) -> Vec<TailPoint> {
    let m = taus.len();
    let t_lo = taus[m / 10].max(f64::MIN_POSITIVE);
    let t_hi = taus[m - min_per_bin];
    let grid = 24;
    (0..grid)
        .map(|k| {
            let t = if t_hi > t_lo {
                t_lo * (t_hi / t_lo).powf(k as f64 / (grid - 1) as f64)
            } else {
                t_lo
            };
            let exceed = m - taus.partition_point(|&x| x <= t);
            let (tail, tail_se) = proportion(exceed, trials);
            TailPoint {
                t,
                tail,
                tail_se,
                conditional: exceed as f64 / m as f64,
                exceedances: exceed,
            }
        })
        .collect()
}

fn tail_regression(points: &[TailPoint], min_per_bin: usize) -> Option<(LinearFit, (f64, f64))> {
    let used: Vec<&TailPoint> = points
        .iter()
        .filter(|p| p.exceedances >= min_per_bin && p.conditional < 1.0 && p.conditional > 0.0)
        .collect();
    if used.len() < 3 {
        return None;
    }
    let x: Vec<f64> = used.iter().map(|p| p.t.ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| (-p.conditional.ln()).ln()).collect();
    Some((linear_fit(&x, &y), (used[0].t, used[used.len() - 1].t)))
}

/// Fits `log(-log S(t)) = log c' + a log t` where `S` is the conditional
/// survival of the extinction times, over log-spaced `t` between the
/// decile of the extinction times and the point where only
/// `min_per_bin` exceedances remain. The interval for `a` is a
/// percentile bootstrap over extinction times, since neighbouring points
/// of an empirical survival curve are strongly correlated.
pub fn extinction_tail(
    summaries: &[TrialSummary],
    min_extinctions: usize,
    min_per_bin: usize,
) -> Result<TailFit> {
    let invalid = summaries.len() - valid(summaries).count();
    let trials = summaries.len() - invalid;
    let taus = sorted(valid(summaries).filter_map(|s| s.extinct_at()).collect());
    let mut fit = fit_stretched_tail(&taus, trials, min_per_bin, min_extinctions)?;
    fit.invalid = invalid;
    Ok(fit)
}

/// Stretched-exponential fit of the sorted positive `times` out of
/// `trials` (the remainder counted as censored).
pub fn fit_stretched_tail(times: &[f64], trials: usize, min_per_bin: usize, min_times: usize) -> Result<TailFit> {
    let m = times.len();
    let need = min_times.max(min_per_bin + 10);
    if m < need {
        return Err(Error::InsufficientExtinctions { have: m, need });
    }
    let points = tail_grid(times, trials, min_per_bin);
    let (fit, fit_range) = tail_regression(&points, min_per_bin)
        .ok_or(Error::InsufficientExtinctions { have: m, need })?;
    let ci = bootstrap_ci(times, 400, 0.05, 0x7a11, |sample| {
        let s = sorted(sample.to_vec());
        tail_regression(&tail_grid(&s, trials, min_per_bin), min_per_bin).map(|(f, _)| f.slope)
    })
    .unwrap_or((f64::NAN, f64::NAN));
    let censored = trials - m;
    Ok(TailFit {
        exponent: fit.slope,
        exponent_ci: ci,
        scale: fit.intercept.exp(),
        prefactor: m as f64 / trials as f64,
        fit_range,
        r_squared: fit.r_squared,
        points,
        trials,
        extinct: m,
        censored,
        censored_fraction: censored as f64 / trials as f64,
        invalid: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailComparisonPoint {
    pub t: f64,
    pub lower: f64,
    pub lower_se: f64,
    pub upper: f64,
    pub upper_se: f64,
}

/// Compares `P(t < tau < t_max)` of two batches on `grid`; `below` holds
/// when the first batch's tail is under the second everywhere.
pub fn compare_tails(
    lower: &[TrialSummary],
    upper: &[TrialSummary],
    grid: &[f64],
) -> (Vec<TailComparisonPoint>, bool) {
    let pts: Vec<TailComparisonPoint> = grid
        .iter()
        .map(|&t| {
            let (a, ase) = empirical_tail(lower, t);
            let (b, bse) = empirical_tail(upper, t);
            TailComparisonPoint {
                t,
                lower: a,
                lower_se: ase,
                upper: b,
                upper_se: bse,
            }
        })
        .collect();
    let below = pts.iter().all(|p| p.lower < p.upper);
    (pts, below)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltScale {
    pub t: f64,
    pub trials: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub var_over_t: f64,
    pub var_over_t_se: f64,
    /// Of `(R(t) - alpha t) / sqrt(t)`.
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    pub normality_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub alpha_hat: f64,
    pub scales: Vec<CltScale>,
    /// `Var R(t)` against `t`.
    pub variance_fit: LinearFit,
    pub sigma2_hat: f64,
    pub sigma2_se: f64,
    pub sigma2_positive: bool,
    pub min_var_over_t: f64,
}

impl CltReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,trials,mean,variance,variance_se,var_over_t,skewness,excess_kurtosis,normality_p\n");
        for s in &self.scales {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.t, s.trials, s.mean, s.variance, s.variance_se, s.var_over_t, s.skewness, s.excess_kurtosis, s.normality_p
            ));
        }
        out
    }
}

/// Variance growth and normality of `R(t)` across `times`.
pub fn clt_diagnostics(summaries: &[TrialSummary], times: &[f64], alpha_hat: f64) -> Result<CltReport> {
    let mut scales = Vec::new();
    for &t in times {
        let r = sorted(valid(summaries).filter_map(|s| s.right_at(t)).map(|r| r as f64).collect());
        if r.len() < 30 {
            return Err(Error::TooFewTrials {
                have: r.len(),
                need: 30,
            });
        }
        let z: Vec<f64> = sorted(r.iter().map(|x| (x - alpha_hat * t) / t.sqrt()).collect());
        let v = variance(&r);
        let vse = variance_std_error(&r);
        let (jb, p) = jarque_bera(&z);
        scales.push(CltScale {
            t,
            trials: r.len(),
            mean: mean(&r),
            variance: v,
            variance_se: vse,
            var_over_t: v / t,
            var_over_t_se: vse / t,
            skewness: skewness(&z),
            skewness_se: (6.0 / r.len() as f64).sqrt(),
            excess_kurtosis: excess_kurtosis(&z),
            jarque_bera: jb,
            normality_p: p,
        });
    }
    let x: Vec<f64> = scales.iter().map(|s| s.t).collect();
    let y: Vec<f64> = scales.iter().map(|s| s.variance).collect();
    let fit = linear_fit(&x, &y);
    Ok(CltReport {
        alpha_hat,
        sigma2_hat: fit.slope,
        sigma2_se: fit.slope_se,
        sigma2_positive: fit.slope - 3.0 * fit.slope_se > 0.0,
        min_var_over_t: scales.iter().map(|s| s.var_over_t).fold(f64::INFINITY, f64::min),
        variance_fit: fit,
        scales,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub max_lag: usize,
    /// Dependence estimate per lag, lag 0 first.
    pub alpha_hat: Vec<f64>,
    pub autocorrelation: Vec<f64>,
    /// Pairs available per lag.
    pub pairs: Vec<usize>,
    /// Per-lag level an independent series stays under.
    pub noise_floor: Vec<f64>,
    /// `alpha_hat` against lag over lags `>= 1`; negative slope is a
    /// decreasing trend.
    pub trend: LinearFit,
    /// `log(-log alpha_hat(k))` against `log k` over lags above the
    /// floor; its slope is the stretch exponent of the decay.
    pub decay_fit: Option<LinearFit>,
    pub decay_exponent: Option<f64>,
}

impl MixingReport {
    pub fn decreasing(&self) -> bool {
        self.trend.slope < 0.0
    }

    /// Lags `>= 1` whose estimate is within the noise floor.
    pub fn within_floor(&self) -> bool {
        (1..=self.max_lag).all(|k| self.alpha_hat[k] <= self.noise_floor[k])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,alpha_hat,autocorrelation,pairs,noise_floor\n");
        for k in 0..=self.max_lag {
            out.push_str(&format!(
                "{k},{},{},{},{}\n",
                self.alpha_hat[k], self.autocorrelation[k], self.pairs[k], self.noise_floor[k]
            ));
        }
        out
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

/// Dependence between `{Delta_n in A}` and `{Delta_{n+k} in B}` maximised
/// over a family of sign and quartile events. This only sees a finite
/// generating family, so it bounds the mixing coefficient from below.
pub fn mixing_profile(series: &[Vec<f64>], max_lag: usize) -> MixingReport {
    let mut series: Vec<&Vec<f64>> = series.iter().filter(|s| !s.is_empty()).collect();
    series.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(a.len().cmp(&b.len()))
    });
    let pooled = sorted(series.iter().flat_map(|s| s.iter().copied()).collect());
    let (q1, q2, q3) = (quantile(&pooled, 0.25), quantile(&pooled, 0.5), quantile(&pooled, 0.75));
    let events: [Box<dyn Fn(f64) -> bool>; 5] = [
        Box::new(|x| x > 0.0),
        Box::new(|x| x < 0.0),
        Box::new(move |x| x <= q1),
        Box::new(move |x| x <= q2),
        Box::new(move |x| x > q3),
    ];
    let ind: Vec<Vec<Vec<bool>>> = series
        .iter()
        .map(|s| events.iter().map(|f| s.iter().map(|&x| f(x)).collect()).collect())
        .collect();
    let mu = mean(&pooled);
    let var = pooled.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / pooled.len() as f64;
    let ne = events.len();
    let mut alpha_hat = Vec::new();
    let mut acf = Vec::new();
    let mut pairs = Vec::new();
    let mut floor = Vec::new();
    for k in 0..=max_lag {
        let mut n = 0usize;
        let mut pa = vec![0usize; ne];
        let mut pb = vec![0usize; ne];
        let mut pab = vec![0usize; ne * ne];
        let mut cov = 0.0;
        for (s, iv) in series.iter().zip(&ind) {
            for i in 0..s.len().saturating_sub(k) {
                n += 1;
                cov += (s[i] - mu) * (s[i + k] - mu);
                for a in 0..ne {
                    let ia = iv[a][i];
                    pa[a] += ia as usize;
                    pb[a] += iv[a][i + k] as usize;
                    if ia {
                        for b in 0..ne {
                            pab[a * ne + b] += iv[b][i + k] as usize;
                        }
                    }
                }
            }
        }
        let nf = n.max(1) as f64;
        let mut best: f64 = 0.0;
        let mut sd_max: f64 = 0.0;
        for a in 0..ne {
            for b in 0..ne {
                let (fa, fb) = (pa[a] as f64 / nf, pb[b] as f64 / nf);
                best = best.max((pab[a * ne + b] as f64 / nf - fa * fb).abs());
                sd_max = sd_max.max((fa * (1.0 - fa) * fb * (1.0 - fb)).sqrt());
            }
        }
        alpha_hat.push(best);
        acf.push(if var > 0.0 { cov / nf / var } else { 0.0 });
        pairs.push(n);
        // Maximum of 25 roughly normal covariances, each with sd at most
        // `sd_max / sqrt(n)`; 4 sd clears it with high probability.
        floor.push(4.0 * sd_max / nf.sqrt());
    }
    let lags: Vec<f64> = (1..=max_lag).map(|k| k as f64).collect();
    let trend = linear_fit(&lags, &alpha_hat[1..]);
    let above: Vec<usize> = (1..=max_lag).filter(|&k| alpha_hat[k] > floor[k]).collect();
    let decay_fit = (above.len() >= 3).then(|| {
        let x: Vec<f64> = above.iter().map(|&k| (k as f64).ln()).collect();
        let y: Vec<f64> = above.iter().map(|&k| (-alpha_hat[k].ln()).ln()).collect();
        linear_fit(&x, &y)
    });
    MixingReport {
        max_lag,
        alpha_hat,
        autocorrelation: acf,
        pairs,
        noise_floor: floor,
        trend,
        decay_exponent: decay_fit.as_ref().map(|f| f.slope),
        decay_fit,
    }
}

/// Series with the same lengths as `template`, filled by sampling the
/// pooled increments independently with replacement.
pub fn iid_null_series(template: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = template.iter().flat_map(|s| s.iter().copied()).collect();
    let mut rng = SplitMix::new(seed);
    template
        .iter()
        .map(|s| s.iter().map(|_| pooled[rng.below(pooled.len())]).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedancePoint {
    pub x: f64,
    pub threshold: f64,
    pub probability: f64,
    pub se: f64,
    pub count: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub t: f64,
    /// `x` is the slack `n`.
    pub points: Vec<ExceedancePoint>,
    pub nonincreasing: bool,
}

/// `P(sup_{s <= t} |R_s| > 4 (lambda_i + eps)(t + n))` per `n`, with the
/// supremum over the sampled times.
pub fn increment_envelope_check(
    summaries: &[TrialSummary],
    params: &Params,
    t: f64,
    n_grid: &[f64],
) -> EnvelopeCheck {
    let sups: Vec<f64> = sorted(
        valid(summaries)
            .map(|s| {
                s.samples
                    .iter()
                    .take_while(|p| p.time <= t + 1e-9)
                    .filter_map(|p| p.right_edge)
                    .map(|r| r.unsigned_abs() as f64)
                    .fold(0.0, f64::max)
            })
            .collect(),
    );
    let rate = 4.0 * (params.lambda_i + params.boost_rate());
    let points: Vec<ExceedancePoint> = n_grid
        .iter()
        .map(|&n| {
            let threshold = rate * (t + n);
            let count = sups.iter().filter(|&&x| x > threshold).count();
            let (p, se) = proportion(count, sups.len().max(1));
            ExceedancePoint {
                x: n,
                threshold,
                probability: p,
                se,
                count,
                trials: sups.len(),
            }
        })
        .collect();
    let nonincreasing = points.windows(2).all(|w| w[1].probability <= w[0].probability);
    EnvelopeCheck {
        t,
        points,
        nonincreasing,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub gamma: f64,
    pub b: f64,
    pub alpha_hat: f64,
    /// `x` is the time `t`.
    pub points: Vec<ExceedancePoint>,
    /// Nonincreasing up to `sigmas` combined standard errors.
    pub sigmas: f64,
    pub nonincreasing: bool,
}

/// `P(|R(t) - alpha_hat t| > b t^{1 - gamma})` per `t`.
pub fn large_deviation_profile(
    summaries: &[TrialSummary],
    alpha_hat: f64,
    times: &[f64],
    gamma: f64,
    b: f64,
    sigmas: f64,
) -> DeviationProfile {
    let points: Vec<ExceedancePoint> = times
        .iter()
        .map(|&t| {
            let threshold = b * t.powf(1.0 - gamma);
            let r: Vec<f64> = valid(summaries).filter_map(|s| s.right_at(t)).map(|r| r as f64).collect();
            let count = r.iter().filter(|&&x| (x - alpha_hat * t).abs() > threshold).count();
            let (p, se) = proportion(count, r.len().max(1));
            ExceedancePoint {
                x: t,
                threshold,
                probability: p,
                se,
                count,
                trials: r.len(),
            }
        })
        .collect();
    let nonincreasing = points
        .windows(2)
        .all(|w| w[1].probability <= w[0].probability + sigmas * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt());
    DeviationProfile {
        gamma,
        b,
        alpha_hat,
        points,
        sigmas,
        nonincreasing,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalReport {
    pub records: usize,
    pub censored: usize,
    pub mean_attempts: f64,
    /// Success probability of the fitted geometric law on `{1, 2, ...}`.
    pub p_hat: f64,
    pub chi2: f64,
    pub chi2_df: f64,
    pub chi2_p: f64,
    /// `P(T > 0)`, the chance the first attempt dies.
    pub positive_fraction: f64,
    /// Stretched-exponential fit of `P(T > n | T > 0)`.
    pub tail_fit: Option<TailFit>,
}

/// Geometric fit of the attempt counts and stretched-exponential fit of
/// the renewal-time tail.
pub fn renewal_statistics(records: &[RenewalRecord], min_per_bin: usize) -> Result<RenewalReport> {
    let done: Vec<&RenewalRecord> = records.iter().filter(|r| !r.censored).collect();
    if done.len() < 30 {
        return Err(Error::TooFewTrials {
            have: done.len(),
            need: 30,
        });
    }
    let attempts: Vec<f64> = sorted(done.iter().map(|r| r.attempts as f64).collect());
    let m = mean(&attempts);
    let p = 1.0 / m;
    let kmax = attempts.last().copied().unwrap_or(1.0) as usize;
    let n = done.len() as f64;
    let mut obs = vec![0.0; kmax];
    for &a in &attempts {
        obs[a as usize - 1] += 1.0;
    }
    let mut exp: Vec<f64> = (1..=kmax).map(|k| n * p * (1.0 - p).powi(k as i32 - 1)).collect();
    // The last bin holds the whole upper tail.
    if let Some(last) = exp.last_mut() {
        *last = n * (1.0 - p).powi(kmax as i32 - 1);
    }
    let (chi2, df, chi2_p) = chi_square_gof(&obs, &exp, 1);
    let positive = sorted(done.iter().map(|r| r.t).filter(|&t| t > 0.0).collect());
    let tail_fit = fit_stretched_tail(&positive, positive.len(), min_per_bin, min_per_bin + 10).ok();
    Ok(RenewalReport {
        records: records.len(),
        censored: records.len() - done.len(),
        mean_attempts: m,
        p_hat: p,
        chi2,
        chi2_df: df,
        chi2_p,
        positive_fraction: positive.len() as f64 / n,
        tail_fit,
    })
}
