//! Statistical and oracle-backed checks of individual operations.

use bmcp::clock::{trial_seed, ClockField, ClockKind, ClockObjectId, Direction};
use bmcp::coupling::{domination_check_liggett, spawn_auxiliary};
use bmcp::engine::{sample_stationary_shifted, SimOptions, Simulator};
use bmcp::estimators::{increment_envelope_check, run_trials, StopRule};
use bmcp::harness::{renewal_batch, run_experiment, suite_descriptor, verify_output_dir};
use bmcp::lattice::{Configuration, InitialCondition, Params, Variant, LAMBDA_C_ESTIMATE};
use bmcp::oracle::{build_generator, mask_of};
use bmcp::stats::{chi2_survival, kolmogorov_survival, ks_two_sample, mean, proportion, std_error};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Discrete, DiscreteCDF, Exp, Poisson};

fn boosted(eps: f64, v: Variant) -> Params {
    Params::boosted(LAMBDA_C_ESTIMATE, eps, v).unwrap()
}

/// One-sample Kolmogorov-Smirnov p-value against `cdf`.
fn ks_one_sample(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    kolmogorov_survival((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d)
}

#[test]
fn first_arrival_means_match_exponential() {
    let unit = Params::standard(1.0).unwrap();
    let fast = Params::standard(2.0).unwrap();
    let rec: Vec<f64> = (0..100_000).map(|s| ClockField::new(s, &unit).arrival(ClockObjectId::SiteRecovery(0), 0).unwrap()).collect();
    let edge_obj = ClockObjectId::DirectedEdge(3, Direction::Right);
    let edge: Vec<f64> = (0..100_000).map(|s| ClockField::new(s, &fast).arrival(edge_obj, 0).unwrap()).collect();
    assert!((mean(&rec) - 1.0).abs() <= 0.01, "{}", mean(&rec));
    assert!((mean(&edge) - 0.5).abs() <= 0.005, "{}", mean(&edge));
}

#[test]
fn inter_arrivals_are_exponential_per_kind() {
    let p = Params::new(1.6489, 2.1489, Variant::BoundaryModified).unwrap();
    let field = ClockField::new(99, &p);
    for obj in [
        ClockObjectId::SiteRecovery(7),
        ClockObjectId::DirectedEdge(-2, Direction::Left),
        ClockObjectId::BoostRight,
    ] {
        let rate = field.rate(obj);
        let code = obj.code();
        let gaps: Vec<f64> = (0..100_000).map(|k| field.increment(code, k, rate)).collect();
        let law = Exp::new(rate).unwrap();
        let pv = ks_one_sample(gaps, |x| law.cdf(x));
        assert!(pv >= 1e-3, "{obj:?} ({:?}): p = {pv}", obj.kind());
    }
    assert_eq!(ClockObjectId::BoostLeft.kind(), ClockKind::Boost);
}

#[test]
fn counts_in_disjoint_windows_are_independent() {
    // Contingency table of (count in [0, 1), count in [1, 2)) capped at 3.
    let p = Params::standard(1.0).unwrap();
    let obj = ClockObjectId::SiteRecovery(0);
    let mut table = [[0.0f64; 4]; 4];
    let seeds = 20_000;
    for s in 0..seeds {
        let f = ClockField::new(s, &p);
        let (mut a, mut b) = (0usize, 0usize);
        for k in 0.. {
            let t = f.arrival(obj, k).unwrap();
            if t >= 2.0 {
                break;
            }
            if t < 1.0 {
                a += 1;
            } else {
                b += 1;
            }
        }
        table[a.min(3)][b.min(3)] += 1.0;
    }
    let n = seeds as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..4).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut chi2 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let e = rows[i] * cols[j] / n;
            chi2 += (table[i][j] - e).powi(2) / e;
        }
    }
    let pv = chi2_survival(chi2, 9.0);
    assert!(pv >= 1e-3, "chi2 = {chi2}, p = {pv}");
    let pois = Poisson::new(1.0).unwrap();
    assert!((rows[0] / n - pois.pmf(0)).abs() < 0.015);
}

#[test]
fn box_record_counts_and_bytes() {
    let recovery_only = Params::new(0.0, 0.0, Variant::Standard).unwrap();
    for seed in 0..5 {
        let field = ClockField::new(seed, &recovery_only);
        let rec = field.arrivals_in_box(0, 0, 0.0, 1000.0, 1e6).unwrap();
        assert!(rec.boosts.is_empty());
        assert!((900..=1100).contains(&rec.events.len()), "{}", rec.events.len());
        assert_eq!(rec.to_bytes(), field.arrivals_in_box(0, 0, 0.0, 1000.0, 1e6).unwrap().to_bytes());
    }
    let view = ClockField::new(4, &recovery_only).translated_view(5, 7.0);
    let parent_first = (0..)
        .map(|k| ClockField::new(4, &recovery_only).arrival(ClockObjectId::SiteRecovery(5), k).unwrap())
        .find(|&t| t > 7.0)
        .unwrap();
    let mut cursors = bmcp::clock::ClockCursors::new();
    let child_first = view.next_arrival(&mut cursors, ClockObjectId::SiteRecovery(0), 0.0).unwrap();
    assert!((child_first - (parent_first - 7.0)).abs() < 1e-12);
}

#[test]
fn pure_death_singleton_is_exponential() {
    let p = Params::new(0.0, 0.0, Variant::BoundaryModified).unwrap();
    let times: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|s| {
            let mut sim = Simulator::new(p, &InitialCondition::SingleOrigin, trial_seed(1, s), 100.0, SimOptions::default()).unwrap();
            sim.run_until(100.0).extinction_time.time().expect("dies before 100")
        })
        .collect();
    assert!((mean(&times) - 1.0).abs() <= 0.01, "{}", mean(&times));
}

#[test]
fn holding_times_and_jump_mix_match_rates() {
    let p = boosted(0.5, Variant::BoundaryModified);
    let sites = [0, 1, 3];
    let probe = Simulator::closed_segment(p, 1, &[0], 0, SimOptions::default()).unwrap();
    assert!((probe.total_jump_rate() - 1.0).abs() < 1e-12);
    let cfg = Configuration::from_sites(-100, 100, &sites).unwrap();
    let build = |seed: u64| {
        let field = ClockField::new(seed, &p);
        Simulator::from_parts(p, cfg.clone(), field.view(), bmcp::engine::Domain::Open, SimOptions::default()).unwrap()
    };
    let rate = build(0).total_jump_rate();
    let counts = build(0).transition_counts();
    let n = 100_000;
    let firsts: Vec<(f64, ClockKind)> = (0..n as u64)
        .into_par_iter()
        .map(|s| {
            let mut sim = build(s);
            loop {
                let ev = sim.step().unwrap();
                if ev.effect != bmcp::engine::Effect::NoChange {
                    return (ev.time, ev.object.kind());
                }
            }
        })
        .collect();
    let holding: Vec<f64> = firsts.iter().map(|f| f.0).collect();
    assert!((mean(&holding) - 1.0 / rate).abs() <= 3.0 * std_error(&holding));
    let expected = [
        (ClockKind::Recovery, counts.recoveries as f64),
        (ClockKind::Edge, counts.edges as f64 * p.lambda_i),
        (ClockKind::Boost, counts.boosts as f64 * p.boost_rate()),
    ];
    for (kind, r) in expected {
        let k = firsts.iter().filter(|f| f.1 == kind).count();
        let (ph, se) = proportion(k, n);
        assert!((ph - r / rate).abs() <= 3.0 * se, "{kind:?}: {ph} vs {}", r / rate);
    }
}

#[test]
fn oracle_values_match_simulation() {
    let cases = [
        (Params::new(1.0, 1.5, Variant::BoundaryModified).unwrap(), 2usize, vec![0i64, 1]),
        (Params::new(1.6489, 2.1489, Variant::BoundaryModified).unwrap(), 3, vec![1]),
    ];
    for (p, n, start) in cases {
        let exact = build_generator(n, p).unwrap().extinction_probability_by(5.0)[mask_of(&start)];
        let trials = 10_000;
        let dead = (0..trials as u64)
            .into_par_iter()
            .filter(|&s| {
                let mut sim = Simulator::closed_segment(p, n, &start, trial_seed(77, s), SimOptions::default()).unwrap();
                sim.run_until(5.0);
                sim.is_extinct()
            })
            .count();
        let (ph, se) = proportion(dead, trials);
        assert!((ph - exact).abs() <= 3.0 * se, "n={n} {start:?}: {ph} vs {exact}");
    }
}

#[test]
fn expected_extinction_times() {
    let death = build_generator(3, Params::new(0.0, 0.0, Variant::Standard).unwrap()).unwrap();
    let e = death.expected_extinction_time().unwrap();
    let h = [0.0, 1.0, 1.5, 11.0 / 6.0];
    for s in 1..8usize {
        assert!((e[s] - h[s.count_ones() as usize]).abs() < 1e-9);
    }
    let m = build_generator(3, Params::new(1.6489, 2.1489, Variant::BoundaryModified).unwrap()).unwrap();
    let e = m.expected_extinction_time().unwrap();
    assert!(e[mask_of(&[0, 1])] >= e[mask_of(&[0])]);
    let one = build_generator(1, Params::standard(2.0).unwrap()).unwrap();
    assert!((one.expected_extinction_time().unwrap()[1] - 1.0).abs() < 1e-12);
}

#[test]
fn supercritical_edge_survives_with_positive_probability() {
    let stop = StopRule { t_max: 1000.0, certify_size: Some(100) };
    let batch = run_trials(boosted(0.5, Variant::BoundaryModified), &InitialCondition::SingleOrigin, 5, 300, stop, SimOptions::default()).unwrap();
    let censored = batch.iter().filter(|s| s.is_valid() && s.extinct_at().is_none()).count();
    assert!(censored > 0);
    let pure = Params::new(0.0, 0.0, Variant::Standard).unwrap();
    let dead = run_trials(pure, &InitialCondition::SingleOrigin, 5, 300, StopRule::horizon(100.0), SimOptions::default()).unwrap();
    assert!(dead.iter().all(|s| s.extinct_at().is_some()));
}

#[test]
fn stationary_samples_are_pinned_and_settle() {
    // Occupancy of the 20 sites behind the edge at two burn-ins.
    let p = boosted(0.5, Variant::BoundaryModified);
    let depth = 20;
    let profile = |burn_in: f64, stream: u64| -> Vec<f64> {
        let samples = 400;
        let opts = SimOptions::default();
        let sums: Vec<Vec<f64>> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let d = opts.truncation.halfline_depth(&p, burn_in);
                let cfg = sample_stationary_shifted(p, burn_in, d, trial_seed(stream, i), depth).unwrap();
                assert_eq!(cfg.right_edge(), Some(0));
                (0..depth as i64).map(|k| cfg.is_infected(-k) as u8 as f64).collect()
            })
            .collect();
        (0..depth as usize).map(|k| sums.iter().map(|v| v[k]).sum::<f64>() / samples as f64).collect()
    };
    let a = profile(50.0, 1);
    let b = profile(100.0, 2);
    assert_eq!(a[0], 1.0);
    // Per-site occupancy differences stay inside 4 binomial SE.
    for k in 1..depth as usize {
        let se = ((a[k] * (1.0 - a[k]) + b[k] * (1.0 - b[k])) / 400.0).sqrt().max(1e-3);
        assert!((a[k] - b[k]).abs() <= 4.0 * se, "site -{k}: {} vs {}", a[k], b[k]);
    }
}

#[test]
fn auxiliary_extinction_law_matches_fresh_runs() {
    let horizon = 30.0;
    let opts = SimOptions::default();
    let parent_params = boosted(0.5, Variant::BoundaryModified);
    let aux: Vec<f64> = (0..2000u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut parent = Simulator::new(parent_params, &InitialCondition::interval(-5, 5), trial_seed(3, i), 5.0 + horizon, opts).unwrap();
            parent.run_until(5.0);
            if parent.is_extinct() {
                return None;
            }
            let mut a = spawn_auxiliary(&parent, 5.0, horizon, opts).unwrap();
            Some(a.run(horizon).unwrap_or(horizon))
        })
        .collect();
    let fresh_params = boosted(0.5, Variant::RightEdgeModified);
    let fresh: Vec<f64> = (0..2000u64)
        .into_par_iter()
        .map(|i| {
            let mut s = Simulator::new(fresh_params, &InitialCondition::SingleOrigin, trial_seed(4, i), horizon, opts).unwrap();
            s.run_until(horizon).extinction_time.time().unwrap_or(horizon)
        })
        .collect();
    let (d, pv) = ks_two_sample(&aux, &fresh);
    assert!(pv >= 1e-3, "KS D = {d}, p = {pv}");
}

#[test]
fn renewal_attempts_are_uncorrelated() {
    let opts = SimOptions::default();
    let records = renewal_batch(boosted(0.5, Variant::BoundaryModified), &InitialCondition::interval(-10, 0), 50.0, 2500, 8, opts).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for r in records.into_iter().flatten() {
        if r.attempts == 1 {
            assert_eq!(r.t, 0.0);
        }
        for w in r.attempt_durations.windows(2) {
            xs.push(w[0]);
            ys.push(w[1]);
        }
    }
    let n = xs.len() as f64;
    assert!(n >= 300.0, "{n} pairs");
    // Rank correlation: the durations are heavy-tailed.
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (rx, ry) = (rank(&xs), rank(&ys));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let rho = cov / (vx * vy).sqrt();
    assert!(rho.abs() <= 3.0 / (n - 1.0).sqrt(), "rho = {rho} over {n} pairs");
}

#[test]
fn spread_sets_survive_at_least_as_well() {
    let p = Params::standard(LAMBDA_C_ESTIMATE).unwrap();
    let r = domination_check_liggett(p, &[0, 5], &[0.0, 10.0], 4000, 12).unwrap();
    assert!(r.all_hold);
    assert_eq!((r.points[0].spread, r.points[0].contiguous), (1.0, 1.0));
    let single = domination_check_liggett(p, &[0], &[10.0], 2000, 13).unwrap();
    let pt = &single.points[0];
    assert!((pt.spread - pt.contiguous).abs() <= 3.0 * (pt.spread_se.powi(2) + pt.contiguous_se.powi(2)).sqrt());
}

#[test]
fn right_edge_is_bounded_by_a_poisson_count() {
    let p = boosted(0.5, Variant::BoundaryModified);
    let t = 10.0;
    let batch = run_trials(p, &InitialCondition::SingleOrigin, 21, 4000, StopRule::horizon(t), SimOptions::default()).unwrap();
    let reach: Vec<i64> = batch.iter().filter_map(|s| s.samples.iter().filter_map(|x| x.right_edge).max()).collect();
    let pois = Poisson::new((p.lambda_i + p.boost_rate()) * t).unwrap();
    for k in [5u64, 10, 15, 20, 25] {
        let (ph, se) = proportion(reach.iter().filter(|&&r| r >= k as i64).count(), batch.len());
        let bound = 1.0 - pois.cdf(k - 1);
        assert!(ph <= bound + 3.0 * se.max(1.0 / batch.len() as f64), "k={k}: {ph} > {bound}");
    }
}

#[test]
fn envelope_exceedance_decays_in_n() {
    let p = boosted(0.5, Variant::BoundaryModified);
    let init = InitialCondition::StationaryApprox { burn_in: 20.0 };
    let batch = run_trials(p, &init, 31, 1000, StopRule::horizon(50.0), SimOptions::default()).unwrap();
    let check = increment_envelope_check(&batch, &p, 50.0, &[0.0, 10.0, 20.0, 40.0, 600.0]);
    assert!(check.nonincreasing);
    assert_eq!(check.points.last().unwrap().count, 0);
}

#[test]
fn oracle_suite_emits_side_by_side_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = suite_descriptor("oracle-agreement").unwrap().config;
    cfg.output_dir = dir.path().to_path_buf();
    cfg.trials = 500;
    cfg.suite.oracle_n = 3;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.exit_code(), 0);
    let table = out.manifest.artifacts.iter().find(|a| a.path.ends_with("oracle_agreement.csv")).expect("oracle table");
    let text = std::fs::read_to_string(dir.path().join(&table.path)).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains(",oracle,simulator,"), "{header}");
    verify_output_dir(dir.path()).unwrap();
    assert_eq!(suite_descriptor("clt").unwrap().config.suite.times, vec![64.0, 128.0, 256.0, 512.0]);
}
