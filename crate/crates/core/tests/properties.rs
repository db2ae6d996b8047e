use bmcp::clock::{ClockCursors, ClockField, ClockObjectId, Direction};
use bmcp::engine::{replay_event_log, Domain, SimOptions, Simulator};
use bmcp::estimators::{estimate_edge_speed, extinction_tail, run_trials, survival_point, StopRule};
use bmcp::lattice::{Configuration, InitialCondition, LeftEdge, Params, Variant, LAMBDA_C_ESTIMATE};
use bmcp::oracle::{build_generator, mask_of};
use bmcp::paths::{box_crossed_vertically, reachable_from, verify_witness, PathMode, SpaceTimeBox};
use proptest::prelude::*;

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Standard),
        Just(Variant::RightEdgeModified),
        Just(Variant::BoundaryModified)
    ]
}

fn site_set(lo: i64, hi: i64, max: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::btree_set(lo..=hi, 1..=max).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cached_edges_match_a_scan(ops in prop::collection::vec((any::<bool>(), -40i64..=40), 0..200)) {
        let mut cfg = Configuration::empty(-40, 40);
        let mut reference = std::collections::BTreeSet::new();
        for (add, x) in ops {
            if add {
                cfg.infect(x);
                reference.insert(x);
            } else {
                cfg.recover(x);
                reference.remove(&x);
            }
            prop_assert!(cfg.cache_consistent());
            prop_assert_eq!(cfg.right_edge(), reference.iter().next_back().copied());
            prop_assert_eq!(cfg.left_edge().and_then(LeftEdge::finite), reference.iter().next().copied());
            prop_assert_eq!(cfg.infected_count(), reference.len());
        }
    }

    #[test]
    fn shift_is_idempotent_and_keeps_gaps(sites in site_set(-30, 30, 12)) {
        let cfg = Configuration::from_sites(-30, 30, &sites).unwrap();
        let once = cfg.shift_to_right_edge().unwrap();
        let twice = once.shift_to_right_edge().unwrap();
        let a: Vec<_> = once.sites().collect();
        prop_assert_eq!(&a, &twice.sites().collect::<Vec<_>>());
        prop_assert_eq!(once.right_edge(), Some(0));
        prop_assert_eq!(once.cardinality(), cfg.cardinality());
        let gaps = |v: &[i64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
        prop_assert_eq!(gaps(&a), gaps(&sites));
    }

    #[test]
    fn random_access_equals_sequential(seed in any::<u64>(), site in -50i64..50, n in 1u64..40) {
        let p = Params::new(1.3, 1.9, Variant::BoundaryModified).unwrap();
        let field = ClockField::new(seed, &p);
        let mut cursors = ClockCursors::new();
        for obj in [ClockObjectId::SiteRecovery(site), ClockObjectId::DirectedEdge(site, Direction::Left), ClockObjectId::BoostLeft] {
            let mut t = 0.0;
            for k in 0..n {
                let next = field.next_arrival(&mut cursors, obj, t).unwrap();
                prop_assert_eq!(next, field.arrival(obj, k).unwrap());
                prop_assert!(next > t);
                t = next;
            }
        }
    }

    #[test]
    fn event_log_replays_and_reruns_match(seed in any::<u64>(), v in variant(), sites in site_set(-4, 4, 5)) {
        let p = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, v).unwrap();
        let init = InitialCondition::FiniteSet { sites };
        let opts = SimOptions { record_events: true, ..SimOptions::default() };
        let mut a = Simulator::new(p, &init, seed, 20.0, opts).unwrap();
        let start = a.configuration().clone();
        a.run_until(20.0);
        let replayed = replay_event_log(&start, a.event_log().unwrap());
        prop_assert_eq!(replayed.sites().collect::<Vec<_>>(), a.configuration().sites().collect::<Vec<_>>());
        prop_assert!(a.configuration().cache_consistent());
        let mut b = Simulator::new(p, &init, seed, 20.0, opts).unwrap();
        b.run_until(20.0);
        prop_assert_eq!(a.trajectory(), b.trajectory());
    }

    #[test]
    fn standard_is_dominated_by_boundary_modified(seed in any::<u64>(), sites in site_set(-3, 3, 4), eps in 0.1f64..1.5) {
        let init = InitialCondition::FiniteSet { sites };
        let opts = SimOptions::default();
        let std = Params::standard(LAMBDA_C_ESTIMATE).unwrap();
        let bm = Params::boosted(LAMBDA_C_ESTIMATE, eps, Variant::BoundaryModified).unwrap();
        let mut a = Simulator::new(std, &init, seed, 30.0, opts).unwrap();
        let mut b = Simulator::new(bm, &init, seed, 30.0, opts).unwrap();
        let mut checked = 0;
        while !a.is_extinct() {
            let next = match (a.next_event_time(), b.next_event_time()) {
                (Some(x), Some(y)) => x.min(y),
                (Some(x), None) => x,
                _ => break,
            };
            if next > 30.0 {
                break;
            }
            a.advance_to_absolute(next);
            b.advance_to_absolute(next);
            prop_assert!(a.is_valid() && b.is_valid());
            let big = b.configuration();
            prop_assert!(a.configuration().sites().all(|x| big.is_infected(x)), "not dominated at {}", next);
            checked += 1;
        }
        prop_assert!(checked > 0 || a.is_extinct());
    }

    #[test]
    fn right_edge_moves_only_by_unit_steps_right(seed in any::<u64>(), v in variant()) {
        let p = Params::boosted(LAMBDA_C_ESTIMATE, 0.7, v).unwrap();
        let opts = SimOptions { record_events: true, ..SimOptions::default() };
        let mut sim = Simulator::new(p, &InitialCondition::SingleOrigin, seed, 15.0, opts).unwrap();
        let mut cfg = sim.configuration().clone();
        sim.run_until(15.0);
        for ev in sim.event_log().unwrap() {
            let before = cfg.right_edge();
            cfg = replay_event_log(&cfg, std::slice::from_ref(ev));
            if let (Some(a), Some(b)) = (before, cfg.right_edge()) {
                prop_assert!(b <= a + 1);
            }
        }
    }

    #[test]
    fn closed_segment_stays_inside(seed in any::<u64>(), v in variant(), n in 1usize..6) {
        let p = Params::boosted(1.2, 0.8, v).unwrap();
        let sites: Vec<i64> = (0..n as i64).collect();
        let mut sim = Simulator::closed_segment(p, n, &sites, seed, SimOptions::default()).unwrap();
        prop_assert_eq!(sim.domain(), Domain::Closed);
        while !sim.is_extinct() && sim.time() < 10.0 {
            sim.step().unwrap();
            prop_assert!(sim.configuration().sites().all(|x| (0..n as i64).contains(&x)));
        }
    }

    #[test]
    fn oracle_exit_rate_equals_engine_rate(v in variant(), mask in 1usize..64, li in 0.2f64..2.5, eps in 0.0f64..1.0) {
        let n = 6;
        let p = Params::new(li, li + eps, v).unwrap();
        let model = build_generator(n, p).unwrap();
        let sites: Vec<i64> = (0..n as i64).filter(|i| mask >> i & 1 == 1).collect();
        prop_assert_eq!(mask_of(&sites), mask);
        let sim = Simulator::closed_segment(p, n, &sites, 0, SimOptions::default()).unwrap();
        prop_assert!((model.exit_rate(mask) - sim.total_jump_rate()).abs() < 1e-12);
        prop_assert!(model.row_sum(mask).abs() < 1e-12);
    }

    #[test]
    fn oracle_conserves_probability_and_composes(v in variant(), state in 1usize..16, t in 0.05f64..6.0) {
        let model = build_generator(4, Params::new(1.6489, 2.1489, v).unwrap()).unwrap();
        let full = model.distribution_at(state, t);
        prop_assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let half = model.distribution_at(state, t / 2.0);
        let composed = model.forward(&half, t / 2.0);
        for (a, b) in full.iter().zip(&composed) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        let later = model.extinction_probability_by(t + 1.0);
        let now = model.extinction_probability_by(t);
        prop_assert!(later[state] >= now[state] - 1e-12);
    }

    #[test]
    fn boosts_only_add_reachable_sites(seed in any::<u64>(), init in site_set(0, 5, 3), h in 0.5f64..3.0) {
        let p = Params::new(LAMBDA_C_ESTIMATE, LAMBDA_C_ESTIMATE + 0.6, Variant::BoundaryModified).unwrap();
        let rec = ClockField::new(seed, &p).arrivals_in_box(0, 5, 0.0, h, 1e6).unwrap();
        let plain: Vec<i64> = reachable_from(&rec, &init, 0.0, h, PathMode::LambdaI, &[], None).unwrap().into_iter().map(|x| x.0).collect();
        let mode = PathMode::LambdaE(Variant::BoundaryModified);
        let boosted = reachable_from(&rec, &init, 0.0, h, mode, &init, None).unwrap();
        for x in &plain {
            prop_assert!(boosted.iter().any(|(y, _)| y == x));
        }
        for (_, w) in &boosted {
            prop_assert!(verify_witness(&rec, w, h, mode, &init));
        }
    }

    #[test]
    fn vertical_crossing_survives_widening(seed in any::<u64>(), lo in 2i64..5, width in 0i64..4, h in 0.5f64..4.0) {
        let p = Params::standard(LAMBDA_C_ESTIMATE).unwrap();
        let rec = ClockField::new(seed, &p).arrivals_in_box(0, 12, 0.0, h, 1e6).unwrap();
        let inner = SpaceTimeBox { lo, hi: lo + width, t0: 0.0, t1: h };
        let outer = SpaceTimeBox { lo: lo - 2, hi: lo + width + 3, t0: 0.0, t1: h };
        if box_crossed_vertically(&rec, inner).unwrap().vertical == Some(true) {
            prop_assert_eq!(box_crossed_vertically(&rec, outer).unwrap().vertical, Some(true));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn estimators_ignore_trial_order(seed in any::<u64>(), rot in 1usize..59) {
        let p = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, Variant::BoundaryModified).unwrap();
        let stop = StopRule::horizon(30.0);
        let batch = run_trials(p, &InitialCondition::interval(-20, 20), seed, 60, stop, SimOptions::default()).unwrap();
        let mut shuffled = batch.clone();
        shuffled.rotate_left(rot);
        shuffled.reverse();
        prop_assert_eq!(estimate_edge_speed(&batch, 30.0).ok(), estimate_edge_speed(&shuffled, 30.0).ok());
        prop_assert_eq!(survival_point(41, &batch), survival_point(41, &shuffled));
        prop_assert_eq!(extinction_tail(&batch, 0, 1).ok(), extinction_tail(&shuffled, 0, 1).ok());
    }
}
