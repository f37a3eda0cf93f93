use chrono::NaiveDate;
use epinet_core::calibration::{pearson, score_run, smape, Thresholds};
use epinet_core::data::{daily_from_cumulative, smooth, GroundTruth};
use epinet_core::interventions::apportion;
use epinet_core::metapop::{RegionDay, RunTrace, WorldConfig};
use epinet_core::network::{build_suite, SuiteLevel};
use epinet_core::output::{read_runs_csv, write_runs_csv};
use epinet_core::rng::{substream, Purpose};
use epinet_core::scenario::{apply_scenario, LockdownController, LockdownRule, ScenarioSpec};
use epinet_core::state::Compartments;
use epinet_core::{
    run_simulation, BehaviorParams, CountryProfile, EpiParams, NodeState, PolicyDay, RunOptions, SimulationConfig,
    SimulationResult,
};
use proptest::prelude::*;

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e4, len)
}

fn pair(len: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    len.prop_flat_map(|n| (prop::collection::vec(0.0f64..1e4, n), prop::collection::vec(0.0f64..1e4, n)))
}

fn policy_day() -> impl Strategy<Value = PolicyDay> {
    (
        0u8..=1,
        0u8..=3,
        0u8..=3,
        0u8..=3,
        1u8..=3,
        0.0f64..5e4,
        0.0f64..5e4,
        any::<bool>(),
    )
        .prop_map(|(sh, sc, wp, tp, ct, tests, vacc, intl)| PolicyDay {
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            stay_home: sh,
            school_closing: sc,
            workplace_closing: wp,
            testing_policy: tp,
            contact_tracing: ct,
            daily_tests: tests,
            daily_vaccines: vacc,
            international_open: intl,
            internal_travel_open: sh == 0,
        })
}

fn timeline(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<PolicyDay>> {
    prop::collection::vec(policy_day(), len).prop_map(|mut days| {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        for (k, d) in days.iter_mut().enumerate() {
            d.date = start + chrono::Duration::days(k as i64);
        }
        days
    })
}

fn small_config(seed: u64, p_e_max: f64, r_mix: f64) -> SimulationConfig {
    SimulationConfig {
        country: CountryProfile {
            name: "T".into(),
            population: 1_500_000,
            child_fraction: 0.2,
            vaccination_start_day: 20,
            scale_factor: 1000.0,
        },
        world: WorldConfig {
            min_region_size: 300,
            max_region_size: 700,
            mean_region_size: 500,
            seed_day: 2,
            p_int: 0.05,
            ..WorldConfig::default()
        },
        epi: EpiParams::default(),
        behavior: BehaviorParams {
            p_e_max,
            r_mix,
            ..BehaviorParams::gbr()
        },
        n_runs: 2,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smape_symmetric_and_bounded((f, a) in pair(1..40)) {
        let s1 = smape(&f, &a).unwrap();
        let s2 = smape(&a, &f).unwrap();
        prop_assert_eq!(s1, s2);
        prop_assert!((0.0..=200.0).contains(&s1));
    }

    #[test]
    fn pearson_affine_invariant((x, y) in pair(3..40), a in 0.01f64..100.0, b in -1e3f64..1e3, c in 0.01f64..100.0) {
        if let Ok(r) = pearson(&x, &y) {
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ys: Vec<f64> = y.iter().map(|v| c * v - b).collect();
            let r2 = pearson(&xs, &ys).unwrap();
            prop_assert!((r - r2).abs() < 1e-9, "{} vs {}", r, r2);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn daily_series_accounts_for_corrections(c in series(1..60)) {
        let daily = daily_from_cumulative(&c);
        let mut sum = 0.0;
        let mut losses = 0.0;
        let mut prev = 0.0;
        for (t, d) in daily.iter().enumerate() {
            prop_assert!(*d >= 0.0);
            sum += d;
            losses += (prev - c[t]).max(0.0);
            prev = c[t];
            prop_assert!((sum - losses - c[t]).abs() < 1e-6);
        }
    }

    #[test]
    fn wide_window_gives_mean(s in series(1..30)) {
        let n = s.len();
        let mean = s.iter().sum::<f64>() / n as f64;
        let out = smooth(&s, 2 * n - 1).unwrap();
        prop_assert!(out.iter().all(|v| (v - mean).abs() < 1e-6));
    }

    #[test]
    fn apportion_sums_to_total(total in 0u64..100_000, weights in prop::collection::vec(1usize..5000, 1..40)) {
        let parts = apportion(total, &weights);
        prop_assert_eq!(parts.iter().sum::<u64>(), total);
        let w: usize = weights.iter().sum();
        for (p, &wi) in parts.iter().zip(&weights) {
            let quota = total as f64 * wi as f64 / w as f64;
            prop_assert!((*p as f64 - quota).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn suite_levels_are_nested(n in 5usize..400, seed in any::<u64>(), p_l in 0.0f64..0.2, d in 0.0f64..4.0) {
        let beh = BehaviorParams { p_l, p_rxs: d, p_rs: d / 2.0, p_rm: d, p_rl: 0.5, ..BehaviorParams::gbr() };
        let d_max = (n - 1) as f64;
        prop_assume!(beh.overlay_degrees().iter().all(|&x| x <= d_max));
        let suite = build_suite(n, &beh, &mut substream(seed, Purpose::Graph, 0)).unwrap();
        for w in SuiteLevel::ALL.windows(2) {
            prop_assert!(suite.network(w[0]).is_subset_of(&suite.network(w[1])));
        }
        prop_assert!(suite.network(SuiteLevel::L0).degrees().iter().all(|&k| k == 4));
    }

    #[test]
    fn controller_log_is_consistent(h in prop::collection::vec(0u32..6, 1..80), t_lock in 1u32..10) {
        let rule = LockdownRule { h_lock: 3.0 / 1000.0, t_lock };
        let mut c = LockdownController::new(rule);
        let flags: Vec<bool> = h.iter().map(|&x| c.update(x as f64, 1000.0)).collect();
        for d in 0..h.len() {
            if h[d] >= 3 {
                prop_assert!(flags[d]);
            }
            if d > 0 && flags[d - 1] && !flags[d] {
                // Lifted only after t_lock quiet observations in a row.
                let quiet = t_lock as usize;
                prop_assert!(d + 1 >= quiet);
                prop_assert!(h[d + 1 - quiet..=d].iter().all(|&x| x < 3));
            }
            if flags[d] && (d == 0 || !flags[d - 1]) {
                prop_assert!(h[d] >= 3);
            }
        }
    }

    #[test]
    fn scenarios_one_to_five_idempotent(tl in timeline(1..40), kind in 1u8..=5) {
        let epi = EpiParams::default();
        let spec = ScenarioSpec::kind(kind);
        let once = apply_scenario(&tl, &epi, &spec).unwrap();
        let twice = apply_scenario(&once.timeline, &once.epi, &spec).unwrap();
        prop_assert_eq!(once.timeline, twice.timeline);
    }

    #[test]
    fn unit_factor_keeps_baseline(tl in timeline(1..40), kind in 6u8..=8) {
        let epi = EpiParams::default();
        let plan = apply_scenario(&tl, &epi, &ScenarioSpec::with_k(kind, 1.0)).unwrap();
        prop_assert_eq!(plan.timeline, tl);
        prop_assert_eq!(plan.epi, epi);
    }

    #[test]
    fn exclusion_is_monotone(peak in 0u32..1000, sym in 0u32..1000, lo in 0.0f64..1.0, extra in 0.0f64..1.0) {
        let res = toy_result(peak, sym);
        let gt = toy_truth(100.0);
        let strict = Thresholds { max_exposed_frac: lo, min_sym_vs_confirmed: 0.5 };
        let loose = Thresholds { max_exposed_frac: lo + extra, ..strict };
        if !score_run(&res, &gt, &strict).excluded {
            prop_assert!(!score_run(&res, &gt, &loose).excluded);
        }
    }
}

fn toy_result(peak_exposed: u32, sym: u32) -> SimulationResult {
    let n = 1000;
    let days = (0..30u32)
        .map(|k| {
            let mut c = Compartments::default();
            let h = 5 + (k % 7) * 2;
            let d = k / 3;
            c[NodeState::H] = h;
            c[NodeState::D] = d;
            c[NodeState::S] = n - h - d;
            RegionDay {
                counts: c,
                cum_exposed: peak_exposed * k / 29,
                cum_symptomatic: sym * k / 29,
            }
        })
        .collect();
    SimulationResult {
        start_day: 0,
        scale_factor: 1.0,
        runs: vec![RunTrace {
            run: 0,
            region_sizes: vec![n as usize],
            days,
            controller_log: vec![],
        }],
    }
}

fn toy_truth(confirmed: f64) -> GroundTruth {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    GroundTruth {
        dates: (0..30).map(|k| start + chrono::Duration::days(k)).collect(),
        confirmed_cumulative: (0..30).map(|k| confirmed * k as f64 / 29.0).collect(),
        deaths_cumulative: (0..30).map(|k| (k / 2) as f64).collect(),
        hospitalized_current: (0..30).map(|k| 4.0 + (k % 5) as f64).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn compartments_are_conserved(tl in timeline(5..60), seed in any::<u64>(), p_e in 0.2f64..0.9, r_mix in 0.0f64..0.5) {
        let cfg = small_config(seed, p_e, r_mix);
        let res = run_simulation(&cfg, &tl, &RunOptions::default()).unwrap();
        for run in &res.runs {
            for k in 0..run.n_days() {
                for (rec, &n) in run.day(k).iter().zip(&run.region_sizes) {
                    prop_assert_eq!(rec.counts.total(), n as u64);
                    prop_assert!(rec.cum_exposed as usize <= n);
                }
                if k > 0 {
                    for (a, b) in run.day(k - 1).iter().zip(run.day(k)) {
                        prop_assert!(b.counts[NodeState::D] >= a.counts[NodeState::D]);
                        prop_assert!(b.cum_exposed >= a.cum_exposed);
                        prop_assert!(b.cum_symptomatic >= a.cum_symptomatic);
                    }
                }
            }
        }
    }

    #[test]
    fn simulation_is_deterministic(tl in timeline(5..40), seed in any::<u64>()) {
        let cfg = small_config(seed, 0.5, 0.1);
        let a = run_simulation(&cfg, &tl, &RunOptions::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_simulation(&cfg, &tl, &RunOptions::default())).unwrap();
        prop_assert_eq!(&a, &b);
    }

    #[test]
    fn runs_csv_round_trips(tl in timeline(3..20), seed in any::<u64>()) {
        let cfg = small_config(seed, 0.6, 0.1);
        let res = run_simulation(&cfg, &tl, &RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_runs_csv(&res, &mut buf).unwrap();
        let back = read_runs_csv(buf.as_slice(), res.scale_factor).unwrap();
        prop_assert_eq!(back, res);
    }
}
