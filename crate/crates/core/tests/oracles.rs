//! Statistical checks of the random building blocks against closed forms.

use epinet_core::epidemic::{exposure_probability, RegionGraph};
use epinet_core::interventions::run_testing;
use epinet_core::metapop::{mixing_expectations, MixingOrder, World, WorldConfig};
use epinet_core::network::{build_suite, er_overlay, ring_lattice, rewire, Network, NetworkSuite, SuiteLevel};
use epinet_core::rng::{substream, Purpose};
use epinet_core::{BehaviorParams, CountryProfile, NodeFlags, NodeState};
use rand::Rng;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[test]
fn rewired_edge_count_is_binomial() {
    let n = 3000;
    let alpha = 0.006;
    let base = ring_lattice(n).unwrap();
    let m = base.edge_count();
    assert_eq!(m, 2 * n);
    let samples: Vec<f64> = (0..1000)
        .map(|s| {
            let g = rewire(&base, alpha, &mut substream(s, Purpose::Graph, 0)).unwrap();
            assert_eq!(g.edge_count(), m);
            g.edges().iter().filter(|&&(u, v)| !base.contains(u, v)).count() as f64
        })
        .collect();
    let mu = m as f64 * alpha;
    let var = mu * (1.0 - alpha);
    let (mean, sample_var) = mean_var(&samples);
    let se = (var / samples.len() as f64).sqrt();
    assert!((mean - mu).abs() < 4.0 * se, "mean {mean} vs {mu}");
    assert!((sample_var / var - 1.0).abs() < 0.2, "variance {sample_var} vs {var}");
}

#[test]
fn overlay_edge_count_matches_binomial() {
    let n = 3000;
    let d = 1.5;
    let pairs = (n * (n - 1) / 2) as f64;
    let beta = d / (n - 1) as f64;
    let mu = pairs * beta;
    assert!((mu - 2250.0).abs() < 1e-9);
    let sigma = (pairs * beta * (1.0 - beta)).sqrt();
    let samples: Vec<f64> = (0..100)
        .map(|s| er_overlay(n, d, &mut substream(s, Purpose::Graph, 1)).unwrap().edge_count() as f64)
        .collect();
    for &x in &samples {
        assert!((x - mu).abs() < 5.0 * sigma, "{x}");
    }
    let (mean, _) = mean_var(&samples);
    assert!((mean - mu).abs() < 4.0 * sigma / 10.0, "mean {mean}");
}

#[test]
fn overlay_pairs_are_uniform() {
    // Each of the 45 pairs of a 10-node graph at beta = 1/3.
    let n = 10;
    let reps = 20_000;
    let mut hits = vec![0u32; n * n];
    for s in 0..reps {
        let g = er_overlay(n, 3.0, &mut substream(s, Purpose::Graph, 2)).unwrap();
        for &(u, v) in g.edges() {
            assert!(u < v);
            hits[u as usize * n + v as usize] += 1;
        }
    }
    let p = 1.0 / 3.0;
    let sigma = (reps as f64 * p * (1.0 - p)).sqrt();
    for u in 0..n {
        for v in u + 1..n {
            let x = hits[u * n + v] as f64;
            assert!((x - reps as f64 * p).abs() < 4.5 * sigma, "pair ({u},{v}): {x}");
        }
    }
}

#[test]
fn saturated_overlay_is_complete() {
    let g = er_overlay(50, 49.0, &mut substream(0, Purpose::Graph, 0)).unwrap();
    assert_eq!(g, Network::complete(50));
    assert_eq!(g.edge_count(), 50 * 49 / 2);
}

/// Expected edge count of the union when a layer with `added` edges lands on
/// a graph with `existing` edges out of `pairs`, pairs chosen independently.
fn union_edges(existing: f64, added: f64, pairs: f64) -> f64 {
    existing + added * (1.0 - existing / pairs)
}

#[test]
fn unrestricted_degree_matches_union_formula() {
    let n = 3000;
    let beh = BehaviorParams::gbr();
    let pairs = (n * (n - 1) / 2) as f64;
    let ring = 2.0 * n as f64;
    // A rewired lattice contributes only its moved edges.
    let mut expected = [0.0; SuiteLevel::COUNT];
    expected[0] = ring;
    for l in 1..4 {
        expected[l] = union_edges(expected[l - 1], ring * beh.p_l, pairs);
    }
    for (l, d) in (4..8).zip(beh.overlay_degrees()) {
        expected[l] = union_edges(expected[l - 1], d * n as f64 / 2.0, pairs);
    }
    let reps = 40;
    let mut mean = [0.0; SuiteLevel::COUNT];
    for s in 0..reps {
        let suite = build_suite(n, &beh, &mut substream(s, Purpose::Graph, 0)).unwrap();
        for level in SuiteLevel::ALL {
            mean[level.index()] += suite.edge_count(level) as f64 / reps as f64;
        }
    }
    for l in 0..SuiteLevel::COUNT {
        let tol = 4.0 * (expected[l] - ring).max(1.0).sqrt() / (reps as f64).sqrt() + 1.0;
        assert!((mean[l] - expected[l]).abs() < tol, "level {l}: {} vs {}", mean[l], expected[l]);
    }
    let degree = 2.0 * expected[7] / n as f64;
    assert!((degree - 8.67).abs() < 0.01, "{degree}");
}

#[test]
fn exposure_probability_matches_independent_contacts() {
    let mut rng = substream(3, Purpose::Dynamics, 0);
    let reps = 200_000;
    for (k, p) in [(1u32, 0.33), (3, 0.33), (7, 0.1), (2, 0.9)] {
        let mut hits = 0;
        for _ in 0..reps {
            if (0..k).any(|_| rng.gen::<f64>() < p) {
                hits += 1;
            }
        }
        let q = exposure_probability(NodeFlags::default(), k, p, 0.9);
        let sigma = (q * (1.0 - q) / reps as f64).sqrt();
        assert!((hits as f64 / reps as f64 - q).abs() < 4.0 * sigma, "k={k} p={p}");
    }
}

#[test]
fn mixing_matches_pairwise_sum() {
    let infected = [3.0, 0.0, 10.0, 7.0];
    let susceptible = [200.0, 310.0, 150.0, 50.0];
    let (r_mix, p_e, n) = (0.065, 0.33, 1000.0);
    let got = mixing_expectations(&infected, &susceptible, r_mix, p_e, n, MixingOrder::Corrected);
    for i in 0..4 {
        let mut want = 0.0;
        for j in 0..4 {
            if j != i {
                want += r_mix * p_e / n * infected[j] * susceptible[i];
            }
        }
        assert!((got[i] - want).abs() < 1e-12);
    }
}

#[test]
fn imports_follow_the_daily_probability() {
    let country = CountryProfile {
        name: "T".into(),
        population: 9_300_000,
        child_fraction: 0.2,
        vaccination_start_day: 1000,
        scale_factor: 1000.0,
    };
    let cfg = WorldConfig {
        min_region_size: 300,
        max_region_size: 300,
        mean_region_size: 300,
        p_int: 0.01,
        ..WorldConfig::default()
    };
    let mut world = World::build(&country, &BehaviorParams::gbr(), &cfg, 11).unwrap();
    assert_eq!(world.regions.len(), 31);
    let days = 600;
    let imported: usize = (0..days).map(|_| world.import_cases(true)).sum();
    let mu = 31.0 * days as f64 * 0.01;
    let sigma = (mu * 0.99).sqrt();
    assert!((imported as f64 - mu).abs() < 4.0 * sigma, "{imported} vs {mu}");
    assert_eq!(world.import_cases(false), 0);
}

#[test]
fn random_testing_is_hypergeometric() {
    let n = 1000;
    let suite = NetworkSuite::uniform(Network::empty(n));
    let reps = 2000;
    let mut total = 0usize;
    for s in 0..reps {
        let mut region =
            RegionGraph::new(0, suite.clone(), vec![NodeFlags::default(); n], substream(s, Purpose::Dynamics, 0))
                .unwrap();
        for i in 0..100 {
            region.states[i * 10] = if i % 2 == 0 { NodeState::Asy } else { NodeState::Sy };
        }
        let positives = run_testing(&mut region, 100, 3);
        for &i in &positives {
            assert!(region.states[i].is_quarantined());
        }
        total += positives.len();
    }
    // 100 draws without replacement from 1000 nodes holding 100 positives.
    let mu = 10.0;
    let var = 100.0 * 0.1 * 0.9 * (900.0 / 999.0);
    let mean = total as f64 / reps as f64;
    assert!((mean - mu).abs() < 4.0 * (var / reps as f64).sqrt(), "{mean}");
}

#[test]
fn symptom_testing_finds_only_symptomatic() {
    let n = 200;
    let mut region = RegionGraph::new(
        0,
        NetworkSuite::uniform(Network::empty(n)),
        vec![NodeFlags::default(); n],
        substream(1, Purpose::Dynamics, 0),
    )
    .unwrap();
    for i in 0..20 {
        region.states[i] = NodeState::Asy;
        region.states[100 + i] = NodeState::Sy;
    }
    let positives = run_testing(&mut region, 1000, 1);
    assert_eq!(positives, (100..120).collect::<Vec<_>>());
    assert!(region.states[..20].iter().all(|&s| s == NodeState::Asy));
}
