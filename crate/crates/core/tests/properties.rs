use std::sync::Arc;

use proptest::prelude::*;

use ips::duality::{dual_map, verify_dual_pair, Mode};
use ips::estimators::{relevance_forward_check, theta_lanes, SurvivalPlan};
use ips::graphical::{evolve, flow, open_path_reach, reach_with, sample_events, ArrowGraph, EventSampler};
use ips::lattice::{Configuration, Lattice, LatticeSpec};
use ips::maps::{relevance_brute, LocalMap, Site};
use ips::models::{self, ModelSpec};
use ips::percolation::{
    kdep_couple, kdep_parameters, peierls_bound, peierls_bound_direct, phi_product_field, sample_bond_field,
};
use ips::rng::replica_rng;

fn ring(n: usize) -> Arc<Lattice> {
    Arc::new(Lattice::new(LatticeSpec::ring(n)).unwrap())
}

fn model_by_index(k: usize, l: &Arc<Lattice>) -> ModelSpec {
    match k {
        0 => models::contact(l, 1.5, 1.0),
        1 => models::voter(l),
        2 => models::annihilating_branching(l, 1.0, 0.5),
        3 => models::coalescing_rw(l),
        4 => models::exclusion(l),
        5 => models::cooperative_1d(l, 2.0),
        _ => models::contact_double_death(l, 2.0),
    }
    .unwrap()
}

fn bits(n: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..2, n)
}

fn catalog_map() -> impl Strategy<Value = LocalMap> {
    (0usize..10, proptest::sample::subsequence((0..6 as Site).collect::<Vec<_>>(), 3).prop_shuffle()).prop_map(
        |(k, s)| {
            let (i, j, l) = (s[0], s[1], s[2]);
            use LocalMap::*;
            match k {
                0 => Vot { i, j },
                1 => Bra { i, j },
                2 => Death { i },
                3 => Death2 { i, j },
                4 => Rw { i, j },
                5 => Ann { i, j },
                6 => Excl { i, j },
                7 => Coop { i, j, k: l },
                8 => Kill { i, j },
                _ => Bran { i, j },
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_composes(k in 0usize..7, seed in any::<u64>(), x in bits(16), frac in 0.0f64..1.0) {
        let l = ring(16);
        let m = model_by_index(k, &l);
        let t = 3.0;
        let ev = sample_events(&m, t, seed).unwrap();
        let s = frac * t;
        let mut a = x.clone();
        flow(&m, &mut a, &ev.events, 0.0, s);
        flow(&m, &mut a, &ev.events, s, t);
        let mut b = x.clone();
        flow(&m, &mut b, &ev.events, 0.0, t);
        prop_assert_eq!(&a, &b);
        let traj = evolve(&m, &Configuration::new(m.alphabet, x).unwrap(), &ev.events, &[t]).unwrap();
        prop_assert_eq!(&traj.states[0].states, &b);
    }

    #[test]
    fn additive_state_is_open_path_reach(k in prop::sample::select(vec![0usize, 1, 3]), seed in any::<u64>(), x in bits(20)) {
        let l = ring(20);
        let m = model_by_index(k, &l);
        let ev = sample_events(&m, 4.0, seed).unwrap();
        let mut y = x.clone();
        flow(&m, &mut y, &ev.events, 0.0, 4.0);
        let ones: Vec<usize> = (0..20).filter(|&i| x[i] == 1).collect();
        let reach = open_path_reach(&m, &ev.events, &ones, 4.0).unwrap();
        let from_flow: Vec<usize> = (0..20).filter(|&i| y[i] == 1).collect();
        prop_assert_eq!(reach, from_flow);
    }

    #[test]
    fn cancellative_state_is_path_parity(seed in any::<u64>(), x in bits(20)) {
        let l = ring(20);
        let m = model_by_index(2, &l);
        let ev = sample_events(&m, 3.0, seed).unwrap();
        let mut y = x.clone();
        flow(&m, &mut y, &ev.events, 0.0, 3.0);
        let g = ArrowGraph::new(&m, true).unwrap();
        let ones: Vec<usize> = (0..20).filter(|&i| x[i] == 1).collect();
        let odd = reach_with(&g, 20, &ev.events, &ones, 0.0, 3.0);
        prop_assert_eq!(odd, (0..20).filter(|&i| y[i] == 1).collect::<Vec<_>>());
    }

    #[test]
    fn relevance_matches_brute_force(m in catalog_map()) {
        for i in m.domain() {
            let mut fast = m.relevance(i);
            fast.sort_unstable();
            prop_assert_eq!(fast, relevance_brute(&m, i).unwrap(), "map {} site {}", m, i);
        }
    }

    #[test]
    fn dual_maps_satisfy_relation(m in catalog_map()) {
        for mode in [Mode::Additive, Mode::Cancellative] {
            if let Ok(d) = dual_map(&m, mode) {
                prop_assert!(verify_dual_pair(&m, &d, mode).unwrap());
            }
        }
    }

    #[test]
    fn unchanged_outside_relevance_set(k in 0usize..7, seed in any::<u64>(), site in 0usize..16) {
        let l = ring(16);
        let m = model_by_index(k, &l);
        prop_assert_eq!(relevance_forward_check(&m, &[site], 2.0, 4, seed).unwrap(), 0);
    }

    #[test]
    fn bond_fields_nested_in_p(seed in any::<u64>(), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let a = sample_bond_field(2, 8, lo, seed).unwrap();
        let b = sample_bond_field(2, 8, hi, seed).unwrap();
        for i in 0..a.n_sites() {
            for k in 0..2 {
                prop_assert!(!a.is_open(i, k) || b.is_open(i, k));
            }
        }
        let (ra, rb) = (a.reachable(0).unwrap(), b.reachable(0).unwrap());
        prop_assert!(ra.iter().zip(&rb).all(|(x, y)| !x || *y));
    }

    #[test]
    fn kdep_order_and_bound(seed in any::<u64>(), p in 0.75f64..0.99, k in 2usize..5) {
        let (_, p_tilde) = kdep_parameters(p, k).unwrap();
        prop_assert!((p_tilde - (1.0 - (1.0 - p).powf(1.0 / k as f64)).powi(2)).abs() < 1e-15);
        let mut rng = replica_rng(seed, 0);
        let mut phi = phi_product_field(p).unwrap();
        let chi = phi.sample(2000, &mut rng);
        phi.reset();
        let res = kdep_couple(&chi, &mut phi, k, p, &mut rng);
        prop_assert_eq!(res.is_err(), p_tilde < 0.25);
        prop_assume!(p_tilde >= 0.25);
        let out = res.unwrap();
        prop_assert_eq!(out.order_violations(&chi), 0);
        prop_assert_eq!(out.bound_violations(), 0);
    }

    #[test]
    fn peierls_routes_agree(p in 0.895f64..0.999, m in 1usize..6) {
        let closed = peierls_bound(p, m);
        let direct = peierls_bound_direct(p, m, 50_000_000);
        prop_assert!(((closed - direct) / closed).abs() < 1e-8, "{} vs {}", closed, direct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coupled_survival_monotone_in_lambda(seed in any::<u64>()) {
        let grid: Vec<f64> = (0..12).map(|k| 1.0 + 0.1 * k as f64).collect();
        let plan = SurvivalPlan { len: 61, horizon: 20.0, replicas: 64, seed };
        let pts = theta_lanes(&grid, 2.1, &plan).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[0].theta.estimate <= w[1].theta.estimate);
        }
    }
}

#[test]
fn poisson_event_counts() {
    let l = ring(30);
    let m = models::contact(&l, 1.5, 1.0).unwrap();
    let sampler = EventSampler::new(&m).unwrap();
    let rate = sampler.rate();
    assert!((rate - 30.0 * (1.0 + 2.0 * 1.5)).abs() < 1e-9);
    let t = 2.0;
    let runs = 2000;
    let counts: Vec<f64> = (0..runs)
        .map(|k| sampler.sample(&mut replica_rng(77, k), t).len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / runs as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let mu = rate * t;
    assert!((mean - mu).abs() < 4.0 * (mu / runs as f64).sqrt(), "mean {mean} vs {mu}");
    assert!((var / mu - 1.0).abs() < 0.15, "variance ratio {}", var / mu);
}

/// Number of open oriented paths of length `n` from the origin, counted by
/// dynamic programming over the field.
fn open_paths(f: &ips::percolation::BondField, n: usize) -> f64 {
    let side = 2 * n + 1;
    let mut count = vec![0.0; side * side];
    count[0] = 1.0;
    for level in 0..n {
        for a in 0..=level {
            let b = level - a;
            let c = count[a * side + b];
            if c == 0.0 {
                continue;
            }
            let i = f.index(&[a, b]);
            if f.is_open(i, 0) {
                count[(a + 1) * side + b] += c;
            }
            if f.is_open(i, 1) {
                count[a * side + b + 1] += c;
            }
        }
    }
    (0..=n).map(|a| count[a * side + (n - a)]).sum()
}

#[test]
fn expected_open_path_count() {
    // The mean number of open paths of length n is (d p)^n.
    let n = 6;
    for p in [0.4, 0.7] {
        let runs = 6000;
        let xs: Vec<f64> = (0..runs)
            .map(|s| open_paths(&sample_bond_field(2, n + 1, p, 1000 + s).unwrap(), n))
            .collect();
        let mean = xs.iter().sum::<f64>() / runs as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt();
        let want = (2.0 * p).powi(n as i32);
        assert!((mean - want).abs() < 4.0 * sd / (runs as f64).sqrt(), "p={p}: {mean} vs {want}");
    }
}

#[test]
fn open_path_count_bounds_survival() {
    let f = sample_bond_field(2, 9, 0.6, 5).unwrap();
    for n in 1..8 {
        assert_eq!(open_paths(&f, n) > 0.0, f.survives_to_level(n));
    }
}
