use std::collections::HashSet;

use dfroute::experiments::{
    gen_square_network, oracle_agreement_trials, trial_seed, Algorithm, ExperimentConfig, ExperimentKind,
};
use dfroute::rate::{self, awgn_rate};
use dfroute::search::{self, route_count};
use dfroute::{CodewordMode, Network, NnaOutcome, Route, Strategy};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net_a() -> Network {
    Network::with_unit_powers(
        &[(0.0, 0.0), (0.418, 0.0), (0.209, 0.6755), (0.995, 0.0)],
        1.0,
        2.0,
    )
    .unwrap()
}

fn population(count: usize, sizes: &[usize], seed: u64) -> Vec<Network> {
    (0..count)
        .map(|k| gen_square_network(sizes[k % sizes.len()], trial_seed(seed, k)).unwrap())
        .collect()
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[test]
fn enumeration_matches_closed_form_without_duplicates() {
    for d in 2..=8 {
        let pos: Vec<(f64, f64)> = (0..d).map(|k| (k as f64, (k * k) as f64 * 0.1)).collect();
        let net = Network::with_unit_powers(&pos, 1.0, 2.0).unwrap();
        let routes: Vec<Route> = search::enumerate_routes(&net).collect();
        let distinct: HashSet<&Route> = routes.iter().collect();
        assert_eq!(routes.len() as u128, route_count(d), "d = {d}");
        assert_eq!(distinct.len(), routes.len(), "d = {d}");
        for r in &routes {
            assert!(Route::new(&net, r.nodes().to_vec()).is_ok());
        }
        let lens: Vec<usize> = routes.iter().map(Route::len).collect();
        assert!(lens.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn prefix_walk_is_bit_identical_to_naive_enumeration() {
    for net in population(60, &[2, 3, 4, 5, 6], 41) {
        let fast = search::brute_force_optimum(&net, Strategy::DecodeForward, CodewordMode::Independent).unwrap();
        let rates: Vec<(Route, f64)> = search::enumerate_routes(&net)
            .map(|r| {
                let v = rate::rate_df_independent(&net, &r).supported_rate;
                (r, v)
            })
            .collect();
        let max = rates.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(fast.max_rate.to_bits(), max.to_bits());
        assert_eq!(fast.routes_evaluated, rates.len());
        let naive_best: Vec<Route> = rates
            .iter()
            .filter(|(_, v)| *v >= max - 1e-12 * max)
            .map(|(r, _)| r.clone())
            .collect();
        assert_eq!(fast.best_routes, naive_best);
        for r in &fast.best_routes {
            assert!(rel_eq(rate::rate_df_independent(&net, r).supported_rate, fast.max_rate));
        }
    }
}

#[test]
fn theorems_hold_for_independent_codewords() {
    let mut completed = 0;
    for (k, net) in population(240, &[3, 4, 5, 6, 7], 7).iter().enumerate() {
        let brute = search::brute_force_optimum(net, Strategy::DecodeForward, CodewordMode::Independent).unwrap();
        let mspa = rate::rate_df_independent(net, &search::run_mspa(net)).supported_rate;
        assert!(rel_eq(mspa, brute.max_rate), "MSPA, network {k}");
        let nnsa = search::best_candidates(net, &search::run_nnsa(net), CodewordMode::Independent).unwrap();
        assert!(rel_eq(nnsa.max_rate, brute.max_rate), "NNSA, network {k}");
        if let NnaOutcome::Completed { route } = search::run_nna(net) {
            completed += 1;
            let r = rate::rate_df_independent(net, &route).supported_rate;
            assert!(rel_eq(r, brute.max_rate), "NNA, network {k}");
        }
    }
    assert!(completed > 0);
}

#[test]
fn theorems_one_and_two_hold_for_correlated_codewords() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::OracleAgreement, vec![3, 4, 5, 6], 50, 19);
    cfg.mode = CodewordMode::Correlated;
    let report = oracle_agreement_trials(&cfg, &[]).unwrap();
    assert_eq!(report.trials.len(), 200);
    assert_eq!(report.disagreements(Algorithm::Nnsa), 0);
    assert_eq!(report.disagreements(Algorithm::Nna), 0);
    assert!(report.nna_completed > 0);
}

#[test]
fn mspa_is_not_optimal_for_correlated_codewords_on_fixture() {
    let net = net_a();
    let route = search::run_mspa(&net);
    let mspa = rate::rate_df(&net, &route, CodewordMode::Correlated).unwrap().supported_rate;
    let brute = search::brute_force_optimum(&net, Strategy::DecodeForward, CodewordMode::Correlated).unwrap();
    assert!((mspa - 1.30826).abs() <= 1e-3);
    assert!((brute.max_rate - 1.31576).abs() <= 1e-3);
    assert!(mspa < brute.max_rate - 1e-4);

    let mut cfg = ExperimentConfig::new(ExperimentKind::OracleAgreement, vec![4], 1, 0);
    cfg.mode = CodewordMode::Correlated;
    let report = oracle_agreement_trials(&cfg, std::slice::from_ref(&net)).unwrap();
    let fixture = &report.trials[0];
    assert_eq!(fixture.trial, None);
    assert_eq!(fixture.disagreements.len(), 1);
    assert_eq!(fixture.disagreements[0].algorithm, Algorithm::Mspa);
    assert_eq!(fixture.counterexample.as_deref(), Some(net.nodes()));
}

#[test]
fn appending_a_dominant_node_never_lowers_the_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, net) in population(150, &[4, 5, 6, 7, 8], 23).iter().enumerate() {
        let d = net.destination();
        let mut relays: Vec<usize> = (2..d).collect();
        relays.shuffle(&mut rng);
        let take = rng.gen_range(0..=relays.len());
        let mut prefix = vec![1];
        prefix.extend_from_slice(&relays[..take]);

        let received = |t: usize| prefix.iter().map(|&m| net.power(m, t)).sum::<f64>() / net.noise(t);
        let prefix_rate = (2..=prefix.len())
            .map(|pos| {
                let t = prefix[pos - 1];
                awgn_rate(prefix[..pos - 1].iter().map(|&m| net.power(m, t)).sum::<f64>() / net.noise(t))
            })
            .fold(f64::INFINITY, f64::min);
        let extended = |t: usize| prefix_rate.min(awgn_rate(received(t)));

        let set = search::nearest_neighbor_set(net, &prefix).unwrap();
        let outside: Vec<usize> = (2..=d).filter(|t| !prefix.contains(t) && !set.contains(t)).collect();
        for &n in &set {
            for &a in &outside {
                assert!(search::dominates(net, &prefix, n, a), "network {k}");
                assert!(extended(n) >= extended(a), "network {k}: {n} vs {a}");
            }
        }
    }
}

#[test]
fn nnsa_provenance_respects_neighbor_sets() {
    for net in population(100, &[3, 5, 7, 9], 31) {
        let cands = search::run_nnsa(&net);
        let distinct: HashSet<&Route> = cands.candidates.iter().collect();
        assert_eq!(distinct.len(), cands.len());
        for b in &cands.provenance {
            assert_eq!(b.neighbors, search::nearest_neighbor_set(&net, &b.prefix).unwrap());
        }
        for c in &cands.candidates {
            assert_eq!(c.nodes()[0], 1);
            assert_eq!(*c.nodes().last().unwrap(), net.destination());
            for k in 1..c.len() {
                let set = search::nearest_neighbor_set(&net, &c.nodes()[..k]).unwrap();
                assert!(set.contains(&c.nodes()[k]));
                assert!(cands.provenance.iter().any(|b| b.prefix == c.nodes()[..k]));
            }
        }
    }
}

#[test]
fn mspa_updates_grow_quadratically() {
    let sizes = [8usize, 16, 32];
    let counts: Vec<f64> = sizes
        .iter()
        .map(|&d| {
            let pos: Vec<(f64, f64)> = (0..d).map(|k| (k as f64, 0.0)).collect();
            let net = Network::with_unit_powers(&pos, 1.0, 2.0).unwrap();
            let trace = search::run_mspa_traced(&net);
            assert_eq!(trace.route.len(), d);
            trace.sum_updates as f64
        })
        .collect();
    let c = sizes.iter().zip(&counts).map(|(&d, n)| n / (d * d) as f64).sum::<f64>() / 3.0;
    for (&d, n) in sizes.iter().zip(&counts) {
        let ratio = n / (c * (d * d) as f64);
        assert!((1.0 / 2.5..=2.5).contains(&ratio), "d = {d}: ratio {ratio}");
    }
}

#[test]
fn pruning_keeps_target_and_is_single_removal_minimal() {
    for net in population(60, &[4, 5, 6], 3) {
        for route in search::run_nnsa(&net).candidates {
            let target = rate::rate_df_independent(&net, &route).supported_rate * 0.9;
            let pruned = search::prune_shortest(&net, &route, target, CodewordMode::Independent).unwrap();
            let mut it = route.nodes().iter();
            assert!(pruned.nodes().iter().all(|n| it.any(|m| m == n)));
            let meets = |r: &Route| rate::rate_df_independent(&net, r).supported_rate >= target * (1.0 - 1e-12);
            assert!(meets(&pruned));
            for pos in 1..pruned.len() - 1 {
                let mut ids = pruned.nodes().to_vec();
                ids.remove(pos);
                assert!(!meets(&Route::new(&net, ids).unwrap()));
            }
        }
    }
}

#[test]
fn optimum_ordering_across_strategies() {
    for net in population(80, &[3, 4, 5, 6], 13) {
        let best = |s| search::brute_force_optimum(&net, s, CodewordMode::Independent).unwrap().max_rate;
        let (sh, mh, df) = (best(Strategy::SingleHop), best(Strategy::MultiHop), best(Strategy::DecodeForward));
        assert!(df >= mh && mh >= sh);
    }
}

/// Smallest valid neighbor set by exhaustive subset search.
fn smallest_valid_set(net: &Network, prefix: &[usize]) -> Vec<usize> {
    let rest: Vec<usize> = (1..=net.len()).filter(|t| !prefix.contains(t)).collect();
    let mut best: Option<Vec<usize>> = None;
    for mask in 1u32..(1 << rest.len()) {
        let member = |k: usize| mask & (1 << k) != 0;
        let inside: Vec<usize> = (0..rest.len()).filter(|&k| member(k)).map(|k| rest[k]).collect();
        let outside: Vec<usize> = (0..rest.len()).filter(|&k| !member(k)).map(|k| rest[k]).collect();
        let valid = inside
            .iter()
            .all(|&n| outside.iter().all(|&a| search::dominates(net, prefix, n, a)));
        if valid && best.as_ref().is_none_or(|b| inside.len() < b.len()) {
            best = Some(inside);
        }
    }
    best.unwrap()
}

#[test]
fn neighbor_set_matches_exhaustive_smallest_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut multi = 0;
    for net in population(300, &[4, 6, 8, 10], 29) {
        let d = net.destination();
        let mut relays: Vec<usize> = (2..d).collect();
        relays.shuffle(&mut rng);
        let take = rng.gen_range(0..=relays.len().min(3));
        let mut prefix = vec![1];
        prefix.extend_from_slice(&relays[..take]);
        let got = search::nearest_neighbor_set(&net, &prefix).unwrap();
        assert_eq!(got, smallest_valid_set(&net, &prefix), "prefix {prefix:?}");
        if got.len() > 1 {
            multi += 1;
        }
    }
    assert!(multi > 0);
}
