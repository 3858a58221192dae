use approx::assert_relative_eq;
use dfroute::rate::{
    awgn_rate, df_independent_snr, df_snr, mh_snr, optimize_splits, rate_df, rate_df_independent,
    rate_df_with_splits, rate_mh, rate_sh, DEFAULT_TOLERANCE,
};
use dfroute::{CodewordMode, Network, PowerSplit, Route};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net_a() -> Network {
    Network::with_unit_powers(
        &[(0.0, 0.0), (0.418, 0.0), (0.209, 0.6755), (0.995, 0.0)],
        1.0,
        2.0,
    )
    .unwrap()
}

fn net_b() -> Network {
    Network::with_unit_powers(
        &[(0.0, 0.0), (0.5, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)],
        1.0,
        2.0,
    )
    .unwrap()
}

fn random_net(rng: &mut ChaCha8Rng, d: usize) -> Network {
    loop {
        let pos: Vec<(f64, f64)> = (0..d).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        if let Ok(net) = Network::with_unit_powers(&pos, 1.0, 2.0) {
            return net;
        }
    }
}

fn random_route(rng: &mut ChaCha8Rng, net: &Network, len: usize) -> Route {
    let mut relays: Vec<usize> = (2..net.len()).collect();
    relays.shuffle(rng);
    let mut ids = vec![1];
    ids.extend_from_slice(&relays[..len - 2]);
    ids.push(net.len());
    Route::new(net, ids).unwrap()
}

// Reference optima below come from an independent second-order-cone
// formulation (v_i^2 <= g_i * alpha_i * u per sub-codeword block) solved with
// cvxpy/Clarabel.
const NET_A_124_OPT: f64 = 1.3082667617291255;
const NET_A_1234_OPT: f64 = 1.3166582004622978;
const NET_B_LINE_OPT: f64 = 0.5841507716133755;

#[test]
fn correlated_optimum_on_fixture_routes() {
    let net = net_a();
    let short = optimize_splits(&net, &Route::new(&net, vec![1, 2, 4]).unwrap(), DEFAULT_TOLERANCE).unwrap();
    let long = optimize_splits(&net, &Route::new(&net, vec![1, 2, 3, 4]).unwrap(), DEFAULT_TOLERANCE).unwrap();
    assert_relative_eq!(short.supported_rate, NET_A_124_OPT, epsilon = 1e-7);
    assert_relative_eq!(long.supported_rate, NET_A_1234_OPT, epsilon = 1e-7);
    // Published values, 1e-3 band.
    assert!((short.supported_rate - 1.30826).abs() <= 1e-3);
    assert!((long.supported_rate - 1.31576).abs() <= 1e-3);

    let s = short.splits.as_ref().unwrap();
    assert_relative_eq!(s.get(1, 2), 0.8968, epsilon = 1e-3);
    for i in 1..3 {
        assert_relative_eq!(s.row_sum(i), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn correlated_optimum_on_line() {
    let net = net_b();
    let r = Route::new(&net, vec![1, 2, 3, 4, 5]).unwrap();
    let rep = optimize_splits(&net, &r, DEFAULT_TOLERANCE).unwrap();
    assert_relative_eq!(rep.supported_rate, NET_B_LINE_OPT, epsilon = 1e-7);
    let ratio = rep.supported_rate / rate_mh(&net, &r).supported_rate;
    assert_relative_eq!(ratio, 4.4924, epsilon = 1e-3);
}

#[test]
fn rate_df_dispatches_on_mode() {
    let net = net_a();
    let r = Route::new(&net, vec![1, 2, 4]).unwrap();
    let ind = rate_df(&net, &r, CodewordMode::Independent).unwrap();
    assert_eq!(ind.mode, Some(CodewordMode::Independent));
    assert_relative_eq!(ind.supported_rate, 1.16295, epsilon = 1e-5);
    let corr = rate_df(&net, &r, CodewordMode::Correlated).unwrap();
    assert_eq!(corr.mode, Some(CodewordMode::Correlated));
    assert_relative_eq!(corr.supported_rate, 1.30826, epsilon = 1e-5);
}

#[test]
fn optimizer_is_deterministic() {
    let net = net_b();
    let r = Route::new(&net, vec![1, 3, 2, 4, 5]).unwrap();
    let a = optimize_splits(&net, &r, DEFAULT_TOLERANCE).unwrap();
    let b = optimize_splits(&net, &r, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(a, b);
}

/// Min reception SNR, evaluated from scratch (no shared code with the
/// optimizer beyond the network's power table).
fn min_snr_direct(net: &Network, route: &[usize], alpha: &dyn Fn(usize, usize) -> f64) -> f64 {
    let m = route.len();
    let mut worst = f64::INFINITY;
    for t in 2..=m {
        let rx = route[t - 1];
        let mut total = 0.0;
        for j in 2..=t {
            let mut amp = 0.0;
            for i in 1..j {
                amp += (alpha(i, j) * net.power(route[i - 1], rx)).sqrt();
            }
            total += amp * amp;
        }
        worst = worst.min(total / net.noise(rx));
    }
    worst
}

/// Coarse-to-fine grid search over the full-power splits of a 4-node route
/// (free coordinates: a12, a13 for the source, a23 for the first relay).
fn grid_oracle_4(net: &Network, route: &[usize]) -> f64 {
    let eval = |a12: f64, a13: f64, a23: f64| {
        if a12 < 0.0 || a13 < 0.0 || a12 + a13 > 1.0 || !(0.0..=1.0).contains(&a23) {
            return f64::NEG_INFINITY;
        }
        let a14 = 1.0 - a12 - a13;
        let a24 = 1.0 - a23;
        let f = |i: usize, j: usize| match (i, j) {
            (1, 2) => a12,
            (1, 3) => a13,
            (1, 4) => a14,
            (2, 3) => a23,
            (2, 4) => a24,
            (3, 4) => 1.0,
            _ => unreachable!(),
        };
        min_snr_direct(net, route, &f)
    };
    let mut center = (0.5, 0.25, 0.5);
    let mut half = 0.5;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..7 {
        let steps = 40;
        let h = 2.0 * half / steps as f64;
        let mut local = (f64::NEG_INFINITY, center);
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    let p = (
                        center.0 - half + a as f64 * h,
                        center.1 - half + b as f64 * h,
                        center.2 - half + c as f64 * h,
                    );
                    let v = eval(p.0, p.1, p.2);
                    if v > local.0 {
                        local = (v, p);
                    }
                }
            }
        }
        best = best.max(local.0);
        center = local.1;
        half = 4.0 * h;
    }
    awgn_rate(best)
}

/// Dense 1-D search for 3-node routes: the source splits `a` / `1 - a`.
fn grid_oracle_3(net: &Network, route: &[usize]) -> f64 {
    let n = 200_000;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=n {
        let a = k as f64 / n as f64;
        let f = |i: usize, j: usize| match (i, j) {
            (1, 2) => a,
            (1, 3) => 1.0 - a,
            (2, 3) => 1.0,
            _ => unreachable!(),
        };
        best = best.max(min_snr_direct(net, route, &f));
    }
    awgn_rate(best)
}

#[test]
fn optimizer_matches_grid_oracle_on_three_node_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let net = random_net(&mut rng, 5);
        let r = random_route(&mut rng, &net, 3);
        let opt = optimize_splits(&net, &r, DEFAULT_TOLERANCE).unwrap().supported_rate;
        let oracle = grid_oracle_3(&net, r.nodes());
        assert!(opt >= oracle - 1e-9, "{r}: optimizer {opt} below grid {oracle}");
        assert!(opt - oracle <= 1e-5, "{r}: optimizer {opt} vs grid {oracle}");
    }
}

#[test]
fn optimizer_matches_grid_oracle_on_four_node_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fixture = net_a();
    let mut cases = vec![(fixture.clone(), Route::new(&fixture, vec![1, 2, 3, 4]).unwrap())];
    for _ in 0..6 {
        let net = random_net(&mut rng, 6);
        let r = random_route(&mut rng, &net, 4);
        cases.push((net, r));
    }
    for (net, r) in cases {
        let opt = optimize_splits(&net, &r, DEFAULT_TOLERANCE).unwrap().supported_rate;
        let oracle = grid_oracle_4(&net, r.nodes());
        assert!(opt >= oracle - 1e-9, "{r}: optimizer {opt} below grid {oracle}");
        assert!(opt - oracle <= 1e-5, "{r}: optimizer {opt} vs grid {oracle}");
    }
}

#[test]
fn strategy_ordering_over_random_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let d = rng.gen_range(2..=8);
        let net = random_net(&mut rng, d);
        let len = rng.gen_range(2..=d);
        let r = random_route(&mut rng, &net, len);
        let mh = rate_mh(&net, &r).supported_rate;
        let df = rate_df_independent(&net, &r).supported_rate;
        match len {
            2 => {
                assert_eq!(df, mh);
                assert_eq!(df, rate_sh(&net).supported_rate);
            }
            3 => assert!(df >= mh),
            _ => {
                assert!(df > mh, "{r}: df {df} mh {mh}");
                for t in 2..=len {
                    let a = df_independent_snr(&net, &r, t).unwrap();
                    let b = mh_snr(&net, &r, t).unwrap();
                    assert!(a > b, "{r} at {t}: df snr {a} <= mh snr {b}");
                }
            }
        }
    }
}

#[test]
fn correlated_never_below_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..60 {
        let d = rng.gen_range(3..=6);
        let net = random_net(&mut rng, d);
        let len = rng.gen_range(2..=d);
        let r = random_route(&mut rng, &net, len);
        let ind = rate_df_independent(&net, &r).supported_rate;
        let corr = optimize_splits(&net, &r, DEFAULT_TOLERANCE).unwrap();
        assert!(corr.supported_rate >= ind - DEFAULT_TOLERANCE, "{r}");
        let splits = corr.splits.as_ref().unwrap();
        for i in 1..len {
            assert_relative_eq!(splits.row_sum(i), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn optimizer_beats_random_feasible_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_net(&mut rng, 6);
    let r = Route::new(&net, vec![1, 2, 3, 4, 5, 6]).unwrap();
    let opt = optimize_splits(&net, &r, DEFAULT_TOLERANCE).unwrap().supported_rate;
    for _ in 0..2000 {
        let mut s = PowerSplit::zeros(6);
        for i in 1..6 {
            let raw: Vec<f64> = (i + 1..=6).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            for (k, j) in (i + 1..=6).enumerate() {
                s.set(i, j, raw[k] / total);
            }
        }
        let v = rate_df_with_splits(&net, &r, &s).unwrap().supported_rate;
        assert!(v <= opt + 1e-12);
    }
}

#[test]
fn prepending_upstream_transmitter_raises_downstream_rates() {
    // Route {1, a, rest...} versus {1, rest...}: every node of `rest` gains
    // one more upstream transmitter.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let net = random_net(&mut rng, 7);
        let len = rng.gen_range(3..=7);
        let long = random_route(&mut rng, &net, len);
        let mut ids = long.nodes().to_vec();
        ids.remove(1);
        let short = Route::new(&net, ids).unwrap();
        let rl = rate_df_independent(&net, &long);
        let rs = rate_df_independent(&net, &short);
        for p in 2..=short.len() {
            assert!(rl.rate_at(p + 1).unwrap() > rs.rate_at(p).unwrap());
        }
    }
}

fn arb_net_and_route() -> impl Strategy<Value = (Network, Route)> {
    (3usize..=6, any::<u64>()).prop_map(|(d, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, d);
        let len = rng.gen_range(3..=d);
        let r = random_route(&mut rng, &net, len);
        (net, r)
    })
}

fn arb_split(rng: &mut ChaCha8Rng, len: usize) -> PowerSplit {
    let mut s = PowerSplit::zeros(len);
    for i in 1..len {
        let raw: Vec<f64> = (i + 1..=len).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum::<f64>() * rng.gen_range(1.0..1.5);
        for (k, j) in (i + 1..=len).enumerate() {
            s.set(i, j, raw[k] / total);
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn df_snr_concave_in_split((net, r) in arb_net_and_route(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = arb_split(&mut rng, r.len());
        let b = arb_split(&mut rng, r.len());
        let mid = {
            let mut m = PowerSplit::zeros(r.len());
            for i in 1..r.len() {
                for j in i + 1..=r.len() {
                    m.set(i, j, 0.5 * (a.get(i, j) + b.get(i, j)));
                }
            }
            m
        };
        for t in 2..=r.len() {
            let fa = df_snr(&net, &r, &a, t).unwrap();
            let fb = df_snr(&net, &r, &b, t).unwrap();
            let fm = df_snr(&net, &r, &mid, t).unwrap();
            prop_assert!(fm >= 0.5 * (fa + fb) - 1e-12 * (1.0 + fm));
        }
    }

    #[test]
    fn df_snr_nondecreasing_in_each_coefficient((net, r) in arb_net_and_route(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = arb_split(&mut rng, r.len());
        for i in 1..r.len() {
            for j in i + 1..=r.len() {
                let slack = 1.0 - base.row_sum(i);
                if slack <= 1e-9 {
                    continue;
                }
                let mut bumped = base.clone();
                bumped.set(i, j, base.get(i, j) + 0.5 * slack);
                for t in 2..=r.len() {
                    let before = df_snr(&net, &r, &base, t).unwrap();
                    let after = df_snr(&net, &r, &bumped, t).unwrap();
                    prop_assert!(after >= before);
                }
            }
        }
    }

    #[test]
    fn supported_rate_is_min_of_reception_rates((net, r) in arb_net_and_route()) {
        for rep in [rate_mh(&net, &r), rate_df_independent(&net, &r)] {
            let min = rep.per_node.iter().map(|x| x.rate).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(rep.supported_rate, min);
            prop_assert_eq!(rep.rate_at(rep.bottleneck), Some(min));
            prop_assert!(rep.per_node.iter().all(|x| x.rate >= 0.0));
        }
    }
}
