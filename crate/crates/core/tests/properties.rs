//! Randomized invariants across modules.

use std::collections::BTreeMap;

use bernstein_orlicz::bernstein::{bernstein_orlicz_norm, bernstein_tail, BernsteinProfile};
use bernstein_orlicz::bracketing::{entropy_sum_bound, EntropyProfile};
use bernstein_orlicz::ep_bounds::{
    constant_assembly, deviation_threshold, expectation_bound, truncation_levels, EpBoundInput,
};
use bernstein_orlicz::finite_max::{max_deviation_threshold, max_expectation_bound, MaxBoundInput};
use bernstein_orlicz::numeric::fmt_sig9;
use bernstein_orlicz::orlicz::{
    norm_from_tail, orlicz_norm_empirical, psi_eval, psi_inverse, tail_from_norm, OrliczParams,
};
use bernstein_orlicz::sim::clopper_pearson;
use bernstein_orlicz::tree::{uniform_l, validate_tree, FiniteTree};
use proptest::prelude::*;

fn psi(l: f64, z: f64) -> f64 {
    psi_eval(l, z).unwrap().value
}

fn counts() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..1_000_000, 1..16)
}

/// Random tree: generation sizes, then a random parent in the previous
/// generation for every node.
fn random_tree() -> impl Strategy<Value = FiniteTree> {
    prop::collection::vec(1usize..6, 0..5).prop_flat_map(|tail| {
        let mut sizes = vec![1];
        sizes.extend(tail);
        let total: usize = sizes.iter().sum();
        (Just(sizes), prop::collection::vec(any::<prop::sample::Index>(), total))
    })
    .prop_map(|(sizes, picks)| {
        let mut generations: Vec<Vec<usize>> = Vec::new();
        let mut parent = BTreeMap::new();
        let mut next = 1;
        for (s, &size) in sizes.iter().enumerate() {
            let gen: Vec<usize> = (next..next + size).collect();
            if s > 0 {
                let prev = &generations[s - 1];
                for &j in &gen {
                    parent.insert(j, *picks[j - 1].get(prev));
                }
            }
            next += size;
            generations.push(gen);
        }
        FiniteTree::new(sizes.len() - 1, generations, parent).unwrap()
    })
}

fn ep_input(n: u64, k: f64, depth: usize) -> EpBoundInput {
    let counts: Vec<u64> = (0..=depth).map(|s| 4u64.pow(s as u32)).collect();
    EpBoundInput::new(n, k, EntropyProfile::from_counts(&counts).unwrap(), Some(depth)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn psi_round_trip(l in 0.0f64..20.0, log_t in -8.0f64..6.0) {
        let t = 10f64.powf(log_t);
        let back = psi(l, psi_inverse(l, t).unwrap());
        prop_assert!((back - t).abs() <= 1e-9 * (1.0 + t), "{back} vs {t}");
    }

    #[test]
    fn psi_is_nonincreasing_in_l(z in 1e-3f64..20.0, l1 in 0.0f64..5.0, dl in 0.0f64..5.0) {
        prop_assert!(psi(l1 + dl, z) <= psi(l1, z) * (1.0 + 1e-14));
    }

    #[test]
    fn psi_is_midpoint_convex(l in 0.0f64..5.0, a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let mid = psi(l, 0.5 * (a + b));
        let avg = 0.5 * (psi(l, a) + psi(l, b));
        prop_assert!(mid <= avg * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn empirical_norm_is_homogeneous(
        sample in prop::collection::vec(-5.0f64..5.0, 1..40),
        l in 0.0f64..3.0,
        c in 0.01f64..100.0,
    ) {
        prop_assume!(sample.iter().any(|x| x.abs() > 1e-6));
        let base = orlicz_norm_empirical(&sample, l).unwrap();
        let scaled: Vec<f64> = sample.iter().map(|x| c * x).collect();
        let got = orlicz_norm_empirical(&scaled, l).unwrap();
        prop_assert!((got - c * base).abs() <= 1e-9 * c * base, "{got} vs {}", c * base);
    }

    #[test]
    fn tail_statement_increases_and_is_convex_in_sqrt_t(
        tau in 0.01f64..10.0, l in 0.01f64..10.0, a in 0.01f64..10.0, b in 0.01f64..10.0,
    ) {
        let p = OrliczParams::new(l, tau).unwrap();
        let th = |t: f64| tail_from_norm(p, t).unwrap().threshold;
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(th(lo) < th(hi));
        let (u, v) = (lo.sqrt(), hi.sqrt());
        let mid = 0.5 * (u + v);
        prop_assert!(th(mid * mid) <= 0.5 * (th(lo) + th(hi)) * (1.0 + 1e-14));
    }

    #[test]
    fn norm_tail_round_trip_costs_sqrt3(tau in 0.0f64..10.0, l in 0.01f64..10.0, t in 0.01f64..20.0) {
        let p = norm_from_tail(tau, l).unwrap();
        let r3 = 3f64.sqrt();
        prop_assert!((p.tau - r3 * tau).abs() <= 1e-15 * (1.0 + tau));
        prop_assert!((p.l - r3 * l).abs() <= 1e-15 * l);
        let direct = tail_from_norm(OrliczParams::new(l, tau).unwrap(), t).unwrap();
        let weakened = tail_from_norm(p, t).unwrap();
        prop_assert!(weakened.threshold >= direct.threshold);
        prop_assert_eq!(weakened.prob_bound, direct.prob_bound);
    }

    #[test]
    fn bernstein_orlicz_route_loses_a_bounded_factor(
        sigma in 0.01f64..10.0, k in 0.01f64..10.0, n in 1u64..10_000, t in 0.01f64..50.0,
    ) {
        let prof = BernsteinProfile::new(sigma, k, n).unwrap();
        let direct = bernstein_tail(&prof, t).unwrap().threshold;
        let orlicz = tail_from_norm(bernstein_orlicz_norm(&prof).unwrap(), t).unwrap().threshold;
        let ratio = orlicz / direct;
        prop_assert!((1.0..=3.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn bernstein_l_is_scale_free(sigma in 0.01f64..10.0, k in 0.01f64..10.0, n in 1u64..10_000, c in 0.01f64..100.0) {
        let a = bernstein_orlicz_norm(&BernsteinProfile::new(sigma, k, n).unwrap()).unwrap();
        let b = bernstein_orlicz_norm(&BernsteinProfile::new(c * sigma, c * k, n).unwrap()).unwrap();
        prop_assert!((a.l - b.l).abs() <= 1e-12 * a.l);
        prop_assert!((b.tau - c * a.tau).abs() <= 1e-12 * b.tau);
    }

    #[test]
    fn finite_max_is_monotone(
        tau in 0.01f64..5.0, l in 0.0f64..5.0, p in 1u64..1000, t in 0.01f64..10.0,
        dtau in 0.0f64..2.0, dl in 0.0f64..2.0, dp in 0u64..100, dt in 0.0f64..5.0,
    ) {
        let at = |tau, l, p, t| {
            let input = MaxBoundInput::new(OrliczParams::new(l, tau).unwrap(), p).unwrap();
            (max_expectation_bound(&input).unwrap(), max_deviation_threshold(&input, t).unwrap().threshold)
        };
        let base = at(tau, l, p, t);
        for other in [at(tau + dtau, l, p, t), at(tau, l + dl, p, t), at(tau, l, p + dp, t), at(tau, l, p, t + dt)] {
            prop_assert!(other.0 >= base.0 * (1.0 - 1e-14));
            prop_assert!(other.1 >= base.1 * (1.0 - 1e-14));
        }
    }

    #[test]
    fn random_trees_are_valid(tree in random_tree()) {
        let report = validate_tree(&tree);
        prop_assert!(report.valid, "{:?}", report.violations);
        for &end in tree.end_nodes() {
            prop_assert_eq!(tree.branch(end).unwrap().len(), tree.depth() + 1);
        }
    }

    #[test]
    fn four_l_identity(ls in prop::collection::vec(0.0f64..10.0, 1..20)) {
        let sum: f64 = ls.iter().enumerate().map(|(s, l)| 0.5f64.powi(s as i32) * l * (1 + s) as f64).sum();
        prop_assert!((sum - 4.0 * uniform_l(&ls)).abs() <= 1e-12 * sum.max(1e-300));
    }

    #[test]
    fn entropy_sum_inequality(c in counts()) {
        let profile = EntropyProfile::from_counts(&c).unwrap();
        let b = entropy_sum_bound(&profile, c.len() - 1).unwrap();
        prop_assert!(b.holds && b.lhs <= b.rhs);
    }

    #[test]
    fn truncation_levels_are_positive_and_nonincreasing(
        log_n in 4u32..13, k in prop::sample::select(vec![1.0, 2.0, 5.0]), eps in 0.0f64..10.0,
    ) {
        let n = 1u64 << log_n;
        let depth = log_n as usize;
        let input = ep_input(n, k, depth);
        let levels = truncation_levels(&input, depth, eps).unwrap();
        prop_assert_eq!(levels.len(), depth);
        prop_assert!(levels.iter().all(|&x| x > 0.0));
        prop_assert!(levels.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_assembly_caps_hold(
        n in 16u64..=4096, k in prop::sample::select(vec![1.0, 2.0, 5.0]), eps in 0.1f64..10.0,
    ) {
        let depth = (n as f64).log2().ceil() as usize;
        let input = ep_input(n, k, depth);
        for s in 0..=depth {
            let c = constant_assembly(&input, s, eps).unwrap();
            prop_assert!(c.l <= c.l_cap && c.four_tau_term <= c.four_tau_cap, "s={} {:?}", s, c);
        }
    }

    #[test]
    fn deviation_threshold_increases_and_is_convex_in_sqrt_t(
        log_n in 4u32..12, k in 1.0f64..5.0, a in 0.01f64..20.0, b in 0.01f64..20.0,
    ) {
        let input = ep_input(1 << log_n, k, log_n as usize);
        let th = |t: f64| deviation_threshold(&input, t).unwrap().threshold;
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(th(lo) < th(hi));
        let mid = 0.5 * (lo.sqrt() + hi.sqrt());
        prop_assert!(th(mid * mid) <= 0.5 * (th(lo) + th(hi)) * (1.0 + 1e-14));
    }

    #[test]
    fn scan_argmin_is_the_minimum(c in counts(), log_n in 1u32..20, k in 1.0f64..5.0) {
        let depth = c.len() - 1;
        let input = EpBoundInput::new(1 << log_n, k, EntropyProfile::from_counts(&c).unwrap(), Some(depth)).unwrap();
        let scan = expectation_bound(&input).unwrap();
        prop_assert_eq!(scan.per_s.len(), depth + 1);
        prop_assert!(scan.best_s <= depth);
        prop_assert_eq!(scan.best, scan.per_s[scan.best_s]);
        prop_assert!(scan.per_s.iter().all(|&e| scan.best <= e));
    }

    #[test]
    fn sig9_round_trips_to_nine_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_sig9(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs(), "{x} -> {}", fmt_sig9(x));
    }

    #[test]
    fn clopper_pearson_brackets_the_frequency(r in 1u64..5000, frac in 0.0f64..=1.0) {
        let k = ((r as f64) * frac).round() as u64;
        let (lo, hi) = clopper_pearson(k, r, 0.99);
        let f = k as f64 / r as f64;
        prop_assert!(0.0 <= lo && lo <= f && f <= hi && hi <= 1.0, "{lo} {f} {hi}");
    }
}

#[test]
fn tail_statement_is_concave_in_t() {
    // the threshold tau (sqrt(t) + L t/2) has second derivative -tau/(4 t^{3/2})
    let p = OrliczParams::new(1.0, 1.0).unwrap();
    let th = |t: f64| tail_from_norm(p, t).unwrap().threshold;
    assert!(th(1.0) > 0.5 * (th(0.25) + th(1.75)));
}
