use proptest::prelude::*;
use sampent_core::entropy::{exhaustive_min_cover, fit_growth, greedy_cover, GrowthModel};
use sampent_core::experiment::wilson_interval;
use sampent_core::net::{build_net, EpsilonNet, NetOptions};
use sampent_core::rng::{domain, stream};
use sampent_core::{random_subspace, BasisSpec, ClassSpec, TailDecayModel};

fn points(max: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, dim), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_linear_and_contracting(
        d in 2usize..40,
        frac in 0.05f64..1.0,
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        xs in proptest::collection::vec(-1.0f64..1.0, 80),
    ) {
        let n = ((d as f64 * frac).ceil() as usize).clamp(1, d);
        let op = random_subspace(d, n, seed).unwrap();
        let x = &xs[..d];
        let y = &xs[40..40 + d];
        let combo: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        let lhs = op.apply(&combo).unwrap();
        let (px, py) = (op.apply(x).unwrap(), op.apply(y).unwrap());
        for i in 0..n {
            prop_assert!((lhs[i] - (a * px[i] + b * py[i])).abs() <= 1e-12 * (1.0 + lhs[i].abs()) * 10.0);
        }
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        prop_assert!(norm(&px) <= op.scale() * norm(x) * (1.0 + 1e-12) + 1e-15);
        prop_assert!(op.orthonormality_residual() <= 1e-10);
        prop_assert!((op.scale().powi(2) * n as f64 / d as f64 - 1.0).abs() <= 1e-12);
        prop_assert_eq!(random_subspace(d, n, seed).unwrap(), op);
    }

    #[test]
    fn greedy_is_monotone_and_bounded_below(pts in points(12, 2), e1 in 0.01f64..0.8, e2 in 0.01f64..0.8) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let g_lo = greedy_cover(&pts, lo).unwrap();
        let g_hi = greedy_cover(&pts, hi).unwrap();
        prop_assert!(g_lo >= g_hi);
        prop_assert!(exhaustive_min_cover(&pts, lo).unwrap() <= g_lo);
    }

    #[test]
    fn greedy_within_twice_optimum_on_a_line(pts in points(15, 1), eps in 0.01f64..0.5) {
        let exact = exhaustive_min_cover(&pts, eps).unwrap();
        let greedy = greedy_cover(&pts, eps).unwrap();
        prop_assert!(exact <= greedy && greedy <= 2 * exact);
    }

    #[test]
    fn power_fit_recovers_exact_data(a in 0.1f64..50.0, m in 0.2f64..3.0) {
        let eps = [0.5f64, 0.3, 0.2, 0.1, 0.05];
        let h: Vec<f64> = eps.iter().map(|e| a * (1.0 / e).powf(m)).collect();
        let s = fit_growth(&eps, &h, GrowthModel::Power).unwrap();
        prop_assert!((s.params[1] - m).abs() <= 1e-9);
        prop_assert!((s.params[0] / a - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn wilson_interval_contains_estimate(trials in 1usize..500, frac in 0.0f64..=1.0) {
        let k = (trials as f64 * frac).floor() as usize;
        let (lo, hi) = wilson_interval(k, trials);
        let p = k as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn required_dimension_shrinks_with_radius(c in 0.1f64..5.0, beta in 0.2f64..3.0, e in 0.01f64..1.0) {
        let m = TailDecayModel::new(c, beta, 1.0).unwrap();
        prop_assert!(m.required_dimension(e) >= m.required_dimension(2.0 * e));
        let d = m.required_dimension(e) as usize;
        prop_assert!(m.bound(d) <= e * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn single_jump_members_are_covered(seed in any::<u64>(), eps1 in 0.5f64..2.0) {
        let basis = BasisSpec::trig(512).unwrap();
        let spec = ClassSpec::piecewise_ck(0, 1, 1.0, 1.0, 1.0);
        let net = build_net(&spec, basis, eps1, NetOptions::default()).unwrap();
        let product: f64 = net.construction_log().iter().map(|f| f.log2_size).sum();
        prop_assert!((product - net.log2_size()).abs() <= 1e-9);
        for i in 0..8 {
            let x = spec.sample(basis, &mut stream(seed, domain::SIGNAL, i)).unwrap();
            let j = net.quantize(&x.params).unwrap();
            prop_assert!(j < net.size().unwrap());
            let c = net.center(j).unwrap();
            prop_assert!(x.signal.distance(&c.signal).unwrap() <= eps1);
        }
    }

    #[test]
    fn net_size_is_monotone_in_radius(e in 0.3f64..2.0, order in 1u32..4) {
        let basis = BasisSpec::trig(1024).unwrap();
        for spec in [ClassSpec::smooth(order, 2.0), ClassSpec::piecewise_ck(0, 1, 1.0, 1.0, 1.0)] {
            let big = EpsilonNet::plan(&spec, basis, 2.0 * e, NetOptions::default()).unwrap().log2_size();
            let small = EpsilonNet::plan(&spec, basis, e, NetOptions::default()).unwrap().log2_size();
            prop_assert!(small >= big);
        }
    }

    #[test]
    fn class_specs_round_trip(order in 0u32..4, jumps in 0usize..3, a in 0.1f64..5.0, gap in 0.1f64..1.0) {
        let spec = ClassSpec::piecewise_ck(order, jumps, a, gap, 1.0);
        let back: ClassSpec = spec.canonical().parse().unwrap();
        prop_assert_eq!(back, spec);
    }
}
