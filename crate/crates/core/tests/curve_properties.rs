mod common;

use edlab_core::curve::{build_curve, build_curve_with_stats, merit_order_curve, CurveError};
use edlab_core::grid::{build_network, Bus, Generator, LoadSite};
use edlab_core::lp;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> Option<(edlab_core::grid::Network, Vec<f64>, edlab_core::curve::CostCurve, edlab_core::curve::BuildStats)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (net, nodal) = common::random_network(&mut rng);
    match build_curve_with_stats(&net, &nodal) {
        Ok((c, s)) => Some((net, nodal, c, s)),
        Err(CurveError::Lp(_)) | Err(CurveError::DegenerateDomain(..)) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curve_matches_lp_pointwise(seed in any::<u64>()) {
        let Some((net, nodal, curve, _)) = instance(seed) else { return Ok(()) };
        for i in 0..=50 {
            let g = curve.clamp(curve.g_min() + curve.range() * i as f64 / 50.0);
            let lp_cost = lp::solve_dispatch(&net, &nodal, g).unwrap().objective;
            let c = curve.eval(g).unwrap();
            prop_assert!((c - lp_cost).abs() <= 1e-6 * lp_cost.abs().max(1.0), "g {g}: {c} vs {lp_cost}");
        }
    }

    #[test]
    fn curve_is_convex_and_continuous(seed in any::<u64>()) {
        let Some((_, _, curve, stats)) = instance(seed) else { return Ok(()) };
        for w in curve.slopes().windows(2) {
            prop_assert!(w[1] > w[0] + 1e-9, "{:?}", curve.slopes());
        }
        let bps = curve.breakpoints();
        for (k, w) in bps.windows(2).enumerate() {
            prop_assert!(w[1].g > w[0].g);
            let predicted = w[0].cost + curve.slopes()[k] * (w[1].g - w[0].g);
            prop_assert!((predicted - w[1].cost).abs() <= 1e-7);
        }
        prop_assert!(stats.lp_calls <= 4 * bps.len() + 2, "{} calls for {} breakpoints", stats.lp_calls, bps.len());
    }

    #[test]
    fn profiles_are_feasible_and_cost_consistent(seed in any::<u64>(), beta in 0.0f64..=1.0) {
        let Some((net, nodal, curve, _)) = instance(seed) else { return Ok(()) };
        let bps = curve.breakpoints();
        for b in bps {
            prop_assert!((b.profile.iter().sum::<f64>() - b.g).abs() <= 1e-8);
            prop_assert!(common::profile_violation(&net, &nodal, &b.profile) <= 1e-8);
        }
        // any convex combination of two stored profiles stays feasible
        let (a, z) = (&bps[0].profile, &bps[bps.len() - 1].profile);
        let mix: Vec<f64> = a.iter().zip(z).map(|(x, y)| (1.0 - beta) * x + beta * y).collect();
        prop_assert!(common::profile_violation(&net, &nodal, &mix) <= 1e-8);
        for i in 0..=20 {
            let g = curve.clamp(curve.g_min() + curve.range() * i as f64 / 20.0);
            let p = curve.profile(g).unwrap();
            prop_assert!(common::profile_violation(&net, &nodal, &p) <= 1e-8);
            let c = curve.eval(g).unwrap();
            prop_assert!((common::linear_cost(&net, &p) - c).abs() <= 1e-8 * c.abs().max(1.0));
        }
    }

    #[test]
    fn deriv_matches_secant_off_breakpoints(seed in any::<u64>(), u in 0.0f64..1.0) {
        let Some((_, _, curve, _)) = instance(seed) else { return Ok(()) };
        let g = curve.g_min() + u * curve.range();
        let eps = 1e-7 * curve.range();
        let near_kink = curve.breakpoints().iter().any(|b| (b.g - g).abs() < 2.0 * eps);
        prop_assume!(!near_kink && g - eps >= curve.g_min() && g + eps <= curve.g_max());
        let fd = (curve.eval(g + eps).unwrap() - curve.eval(g - eps).unwrap()) / (2.0 * eps);
        prop_assert!((fd - curve.deriv(g)).abs() <= 1e-6 * curve.deriv(g).abs().max(1.0));
    }

    #[test]
    fn merit_order_equals_unconstrained_build(costs in prop::collection::vec(1u32..100, 1..6), caps in prop::collection::vec(0.1f64..3.0, 6)) {
        let gens: Vec<Generator> = costs.iter().zip(&caps).map(|(&c, &b)| Generator { bus: 0, marginal_cost: c as f64, capacity: b }).collect();
        let net = build_network(vec![Bus { id: 0, is_slack: true }], vec![], gens.clone(), vec![LoadSite { bus: 0, weight: 1.0 }]).unwrap();
        let a = build_curve(&net, &[1.0]).unwrap();
        let b = merit_order_curve(&gens).unwrap();
        prop_assert_eq!(a.breakpoints().len(), b.breakpoints().len());
        for (x, y) in a.breakpoints().iter().zip(b.breakpoints()) {
            prop_assert!((x.g - y.g).abs() < 1e-9 && (x.cost - y.cost).abs() < 1e-7);
        }
    }
}

#[test]
fn ieee39_curve_is_well_formed() {
    let net = edlab_core::grid::builtin::ieee39().unwrap();
    let nodal = net.nodal_demand(5000.0);
    let started = std::time::Instant::now();
    let curve = build_curve(&net, &nodal).unwrap();
    assert!(started.elapsed().as_secs_f64() < 5.0);
    assert!(curve.slopes().windows(2).all(|w| w[1] > w[0]));
    for i in 0..=40 {
        let g = curve.clamp(curve.g_min() + curve.range() * i as f64 / 40.0);
        let lp_cost = lp::solve_dispatch(&net, &nodal, g).unwrap().objective;
        assert!((curve.eval(g).unwrap() - lp_cost).abs() <= 1e-6 * lp_cost.abs().max(1.0));
    }
}
