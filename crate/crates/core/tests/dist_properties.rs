use edlab_core::dist::{DemandDistribution, Family, Penalties};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn family_strategy() -> impl Strategy<Value = DemandDistribution> {
    prop_oneof![
        (0.5f64..5.0, 0.02f64..1.0).prop_map(|(m, s)| DemandDistribution::normal(m, s).unwrap()),
        (0.0f64..4.0, 0.05f64..2.0).prop_map(|(a, w)| DemandDistribution::uniform(a, a + w).unwrap()),
        (0.2f64..3.0, 0.05f64..2.0, 0.3f64..4.0)
            .prop_map(|(l, w, a)| DemandDistribution::bounded_pareto(l, l + w, a).unwrap()),
    ]
}

fn penalty_strategy() -> impl Strategy<Value = Penalties> {
    (1.0f64..200.0, 0.5f64..50.0).prop_map(|(a, b)| Penalties::new(a, b).unwrap())
}

/// Interior window of the support used for numeric checks.
fn window(d: &DemandDistribution) -> (f64, f64) {
    match d.family().unwrap() {
        Family::Normal => {
            let p = d.params();
            (p[0] - 4.0 * p[1], p[0] + 4.0 * p[1])
        }
        _ => d.support(),
    }
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quantile_inverts_cdf(d in family_strategy(), u in 0.001f64..0.999) {
        let (lo, hi) = window(&d);
        let x = lo + u * (hi - lo);
        let back = d.quantile(d.cdf(x)).unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * x.abs().max(1.0), "{x} -> {back}");
    }

    #[test]
    fn cdf_is_integral_of_pdf(d in family_strategy(), u in 0.05f64..0.95) {
        let (lo, hi) = window(&d);
        let x = lo + u * (hi - lo);
        let area = simpson(|t| d.pdf(t), lo, x, 4000);
        prop_assert!((d.cdf(x) - d.cdf(lo) - area).abs() <= 1e-7);
    }

    #[test]
    fn partial_expectations_match_quadrature(d in family_strategy(), u in 0.0f64..1.0) {
        let (lo, hi) = window(&d);
        let g = lo + u * (hi - lo);
        let (short, excess) = d.partial_expectations(g);
        let (a, b) = match d.family().unwrap() {
            Family::Normal => (d.params()[0] - 10.0 * d.params()[1], d.params()[0] + 10.0 * d.params()[1]),
            _ => (lo, hi),
        };
        let want_short = simpson(|t| (t - g) * d.pdf(t), g, b.max(g), 8000);
        let want_excess = simpson(|t| (g - t) * d.pdf(t), a.min(g), g, 8000);
        prop_assert!((short - want_short).abs() <= 1e-7, "{short} vs {want_short}");
        prop_assert!((excess - want_excess).abs() <= 1e-7, "{excess} vs {want_excess}");
    }

    #[test]
    fn risk_is_convex(d in family_strategy(), pen in penalty_strategy(), u in 0.0f64..1.0, v in 0.0f64..1.0, w in 0.0f64..1.0) {
        let (lo, hi) = window(&d);
        let span = hi - lo;
        let (a, b) = (lo - 0.2 * span + 1.4 * span * u, lo - 0.2 * span + 1.4 * span * v);
        let m = w * a + (1.0 - w) * b;
        let chord = w * d.risk(a, &pen) + (1.0 - w) * d.risk(b, &pen);
        prop_assert!(d.risk(m, &pen) <= chord + 1e-9 * chord.abs().max(1.0));
    }
}

fn check_risk_derivative(d: &DemandDistribution, pen: &Penalties) {
    let (lo, hi) = window(d);
    let span = hi - lo;
    let h = 1e-6 * span;
    let (s_lo, s_hi) = d.support();
    for i in 0..50 {
        let g = lo - 0.1 * span + 1.2 * span * (i as f64 + 0.5) / 50.0;
        if (g - s_lo).abs() < 10.0 * h || (g - s_hi).abs() < 10.0 * h {
            continue;
        }
        let fd = (d.risk(g + h, pen) - d.risk(g - h, pen)) / (2.0 * h);
        let an = d.risk_deriv(g, pen);
        assert!(
            (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
            "{d:?} at {g}: analytic {an}, fd {fd}"
        );
    }
}

#[test]
fn risk_derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        use rand::Rng;
        let pen = Penalties::new(rng.gen_range(1.0..200.0), rng.gen_range(0.5..50.0)).unwrap();
        let mu = rng.gen_range(0.5..5.0);
        let s = rng.gen_range(0.05..1.0);
        check_risk_derivative(&DemandDistribution::normal(mu, s).unwrap(), &pen);
        check_risk_derivative(&DemandDistribution::uniform(mu - s, mu + s).unwrap(), &pen);
        let l = rng.gen_range(0.2..3.0);
        check_risk_derivative(
            &DemandDistribution::bounded_pareto(l, l + 4.0 * s, rng.gen_range(0.3..4.0)).unwrap(),
            &pen,
        );
    }
}

#[test]
fn empirical_partial_expectations_are_sample_averages() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.gen_range(1..60);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..4.0)).collect();
        let d = DemandDistribution::empirical(xs.clone()).unwrap();
        for _ in 0..20 {
            let g = rng.gen_range(-2.0..5.0);
            let (s, e) = d.partial_expectations(g);
            let want_s = xs.iter().map(|x| (x - g).max(0.0)).sum::<f64>() / n as f64;
            let want_e = xs.iter().map(|x| (g - x).max(0.0)).sum::<f64>() / n as f64;
            assert!((s - want_s).abs() < 1e-12 && (e - want_e).abs() < 1e-12);
            let below = xs.iter().filter(|&&x| x <= g).count() as f64 / n as f64;
            assert_eq!(d.cdf(g), below);
        }
    }
}

#[test]
fn sample_mean_matches_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in [
        DemandDistribution::normal(2.0, 0.3).unwrap(),
        DemandDistribution::uniform(1.0, 3.0).unwrap(),
        DemandDistribution::bounded_pareto(1.6, 2.6, 2.0).unwrap(),
    ] {
        let n = 40_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        assert!((m - d.mean()).abs() < 5.0 * (v / n as f64).sqrt(), "{d:?}: {m} vs {}", d.mean());
        let (lo, hi) = d.support();
        assert!(xs.iter().all(|x| *x >= lo && *x <= hi));
    }
}
