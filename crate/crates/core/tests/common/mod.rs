#![allow(dead_code)]

use edlab_core::curve::{build_curve_with_stats, BuildStats, CostCurve, CurveError};
use edlab_core::dist::{DemandDistribution, Penalties};
use edlab_core::grid::{build_network, Bus, Generator, Line, LoadSite, Network};
use rand::Rng;

/// A random connected network with at most 5 generators and 6 lines, plus
/// a nodal demand vector.
pub fn random_network<R: Rng>(rng: &mut R) -> (Network, Vec<f64>) {
    let n_bus = rng.gen_range(2..=5usize);
    let slack = rng.gen_range(0..n_bus);
    let buses = (0..n_bus).map(|id| Bus { id, is_slack: id == slack }).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for b in 1..n_bus {
        pairs.push((rng.gen_range(0..b), b));
    }
    let extra = rng.gen_range(0..=(6 - pairs.len()).min(3));
    for _ in 0..extra {
        let a = rng.gen_range(0..n_bus);
        let b = rng.gen_range(0..n_bus);
        if a != b {
            pairs.push((a, b));
        }
    }
    let lines = pairs
        .into_iter()
        .map(|(a, b)| Line {
            from_bus: a,
            to_bus: b,
            reactance: rng.gen_range(0.05..1.0),
            capacity: rng.gen_range(0.4..2.5),
        })
        .collect();
    let n_gen = rng.gen_range(1..=5usize);
    let generators = (0..n_gen)
        .map(|_| Generator {
            bus: rng.gen_range(0..n_bus),
            marginal_cost: (rng.gen_range(10.0..90.0f64) * 4.0).round() / 4.0,
            capacity: rng.gen_range(0.3..2.5),
        })
        .collect();
    let n_load = rng.gen_range(1..=n_bus);
    let mut load_buses: Vec<usize> = (0..n_bus).collect();
    for i in 0..n_load {
        let j = rng.gen_range(i..n_bus);
        load_buses.swap(i, j);
    }
    let raw: Vec<f64> = (0..n_load).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - head;
    let loads = (0..n_load)
        .map(|i| LoadSite {
            bus: load_buses[i],
            weight: weights[i],
        })
        .collect();
    let net = build_network(buses, lines, generators, loads).expect("random network is valid");
    let demand = rng.gen_range(0.2..2.0);
    let nodal = net.nodal_demand(demand);
    (net, nodal)
}

/// Draws random networks until `count` of them yield a curve.
pub fn feasible_instances<R: Rng>(
    rng: &mut R,
    count: usize,
) -> Vec<(Network, Vec<f64>, CostCurve, BuildStats)> {
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        assert!(attempts < 100 * count, "too few feasible random networks");
        let (net, nodal) = random_network(rng);
        match build_curve_with_stats(&net, &nodal) {
            Ok((curve, stats)) => out.push((net, nodal, curve, stats)),
            Err(CurveError::Lp(_)) | Err(CurveError::DegenerateDomain(..)) => continue,
            Err(e) => panic!("unexpected curve error: {e}"),
        }
    }
    out
}

/// A distribution centred somewhere in (or slightly beyond) `[lo, hi]`.
pub fn random_distribution<R: Rng>(rng: &mut R, lo: f64, hi: f64, parametric_only: bool) -> DemandDistribution {
    let w = hi - lo;
    let centre = lo - 0.1 * w + rng.gen_range(0.0..1.2) * w;
    let spread = w * rng.gen_range(0.02..0.4);
    let pick = rng.gen_range(0..if parametric_only { 3 } else { 4 });
    match pick {
        0 => DemandDistribution::normal(centre, spread).unwrap(),
        1 => DemandDistribution::uniform(centre - spread, centre + spread).unwrap(),
        2 => {
            let l = centre.abs().max(0.05 * w) + 1e-3;
            DemandDistribution::bounded_pareto(l, l + 3.0 * spread, rng.gen_range(0.5..3.0)).unwrap()
        }
        _ => {
            let n = rng.gen_range(1..40);
            let samples = (0..n).map(|_| centre + spread * rng.gen_range(-1.5..1.5)).collect();
            DemandDistribution::empirical(samples).unwrap()
        }
    }
}

/// Penalties with γ1 above every curve slope.
pub fn random_penalties<R: Rng>(rng: &mut R, curve: &CostCurve) -> Penalties {
    let top = curve.slopes().iter().cloned().fold(0.0f64, f64::max);
    Penalties::new(top + rng.gen_range(5.0..100.0), rng.gen_range(1.0..30.0)).unwrap()
}

/// Line flows from a direct DC power-flow solve (bus angles), independent
/// of the shift-factor matrices.
pub fn dc_flows(net: &Network, profile: &[f64], nodal: &[f64]) -> Vec<f64> {
    let n = net.n_buses();
    let slack = net.slack_bus();
    let mut inj = vec![0.0; n];
    for (p, gen) in profile.iter().zip(net.generators()) {
        inj[gen.bus] += p;
    }
    for (d, load) in nodal.iter().zip(net.loads()) {
        inj[load.bus] -= d;
    }
    let keep: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
    let pos = |b: usize| keep.iter().position(|&k| k == b);
    let mut bmat = nalgebra::DMatrix::<f64>::zeros(keep.len(), keep.len());
    for line in net.lines() {
        let y = 1.0 / line.reactance;
        let (f, t) = (pos(line.from_bus), pos(line.to_bus));
        if let Some(i) = f {
            bmat[(i, i)] += y;
        }
        if let Some(j) = t {
            bmat[(j, j)] += y;
        }
        if let (Some(i), Some(j)) = (f, t) {
            bmat[(i, j)] -= y;
            bmat[(j, i)] -= y;
        }
    }
    let rhs = nalgebra::DVector::from_iterator(keep.len(), keep.iter().map(|&b| inj[b]));
    let theta_red = bmat.lu().solve(&rhs).expect("connected network");
    let mut theta = vec![0.0; n];
    for (i, &b) in keep.iter().enumerate() {
        theta[b] = theta_red[i];
    }
    net.lines()
        .iter()
        .map(|l| (theta[l.from_bus] - theta[l.to_bus]) / l.reactance)
        .collect()
}

/// Largest violation of generator boxes and line limits by a profile.
pub fn profile_violation(net: &Network, nodal: &[f64], profile: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (p, gen) in profile.iter().zip(net.generators()) {
        worst = worst.max(-p).max(p - gen.capacity);
    }
    for (flow, line) in dc_flows(net, profile, nodal).iter().zip(net.lines()) {
        worst = worst.max(flow.abs() - line.capacity);
    }
    worst
}

pub fn linear_cost(net: &Network, profile: &[f64]) -> f64 {
    profile
        .iter()
        .zip(net.generators())
        .map(|(p, g)| p * g.marginal_cost)
        .sum()
}
