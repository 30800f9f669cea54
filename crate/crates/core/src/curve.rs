//! Piecewise-linear generation cost curve `C(g)`: the minimum linear cost of
//! producing a total of `g` MW under generator and line limits.
//!
//! [`build_curve`] recovers the exact curve from a handful of LP solves. Two
//! endpoint solves give tangents; their intersection either lies on the curve
//! (a single kink) or strictly above it (more kinks, recurse on both halves).
//! Each stored breakpoint keeps its optimal dispatch profile, so the optimal
//! profile anywhere on a segment is the convex combination of its ends.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Generator, Network};
use crate::lp::{self, LpError};

/// Recursion guard for the curve construction.
pub const MAX_DEPTH: usize = 64;
/// Fraction of the domain used to nudge dual queries into segment interiors.
pub const DUAL_NUDGE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("curve construction exceeded {MAX_DEPTH} recursion levels")]
    RecursionDepthExceeded,
    #[error("g = {g} lies outside the curve domain [{min}, {max}]")]
    OutOfDomain { g: f64, min: f64, max: f64 },
    #[error("feasible total-generation range [{0}, {1}] has zero width")]
    DegenerateDomain(f64, f64),
    #[error("no generators")]
    NoGenerators,
    #[error("curve data is inconsistent: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    /// Total generation, MW.
    pub g: f64,
    /// Minimum cost at `g`, $.
    pub cost: f64,
    /// An optimal per-generator dispatch at `g`, MW.
    pub profile: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    breakpoints: Vec<Breakpoint>,
    slopes: Vec<f64>,
}

/// Counters collected while building a curve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub lp_calls: usize,
    pub max_depth: usize,
}

impl CostCurve {
    /// Builds a curve from breakpoints sorted by `g`; slopes are the secants.
    pub fn from_breakpoints(breakpoints: Vec<Breakpoint>) -> Result<Self, CurveError> {
        if breakpoints.len() < 2 {
            return Err(CurveError::Invalid("need at least two breakpoints".into()));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].g > w[0].g) {
                return Err(CurveError::Invalid(format!(
                    "breakpoints not strictly increasing at g = {}",
                    w[1].g
                )));
            }
        }
        let slopes = secants(&breakpoints);
        Ok(CostCurve { breakpoints, slopes })
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    /// Per-segment slopes, $/MWh; `slopes()[k]` covers breakpoints `k..=k+1`.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn g_min(&self) -> f64 {
        self.breakpoints[0].g
    }

    pub fn g_max(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].g
    }

    pub fn range(&self) -> f64 {
        self.g_max() - self.g_min()
    }

    pub fn n_generators(&self) -> usize {
        self.breakpoints[0].profile.len()
    }

    pub fn contains(&self, g: f64) -> bool {
        g >= self.g_min() && g <= self.g_max()
    }

    /// Clamps `g` into the domain (the median of `g_min`, `g`, `g_max`).
    pub fn clamp(&self, g: f64) -> f64 {
        g.max(self.g_min()).min(self.g_max())
    }

    /// Index of the segment containing `g`; at an interior breakpoint this is
    /// the segment to its right.
    pub fn segment_index(&self, g: f64) -> usize {
        let k = self.breakpoints.partition_point(|b| b.g <= g);
        k.saturating_sub(1).min(self.slopes.len() - 1)
    }

    fn check_domain(&self, g: f64) -> Result<(), CurveError> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(CurveError::OutOfDomain {
                g,
                min: self.g_min(),
                max: self.g_max(),
            })
        }
    }

    pub fn eval(&self, g: f64) -> Result<f64, CurveError> {
        self.check_domain(g)?;
        let k = self.segment_index(g);
        let b = &self.breakpoints[k];
        Ok(b.cost + self.slopes[k] * (g - b.g))
    }

    /// `eval` extended linearly beyond the domain with the end slopes.
    pub fn eval_extended(&self, g: f64) -> f64 {
        let k = self.segment_index(g);
        let b = &self.breakpoints[k];
        b.cost + self.slopes[k] * (g - b.g)
    }

    /// Slope at `g`: the right slope at breakpoints, and the first (last)
    /// slope below (above) the domain.
    pub fn deriv(&self, g: f64) -> f64 {
        self.slopes[self.segment_index(g)]
    }

    /// Slope just to the left of `g`.
    pub fn deriv_left(&self, g: f64) -> f64 {
        let k = self.breakpoints.partition_point(|b| b.g < g);
        self.slopes[k.saturating_sub(1).min(self.slopes.len() - 1)]
    }

    /// Optimal dispatch profile at total generation `g`.
    pub fn profile(&self, g: f64) -> Result<Vec<f64>, CurveError> {
        self.check_domain(g)?;
        let k = self.segment_index(g);
        let (a, b) = (&self.breakpoints[k], &self.breakpoints[k + 1]);
        let gamma = (g - a.g) / (b.g - a.g);
        Ok(a
            .profile
            .iter()
            .zip(&b.profile)
            .map(|(pa, pb)| (1.0 - gamma) * pa + gamma * pb)
            .collect())
    }

    /// Interior breakpoints strictly between `lo` and `hi`.
    pub fn kinks_between(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.breakpoints.len();
        self.breakpoints[1..n - 1]
            .iter()
            .map(|b| b.g)
            .filter(move |&g| g > lo && g < hi)
    }

    /// Writes `g,cost,slope,profile_0,...` rows, one per breakpoint. The slope
    /// column is the slope to the right of the breakpoint (last row repeats
    /// the final slope).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["g".to_string(), "cost".to_string(), "slope".to_string()];
        header.extend((0..self.n_generators()).map(|i| format!("profile_{i}")));
        writer.write_record(&header)?;
        for (k, b) in self.breakpoints.iter().enumerate() {
            let slope = self.slopes[k.min(self.slopes.len() - 1)];
            let mut record = vec![b.g.to_string(), b.cost.to_string(), slope.to_string()];
            record.extend(b.profile.iter().map(|p| p.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn secants(breakpoints: &[Breakpoint]) -> Vec<f64> {
    breakpoints
        .windows(2)
        .map(|w| (w[1].cost - w[0].cost) / (w[1].g - w[0].g))
        .collect()
}

fn dual_tol(lambda: f64) -> f64 {
    1e-6 * lambda.abs().max(1.0)
}

/// Removes breakpoints between segments whose slopes agree within the dual
/// tolerance.
fn merge_collinear(mut points: Vec<Breakpoint>) -> Vec<Breakpoint> {
    loop {
        let slopes = secants(&points);
        let merge_at = (0..slopes.len().saturating_sub(1)).find(|&k| {
            (slopes[k + 1] - slopes[k]).abs() <= dual_tol(slopes[k].abs().max(slopes[k + 1].abs()))
        });
        match merge_at {
            Some(k) => {
                points.remove(k + 1);
            }
            None => return points,
        }
    }
}

struct CurveBuilder<'a> {
    net: &'a Network,
    nodal_demand: &'a [f64],
    nudge: f64,
    stats: BuildStats,
}

#[derive(Clone)]
struct Point {
    g: f64,
    cost: f64,
    profile: Vec<f64>,
}

impl CurveBuilder<'_> {
    fn solve_at(&mut self, g: f64) -> Result<lp::LpSolution, CurveError> {
        self.stats.lp_calls += 1;
        Ok(lp::solve_dispatch(self.net, self.nodal_demand, g)?)
    }

    fn point(&mut self, g: f64) -> Result<Point, CurveError> {
        let sol = self.solve_at(g)?;
        Ok(Point {
            g,
            cost: sol.objective,
            profile: sol.x,
        })
    }

    fn dual(&mut self, g: f64) -> Result<f64, CurveError> {
        let sol = self.solve_at(g)?;
        sol.eq_dual
            .ok_or_else(|| CurveError::Invalid("equality dual missing".into()))
    }

    /// Fills `out` with curve points strictly inside `(x, y)`, in order.
    fn recurse(
        &mut self,
        x: &Point,
        lambda_x: f64,
        y: &Point,
        lambda_y: f64,
        depth: usize,
        out: &mut Vec<Point>,
    ) -> Result<(), CurveError> {
        self.stats.max_depth = self.stats.max_depth.max(depth);
        if depth > MAX_DEPTH {
            return Err(CurveError::RecursionDepthExceeded);
        }
        if (lambda_x - lambda_y).abs() <= dual_tol(lambda_x.abs().max(lambda_y.abs())) {
            return Ok(());
        }
        let width = y.g - x.g;
        if width <= 4.0 * self.nudge {
            return Ok(());
        }
        // Intersection of the tangents through x and y.
        let g_z = (y.cost - x.cost + lambda_x * x.g - lambda_y * y.g) / (lambda_x - lambda_y);
        let outside = g_z < x.g - 1e-9 || g_z > y.g + 1e-9 || !g_z.is_finite();
        if outside {
            // Only dual noise on a straight stretch can do this.
            return Ok(());
        }
        let near_end = g_z - x.g <= 2.0 * self.nudge || y.g - g_z <= 2.0 * self.nudge;
        if !near_end {
            let tangent_cost = x.cost + lambda_x * (g_z - x.g);
            let z = self.point(g_z)?;
            if (tangent_cost - z.cost).abs() <= 1e-7 * tangent_cost.abs().max(1.0) {
                out.push(z);
                return Ok(());
            }
            let left = self.dual(g_z - self.nudge)?;
            let right = self.dual(g_z + self.nudge)?;
            self.recurse(x, lambda_x, &z, left, depth + 1, out)?;
            out.push(z.clone());
            return self.recurse(&z, right, y, lambda_y, depth + 1, out);
        }
        // Tangents meet next to an endpoint: split at the midpoint instead.
        let mid = self.point(x.g + 0.5 * width)?;
        let left = self.dual(mid.g - self.nudge)?;
        let right = self.dual(mid.g + self.nudge)?;
        self.recurse(x, lambda_x, &mid, left, depth + 1, out)?;
        out.push(mid.clone());
        self.recurse(&mid, right, y, lambda_y, depth + 1, out)
    }
}

/// Builds the exact cost curve of `net` for a fixed nodal demand vector.
pub fn build_curve(net: &Network, nodal_demand: &[f64]) -> Result<CostCurve, CurveError> {
    build_curve_with_stats(net, nodal_demand).map(|(curve, _)| curve)
}

pub fn build_curve_with_stats(
    net: &Network,
    nodal_demand: &[f64],
) -> Result<(CostCurve, BuildStats), CurveError> {
    if net.n_generators() == 0 {
        return Err(CurveError::NoGenerators);
    }
    let (g_min, g_max) = lp::feasible_range(net, nodal_demand)?;
    let range = g_max - g_min;
    if range <= 1e-12 * g_max.abs().max(1.0) {
        return Err(CurveError::DegenerateDomain(g_min, g_max));
    }
    let mut builder = CurveBuilder {
        net,
        nodal_demand,
        nudge: DUAL_NUDGE * range,
        stats: BuildStats {
            lp_calls: 2,
            max_depth: 0,
        },
    };
    let start = builder.point(g_min)?;
    let end = builder.point(g_max)?;
    let lambda_start = builder.dual(g_min + builder.nudge)?;
    let lambda_end = builder.dual(g_max - builder.nudge)?;

    let mut interior = Vec::new();
    builder.recurse(&start, lambda_start, &end, lambda_end, 0, &mut interior)?;

    let mut points = Vec::with_capacity(interior.len() + 2);
    points.push(start);
    points.extend(interior);
    points.push(end);
    let mut breakpoints: Vec<Breakpoint> = Vec::with_capacity(points.len());
    for p in points {
        if let Some(last) = breakpoints.last() {
            if p.g - last.g <= 1e-12 * range {
                continue;
            }
        }
        breakpoints.push(Breakpoint {
            g: p.g,
            cost: p.cost,
            profile: p.profile,
        });
    }
    let curve = CostCurve::from_breakpoints(merge_collinear(breakpoints))?;
    Ok((curve, builder.stats))
}

/// Network-free curve: generators stacked in ascending marginal cost.
/// Generators with equal cost share one segment.
pub fn merit_order_curve(generators: &[Generator]) -> Result<CostCurve, CurveError> {
    if generators.is_empty() {
        return Err(CurveError::NoGenerators);
    }
    let mut order: Vec<usize> = (0..generators.len())
        .filter(|&i| generators[i].capacity > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        generators[a]
            .marginal_cost
            .total_cmp(&generators[b].marginal_cost)
            .then(a.cmp(&b))
    });
    let total: f64 = order.iter().map(|&i| generators[i].capacity).sum();
    if total <= 0.0 {
        return Err(CurveError::DegenerateDomain(0.0, 0.0));
    }

    let mut profile = vec![0.0; generators.len()];
    let mut g = 0.0;
    let mut cost = 0.0;
    let mut breakpoints = vec![Breakpoint {
        g,
        cost,
        profile: profile.clone(),
    }];
    let mut k = 0;
    while k < order.len() {
        let price = generators[order[k]].marginal_cost;
        while k < order.len() && generators[order[k]].marginal_cost == price {
            let gen = &generators[order[k]];
            profile[order[k]] = gen.capacity;
            g += gen.capacity;
            cost += gen.capacity * gen.marginal_cost;
            k += 1;
        }
        breakpoints.push(Breakpoint {
            g,
            cost,
            profile: profile.clone(),
        });
    }
    CostCurve::from_breakpoints(breakpoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_network, Bus, LoadSite};

    fn gen(cost: f64, cap: f64) -> Generator {
        Generator {
            bus: 0,
            marginal_cost: cost,
            capacity: cap,
        }
    }

    fn copper_plate(gens: Vec<Generator>) -> Network {
        build_network(
            vec![Bus { id: 0, is_slack: true }],
            vec![],
            gens,
            vec![LoadSite { bus: 0, weight: 1.0 }],
        )
        .unwrap()
    }

    fn three_stack() -> Vec<Generator> {
        vec![gen(40.0, 1.5), gen(50.0, 1.5), gen(60.0, 1.5)]
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn merit_order_stack() {
        let curve = merit_order_curve(&three_stack()).unwrap();
        let gs: Vec<f64> = curve.breakpoints().iter().map(|b| b.g).collect();
        let costs: Vec<f64> = curve.breakpoints().iter().map(|b| b.cost).collect();
        assert_eq!(gs, vec![0.0, 1.5, 3.0, 4.5]);
        assert_eq!(costs, vec![0.0, 60.0, 135.0, 225.0]);
        assert_eq!(curve.slopes(), &[40.0, 50.0, 60.0]);
    }

    #[test]
    fn cga_matches_merit_order_on_copper_plate() {
        let net = copper_plate(three_stack());
        let curve = build_curve(&net, &[1.0]).unwrap();
        let reference = merit_order_curve(&three_stack()).unwrap();
        assert_eq!(curve.breakpoints().len(), 4);
        for (a, b) in curve.breakpoints().iter().zip(reference.breakpoints()) {
            assert_close(a.g, b.g, 1e-9);
            assert_close(a.cost, b.cost, 1e-9);
        }
        for (a, b) in curve.slopes().iter().zip(reference.slopes()) {
            assert_close(*a, *b, 1e-9);
        }
    }

    #[test]
    fn single_generator_is_one_segment() {
        let net = copper_plate(vec![gen(40.0, 2.0)]);
        let curve = build_curve(&net, &[1.0]).unwrap();
        assert_eq!(curve.slopes().len(), 1);
        assert_close(curve.slopes()[0], 40.0, 1e-12);
        assert_eq!((curve.g_min(), curve.g_max()), (0.0, 2.0));

        let merit = merit_order_curve(&[gen(40.0, 2.0)]).unwrap();
        assert_eq!(merit.slopes(), &[40.0]);
    }

    #[test]
    fn equal_costs_merge() {
        let curve = merit_order_curve(&[gen(40.0, 1.0), gen(40.0, 2.0), gen(45.0, 1.0)]).unwrap();
        assert_eq!(curve.slopes(), &[40.0, 45.0]);
        assert_eq!(curve.breakpoints()[1].profile, vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn eval_deriv_profile_queries() {
        let curve = merit_order_curve(&three_stack()).unwrap();
        assert_close(curve.eval(2.25).unwrap(), 97.5, 1e-12);
        assert_eq!(curve.deriv(-10.0), 40.0);
        assert_eq!(curve.deriv(100.0), 60.0);
        assert_eq!(curve.deriv(1.5), 50.0);
        assert_eq!(curve.deriv_left(1.5), 40.0);
        let eps = 1e-6;
        let fd = (curve.eval(2.0 + eps).unwrap() - curve.eval(2.0 - eps).unwrap()) / (2.0 * eps);
        assert_close(fd, curve.deriv(2.0), 1e-6);

        let p = curve.profile(2.25).unwrap();
        for (a, b) in p.iter().zip([1.5, 0.75, 0.0]) {
            assert_close(*a, b, 1e-12);
        }
        assert_eq!(curve.profile(1.5).unwrap(), curve.breakpoints()[1].profile);
        assert!(matches!(curve.eval(5.0), Err(CurveError::OutOfDomain { .. })));
        assert!(matches!(curve.profile(-0.1), Err(CurveError::OutOfDomain { .. })));
        assert_close(curve.eval_extended(5.0), 225.0 + 30.0, 1e-12);
        assert_close(curve.eval_extended(-1.0), -40.0, 1e-12);
    }

    #[test]
    fn four_bus_line_limit_creates_kink() {
        let net = crate::grid::builtin::four_bus().unwrap();
        let curve = build_curve(&net, &[1.5]).unwrap();
        assert_close(curve.g_min(), 0.0, 1e-12);
        assert_close(curve.g_max(), 3.0, 1e-9);
        // the cheap unit saturates line 0-3 at 2 MW; beyond that each MW
        // costs 70 $/MWh through redispatch
        assert_eq!(curve.slopes().len(), 2);
        assert_close(curve.breakpoints()[1].g, 2.0, 1e-9);
        assert_close(curve.slopes()[0], 40.0, 1e-9);
        assert_close(curve.slopes()[1], 70.0, 1e-7);
    }

    #[test]
    fn csv_dump_has_one_row_per_breakpoint() {
        let curve = merit_order_curve(&three_stack()).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "g,cost,slope,profile_0,profile_1,profile_2");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "1.5,60,50,1.5,0,0");
    }

    #[test]
    fn infeasible_line_limits_propagate() {
        use crate::grid::Line;
        // Demand at bus 0 must be imported over a 0.5 MW line, but the only
        // generator sits at the slack bus 1; even zero generation overloads.
        let net = build_network(
            vec![Bus { id: 0, is_slack: false }, Bus { id: 1, is_slack: true }],
            vec![Line {
                from_bus: 0,
                to_bus: 1,
                reactance: 1.0,
                capacity: 0.5,
            }],
            vec![Generator {
                bus: 1,
                marginal_cost: 10.0,
                capacity: 2.0,
            }],
            vec![LoadSite { bus: 0, weight: 1.0 }],
        )
        .unwrap();
        let err = build_curve(&net, &[1.0]).unwrap_err();
        assert!(matches!(err, CurveError::Lp(LpError::Infeasible(_))), "{err:?}");
    }
}
