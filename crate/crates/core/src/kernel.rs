//! Single-period stochastic dispatch on a precomputed cost curve.
//!
//! The objective `L(g) = C(g) + R(g)` is convex on the curve domain, so its
//! minimizer is found by bisection on the monotone right derivative
//! `D(g) = C'(g) + (γ1 + γ2)F(g) - γ1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CostCurve, CurveError};
use crate::dist::{DemandDistribution, DistError, Penalties};

/// Bisection stops once the bracket is this fraction of the domain width.
pub const BISECTION_TOL: f64 = 1e-6;
/// Optima this close (relative to the domain) to a breakpoint use the left
/// segment's slope for implicit differentiation.
pub const BREAKPOINT_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("task-specific gradients need a parametric family, not an empirical one")]
    EmpiricalNotDifferentiable,
    #[error("no demand samples given")]
    EmptySamples,
}

/// Where the optimum sits relative to the curve and the distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    ClampedLow,
    ClampedHigh,
    /// Pinned at a curve breakpoint or a distribution atom.
    Kink,
    /// Inside a smooth stretch of the given curve segment.
    Interior { segment: usize },
}

impl Regime {
    pub fn is_clamped(self) -> bool {
        matches!(self, Regime::ClampedLow | Regime::ClampedHigh)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    pub g_total: f64,
    pub profile: Vec<f64>,
    pub gen_cost: f64,
    pub risk_cost: f64,
    pub task_loss: f64,
    pub regime: Regime,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleLoss {
    pub value: f64,
    pub grad_g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpecificLoss {
    pub value: f64,
    /// Gradient of `value` with respect to the distribution parameters.
    pub grad_theta: Vec<f64>,
    pub g_hat: f64,
    pub regime: Regime,
}

/// Right derivative of the expected task loss at `g`.
pub fn derivative(curve: &CostCurve, dist: &DemandDistribution, pen: &Penalties, g: f64) -> f64 {
    curve.deriv(g) + dist.risk_deriv(g, pen)
}

/// Left derivative of the expected task loss at `g`.
pub fn derivative_left(
    curve: &CostCurve,
    dist: &DemandDistribution,
    pen: &Penalties,
    g: f64,
) -> f64 {
    curve.deriv_left(g) + dist.risk_deriv_left(g, pen)
}

/// `K(x) = (γ1 + γ2)H(x) - γ1 + C'(x)` for a true demand cdf `H`.
pub fn k_function(curve: &CostCurve, truth: &DemandDistribution, pen: &Penalties, x: f64) -> f64 {
    derivative(curve, truth, pen, x)
}

/// Expected task loss `C(g) + R(g)` at a point of the domain.
pub fn expected_loss(
    curve: &CostCurve,
    dist: &DemandDistribution,
    pen: &Penalties,
    g: f64,
) -> Result<f64, KernelError> {
    Ok(curve.eval(g)? + dist.risk(g, pen))
}

/// Locates the minimizer of `C + R` on the curve domain.
pub fn optimal_point(curve: &CostCurve, dist: &DemandDistribution, pen: &Penalties) -> (f64, Regime) {
    let d = |g| derivative(curve, dist, pen, g);
    let d_left = |g| derivative_left(curve, dist, pen, g);
    let (g_min, g_max) = (curve.g_min(), curve.g_max());
    if d(g_min) >= 0.0 {
        return (g_min, Regime::ClampedLow);
    }
    if d_left(g_max) <= 0.0 {
        return (g_max, Regime::ClampedHigh);
    }
    let classify = |g: f64| {
        if d_left(g) < d(g) {
            Regime::Kink
        } else {
            Regime::Interior {
                segment: curve.segment_index(g),
            }
        }
    };

    let (mut lo, mut hi) = (g_min, g_max);
    let tol = (g_max - g_min) * BISECTION_TOL;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) < 0.0 {
            lo = mid;
        } else if d_left(mid) > 0.0 {
            hi = mid;
        } else {
            return (mid, classify(mid));
        }
    }

    // The bracket now satisfies D(lo) < 0 < D⁻(hi). Look for a kink that
    // carries the sign change, otherwise solve the smooth stretch exactly.
    let mut kinks: Vec<f64> = curve
        .kinks_between(lo, hi)
        .chain(dist.atoms().iter().copied().filter(|&a| a > lo && a < hi))
        .collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let mut left = lo;
    let mut right = hi;
    for &b in &kinks {
        if d_left(b) <= 0.0 && d(b) >= 0.0 {
            return (b, Regime::Kink);
        }
        if d_left(b) > 0.0 {
            right = b;
            break;
        }
        left = b;
    }
    let lambda = curve.deriv(0.5 * (left + right));
    let g = if dist.is_continuous() {
        let p = ((pen.gamma1 - lambda) / pen.sum()).clamp(0.0, 1.0);
        match dist.quantile(p) {
            Ok(q) if q.is_finite() => q.clamp(left, right),
            _ => 0.5 * (left + right),
        }
    } else {
        // D is flat on this stretch, every point is optimal
        0.5 * (left + right)
    };
    let regime = if g == left && left > lo || g == right && right < hi {
        Regime::Kink
    } else {
        Regime::Interior {
            segment: curve.segment_index(g),
        }
    };
    (g, regime)
}

/// Minimizes `C(g) + R(g)` over the curve domain.
pub fn optimal_dispatch(
    curve: &CostCurve,
    dist: &DemandDistribution,
    pen: &Penalties,
) -> Result<DispatchResult, KernelError> {
    let (g, regime) = optimal_point(curve, dist, pen);
    let gen_cost = curve.eval(g)?;
    let risk_cost = dist.risk(g, pen);
    Ok(DispatchResult {
        g_total: g,
        profile: curve.profile(g)?,
        gen_cost,
        risk_cost,
        task_loss: gen_cost + risk_cost,
        regime,
    })
}

/// Realized regret of dispatching `g_hat` when demand turns out to be `d`:
/// `C(ĝ) - C(d) + γ1(d - ĝ)+ + γ2(ĝ - d)+`, with `C` extended linearly
/// outside its domain. `grad_g` uses the right slope at kinks and drops both
/// penalty terms when `ĝ = d`.
pub fn sample_loss_modelfree(curve: &CostCurve, g_hat: f64, d: f64, pen: &Penalties) -> SampleLoss {
    let value = curve.eval_extended(g_hat) - curve.eval_extended(d)
        + pen.gamma1 * (d - g_hat).max(0.0)
        + pen.gamma2 * (g_hat - d).max(0.0);
    let mut grad_g = curve.deriv(g_hat);
    if d > g_hat {
        grad_g -= pen.gamma1;
    } else if g_hat > d {
        grad_g += pen.gamma2;
    }
    SampleLoss { value, grad_g }
}

/// Sensitivity of the optimal dispatch to the distribution parameters.
pub fn dispatch_param_grad(
    curve: &CostCurve,
    dist: &DemandDistribution,
    pen: &Penalties,
    g_hat: f64,
    regime: Regime,
) -> Result<Vec<f64>, KernelError> {
    let n = dist.params().len();
    if !dist.is_continuous() {
        return Err(KernelError::EmpiricalNotDifferentiable);
    }
    if regime.is_clamped() {
        return Ok(vec![0.0; n]);
    }
    // Within the snap distance of an interior breakpoint, including optima
    // pinned at one, the segment to the left supplies the slope.
    let snap = BREAKPOINT_SNAP * curve.range();
    let bps = curve.breakpoints();
    let near = (1..bps.len() - 1).find(|&k| (g_hat - bps[k].g).abs() <= snap);
    let lambda = match (near, regime) {
        (Some(k), _) => curve.slopes()[k - 1],
        (None, Regime::Interior { segment }) => curve.slopes()[segment],
        _ => return Ok(vec![0.0; n]),
    };
    let p = (pen.gamma1 - lambda) / pen.sum();
    if !(0.0..=1.0).contains(&p) {
        return Ok(vec![0.0; n]);
    }
    Ok(dist.quantile_param_grad(p)?)
}

/// Task loss of the dispatch implied by `dist` against realized demand `d`,
/// with its gradient in the distribution parameters.
pub fn sample_loss_taskspecific(
    curve: &CostCurve,
    dist: &DemandDistribution,
    d: f64,
    pen: &Penalties,
) -> Result<TaskSpecificLoss, KernelError> {
    if !dist.is_continuous() {
        return Err(KernelError::EmpiricalNotDifferentiable);
    }
    let (g_hat, regime) = optimal_point(curve, dist, pen);
    let loss = sample_loss_modelfree(curve, g_hat, d, pen);
    let dg = dispatch_param_grad(curve, dist, pen, g_hat, regime)?;
    Ok(TaskSpecificLoss {
        value: loss.value,
        grad_theta: dg.iter().map(|v| loss.grad_g * v).collect(),
        g_hat,
        regime,
    })
}

/// Average excess regret of dispatching by `dist_hat` instead of the
/// optimum under the empirical distribution of `true_demands`.
pub fn performance_gap(
    curve: &CostCurve,
    dist_hat: &DemandDistribution,
    true_demands: &[f64],
    pen: &Penalties,
) -> Result<f64, KernelError> {
    if true_demands.is_empty() {
        return Err(KernelError::EmptySamples);
    }
    let truth = DemandDistribution::empirical(true_demands.to_vec())?;
    let (g_hat, _) = optimal_point(curve, dist_hat, pen);
    let (g_star, _) = optimal_point(curve, &truth, pen);
    Ok(expected_loss(curve, &truth, pen, g_hat)? - expected_loss(curve, &truth, pen, g_star)?)
}
