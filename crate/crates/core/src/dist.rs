//! Demand distributions and the expected shortage/excess risk cost.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),
    #[error("the empirical family has no parameter gradient")]
    NotDifferentiable,
}

/// Shortage (`gamma1`) and excess (`gamma2`) penalties, $/MWh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Penalties {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self, DistError> {
        if !(gamma1 > 0.0 && gamma2 > 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
            return Err(DistError::InvalidParams(format!(
                "penalties must be positive and finite, got ({gamma1}, {gamma2})"
            )));
        }
        Ok(Penalties { gamma1, gamma2 })
    }

    pub fn sum(&self) -> f64 {
        self.gamma1 + self.gamma2
    }
}

/// Parametric family tag, used to select a predictor head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Uniform,
    BoundedPareto,
}

impl Family {
    pub fn n_params(self) -> usize {
        match self {
            Family::Normal | Family::Uniform => 2,
            Family::BoundedPareto => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Uniform => "uniform",
            Family::BoundedPareto => "bounded_pareto",
        }
    }
}

/// Sorted samples with prefix sums for O(log n) risk queries.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSamples {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl EmpiricalSamples {
    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    fn n(&self) -> f64 {
        self.sorted.len() as f64
    }

    fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&s| s <= x)
    }

    fn count_lt(&self, x: f64) -> usize {
        self.sorted.partition_point(|&s| s < x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub enum DemandDistribution {
    Normal { mu: f64, sigma: f64 },
    Uniform { a: f64, b: f64 },
    BoundedPareto { l: f64, h: f64, alpha: f64 },
    Empirical(EmpiricalSamples),
}

/// Serialized form of [`DemandDistribution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal { mu: f64, sigma: f64 },
    Uniform { a: f64, b: f64 },
    BoundedPareto { l: f64, h: f64, alpha: f64 },
    Empirical { samples: Vec<f64> },
}

impl TryFrom<DistributionSpec> for DemandDistribution {
    type Error = DistError;

    fn try_from(spec: DistributionSpec) -> Result<Self, DistError> {
        match spec {
            DistributionSpec::Normal { mu, sigma } => Self::normal(mu, sigma),
            DistributionSpec::Uniform { a, b } => Self::uniform(a, b),
            DistributionSpec::BoundedPareto { l, h, alpha } => Self::bounded_pareto(l, h, alpha),
            DistributionSpec::Empirical { samples } => Self::empirical(samples),
        }
    }
}

impl From<DemandDistribution> for DistributionSpec {
    fn from(dist: DemandDistribution) -> Self {
        match dist {
            DemandDistribution::Normal { mu, sigma } => DistributionSpec::Normal { mu, sigma },
            DemandDistribution::Uniform { a, b } => DistributionSpec::Uniform { a, b },
            DemandDistribution::BoundedPareto { l, h, alpha } => {
                DistributionSpec::BoundedPareto { l, h, alpha }
            }
            DemandDistribution::Empirical(e) => DistributionSpec::Empirical { samples: e.sorted },
        }
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail `1 - Φ(z)`, accurate for large `z`.
fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Inverse standard normal cdf.
pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn check_probability(p: f64) -> Result<(), DistError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(DistError::InvalidProbability(p))
    }
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl DemandDistribution {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self, DistError> {
        if !finite(&[mu, sigma]) || sigma <= 0.0 {
            return Err(DistError::InvalidParams(format!(
                "normal needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(DemandDistribution::Normal { mu, sigma })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self, DistError> {
        if !finite(&[a, b]) || a >= b {
            return Err(DistError::InvalidParams(format!(
                "uniform needs finite a < b, got ({a}, {b})"
            )));
        }
        Ok(DemandDistribution::Uniform { a, b })
    }

    pub fn bounded_pareto(l: f64, h: f64, alpha: f64) -> Result<Self, DistError> {
        if !finite(&[l, h, alpha]) || l <= 0.0 || h <= l || alpha <= 0.0 {
            return Err(DistError::InvalidParams(format!(
                "bounded Pareto needs 0 < L < H and alpha > 0, got ({l}, {h}, {alpha})"
            )));
        }
        Ok(DemandDistribution::BoundedPareto { l, h, alpha })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self, DistError> {
        if samples.is_empty() || !finite(&samples) {
            return Err(DistError::InvalidParams(
                "empirical needs a nonempty list of finite samples".into(),
            ));
        }
        samples.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for s in &samples {
            acc += s;
            prefix.push(acc);
        }
        Ok(DemandDistribution::Empirical(EmpiricalSamples {
            sorted: samples,
            prefix,
        }))
    }

    /// Builds a parametric distribution from its parameter vector.
    pub fn from_params(family: Family, params: &[f64]) -> Result<Self, DistError> {
        if params.len() != family.n_params() {
            return Err(DistError::InvalidParams(format!(
                "{} takes {} parameters, got {}",
                family.name(),
                family.n_params(),
                params.len()
            )));
        }
        match family {
            Family::Normal => Self::normal(params[0], params[1]),
            Family::Uniform => Self::uniform(params[0], params[1]),
            Family::BoundedPareto => Self::bounded_pareto(params[0], params[1], params[2]),
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            DemandDistribution::Normal { .. } => Some(Family::Normal),
            DemandDistribution::Uniform { .. } => Some(Family::Uniform),
            DemandDistribution::BoundedPareto { .. } => Some(Family::BoundedPareto),
            DemandDistribution::Empirical(_) => None,
        }
    }

    /// Parameter vector in the order accepted by [`Self::from_params`].
    pub fn params(&self) -> Vec<f64> {
        match *self {
            DemandDistribution::Normal { mu, sigma } => vec![mu, sigma],
            DemandDistribution::Uniform { a, b } => vec![a, b],
            DemandDistribution::BoundedPareto { l, h, alpha } => vec![l, h, alpha],
            DemandDistribution::Empirical(_) => Vec::new(),
        }
    }

    /// Smallest closed interval holding all the mass (infinite for Normal).
    pub fn support(&self) -> (f64, f64) {
        match self {
            DemandDistribution::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DemandDistribution::Uniform { a, b } => (*a, *b),
            DemandDistribution::BoundedPareto { l, h, .. } => (*l, *h),
            DemandDistribution::Empirical(e) => (e.sorted[0], e.sorted[e.sorted.len() - 1]),
        }
    }

    /// Atoms of the distribution (empirical samples); empty for the
    /// continuous families.
    pub fn atoms(&self) -> &[f64] {
        match self {
            DemandDistribution::Empirical(e) => &e.sorted,
            _ => &[],
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, DemandDistribution::Empirical(_))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            DemandDistribution::Normal { mu, sigma } => std_normal_pdf((x - mu) / sigma) / sigma,
            DemandDistribution::Uniform { a, b } => {
                if x >= a && x <= b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            DemandDistribution::BoundedPareto { l, h, alpha } => {
                if x >= l && x <= h {
                    let r = (l / h).powf(alpha);
                    alpha * l.powf(alpha) * x.powf(-alpha - 1.0) / (1.0 - r)
                } else {
                    0.0
                }
            }
            DemandDistribution::Empirical(_) => 0.0,
        }
    }

    /// `P(d <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DemandDistribution::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            DemandDistribution::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            DemandDistribution::BoundedPareto { l, h, alpha } => {
                if x <= *l {
                    0.0
                } else if x >= *h {
                    1.0
                } else {
                    let r = (l / h).powf(*alpha);
                    ((1.0 - (l / x).powf(*alpha)) / (1.0 - r)).clamp(0.0, 1.0)
                }
            }
            DemandDistribution::Empirical(e) => e.count_le(x) as f64 / e.n(),
        }
    }

    /// `P(d < x)`; differs from [`Self::cdf`] only at empirical atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            DemandDistribution::Empirical(e) => e.count_lt(x) as f64 / e.n(),
            _ => self.cdf(x),
        }
    }

    /// Quantile function. The empirical family uses the generalized inverse
    /// `min { s : cdf(s) >= p }`.
    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        Ok(match self {
            DemandDistribution::Normal { mu, sigma } => mu + sigma * std_normal_quantile(p),
            DemandDistribution::Uniform { a, b } => a + p * (b - a),
            DemandDistribution::BoundedPareto { l, h, alpha } => {
                let r = (l / h).powf(*alpha);
                let u = 1.0 - p * (1.0 - r);
                (l * u.powf(-1.0 / alpha)).clamp(*l, *h)
            }
            DemandDistribution::Empirical(e) => {
                let n = e.sorted.len();
                let rank = (p * n as f64 - 1e-9).ceil().max(1.0) as usize;
                e.sorted[rank.min(n) - 1]
            }
        })
    }

    /// Derivative of `quantile(p)` with respect to each parameter.
    pub fn quantile_param_grad(&self, p: f64) -> Result<Vec<f64>, DistError> {
        check_probability(p)?;
        match *self {
            DemandDistribution::Normal { .. } => Ok(vec![1.0, std_normal_quantile(p)]),
            DemandDistribution::Uniform { .. } => Ok(vec![1.0 - p, p]),
            DemandDistribution::BoundedPareto { l, h, alpha } => {
                let r = (l / h).powf(alpha);
                let u = 1.0 - p * (1.0 - r);
                let q = l * u.powf(-1.0 / alpha);
                let d_l = u.powf(-1.0 / alpha) - u.powf(-1.0 / alpha - 1.0) * p * r;
                let d_h = l * u.powf(-1.0 / alpha - 1.0) * p * r / h;
                let d_alpha =
                    q * (u.ln() / (alpha * alpha) - p * r * (l / h).ln() / (alpha * u));
                Ok(vec![d_l, d_h, d_alpha])
            }
            DemandDistribution::Empirical(_) => Err(DistError::NotDifferentiable),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DemandDistribution::Normal { mu, .. } => *mu,
            DemandDistribution::Uniform { a, b } => 0.5 * (a + b),
            DemandDistribution::BoundedPareto { l, h, alpha } => {
                let r = (l / h).powf(*alpha);
                if (alpha - 1.0).abs() < 1e-12 {
                    h * l / (h - l) * (h / l).ln()
                } else {
                    l.powf(*alpha) / (1.0 - r) * alpha / (alpha - 1.0)
                        * (l.powf(1.0 - alpha) - h.powf(1.0 - alpha))
                }
            }
            DemandDistribution::Empirical(e) => e.prefix[e.sorted.len()] / e.n(),
        }
    }

    /// Expected shortage `E(d - g)+` and expected excess `E(g - d)+`.
    pub fn partial_expectations(&self, g: f64) -> (f64, f64) {
        match self {
            DemandDistribution::Normal { mu, sigma } => {
                let z = (g - mu) / sigma;
                let phi = std_normal_pdf(z);
                let shortage = sigma * (phi - z * std_normal_sf(z));
                let excess = sigma * (phi + z * std_normal_cdf(z));
                (shortage.max(0.0), excess.max(0.0))
            }
            DemandDistribution::Uniform { a, b } => {
                let (a, b) = (*a, *b);
                if g <= a {
                    (0.5 * (a + b) - g, 0.0)
                } else if g >= b {
                    (0.0, g - 0.5 * (a + b))
                } else {
                    let w = b - a;
                    ((b - g) * (b - g) / (2.0 * w), (g - a) * (g - a) / (2.0 * w))
                }
            }
            DemandDistribution::BoundedPareto { l, h, .. } => {
                let mean = self.mean();
                if g <= *l {
                    return (mean - g, 0.0);
                }
                if g >= *h {
                    return (0.0, g - mean);
                }
                // E(g-d)+ = ∫_L^g F and E(d-g)+ = ∫_g^H (1 - F)
                let tol = 1e-12 * h.abs().max(1.0);
                let excess = adaptive_simpson(&|x| self.cdf(x), *l, g, tol);
                let shortage = adaptive_simpson(&|x| 1.0 - self.cdf(x), g, *h, tol);
                (shortage.max(0.0), excess.max(0.0))
            }
            DemandDistribution::Empirical(e) => {
                let n = e.sorted.len();
                let k = e.count_le(g);
                let below = e.prefix[k];
                let above = e.prefix[n] - below;
                let shortage = (above - (n - k) as f64 * g) / e.n();
                let excess = (k as f64 * g - below) / e.n();
                (shortage.max(0.0), excess.max(0.0))
            }
        }
    }

    /// `γ1·E(d - g)+ + γ2·E(g - d)+`.
    pub fn risk(&self, g: f64, pen: &Penalties) -> f64 {
        let (shortage, excess) = self.partial_expectations(g);
        pen.gamma1 * shortage + pen.gamma2 * excess
    }

    /// Right derivative of [`Self::risk`]: `(γ1 + γ2)·cdf(g) - γ1`.
    pub fn risk_deriv(&self, g: f64, pen: &Penalties) -> f64 {
        pen.sum() * self.cdf(g) - pen.gamma1
    }

    /// Left derivative of [`Self::risk`].
    pub fn risk_deriv_left(&self, g: f64, pen: &Penalties) -> f64 {
        pen.sum() * self.cdf_left(g) - pen.gamma1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DemandDistribution::Normal { mu, sigma } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mu + sigma * z
            }
            DemandDistribution::Uniform { a, b } => a + (b - a) * rng.gen::<f64>(),
            DemandDistribution::Empirical(e) => e.sorted[rng.gen_range(0..e.sorted.len())],
            DemandDistribution::BoundedPareto { .. } => {
                let u: f64 = rng.gen();
                self.quantile(u).expect("u in [0, 1)")
            }
        }
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` with absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pen(g1: f64, g2: f64) -> Penalties {
        Penalties::new(g1, g2).unwrap()
    }

    #[test]
    fn basic_values() {
        let n = DemandDistribution::normal(0.0, 1.0).unwrap();
        assert_eq!(n.cdf(0.0), 0.5);
        let u = DemandDistribution::uniform(0.0, 2.0).unwrap();
        assert_eq!(u.quantile(0.25).unwrap(), 0.5);
        let bp = DemandDistribution::bounded_pareto(1.0, 4.0, 1.0).unwrap();
        assert!((bp.cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bounded_pareto_cdf_matches_sampling() {
        let bp = DemandDistribution::bounded_pareto(1.0, 4.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| bp.sample(&mut rng) <= 2.0).count();
        assert!((hits as f64 / n as f64 - 2.0 / 3.0).abs() < 3e-3);
    }

    #[test]
    fn normal_quantile_is_accurate() {
        // Φ⁻¹(0.975) to 15 digits
        let q = std_normal_quantile(0.975);
        assert!((q - 1.959_963_984_540_054).abs() < 1e-12, "{q}");
        assert_eq!(std_normal_quantile(0.5), 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(DemandDistribution::normal(0.0, 0.0).is_err());
        assert!(DemandDistribution::uniform(1.0, 1.0).is_err());
        assert!(DemandDistribution::bounded_pareto(0.0, 1.0, 1.0).is_err());
        assert!(DemandDistribution::bounded_pareto(2.0, 1.0, 1.0).is_err());
        assert!(DemandDistribution::empirical(vec![]).is_err());
        assert!(Penalties::new(0.0, 1.0).is_err());
        let n = DemandDistribution::normal(0.0, 1.0).unwrap();
        assert_eq!(n.quantile(1.5), Err(DistError::InvalidProbability(1.5)));
        assert_eq!(n.quantile(-0.1), Err(DistError::InvalidProbability(-0.1)));
    }

    #[test]
    fn risk_examples() {
        let e = DemandDistribution::empirical(vec![1.3]).unwrap();
        assert_eq!(e.risk(1.3, &pen(100.0, 10.0)), 0.0);

        let n = DemandDistribution::normal(0.0, 1.0).unwrap();
        let half_normal_mean = (2.0 / std::f64::consts::PI).sqrt();
        assert!((n.risk(0.0, &pen(1.0, 1.0)) - half_normal_mean).abs() < 1e-14);

        let u = DemandDistribution::uniform(0.0, 2.0).unwrap();
        let p = Penalties {
            gamma1: 1.0,
            gamma2: 0.0,
        };
        assert!((u.risk(0.0, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_risk_matches_quadrature() {
        let n = DemandDistribution::normal(1.0, 0.2).unwrap();
        for g in [0.3, 0.9, 1.0, 1.25, 1.8] {
            let (s, x) = n.partial_expectations(g);
            let s_ref = adaptive_simpson(&|t| (t - g) * n.pdf(t), g, 1.0 + 12.0 * 0.2, 1e-14);
            let x_ref = adaptive_simpson(&|t| (g - t) * n.pdf(t), 1.0 - 12.0 * 0.2, g, 1e-14);
            assert!((s - s_ref).abs() < 1e-10, "{g}: {s} vs {s_ref}");
            assert!((x - x_ref).abs() < 1e-10, "{g}: {x} vs {x_ref}");
        }
    }

    #[test]
    fn risk_deriv_examples() {
        let p = pen(100.0, 10.0);
        let n = DemandDistribution::normal(1.0, 0.1).unwrap();
        assert_eq!(n.risk_deriv(1.0, &p), -45.0);
        let u = DemandDistribution::uniform(1.0, 2.0).unwrap();
        assert_eq!(u.risk_deriv(0.5, &p), -100.0);
        assert_eq!(u.risk_deriv(2.5, &p), 10.0);
    }

    #[test]
    fn empirical_steps_and_generalized_inverse() {
        let e = DemandDistribution::empirical(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.cdf(2.0), 0.75);
        assert_eq!(e.cdf_left(2.0), 0.25);
        assert_eq!(e.cdf(0.5), 0.0);
        assert_eq!(e.quantile(0.0).unwrap(), 1.0);
        assert_eq!(e.quantile(0.25).unwrap(), 1.0);
        assert_eq!(e.quantile(0.26).unwrap(), 2.0);
        assert_eq!(e.quantile(0.75).unwrap(), 2.0);
        assert_eq!(e.quantile(1.0).unwrap(), 3.0);
        assert_eq!(e.mean(), 2.0);
        let (s, x) = e.partial_expectations(2.5);
        assert!((s - 0.125).abs() < 1e-15 && (x - 0.625).abs() < 1e-15);
        assert!(e.quantile_param_grad(0.5).is_err());
    }

    #[test]
    fn bounded_pareto_mean_by_quadrature() {
        for alpha in [0.5, 1.0, 2.5] {
            let bp = DemandDistribution::bounded_pareto(0.8, 2.6, alpha).unwrap();
            let m = 0.8 + adaptive_simpson(&|x| 1.0 - bp.cdf(x), 0.8, 2.6, 1e-14);
            assert!((bp.mean() - m).abs() < 1e-10, "alpha {alpha}");
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let d = DemandDistribution::bounded_pareto(1.0, 3.0, 1.5).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(text, r#"{"family":"bounded_pareto","l":1.0,"h":3.0,"alpha":1.5}"#);
        let back: DemandDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        let bad = serde_json::from_str::<DemandDistribution>(r#"{"family":"normal","mu":0,"sigma":-1}"#);
        assert!(bad.is_err());
        let e: DemandDistribution =
            serde_json::from_str(r#"{"family":"empirical","samples":[2,1]}"#).unwrap();
        assert_eq!(e.atoms(), &[1.0, 2.0]);
    }

    #[test]
    fn params_round_trip() {
        for d in [
            DemandDistribution::normal(1.0, 0.3).unwrap(),
            DemandDistribution::uniform(0.5, 1.5).unwrap(),
            DemandDistribution::bounded_pareto(0.5, 1.5, 2.0).unwrap(),
        ] {
            let fam = d.family().unwrap();
            assert_eq!(DemandDistribution::from_params(fam, &d.params()).unwrap(), d);
        }
        assert!(DemandDistribution::from_params(Family::Normal, &[1.0]).is_err());
    }
}
