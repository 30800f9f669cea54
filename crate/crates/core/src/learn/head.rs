//! Output heads: how raw network outputs map to a load, a dispatch, or the
//! parameters of a demand distribution.

use serde::{Deserialize, Serialize};

use crate::dist::{DemandDistribution, Family};

use super::LearnError;

/// Floor added to positive widths so they never collapse to zero.
const WIDTH_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Framework {
    /// Squared-error load forecast; dispatch meets the forecast as given.
    Mse,
    /// Distribution forecast, dispatched through the optimization kernel.
    TaskSpecific { family: Family },
    /// Direct dispatch trained on realized regret.
    ModelFree,
}

impl Framework {
    pub fn head_dim(self) -> usize {
        match self {
            Framework::Mse | Framework::ModelFree => 1,
            Framework::TaskSpecific { family } => family.n_params(),
        }
    }

    pub fn label(self) -> String {
        match self {
            Framework::Mse => "mse".into(),
            Framework::ModelFree => "model_free".into(),
            Framework::TaskSpecific { family } => format!("task_specific_{}", family.name()),
        }
    }
}

/// Location and spread of the training targets; heads start near `mean`
/// and move in units of `std`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn fit(targets: &[f64]) -> Result<Self, LearnError> {
        if targets.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Ok(TargetScale {
            mean,
            std: if std < 1e-12 * mean.abs().max(1.0) { 1.0 } else { std },
        })
    }

    pub fn scalar(&self, o: f64) -> f64 {
        self.mean + self.std * o
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Distribution parameters for `family` and the Jacobian `∂θ/∂o`
/// (row per parameter, column per raw output).
pub fn family_params(family: Family, scale: &TargetScale, o: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (m, s) = (scale.mean, scale.std);
    match family {
        Family::Normal => {
            let mu = m + s * o[0];
            let sigma = s * (softplus(o[1]) + WIDTH_FLOOR);
            (vec![mu, sigma], vec![vec![s, 0.0], vec![0.0, s * sigmoid(o[1])]])
        }
        Family::Uniform => {
            let a = m + s * o[0];
            let b = a + s * (softplus(o[1]) + WIDTH_FLOOR);
            (vec![a, b], vec![vec![s, 0.0], vec![s, s * sigmoid(o[1])]])
        }
        Family::BoundedPareto => {
            // shift so that the lower bound starts near the target mean
            let shift = (m / s).max(0.0);
            let l = s * softplus(o[0] + shift) + 1e-9;
            let dl = s * sigmoid(o[0] + shift);
            let h = l + s * (softplus(o[1]) + WIDTH_FLOOR);
            let alpha = softplus(o[2]) + 1e-3;
            (
                vec![l, h, alpha],
                vec![
                    vec![dl, 0.0, 0.0],
                    vec![dl, s * sigmoid(o[1]), 0.0],
                    vec![0.0, 0.0, sigmoid(o[2])],
                ],
            )
        }
    }
}

pub fn family_distribution(
    family: Family,
    scale: &TargetScale,
    o: &[f64],
) -> Result<DemandDistribution, LearnError> {
    let (theta, _) = family_params(family, scale, o);
    Ok(DemandDistribution::from_params(family, &theta)?)
}
