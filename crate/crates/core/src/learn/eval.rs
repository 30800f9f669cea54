//! Test-set metrics: forecast error and realized dispatch regret, overall and
//! by time-of-day window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Penalties;
use crate::kernel;

use super::head::Framework;
use super::train::{Dataset, Predictor};
use super::LearnError;

/// Hour-of-day windows `[start, end)`.
pub const PERIODS: [(u32, u32); 4] = [(0, 6), (6, 12), (12, 18), (18, 24)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub start_hour: u32,
    pub end_hour: u32,
    pub count: usize,
    pub mse: f64,
    pub cost_loss: f64,
    pub cost_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    /// Mean squared error of the reported prediction, MW².
    pub mse: f64,
    /// Mean realized regret, $.
    pub cost_loss: f64,
    /// Population standard deviation of the per-sample regret.
    pub cost_std: f64,
    pub periods: Vec<PeriodMetrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    /// Reported prediction per sample: the load forecast for the MSE
    /// framework, the dispatched quantity otherwise.
    pub predictions: Vec<f64>,
    pub dispatch: Vec<f64>,
    pub losses: Vec<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Metrics of a given dispatch and prediction sequence on `data`.
pub fn metrics_from_dispatch(
    data: &Dataset,
    predictions: &[f64],
    dispatch: &[f64],
    pen: &Penalties,
) -> Result<(Metrics, Vec<f64>), LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    for v in [predictions.len(), dispatch.len()] {
        if v != data.len() {
            return Err(LearnError::DimensionMismatch {
                expected: data.len(),
                got: v,
            });
        }
    }
    let losses: Vec<f64> = (0..data.len())
        .map(|i| kernel::sample_loss_modelfree(data.curves.get(i), dispatch[i], data.targets[i], pen).value)
        .collect();
    let sq: Vec<f64> = predictions
        .iter()
        .zip(&data.targets)
        .map(|(p, d)| (p - d) * (p - d))
        .collect();
    let (cost_loss, cost_std) = mean_std(&losses);
    let periods = PERIODS
        .iter()
        .map(|&(start, end)| {
            let idx: Vec<usize> = (0..data.len())
                .filter(|&i| data.hours[i] >= start && data.hours[i] < end)
                .collect();
            let l: Vec<f64> = idx.iter().map(|&i| losses[i]).collect();
            let s: Vec<f64> = idx.iter().map(|&i| sq[i]).collect();
            let (c, cs) = mean_std(&l);
            PeriodMetrics {
                start_hour: start,
                end_hour: end,
                count: idx.len(),
                mse: mean_std(&s).0,
                cost_loss: c,
                cost_std: cs,
            }
        })
        .collect();
    Ok((
        Metrics {
            count: data.len(),
            mse: mean_std(&sq).0,
            cost_loss,
            cost_std,
            periods,
        },
        losses,
    ))
}

pub fn evaluate(predictor: &Predictor, data: &Dataset, pen: &Penalties) -> Result<Evaluation, LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let rows: Vec<Result<(f64, f64), LearnError>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = &data.features[i];
            let g = predictor.dispatch(x, data.curves.get(i), pen)?;
            let p = match predictor.framework {
                Framework::Mse => predictor.load_forecast(x)?,
                _ => g,
            };
            Ok((p, g))
        })
        .collect();
    let mut predictions = Vec::with_capacity(data.len());
    let mut dispatch = Vec::with_capacity(data.len());
    for r in rows {
        let (p, g) = r?;
        predictions.push(p);
        dispatch.push(g);
    }
    let (metrics, losses) = metrics_from_dispatch(data, &predictions, &dispatch, pen)?;
    Ok(Evaluation {
        metrics,
        predictions,
        dispatch,
        losses,
    })
}
