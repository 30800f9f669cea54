//! Data preparation and single-framework runs shared by the commands.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use edlab_core::curve::{build_curve, CostCurve, CurveError};
use edlab_core::data::{make_samples, Sample, LAGS};
use edlab_core::grid::Network;
use edlab_core::learn::{evaluate, metrics_from_dispatch, train, Curves, Dataset, Evaluation, Framework, Predictor};
use edlab_core::lp::LpError;
use rayon::prelude::*;

use crate::config::{CurveMode, ExperimentConfig};
use crate::report::RunRecord;

/// Raised when the network cannot serve the requested demand; the binary
/// maps it to exit code 2.
#[derive(Debug)]
pub struct Infeasible(pub String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "infeasible: {}", self.0)
    }
}

impl std::error::Error for Infeasible {}

/// Builds a curve, turning LP infeasibility into [`Infeasible`].
pub fn curve_at(net: &Network, total_demand: f64) -> Result<CostCurve> {
    match build_curve(net, &net.nodal_demand(total_demand)) {
        Ok(c) => Ok(c),
        Err(CurveError::Lp(LpError::Infeasible(v))) => Err(Infeasible(format!(
            "line limits cannot be met at demand {total_demand} MW (residual {v:.3e})"
        ))
        .into()),
        Err(CurveError::DegenerateDomain(a, b)) => Err(Infeasible(format!(
            "feasible generation range [{a}, {b}] is empty at demand {total_demand} MW"
        ))
        .into()),
        Err(e) => Err(e.into()),
    }
}

pub struct Prepared {
    pub network: Network,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub test_samples: Vec<Sample>,
    /// Demand at which the fixed curve was built.
    pub curve_demand: Option<f64>,
}

fn per_slot_curves(net: &Network, samples: &[Sample]) -> Result<Curves> {
    let curves: Result<Vec<Arc<CostCurve>>> = samples
        .par_iter()
        .map(|s| curve_at(net, s.features[LAGS - 1]).map(Arc::new))
        .collect();
    Ok(Curves::PerSample(curves?))
}

pub fn mean_training_load(samples: &[Sample]) -> f64 {
    samples.iter().map(|s| s.target).sum::<f64>() / samples.len() as f64
}

/// Loads the data, splits it and attaches cost curves.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let network = cfg.network()?;
    let series = cfg.series()?;
    let split = make_samples(&series, cfg.split).context("cannot split the load series")?;
    let (curves, curve_demand) = match cfg.curve_mode {
        CurveMode::FixedMean => {
            let mean = mean_training_load(&split.train);
            let curve = Arc::new(curve_at(&network, mean)?);
            let c = || Curves::Fixed(curve.clone());
            ((c(), c(), c()), Some(mean))
        }
        CurveMode::PerSlot => (
            (
                per_slot_curves(&network, &split.train)?,
                per_slot_curves(&network, &split.val)?,
                per_slot_curves(&network, &split.test)?,
            ),
            None,
        ),
    };
    Ok(Prepared {
        train: Dataset::from_samples(&split.train, curves.0)?,
        val: Dataset::from_samples(&split.val, curves.1)?,
        test: Dataset::from_samples(&split.test, curves.2)?,
        test_samples: split.test,
        network,
        curve_demand,
    })
}

pub struct Run {
    pub record: RunRecord,
    pub predictor: Predictor,
    pub evaluation: Evaluation,
}

/// Trains one framework and evaluates it on `data`.
pub fn run_framework(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    framework: Framework,
    seed: u64,
    data: &Dataset,
) -> Result<Run> {
    let tc = cfg.train_config(framework, seed);
    let out = train(&tc, &cfg.penalties, &prep.train, &prep.val)
        .with_context(|| format!("training {} (seed {seed}) failed", framework.label()))?;
    let evaluation = evaluate(&out.predictor, data, &cfg.penalties)?;
    Ok(Run {
        record: RunRecord {
            seed,
            framework: framework.label(),
            test: evaluation.metrics.clone(),
            train_seconds: out.history.seconds,
            epochs_run: out.history.epochs_run,
            best_epoch: out.history.best_epoch,
            best_val_loss: out.history.best_val_loss(),
        },
        predictor: out.predictor,
        evaluation,
    })
}

/// Dispatches the realized demand itself.
pub fn oracle_run(cfg: &ExperimentConfig, data: &Dataset) -> Result<(RunRecord, Evaluation)> {
    let (metrics, losses) = metrics_from_dispatch(data, &data.targets, &data.targets, &cfg.penalties)?;
    let evaluation = Evaluation {
        metrics: metrics.clone(),
        predictions: data.targets.clone(),
        dispatch: data.targets.clone(),
        losses,
    };
    Ok((
        RunRecord {
            seed: 0,
            framework: "oracle".into(),
            test: metrics,
            train_seconds: 0.0,
            epochs_run: 0,
            best_epoch: 0,
            best_val_loss: 0.0,
        },
        evaluation,
    ))
}

/// Per-sample series for external plotting.
pub fn write_plot_csv(path: &Path, samples: &[Sample], eval: &Evaluation) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["timestamp", "hour", "target", "prediction", "dispatch", "cost_loss"])?;
    for (i, s) in samples.iter().enumerate() {
        w.write_record([
            s.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            s.hour_of_day().to_string(),
            s.target.to_string(),
            eval.predictions[i].to_string(),
            eval.dispatch[i].to_string(),
            eval.losses[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
