//! Minibatch training with validation-based early stopping.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::CostCurve;
use crate::data::{FeatureScaler, Sample};
use crate::dist::{DemandDistribution, Family, Penalties};
use crate::kernel;

use super::head::{family_distribution, family_params, Framework, TargetScale};
use super::mlp::{Adam, Mlp};
use super::LearnError;

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Samples per work unit in parallel loss evaluation. Partial sums are
/// combined in chunk order, so results do not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub framework: Framework,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            framework: Framework::Mse,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            patience: 10,
            seed: 0,
            hidden: vec![128, 128],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }
}

/// Cost curves seen by each sample: one shared curve, or one per sample.
#[derive(Clone, Debug)]
pub enum Curves {
    Fixed(Arc<CostCurve>),
    PerSample(Vec<Arc<CostCurve>>),
}

impl Curves {
    pub fn get(&self, i: usize) -> &CostCurve {
        match self {
            Curves::Fixed(c) => c,
            Curves::PerSample(v) => &v[i],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    /// Raw (unnormalized) feature rows.
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Hour of day of each target.
    pub hours: Vec<u32>,
    pub curves: Curves,
}

impl Dataset {
    pub fn from_samples(samples: &[Sample], curves: Curves) -> Result<Self, LearnError> {
        if let Curves::PerSample(v) = &curves {
            if v.len() != samples.len() {
                return Err(LearnError::DimensionMismatch {
                    expected: samples.len(),
                    got: v.len(),
                });
            }
        }
        Ok(Dataset {
            features: samples.iter().map(|s| s.features.clone()).collect(),
            targets: samples.iter().map(|s| s.target).collect(),
            hours: samples.iter().map(Sample::hour_of_day).collect(),
            curves,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub framework: Framework,
    pub mlp: Mlp,
    pub scaler: FeatureScaler,
    pub target: TargetScale,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    predictor: Predictor,
}

impl Predictor {
    pub fn head(&self, raw_features: &[f64]) -> Result<Vec<f64>, LearnError> {
        self.mlp.forward(&self.scaler.transform(raw_features))
    }

    /// Predicted demand distribution for the task-specific framework.
    pub fn distribution(&self, raw_features: &[f64]) -> Result<Option<DemandDistribution>, LearnError> {
        match self.framework {
            Framework::TaskSpecific { family } => {
                let o = self.head(raw_features)?;
                Ok(Some(family_distribution(family, &self.target, &o)?))
            }
            _ => Ok(None),
        }
    }

    /// Point load forecast: the scalar head, or the predicted mean.
    pub fn load_forecast(&self, raw_features: &[f64]) -> Result<f64, LearnError> {
        match self.distribution(raw_features)? {
            Some(d) => Ok(d.mean()),
            None => Ok(self.target.scalar(self.head(raw_features)?[0])),
        }
    }

    /// Total generation to dispatch for this input.
    pub fn dispatch(
        &self,
        raw_features: &[f64],
        curve: &CostCurve,
        pen: &Penalties,
    ) -> Result<f64, LearnError> {
        match self.distribution(raw_features)? {
            Some(d) => Ok(kernel::optimal_point(curve, &d, pen).0),
            None => Ok(curve.clamp(self.target.scalar(self.head(raw_features)?[0]))),
        }
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        Ok(serde_json::to_string(&ModelFile {
            version: MODEL_FORMAT_VERSION,
            predictor: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(LearnError::UnsupportedVersion(file.version));
        }
        let p = file.predictor;
        if p.mlp.output_dim() != p.framework.head_dim() || p.mlp.input_dim() != p.scaler.mean.len() {
            return Err(LearnError::DimensionMismatch {
                expected: p.framework.head_dim(),
                got: p.mlp.output_dim(),
            });
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LearnError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LearnError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Training objective of one framework over a normalized dataset.
pub struct Objective<'a> {
    pub framework: Framework,
    pub pen: Penalties,
    pub target: TargetScale,
    pub inputs: &'a [Vec<f64>],
    pub targets: &'a [f64],
    pub curves: &'a Curves,
}

impl Objective<'_> {
    /// Loss of sample `i` and its gradient with respect to the raw head output.
    pub fn head_loss(&self, o: &[f64], i: usize) -> Result<(f64, Vec<f64>), LearnError> {
        let d = self.targets[i];
        let (m, s) = (self.target.mean, self.target.std);
        match self.framework {
            Framework::Mse => {
                let y = m + s * o[0];
                Ok(((y - d) * (y - d), vec![2.0 * (y - d) * s]))
            }
            Framework::ModelFree => {
                let curve = self.curves.get(i);
                let raw = m + s * o[0];
                let g = curve.clamp(raw);
                let loss = kernel::sample_loss_modelfree(curve, g, d, &self.pen);
                let grad = if curve.contains(raw) { loss.grad_g * s } else { 0.0 };
                Ok((loss.value, vec![grad]))
            }
            Framework::TaskSpecific { family } => {
                let (theta, jac) = family_params(family, &self.target, o);
                let dist = DemandDistribution::from_params(family, &theta)?;
                let t = kernel::sample_loss_taskspecific(self.curves.get(i), &dist, d, &self.pen)?;
                let grad = (0..o.len())
                    .map(|c| (0..theta.len()).map(|r| t.grad_theta[r] * jac[r][c]).sum())
                    .collect();
                Ok((t.value, grad))
            }
        }
    }

    pub fn sample_loss(&self, mlp: &Mlp, i: usize) -> Result<f64, LearnError> {
        let o = mlp.forward(&self.inputs[i])?;
        Ok(self.head_loss(&o, i)?.0)
    }

    /// Mean loss over `idx`.
    pub fn loss(&self, mlp: &Mlp, idx: &[usize]) -> Result<f64, LearnError> {
        if idx.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let partial: Vec<Result<f64, LearnError>> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = 0.0;
                for &i in chunk {
                    acc += self.sample_loss(mlp, i)?;
                }
                Ok(acc)
            })
            .collect();
        let mut total = 0.0;
        for p in partial {
            total += p?;
        }
        Ok(total / idx.len() as f64)
    }

    /// Mean loss over `idx` and its gradient with respect to the weights.
    pub fn loss_and_grad(&self, mlp: &Mlp, idx: &[usize]) -> Result<(f64, Vec<f64>), LearnError> {
        if idx.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let partial: Vec<Result<(f64, Vec<f64>), LearnError>> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = 0.0;
                let mut grad = vec![0.0; mlp.n_params()];
                for &i in chunk {
                    let trace = mlp.forward_trace(&self.inputs[i])?;
                    let (l, up) = self.head_loss(trace.output(), i)?;
                    acc += l;
                    mlp.backward_into(&trace, &up, &mut grad)?;
                }
                Ok((acc, grad))
            })
            .collect();
        let mut total = 0.0;
        let mut grad = vec![0.0; mlp.n_params()];
        for p in partial {
            let (l, g) = p?;
            total += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let n = idx.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation loss; entry 0 is measured before any update.
    pub val_loss: Vec<f64>,
    /// Epoch of the returned snapshot (0 = initial weights).
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub seconds: f64,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub predictor: Predictor,
    pub history: TrainHistory,
}

/// Trains `config.framework` on `train`, early-stopping on `val`.
pub fn train(
    config: &TrainConfig,
    pen: &Penalties,
    train: &Dataset,
    val: &Dataset,
) -> Result<TrainOutcome, LearnError> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let started = Instant::now();
    let scaler = FeatureScaler::fit(&train.features)?;
    let target = TargetScale::fit(&train.targets)?;
    let train_x: Vec<Vec<f64>> = train.features.iter().map(|x| scaler.transform(x)).collect();
    let val_x: Vec<Vec<f64>> = val.features.iter().map(|x| scaler.transform(x)).collect();

    let mut sizes = vec![scaler.mean.len()];
    sizes.extend(&config.hidden);
    sizes.push(config.framework.head_dim());
    let mut mlp = Mlp::new(&sizes, config.seed)?;
    let mut opt = Adam::new(mlp.n_params(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let train_obj = Objective {
        framework: config.framework,
        pen: *pen,
        target,
        inputs: &train_x,
        targets: &train.targets,
        curves: &train.curves,
    };
    let val_obj = Objective {
        inputs: &val_x,
        targets: &val.targets,
        curves: &val.curves,
        ..train_obj
    };
    let val_idx: Vec<usize> = (0..val.len()).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: vec![val_obj.loss(&mlp, &val_idx)?],
        best_epoch: 0,
        epochs_run: 0,
        seconds: 0.0,
    };
    let mut best = mlp.clone();
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (l, g) = train_obj.loss_and_grad(&mlp, batch)?;
            epoch_loss += l * batch.len() as f64;
            opt.step(mlp.params_mut(), &g);
        }
        history.train_loss.push(epoch_loss / train.len() as f64);
        history.epochs_run = epoch;
        if !mlp.is_finite() {
            break;
        }
        let v = val_obj.loss(&mlp, &val_idx)?;
        history.val_loss.push(v);
        if v < history.best_val_loss() {
            history.best_epoch = epoch;
            best = mlp.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    history.seconds = started.elapsed().as_secs_f64();
    Ok(TrainOutcome {
        predictor: Predictor {
            framework: config.framework,
            mlp: best,
            scaler,
            target,
        },
        history,
    })
}

pub fn train_mse(
    config: &TrainConfig,
    pen: &Penalties,
    train_set: &Dataset,
    val: &Dataset,
) -> Result<TrainOutcome, LearnError> {
    let config = TrainConfig {
        framework: Framework::Mse,
        ..config.clone()
    };
    train(&config, pen, train_set, val)
}

pub fn train_taskspecific(
    family: Family,
    config: &TrainConfig,
    pen: &Penalties,
    train_set: &Dataset,
    val: &Dataset,
) -> Result<TrainOutcome, LearnError> {
    let config = TrainConfig {
        framework: Framework::TaskSpecific { family },
        ..config.clone()
    };
    train(&config, pen, train_set, val)
}

pub fn train_modelfree(
    config: &TrainConfig,
    pen: &Penalties,
    train_set: &Dataset,
    val: &Dataset,
) -> Result<TrainOutcome, LearnError> {
    let config = TrainConfig {
        framework: Framework::ModelFree,
        ..config.clone()
    };
    train(&config, pen, train_set, val)
}
