//! Experiment configuration files.
//!
//! Relative paths inside a config are resolved against the directory that
//! holds the config file. A network may also be given as `builtin:four_bus`
//! or `builtin:ieee39`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use edlab_core::data::{self, LoadSeries, SplitSpec, SynthSpec};
use edlab_core::dist::{DemandDistribution, Family, Penalties};
use edlab_core::grid::{builtin, Network};
use edlab_core::learn::{Framework, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        allow_gaps: bool,
    },
    Synth(SynthSpec),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    /// One curve built at the mean training load.
    #[default]
    FixedMean,
    /// One curve per sample, built at the most recent observed load.
    PerSlot,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BenchMode {
    #[default]
    Standard,
    /// Each true family generates its own synthetic data; every hypothesis
    /// family is compared with the model-free benchmark on it.
    Robustness {
        true_families: Vec<DemandDistribution>,
        hypotheses: Vec<Family>,
    },
    /// Every framework is trained `repeats` times to measure wall-clock.
    Efficiency { repeats: usize },
}

/// Inputs for the `dispatch` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSpec {
    pub distribution: DemandDistribution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub network: String,
    pub data: DataSource,
    pub split: SplitSpec,
    pub penalties: Penalties,
    pub frameworks: Vec<Framework>,
    /// Training hyperparameters; the framework field is ignored.
    #[serde(default)]
    pub train: TrainConfig,
    /// Training seeds for `bench`; empty means `[train.seed]`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub curve_mode: CurveMode,
    /// Require γ1 above every generator's marginal cost.
    #[serde(default)]
    pub enforce_penalty_regime: bool,
    /// Adds a row that dispatches the realized demand.
    #[serde(default)]
    pub include_oracle: bool,
    #[serde(default)]
    pub bench: BenchMode,
    /// System demand (MW) at which `curve` and `dispatch` build the curve.
    #[serde(default)]
    pub curve_demand: Option<f64>,
    #[serde(default)]
    pub dispatch: Option<DispatchSpec>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads, resolves and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        if !self.network.starts_with("builtin:") {
            self.network = join(Path::new(&self.network)).to_string_lossy().into_owned();
        }
        if let DataSource::Csv { path, .. } = &mut self.data {
            *path = join(path);
        }
        self.out_dir = join(&self.out_dir);
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.frameworks.is_empty(), "config lists no frameworks");
        Penalties::new(self.penalties.gamma1, self.penalties.gamma2)
            .context("penalties must be finite and positive")?;
        self.train.validate().context("invalid train section")?;
        if !self.network.starts_with("builtin:") {
            ensure!(Path::new(&self.network).is_file(), "network file {} does not exist", self.network);
        }
        if let DataSource::Csv { path, .. } = &self.data {
            ensure!(path.is_file(), "data file {} does not exist", path.display());
        }
        if let BenchMode::Robustness { true_families, hypotheses } = &self.bench {
            ensure!(
                matches!(self.data, DataSource::Synth(_)),
                "robustness mode needs a synthetic data source"
            );
            ensure!(!true_families.is_empty() && !hypotheses.is_empty(), "robustness mode needs families");
            ensure!(
                true_families.iter().all(|f| f.family().is_some()),
                "robustness true families must be normal, uniform or bounded_pareto"
            );
        }
        if let BenchMode::Efficiency { repeats } = self.bench {
            ensure!(repeats > 0, "efficiency mode needs at least one repeat");
        }
        if self.enforce_penalty_regime {
            let net = self.network()?;
            let top = net.max_marginal_cost();
            ensure!(
                self.penalties.gamma1 > top,
                "gamma1 = {} must exceed the largest marginal cost {top}",
                self.penalties.gamma1
            );
        }
        Ok(())
    }

    pub fn network(&self) -> Result<Network> {
        let net = match self.network.as_str() {
            "builtin:four_bus" => builtin::four_bus()?,
            "builtin:ieee39" => builtin::ieee39()?,
            other if other.starts_with("builtin:") => bail!("unknown builtin network {other}"),
            path => Network::from_file(path).with_context(|| format!("cannot load network {path}"))?,
        };
        Ok(net)
    }

    pub fn series(&self) -> Result<LoadSeries> {
        match &self.data {
            DataSource::Csv { path, allow_gaps } => data::load_csv_with(path, *allow_gaps)
                .with_context(|| format!("cannot load {}", path.display())),
            DataSource::Synth(spec) => Ok(data::synth(spec)?),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn train_config(&self, framework: Framework, seed: u64) -> TrainConfig {
        TrainConfig {
            framework,
            seed,
            ..self.train.clone()
        }
    }

    /// Same experiment with the synthetic family swapped out.
    pub fn with_true_family(&self, family: &DemandDistribution) -> Result<Self> {
        let DataSource::Synth(spec) = &self.data else {
            bail!("only synthetic data sources can change family");
        };
        Ok(Self {
            data: DataSource::Synth(SynthSpec {
                family: family.clone(),
                ..spec.clone()
            }),
            ..self.clone()
        })
    }
}
