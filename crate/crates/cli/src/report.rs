//! Versioned experiment reports: JSON document plus CSV tables.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use edlab_core::learn::{Metrics, PERIODS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

/// One trained framework evaluated on the test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub framework: String,
    pub test: Metrics,
    /// Wall-clock training time; excluded from the content hash.
    pub train_seconds: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameworkSummary {
    pub framework: String,
    pub runs: usize,
    pub median_mse: f64,
    pub median_cost_loss: f64,
    pub mean_cost_loss: f64,
    pub std_cost_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub true_family: String,
    pub hypothesis: String,
    pub seed: u64,
    pub cost_loss: f64,
    pub mse: f64,
    pub benchmark_cost_loss: f64,
    pub benchmark_mse: f64,
    /// Hypothesis cost loss over model-free cost loss.
    pub cost_ratio: f64,
    pub mse_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub framework: String,
    pub repeats: usize,
    pub seconds: Vec<f64>,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub mean_epochs: f64,
    pub seconds_per_epoch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub command: String,
    /// False while frameworks are still running or after a failure.
    pub complete: bool,
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<FrameworkSummary>,
    #[serde(default)]
    pub robustness: Vec<RobustnessRow>,
    #[serde(default)]
    pub efficiency: Vec<EfficiencyRow>,
    /// sha256 of the report with wall-clock fields and output paths blanked.
    pub content_hash: String,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ExperimentReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            complete: false,
            config: config.clone(),
            runs: Vec::new(),
            summary: Vec::new(),
            robustness: Vec::new(),
            efficiency: Vec::new(),
            content_hash: String::new(),
        }
    }

    /// Median and spread of each framework's runs, in first-seen order.
    pub fn summarize(&mut self) {
        let mut names: Vec<String> = Vec::new();
        for r in &self.runs {
            if !names.contains(&r.framework) {
                names.push(r.framework.clone());
            }
        }
        self.summary = names
            .into_iter()
            .map(|name| {
                let runs: Vec<&RunRecord> = self.runs.iter().filter(|r| r.framework == name).collect();
                let mut mse: Vec<f64> = runs.iter().map(|r| r.test.mse).collect();
                let mut cost: Vec<f64> = runs.iter().map(|r| r.test.cost_loss).collect();
                let (mean, std) = mean_std(&cost);
                FrameworkSummary {
                    framework: name,
                    runs: runs.len(),
                    median_mse: median(&mut mse),
                    median_cost_loss: median(&mut cost),
                    mean_cost_loss: mean,
                    std_cost_loss: std,
                }
            })
            .collect();
    }

    pub fn compute_hash(&self) -> String {
        let mut copy = self.clone();
        copy.content_hash.clear();
        copy.config.out_dir = PathBuf::new();
        for r in &mut copy.runs {
            r.train_seconds = 0.0;
        }
        for e in &mut copy.efficiency {
            e.seconds.iter_mut().for_each(|s| *s = 0.0);
            e.mean_seconds = 0.0;
            e.std_seconds = 0.0;
            e.seconds_per_epoch = 0.0;
        }
        let bytes = serde_json::to_vec(&copy).expect("report serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Recomputes the summary and hash and writes every table into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.summarize();
        self.content_hash = self.compute_hash();
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let json = serde_json::to_string_pretty(self)?;
        fs::write(dir.join(REPORT_FILE), json)?;
        self.write_runs_csv(&dir.join("runs.csv"))?;
        self.write_summary_csv(&dir.join("summary.csv"))?;
        if !self.robustness.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("robustness.csv"))?;
            for r in &self.robustness {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        if !self.efficiency.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("efficiency.csv"))?;
            w.write_record([
                "framework",
                "repeats",
                "mean_seconds",
                "std_seconds",
                "mean_epochs",
                "seconds_per_epoch",
            ])?;
            for e in &self.efficiency {
                w.write_record([
                    e.framework.clone(),
                    e.repeats.to_string(),
                    e.mean_seconds.to_string(),
                    e.std_seconds.to_string(),
                    e.mean_epochs.to_string(),
                    e.seconds_per_epoch.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Ok(())
    }

    fn write_runs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        let mut header: Vec<String> = ["seed", "framework", "count", "mse", "cost_loss", "cost_std"]
            .map(String::from)
            .to_vec();
        for (a, b) in PERIODS {
            header.push(format!("mse_{a:02}_{b:02}"));
            header.push(format!("cost_loss_{a:02}_{b:02}"));
            header.push(format!("cost_std_{a:02}_{b:02}"));
        }
        header.extend(["train_seconds", "epochs_run", "best_epoch"].map(String::from));
        w.write_record(&header)?;
        for r in &self.runs {
            let m = &r.test;
            let mut row = vec![
                r.seed.to_string(),
                r.framework.clone(),
                m.count.to_string(),
                m.mse.to_string(),
                m.cost_loss.to_string(),
                m.cost_std.to_string(),
            ];
            for p in &m.periods {
                row.extend([p.mse.to_string(), p.cost_loss.to_string(), p.cost_std.to_string()]);
            }
            row.extend([r.train_seconds.to_string(), r.epochs_run.to_string(), r.best_epoch.to_string()]);
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        for s in &self.summary {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let report: ExperimentReport = serde_json::from_str(&text)?;
        ensure!(
            report.schema_version == SCHEMA_VERSION,
            "report schema {} is not supported (expected {SCHEMA_VERSION})",
            report.schema_version
        );
        Ok(report)
    }

    pub fn summary_for(&self, framework: &str) -> Option<&FrameworkSummary> {
        self.summary.iter().find(|s| s.framework == framework)
    }
}
