//! Entry points behind each subcommand.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use edlab_core::kernel::{optimal_dispatch, DispatchResult};
use edlab_core::learn::{evaluate, Predictor};

use crate::bench::{self, BenchOptions};
use crate::config::ExperimentConfig;
use crate::experiment::{curve_at, mean_training_load, prepare, run_framework, write_plot_csv};
use crate::report::{ExperimentReport, REPORT_FILE};

pub struct Options {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub plot_csv: bool,
    pub demand: Option<f64>,
}

fn out_dir(cfg: &ExperimentConfig, opts: &Options) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| cfg.out_dir.clone())
}

fn apply_seed(cfg: &mut ExperimentConfig, opts: &Options) {
    if let Some(seed) = opts.seed {
        cfg.train.seed = seed;
        cfg.seeds = vec![seed];
    }
}

/// Demand used by `curve` and `dispatch`: flag, then config, then the mean
/// training load.
fn demand(cfg: &ExperimentConfig, opts: &Options) -> Result<f64> {
    if let Some(d) = opts.demand.or(cfg.curve_demand) {
        return Ok(d);
    }
    let series = cfg.series()?;
    let split = edlab_core::data::make_samples(&series, cfg.split)?;
    Ok(mean_training_load(&split.train))
}

/// Writes the breakpoint table to `sink` and, with `--out`, to `curve.csv`.
pub fn curve(cfg: &ExperimentConfig, opts: &Options, sink: &mut dyn Write) -> Result<()> {
    let net = cfg.network()?;
    let d = demand(cfg, opts)?;
    let curve = curve_at(&net, d)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    sink.write_all(&buf)?;
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("curve.csv"), &buf)?;
    }
    Ok(())
}

pub fn dispatch(cfg: &ExperimentConfig, opts: &Options) -> Result<DispatchResult> {
    let Some(spec) = &cfg.dispatch else {
        bail!("config has no `dispatch` section with a demand distribution");
    };
    let net = cfg.network()?;
    let d = match opts.demand.or(cfg.curve_demand) {
        Some(d) => d,
        None => spec.distribution.mean(),
    };
    let curve = curve_at(&net, d)?;
    Ok(optimal_dispatch(&curve, &spec.distribution, &cfg.penalties)?)
}

fn model_path(dir: &Path, label: &str) -> PathBuf {
    dir.join("models").join(format!("{label}.json"))
}

/// Trains every framework, saves model files and a validation report.
pub fn train(cfg: &ExperimentConfig, opts: &Options) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    apply_seed(&mut cfg, opts);
    let out = out_dir(&cfg, opts);
    let prep = prepare(&cfg)?;
    let mut report = ExperimentReport::new("train", &cfg);
    let seed = cfg.train.seed;
    fs::create_dir_all(out.join("models"))?;
    for &fw in &cfg.frameworks {
        let run = match run_framework(&cfg, &prep, fw, seed, &prep.val) {
            Ok(r) => r,
            Err(e) => {
                report.write(&out.join("train"))?;
                return Err(e.context("partial train report written"));
            }
        };
        run.predictor.save(model_path(&out, &fw.label()))?;
        report.runs.push(run.record);
        report.write(&out.join("train"))?;
    }
    report.complete = true;
    report.write(&out.join("train"))?;
    Ok(report)
}

/// Evaluates saved models on the test split.
pub fn eval(cfg: &ExperimentConfig, opts: &Options) -> Result<ExperimentReport> {
    let out = out_dir(cfg, opts);
    let prep = prepare(cfg)?;
    let trained = ExperimentReport::read(out.join("train").join(REPORT_FILE)).ok();
    let mut report = ExperimentReport::new("eval", cfg);
    for &fw in &cfg.frameworks {
        let label = fw.label();
        let path = model_path(&out, &label);
        let predictor = Predictor::load(&path)
            .with_context(|| format!("cannot load model {}; run `train` first", path.display()))?;
        if predictor.framework != fw {
            bail!("model {} was trained for {}", path.display(), predictor.framework.label());
        }
        let evaluation = evaluate(&predictor, &prep.test, &cfg.penalties)?;
        if opts.plot_csv {
            fs::create_dir_all(out.join("eval"))?;
            write_plot_csv(&out.join("eval").join(format!("series_{label}.csv")), &prep.test_samples, &evaluation)?;
        }
        let mut record = crate::report::RunRecord {
            seed: cfg.train.seed,
            framework: label.clone(),
            test: evaluation.metrics,
            train_seconds: 0.0,
            epochs_run: 0,
            best_epoch: 0,
            best_val_loss: 0.0,
        };
        if let Some(t) = trained.as_ref().and_then(|t| t.runs.iter().find(|r| r.framework == label)) {
            record.seed = t.seed;
            record.train_seconds = t.train_seconds;
            record.epochs_run = t.epochs_run;
            record.best_epoch = t.best_epoch;
            record.best_val_loss = t.best_val_loss;
        }
        report.runs.push(record);
    }
    report.complete = true;
    report.write(&out.join("eval"))?;
    Ok(report)
}

pub fn bench(cfg: &ExperimentConfig, opts: &Options) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    apply_seed(&mut cfg, opts);
    let out = out_dir(&cfg, opts).join("bench");
    fs::create_dir_all(&out)?;
    bench::run(
        &cfg,
        &BenchOptions {
            out: &out,
            plot_csv: opts.plot_csv,
        },
    )
}
