//! Benchmark modes: standard comparison, robustness sweep, efficiency.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use edlab_core::learn::Framework;

use crate::config::{BenchMode, ExperimentConfig};
use crate::experiment::{oracle_run, prepare, run_framework, write_plot_csv};
use crate::report::{mean_std, EfficiencyRow, ExperimentReport, RobustnessRow};

pub struct BenchOptions<'a> {
    pub out: &'a Path,
    pub plot_csv: bool,
}

/// Runs the configured bench mode. The report is rewritten after every
/// framework, so a failure leaves the finished runs on disk.
pub fn run(cfg: &ExperimentConfig, opts: &BenchOptions) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("bench", cfg);
    let outcome = match &cfg.bench {
        BenchMode::Standard => standard(cfg, opts, &mut report),
        BenchMode::Robustness { true_families, hypotheses } => {
            robustness(cfg, opts, true_families, hypotheses, &mut report)
        }
        BenchMode::Efficiency { repeats } => efficiency(cfg, opts, *repeats, &mut report),
    };
    match outcome {
        Ok(()) => {
            report.complete = true;
            report.write(opts.out)?;
            Ok(report)
        }
        Err(e) => {
            report.complete = false;
            report.write(opts.out)?;
            Err(e.context(format!("partial report written to {}", opts.out.display())))
        }
    }
}

fn standard(cfg: &ExperimentConfig, opts: &BenchOptions, report: &mut ExperimentReport) -> Result<()> {
    let prep = prepare(cfg)?;
    if cfg.include_oracle {
        let (record, eval) = oracle_run(cfg, &prep.test)?;
        if opts.plot_csv {
            write_plot_csv(&opts.out.join("series_oracle.csv"), &prep.test_samples, &eval)?;
        }
        report.runs.push(record);
    }
    for seed in cfg.seeds() {
        for &fw in &cfg.frameworks {
            let run = run_framework(cfg, &prep, fw, seed, &prep.test)?;
            if opts.plot_csv {
                let name = format!("series_{}_seed{seed}.csv", fw.label());
                write_plot_csv(&opts.out.join(name), &prep.test_samples, &run.evaluation)?;
            }
            report.runs.push(run.record);
            report.write(opts.out)?;
        }
    }
    Ok(())
}

fn robustness(
    cfg: &ExperimentConfig,
    opts: &BenchOptions,
    true_families: &[edlab_core::dist::DemandDistribution],
    hypotheses: &[edlab_core::dist::Family],
    report: &mut ExperimentReport,
) -> Result<()> {
    for truth in true_families {
        let name = truth.family().map(|f| f.name()).unwrap_or("empirical");
        let sub = cfg.with_true_family(truth)?;
        let prep = prepare(&sub).with_context(|| format!("cannot prepare {name} data"))?;
        for seed in cfg.seeds() {
            let bench = run_framework(&sub, &prep, Framework::ModelFree, seed, &prep.test)?;
            let (b_cost, b_mse) = (bench.record.test.cost_loss, bench.record.test.mse);
            let mut record = bench.record;
            record.framework = format!("{name}/{}", record.framework);
            report.runs.push(record);
            report.write(opts.out)?;
            for &family in hypotheses {
                let run = run_framework(&sub, &prep, Framework::TaskSpecific { family }, seed, &prep.test)?;
                let (cost, mse) = (run.record.test.cost_loss, run.record.test.mse);
                report.robustness.push(RobustnessRow {
                    true_family: name.into(),
                    hypothesis: family.name().into(),
                    seed,
                    cost_loss: cost,
                    mse,
                    benchmark_cost_loss: b_cost,
                    benchmark_mse: b_mse,
                    cost_ratio: cost / b_cost,
                    mse_ratio: mse / b_mse,
                });
                let mut record = run.record;
                record.framework = format!("{name}/{}", record.framework);
                report.runs.push(record);
                report.write(opts.out)?;
            }
        }
    }
    Ok(())
}

fn efficiency(
    cfg: &ExperimentConfig,
    opts: &BenchOptions,
    repeats: usize,
    report: &mut ExperimentReport,
) -> Result<()> {
    let prep = prepare(cfg)?;
    let seed = cfg.seeds()[0];
    for &fw in &cfg.frameworks {
        let mut seconds = Vec::with_capacity(repeats);
        let mut epochs = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let started = Instant::now();
            let run = run_framework(cfg, &prep, fw, seed, &prep.test)?;
            seconds.push(started.elapsed().as_secs_f64());
            epochs.push(run.record.epochs_run as f64);
            if r == 0 {
                report.runs.push(run.record);
            }
        }
        let (mean_seconds, std_seconds) = mean_std(&seconds);
        let mean_epochs = mean_std(&epochs).0;
        report.efficiency.push(EfficiencyRow {
            framework: fw.label(),
            repeats,
            seconds,
            mean_seconds,
            std_seconds,
            mean_epochs,
            seconds_per_epoch: mean_seconds / mean_epochs.max(1.0),
        });
        report.write(opts.out)?;
    }
    Ok(())
}
