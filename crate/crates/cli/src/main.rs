use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use edlab::commands::{self, Options};
use edlab::{ExperimentConfig, Infeasible};

#[derive(Parser)]
#[command(name = "edlab", version, about = "Decision-focused economic dispatch experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the breakpoint table of the dispatch cost curve as CSV.
    Curve(Common),
    /// Solve one stochastic dispatch and print the result as JSON.
    Dispatch(Common),
    /// Train every configured framework and save the models.
    Train(Common),
    /// Evaluate saved models on the test split.
    Eval(Common),
    /// Train and evaluate every framework for every seed.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-sample series for plotting.
    #[arg(long)]
    plot_csv: bool,
    /// System demand (MW) for `curve` and `dispatch`.
    #[arg(long)]
    demand: Option<f64>,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("EDLAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("EDLAB_THREADS={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let (Command::Curve(c) | Command::Dispatch(c) | Command::Train(c) | Command::Eval(c) | Command::Bench(c)) =
        &cli.command;
    let cfg = ExperimentConfig::load(&c.config)?;
    let opts = Options {
        seed: c.seed,
        out: c.out.clone(),
        plot_csv: c.plot_csv,
        demand: c.demand,
    };
    match cli.command {
        Command::Curve(_) => commands::curve(&cfg, &opts, &mut io::stdout().lock())?,
        Command::Dispatch(_) => {
            let result = commands::dispatch(&cfg, &opts)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Train(_) => print_summary(&commands::train(&cfg, &opts)?),
        Command::Eval(_) => print_summary(&commands::eval(&cfg, &opts)?),
        Command::Bench(_) => print_summary(&commands::bench(&cfg, &opts)?),
    }
    Ok(())
}

fn print_summary(report: &edlab::ExperimentReport) {
    println!("{:<28} {:>5} {:>14} {:>14}", "framework", "runs", "median mse", "median cost");
    for s in &report.summary {
        println!(
            "{:<28} {:>5} {:>14.6} {:>14.6}",
            s.framework, s.runs, s.median_mse, s.median_cost_loss
        );
    }
    for r in &report.robustness {
        println!(
            "true {} / hypothesis {} (seed {}): cost ratio {:.4}, mse ratio {:.4}",
            r.true_family, r.hypothesis, r.seed, r.cost_ratio, r.mse_ratio
        );
    }
    for e in &report.efficiency {
        println!(
            "{}: {:.3} ± {:.3} s over {} repeats",
            e.framework, e.mean_seconds, e.std_seconds, e.repeats
        );
    }
    println!("content hash {}", report.content_hash);
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Infeasible>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
