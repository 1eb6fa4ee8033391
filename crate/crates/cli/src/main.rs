use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slicetuner_core::harness::{
    compare_estimation_modes, emit_plot_data, read_raw_csv, run_experiment, ComparisonReport, ExperimentConfig,
};
use slicetuner_core::{fit_power_law, read_points_csv, Error};

/// Selective per-slice data acquisition experiments.
#[derive(Parser)]
#[command(name = "slicetuner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method over seeded trials and write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a power-law curve to size,loss[,weight] rows.
    Fit {
        #[arg(long)]
        points: PathBuf,
        /// Also fit the asymptotic floor c.
        #[arg(long)]
        floor: bool,
    },
    /// Compare amortized and exhaustive curve estimation.
    CompareEstimation {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write long-format plot rows from a report directory.
    PlotData {
        #[arg(long)]
        report: PathBuf,
        /// Defaults to plot_data.csv inside the report directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Io { .. } | Error::Csv { .. } => 2,
        Error::Oracle(_) => 3,
        Error::InsufficientData { .. } | Error::DegenerateFit(_) | Error::InvalidProblem(_) | Error::Numerical(_) => 4,
    }
}

fn print_summary(report: &ComparisonReport) {
    println!(
        "{:<14} {:>9} {:>6} {:>16} {:>16} {:>16} {:>6}",
        "method", "budget", "ok", "loss", "avg_eer", "max_eer", "iters"
    );
    for s in &report.summaries {
        println!(
            "{:<14} {:>9} {:>6} {:>8.4} ± {:<5.4} {:>8.4} ± {:<5.4} {:>8.4} ± {:<5.4} {:>6.1}",
            s.method.as_str(),
            s.budget,
            format!("{}/{}", s.trials, s.trials + s.failures),
            s.loss_mean,
            s.loss_se,
            s.avg_eer_mean,
            s.avg_eer_se,
            s.max_eer_mean,
            s.max_eer_se,
            s.iterations_mean
        );
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out, trials, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.num_trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.output_dir = out;
            }
            let report = run_experiment(&cfg)?;
            print_summary(&report);
            if let Some(dir) = &cfg.output_dir {
                println!("wrote {}", dir.display());
            }
        }
        Command::Fit { points, floor } => {
            let pts = read_points_csv(&points)?;
            let fit = fit_power_law(&pts, floor)?;
            println!("a = {}", fit.curve.a);
            println!("b = {}", fit.curve.b);
            println!("c = {}", fit.curve.c);
            println!("converged = {}", fit.converged);
            println!("iterations = {}", fit.iterations);
            println!("residual_to_signal = {}", fit.residual_to_signal);
        }
        Command::CompareEstimation { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let cmp = compare_estimation_modes(&cfg)?;
            println!("{:<11} {:>9} {:>9} {:>9} {:>8} {:>8}", "mode", "q/estim", "queries", "wall_s", "loss", "avg_eer");
            for m in [&cmp.amortized, &cmp.exhaustive] {
                println!(
                    "{:<11} {:>9} {:>9} {:>9.3} {:>8.4} {:>8.4}",
                    format!("{:?}", m.mode).to_lowercase(),
                    m.queries_per_estimate,
                    m.total_queries,
                    m.wall_secs,
                    m.loss_mean,
                    m.avg_eer_mean
                );
            }
        }
        Command::PlotData { report, out } => {
            let parsed = read_raw_csv(&report)?;
            let dir =
                if report.is_dir() { report.clone() } else { report.parent().unwrap_or(Path::new(".")).to_path_buf() };
            let out = out.unwrap_or_else(|| dir.join("plot_data.csv"));
            emit_plot_data(&parsed, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLICETUNER_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
