use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nmlsdr::data::{generate_synthetic, write_bundle};
use nmlsdr::harness::{count_best, run_grid, wilcoxon_matrix, write_outputs, ResultsTable, RunConfig, ALPHA_LEVEL};
use nmlsdr::metrics::Metric;
use nmlsdr::Result;

#[derive(Parser)]
#[command(name = "nmlsdr", version, about = "Semi-supervised dimensionality reduction for noisy multi-label data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid from a JSON or TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (results.csv, summary.json, embedding dumps).
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Write the synthetic dataset as a bundle directory.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-dataset means and best counts of one metric.
    Eval {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "ap")]
        metric: String,
    },
    /// Pairwise Wilcoxon totals per metric.
    Compare {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = ALPHA_LEVEL)]
        alpha: f64,
    },
}

fn run(config: &Path, out: &Path) -> Result<()> {
    let run = RunConfig::from_path(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let grid = run_grid(&run, base)?;
    write_outputs(out, &run, &grid)?;
    println!("wrote {} result rows to {}", grid.table.len(), out.display());
    Ok(())
}

fn eval(table: &Path, metric: &str) -> Result<()> {
    let metric: Metric = metric.parse()?;
    let table = ResultsTable::read_csv(table)?;
    let means = table.cell_means(metric)?;
    println!("method,{}", means.datasets.join(","));
    for (m, vals) in means.methods.iter().zip(&means.values) {
        let cells: Vec<String> = vals.iter().map(|v| format!("{v:.4}")).collect();
        println!("{m},{}", cells.join(","));
    }
    let best: Vec<String> = count_best(&table, metric)?.into_iter().map(|(m, c)| format!("{m}={c}")).collect();
    println!("# best values: {}", best.join(" "));
    Ok(())
}

fn compare(table: &Path, alpha: f64) -> Result<()> {
    let table = ResultsTable::read_csv(table)?;
    let methods = table.methods();
    println!("metric,{}", methods.join(","));
    let mut mean = vec![0.0; methods.len()];
    for metric in Metric::ALL {
        let totals = wilcoxon_matrix(&table, metric, alpha)?;
        for (acc, (_, t)) in mean.iter_mut().zip(&totals) {
            *acc += t / Metric::ALL.len() as f64;
        }
        let cells: Vec<String> = totals.iter().map(|(_, t)| format!("{t:.1}")).collect();
        println!("{metric},{}", cells.join(","));
    }
    let cells: Vec<String> = mean.iter().map(|t| format!("{t:.2}")).collect();
    println!("mean,{}", cells.join(","));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Synth { seed, out } => {
            let (train, test) = generate_synthetic(*seed);
            write_bundle(out, &[&train, &test], Some(*seed), "synthetic").map(|_| ())
        }
        Command::Eval { table, metric } => eval(table, metric),
        Command::Compare { table, alpha } => compare(table, *alpha),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
