//! `sim`: run, sweep, report on, and compare mesh-flooding scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use meshsim_core::harness::{
    comparison_table, load_config, load_report, resolve_config, run_scenario, write_cdfs,
    Assertion, RunMetrics,
};
use meshsim_core::metrics::MetricsReport;

#[derive(Parser)]
#[command(
    name = "sim",
    about = "Deterministic simulator of BLE-mesh managed flooding",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its outputs.
    Run(RunArgs),
    /// Run one scenario across a range of seeds.
    Sweep(SweepArgs),
    /// Aggregate the outputs in a run directory and emit latency CDFs.
    Report(ReportArgs),
    /// Compare two run directories, optionally asserting orderings.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Inclusive seed range, e.g. 1..5.
    #[arg(long)]
    seeds: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A run directory, or a sweep directory containing seed_* runs.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Ordering assertion like "a.mean_rtt <= 0.6*b.mean_rtt"; repeatable.
    #[arg(long = "assert")]
    assertions: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_once(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut raw = load_config(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(seed) = seed {
        raw.master_seed = Some(seed);
    }
    let cfg = resolve_config(&raw)?;
    let output = run_scenario(&cfg)?;
    output
        .write_to(out)
        .with_context(|| format!("writing outputs to {}", out.display()))?;
    print!("{}", output.summary);
    println!("outputs: {}", out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    run_once(&args.config, args.seed, &args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_seed_range(text: &str) -> Result<(u64, u64)> {
    let (a, b) = text
        .split_once("..")
        .with_context(|| format!("--seeds expects a..b (inclusive), got '{text}'"))?;
    let a: u64 = a.trim().parse().context("bad start seed")?;
    let b: u64 = b.trim().parse().context("bad end seed")?;
    if b < a {
        bail!("--seeds range is empty: {a}..{b}");
    }
    Ok((a, b))
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let (first, last) = parse_seed_range(&args.seeds)?;
    for seed in first..=last {
        let dir = args.out.join(format!("seed_{seed}"));
        run_once(&args.config, Some(seed), &dir)?;
    }
    println!("swept seeds {first}..={last} into {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Collect run directories: the directory itself, or its seed_* children.
fn run_dirs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.join("messages.csv").is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|path| path.join("messages.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no run outputs under {}", input.display());
    }
    Ok(dirs)
}

fn merged_report(input: &Path) -> Result<MetricsReport> {
    let mut merged = MetricsReport::default();
    for dir in run_dirs(input)? {
        let report = load_report(&dir)?;
        merged.rows.extend(report.rows);
        merged.rssi.extend(report.rssi);
    }
    Ok(merged)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    let report = merged_report(&args.input)?;
    let agg = report.aggregates();
    match agg.pdr {
        Some(pdr) => println!("pdr: {:.4} ({} / {})", pdr, agg.delivered, agg.expected),
        None => println!("pdr: (no command messages)"),
    }
    let show = |name: &str, stats: Option<meshsim_core::metrics::Stats>| match stats {
        Some(s) => println!(
            "{name}: n={} mean={:.2}ms median={:.2}ms p95={:.2}ms",
            s.count,
            s.mean() / 1_000.0,
            s.median as f64 / 1_000.0,
            s.p95 as f64 / 1_000.0
        ),
        None => println!("{name}: (empty)"),
    };
    show("rtt", agg.rtt);
    show("one_way", agg.one_way);
    if let Some(rssi) = agg.mean_rssi_dbm {
        println!("mean_rssi_dbm: {rssi:.2}");
    }
    let written = write_cdfs(&report, &args.input)?;
    for name in written {
        println!("wrote {}", args.input.join(name).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let report_a = merged_report(&args.a)?;
    let report_b = merged_report(&args.b)?;
    let metrics_a = RunMetrics::from_report(&report_a);
    let metrics_b = RunMetrics::from_report(&report_b);
    print!("{}", comparison_table(&metrics_a, &metrics_b));
    let mut all_hold = true;
    for text in &args.assertions {
        let assertion = Assertion::parse(text)?;
        let holds = assertion.evaluate(&metrics_a, &metrics_b)?;
        println!(
            "assert {}: {}",
            assertion.source(),
            if holds { "PASS" } else { "FAIL" }
        );
        all_hold &= holds;
    }
    if all_hold {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}
