//! CLI entry point: resolves a config, runs one experiment, writes its CSV
//! artifact, prints per-point summaries, and (with `--assert`) gates the
//! exit code on the built-in checks.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use lapd_bench::config::{self, Resolved, EXPERIMENTS};
use lapd_bench::experiments::{self, ExperimentOutput};
use lapd_bench::template;

#[derive(Parser)]
#[command(
    name = "lapd-bench",
    version,
    about = "Benchmark harness for the prior-diffusion Langevin sampler"
)]
struct Cli {
    /// Config file: `key = value` lines under a single `[experiment]` header
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment name (gaussian-rate, dim-sweep, lipschitz-1d, sgld-batch,
    /// oracle-vs-sampler); optional when --config names it
    #[arg(long)]
    experiment: Option<String>,
    /// Override the `seed` tunable
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the `chains` tunable
    #[arg(long)]
    chains: Option<u64>,
    /// Exit nonzero if any built-in check fails
    #[arg(long)]
    assert: bool,
    /// Config override, repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the commented config template for --experiment and exit
    #[arg(long)]
    template: bool,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();

    if cli.template {
        let name = cli.experiment.as_deref().with_context(|| {
            format!("--template needs --experiment; valid names: {}", EXPERIMENTS.join(", "))
        })?;
        print!("{}", template::render(name)?);
        return Ok(ExitCode::SUCCESS);
    }

    if let Ok(raw) = std::env::var("SAMPLER_THREADS") {
        let threads: usize = raw
            .parse()
            .ok()
            .filter(|t| *t >= 1)
            .with_context(|| format!("SAMPLER_THREADS must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("worker pool is already initialized")?;
    }

    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            Some(config::parse_config_text(&text)?)
        }
        None => None,
    };
    let overrides = parse_overrides(&cli.overrides)?;
    let resolved =
        config::resolve(cli.experiment.as_deref(), file, &overrides, cli.seed, cli.chains)?;

    let output = experiments::run(&resolved)?;

    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
    let csv_path = cli.out.join(format!("{}.csv", resolved.experiment));
    write_csv(&csv_path, &resolved, &output)
        .with_context(|| format!("cannot write {}", csv_path.display()))?;

    for line in &output.summaries {
        println!("{line}");
    }
    println!("wrote {}", csv_path.display());

    let mut failed = 0usize;
    for check in &output.checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!("[{status}] {}: {}", check.name, check.detail);
        failed += usize::from(!check.pass);
    }
    if cli.assert && failed > 0 {
        eprintln!("{failed} check(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|item| {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("--override expects KEY=VALUE, got `{item}`"))?;
            let key = key.trim();
            if key.is_empty() {
                bail!("--override expects KEY=VALUE, got `{item}`");
            }
            Ok((key.to_string(), value.trim().to_string()))
        })
        .collect()
}

/// The CSV artifact: a self-describing comment line (code version plus the
/// full resolved config), the header row, then the data rows.
fn write_csv(path: &std::path::Path, resolved: &Resolved, output: &ExperimentOutput) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "# lapd-bench {} {}", env!("CARGO_PKG_VERSION"), resolved.render())?;
    writeln!(file, "{}", output.columns.join(","))?;
    for row in &output.rows {
        writeln!(file, "{}", row.join(","))?;
    }
    file.flush()?;
    Ok(())
}
