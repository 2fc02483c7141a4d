//! `vroom`: run, sweep and trace simple-regret experiments.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when an internal
//! invariant breaks, 1 for anything else (I/O).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use tracing_subscriber::EnvFilter;
use vroom_core::environments::NoiseLaw;
use vroom_core::harness::{
    emit_diagnostics, run_experiment, sweep, write_json, write_run_csv, write_sweep_csv, RunConfig,
};
use vroom_core::learners::{Algorithm, Probe};
use vroom_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "vroom",
    version,
    about = "Simple-regret experiments on hierarchical partitions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration for several seeded repetitions.
    Run(Shared),
    /// Run one configuration per budget and fit the log-log regret slope.
    Sweep {
        /// Comma-separated, strictly increasing budgets.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<u64>>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Write rank and pull traces of the optimal cells to a directory.
    Diag {
        /// Record every this many rounds.
        #[arg(long)]
        trace_every: Option<u64>,
        #[command(flatten)]
        shared: Shared,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Default)]
struct Shared {
    /// Flat TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    /// Environment, e.g. `sto:wedge`, `switch:wedge,const(0.3)` or `lure`.
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    fmax: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points per dimension for the supremum oracle.
    #[arg(long)]
    grid: Option<usize>,
    /// Monte Carlo draws of the recommendation per repetition.
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long, value_parser = ["uniform", "rademacher"])]
    noise: Option<String>,
    #[arg(long, value_parser = ["center", "sampled"])]
    probe: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Output file (directory for `diag`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    algo: Option<String>,
    env: Option<String>,
    n: Option<u64>,
    k: Option<u32>,
    dim: Option<usize>,
    b: Option<f64>,
    fmax: Option<f64>,
    delta: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    grid: Option<usize>,
    mc_samples: Option<usize>,
    noise: Option<NoiseLaw>,
    probe: Option<Probe>,
    nu: Option<f64>,
    rho: Option<f64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    n_list: Option<Vec<u64>>,
    trace_every: Option<u64>,
}

struct Resolved {
    run: RunConfig,
    out: Option<PathBuf>,
    format: Format,
    n_list: Option<Vec<u64>>,
}

fn config_error(key: &str, message: impl Into<String>) -> anyhow::Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
    .into()
}

fn read_file_config(path: &Path) -> anyhow::Result<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error("config", format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_error("config", e.to_string()))
}

fn parse_noise(s: &str) -> NoiseLaw {
    if s == "rademacher" {
        NoiseLaw::Rademacher
    } else {
        NoiseLaw::Uniform
    }
}

fn parse_probe(s: &str) -> Probe {
    if s == "sampled" {
        Probe::Sampled
    } else {
        Probe::Center
    }
}

fn resolve(shared: Shared) -> anyhow::Result<Resolved> {
    let file = match &shared.config {
        Some(path) => read_file_config(path)?,
        None => FileConfig::default(),
    };
    let mut run = RunConfig::default();
    if let Some(algo) = shared.algo.or(file.algo) {
        run.algo = algo.parse::<Algorithm>()?;
    }
    macro_rules! merge {
        ($($field:ident),*) => {
            $(if let Some(v) = shared.$field.or(file.$field) {
                run.$field = v;
            })*
        };
    }
    merge!(env, n, k, dim, b, reps, seed, grid, mc_samples);
    run.fmax = shared.fmax.or(file.fmax);
    run.delta = shared.delta.or(file.delta);
    run.nu = shared.nu.or(file.nu);
    run.rho = shared.rho.or(file.rho);
    if let Some(noise) = shared.noise.as_deref().map(parse_noise).or(file.noise) {
        run.noise = noise;
    }
    if let Some(probe) = shared.probe.as_deref().map(parse_probe).or(file.probe) {
        run.probe = probe;
    }
    if let Some(every) = file.trace_every {
        run.trace_every = every;
    }
    Ok(Resolved {
        run,
        out: shared.out.or(file.out),
        format: shared.format.or(file.format).unwrap_or(Format::Csv),
        n_list: file.n_list,
    })
}

fn with_output(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> vroom_core::Result<()>,
) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut file = io::BufWriter::new(
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            write(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(shared) => {
            let r = resolve(shared)?;
            let record = run_experiment(&r.run)?;
            eprintln!(
                "{} on {} at n = {}: mean regret {:.6} over {} repetitions",
                record.algorithm,
                record.env,
                record.n,
                record.mean_regret,
                record.repetitions.len()
            );
            with_output(r.out.as_deref(), |w| match r.format {
                Format::Csv => write_run_csv(&record, w),
                Format::Json => write_json(&record, w),
            })
        }
        Command::Sweep { n_list, shared } => {
            let r = resolve(shared)?;
            let n_list = n_list
                .or(r.n_list)
                .ok_or_else(|| config_error("n-list", "sweep needs --n-list"))?;
            let table = sweep(&r.run, &n_list)?;
            for (n, m) in table.mean_regrets() {
                eprintln!("n = {n}: mean regret {m:.6}");
            }
            match table.slope {
                Some(s) => eprintln!("log-log slope {s:.4}"),
                None => eprintln!("log-log slope undefined"),
            }
            with_output(r.out.as_deref(), |w| match r.format {
                Format::Csv => write_sweep_csv(&table, w),
                Format::Json => write_json(&table, w),
            })
        }
        Command::Diag {
            trace_every,
            shared,
        } => {
            let mut r = resolve(shared)?;
            r.run.trace = true;
            if let Some(every) = trace_every {
                r.run.trace_every = every;
            }
            let dir = r
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("diagnostics"));
            let record = run_experiment(&r.run)?;
            if emit_diagnostics(&record, &dir)? {
                with_output(Some(&dir.join("run.json")), |w| write_json(&record, w))?;
                eprintln!("diagnostics written to {}", dir.display());
            } else {
                eprintln!(
                    "warning: optimum unknown for {}, diagnostics skipped",
                    record.env
                );
            }
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::InvalidArgument(_)) => 2,
        Some(Error::Invariant(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("VROOM_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(exit_code(&config_error("n", "bad")), 2);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into()).into()), 2);
        assert_eq!(exit_code(&Error::Invariant("broken".into()).into()), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }
}
