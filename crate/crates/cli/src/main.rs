use std::path::PathBuf;
use std::process::ExitCode;

use altruist_cli::config::ENV_PREFIX;
use altruist_cli::{cmd_compare, cmd_estimate, cmd_metrics, cmd_simulate, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Displacement and strain estimation between two RF frames.
#[derive(Parser)]
#[command(name = "altruist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML file of config keys.
    #[arg(long, global = true, env = "ALTRUIST_CONFIG")]
    config: Option<PathBuf>,
    /// Solver mode: altruist or l2-baseline.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// ADMM iterations K.
    #[arg(long, global = true, allow_hyphen_values = true)]
    iterations: Option<String>,
    /// ADMM penalty, overrides the preset value.
    #[arg(long, global = true, allow_hyphen_values = true)]
    zeta: Option<String>,
    /// Strain differentiation kernel length.
    #[arg(long, global = true, allow_hyphen_values = true)]
    kernel: Option<String>,
    /// Parameter set, e.g. preset:layer.
    #[arg(long, global = true)]
    params: Option<String>,
    /// Largest integer lag searched by the seed.
    #[arg(long, global = true, allow_hyphen_values = true)]
    seed_max_lag: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// CNR histogram layout, e.g. 6x20.
    #[arg(long, global = true)]
    histogram: Option<String>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom and its ground truth.
    Simulate,
    /// Estimate displacement and strain from a frame pair.
    Estimate { pre: PathBuf, post: PathBuf },
    /// Compute quality metrics for a strain raster.
    Metrics {
        strain: PathBuf,
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run both solver modes over a kernel sweep and score them against truth.
    Compare {
        pre: PathBuf,
        post: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        windows: PathBuf,
    },
}

impl Common {
    fn flags(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut flags = Vec::new();
        for (key, value) in [
            ("mode", &self.mode),
            ("iterations", &self.iterations),
            ("zeta", &self.zeta),
            ("kernel", &self.kernel),
            ("params", &self.params),
            ("seed_max_lag", &self.seed_max_lag),
            ("out", &self.out),
            ("histogram", &self.histogram),
        ] {
            if let Some(v) = value {
                flags.push((key.to_string(), v.clone()));
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Invalid(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            flags.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(flags)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let env = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX));
    let cfg = RunConfig::resolve(cli.common.config.as_deref(), env, cli.common.flags()?)?;
    let manifest = match &cli.command {
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Estimate { pre, post } => cmd_estimate(&cfg, pre, post)?,
        Command::Metrics { strain, windows, truth } => {
            let m = cmd_metrics(&cfg, strain, truth.as_deref(), windows)?;
            if let Ok(text) = std::fs::read_to_string(cfg.out_dir().join("metrics.txt")) {
                print!("{text}");
            }
            m
        }
        Command::Compare { pre, post, truth, windows } => cmd_compare(&cfg, pre, post, truth, windows)?,
    };
    for path in &manifest.outputs {
        eprintln!("wrote {path}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
