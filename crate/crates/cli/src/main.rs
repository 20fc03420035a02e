use std::path::PathBuf;
use std::process::ExitCode;

use autonomize::harness::{self, ExperimentConfig, MethodKind, Overrides};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "autonomize", version, about = "Run clock-dilation experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV and JSON outputs.
    Run {
        config: PathBuf,
        /// Replace the width list with a single ω.
        #[arg(long)]
        omega: Option<f64>,
        /// Full sizes (N_s = N_η = 128, N_u = 64) with Krylov propagation.
        #[arg(long)]
        full: bool,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Directory for the output files; defaults to the paths in the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Check { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Dense,
    Krylov,
}

impl From<MethodArg> for MethodKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => MethodKind::Auto,
            MethodArg::Dense => MethodKind::Dense,
            MethodArg::Krylov => MethodKind::Krylov,
        }
    }
}

fn run(cli: Cli) -> autonomize::Result<bool> {
    match cli.command {
        Command::Check { config } => {
            ExperimentConfig::load(&config)?;
            println!("{}: ok", config.display());
            Ok(true)
        }
        Command::Run {
            config,
            omega,
            full,
            method,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides {
                omega,
                full,
                method: method.map(Into::into),
            })?;
            let report = harness::run(&cfg)?;
            for path in harness::write_outputs(&report, &cfg, out_dir.as_deref())? {
                println!("wrote {}", path.display());
            }
            for note in &report.notes {
                println!("note: {note}");
            }
            for a in &report.assertions {
                println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
