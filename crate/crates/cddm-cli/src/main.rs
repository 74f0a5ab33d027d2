//! `cddm`: run seeded waveform experiments from config files.
//!
//! Exit codes: 0 on success, 2 on configuration problems (including CLI
//! misuse), 3 on runtime failures.

use cddm_core::harness::{
    self, load_config, run_ber, run_nmse, run_psd, write_metrics_csv, ExperimentConfig,
    MetricRecord,
};
use cddm_core::CddmError;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cddm", version, about = "Delay-Doppler chirp modem simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the trial count per point.
    #[arg(long)]
    trials: Option<u64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bit error rate sweep.
    Ber(RunArgs),
    /// Channel estimation NMSE sweep.
    Nmse(RunArgs),
    /// Power spectral density export (shaped + unshaped reference).
    Psd(RunArgs),
    /// Check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Dump the nonzero DD positions of every chirp as `i m n` lines.
    DumpBasis {
        #[arg(long)]
        config: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_with_overrides(args: &RunArgs) -> Result<ExperimentConfig, CddmError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_records(records: &[MetricRecord], quiet: bool) {
    if quiet {
        return;
    }
    for r in records {
        let nmse = r
            .nmse
            .map(|v| format!("{v:.3e}"))
            .unwrap_or_else(|| "-".into());
        eprintln!(
            "{} @ {:>6.2} dB: ber={:.4e} (se {:.1e})  nmse={}  fail={:.3}",
            r.experiment, r.ebn0_db, r.ber, r.ber_se, nmse, r.fail_rate
        );
    }
}

fn run(cli: Cli) -> Result<(), (u8, CddmError)> {
    let config_err = |e: CddmError| (2u8, e);
    let runtime_err = |e: CddmError| (3u8, e);
    match cli.command {
        Command::Ber(args) => {
            let cfg = load_with_overrides(&args).map_err(config_err)?;
            let recs = run_ber(&cfg).map_err(runtime_err)?;
            print_records(&recs, args.quiet);
            if cfg.out.is_none() && !args.quiet {
                print!("{}", write_metrics_csv(&recs));
            }
            Ok(())
        }
        Command::Nmse(args) => {
            let cfg = load_with_overrides(&args).map_err(config_err)?;
            let recs = run_nmse(&cfg).map_err(runtime_err)?;
            print_records(&recs, args.quiet);
            if cfg.out.is_none() && !args.quiet {
                print!("{}", write_metrics_csv(&recs));
            }
            Ok(())
        }
        Command::Psd(args) => {
            let cfg = load_with_overrides(&args).map_err(config_err)?;
            let (shaped, _) = run_psd(&cfg).map_err(runtime_err)?;
            if cfg.out.is_none() && !args.quiet {
                print!("{}", harness::psd_csv(&shaped));
            }
            Ok(())
        }
        Command::Validate { config } => {
            load_config(&config).map_err(config_err)?;
            println!("ok");
            Ok(())
        }
        Command::DumpBasis { config, out } => {
            let cfg = load_config(&config).map_err(config_err)?;
            let basis = cfg.basis();
            let mut buf = Vec::new();
            basis.dump_positions(&mut buf).map_err(|e| runtime_err(e.into()))?;
            match out {
                Some(path) => std::fs::write(path, buf).map_err(|e| runtime_err(e.into()))?,
                None => std::io::stdout()
                    .write_all(&buf)
                    .map_err(|e| runtime_err(e.into()))?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
