//! `oseen-stab <command> --config <file> [--out <dir>]`
//!
//! Exit codes: 0 all certificates pass, 1 I/O, 2 configuration,
//! 3 spectrum or hypothesis failure, 4 gain infeasibility, 5 verification
//! residual failure.

use clap::{Parser, ValueEnum};
use oseen_stab::config::parse_config;
use oseen_stab::pipeline::{run_command, Command};
use oseen_stab::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Spectrum,
    Design,
    Simulate,
    Verify,
    Sweep,
}

#[derive(Parser, Debug)]
#[command(name = "oseen-stab", version, about = "Boundary feedback design and verification for channel flow")]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let text = std::fs::read_to_string(&cli.config)?;
    let cfg = parse_config(&text)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let cmd = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Design => Command::Design,
        Cmd::Simulate => Command::Simulate,
        Cmd::Verify => Command::Verify,
        Cmd::Sweep => Command::Sweep,
    };
    let outcome = run_command(cmd, &cfg, &out)?;
    for c in &outcome.certificates {
        println!(
            "{:<4} {:<26} value={:.6e} bound={:.3e}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
    for p in &outcome.artifacts {
        println!("wrote {}", p.display());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
