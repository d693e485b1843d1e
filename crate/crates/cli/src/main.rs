//! Command-line front end: define a run in an INI config file and/or flags,
//! execute the pipeline, write CSV and SVG artifacts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 divergence threshold
//! breached, 4 I/O error.

use clap::Parser;
use mppp_core::config::{resolve, validate, RawConfig};
use mppp_core::runner::{execute, RunError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Most probable phase portraits of stochastic differential equations:
/// simulate a path ensemble, estimate each time slice's density, extract
/// modes, and compare against closed-form references.
#[derive(Parser)]
#[command(name = "mppp", version, disable_help_subcommand = true)]
struct Cli {
    /// INI-style configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one setting as section.key=value (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed, shorthand for --set grid.seed=...
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory, shorthand for --set outputs.dir=...
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// System preset (ou, gbm, rotation2d), shorthand for --set system.preset=...
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Report every configuration problem and exit without running
    #[arg(long)]
    validate: bool,

    /// Suppress informational output; the endpoint error line still prints
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut raw = RawConfig::new();
    if let Some(path) = &cli.config {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: io_error cannot read {}: {e}", path.display());
                return ExitCode::from(4);
            }
        };
        if let Err(diags) = raw.merge_ini(&text, &path.display().to_string()) {
            for d in diags {
                eprintln!("error: {d}");
            }
            return ExitCode::from(2);
        }
    }
    if let Some(preset) = &cli.preset {
        raw.push("system", "preset", preset, "--preset");
    }
    if let Some(seed) = cli.seed {
        raw.push("grid", "seed", &seed.to_string(), "--seed");
    }
    if let Some(out) = &cli.out {
        raw.push("outputs", "dir", &out.display().to_string(), "--out");
    }
    for spec in &cli.set {
        if let Err(d) = raw.apply_set(spec) {
            eprintln!("error: {d}");
            return ExitCode::from(2);
        }
    }

    if cli.validate {
        let diags = validate(&raw);
        if diags.is_empty() {
            if !cli.quiet {
                println!("configuration ok");
            }
            return ExitCode::SUCCESS;
        }
        for d in &diags {
            println!("diagnostic: {d}");
        }
        return ExitCode::from(2);
    }

    let cfg = match resolve(&raw) {
        Ok(cfg) => cfg,
        Err(diags) => {
            for d in &diags {
                eprintln!("error: {d}");
            }
            return ExitCode::from(2);
        }
    };

    match execute(&cfg) {
        Ok(summary) => {
            if !cli.quiet {
                for w in &summary.warnings {
                    eprintln!("warning: {w}");
                }
                for path in &summary.artifacts {
                    println!("wrote {}", path.display());
                }
            }
            let report = &summary.report;
            if let Some(rel) = report.endpoint_rel_error {
                println!("endpoint_rel_error={rel}");
            } else if report.endpoint_relative_undefined {
                // The oracle vanishes at the horizon; fall back to the
                // absolute gap, flagged.
                println!("endpoint_rel_error=undefined");
                if let Some(abs) = report.endpoint_abs_error {
                    println!("endpoint_abs_error={abs}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Config(diags)) => {
            for d in &diags {
                eprintln!("error: {d}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {} {e}", e.reason_code());
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
