use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use toa_cli::{
    emit_plot_script, load_config, preset, run_scenario, validate_report, write_config, CliError,
    PRESET_NAMES,
};

#[derive(Parser)]
#[command(
    name = "toa",
    about = "Time-of-arrival distributions for one-dimensional wave packets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write CSVs plus a manifest
    Run {
        config: PathBuf,
        /// Output directory (falls back to $TOA_OUT_DIR, then ".")
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write, run, and plot one of the built-in scenarios
    Preset {
        name: String,
        /// Output directory (falls back to $TOA_OUT_DIR, then ".")
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a config, build the scenario, and report its scales
    Validate { config: PathBuf },
    /// Emit a gnuplot script for a finished run's manifest
    Plot { manifest: PathBuf },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("TOA_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out } => {
            let config = load_config(&config)?;
            let out = out_dir(out);
            let result = run_scenario(&config, &out)?;
            println!("wrote {} CSV file(s) under {}", result.csv_paths.len(), out.display());
            println!("manifest: {}", result.manifest_path.display());
        }
        Command::Preset { name, out } => {
            let config = preset(&name).ok_or_else(|| {
                CliError::Manifest(format!(
                    "unknown preset {name}; available: {}",
                    PRESET_NAMES.join(", ")
                ))
            })?;
            let out = out_dir(out);
            std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            let conf_path = out.join(format!("{name}.conf"));
            std::fs::write(&conf_path, write_config(&config)).map_err(|source| CliError::Io {
                path: conf_path.clone(),
                source,
            })?;
            let result = run_scenario(&config, &out)?;
            let script = emit_plot_script(&result.manifest_path)?;
            println!("config: {}", conf_path.display());
            println!("wrote {} CSV file(s) under {}", result.csv_paths.len(), out.display());
            println!("manifest: {}", result.manifest_path.display());
            println!("plot script: {}", script.display());
        }
        Command::Validate { config } => {
            let config = load_config(&config)?;
            print!("{}", validate_report(&config)?);
        }
        Command::Plot { manifest } => {
            let script = emit_plot_script(&manifest)?;
            println!("plot script: {}", script.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
