//! Command-line front end: flat key-value configs, preset scenarios, CSV and
//! manifest emission, and gnuplot script generation for finished runs.

use std::path::PathBuf;

mod config;
mod plot;
mod run;

pub use config::{
    format_x, kind_slug, kind_tag, load_config, parse_config, preset, write_config, Numerics,
    ScenarioConfig, PRESET_NAMES,
};
pub use plot::emit_plot_script;
pub use run::{run_scenario, validate_report, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(#[from] toa_core::Error),
    #[error("while {context}: {source}")]
    Run {
        context: String,
        source: toa_core::Error,
    },
    #[error("{0}")]
    Manifest(String),
}
