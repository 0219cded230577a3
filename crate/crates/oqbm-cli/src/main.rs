// SPDX-License-Identifier: MIT OR Apache-2.0

//! `oqbm` — scenario runner for the open-quantum-Brownian-motion engine.
//!
//! Subcommands:
//!
//! * `oqbm run <config>` — execute a flat key-value configuration file.
//! * `oqbm preset <name> [--out DIR]` — execute a registered preset.
//! * `oqbm list-presets` — print the registry with resolved parameters.
//! * `oqbm crosscheck <config>` — run the transport PDE and the moment
//!   hierarchy on identical coefficients and emit a residual report.
//!
//! The default output root is the `OQBM_OUT` environment variable (falling
//! back to the current directory); a config `out` key or the `--out` flag
//! takes precedence, in that order of increasing priority.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures (blow-up, non-convergent integrals). Numerical failures still
//! write every diagnostic recorded before the failure, plus the manifest.

#![deny(unsafe_code)]

mod config;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub(crate) const EXIT_OK: i32 = 0;
pub(crate) const EXIT_CONFIG: i32 = 2;
pub(crate) const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "oqbm",
    version,
    about = "Open quantum Brownian motion of a driven two-level walker: PDE, moment-hierarchy, and cumulant-closure runs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a flat key-value configuration file.
    Run {
        /// Path to the configuration file.
        config: PathBuf,
    },
    /// Execute a registered preset by name.
    Preset {
        /// Preset name (see `list-presets`).
        name: String,
        /// Output directory (overrides OQBM_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the preset registry with its resolved parameters.
    ListPresets,
    /// Run the PDE and the moment hierarchy on identical coefficients and
    /// report per-channel residuals.
    Crosscheck {
        /// Path to the configuration file (its `mode` key is ignored).
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    ExitCode::from(execute(Cli::parse()) as u8)
}

fn execute(cli: Cli) -> i32 {
    match cli.cmd {
        Cmd::ListPresets => {
            runner::list_presets();
            EXIT_OK
        }
        Cmd::Preset { name, out } => match config::scenario_from_preset(&name) {
            Ok(s) => runner::run_scenario(&s, out),
            Err(e) => {
                eprintln!("oqbm: {e}");
                e.exit_code()
            }
        },
        Cmd::Run { config } => run_path(&config, None),
        Cmd::Crosscheck { config } => run_path(&config, Some(config::Mode::Crosscheck)),
    }
}

fn run_path(path: &Path, force_mode: Option<config::Mode>) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("oqbm: cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    match config::resolve_scenario(&text, force_mode) {
        Ok(s) => runner::run_scenario(&s, None),
        Err(e) => {
            eprintln!("oqbm: {e}");
            e.exit_code()
        }
    }
}
