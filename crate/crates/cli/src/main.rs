//! `qkdnet`: batch runs, scenario editing, run status and the live control
//! server.

mod inject;
mod run;
mod serve;
mod status;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qkdnet_core::harness::{ScenarioConfig, TopologyConfig};

#[derive(Parser)]
#[command(name = "qkdnet", version, about = "Trusted-node QKD network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in simulated time and write metrics and audit logs.
    Run(run::RunArgs),
    /// Summarize a finished run directory or a live server.
    Status(status::StatusArgs),
    /// Add a timed event to a scenario file.
    Inject(inject::InjectArgs),
    /// Drive the network in wall-clock time behind an HTTP control endpoint.
    Serve(serve::ServeArgs),
}

/// A JSON file path, or the name of a built-in when no such file exists.
pub(crate) fn load_topology(spec: &str) -> Result<TopologyConfig> {
    let path = Path::new(spec);
    if path.exists() {
        TopologyConfig::load(path).with_context(|| format!("loading topology {spec}"))
    } else {
        TopologyConfig::builtin(spec).with_context(|| format!("{spec} is neither a file nor a built-in topology"))
    }
}

pub(crate) fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        ScenarioConfig::load(path).with_context(|| format!("loading scenario {spec}"))
    } else {
        ScenarioConfig::builtin(spec).with_context(|| format!("{spec} is neither a file nor a built-in scenario"))
    }
}

pub(crate) fn default_out() -> PathBuf {
    PathBuf::from("qkdnet-out")
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run::run(a),
        Command::Status(a) => status::status(a),
        Command::Inject(a) => inject::inject(a),
        Command::Serve(a) => serve::serve(a),
    }
}
