//! Scenario runner: turns JSON configs into CSV/JSON artifacts.

pub mod commands;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

pub use config::{ScenarioConfig, SCHEMA, SCHEMA_VERSION};

pub const TOOL: &str = "floquet-edge";
pub const MANIFEST: &str = "run-manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] floquet_edge::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Capmat,
    Spectrum,
    EdgeModes,
    Floquet,
    Perturb,
    Bands,
    Robustness,
    SshDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Capmat => "capmat",
            Command::Spectrum => "spectrum",
            Command::EdgeModes => "edge-modes",
            Command::Floquet => "floquet",
            Command::Perturb => "perturb",
            Command::Bands => "bands",
            Command::Robustness => "robustness",
            Command::SshDemo => "ssh-demo",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| CliError::Schema(format!("unknown command {s:?}")))
    }
}

/// One output file, named relative to the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            contents: contents.into(),
        }
    }

    pub fn json(name: impl Into<String>, value: &impl Serialize) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        Self::new(name, text)
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    ScenarioConfig::from_json(&text)
}

/// Apply command-line overrides and resolve defaults.
pub fn prepare(mut config: ScenarioConfig, seed: Option<u64>, out: Option<PathBuf>) -> ScenarioConfig {
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.output = out;
    }
    config.run = None;
    config.resolved()
}

/// Compute the artifacts of `command` without touching the file system.
pub fn execute(config: &ScenarioConfig, command: Command) -> Result<Vec<Artifact>, CliError> {
    let mut artifacts = match command {
        Command::Capmat => commands::capmat(config)?,
        Command::Spectrum => commands::spectrum(config)?,
        Command::EdgeModes => commands::edge_modes(config)?,
        Command::Floquet => commands::floquet(config)?,
        Command::Perturb => commands::perturb(config)?,
        Command::Bands => commands::bands(config)?,
        Command::Robustness => commands::robustness(config)?,
        Command::SshDemo => commands::ssh_demo(config)?,
    };
    let mut manifest = config.clone();
    manifest.run = Some(config::RunInfo {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        artifacts: artifacts.iter().map(|a| a.name.clone()).collect(),
    });
    artifacts.push(Artifact::json(MANIFEST, &manifest));
    Ok(artifacts)
}

/// Run `command` and write its artifacts into `config.output`.
pub fn run(config: &ScenarioConfig, command: Command) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = execute(config, command)?;
    let dir = &config.output;
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, a.contents).map_err(io_error(&path))?;
        written.push(path);
    }
    Ok(written)
}
