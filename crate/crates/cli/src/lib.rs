//! Command-line pipeline: corpus construction, topic fitting, grid search,
//! reports and impact analysis, each writing a manifest-backed stage directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

use std::path::PathBuf;

pub use config::{LoadedConfig, RunConfig};
pub use error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Build,
    Fit,
    Gridsearch,
    Report,
    Impact,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Loads the config (or defaults), applies overrides and validates.
pub fn load_config(path: Option<&std::path::Path>, ov: &Overrides) -> Result<LoadedConfig> {
    let mut loaded = match path {
        Some(p) => RunConfig::load(p)?,
        None => LoadedConfig { config: RunConfig::default(), source_text: String::new() },
    };
    let c = &mut loaded.config;
    if let Some(s) = ov.seed {
        c.seed = s;
    }
    if let Some(t) = ov.threads {
        c.threads = t;
    }
    if let Some(o) = &ov.out {
        c.out = o.clone();
    }
    c.validate()?;
    Ok(loaded)
}

pub fn run(cmd: Command, cfg: &LoadedConfig) -> Result<manifest::Manifest> {
    match cmd {
        Command::Build => commands::cmd_build(cfg),
        Command::Fit => commands::cmd_fit(cfg),
        Command::Gridsearch => commands::cmd_gridsearch(cfg),
        Command::Report => commands::cmd_report(cfg),
        Command::Impact => commands::cmd_impact(cfg),
    }
}
