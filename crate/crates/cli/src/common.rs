use std::fmt;
use std::path::{Path, PathBuf};

use asvlab::batch::Workers;
use asvlab::config::RunConfig;
use asvlab::Error;
use clap::Args;

/// Exit status 1 for usage and configuration problems, 2 for everything that
/// goes wrong once the command is running.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

pub fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

pub fn runtime(m: impl Into<String>) -> Failure {
    Failure::Runtime(m.into())
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Run configuration (TOML); tabled defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for batch stepping.
    #[arg(long, value_name = "N|auto", env = "ASVLAB_WORKERS")]
    pub workers: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| usage(e.to_string()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(w) = &self.workers {
            cfg.batch.workers = w.parse::<Workers>().map_err(|e| usage(e.to_string()))?;
        }
        Ok(cfg)
    }
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

/// Writes the resolved configuration next to a command's outputs.
pub fn snapshot_config(dir: &Path, cfg: &RunConfig) -> Result<String, Failure> {
    let text = cfg.to_toml();
    write_file(&dir.join("config.toml"), &text)?;
    Ok(text)
}

/// `on`/`off` switch for flags such as `--disturbances`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}
