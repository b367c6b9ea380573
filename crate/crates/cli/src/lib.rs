//! Experiment commands behind the `superres` binary.
//!
//! Every command reads a JSON config, writes its artifacts into an output
//! directory through atomic renames and finishes with `manifest.json`, which
//! echoes the effective config and lists each file with its SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub mod commands;

/// Failures of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] superres::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for bad configs and unsatisfiable requests, 3 for numerical
    /// failures, 1 for file-system trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(superres::Error::Io(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// The six commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Generate,
    Solve,
    Certify,
    McTable,
    FlattenCheck,
    NafSweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Solve => "solve",
            Command::Certify => "certify",
            Command::McTable => "mc-table",
            Command::FlattenCheck => "flatten-check",
            Command::NafSweep => "naf-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub metrics: Value,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects the files a command writes so the manifest can list them.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let bytes = contents.as_ref();
        superres::io::write_atomic(&self.dir.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(superres::Error::from)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self, command: Command, config: Value, seed: Option<u64>, metrics: Value) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            metrics,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(superres::Error::from)?;
        text.push('\n');
        superres::io::write_atomic(&self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(manifest)
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Runs `command` on the config file at `config`, writing into `out`.
/// A `seed` overrides the config's own seed.
pub fn run(command: Command, config: &Path, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    let text = fs::read_to_string(config).map_err(|e| config_err(format!("cannot read {}: {e}", config.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", config.display())))?;
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    commands::dispatch(command, value, &base, out, seed)
}
