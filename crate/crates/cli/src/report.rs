//! Versioned JSON report envelope with the resolved configuration and input digests.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const REPORT_FORMAT: &str = "impact-report/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> CliResult<InputDigest> {
    let mut file = std::fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(hasher.finalize()),
    })
}

pub fn digest_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<Vec<InputDigest>> {
    paths.into_iter().map(digest_file).collect()
}

#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub format: &'static str,
    pub command: &'static str,
    pub config: &'a ExperimentConfig,
    pub inputs: Vec<InputDigest>,
    pub result: T,
}

/// Writes the report as JSON and the resolved configuration as TOML beside it.
pub fn write_report<T: Serialize>(path: &Path, command: &'static str, config: &ExperimentConfig, inputs: Vec<InputDigest>, result: T) -> CliResult<()> {
    let report = Report {
        format: REPORT_FORMAT,
        command,
        config,
        inputs,
        result,
    };
    write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write_text(&path.with_extension("config.toml"), &config.to_toml())
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create `{}`: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write `{}`: {e}", path.display())))
}
