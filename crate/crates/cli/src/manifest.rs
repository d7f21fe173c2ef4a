//! `manifest.json`: one per output directory, updated by every command that
//! writes there.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEntry {
    pub timestamp: String,
    pub input: PathBuf,
    pub input_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Digest of the configuration (or input) used by the latest command.
    pub config_sha256: String,
    pub global_seed: Option<u64>,
    pub commands: BTreeMap<String, CommandEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = dir.join(FILE_NAME);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
        Ok(Some(serde_json::from_str(&text).with_context(|| path.display().to_string())?))
    }

    /// Merge an entry for `command` into `dir`'s manifest, creating it if
    /// needed.
    pub fn record(
        dir: &Path,
        command: &str,
        input: &Path,
        input_bytes: &[u8],
        seed: Option<u64>,
        outputs: &[PathBuf],
    ) -> Result<()> {
        let digest = sha256_hex(input_bytes);
        let mut manifest = Self::load(dir)?.unwrap_or_else(|| Manifest {
            tool: "embedprobe".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: String::new(),
            global_seed: None,
            commands: BTreeMap::new(),
        });
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        manifest.config_sha256 = digest.clone();
        if seed.is_some() {
            manifest.global_seed = seed;
        }
        let mut outputs = outputs.to_vec();
        outputs.sort();
        manifest.commands.insert(
            command.to_string(),
            CommandEntry {
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                input: input.to_path_buf(),
                input_sha256: digest,
                global_seed: seed,
                outputs,
            },
        );
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, text).with_context(|| path.display().to_string())
    }
}
