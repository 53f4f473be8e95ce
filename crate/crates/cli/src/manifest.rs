//! Run manifest: seed, config hash, tool version, timestamp. The timestamp
//! is the only field allowed to differ between identical runs.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, serde::Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub created_unix_s: u64,
}

pub fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    config: &RunConfig,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let canonical = config.canonical_toml()?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let manifest = Manifest {
        tool: "dyad",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: subcommand.to_string(),
        seed,
        config_sha256: format!("{:x}", hasher.finalize()),
        created_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = out_dir.join(format!("manifest_{subcommand}.json"));
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
