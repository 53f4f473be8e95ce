//! Run configuration: one TOML file holds every stage's knobs with the
//! published constants as defaults; CLI flags override individual fields.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use dyad_core::harness::HarnessConfig;
use dyad_core::rhythm::RhythmConfig;
use dyad_core::sim::CohortConfig;
use dyad_core::stats::AnalysisOptions;
use dyad_core::timeline::SegmentationConfig;

pub const CONFIG_ENV_VAR: &str = "DYAD_CONFIG";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub segmentation: SegmentationConfig,
    pub rhythm: RhythmConfig,
    pub analysis: AnalysisOptions,
    pub harness: HarnessConfig,
    pub simulator: CohortConfig,
}

impl RunConfig {
    /// Load from `--config`, else `$DYAD_CONFIG`, else built-in defaults.
    pub fn load(explicit: Option<&Path>) -> anyhow::Result<RunConfig> {
        let path = explicit
            .map(|p| p.to_path_buf())
            .or_else(|| std::env::var_os(CONFIG_ENV_VAR).map(Into::into));
        match path {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                let cfg: RunConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?;
                cfg.validate()?;
                Ok(cfg)
            }
            None => Ok(RunConfig::default()),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.segmentation.validate()?;
        if !(0.0..1.0).contains(&self.analysis.alpha) || self.analysis.alpha <= 0.0 {
            anyhow::bail!("analysis.alpha must be in (0, 1)");
        }
        Ok(())
    }

    /// Canonical TOML rendering; hashed into the run manifest.
    pub fn canonical_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}
