use std::path::Path;

use cgw::coulomb_gas::QuadConfig;
use cgw::frobenius::ZeroThreshold;
use cgw::limits::LadderConfig;
use serde::{Deserialize, Serialize};

/// Settings shared by every subcommand, loadable from TOML or JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub quad: QuadConfig,
    pub ladder: LadderConfig,
    pub threshold: ZeroThreshold,
    /// Seed for the randomized verification suites.
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?,
            _ => toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.quad.validate().map_err(|e| e.to_string())?;
        self.ladder.validate().map_err(|e| e.to_string())?;
        if !(self.threshold.rel > 0.0 && self.threshold.band >= 1.0) {
            return Err("threshold.rel must be positive and threshold.band at least 1".into());
        }
        Ok(())
    }
}
