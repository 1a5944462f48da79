use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use kda::KdaConfig;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Repository directory; `None` keeps everything in memory.
    pub storage: Option<PathBuf>,
    pub kda: KdaConfig,
    /// Static bearer token required on every route except `/healthz`.
    pub token: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { listen: SocketAddr::from(([127, 0, 0, 1], 8080)), storage: None, kda: KdaConfig::default(), token: None }
    }
}

/// Reads a TOML file holding `KdaConfig` fields; missing fields take defaults.
pub fn load_kda_config(path: &Path) -> Result<KdaConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::File(path.to_path_buf(), e))?;
    let config: KdaConfig = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
