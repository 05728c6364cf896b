//! Gateway configuration: defaults, optional TOML file, environment
//! overrides (in that precedence order, environment winning).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::backbone::ComponentSpec;

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_EMBED_DIM: usize = 256;
pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_BUDGET_BYTES: u64 = 4_100_000_000;
pub const DEFAULT_BACKEND_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_MAX_IMAGE_BYTES: usize = 8 * 1024 * 1024;
pub const DEFAULT_ADAPTER_BYTES: u64 = 10_000_000;
pub const DEFAULT_REGISTRY_PATH: &str = "medagi_registry.json";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config file: {0}")]
    Parse(String),
    #[error("invalid config value for {key}: {message}")]
    InvalidValue { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendMode {
    Mock,
    Live,
}

impl BackendMode {
    fn parse(raw: &str, key: &str) -> Result<Self, ConfigError> {
        match raw.to_ascii_lowercase().as_str() {
            "mock" => Ok(Self::Mock),
            "live" => Ok(Self::Live),
            other => Err(ConfigError::InvalidValue {
                key: key.to_string(),
                message: format!("expected \"mock\" or \"live\", got {other:?}"),
            }),
        }
    }
}

/// Effective gateway settings after merging defaults, file, and env.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub listen_addr: String,
    pub registry_path: PathBuf,
    pub embed_dim: usize,
    pub threshold: Option<f64>,
    pub top_k: usize,
    pub budget_bytes: u64,
    pub backend_mode: BackendMode,
    pub backend_timeout_ms: u64,
    pub max_image_bytes: usize,
    pub default_adapter_bytes: u64,
    pub components: Vec<ComponentSpec>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen_addr: DEFAULT_LISTEN_ADDR.to_string(),
            registry_path: PathBuf::from(DEFAULT_REGISTRY_PATH),
            embed_dim: DEFAULT_EMBED_DIM,
            threshold: None,
            top_k: DEFAULT_TOP_K,
            budget_bytes: DEFAULT_BUDGET_BYTES,
            backend_mode: BackendMode::Mock,
            backend_timeout_ms: DEFAULT_BACKEND_TIMEOUT_MS,
            max_image_bytes: DEFAULT_MAX_IMAGE_BYTES,
            default_adapter_bytes: DEFAULT_ADAPTER_BYTES,
            components: default_components(),
        }
    }
}

/// The standard shared backbone: vision encoder, query transformer, and
/// language model, 4 GB total. Overridden by any `[[components]]` entries
/// in the config file.
pub fn default_components() -> Vec<ComponentSpec> {
    vec![
        ComponentSpec::backbone("vision_encoder", 1_000_000_000),
        ComponentSpec::backbone("q_transformer", 50_000_000),
        ComponentSpec::backbone("llm", 2_950_000_000),
    ]
}

/// File schema; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    listen_addr: Option<String>,
    registry_path: Option<PathBuf>,
    embed_dim: Option<usize>,
    threshold: Option<f64>,
    top_k: Option<usize>,
    budget_bytes: Option<u64>,
    backend_mode: Option<String>,
    backend_timeout_ms: Option<u64>,
    max_image_bytes: Option<usize>,
    default_adapter_bytes: Option<u64>,
    components: Option<Vec<ComponentSpec>>,
}

impl GatewayConfig {
    /// Defaults, overlaid by `path` when given, overlaid by environment
    /// variables.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        if let Some(path) = path {
            let raw = std::fs::read_to_string(path)?;
            let file: ConfigFile =
                toml::from_str(&raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
            config.apply_file(file)?;
        }
        config.apply_env(&EnvSource::process())?;
        config.validate()?;
        Ok(config)
    }

    fn apply_file(&mut self, file: ConfigFile) -> Result<(), ConfigError> {
        if let Some(v) = file.listen_addr {
            self.listen_addr = v;
        }
        if let Some(v) = file.registry_path {
            self.registry_path = v;
        }
        if let Some(v) = file.embed_dim {
            self.embed_dim = v;
        }
        if let Some(v) = file.threshold {
            self.threshold = Some(v);
        }
        if let Some(v) = file.top_k {
            self.top_k = v;
        }
        if let Some(v) = file.budget_bytes {
            self.budget_bytes = v;
        }
        if let Some(v) = file.backend_mode {
            self.backend_mode = BackendMode::parse(&v, "backend_mode")?;
        }
        if let Some(v) = file.backend_timeout_ms {
            self.backend_timeout_ms = v;
        }
        if let Some(v) = file.max_image_bytes {
            self.max_image_bytes = v;
        }
        if let Some(v) = file.default_adapter_bytes {
            self.default_adapter_bytes = v;
        }
        if let Some(v) = file.components {
            self.components = v;
        }
        Ok(())
    }

    fn apply_env(&mut self, env: &EnvSource) -> Result<(), ConfigError> {
        if let Some(v) = env.get("LISTEN_ADDR") {
            self.listen_addr = v;
        }
        if let Some(v) = env.get("REGISTRY_PATH") {
            self.registry_path = PathBuf::from(v);
        }
        if let Some(v) = env.get("EMBED_DIM") {
            self.embed_dim = parse_num(&v, "EMBED_DIM")?;
        }
        if let Some(v) = env.get("THRESHOLD") {
            let lowered = v.to_ascii_lowercase();
            if lowered.is_empty() || lowered == "disabled" || lowered == "none" {
                self.threshold = None;
            } else {
                self.threshold = Some(parse_num(&v, "THRESHOLD")?);
            }
        }
        if let Some(v) = env.get("TOP_K") {
            self.top_k = parse_num(&v, "TOP_K")?;
        }
        if let Some(v) = env.get("BUDGET_BYTES") {
            self.budget_bytes = parse_num(&v, "BUDGET_BYTES")?;
        }
        if let Some(v) = env.get("BACKEND_MODE") {
            self.backend_mode = BackendMode::parse(&v, "BACKEND_MODE")?;
        }
        if let Some(v) = env.get("BACKEND_TIMEOUT_MS") {
            self.backend_timeout_ms = parse_num(&v, "BACKEND_TIMEOUT_MS")?;
        }
        if let Some(v) = env.get("MAX_IMAGE_BYTES") {
            self.max_image_bytes = parse_num(&v, "MAX_IMAGE_BYTES")?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.embed_dim < 2 {
            return Err(ConfigError::InvalidValue {
                key: "embed_dim".into(),
                message: "must be at least 2".into(),
            });
        }
        if self.top_k == 0 {
            return Err(ConfigError::InvalidValue {
                key: "top_k".into(),
                message: "must be at least 1".into(),
            });
        }
        if let Some(t) = self.threshold {
            if !(-1.0..=1.0).contains(&t) {
                return Err(ConfigError::InvalidValue {
                    key: "threshold".into(),
                    message: format!("{t} outside [-1, 1]"),
                });
            }
        }
        if self.budget_bytes == 0 {
            return Err(ConfigError::InvalidValue {
                key: "budget_bytes".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| ConfigError::InvalidValue {
        key: key.to_string(),
        message: format!("{e}"),
    })
}

/// Environment indirection so merging is testable without mutating the
/// process environment.
struct EnvSource {
    get: fn(&str) -> Option<String>,
}

impl EnvSource {
    fn process() -> Self {
        Self {
            get: |key| std::env::var(key).ok(),
        }
    }

    fn get(&self, key: &str) -> Option<String> {
        (self.get)(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::ComponentKind;

    #[test]
    fn defaults_are_the_documented_ones() {
        let config = GatewayConfig::default();
        assert_eq!(config.listen_addr, "127.0.0.1:8080");
        assert_eq!(config.embed_dim, 256);
        assert_eq!(config.threshold, None);
        assert_eq!(config.top_k, 3);
        assert_eq!(config.backend_timeout_ms, 10_000);
        assert_eq!(config.max_image_bytes, 8 * 1024 * 1024);
        assert_eq!(config.backend_mode, BackendMode::Mock);
        let backbone_total: u64 = config
            .components
            .iter()
            .filter(|c| c.kind == ComponentKind::Backbone)
            .map(|c| c.size_bytes)
            .sum();
        assert_eq!(backbone_total, 4_000_000_000);
    }

    #[test]
    fn file_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gateway.toml");
        std::fs::write(
            &path,
            r#"
listen_addr = "0.0.0.0:9999"
threshold = 0.25
top_k = 5
backend_mode = "live"

[[components]]
name = "llm"
kind = "backbone"
size_bytes = 123

[[components]]
name = "derm_align"
kind = "adapter"
size_bytes = 45
load_cost_ms = 7
"#,
        )
        .unwrap();
        let config = GatewayConfig::load(Some(&path)).unwrap();
        assert_eq!(config.listen_addr, "0.0.0.0:9999");
        assert_eq!(config.threshold, Some(0.25));
        assert_eq!(config.top_k, 5);
        assert_eq!(config.backend_mode, BackendMode::Live);
        assert_eq!(config.components.len(), 2);
        assert_eq!(config.components[1].load_cost_ms, 7);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gateway.toml");
        std::fs::write(&path, "mystery_knob = 1\n").unwrap();
        assert!(matches!(
            GatewayConfig::load(Some(&path)),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut config = GatewayConfig::default();
        config.top_k = 0;
        assert!(config.validate().is_err());
        let mut config = GatewayConfig::default();
        config.threshold = Some(1.5);
        assert!(config.validate().is_err());
        let mut config = GatewayConfig::default();
        config.embed_dim = 1;
        assert!(config.validate().is_err());
    }

    #[test]
    fn env_overrides_apply() {
        let mut config = GatewayConfig::default();
        let env = EnvSource {
            get: |key| match key {
                "LISTEN_ADDR" => Some("127.0.0.1:7777".to_string()),
                "THRESHOLD" => Some("0.5".to_string()),
                "TOP_K" => Some("2".to_string()),
                "BACKEND_MODE" => Some("live".to_string()),
                _ => None,
            },
        };
        config.apply_env(&env).unwrap();
        assert_eq!(config.listen_addr, "127.0.0.1:7777");
        assert_eq!(config.threshold, Some(0.5));
        assert_eq!(config.top_k, 2);
        assert_eq!(config.backend_mode, BackendMode::Live);
    }

    #[test]
    fn threshold_env_can_disable() {
        let mut config = GatewayConfig::default();
        config.threshold = Some(0.9);
        let env = EnvSource {
            get: |key| match key {
                "THRESHOLD" => Some("disabled".to_string()),
                _ => None,
            },
        };
        config.apply_env(&env).unwrap();
        assert_eq!(config.threshold, None);
    }
}
