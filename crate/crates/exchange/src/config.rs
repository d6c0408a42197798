use std::path::{Path, PathBuf};
use std::time::Duration;

use osp_core::NetworkId;
use serde::{Deserialize, Serialize};

use crate::ExchangeError;

pub const DEFAULT_DEADLINE_MS: u64 = 100;
/// Bookkeeping allowance on top of the callout deadline.
pub const DEFAULT_GRACE_MS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkEndpoint {
    pub network_id: NetworkId,
    /// `host:port`
    pub address: String,
    #[serde(default = "enabled_by_default")]
    pub enabled: bool,
}

fn enabled_by_default() -> bool {
    true
}

impl NetworkEndpoint {
    pub fn new(network_id: impl Into<NetworkId>, address: impl Into<String>) -> Self {
        NetworkEndpoint {
            network_id: network_id.into(),
            address: address.into(),
            enabled: true,
        }
    }
}

/// Exchange settings, usually loaded from TOML:
///
/// ```toml
/// listen = "127.0.0.1:7000"
/// deadline_ms = 100
/// log_path = "auctions.jsonl"
///
/// [[endpoints]]
/// network_id = "net1"
/// address = "127.0.0.1:7101"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_deadline")]
    pub deadline_ms: u64,
    #[serde(default = "default_grace")]
    pub grace_ms: u64,
    #[serde(default)]
    pub log_path: Option<PathBuf>,
    /// Also send the clearing price to the publisher, not only to the winner.
    #[serde(default)]
    pub include_price_in_publisher_response: bool,
    /// Keep the async worker busy while auctions are pending instead of
    /// parking it. Costs a core under load; tightens deadline wake-ups on
    /// hosts with slow idle wake-up.
    #[serde(default)]
    pub busy_poll: bool,
    #[serde(default)]
    pub endpoints: Vec<NetworkEndpoint>,
}

fn default_listen() -> String {
    "127.0.0.1:7000".to_string()
}

fn default_deadline() -> u64 {
    DEFAULT_DEADLINE_MS
}

fn default_grace() -> u64 {
    DEFAULT_GRACE_MS
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        ExchangeConfig {
            listen: default_listen(),
            deadline_ms: DEFAULT_DEADLINE_MS,
            grace_ms: DEFAULT_GRACE_MS,
            log_path: None,
            include_price_in_publisher_response: false,
            busy_poll: false,
            endpoints: Vec::new(),
        }
    }
}

impl ExchangeConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExchangeError> {
        let config: ExchangeConfig =
            toml::from_str(text).map_err(|e| ExchangeError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ExchangeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExchangeError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ExchangeError> {
        if self.deadline_ms == 0 {
            return Err(ExchangeError::Config("deadline_ms must be positive".into()));
        }
        for (i, a) in self.endpoints.iter().enumerate() {
            if self.endpoints[i + 1..]
                .iter()
                .any(|b| b.network_id == a.network_id)
            {
                return Err(ExchangeError::Config(format!(
                    "network {} is registered twice",
                    a.network_id
                )));
            }
        }
        Ok(())
    }

    pub fn deadline(&self) -> Duration {
        Duration::from_millis(self.deadline_ms)
    }

    pub fn grace(&self) -> Duration {
        Duration::from_millis(self.grace_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let c = ExchangeConfig::from_toml(
            r#"
            listen = "0.0.0.0:9000"
            deadline_ms = 80
            busy_poll = true
            log_path = "/tmp/x.jsonl"

            [[endpoints]]
            network_id = "net1"
            address = "127.0.0.1:1"

            [[endpoints]]
            network_id = "net2"
            address = "127.0.0.1:2"
            enabled = false
            "#,
        )
        .unwrap();
        assert_eq!(c.listen, "0.0.0.0:9000");
        assert_eq!(c.deadline_ms, 80);
        assert!(c.busy_poll);
        assert_eq!(c.grace_ms, DEFAULT_GRACE_MS);
        assert_eq!(c.endpoints.len(), 2);
        assert!(c.endpoints[0].enabled);
        assert!(!c.endpoints[1].enabled);
    }

    #[test]
    fn defaults() {
        let c = ExchangeConfig::from_toml("").unwrap();
        assert_eq!(c, ExchangeConfig::default());
        assert_eq!(c.deadline(), Duration::from_millis(100));
    }

    #[test]
    fn rejects_duplicates_and_zero_deadline() {
        let dup = r#"
            [[endpoints]]
            network_id = "a"
            address = "x:1"
            [[endpoints]]
            network_id = "a"
            address = "x:2"
        "#;
        assert!(ExchangeConfig::from_toml(dup).is_err());
        assert!(ExchangeConfig::from_toml("deadline_ms = 0").is_err());
        assert!(ExchangeConfig::from_toml("deadline = 5").is_err());
    }
}
