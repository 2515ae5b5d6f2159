//! Provider settings, read from `assist.toml` in the repository root.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::provider::{FixtureProvider, HttpProvider, Provider, RecordingProvider};
use super::AssistError;

pub const CONFIG_FILE: &str = "assist.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Full URL of an OpenAI-compatible chat-completions endpoint.
    pub endpoint: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub mock_mode: bool,
    pub mock_fixture_dir: Option<PathBuf>,
    /// When set (and not in mock mode), live responses are saved here as
    /// fixture files.
    pub record_fixture_dir: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            mock_mode: false,
            mock_fixture_dir: None,
            record_fixture_dir: None,
        }
    }
}

impl ProviderConfig {
    /// Reads `path`; a missing file yields the defaults.
    pub fn load(path: &Path) -> Result<ProviderConfig, AssistError> {
        match std::fs::read_to_string(path) {
            Ok(text) => toml::from_str(&text)
                .map_err(|e| AssistError::Config(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(ProviderConfig::default()),
            Err(e) => Err(AssistError::Config(format!("{}: {e}", path.display()))),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs.max(1))
    }

    /// Builds the configured provider. Mock mode requires a fixture
    /// directory and never constructs a network client.
    pub fn build(&self) -> Result<Arc<dyn Provider>, AssistError> {
        if self.mock_mode {
            let dir = self
                .mock_fixture_dir
                .as_ref()
                .ok_or_else(|| AssistError::Config("mock mode needs mock_fixture_dir".into()))?;
            if !dir.is_dir() {
                return Err(AssistError::Config(format!(
                    "fixture directory {} does not exist",
                    dir.display()
                )));
            }
            return Ok(Arc::new(FixtureProvider::new(dir)));
        }
        let endpoint = reqwest::Url::parse(&self.endpoint)
            .map_err(|e| AssistError::Config(format!("endpoint `{}`: {e}", self.endpoint)))?;
        let api_key = std::env::var(&self.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        let http: Arc<dyn Provider> = Arc::new(HttpProvider::new(
            endpoint,
            &self.model_name,
            api_key,
            self.timeout(),
        )?);
        Ok(match &self.record_fixture_dir {
            Some(dir) => Arc::new(RecordingProvider::new(http, dir)),
            None => http,
        })
    }
}
