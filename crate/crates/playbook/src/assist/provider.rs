//! Model providers: a chat-completions HTTP client, a fixture replayer that
//! never touches the network, and helpers for capturing fixtures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::AssistError;

/// A rendered prompt and the template it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRequest {
    pub template_id: &'static str,
    pub prompt: String,
}

impl PromptRequest {
    /// Hex SHA-256 of `template_id`, a newline and the prompt: the fixture
    /// file name used by [`FixtureProvider`].
    pub fn fixture_key(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.template_id.as_bytes());
        hasher.update(b"\n");
        hasher.update(self.prompt.as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[async_trait]
pub trait Provider: Send + Sync {
    async fn complete(&self, request: &PromptRequest) -> Result<String, AssistError>;
}

/// OpenAI-compatible `chat/completions` client.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    client: reqwest::Client,
    endpoint: reqwest::Url,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
}

impl HttpProvider {
    pub fn new(
        endpoint: reqwest::Url,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, AssistError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .connect_timeout(timeout)
            .build()
            .map_err(|e| AssistError::Provider(e.to_string()))?;
        Ok(HttpProvider {
            client,
            endpoint,
            model: model.into(),
            api_key,
            timeout,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[async_trait]
impl Provider for HttpProvider {
    async fn complete(&self, request: &PromptRequest) -> Result<String, AssistError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut call = self.client.post(self.endpoint.clone()).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let unreachable = |e: reqwest::Error| {
            if e.is_timeout() || e.is_connect() {
                AssistError::ProviderTimeout(format!(
                    "{} (limit {}s): {e}",
                    self.endpoint,
                    self.timeout.as_secs()
                ))
            } else {
                AssistError::Provider(e.to_string())
            }
        };
        let response = call.send().await.map_err(unreachable)?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().await.unwrap_or_default();
            return Err(AssistError::Provider(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse = response.json().await.map_err(unreachable)?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| AssistError::Provider("response has no message content".into()))
    }
}

/// Replays `<dir>/<fixture key>.txt`. Holds no network client at all.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    dir: PathBuf,
}

impl FixtureProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureProvider { dir: dir.into() }
    }

    pub fn path_for(&self, request: &PromptRequest) -> PathBuf {
        fixture_path(&self.dir, request)
    }
}

pub fn fixture_path(dir: &Path, request: &PromptRequest) -> PathBuf {
    dir.join(format!("{}.txt", request.fixture_key()))
}

#[async_trait]
impl Provider for FixtureProvider {
    async fn complete(&self, request: &PromptRequest) -> Result<String, AssistError> {
        let path = self.path_for(request);
        std::fs::read_to_string(&path).map_err(|_| AssistError::MissingFixture {
            template: request.template_id.to_string(),
            path,
        })
    }
}

/// Answers each template with a fixed text. Handy in tests and for
/// producing fixture files from readable sources.
#[derive(Debug, Clone, Default)]
pub struct StaticProvider {
    responses: BTreeMap<String, String>,
}

impl StaticProvider {
    pub fn new() -> Self {
        StaticProvider::default()
    }

    pub fn with(mut self, template_id: &str, response: impl Into<String>) -> Self {
        self.responses
            .insert(template_id.to_string(), response.into());
        self
    }
}

#[async_trait]
impl Provider for StaticProvider {
    async fn complete(&self, request: &PromptRequest) -> Result<String, AssistError> {
        self.responses
            .get(request.template_id)
            .cloned()
            .ok_or_else(|| {
                AssistError::Provider(format!("no response for `{}`", request.template_id))
            })
    }
}

/// Passes requests through and stores each answer as a fixture file.
pub struct RecordingProvider {
    inner: Arc<dyn Provider>,
    dir: PathBuf,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn Provider>, dir: impl Into<PathBuf>) -> Self {
        RecordingProvider {
            inner,
            dir: dir.into(),
        }
    }
}

#[async_trait]
impl Provider for RecordingProvider {
    async fn complete(&self, request: &PromptRequest) -> Result<String, AssistError> {
        let response = self.inner.complete(request).await?;
        let path = fixture_path(&self.dir, request);
        std::fs::create_dir_all(&self.dir)
            .and_then(|()| crate::store::write_atomic(&path, response.as_bytes()))
            .map_err(|e| AssistError::Provider(format!("recording {}: {e}", path.display())))?;
        Ok(response)
    }
}
