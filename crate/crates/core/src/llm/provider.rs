use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Standard,
    Premium,
    Curation,
}

/// One configured model: where it lives and what it is called there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelTier {
    pub tier: Tier,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub task: Task,
    pub tier: Tier,
    pub messages: Vec<ChatMessage>,
}

impl CompletionRequest {
    /// The final user turn, i.e. the filled template.
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }

    /// Flattens the conversation into a single string, one turn per block.
    pub fn transcript(&self) -> String {
        let mut s = String::new();
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            s.push_str(role);
            s.push_str(": ");
            s.push_str(&m.content);
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("provider rejected the request: {0}")]
    Rejection(String),
}

/// A chat-completion backend.
pub trait Provider: Send + Sync {
    fn complete(&self, model: &ModelTier, request: &CompletionRequest) -> Result<String, ProviderError>;
}

/// OpenAI-style `POST {base_url}/chat/completions`.
///
/// Decoding parameters are left at the provider's defaults.
pub struct HttpProvider {
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireContent,
}

#[derive(Deserialize)]
struct WireContent {
    #[serde(default)]
    content: Option<String>,
}

impl Provider for HttpProvider {
    fn complete(&self, model: &ModelTier, request: &CompletionRequest) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", model.base_url.trim_end_matches('/'));
        let body = serde_json::to_string(&WireRequest {
            model: &model.model,
            messages: &request.messages,
        })
        .map_err(|e| ProviderError::Rejection(e.to_string()))?;
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = model.api_key_env.as_deref().and_then(|v| std::env::var(v).ok()) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        tracing::debug!(task = request.task.name(), model = %model.model, "provider call (default decoding settings)");
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            other => ProviderError::Rejection(other.to_string()),
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ProviderError::Rejection(format!("status {status}")));
        }
        let parsed: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Rejection(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Rejection("no completion in response".into()))
    }
}
