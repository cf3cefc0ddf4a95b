//! Completion clients: an HTTPS chat-completion client and a scripted mock.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { temperature: 0.8, top_p: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    /// Worth retrying: transport failures, rate limits, server errors.
    #[error("transient client failure: {0}")]
    Transient(String),
    #[error("client failure: {0}")]
    Fatal(String),
}

pub trait LlmClient {
    fn complete(&mut self, prompt: &str, params: &SamplingParams) -> Result<String, ClientError>;
}

/// Replaces every occurrence of `secret` so it never reaches a log.
pub fn redact(text: &str, secret: &str) -> String {
    if secret.is_empty() {
        text.to_string()
    } else {
        text.replace(secret, "[REDACTED]")
    }
}

/// OpenAI-style `chat/completions` endpoint.
pub struct HttpClient {
    endpoint: String,
    model: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(endpoint: &str, model: &str, api_key: String, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { endpoint: endpoint.into(), model: model.into(), api_key, agent }
    }

    /// Reads the key from `var`; fails if it is unset or empty.
    pub fn from_env(endpoint: &str, model: &str, var: &str, timeout: Duration) -> Result<Self, ClientError> {
        match std::env::var(var) {
            Ok(key) if !key.is_empty() => Ok(Self::new(endpoint, model, key, timeout)),
            _ => Err(ClientError::Fatal(format!("environment variable {var} is not set"))),
        }
    }

    pub fn request_body(&self, prompt: &str, params: &SamplingParams) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
        })
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
pub fn response_content(body: &Value) -> Option<&str> {
    body.get("choices")?.get(0)?.get("message")?.get("content")?.as_str()
}

impl LlmClient for HttpClient {
    fn complete(&mut self, prompt: &str, params: &SamplingParams) -> Result<String, ClientError> {
        let body = self.request_body(prompt, params);
        log::debug!("POST {} {}", self.endpoint, redact(&body.to_string(), &self.api_key));
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| ClientError::Transient(redact(&e.to_string(), &self.api_key)))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transient(e.to_string()))?;
        log::debug!("response {status}: {}", redact(&text, &self.api_key));
        match status {
            200..=299 => {}
            408 | 429 | 500..=599 => return Err(ClientError::Transient(format!("HTTP {status}"))),
            _ => return Err(ClientError::Fatal(format!("HTTP {status}: {}", redact(&text, &self.api_key)))),
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| ClientError::Fatal(e.to_string()))?;
        response_content(&value)
            .map(str::to_string)
            .ok_or_else(|| ClientError::Fatal("response has no message content".into()))
    }
}

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ScriptStep {
    Reply(String),
    /// A transient failure, e.g. a rate limit.
    Fail { error: String },
}

/// Plays back a fixed transcript and records every prompt it receives.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    steps: VecDeque<ScriptStep>,
    pub calls: Vec<(String, SamplingParams)>,
}

impl ScriptedClient {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self { steps: steps.into_iter().collect(), calls: Vec::new() }
    }

    /// Loads a JSON array whose items are reply strings or `{"error": ...}`.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let steps: Vec<ScriptStep> = serde_json::from_str(&text)?;
        Ok(Self::new(steps))
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&mut self, prompt: &str, params: &SamplingParams) -> Result<String, ClientError> {
        self.calls.push((prompt.to_string(), *params));
        match self.steps.pop_front() {
            Some(ScriptStep::Reply(text)) => Ok(text),
            Some(ScriptStep::Fail { error }) => Err(ClientError::Transient(error)),
            None => Err(ClientError::Fatal("transcript exhausted".into())),
        }
    }
}
