use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, ChatRequest, GatewayError};

pub const ENV_ENDPOINT: &str = "SCINEWS_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "SCINEWS_LLM_API_KEY";
pub const ENV_MODEL: &str = "SCINEWS_LLM_MODEL";

const REDACTED: &str = "[REDACTED]";

/// OpenAI-compatible `/chat/completions` client. The endpoint is the full URL
/// of the completions route.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    id: String,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| REDACTED))
            .finish()
    }
}

impl HttpBackend {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            api_key: api_key.filter(|k| !k.is_empty()),
            client,
            id: format!("http:{endpoint}"),
        })
    }

    /// Reads the endpoint and key from the environment.
    pub fn from_env(timeout: Duration) -> Result<Self, GatewayError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| GatewayError::InvalidRequest(format!("{ENV_ENDPOINT} is not set")))?;
        Self::new(&endpoint, std::env::var(ENV_API_KEY).ok(), timeout)
    }

    fn scrub(&self, text: &str) -> String {
        match &self.api_key {
            Some(key) => text.replace(key.as_str(), REDACTED),
            None => text.to_string(),
        }
    }

    pub fn request_body(request: &ChatRequest) -> Value {
        json!({
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_message},
                {"role": "user", "content": request.user_message},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }

    /// Pulls `choices[0].message.content` out of a completion response.
    pub fn extract_text(body: &Value) -> Option<String> {
        body.get("choices")?
            .get(0)?
            .get("message")?
            .get("content")?
            .as_str()
            .map(str::to_string)
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let mut builder = self.client.post(&self.endpoint).json(&Self::request_body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(self.scrub(&e.to_string()))
            }
        })?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| GatewayError::Transport(self.scrub(&e.to_string())))?;
        if !status.is_success() {
            let message: String = self.scrub(&text).chars().take(500).collect();
            return Err(GatewayError::Http {
                status: status.as_u16(),
                message,
            });
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Transport(format!("unparseable completion body: {e}")))?;
        Self::extract_text(&body)
            .ok_or_else(|| GatewayError::Transport("completion body has no choices[0].message.content".into()))
    }
}
