//! The chat wire protocol for remote agents.
//!
//! One endpoint, one shape: `POST {base_url}/chat` with a JSON
//! [`ChatRequest`]; the response body is `{"content": <text>}`. Images
//! travel inline as base64 with a declared media type; a bearer header is
//! added when the endpoint has an auth token. See the README for the
//! bit-exact protocol reference.

use super::BackendError;
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Where and how to reach one remote agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Per-request timeout; at least 1000.
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after a transport failure (not counted against the
    /// refinement retry budget).
    #[serde(default = "default_max_retries")]
    pub max_retries_transport: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_retries() -> u32 {
    2
}

impl AgentEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        AgentEndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout_ms: default_timeout_ms(),
            max_retries_transport: default_max_retries(),
            auth_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.base_url.trim().is_empty() {
            return Err(BackendError::Config("base_url is empty".to_string()));
        }
        if self.timeout_ms < 1000 {
            return Err(BackendError::Config(format!(
                "timeout_ms must be at least 1000, got {}",
                self.timeout_ms
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

/// One message part: plain text, or an inline base64 image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChatPart {
    Text { text: String },
    Image { image: String, media_type: String },
}

impl ChatPart {
    pub fn text(text: impl Into<String>) -> Self {
        ChatPart::Text { text: text.into() }
    }

    pub fn image(base64_bytes: impl Into<String>, media_type: impl Into<String>) -> Self {
        ChatPart::Image {
            image: base64_bytes.into(),
            media_type: media_type.into(),
        }
    }

    pub fn is_image(&self) -> bool {
        matches!(self, ChatPart::Image { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<ChatPart>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            parts: vec![ChatPart::text(text)],
        }
    }

    pub fn user(parts: Vec<ChatPart>) -> Self {
        ChatMessage {
            role: Role::User,
            parts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// At most two images per request (the verifier sends previous-best
    /// plus candidate; nothing sends more).
    pub fn validate(&self) -> Result<(), BackendError> {
        let images = self
            .messages
            .iter()
            .flat_map(|m| m.parts.iter())
            .filter(|p| p.is_image())
            .count();
        if images > 2 {
            return Err(BackendError::Config(format!(
                "chat request carries {images} images; the protocol allows at most 2"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

/// Blocking HTTP client for one agent endpoint, with transport retries.
pub struct ChatClient {
    config: AgentEndpointConfig,
    http: reqwest::blocking::Client,
}

impl ChatClient {
    pub fn new(config: AgentEndpointConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(ChatClient { config, http })
    }

    pub fn config(&self) -> &AgentEndpointConfig {
        &self.config
    }

    /// POST the request to `{base_url}/chat`; retry transport failures and
    /// 5xx responses up to `max_retries_transport` extra times.
    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let url = format!("{}/chat", self.config.base_url.trim_end_matches('/'));
        let attempts = 1 + self.config.max_retries_transport;
        let mut last_error = String::new();

        for _ in 0..attempts {
            let mut req = self.http.post(&url).json(request);
            if let Some(token) = &self.config.auth_token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_server_error() {
                        last_error = format!("server error {status}");
                        continue;
                    }
                    if !status.is_success() {
                        return Err(BackendError::Unreachable(format!(
                            "{url} answered {status}"
                        )));
                    }
                    let body = resp
                        .text()
                        .map_err(|e| BackendError::Unreachable(format!("reading body: {e}")))?;
                    return serde_json::from_str(&body).map_err(|e| {
                        BackendError::Unparseable(format!("response body is not chat JSON: {e}"))
                    });
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(BackendError::Unreachable(format!(
            "{url} after {attempts} attempts: {last_error}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_serializes_with_untagged_parts() {
        let req = ChatRequest {
            model_name: "m".to_string(),
            messages: vec![
                ChatMessage::system("be brief"),
                ChatMessage::user(vec![
                    ChatPart::text("q"),
                    ChatPart::image("QUJD", "image/png"),
                ]),
            ],
        };
        let json = serde_json::to_string(&req).unwrap();
        assert_eq!(
            json,
            "{\"model_name\":\"m\",\"messages\":[\
             {\"role\":\"system\",\"parts\":[{\"text\":\"be brief\"}]},\
             {\"role\":\"user\",\"parts\":[{\"text\":\"q\"},\
             {\"image\":\"QUJD\",\"media_type\":\"image/png\"}]}]}"
        );
        let back: ChatRequest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn three_images_rejected() {
        let img = ChatPart::image("QUJD", "image/png");
        let req = ChatRequest {
            model_name: "m".to_string(),
            messages: vec![ChatMessage::user(vec![img.clone(), img.clone(), img])],
        };
        assert!(matches!(req.validate(), Err(BackendError::Config(_))));
    }

    #[test]
    fn endpoint_config_enforces_minimum_timeout() {
        let mut cfg = AgentEndpointConfig::new("http://localhost:1", "m");
        cfg.validate().unwrap();
        cfg.timeout_ms = 999;
        assert!(matches!(cfg.validate(), Err(BackendError::Config(_))));
        cfg.timeout_ms = 1000;
        cfg.validate().unwrap();
    }

    #[test]
    fn config_defaults_apply_on_deserialize() {
        let cfg: AgentEndpointConfig =
            serde_json::from_str(r#"{"base_url":"http://h","model_name":"m"}"#).unwrap();
        assert_eq!(cfg.timeout_ms, 30_000);
        assert_eq!(cfg.max_retries_transport, 2);
        assert!(cfg.auth_token.is_none());
    }
}
