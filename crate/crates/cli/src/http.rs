//! OpenAI-style chat-completions backend. Vendor differences are treated as
//! configuration: any endpoint that accepts the `{model, messages, …}` wire
//! format works through this one implementation.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use sumforge_core::gateway::{BackendError, ChatBackend, CompletionRequest};

#[derive(Debug, Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
}

#[derive(Debug, Deserialize)]
struct WireReplyMessage {
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

/// A single chat-completions endpoint plus the API key taken from the
/// configured environment variable at call time.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key_env: String,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key_env: &str, timeout_ms: u64) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(timeout_ms))
            .build();
        Self {
            agent,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key_env: api_key_env.to_string(),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest, _attempt: u32) -> Result<String, BackendError> {
        let api_key = std::env::var(&self.api_key_env).map_err(|_| {
            BackendError::Auth(format!(
                "environment variable {} is not set",
                self.api_key_env
            ))
        })?;
        let body = WireRequest {
            model: &self.model,
            messages: [WireMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
            seed: request.seed,
        };
        let response = self
            .agent
            .post(&self.endpoint)
            .set("Authorization", &format!("Bearer {api_key}"))
            .set("Content-Type", "application/json")
            .send_json(&body);

        match response {
            Ok(reply) => {
                let parsed: WireResponse = reply
                    .into_json()
                    .map_err(|e| BackendError::Malformed(e.to_string()))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .and_then(|c| c.message.content)
                    .ok_or_else(|| {
                        BackendError::Malformed("response carried no choices".to_string())
                    })
            }
            Err(ureq::Error::Status(status, reply)) => {
                let detail = reply
                    .into_string()
                    .unwrap_or_else(|_| String::from("<unreadable body>"));
                Err(match status {
                    429 => BackendError::RateLimited,
                    401 | 403 => BackendError::Auth(detail),
                    500..=599 => BackendError::Server { status },
                    _ => BackendError::Client { status, detail },
                })
            }
            Err(ureq::Error::Transport(transport)) => {
                if transport.kind() == ureq::ErrorKind::Io {
                    // Socket timeouts surface as io errors.
                    Err(BackendError::Timeout)
                } else {
                    Err(BackendError::Transport(transport.to_string()))
                }
            }
        }
    }
}
