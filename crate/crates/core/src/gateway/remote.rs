use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{with_retries, Backend, BackendConfig, Decoding, GatewayError, GenerationResult, Limiter};
use crate::prompts::RenderedPrompt;

/// OpenAI-style chat-completions client. The rendered prompt is sent as a
/// single user message.
pub struct RemoteChatBackend {
    config: BackendConfig,
    agent: ureq::Agent,
    limiter: Limiter,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl RemoteChatBackend {
    pub fn new(config: BackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter::new(config.concurrency);
        RemoteChatBackend { config, agent, limiter }
    }

    fn attempt(&self, prompt: &RenderedPrompt, attempt: u32) -> Result<String, GatewayError> {
        let c = &self.config;
        let endpoint = c.endpoint.as_deref().unwrap_or_default();
        let mut body = json!({
            "model": c.model_name,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": c.temperature,
            "max_tokens": c.max_output_tokens,
        });
        if let Some(top_p) = c.top_p {
            body["top_p"] = json!(top_p);
        }
        let mut req = self.agent.post(endpoint).header("Content-Type", "application/json");
        if let Some(var) = &c.api_key_env {
            match std::env::var(var) {
                Ok(key) => req = req.header("Authorization", format!("Bearer {key}")),
                Err(_) => {
                    return Err(GatewayError::Misconfigured {
                        backend: c.name.clone(),
                        message: format!("environment variable {var} is not set"),
                    })
                }
            }
        }
        let unreachable = |message: String| GatewayError::BackendUnreachable {
            backend: c.name.clone(),
            attempts: attempt,
            message,
        };
        let mut resp = req.send_json(&body).map_err(|e| unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(unreachable(format!("status {status}: {text}")));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(GatewayError::BackendRefused {
                backend: c.name.clone(),
                status,
                message: text,
            });
        }
        let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| GatewayError::BackendRefused {
            backend: c.name.clone(),
            status,
            message: format!("unexpected response body: {e}"),
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|ch| ch.message.content)
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| GatewayError::EmptyCompletion(c.name.clone()))
    }
}

impl Backend for RemoteChatBackend {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn decoding(&self) -> Decoding {
        Decoding {
            model_name: self.config.model_name.clone(),
            temperature: self.config.temperature,
            max_output_tokens: self.config.max_output_tokens,
        }
    }

    fn generate(&self, prompt: &RenderedPrompt) -> Result<GenerationResult, GatewayError> {
        let _permit = self.limiter.acquire();
        let start = Instant::now();
        let (text, attempts) = with_retries(
            self.config.max_retries,
            Duration::from_millis(self.config.backoff_ms),
            |n| self.attempt(prompt, n),
        )?;
        Ok(GenerationResult {
            text,
            backend: self.config.name.clone(),
            latency_ms: start.elapsed().as_millis() as u64,
            attempts,
        })
    }
}
