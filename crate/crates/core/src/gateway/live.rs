use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{whitespace_tokens, Completion, CompletionParams, GatewayError, LlmGateway};

pub const BASE_URL_VAR: &str = "GOVDAG_LLM_BASE_URL";
pub const API_KEY_VAR: &str = "GOVDAG_LLM_API_KEY";

#[derive(Debug, Clone)]
pub struct LiveSettings {
    /// Base URL of an OpenAI-compatible endpoint, e.g. `https://host/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl LiveSettings {
    pub fn from_env() -> Result<LiveSettings, GatewayError> {
        let base_url = std::env::var(BASE_URL_VAR)
            .map_err(|_| GatewayError::Config(format!("{BASE_URL_VAR} is not set")))?;
        Ok(LiveSettings {
            base_url,
            api_key: std::env::var(API_KEY_VAR).ok(),
            ..LiveSettings::new("")
        })
    }

    pub fn new(base_url: &str) -> LiveSettings {
        LiveSettings {
            base_url: base_url.to_string(),
            api_key: None,
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(300),
        }
    }
}

/// Chat-completions client. Transport failures, HTTP 429 and 5xx replies are
/// retried with exponential backoff; other statuses fail immediately.
pub struct LiveGateway {
    settings: LiveSettings,
    agent: ureq::Agent,
}

impl LiveGateway {
    pub fn new(settings: LiveSettings) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        LiveGateway { settings, agent }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.settings.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, body: &Value) -> Result<Value, (bool, GatewayError)> {
        let mut request = self.agent.post(&self.endpoint());
        if let Some(key) = &self.settings.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| (true, GatewayError::Transport(e.to_string())))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err((true, GatewayError::Transport(format!("HTTP {status}"))));
        }
        if status >= 400 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err((
                false,
                GatewayError::Transport(format!("HTTP {status}: {text}")),
            ));
        }
        response
            .body_mut()
            .read_json::<Value>()
            .map_err(|e| (false, GatewayError::Transport(format!("bad body: {e}"))))
    }
}

impl LlmGateway for LiveGateway {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        let body = json!({
            "model": params.model_id,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "messages": [{"role": "user", "content": prompt}],
        });
        let started = Instant::now();
        let mut backoff = self.settings.initial_backoff;
        let mut attempt = 0;
        let reply = loop {
            match self.attempt(&body) {
                Ok(v) => break v,
                Err((retryable, err)) => {
                    if !retryable || attempt >= self.settings.max_retries {
                        return Err(err);
                    }
                    tracing::warn!(attempt, error = %err, "retrying completion");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
            }
        };
        let text = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::Transport("reply has no message content".into()))?
            .to_string();
        let usage = &reply["usage"];
        let prompt_tokens = usage["prompt_tokens"]
            .as_u64()
            .unwrap_or_else(|| whitespace_tokens(prompt));
        let completion_tokens = usage["completion_tokens"]
            .as_u64()
            .unwrap_or_else(|| whitespace_tokens(&text));
        Ok(Completion {
            text,
            prompt_tokens,
            completion_tokens,
            latency_s: started.elapsed().as_secs_f64(),
            model_id: params.model_id.clone(),
        })
    }
}
