//! Uniform completion interface over live, mock and record/replay backends.

mod cost;
mod live;
mod mock;
mod replay;

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cost::{cost_of, ModelRates, Pricing};
pub use live::{LiveGateway, LiveSettings};
pub use mock::MockGateway;
pub use replay::{RecordingGateway, ReplayGateway, Transcript, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            temperature: 0.0,
            max_tokens: 4096,
            model_id: "gpt-4o".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_s: f64,
    pub model_id: String,
}

impl Completion {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("replay diverged at turn {turn}: {detail}")]
    ReplayDivergence { turn: usize, detail: String },
    #[error("gateway configuration error: {0}")]
    Config(String),
}

/// A completion backend. Implementations are shared between concurrently
/// running task pipelines.
pub trait LlmGateway: Send + Sync {
    fn complete(&self, prompt: &str, params: &CompletionParams)
        -> Result<Completion, GatewayError>;
}

impl<G: LlmGateway + ?Sized> LlmGateway for Arc<G> {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        (**self).complete(prompt, params)
    }
}

impl<G: LlmGateway + ?Sized> LlmGateway for Box<G> {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        (**self).complete(prompt, params)
    }
}

impl<G: LlmGateway + ?Sized> LlmGateway for &G {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        (**self).complete(prompt, params)
    }
}

/// SHA-256 over the prompt bytes, a NUL separator and the canonical JSON of
/// the parameters, hex encoded.
pub fn request_hash(prompt: &str, params: &CompletionParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update([0u8]);
    hasher.update(serde_json::to_vec(params).expect("params serialize"));
    hex::encode(hasher.finalize())
}

/// Whitespace-delimited token count, used where no provider metadata exists.
pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Wraps a gateway and keeps every completion it served, for per-task
/// token, time and cost accounting.
pub struct MeteredGateway<'a> {
    inner: &'a dyn LlmGateway,
    log: Mutex<Vec<Completion>>,
}

impl<'a> MeteredGateway<'a> {
    pub fn new(inner: &'a dyn LlmGateway) -> Self {
        MeteredGateway {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn completions(&self) -> Vec<Completion> {
        self.log.lock().expect("metering lock").clone()
    }

    pub fn calls(&self) -> usize {
        self.log.lock().expect("metering lock").len()
    }
}

impl LlmGateway for MeteredGateway<'_> {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        let completion = self.inner.complete(prompt, params)?;
        self.log
            .lock()
            .expect("metering lock")
            .push(completion.clone());
        Ok(completion)
    }
}
