use std::sync::Arc;

use super::{whitespace_tokens, Completion, CompletionParams, GatewayError, LlmGateway};

type Responder = dyn Fn(&str, &CompletionParams) -> Result<String, GatewayError> + Send + Sync;

/// Offline backend. Token counts are whitespace counts and latency is zero,
/// so runs against it are fully deterministic.
#[derive(Clone)]
pub struct MockGateway {
    responder: Arc<Responder>,
}

impl MockGateway {
    /// Replies with the prompt itself.
    pub fn echo() -> Self {
        Self::scripted(|prompt, _| prompt.to_string())
    }

    /// Replies with whatever `f` returns for the prompt.
    pub fn scripted<F>(f: F) -> Self
    where
        F: Fn(&str, &CompletionParams) -> String + Send + Sync + 'static,
    {
        MockGateway {
            responder: Arc::new(move |p, params| Ok(f(p, params))),
        }
    }

    /// Like [`MockGateway::scripted`] but the responder may fail.
    pub fn fallible<F>(f: F) -> Self
    where
        F: Fn(&str, &CompletionParams) -> Result<String, GatewayError> + Send + Sync + 'static,
    {
        MockGateway {
            responder: Arc::new(f),
        }
    }
}

impl std::fmt::Debug for MockGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MockGateway")
    }
}

impl LlmGateway for MockGateway {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        let text = (self.responder)(prompt, params)?;
        Ok(Completion {
            prompt_tokens: whitespace_tokens(prompt),
            completion_tokens: whitespace_tokens(&text),
            text,
            latency_s: 0.0,
            model_id: params.model_id.clone(),
        })
    }
}
