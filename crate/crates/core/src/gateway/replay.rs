use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{request_hash, Completion, CompletionParams, GatewayError, LlmGateway};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub request_hash: String,
    pub prompt: String,
    pub params: CompletionParams,
    pub completion: Completion,
}

/// An ordered list of recorded turns; stored as JSONL, one turn per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub turns: Vec<Turn>,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Transcript> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Transcript::parse(&text).map_err(|(line, message)| Error::Manifest {
            file: path.to_path_buf(),
            field: format!("line {line}"),
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Transcript, (usize, String)> {
        let mut turns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let turn: Turn = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
            turns.push(turn);
        }
        Ok(Transcript { turns })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for turn in &self.turns {
            out.push_str(&serde_json::to_string(turn).expect("turn serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Serves recorded completions strictly in order. Each request must hash to
/// the recorded turn's hash; anything else is a divergence error.
#[derive(Debug)]
pub struct ReplayGateway {
    turns: Vec<Turn>,
    cursor: Mutex<usize>,
}

impl ReplayGateway {
    pub fn new(transcript: Transcript) -> Self {
        ReplayGateway {
            turns: transcript.turns,
            cursor: Mutex::new(0),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(Transcript::load(path)?))
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().expect("replay lock")
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

impl LlmGateway for ReplayGateway {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        let mut cursor = self.cursor.lock().expect("replay lock");
        let turn = *cursor;
        let Some(recorded) = self.turns.get(turn) else {
            return Err(GatewayError::ReplayDivergence {
                turn,
                detail: format!("transcript has only {} turns", self.turns.len()),
            });
        };
        let hash = request_hash(prompt, params);
        if hash != recorded.request_hash {
            return Err(GatewayError::ReplayDivergence {
                turn,
                detail: format!(
                    "request hash {} does not match recorded {}",
                    &hash[..12],
                    &recorded.request_hash[..recorded.request_hash.len().min(12)]
                ),
            });
        }
        *cursor += 1;
        Ok(recorded.completion.clone())
    }
}

/// Forwards to an inner gateway and records every successful turn.
pub struct RecordingGateway<G> {
    inner: G,
    turns: Mutex<Vec<Turn>>,
}

impl<G: LlmGateway> RecordingGateway<G> {
    pub fn new(inner: G) -> Self {
        RecordingGateway {
            inner,
            turns: Mutex::new(Vec::new()),
        }
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            turns: self.turns.lock().expect("recording lock").clone(),
        }
    }
}

impl<G: LlmGateway> LlmGateway for RecordingGateway<G> {
    fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, GatewayError> {
        let completion = self.inner.complete(prompt, params)?;
        self.turns.lock().expect("recording lock").push(Turn {
            request_hash: request_hash(prompt, params),
            prompt: prompt.to_string(),
            params: params.clone(),
            completion: completion.clone(),
        });
        Ok(completion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockGateway;

    fn two_turns() -> Transcript {
        let rec = RecordingGateway::new(MockGateway::scripted(|p, _| format!("re: {p}")));
        let params = CompletionParams::default();
        rec.complete("first", &params).unwrap();
        rec.complete("second", &params).unwrap();
        rec.transcript()
    }

    #[test]
    fn third_call_diverges() {
        let replay = ReplayGateway::new(two_turns());
        let params = CompletionParams::default();
        assert_eq!(replay.complete("first", &params).unwrap().text, "re: first");
        assert_eq!(
            replay.complete("second", &params).unwrap().text,
            "re: second"
        );
        assert!(matches!(
            replay.complete("third", &params),
            Err(GatewayError::ReplayDivergence { turn: 2, .. })
        ));
    }

    #[test]
    fn out_of_order_request_diverges() {
        let replay = ReplayGateway::new(two_turns());
        let err = replay
            .complete("second", &CompletionParams::default())
            .unwrap_err();
        assert!(matches!(
            err,
            GatewayError::ReplayDivergence { turn: 0, .. }
        ));
        // the cursor does not advance on a miss
        assert_eq!(replay.consumed(), 0);
    }

    #[test]
    fn changed_params_diverge() {
        let replay = ReplayGateway::new(two_turns());
        let params = CompletionParams {
            model_id: "other".into(),
            ..CompletionParams::default()
        };
        assert!(replay.complete("first", &params).is_err());
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical() {
        let t = two_turns();
        let text = t.to_jsonl();
        let back = Transcript::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_jsonl(), text);
    }
}
