//! Versioned prompt templates and the helpers that turn model replies into
//! structured values.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::gateway::{Completion, CompletionParams, LlmGateway};

/// A prompt asset with `{name}` placeholders. Only the placeholders listed
/// in `slots` are substituted, so literal braces in JSON examples survive.
#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
    pub slots: &'static [&'static str],
}

macro_rules! template {
    ($ident:ident, $file:literal, [$($slot:literal),*]) => {
        pub const $ident: Template = Template {
            name: $file,
            text: include_str!(concat!("../assets/prompts/", $file)),
            slots: &[$($slot),*],
        };
    };
}

template!(
    GROUND_INTENT,
    "ground_intent.v1.txt",
    ["objective", "schema", "samples", "exemplars"]
);
template!(
    EXTRACT_CONTRACTS,
    "extract_contracts.v1.txt",
    ["objective", "schema", "columns", "exemplars"]
);
template!(
    CODEGEN,
    "codegen.v1.txt",
    [
        "operator",
        "contract",
        "schema",
        "samples",
        "io",
        "exemplars"
    ]
);
template!(
    FEEDBACK,
    "feedback.v1.txt",
    ["span", "error", "advice", "context", "script"]
);
template!(
    REVERSE_OBJECTIVE,
    "reverse_objective.v1.txt",
    ["objective", "samples"]
);
template!(
    NOISE_CODE,
    "noise_code.v1.txt",
    ["reversed", "schema", "samples", "io"]
);
template!(
    EVAL_SCRIPT,
    "eval_script.v1.txt",
    ["objective", "category", "samples"]
);

pub const PLANNER_EXEMPLARS: &str = include_str!("../assets/prompts/planner_exemplars.v1.txt");
pub const CONTRACT_EXEMPLARS: &str = include_str!("../assets/prompts/contract_exemplars.v1.txt");

impl Template {
    /// Fills every slot. Panics in debug builds if a slot is left unfilled,
    /// which would be a programming error.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = self.text.to_string();
        for slot in self.slots {
            let value = vars.iter().find(|(k, _)| k == slot).map(|(_, v)| *v);
            debug_assert!(
                value.is_some(),
                "template {} missing slot {slot}",
                self.name
            );
            out = out.replace(&format!("{{{slot}}}"), value.unwrap_or(""));
        }
        out
    }
}

/// Pulls a JSON object out of a reply: a ```json fence if present, else the
/// outermost braces.
pub fn extract_json(text: &str) -> std::result::Result<Value, String> {
    let candidate = fenced_blocks(text)
        .into_iter()
        .find(|(lang, _)| lang.eq_ignore_ascii_case("json"))
        .map(|(_, body)| body)
        .or_else(|| {
            let start = text.find('{')?;
            let end = text.rfind('}')?;
            (end > start).then(|| text[start..=end].to_string())
        })
        .ok_or_else(|| "no JSON object found in the reply".to_string())?;
    serde_json::from_str(&candidate).map_err(|e| format!("reply JSON does not parse: {e}"))
}

/// First fenced code block that is not JSON, as `(language_tag, source)`.
/// An untagged fence counts as `python`.
pub fn extract_code(text: &str) -> std::result::Result<(String, String), String> {
    let (lang, body) = fenced_blocks(text)
        .into_iter()
        .find(|(lang, _)| !lang.eq_ignore_ascii_case("json"))
        .ok_or_else(|| "no fenced code block found in the reply".to_string())?;
    if body.trim().is_empty() {
        return Err("the fenced code block is empty".into());
    }
    let lang = if lang.is_empty() {
        "python".to_string()
    } else {
        lang.to_ascii_lowercase()
    };
    Ok((lang, body))
}

fn fenced_blocks(text: &str) -> Vec<(String, String)> {
    let mut blocks = Vec::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let Some(info) = line.trim_start().strip_prefix("```") else {
            continue;
        };
        let lang = info.trim().to_string();
        let mut body = String::new();
        let mut closed = false;
        for inner in lines.by_ref() {
            if inner.trim_start().starts_with("```") {
                closed = true;
                break;
            }
            body.push_str(inner);
            body.push('\n');
        }
        if closed {
            blocks.push((lang, body));
        }
    }
    blocks
}

/// Number of extra attempts after an unusable reply.
pub const REASKS: usize = 2;

/// A gateway plus the sampling parameters used for every call.
#[derive(Clone, Copy)]
pub struct Llm<'a> {
    pub gateway: &'a dyn LlmGateway,
    pub params: &'a CompletionParams,
}

impl<'a> Llm<'a> {
    pub fn new(gateway: &'a dyn LlmGateway, params: &'a CompletionParams) -> Self {
        Llm { gateway, params }
    }

    /// Sends `prompt` and parses the reply. On a parse failure the prompt is
    /// re-sent with a format reminder, at most [`REASKS`] times. Returns the
    /// parsed value and every completion consumed.
    pub fn ask<T>(
        &self,
        stage: &'static str,
        prompt: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<(T, Vec<Completion>)> {
        let mut completions = Vec::new();
        let mut current = prompt.to_string();
        let mut last_reason = String::new();
        for attempt in 0..=REASKS {
            let completion = self.gateway.complete(&current, self.params)?;
            let parsed = parse(&completion.text);
            completions.push(completion);
            match parsed {
                Ok(value) => return Ok((value, completions)),
                Err(reason) => {
                    tracing::debug!(stage, attempt, %reason, "unusable reply");
                    current = format!(
                        "{prompt}\n\n## Format reminder\nYour previous reply could not be used: {reason}. Reply again and follow the required output format exactly.\n"
                    );
                    last_reason = reason;
                }
            }
        }
        Err(Error::Protocol {
            stage,
            reason: format!("{} attempts failed; last: {last_reason}", REASKS + 1),
        })
    }
}

/// Renders numbered sample lines for prompts.
pub fn render_samples(lines: &[String]) -> String {
    if lines.is_empty() {
        return "(no rows)\n".into();
    }
    lines.iter().map(|l| format!("{l}\n")).collect()
}
