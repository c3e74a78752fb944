//! Executor: realizes abstract operators as scripts by retrieval-augmented
//! generation over the operator library.

mod library;
mod retrieval;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use library::{load_card, load_library, OperatorCard, CARD_FILE};
pub use retrieval::{retrieve_ops, scores, tokenize, DEFAULT_K};

use crate::error::Result;
use crate::model::OperatorNode;
use crate::prompt::{self, Llm};
use crate::table::SchemaDescriptor;

/// Rows shown to the model in a code-generation prompt.
pub const PROMPT_SAMPLE_ROWS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Rag,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeArtifact {
    pub node_id: String,
    pub source: String,
    /// Selects the sandbox interpreter.
    pub language_tag: String,
    pub provenance: Provenance,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl CodeArtifact {
    pub fn python(node_id: &str, source: &str) -> Self {
        CodeArtifact {
            node_id: node_id.to_string(),
            source: source.to_string(),
            language_tag: "python".into(),
            provenance: Provenance::Free,
            prompt_tokens: 0,
            completion_tokens: 0,
        }
    }
}

/// Where a generated script reads and writes, relative to its sandbox.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoSpec {
    pub inputs: Vec<String>,
    pub output: String,
}

impl IoSpec {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for name in &self.inputs {
            let _ = writeln!(out, "- read `inputs/{name}`");
        }
        let _ = writeln!(out, "- write the result to `out/{}`", self.output);
        let _ = writeln!(
            out,
            "- keep the file format of the output name (csv with a header row, or one JSON object per line for jsonl), UTF-8 without byte-order mark"
        );
        let _ = writeln!(out, "- never modify anything under `inputs/`");
        out
    }
}

fn render_contract(node: &OperatorNode) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Preconditions (hold on the input):");
    if node.contract.pre.is_empty() {
        let _ = writeln!(out, "- (none)");
    }
    for p in &node.contract.pre {
        let _ = writeln!(out, "- assert {}", p.assertion());
    }
    let _ = writeln!(out, "Postconditions (must hold on the output):");
    if node.contract.post.is_empty() {
        let _ = writeln!(out, "- (none)");
    }
    for p in &node.contract.post {
        let _ = writeln!(out, "- assert {}", p.assertion());
    }
    out
}

fn render_operator(node: &OperatorNode) -> String {
    let mut out = format!("Node id: {}\nName: {}\n", node.id, node.abstract_op);
    if !node.params.is_empty() {
        out.push_str("Parameters:\n");
        for (k, v) in &node.params {
            let _ = writeln!(out, "- {k}: {v}");
        }
    }
    out
}

/// Header of each exemplar block; counted by tests of the no-retrieval mode.
pub const EXEMPLAR_HEADER: &str = "### Exemplar ";

fn render_exemplars(exemplars: &[OperatorCard]) -> String {
    if exemplars.is_empty() {
        return String::new();
    }
    let mut out = String::from("## Reference operators\n");
    for (i, card) in exemplars.iter().enumerate() {
        let _ = write!(
            out,
            "\n{EXEMPLAR_HEADER}{}: {}\n{}\n```python\n{}",
            i + 1,
            card.name,
            card.description,
            card.snippet
        );
        if !card.snippet.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("```\n");
    }
    out.push('\n');
    out
}

/// Deterministic code-generation prompt. With no exemplars the reference
/// section is left out entirely.
pub fn build_codegen_prompt(
    node: &OperatorNode,
    exemplars: &[OperatorCard],
    schema: &SchemaDescriptor,
    samples: &[String],
    io: &IoSpec,
) -> String {
    let shown = &samples[..samples.len().min(PROMPT_SAMPLE_ROWS)];
    prompt::CODEGEN.render(&[
        ("operator", &render_operator(node)),
        ("contract", &render_contract(node)),
        ("schema", &schema.render()),
        ("samples", &prompt::render_samples(shown)),
        ("io", &io.render()),
        ("exemplars", &render_exemplars(exemplars)),
    ])
}

/// Sends a code prompt and extracts the fenced script, re-asking on replies
/// without one. Token counts cover every attempt.
pub fn generate_code(
    node_id: &str,
    prompt: &str,
    llm: &Llm<'_>,
    provenance: Provenance,
) -> Result<CodeArtifact> {
    let ((language_tag, source), completions) =
        llm.ask("generate_code", prompt, prompt::extract_code)?;
    Ok(CodeArtifact {
        node_id: node_id.to_string(),
        source,
        language_tag,
        provenance,
        prompt_tokens: completions.iter().map(|c| c.prompt_tokens).sum(),
        completion_tokens: completions.iter().map(|c| c.completion_tokens).sum(),
    })
}
