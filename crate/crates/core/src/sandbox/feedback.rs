use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExecStatus, ExecutionOutcome, Sandbox, StagedFile};
use crate::contract::Predicate;
use crate::error::{Error, Result};
use crate::executor::{generate_code, CodeArtifact};
use crate::model::OperatorNode;
use crate::prompt::{self, Llm};
use crate::table::{DataFormat, Table};

/// Post-conditions of `node` that the produced table violates.
pub fn check_post(
    outcome: &ExecutionOutcome,
    node: &OperatorNode,
    output: &Table,
) -> Result<Vec<Predicate>> {
    if outcome.status != ExecStatus::Ok {
        return Err(Error::Precondition(format!(
            "post-conditions are only checked after a clean run, status was {:?}",
            outcome.status
        )));
    }
    Ok(node
        .contract
        .post
        .iter()
        .filter(|p| !p.holds(output))
        .cloned()
        .collect())
}

/// Everything the feedback prompt needs about one failed attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub outcome: ExecutionOutcome,
    pub violated_contracts: Vec<Predicate>,
    pub revision_advice: String,
    pub task_context: String,
    /// Failure found outside the contract, such as a missing output file.
    pub problem: Option<String>,
    pub script: String,
}

impl Diagnostic {
    pub fn new(
        outcome: ExecutionOutcome,
        violated: Vec<Predicate>,
        problem: Option<String>,
        artifact: &CodeArtifact,
        task_context: &str,
    ) -> Self {
        let mut advice = Vec::new();
        match outcome.status {
            ExecStatus::Error => advice.push(
                "Fix the error reported above at its source. Keep reading from inputs/ and writing to out/."
                    .to_string(),
            ),
            ExecStatus::Timeout => advice.push(
                "Remove unbounded loops and blocking calls; the script must finish well within the time limit."
                    .to_string(),
            ),
            ExecStatus::ResourceKill => advice.push(
                "Write only the required output file and keep its size proportional to the input."
                    .to_string(),
            ),
            ExecStatus::Ok => {}
        }
        advice.extend(violated.iter().map(Predicate::advice));
        if let Some(p) = &problem {
            advice.push(format!(
                "Make sure the script writes the required output: {p}."
            ));
        }
        Diagnostic {
            outcome,
            violated_contracts: violated,
            revision_advice: advice.join("\n"),
            task_context: task_context.to_string(),
            problem,
            script: artifact.source.clone(),
        }
    }
}

const SPAN_CONTEXT: u32 = 2;

fn render_span(diag: &Diagnostic) -> String {
    let Some((start, end)) = diag.outcome.offending_span else {
        return "(no location in the script could be determined)\n".into();
    };
    let lines: Vec<&str> = diag.script.lines().collect();
    let from = start.saturating_sub(SPAN_CONTEXT).max(1);
    let to = (end + SPAN_CONTEXT).min(lines.len() as u32);
    let mut out = String::new();
    for n in from..=to {
        let marker = if (start..=end).contains(&n) {
            ">>"
        } else {
            "  "
        };
        let text = lines.get(n as usize - 1).copied().unwrap_or("");
        let _ = writeln!(out, "{marker} {n:4} | {text}");
    }
    out
}

fn render_error(diag: &Diagnostic) -> String {
    let o = &diag.outcome;
    let mut out = String::new();
    match o.status {
        ExecStatus::Error => {
            let _ = writeln!(out, "The script exited with status {}.", o.exit_code);
        }
        ExecStatus::Timeout => {
            let _ = writeln!(
                out,
                "The script was stopped after running for {:.1} seconds, past the wall-clock limit.",
                o.duration_s
            );
        }
        ExecStatus::ResourceKill => {
            let _ = writeln!(
                out,
                "The script was stopped because it wrote too much output."
            );
        }
        ExecStatus::Ok => {
            let _ = writeln!(
                out,
                "The script ran without errors, but its result is not acceptable."
            );
        }
    }
    if o.status != ExecStatus::Ok && !o.stderr.is_empty() {
        let _ = writeln!(out, "stderr:\n{}", o.stderr.trim_end());
        if o.stderr_truncated {
            let _ = writeln!(out, "(stderr was truncated)");
        }
    }
    if let (Some(trace), false) = (&o.stack_trace, o.stderr.contains("Traceback")) {
        let _ = writeln!(out, "stack trace:\n{trace}");
    }
    if !diag.violated_contracts.is_empty() {
        let _ = writeln!(out, "Violated contract assertions on the output:");
        for p in &diag.violated_contracts {
            let _ = writeln!(out, "- assert {}", p.assertion());
        }
    }
    if let Some(p) = &diag.problem {
        let _ = writeln!(out, "{p}");
    }
    out
}

/// Feedback prompt with, in order: offending code, error text or violated
/// assertions, revision advice, task context, then the full script.
pub fn build_feedback(diag: &Diagnostic) -> String {
    let mut script = diag.script.clone();
    if !script.ends_with('\n') {
        script.push('\n');
    }
    prompt::FEEDBACK.render(&[
        ("span", &render_span(diag)),
        ("error", &render_error(diag)),
        ("advice", &diag.revision_advice),
        ("context", &diag.task_context),
        ("script", &script),
    ])
}

/// Inputs and expected output of one operator run.
#[derive(Debug, Clone)]
pub struct Stage<'a> {
    pub sandbox: &'a Sandbox,
    pub inputs: Vec<StagedFile>,
    /// File name the script must write under `out/`.
    pub output: String,
    pub task_context: String,
}

#[derive(Debug, Clone)]
pub struct DebugReport {
    pub artifact: CodeArtifact,
    pub outcome: ExecutionOutcome,
    /// Cycles used, the first attempt included.
    pub iterations: u32,
    pub violated: Vec<Predicate>,
    pub problem: Option<String>,
    /// Bytes of the expected output file, when it was written.
    pub output: Option<Vec<u8>>,
    /// Sum of sandbox run durations.
    pub exec_time_s: f64,
    /// Set when a gateway or protocol failure ended the loop early.
    pub aborted: Option<String>,
}

impl DebugReport {
    pub fn passed(&self) -> bool {
        self.outcome.status == ExecStatus::Ok && self.violated.is_empty() && self.problem.is_none()
    }
}

fn assess(
    node: &OperatorNode,
    outcome: &ExecutionOutcome,
    output: Option<&Vec<u8>>,
    name: &str,
) -> (Vec<Predicate>, Option<String>) {
    if outcome.status != ExecStatus::Ok {
        return (Vec::new(), None);
    }
    let Some(bytes) = output else {
        return (
            Vec::new(),
            Some(format!("no output file `out/{name}` was written")),
        );
    };
    let format = DataFormat::from_path(std::path::Path::new(name)).unwrap_or(DataFormat::Csv);
    let text = String::from_utf8_lossy(bytes);
    match Table::parse(&text, format) {
        Ok(table) => (check_post(outcome, node, &table).unwrap_or_default(), None),
        Err(e) => (
            Vec::new(),
            Some(format!("`out/{name}` is not valid {format}: {e}")),
        ),
    }
}

/// Runs, checks and revises until the script is runnable and meets its
/// post-conditions, or until `max_iter` cycles have been used.
pub fn debug_loop(
    node: &OperatorNode,
    initial: CodeArtifact,
    stage: &Stage<'_>,
    max_iter: u32,
    llm: &Llm<'_>,
) -> Result<DebugReport> {
    if max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    let mut artifact = initial;
    let mut iterations = 1;
    let mut exec_time_s = 0.0;
    loop {
        let run = stage.sandbox.run(&artifact, &stage.inputs)?;
        exec_time_s += run.outcome.duration_s;
        let output = run.outputs.get(&stage.output).cloned();
        let (violated, problem) = assess(node, &run.outcome, output.as_ref(), &stage.output);
        let mut report = DebugReport {
            artifact: artifact.clone(),
            outcome: run.outcome,
            iterations,
            violated,
            problem,
            output,
            exec_time_s,
            aborted: None,
        };
        tracing::debug!(
            node = %node.id,
            iteration = iterations,
            status = ?report.outcome.status,
            violated = report.violated.len(),
            "sandbox attempt"
        );
        if report.passed() || iterations >= max_iter {
            return Ok(report);
        }
        let diag = Diagnostic::new(
            report.outcome.clone(),
            report.violated.clone(),
            report.problem.clone(),
            &artifact,
            &stage.task_context,
        );
        let feedback = build_feedback(&diag);
        match generate_code(&node.id, &feedback, llm, artifact.provenance) {
            Ok(next) => artifact = next,
            Err(e @ (Error::Gateway(_) | Error::Protocol { .. })) => {
                tracing::warn!(node = %node.id, error = %e, "debug loop aborted");
                report.aborted = Some(e.to_string());
                return Ok(report);
            }
            Err(e) => return Err(e),
        }
        iterations += 1;
    }
}
