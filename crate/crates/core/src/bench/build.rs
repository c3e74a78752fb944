//! Benchmark construction: reversed objectives, noise synthesis, generated
//! evaluation scripts and DAG-level task composition.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::executor::{CodeArtifact, Provenance};
use crate::model::{DagStep, Level, TaskSpec, TASK_ENCODING};
use crate::pack::TaskPack;
use crate::prompt::{self, Llm};
use crate::sandbox::{ExecStatus, ExecutionOutcome, Sandbox, StagedFile};
use crate::table::{file_name, SchemaDescriptor};

fn plain_text(reply: &str) -> std::result::Result<String, String> {
    let text = reply.trim();
    if text.is_empty() {
        Err("empty reply".into())
    } else {
        Ok(text.to_string())
    }
}

/// Asks the model how clean data would have to be disrupted so that solving
/// the task recovers it.
pub fn reverse_objective(task: &TaskSpec, samples: &[String], llm: &Llm<'_>) -> Result<String> {
    let objective = task.objective.trim();
    if objective.is_empty() {
        return Err(Error::Precondition(format!(
            "task `{}` has an empty objective",
            task.id
        )));
    }
    let text = prompt::REVERSE_OBJECTIVE.render(&[
        ("objective", objective),
        ("samples", &prompt::render_samples(samples)),
    ]);
    Ok(llm.ask("reverse_objective", &text, plain_text)?.0)
}

/// How to turn ground truth into noisy task input.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRecipe {
    pub reversed_objective: String,
    pub noise_code: CodeArtifact,
}

fn render_noise_io(gt_name: &str, outputs: &[String]) -> String {
    let mut out = format!("- read the clean data from `inputs/{gt_name}`\n");
    for name in outputs {
        let _ = writeln!(out, "- write the disrupted file `out/{name}`");
    }
    out.push_str("- keep each file's format (csv with a header row, or jsonl), UTF-8 without byte-order mark\n");
    out.push_str("- use a fixed random seed so reruns produce identical files\n");
    out
}

/// Generates the noise script for a reversed objective.
pub fn generate_noise_recipe(
    reversed: &str,
    schema: &SchemaDescriptor,
    samples: &[String],
    gt_name: &str,
    outputs: &[String],
    llm: &Llm<'_>,
) -> Result<NoiseRecipe> {
    let text = prompt::NOISE_CODE.render(&[
        ("reversed", reversed),
        ("schema", &schema.render()),
        ("samples", &prompt::render_samples(samples)),
        ("io", &render_noise_io(gt_name, outputs)),
    ]);
    let ((language_tag, source), completions) =
        llm.ask("noise_code", &text, prompt::extract_code)?;
    Ok(NoiseRecipe {
        reversed_objective: reversed.to_string(),
        noise_code: CodeArtifact {
            node_id: "noise".into(),
            source,
            language_tag,
            provenance: Provenance::Free,
            prompt_tokens: completions.iter().map(|c| c.prompt_tokens).sum(),
            completion_tokens: completions.iter().map(|c| c.completion_tokens).sum(),
        },
    })
}

/// Result of running a noise script. Failures are kept for manual repair
/// rather than raised.
#[derive(Debug, Clone)]
pub struct NoiseRun {
    pub outcome: ExecutionOutcome,
    /// Produced files by name, restricted to the requested outputs.
    pub files: BTreeMap<String, Vec<u8>>,
    /// Requested outputs the script did not write.
    pub missing: Vec<String>,
}

impl NoiseRun {
    pub fn ok(&self) -> bool {
        self.outcome.status == ExecStatus::Ok
            && self.missing.is_empty()
            && !self.outcome.inputs_tampered
    }

    /// One line on why the run cannot be used.
    pub fn failure(&self) -> Option<String> {
        if self.ok() {
            return None;
        }
        if self.outcome.status != ExecStatus::Ok {
            let last = self
                .outcome
                .stack_trace
                .as_deref()
                .and_then(|t| t.lines().last())
                .unwrap_or("");
            return Some(format!(
                "noise script ended with {:?} {last}",
                self.outcome.status
            ));
        }
        if self.outcome.inputs_tampered {
            return Some("noise script modified its inputs".into());
        }
        Some(format!("noise script did not write {:?}", self.missing))
    }
}

/// Runs the recipe's script on the ground truth in the sandbox. The ground
/// truth file itself is only ever read through a staged copy.
pub fn synthesize_noise(
    recipe: &NoiseRecipe,
    gt: &Path,
    outputs: &[String],
    sandbox: &Sandbox,
) -> Result<NoiseRun> {
    let run = sandbox.run(&recipe.noise_code, &[StagedFile::from_path(gt)])?;
    let mut files = run.outputs;
    files.retain(|name, _| outputs.contains(name));
    let missing = outputs
        .iter()
        .filter(|o| !files.contains_key(*o))
        .cloned()
        .collect();
    Ok(NoiseRun {
        outcome: run.outcome,
        files,
        missing,
    })
}

/// Generates an evaluation script for a task whose category has no builtin
/// evaluator. Its output must still pass the consistency gate.
pub fn generate_eval_script(
    task: &TaskSpec,
    samples: &[String],
    llm: &Llm<'_>,
) -> Result<CodeArtifact> {
    let text = prompt::EVAL_SCRIPT.render(&[
        ("objective", task.objective.trim()),
        ("category", task.category.as_str()),
        ("samples", &prompt::render_samples(samples)),
    ]);
    let ((language_tag, source), completions) =
        llm.ask("eval_script", &text, prompt::extract_code)?;
    Ok(CodeArtifact {
        node_id: "eval".into(),
        source,
        language_tag,
        provenance: Provenance::Free,
        prompt_tokens: completions.iter().map(|c| c.prompt_tokens).sum(),
        completion_tokens: completions.iter().map(|c| c.completion_tokens).sum(),
    })
}

/// A composed DAG-level task and the warnings raised while composing it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedDag {
    pub spec: TaskSpec,
    pub warnings: Vec<String>,
}

fn connective(i: usize, n: usize) -> &'static str {
    match i {
        0 => "First,",
        _ if i + 1 == n => "Finally,",
        _ => "Then,",
    }
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if chars.clone().next().is_some_and(|n| n.is_lowercase()) => {
            c.to_lowercase().chain(chars).collect()
        }
        Some(c) => std::iter::once(c).chain(chars).collect(),
        None => String::new(),
    }
}

/// Chains operator-level tasks into one DAG-level task.
///
/// Needs more than two seeds. Frozen scores come from the pack config.
/// Consecutive seeds of the same category only raise a warning: whether
/// such a sequence makes sense is left to a human reviewer.
pub fn compose_dag_task(id: &str, seeds: &[&str], pack: &TaskPack) -> Result<ComposedDag> {
    if seeds.len() <= 2 {
        return Err(Error::Precondition(format!(
            "a DAG-level task needs more than 2 subtasks, got {}",
            seeds.len()
        )));
    }
    let mut subtasks = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let task = pack
            .task(seed)
            .filter(|t| t.level == Level::Operator)
            .ok_or_else(|| {
                Error::Precondition(format!("`{seed}` is not an operator-level task"))
            })?;
        subtasks.push(task);
    }
    let mut warnings = Vec::new();
    for pair in subtasks.windows(2) {
        if pair[0].category == pair[1].category {
            let w = format!(
                "`{}` and `{}` apply two {} steps in a row; check that the sequence is logical",
                pair[0].id, pair[1].id, pair[0].category
            );
            tracing::warn!("{w}");
            warnings.push(w);
        }
    }
    let mut steps = Vec::with_capacity(seeds.len());
    for task in &subtasks {
        let frozen = pack
            .config
            .frozen_scores
            .get(&task.id)
            .copied()
            .ok_or_else(|| Error::Config(format!("pack has no frozen score for `{}`", task.id)))?;
        steps.push(DagStep {
            subtask: task.id.clone(),
            frozen_score: frozen,
        });
    }
    let n = subtasks.len();
    let objective = subtasks
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{} {}", connective(i, n), lower_first(t.objective.trim())))
        .collect::<Vec<_>>()
        .join(" ");
    let first = subtasks[0];
    let last = subtasks[n - 1];
    let gt_name = file_name(Path::new(&last.ground_truth));
    let spec = TaskSpec {
        id: id.to_string(),
        level: Level::Dag,
        category: last.category,
        objective,
        inputs: first
            .inputs
            .iter()
            .map(|i| format!("data/noisy/{}", file_name(Path::new(i))))
            .collect(),
        ground_truth: format!("data/gt/{gt_name}"),
        evaluator: last.evaluator.clone(),
        dag_composition: Some(steps),
        encoding: TASK_ENCODING.into(),
    };
    spec.validate()
        .map_err(|v| Error::Precondition(format!("{}: {}", v.field, v.message)))?;
    Ok(ComposedDag { spec, warnings })
}
