//! Shared domain values: tasks, operator graphs and per-task run telemetry.
//!
//! Everything here is plain data. Values are built once (parsed from a
//! manifest or produced by the planner) and then only read, so they can be
//! shared freely between concurrent task runners.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::contract::GovernanceContract;

/// The only encoding accepted for task data.
pub const TASK_ENCODING: &str = "UTF-8 without byte-order mark";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Operator,
    Dag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Filtering,
    Refinement,
    Imputation,
    DedupConsistency,
    Integration,
    Classification,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Filtering,
        Category::Refinement,
        Category::Imputation,
        Category::DedupConsistency,
        Category::Integration,
        Category::Classification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Filtering => "filtering",
            Category::Refinement => "refinement",
            Category::Imputation => "imputation",
            Category::DedupConsistency => "dedup_consistency",
            Category::Integration => "integration",
            Category::Classification => "classification",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    BuiltinFiltering,
    BuiltinRefinement,
    BuiltinImputation,
    BuiltinDedup,
    BuiltinIntegration,
    BuiltinClassification,
    Script,
}

/// Knobs for the builtin evaluators. Unset fields fall back to the defaults
/// of the evaluator kind (`id`, `text`, `label`, ATOL 1e-6).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_whitespace: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorBinding {
    pub kind: EvaluatorKind,
    #[serde(default)]
    pub params: EvalParams,
    /// Pack-relative path of the evaluation script; required for `script`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_ref: Option<String>,
}

impl EvaluatorBinding {
    pub fn builtin(kind: EvaluatorKind) -> Self {
        EvaluatorBinding {
            kind,
            params: EvalParams::default(),
            script_ref: None,
        }
    }
}

/// One step of a DAG-level task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagStep {
    pub subtask: String,
    pub frozen_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub level: Level,
    pub category: Category,
    pub objective: String,
    /// Pack-relative paths of the files handed to the pipeline. The first
    /// one is the primary input.
    pub inputs: Vec<String>,
    pub ground_truth: String,
    pub evaluator: EvaluatorBinding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dag_composition: Option<Vec<DagStep>>,
    #[serde(default = "default_encoding")]
    pub encoding: String,
}

fn default_encoding() -> String {
    TASK_ENCODING.to_string()
}

/// A violated `TaskSpec` invariant: the field it concerns and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecViolation {
    pub field: &'static str,
    pub message: String,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), SpecViolation> {
        let fail = |field, message: String| Err(SpecViolation { field, message });
        if self.id.trim().is_empty() {
            return fail("id", "task id must not be empty".into());
        }
        if self.inputs.is_empty() {
            return fail("inputs", "at least one input file is required".into());
        }
        if self.encoding != TASK_ENCODING {
            return fail(
                "encoding",
                format!("expected \"{TASK_ENCODING}\", found \"{}\"", self.encoding),
            );
        }
        match (&self.level, &self.dag_composition) {
            (Level::Operator, Some(_)) => {
                return fail(
                    "dag_composition",
                    "operator-level tasks must not carry a composition".into(),
                )
            }
            (Level::Dag, None) => {
                return fail(
                    "dag_composition",
                    "DAG-level tasks need a composition".into(),
                )
            }
            (Level::Dag, Some(steps)) if steps.len() <= 2 => {
                return fail(
                    "dag_composition",
                    format!(
                        "a DAG-level task needs more than 2 subtasks, found {}",
                        steps.len()
                    ),
                )
            }
            _ => {}
        }
        for step in self.dag_composition.iter().flatten() {
            if !(0.0..=1.0).contains(&step.frozen_score) {
                return fail(
                    "dag_composition.frozen_score",
                    format!(
                        "frozen score {} of `{}` is outside [0, 1]",
                        step.frozen_score, step.subtask
                    ),
                );
            }
        }
        if self.evaluator.kind == EvaluatorKind::Script && self.evaluator.script_ref.is_none() {
            return fail(
                "evaluator.script_ref",
                "script evaluators need a script_ref".into(),
            );
        }
        if let Some(atol) = self.evaluator.params.atol {
            if atol.is_nan() || atol < 0.0 {
                return fail(
                    "evaluator.params.atol",
                    format!("ATOL must be >= 0, got {atol}"),
                );
            }
        }
        Ok(())
    }
}

/// One abstract operator in a governance DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNode {
    pub id: String,
    pub abstract_op: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub contract: GovernanceContract,
    /// Set on nodes inserted by the repair pass.
    #[serde(default)]
    pub repair: bool,
}

impl OperatorNode {
    /// Text used to look the operator up in the library: its name followed
    /// by any string parameters.
    pub fn goal(&self) -> String {
        let mut goal = self.abstract_op.clone();
        for value in self.params.values() {
            if let serde_json::Value::String(s) = value {
                goal.push(' ');
                goal.push_str(s);
            }
        }
        goal
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GovDag {
    pub nodes: Vec<OperatorNode>,
    /// `(from, to)` pairs of node ids.
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

impl GovDag {
    pub fn node(&self, id: &str) -> Option<&OperatorNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn predecessors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(_, to)| to == id)
            .map(|(from, _)| from.as_str())
    }

    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(from, _)| from == id)
            .map(|(_, to)| to.as_str())
    }
}

/// Telemetry for one task of a run; one JSON line per record in run logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub task_id: String,
    /// generate -> execute -> evaluate cycles, the first attempt included.
    pub debug_iterations: u32,
    pub tokens: u64,
    pub gen_time_s: f64,
    pub exec_time_s: f64,
    pub cost: f64,
    pub score: f64,
    pub runnable: bool,
    pub success: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(level: Level, steps: usize) -> TaskSpec {
        TaskSpec {
            id: "t".into(),
            level,
            category: Category::Filtering,
            objective: "o".into(),
            inputs: vec!["data/noisy/a.jsonl".into()],
            ground_truth: "data/gt/a.jsonl".into(),
            evaluator: EvaluatorBinding::builtin(EvaluatorKind::BuiltinFiltering),
            dag_composition: (steps > 0).then(|| {
                (0..steps)
                    .map(|i| DagStep {
                        subtask: format!("s{i}"),
                        frozen_score: 0.5,
                    })
                    .collect()
            }),
            encoding: TASK_ENCODING.into(),
        }
    }

    #[test]
    fn dag_tasks_need_more_than_two_steps() {
        assert_eq!(
            spec(Level::Dag, 2).validate().unwrap_err().field,
            "dag_composition"
        );
        assert!(spec(Level::Dag, 3).validate().is_ok());
        assert!(spec(Level::Operator, 0).validate().is_ok());
        assert!(spec(Level::Operator, 3).validate().is_err());
        assert!(spec(Level::Dag, 0).validate().is_err());
    }

    #[test]
    fn frozen_score_must_be_a_probability() {
        let mut s = spec(Level::Dag, 3);
        s.dag_composition.as_mut().unwrap()[1].frozen_score = 1.5;
        assert_eq!(
            s.validate().unwrap_err().field,
            "dag_composition.frozen_score"
        );
    }

    #[test]
    fn encoding_is_fixed() {
        let mut s = spec(Level::Operator, 0);
        s.encoding = "latin-1".into();
        assert_eq!(s.validate().unwrap_err().field, "encoding");
    }
}
