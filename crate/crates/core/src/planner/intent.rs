use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::gateway::Completion;
use crate::model::TaskSpec;
use crate::prompt::{self, Llm};
use crate::table::SchemaDescriptor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedIntent {
    pub normalized_goal: String,
    pub feasible: bool,
    pub infeasibility_reason: Option<String>,
    /// Always a subset of the schema columns.
    pub referenced_columns: Vec<String>,
}

impl GroundedIntent {
    pub fn infeasible(goal: &str, reason: impl Into<String>) -> Self {
        GroundedIntent {
            normalized_goal: goal.to_string(),
            feasible: false,
            infeasibility_reason: Some(reason.into()),
            referenced_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct IntentReply {
    normalized_goal: String,
    feasible: bool,
    #[serde(default)]
    reason: Option<String>,
    #[serde(default)]
    referenced_columns: Vec<String>,
}

fn parse_reply(text: &str) -> std::result::Result<IntentReply, String> {
    let value: Value = prompt::extract_json(text)?;
    serde_json::from_value(value).map_err(|e| format!("intent reply has the wrong shape: {e}"))
}

/// Aligns the objective with the available data.
///
/// Columns the model names but the schema lacks are dropped. If a dropped
/// column is also spelled out in the objective, the goal depends on data that
/// does not exist and the intent is marked infeasible.
pub fn ground_intent(
    task: &TaskSpec,
    schema: &SchemaDescriptor,
    samples: &[String],
    llm: &Llm<'_>,
) -> Result<(GroundedIntent, Vec<Completion>)> {
    let objective = task.objective.trim();
    if objective.is_empty() {
        return Ok((
            GroundedIntent::infeasible("", "empty objective"),
            Vec::new(),
        ));
    }
    let text = prompt::GROUND_INTENT.render(&[
        ("objective", objective),
        ("schema", &schema.render()),
        ("samples", &prompt::render_samples(samples)),
        ("exemplars", prompt::PLANNER_EXEMPLARS),
    ]);
    let (reply, completions) = llm.ask("ground_intent", &text, parse_reply)?;

    let mut referenced = Vec::new();
    let mut missing = Vec::new();
    for column in reply.referenced_columns {
        if schema.has_column(&column) {
            if !referenced.contains(&column) {
                referenced.push(column);
            }
        } else {
            tracing::warn!(task = %task.id, %column, "dropping column absent from the schema");
            missing.push(column);
        }
    }

    let named_in_objective: Vec<&String> =
        missing.iter().filter(|c| mentions(objective, c)).collect();
    let (feasible, reason) = if !named_in_objective.is_empty() {
        let names: Vec<String> = named_in_objective
            .iter()
            .map(|c| format!("`{c}`"))
            .collect();
        (
            false,
            Some(format!(
                "column {} not found in the input data",
                names.join(", ")
            )),
        )
    } else if !reply.feasible {
        let reason = reply
            .reason
            .filter(|r| !r.trim().is_empty())
            .unwrap_or_else(|| "the model judged the goal infeasible".into());
        (false, Some(reason))
    } else {
        (true, None)
    };

    Ok((
        GroundedIntent {
            normalized_goal: reply.normalized_goal,
            feasible,
            infeasibility_reason: reason,
            referenced_columns: referenced,
        },
        completions,
    ))
}

/// Whole-word, case-insensitive occurrence of `word` in `text`.
fn mentions(text: &str, word: &str) -> bool {
    let text = text.to_lowercase();
    let word = word.to_lowercase();
    if word.is_empty() {
        return false;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    text.match_indices(&word).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + word.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CompletionParams, MockGateway};
    use crate::model::{Category, EvaluatorBinding, EvaluatorKind, Level};
    use crate::table::{CoarseType, ColumnSchema, DataFormat, FileSchema};

    fn schema() -> SchemaDescriptor {
        SchemaDescriptor {
            files: vec![FileSchema {
                name: "a.jsonl".into(),
                format: DataFormat::Jsonl,
                columns: vec![
                    ColumnSchema {
                        name: "id".into(),
                        ty: CoarseType::Integer,
                    },
                    ColumnSchema {
                        name: "text".into(),
                        ty: CoarseType::String,
                    },
                ],
                rows: 3,
            }],
        }
    }

    fn task(objective: &str) -> TaskSpec {
        TaskSpec {
            id: "t".into(),
            level: Level::Operator,
            category: Category::Filtering,
            objective: objective.into(),
            inputs: vec!["a.jsonl".into()],
            ground_truth: "g.jsonl".into(),
            evaluator: EvaluatorBinding::builtin(EvaluatorKind::BuiltinFiltering),
            dag_composition: None,
            encoding: crate::model::TASK_ENCODING.into(),
        }
    }

    fn reply(columns: &str) -> MockGateway {
        let body = format!(
            r#"{{"normalized_goal": "g", "feasible": true, "reason": null, "referenced_columns": {columns}}}"#
        );
        MockGateway::scripted(move |_, _| body.clone())
    }

    #[test]
    fn empty_objective_makes_no_call() {
        let gw = MockGateway::scripted(|_, _| panic!("no call expected"));
        let params = CompletionParams::default();
        let (intent, calls) =
            ground_intent(&task("  "), &schema(), &[], &Llm::new(&gw, &params)).unwrap();
        assert!(!intent.feasible);
        assert_eq!(
            intent.infeasibility_reason.as_deref(),
            Some("empty objective")
        );
        assert!(calls.is_empty());
    }

    #[test]
    fn absent_column_named_in_objective_is_infeasible() {
        let gw = reply(r#"["salary", "text"]"#);
        let params = CompletionParams::default();
        let (intent, _) = ground_intent(
            &task("Cap the salary at 10000"),
            &schema(),
            &["{}".into()],
            &Llm::new(&gw, &params),
        )
        .unwrap();
        assert!(!intent.feasible);
        assert!(intent.infeasibility_reason.unwrap().contains("salary"));
        assert_eq!(intent.referenced_columns, vec!["text"]);
    }

    #[test]
    fn hallucinated_column_not_in_objective_is_only_stripped() {
        let gw = reply(r#"["text", "score"]"#);
        let params = CompletionParams::default();
        let (intent, _) = ground_intent(
            &task("Remove profane rows"),
            &schema(),
            &["{}".into()],
            &Llm::new(&gw, &params),
        )
        .unwrap();
        assert!(intent.feasible);
        assert_eq!(intent.referenced_columns, vec!["text"]);
    }

    #[test]
    fn word_boundaries() {
        assert!(mentions("Cap the Salary.", "salary"));
        assert!(!mentions("salaryman", "salary"));
        assert!(!mentions("x", ""));
    }
}
