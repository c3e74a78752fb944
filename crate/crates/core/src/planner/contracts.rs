use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::GroundedIntent;
use crate::contract::{GovernanceContract, Predicate};
use crate::error::{Error, Result};
use crate::gateway::Completion;
use crate::model::{GovDag, OperatorNode};
use crate::prompt::{self, Llm};
use crate::table::SchemaDescriptor;

/// An abstract operator with its parameters and governance contract, as
/// produced by contract extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractedOp {
    #[serde(rename = "op")]
    pub abstract_op: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub pre: Vec<Predicate>,
    #[serde(default)]
    pub post: Vec<Predicate>,
}

impl ContractedOp {
    pub fn contract(&self) -> GovernanceContract {
        GovernanceContract {
            pre: self.pre.clone(),
            post: self.post.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContractsReply {
    operators: Vec<ContractedOp>,
}

/// Parses and checks an extraction reply: at least one operator, valid
/// contracts, and every predicate column either in the schema or introduced
/// by an earlier operator's post-conditions.
fn parse_reply(
    text: &str,
    schema: &SchemaDescriptor,
) -> std::result::Result<Vec<ContractedOp>, String> {
    let value = prompt::extract_json(text)?;
    let reply: ContractsReply = serde_json::from_value(value)
        .map_err(|e| format!("contract reply has the wrong shape: {e}"))?;
    if reply.operators.is_empty() {
        return Err("the operator list is empty".into());
    }
    let mut known: Vec<String> = schema
        .column_names()
        .into_iter()
        .map(str::to_string)
        .collect();
    for op in &reply.operators {
        if op.abstract_op.trim().is_empty() {
            return Err("an operator has an empty name".into());
        }
        op.contract()
            .validate()
            .map_err(|e| format!("operator `{}`: {e}", op.abstract_op))?;
        for p in &op.pre {
            if let Some(c) = p.column() {
                if !known.iter().any(|k| k == c) {
                    return Err(format!(
                        "operator `{}` requires {p} but column `{c}` is neither an input column nor created upstream",
                        op.abstract_op
                    ));
                }
            }
        }
        for p in &op.post {
            if let Some(c) = p.column() {
                if !known.iter().any(|k| k == c) {
                    known.push(c.to_string());
                }
            }
        }
    }
    Ok(reply.operators)
}

/// Asks the model for the operator sequence and its contracts.
pub fn extract_contracts(
    intent: &GroundedIntent,
    schema: &SchemaDescriptor,
    llm: &Llm<'_>,
) -> Result<(Vec<ContractedOp>, Vec<Completion>)> {
    if !intent.feasible {
        return Err(Error::Precondition(format!(
            "cannot extract contracts from an infeasible intent: {}",
            intent
                .infeasibility_reason
                .as_deref()
                .unwrap_or("no reason given")
        )));
    }
    let columns = if intent.referenced_columns.is_empty() {
        "(none)".to_string()
    } else {
        intent.referenced_columns.join(", ")
    };
    let text = prompt::EXTRACT_CONTRACTS.render(&[
        ("objective", &intent.normalized_goal),
        ("schema", &schema.render()),
        ("columns", &columns),
        ("exemplars", prompt::CONTRACT_EXEMPLARS),
    ]);
    llm.ask("extract_contracts", &text, |reply| {
        parse_reply(reply, schema)
    })
}

/// Lower-case, dash-separated form of an operator name, used in node ids.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("op");
    }
    out
}

/// Builds a linear chain in list order. Node ids are `<slug>-<position>`,
/// counting from 1, so repeated operator names stay unique.
pub fn synthesize_dag(ops: &[ContractedOp]) -> Result<GovDag> {
    if ops.is_empty() {
        return Err(Error::Planning("no operators to chain".into()));
    }
    let nodes: Vec<OperatorNode> = ops
        .iter()
        .enumerate()
        .map(|(i, op)| OperatorNode {
            id: format!("{}-{}", slug(&op.abstract_op), i + 1),
            abstract_op: op.abstract_op.clone(),
            params: op.params.clone(),
            contract: op.contract(),
            repair: false,
        })
        .collect();
    let edges = nodes
        .windows(2)
        .map(|w| (w[0].id.clone(), w[1].id.clone()))
        .collect();
    Ok(GovDag { nodes, edges })
}
