//! Planner: objective and data schema in, contract-checked operator DAG out.
//!
//! The stages run in order: grounding, contract extraction, chain
//! synthesis, contract chaining check, repair insertion.

mod chain;
mod contracts;
mod intent;

use serde::{Deserialize, Serialize};

pub use chain::{check_chain, insert_repairs, repair_for, ContractViolation, REPAIRS};
pub use contracts::{extract_contracts, slug, synthesize_dag, ContractedOp};
pub use intent::{ground_intent, GroundedIntent};

use crate::error::Result;
use crate::model::{GovDag, TaskSpec};
use crate::prompt::Llm;
use crate::table::SchemaDescriptor;

/// Everything the planner decided for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub intent: GroundedIntent,
    pub operators: Vec<ContractedOp>,
    /// Violations of the synthesized chain, before repair.
    pub violations: Vec<ContractViolation>,
    /// The repaired DAG; absent when the intent is infeasible.
    pub dag: Option<GovDag>,
}

impl Plan {
    pub fn repairs(&self) -> usize {
        self.dag
            .as_ref()
            .map_or(0, |d| d.nodes.iter().filter(|n| n.repair).count())
    }
}

/// Runs the full planning pipeline for one task.
pub fn plan(
    task: &TaskSpec,
    schema: &SchemaDescriptor,
    samples: &[String],
    llm: &Llm<'_>,
) -> Result<Plan> {
    let (intent, _) = ground_intent(task, schema, samples, llm)?;
    if !intent.feasible {
        tracing::info!(
            task = %task.id,
            reason = intent.infeasibility_reason.as_deref().unwrap_or(""),
            "intent is infeasible"
        );
        return Ok(Plan {
            intent,
            operators: Vec::new(),
            violations: Vec::new(),
            dag: None,
        });
    }
    let (operators, _) = extract_contracts(&intent, schema, llm)?;
    let initial = synthesize_dag(&operators)?;
    let facts = schema.facts();
    let violations = check_chain(&initial, &facts)?;
    let dag = insert_repairs(&initial, &violations)?;
    debug_assert!(check_chain(&dag, &facts)?.is_empty());
    Ok(Plan {
        intent,
        operators,
        violations,
        dag: Some(dag),
    })
}

/// Renders a plan as indented text: the goal, each node in order with its
/// contract, and the repairs that were needed.
pub fn render_plan(plan: &Plan) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "goal: {}", plan.intent.normalized_goal);
    if !plan.intent.feasible {
        let _ = writeln!(
            out,
            "infeasible: {}",
            plan.intent.infeasibility_reason.as_deref().unwrap_or("")
        );
        return out;
    }
    let _ = writeln!(
        out,
        "columns: {}",
        plan.intent.referenced_columns.join(", ")
    );
    if let Some(dag) = &plan.dag {
        let order = crate::dag::topo_order(dag).unwrap_or_default();
        let _ = writeln!(out, "nodes:");
        for id in order {
            let node = dag.node(&id).expect("topo ids are nodes");
            let tag = if node.repair { " [repair]" } else { "" };
            let _ = writeln!(out, "  {id}: {}{tag}", node.abstract_op);
            for (k, v) in &node.params {
                let _ = writeln!(out, "    param {k} = {v}");
            }
            for p in &node.contract.pre {
                let _ = writeln!(out, "    pre  {p}");
            }
            for p in &node.contract.post {
                let _ = writeln!(out, "    post {p}");
            }
        }
        let _ = writeln!(out, "edges:");
        for (a, b) in &dag.edges {
            let _ = writeln!(out, "  {a} -> {b}");
        }
    }
    let _ = writeln!(out, "violations before repair: {}", plan.violations.len());
    for v in &plan.violations {
        let _ = writeln!(out, "  {v}");
    }
    let _ = writeln!(out, "repairs inserted: {}", plan.repairs());
    out
}
