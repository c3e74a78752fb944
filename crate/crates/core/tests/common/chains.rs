//! Random contract chains and the repair-pass properties checked on them.

use std::collections::BTreeMap;

use govdag_core::contract::{GovernanceContract, Predicate};
use govdag_core::model::{GovDag, OperatorNode};
use govdag_core::planner::{check_chain, insert_repairs};
use govdag_core::table::CoarseType;
use proptest::prelude::*;

const COLUMNS: [&str; 3] = ["a", "b", "c"];
const SOURCE_ROWS: u64 = 5;

/// What the input data guarantees: every column exists with a known type,
/// and there are a few rows.
pub fn source_facts() -> Vec<Predicate> {
    let mut facts: Vec<Predicate> = COLUMNS
        .iter()
        .map(|c| Predicate::ColumnExists {
            column: c.to_string(),
        })
        .collect();
    facts.push(Predicate::TypeIs {
        column: "a".into(),
        ty: CoarseType::Integer,
    });
    facts.push(Predicate::TypeIs {
        column: "b".into(),
        ty: CoarseType::String,
    });
    facts.push(Predicate::TypeIs {
        column: "c".into(),
        ty: CoarseType::DatetimeString,
    });
    facts.push(Predicate::RowCountMin { min: SOURCE_ROWS });
    facts
}

fn predicate() -> impl Strategy<Value = Predicate> {
    let column = prop::sample::select(COLUMNS.to_vec()).prop_map(str::to_string);
    let ty = prop::sample::select(vec![
        CoarseType::Integer,
        CoarseType::Real,
        CoarseType::String,
        CoarseType::DatetimeString,
    ]);
    let format = prop::sample::select(vec!["YYYY-MM-DD", "email"]).prop_map(str::to_string);
    prop_oneof![
        column
            .clone()
            .prop_map(|column| Predicate::ColumnExists { column }),
        (column.clone(), ty).prop_map(|(column, ty)| Predicate::TypeIs { column, ty }),
        column
            .clone()
            .prop_map(|column| Predicate::NoNulls { column }),
        column
            .clone()
            .prop_map(|column| Predicate::UniqueKey { column }),
        (column, format).prop_map(|(column, format)| Predicate::ValueFormat { column, format }),
        (1..=SOURCE_ROWS).prop_map(|min| Predicate::RowCountMin { min }),
    ]
}

fn dedup(mut v: Vec<Predicate>) -> Vec<Predicate> {
    v.sort();
    v.dedup();
    v
}

/// A linear chain of 1 to 6 operators with random contracts. Pre-conditions
/// that upstream post-conditions do not cover are the injected violations.
pub fn random_chain() -> impl Strategy<Value = GovDag> {
    let contract = (
        prop::collection::vec(predicate(), 0..4),
        prop::collection::vec(predicate(), 0..3),
    );
    prop::collection::vec(contract, 1..=6).prop_map(|contracts| {
        let nodes: Vec<OperatorNode> = contracts
            .into_iter()
            .enumerate()
            .map(|(i, (pre, post))| OperatorNode {
                id: format!("op-{}", i + 1),
                abstract_op: format!("Step {}", i + 1),
                params: BTreeMap::new(),
                contract: GovernanceContract {
                    pre: dedup(pre),
                    post: dedup(post),
                },
                repair: false,
            })
            .collect();
        let edges = nodes
            .windows(2)
            .map(|w| (w[0].id.clone(), w[1].id.clone()))
            .collect();
        GovDag { nodes, edges }
    })
}

/// Splices one node out, wiring each predecessor to each successor.
pub fn without_node(dag: &GovDag, id: &str) -> GovDag {
    let preds: Vec<String> = dag.predecessors(id).map(str::to_string).collect();
    let succs: Vec<String> = dag.successors(id).map(str::to_string).collect();
    let mut edges: Vec<(String, String)> = dag
        .edges
        .iter()
        .filter(|(f, t)| f != id && t != id)
        .cloned()
        .collect();
    for p in &preds {
        for s in &succs {
            edges.push((p.clone(), s.clone()));
        }
    }
    GovDag {
        nodes: dag.nodes.iter().filter(|n| n.id != id).cloned().collect(),
        edges,
    }
}

/// Repairs the chain and checks the three repair properties: the result is
/// violation-free, every repair is needed, and a second pass is a no-op.
pub fn check_repair_properties(dag: &GovDag) -> Result<(), String> {
    let facts = source_facts();
    let violations = check_chain(dag, &facts).map_err(|e| e.to_string())?;
    let repaired = insert_repairs(dag, &violations).map_err(|e| e.to_string())?;
    let left = check_chain(&repaired, &facts).map_err(|e| e.to_string())?;
    if !left.is_empty() {
        return Err(format!("violations survive repair: {left:?}"));
    }
    for node in repaired.nodes.iter().filter(|n| n.repair) {
        let reduced = without_node(&repaired, &node.id);
        if check_chain(&reduced, &facts)
            .map_err(|e| e.to_string())?
            .is_empty()
        {
            return Err(format!("repair `{}` is not needed", node.id));
        }
    }
    let again = insert_repairs(&repaired, &left).map_err(|e| e.to_string())?;
    if again != repaired {
        return Err("a second repair pass changed the DAG".into());
    }
    let originals: Vec<&str> = repaired
        .nodes
        .iter()
        .filter(|n| !n.repair)
        .map(|n| n.id.as_str())
        .collect();
    let before: Vec<&str> = dag.nodes.iter().map(|n| n.id.as_str()).collect();
    if originals != before {
        return Err("repair reordered or dropped planned operators".into());
    }
    if violations.is_empty() != (repaired == *dag) {
        return Err("repairs inserted without violations, or none with".into());
    }
    Ok(())
}
