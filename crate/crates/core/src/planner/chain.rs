use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::contracts::slug;
use crate::contract::{entailed_by, GovernanceContract, Predicate, PredicateKind};
use crate::dag::{topo_order, validate_dag};
use crate::error::{Error, Result};
use crate::model::{GovDag, OperatorNode};

/// Repair operators by the predicate kind they discharge, in insertion
/// priority order: casts run before imputation, normalization and dedup.
pub const REPAIRS: [(PredicateKind, &str); 4] = [
    (PredicateKind::TypeIs, "Cast Column Type"),
    (PredicateKind::NoNulls, "Impute Missing Values"),
    (PredicateKind::ValueFormat, "Normalize Format"),
    (PredicateKind::UniqueKey, "Deduplicate Rows"),
];

pub fn repair_for(kind: PredicateKind) -> Option<&'static str> {
    REPAIRS.iter().find(|(k, _)| *k == kind).map(|(_, op)| *op)
}

fn repair_priority(kind: PredicateKind) -> usize {
    REPAIRS
        .iter()
        .position(|(k, _)| *k == kind)
        .unwrap_or(REPAIRS.len())
}

/// A pre-condition of `edge.1` that nothing upstream guarantees. `edge.0` is
/// the upstream neighbour, or `None` when the consumer is a DAG head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractViolation {
    pub edge: (Option<String>, String),
    pub unmet: Predicate,
    pub suggested_repair: Option<String>,
}

impl std::fmt::Display for ContractViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let from = self.edge.0.as_deref().unwrap_or("<source>");
        write!(f, "{from} -> {}: unmet {}", self.edge.1, self.unmet)?;
        if let Some(op) = &self.suggested_repair {
            write!(f, " (repair: {op})")?;
        }
        Ok(())
    }
}

fn ancestors(dag: &GovDag, order: &[String]) -> BTreeMap<String, BTreeSet<String>> {
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for id in order {
        let mut set = BTreeSet::new();
        for p in dag.predecessors(id) {
            set.insert(p.to_string());
            if let Some(up) = map.get(p) {
                set.extend(up.iter().cloned());
            }
        }
        map.insert(id.clone(), set);
    }
    map
}

fn structural(dag: &GovDag) -> Result<Vec<String>> {
    let errors = validate_dag(dag);
    if !errors.is_empty() {
        let list: Vec<String> = errors.iter().map(ToString::to_string).collect();
        return Err(Error::Planning(format!(
            "malformed DAG: {}",
            list.join("; ")
        )));
    }
    topo_order(dag).map_err(|_| Error::Planning("malformed DAG".into()))
}

/// Lists every pre-condition not entailed by the source facts plus the
/// post-conditions of all upstream nodes.
pub fn check_chain(dag: &GovDag, source_facts: &[Predicate]) -> Result<Vec<ContractViolation>> {
    let order = structural(dag)?;
    let ancestry = ancestors(dag, &order);
    let mut violations = Vec::new();
    for id in &order {
        let node = dag.node(id).expect("topo order yields known ids");
        let mut facts: Vec<Predicate> = source_facts.to_vec();
        for a in &ancestry[id] {
            facts.extend(dag.node(a).expect("known id").contract.post.iter().cloned());
        }
        let from = dag.predecessors(id).min().map(str::to_string);
        for pre in &node.contract.pre {
            if !entailed_by(&facts, pre) {
                violations.push(ContractViolation {
                    edge: (from.clone(), id.clone()),
                    unmet: pre.clone(),
                    suggested_repair: repair_for(pre.kind()).map(str::to_string),
                });
            }
        }
    }
    Ok(violations)
}

fn repair_params(p: &Predicate) -> BTreeMap<String, Value> {
    let mut params = BTreeMap::new();
    if let Some(c) = p.column() {
        params.insert("column".into(), Value::String(c.to_string()));
    }
    match p {
        Predicate::TypeIs { ty, .. } => {
            params.insert("type".into(), Value::String(ty.as_str().to_string()));
        }
        Predicate::ValueFormat { format, .. } => {
            params.insert("format".into(), Value::String(format.clone()));
        }
        _ => {}
    }
    params
}

/// Inserts one repair operator per unmet predicate, directly before its
/// consumer, skipping predicates already discharged by a repair inserted
/// upstream or entailed by another unmet predicate of the same consumer.
/// Repairs have an empty pre-condition and post-condition `{unmet}`.
pub fn insert_repairs(dag: &GovDag, violations: &[ContractViolation]) -> Result<GovDag> {
    if violations.is_empty() {
        return Ok(dag.clone());
    }
    if let Some(v) = violations
        .iter()
        .find(|v| repair_for(v.unmet.kind()).is_none())
    {
        return Err(Error::Planning(format!(
            "no repair operator for unmet {} at {}",
            v.unmet, v.edge.1
        )));
    }
    let order = structural(dag)?;
    let ancestry = ancestors(dag, &order);

    let mut out = dag.clone();
    let mut used_ids: BTreeSet<String> = dag.nodes.iter().map(|n| n.id.clone()).collect();
    let mut counter = dag.nodes.iter().filter(|n| n.repair).count();
    // consumer id -> predicates discharged by repairs placed before it
    let mut discharged: BTreeMap<String, Vec<Predicate>> = BTreeMap::new();

    for consumer in &order {
        let mut unmet: Vec<Predicate> = Vec::new();
        for v in violations.iter().filter(|v| &v.edge.1 == consumer) {
            if !unmet.contains(&v.unmet) {
                unmet.push(v.unmet.clone());
            }
        }
        if unmet.is_empty() {
            continue;
        }
        let upstream: Vec<Predicate> = ancestry[consumer]
            .iter()
            .filter_map(|a| discharged.get(a))
            .flatten()
            .cloned()
            .collect();
        unmet.retain(|p| !entailed_by(&upstream, p));
        let reduced: Vec<Predicate> = unmet
            .iter()
            .filter(|p| !unmet.iter().any(|q| q != *p && q.entails(p)))
            .cloned()
            .collect();
        if reduced.is_empty() {
            continue;
        }
        let mut reduced = reduced;
        reduced.sort_by(|a, b| {
            repair_priority(a.kind())
                .cmp(&repair_priority(b.kind()))
                .then_with(|| a.cmp(b))
        });

        let mut chain_ids = Vec::new();
        let mut new_nodes = Vec::new();
        for p in &reduced {
            let op = repair_for(p.kind()).expect("checked above");
            let id = loop {
                counter += 1;
                let candidate = format!("{}-r{counter}", slug(op));
                if used_ids.insert(candidate.clone()) {
                    break candidate;
                }
            };
            chain_ids.push(id.clone());
            new_nodes.push(OperatorNode {
                id,
                abstract_op: op.to_string(),
                params: repair_params(p),
                contract: GovernanceContract {
                    pre: Vec::new(),
                    post: vec![p.clone()],
                },
                repair: true,
            });
        }

        let first = chain_ids[0].clone();
        for edge in out.edges.iter_mut() {
            if &edge.1 == consumer {
                edge.1 = first.clone();
            }
        }
        for w in chain_ids.windows(2) {
            out.edges.push((w[0].clone(), w[1].clone()));
        }
        out.edges.push((
            chain_ids.last().expect("non-empty").clone(),
            consumer.clone(),
        ));
        let at = out
            .nodes
            .iter()
            .position(|n| &n.id == consumer)
            .expect("consumer present");
        out.nodes.splice(at..at, new_nodes);
        discharged.insert(consumer.clone(), reduced);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::CoarseType;

    fn node(id: &str, pre: Vec<Predicate>, post: Vec<Predicate>) -> OperatorNode {
        OperatorNode {
            id: id.into(),
            abstract_op: id.into(),
            params: BTreeMap::new(),
            contract: GovernanceContract { pre, post },
            repair: false,
        }
    }

    fn chain(nodes: Vec<OperatorNode>) -> GovDag {
        let edges = nodes
            .windows(2)
            .map(|w| (w[0].id.clone(), w[1].id.clone()))
            .collect();
        GovDag { nodes, edges }
    }

    fn no_nulls(c: &str) -> Predicate {
        Predicate::NoNulls { column: c.into() }
    }

    fn type_is(c: &str, ty: CoarseType) -> Predicate {
        Predicate::TypeIs {
            column: c.into(),
            ty,
        }
    }

    #[test]
    fn format_post_discharges_string_pre() {
        let dag = chain(vec![
            node(
                "a",
                vec![],
                vec![Predicate::ValueFormat {
                    column: "date".into(),
                    format: "ISO-8601".into(),
                }],
            ),
            node("b", vec![type_is("date", CoarseType::String)], vec![]),
        ]);
        assert!(check_chain(&dag, &[]).unwrap().is_empty());
    }

    #[test]
    fn unmet_no_nulls_suggests_imputation() {
        let dag = chain(vec![
            node("a", vec![], vec![]),
            node("b", vec![no_nulls("age")], vec![]),
        ]);
        let v = check_chain(&dag, &[]).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].edge, (Some("a".into()), "b".into()));
        assert_eq!(
            v[0].suggested_repair.as_deref(),
            Some("Impute Missing Values")
        );

        let fixed = insert_repairs(&dag, &v).unwrap();
        assert_eq!(fixed.nodes.len(), 3);
        assert_eq!(fixed.nodes[1].id, "impute-missing-values-r1");
        assert!(fixed.nodes[1].repair);
        assert!(fixed
            .edges
            .contains(&("impute-missing-values-r1".into(), "b".into())));
        assert!(check_chain(&fixed, &[]).unwrap().is_empty());
    }

    #[test]
    fn empty_dag_has_no_violations() {
        assert!(check_chain(&GovDag::default(), &[]).unwrap().is_empty());
    }

    #[test]
    fn zero_violations_is_identity() {
        let dag = chain(vec![node("a", vec![], vec![])]);
        assert_eq!(insert_repairs(&dag, &[]).unwrap(), dag);
    }

    #[test]
    fn cast_before_impute_on_one_edge() {
        let dag = chain(vec![
            node("a", vec![], vec![]),
            node(
                "b",
                vec![no_nulls("x"), type_is("x", CoarseType::Real)],
                vec![],
            ),
        ]);
        let v = check_chain(&dag, &[]).unwrap();
        let fixed = insert_repairs(&dag, &v).unwrap();
        let ops: Vec<&str> = fixed.nodes.iter().map(|n| n.abstract_op.as_str()).collect();
        assert_eq!(ops, ["a", "Cast Column Type", "Impute Missing Values", "b"]);
        assert!(check_chain(&fixed, &[]).unwrap().is_empty());
    }

    #[test]
    fn repairs_may_precede_the_head() {
        let dag = chain(vec![node("a", vec![no_nulls("x")], vec![])]);
        let v = check_chain(&dag, &[]).unwrap();
        assert_eq!(v[0].edge.0, None);
        let fixed = insert_repairs(&dag, &v).unwrap();
        assert_eq!(fixed.nodes[0].abstract_op, "Impute Missing Values");
        assert_eq!(
            fixed.edges,
            vec![("impute-missing-values-r1".into(), "a".into())]
        );
    }

    #[test]
    fn unrepairable_kind_names_the_predicate() {
        let dag = chain(vec![node(
            "a",
            vec![Predicate::RowCountMin { min: 5 }],
            vec![],
        )]);
        let v = check_chain(&dag, &[]).unwrap();
        match insert_repairs(&dag, &v) {
            Err(Error::Planning(msg)) => assert!(msg.contains("row_count_min(5)")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn source_facts_count() {
        let dag = chain(vec![node(
            "a",
            vec![type_is("x", CoarseType::String)],
            vec![],
        )]);
        assert!(check_chain(&dag, &[type_is("x", CoarseType::String)])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn shared_repair_serves_downstream_consumers() {
        let dag = chain(vec![
            node("a", vec![no_nulls("x")], vec![]),
            node("b", vec![no_nulls("x")], vec![]),
        ]);
        let v = check_chain(&dag, &[]).unwrap();
        assert_eq!(v.len(), 2);
        let fixed = insert_repairs(&dag, &v).unwrap();
        assert_eq!(fixed.nodes.iter().filter(|n| n.repair).count(), 1);
        assert!(check_chain(&fixed, &[]).unwrap().is_empty());
    }
}
