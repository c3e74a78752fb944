//! Structural checks and deterministic ordering for [`GovDag`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::GovDag;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructuralError {
    DuplicateId(String),
    /// An edge names a node that does not exist.
    DanglingEdge(String),
    /// Nodes that sit on, or downstream of, a cycle.
    Cycle(Vec<String>),
}

impl fmt::Display for StructuralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructuralError::DuplicateId(id) => write!(f, "duplicate node id `{id}`"),
            StructuralError::DanglingEdge(id) => write!(f, "edge refers to unknown node `{id}`"),
            StructuralError::Cycle(ids) => write!(f, "cycle through {}", ids.join(", ")),
        }
    }
}

impl std::error::Error for StructuralError {}

/// Returns every structural problem of the graph; empty means the graph is
/// a valid DAG.
pub fn validate_dag(dag: &GovDag) -> Vec<StructuralError> {
    let mut errors = Vec::new();
    let mut ids = BTreeSet::new();
    for node in &dag.nodes {
        if !ids.insert(node.id.as_str()) {
            errors.push(StructuralError::DuplicateId(node.id.clone()));
        }
    }
    let mut reported = BTreeSet::new();
    for (from, to) in &dag.edges {
        for end in [from, to] {
            if !ids.contains(end.as_str()) && reported.insert(end.as_str()) {
                errors.push(StructuralError::DanglingEdge(end.clone()));
            }
        }
    }
    let (_, leftover) = kahn(&ids, &dag.edges);
    if !leftover.is_empty() {
        errors.push(StructuralError::Cycle(leftover));
    }
    errors
}

/// Topological order with ties broken by ascending node id, i.e. the
/// lexicographically smallest valid order.
pub fn topo_order(dag: &GovDag) -> Result<Vec<String>, Vec<StructuralError>> {
    let errors = validate_dag(dag);
    if !errors.is_empty() {
        return Err(errors);
    }
    let ids: BTreeSet<&str> = dag.nodes.iter().map(|n| n.id.as_str()).collect();
    Ok(kahn(&ids, &dag.edges).0)
}

/// Kahn's algorithm over the edges whose endpoints are both known. Returns
/// the ordered ids and the ids that could not be ordered.
fn kahn(ids: &BTreeSet<&str>, edges: &[(String, String)]) -> (Vec<String>, Vec<String>) {
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|id| (*id, 0)).collect();
    let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, to) in edges {
        if ids.contains(from.as_str()) && ids.contains(to.as_str()) {
            *indegree.get_mut(to.as_str()).expect("known id") += 1;
            out.entry(from).or_default().push(to);
        }
    }
    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(id) = ready.pop_first() {
        order.push(id.to_string());
        for next in out.get(id).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("known id");
            *d -= 1;
            if *d == 0 {
                ready.insert(next);
            }
        }
    }
    let leftover = indegree
        .into_iter()
        .filter(|(_, d)| *d > 0)
        .map(|(id, _)| id.to_string())
        .collect();
    (order, leftover)
}
