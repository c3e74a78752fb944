use std::fs;
use std::path::Path;

use crate::bench::evaluate_task;
use crate::error::{Error, Result};
use crate::executor::{CodeArtifact, OperatorCard};
use crate::pack::TaskPack;
use crate::sandbox::{ExecStatus, Sandbox, StagedFile};
use crate::table::file_name;

#[derive(Debug, Clone, PartialEq)]
pub enum SelftestStatus {
    Passed,
    Failed(String),
    /// The card names no sample task.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestResult {
    pub card: String,
    pub status: SelftestStatus,
}

fn check_card(
    pack: &TaskPack,
    card: &OperatorCard,
    task_id: &str,
    sandbox: &Sandbox,
) -> Result<SelftestStatus> {
    let Some(task) = pack.task(task_id) else {
        return Ok(SelftestStatus::Failed(format!(
            "sample task `{task_id}` is not in the pack"
        )));
    };
    let inputs: Vec<StagedFile> = pack
        .input_paths(task)
        .iter()
        .map(|p| StagedFile::from_path(p))
        .collect();
    let out_name = file_name(Path::new(&task.ground_truth));
    let artifact = CodeArtifact::python(&card.name, &card.snippet);
    let mut produced: Vec<Vec<u8>> = Vec::with_capacity(2);
    for _ in 0..2 {
        let run = sandbox.run(&artifact, &inputs)?;
        if run.outcome.status != ExecStatus::Ok {
            let last = run
                .outcome
                .stack_trace
                .as_deref()
                .and_then(|t| t.lines().last())
                .unwrap_or("");
            return Ok(SelftestStatus::Failed(format!(
                "snippet ended with {:?} {last}",
                run.outcome.status
            )));
        }
        if run.outcome.inputs_tampered {
            return Ok(SelftestStatus::Failed("snippet modified its inputs".into()));
        }
        match run.outputs.get(&out_name) {
            Some(bytes) => produced.push(bytes.clone()),
            None => {
                return Ok(SelftestStatus::Failed(format!(
                    "snippet did not write `out/{out_name}`"
                )))
            }
        }
    }
    if produced[0] != produced[1] {
        return Ok(SelftestStatus::Failed(
            "two runs produced different output".into(),
        ));
    }
    let dir = tempfile::Builder::new()
        .prefix("govdag-selftest-")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let path = dir.path().join(&out_name);
    fs::write(&path, &produced[0]).map_err(|e| Error::io(&path, e))?;
    let verdict = evaluate_task(pack, task, &path, sandbox)?;
    Ok(if verdict.score >= 1.0 {
        SelftestStatus::Passed
    } else {
        SelftestStatus::Failed(format!(
            "scored {:.4} on `{task_id}`: {}",
            verdict.score,
            verdict.reason.unwrap_or_default()
        ))
    })
}

/// Runs each card's snippet twice on its sample task. A card passes when
/// both runs succeed without touching their inputs, agree byte for byte
/// and score 1.0.
pub fn asset_selftest(
    pack: &TaskPack,
    library: &[OperatorCard],
    sandbox: &Sandbox,
) -> Result<Vec<SelftestResult>> {
    library
        .iter()
        .map(|card| {
            let status = match &card.sample_task {
                None => SelftestStatus::Skipped,
                Some(id) => check_card(pack, card, id, sandbox)?,
            };
            Ok(SelftestResult {
                card: card.name.clone(),
                status,
            })
        })
        .collect()
}
