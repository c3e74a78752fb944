use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    is_task_failure, open_gateway, transcript_path, GatewayOpener, RunConfig, BENCH_VARIANT,
};
use crate::bench::{
    consistency_check, generate_eval_script, generate_noise_recipe, reverse_objective,
    synthesize_noise,
};
use crate::error::{Error, Result};
use crate::executor::PROMPT_SAMPLE_ROWS;
use crate::gateway::{LlmGateway, RecordingGateway};
use crate::model::{EvaluatorKind, Level, TaskSpec};
use crate::pack::{TaskPack, PACK_FILE, TASKS_DIR};
use crate::prompt::Llm;
use crate::sandbox::Sandbox;
use crate::table::{file_name, SchemaDescriptor};

/// Directory under the output pack that holds rejected tasks.
pub const QUARANTINE_DIR: &str = "quarantine";
/// Index of rejected tasks, written next to the pack file.
pub const QUARANTINE_INDEX: &str = "quarantine.json";

/// A task that was left out of the built pack, and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quarantined {
    pub task_id: String,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noisy_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    /// Tasks that passed the consistency gate, in build order.
    pub built: Vec<String>,
    pub quarantined: Vec<Quarantined>,
}

fn copy_task_tree(from: &Path, to: &Path) -> Result<()> {
    let skip = [from.join("data").join("noisy"), from.join("noise")];
    let walker = walkdir::WalkDir::new(from)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| !skip.iter().any(|s| e.path() == s));
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(from).to_path_buf();
            Error::io(path, e.into())
        })?;
        let rel = entry
            .path()
            .strip_prefix(from)
            .expect("walk stays under its root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
        } else {
            fs::copy(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

enum Step {
    Built,
    Rejected(Quarantined),
}

fn reject(task: &TaskSpec, reason: impl Into<String>) -> Step {
    Step::Rejected(Quarantined {
        task_id: task.id.clone(),
        reason: reason.into(),
        gt_score: None,
        noisy_score: None,
    })
}

fn build_task(pack: &TaskPack, task: &TaskSpec, sandbox: &Sandbox, llm: &Llm<'_>) -> Result<Step> {
    let gt = pack.ground_truth_path(task);
    let (schema, tables) = SchemaDescriptor::load(std::slice::from_ref(&gt))?;
    let samples = tables[0].sample_lines(PROMPT_SAMPLE_ROWS);
    let outputs: Vec<String> = task
        .inputs
        .iter()
        .map(|i| file_name(Path::new(i)))
        .collect();

    let reversed = reverse_objective(task, &samples, llm)?;
    let recipe =
        generate_noise_recipe(&reversed, &schema, &samples, &file_name(&gt), &outputs, llm)?;
    let noise_dir = pack.task_dir(&task.id).join("noise");
    write_file(
        &noise_dir.join("reversed_objective.txt"),
        format!("{reversed}\n").as_bytes(),
    )?;
    write_file(
        &noise_dir.join("noise.py"),
        recipe.noise_code.source.as_bytes(),
    )?;

    let run = synthesize_noise(&recipe, &gt, &outputs, sandbox)?;
    if let Some(why) = run.failure() {
        return Ok(reject(task, why));
    }
    for (rel, name) in task.inputs.iter().zip(&outputs) {
        write_file(&pack.resolve(task, rel), &run.files[name])?;
    }

    if task.evaluator.kind == EvaluatorKind::Script {
        let rel = task
            .evaluator
            .script_ref
            .as_deref()
            .expect("validated script tasks name a script");
        let path = pack.resolve(task, rel);
        if !path.is_file() {
            let script = generate_eval_script(task, &samples, llm)?;
            write_file(&path, script.source.as_bytes())?;
        }
    }

    let check = consistency_check(pack, task, sandbox)?;
    if !check.pass {
        return Ok(Step::Rejected(Quarantined {
            task_id: task.id.clone(),
            reason: format!(
                "consistency gate failed: ground truth scored {:.4}, noisy input scored {:.4}",
                check.gt_score, check.noisy_score
            ),
            gt_score: Some(check.gt_score),
            noisy_score: Some(check.noisy_score),
        }));
    }
    Ok(Step::Built)
}

fn build_with(
    pack: &TaskPack,
    task: &TaskSpec,
    sandbox: &Sandbox,
    gateway: &dyn LlmGateway,
    cfg: &RunConfig,
) -> Result<Step> {
    let params = cfg.params();
    let llm = Llm::new(gateway, &params);
    match build_task(pack, task, sandbox, &llm) {
        Err(e) if is_task_failure(&e) => Ok(reject(task, e.to_string())),
        other => other,
    }
}

/// Builds a benchmark pack from a seed pack of clean ground truth.
///
/// Each task gets a reversed objective, a noise script and noisy inputs,
/// then must pass the consistency gate. Failing tasks are moved to
/// `out/quarantine/<id>` and listed in `out/quarantine.json`. Operator
/// tasks are built first so that a DAG task whose subtask was rejected is
/// rejected too.
pub fn bench_build(seed_root: &Path, out: &Path, cfg: &RunConfig) -> Result<BuildReport> {
    bench_build_with(seed_root, out, cfg, &|task: &TaskSpec| {
        open_gateway(cfg, BENCH_VARIANT, &task.id)
    })
}

/// [`bench_build`] with a caller-supplied backend per task.
pub fn bench_build_with(
    seed_root: &Path,
    out: &Path,
    cfg: &RunConfig,
    open: &GatewayOpener<'_>,
) -> Result<BuildReport> {
    cfg.validate()?;
    let seed = TaskPack::open(seed_root)?;
    if out.exists()
        && fs::read_dir(out)
            .map_err(|e| Error::io(out, e))?
            .next()
            .is_some()
    {
        return Err(Error::Config(format!(
            "output directory {} is not empty",
            out.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pack_file = out.join(PACK_FILE);
    fs::copy(seed_root.join(PACK_FILE), &pack_file).map_err(|e| Error::io(&pack_file, e))?;
    for task in &seed.tasks {
        copy_task_tree(
            &seed.task_dir(&task.id),
            &out.join(TASKS_DIR).join(&task.id),
        )?;
    }
    let pack = TaskPack {
        root: out.to_path_buf(),
        config: seed.config.clone(),
        tasks: seed.tasks.clone(),
    };
    let sandbox = Sandbox::new(cfg.limits.clone());

    let mut order: Vec<&TaskSpec> = pack.tasks.iter().collect();
    order.sort_by_key(|t| (t.level == Level::Dag, t.id.clone()));
    let mut built = Vec::new();
    let mut quarantined: Vec<Quarantined> = Vec::new();
    for task in order {
        let rejected: BTreeSet<&str> = quarantined.iter().map(|q| q.task_id.as_str()).collect();
        let bad_sub = task
            .dag_composition
            .iter()
            .flatten()
            .find(|s| rejected.contains(s.subtask.as_str()));
        let step = if let Some(sub) = bad_sub {
            reject(task, format!("subtask `{}` was quarantined", sub.subtask))
        } else {
            tracing::info!(task = %task.id, "building");
            let gateway = open(task)?;
            match &cfg.record {
                None => build_with(&pack, task, &sandbox, gateway.as_ref(), cfg)?,
                Some(root) => {
                    let recorder = RecordingGateway::new(gateway);
                    let step = build_with(&pack, task, &sandbox, &recorder, cfg);
                    let path = transcript_path(root, BENCH_VARIANT, &task.id);
                    write_file(&path, recorder.transcript().to_jsonl().as_bytes())?;
                    step?
                }
            }
        };
        match step {
            Step::Built => built.push(task.id.clone()),
            Step::Rejected(q) => {
                tracing::warn!(task = %q.task_id, reason = %q.reason, "quarantined");
                let from = pack.task_dir(&q.task_id);
                let to: PathBuf = out.join(QUARANTINE_DIR).join(&q.task_id);
                fs::create_dir_all(out.join(QUARANTINE_DIR))
                    .map_err(|e| Error::io(out.join(QUARANTINE_DIR), e))?;
                fs::rename(&from, &to).map_err(|e| Error::io(&from, e))?;
                quarantined.push(q);
            }
        }
    }
    let index =
        serde_json::to_string_pretty(&quarantined).expect("quarantine list serializes") + "\n";
    write_file(&out.join(QUARANTINE_INDEX), index.as_bytes())?;
    Ok(BuildReport { built, quarantined })
}
