//! Task scoring: evaluator dispatch, DAG-level weighting and the
//! consistency gate.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;

use super::evaluators::{
    eval_classification, eval_dedup, eval_filtering, eval_imputation, eval_integration,
    eval_refinement, Verdict, DEFAULT_ATOL,
};
use crate::error::{Error, Result};
use crate::executor::CodeArtifact;
use crate::model::{EvaluatorBinding, EvaluatorKind, Level, TaskSpec};
use crate::pack::TaskPack;
use crate::sandbox::{ExecStatus, Sandbox, StagedFile};
use crate::table::{DataFormat, Table};

/// Ground truth must score at least this much against itself.
pub const GT_FLOOR: f64 = 1.0 - 1e-9;
/// Noisy input must score strictly below this.
pub const NOISY_CEILING: f64 = 0.3;
/// Tolerance on the weight sum accepted by [`dag_score`].
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Normalized DAG step weights: raw `1 / (1 + alpha * score_i)`, scaled to
/// sum to 1. Easy steps (high frozen score) weigh less.
pub fn dag_weights(frozen_scores: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Evaluation(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    if frozen_scores.is_empty() {
        return Err(Error::Evaluation("no frozen scores to weight".into()));
    }
    if let Some(s) = frozen_scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Evaluation(format!(
            "frozen score {s} outside [0, 1]"
        )));
    }
    let raw: Vec<f64> = frozen_scores
        .iter()
        .map(|s| 1.0 / (1.0 + alpha * s))
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Weighted sum of subtask scores, clamped to `[0, 1]`.
pub fn dag_score(weights: &[f64], subtask_scores: &[f64]) -> Result<f64> {
    if weights.len() != subtask_scores.len() {
        return Err(Error::Evaluation(format!(
            "{} weights for {} subtask scores",
            weights.len(),
            subtask_scores.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Evaluation(format!("weights sum to {sum}, not 1")));
    }
    let score: f64 = weights.iter().zip(subtask_scores).map(|(w, s)| w * s).sum();
    Ok(score.clamp(0.0, 1.0))
}

/// Files an evaluator compares.
#[derive(Debug, Clone)]
pub struct EvalFiles<'a> {
    pub ground_truth: &'a Path,
    pub prediction: &'a Path,
    /// The unprocessed task input.
    pub raw: &'a Path,
}

fn load_side(path: &Path, side: &str) -> std::result::Result<Table, Verdict> {
    Table::load(path).map_err(|e| Verdict::zero(format!("{side} unreadable: {e}")))
}

fn load_reference(path: &Path) -> Result<Table> {
    Table::load(path).map_err(|e| Error::Evaluation(format!("reference data unreadable: {e}")))
}

/// Scores one prediction under an evaluator binding.
///
/// Unreadable or missing predictions score 0; broken reference data or a
/// missing evaluation script is an error.
pub fn evaluate_binding(
    binding: &EvaluatorBinding,
    files: &EvalFiles<'_>,
    script_root: &Path,
    sandbox: &Sandbox,
) -> Result<Verdict> {
    let p = &binding.params;
    let id = p.id_field.as_deref().unwrap_or("id");
    if binding.kind == EvaluatorKind::Script {
        let rel = binding
            .script_ref
            .as_deref()
            .ok_or_else(|| Error::Evaluation("script evaluator without script_ref".into()))?;
        return run_eval_script(&script_root.join(rel), files, sandbox);
    }
    let gt = load_reference(files.ground_truth)?;
    let pred = match load_side(files.prediction, "prediction") {
        Ok(t) => t,
        Err(v) => return Ok(v),
    };
    Ok(match binding.kind {
        EvaluatorKind::BuiltinFiltering => eval_filtering(&gt.rows, &pred.rows, id),
        EvaluatorKind::BuiltinRefinement => eval_refinement(
            &gt.rows,
            &pred.rows,
            id,
            p.text_field.as_deref().unwrap_or("text"),
            p.normalize_whitespace.unwrap_or(true),
        ),
        EvaluatorKind::BuiltinImputation => {
            let raw = load_reference(files.raw)?;
            if raw.rows.len() != gt.rows.len() || raw.columns.len() != gt.columns.len() {
                return Err(Error::Evaluation(format!(
                    "raw input {} does not share the ground truth's shape",
                    files.raw.display()
                )));
            }
            eval_imputation(&pred, &gt, &raw, p.atol.unwrap_or(DEFAULT_ATOL))
        }
        EvaluatorKind::BuiltinDedup => eval_dedup(&gt.rows, &pred.rows, id),
        EvaluatorKind::BuiltinIntegration => eval_integration(&gt.columns, &gt.rows, &pred.rows),
        EvaluatorKind::BuiltinClassification => eval_classification(
            &gt.rows,
            &pred.rows,
            id,
            p.label_field.as_deref().unwrap_or("label"),
        ),
        EvaluatorKind::Script => unreachable!("handled above"),
    })
}

fn score_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"["']eval_score["']\s*:\s*["']?([-+0-9.eE]+)["']?"#).expect("static regex")
    })
}

/// Reads the last `eval_score` an evaluation script printed.
pub fn parse_eval_score(stdout: &str) -> Option<f64> {
    score_pattern()
        .captures_iter(stdout)
        .last()
        .and_then(|c| c[1].parse::<f64>().ok())
}

fn staged_as(stem: &str, path: &Path) -> StagedFile {
    let ext = DataFormat::from_path(path).map_or("dat", DataFormat::as_str);
    StagedFile::named(&format!("{stem}.{ext}"), path)
}

/// Runs an evaluation script in the sandbox with the three files staged as
/// `inputs/ground_truth.<ext>`, `inputs/prediction.<ext>` and
/// `inputs/raw.<ext>`.
pub fn run_eval_script(script: &Path, files: &EvalFiles<'_>, sandbox: &Sandbox) -> Result<Verdict> {
    let source = std::fs::read_to_string(script).map_err(|e| {
        Error::Evaluation(format!(
            "evaluation script {} unavailable: {e}",
            script.display()
        ))
    })?;
    if !files.prediction.is_file() {
        return Ok(Verdict::zero("prediction file is missing"));
    }
    let artifact = CodeArtifact::python("eval", &source);
    let staged = [
        staged_as("ground_truth", files.ground_truth),
        staged_as("prediction", files.prediction),
        staged_as("raw", files.raw),
    ];
    let run = sandbox.run(&artifact, &staged)?;
    if run.outcome.status != ExecStatus::Ok {
        return Ok(Verdict::zero(format!(
            "evaluation script ended with {:?}: {}",
            run.outcome.status,
            run.outcome.stderr.lines().last().unwrap_or("")
        )));
    }
    match parse_eval_score(&run.outcome.stdout) {
        Some(s) if (0.0..=1.0).contains(&s) => Ok(Verdict {
            score: s,
            reason: (s < 1.0).then(|| format!("evaluation script scored {s}")),
        }),
        Some(s) => Ok(Verdict::zero(format!(
            "evaluation script printed out-of-range score {s}"
        ))),
        None => Ok(Verdict::zero("evaluation script printed no eval_score")),
    }
}

/// Scores a prediction for any task of a pack. DAG-level tasks apply each
/// subtask's evaluator to the final output and combine the scores with the
/// weights of [`dag_weights`].
pub fn evaluate_task(
    pack: &TaskPack,
    task: &TaskSpec,
    prediction: &Path,
    sandbox: &Sandbox,
) -> Result<Verdict> {
    let gt = pack.ground_truth_path(task);
    let raw: PathBuf = pack
        .input_paths(task)
        .into_iter()
        .next()
        .ok_or_else(|| Error::Evaluation(format!("task `{}` has no inputs", task.id)))?;
    let files = EvalFiles {
        ground_truth: &gt,
        prediction,
        raw: &raw,
    };
    if task.level == Level::Operator {
        return evaluate_binding(&task.evaluator, &files, &pack.task_dir(&task.id), sandbox);
    }
    let steps = task.dag_composition.as_deref().unwrap_or_default();
    let mut scores = Vec::with_capacity(steps.len());
    let mut notes = Vec::new();
    for step in steps {
        let sub = pack.task(&step.subtask).ok_or_else(|| {
            Error::Evaluation(format!(
                "unknown subtask `{}` in `{}`",
                step.subtask, task.id
            ))
        })?;
        let v = evaluate_binding(&sub.evaluator, &files, &pack.task_dir(&sub.id), sandbox)?;
        if let Some(r) = &v.reason {
            notes.push(format!("{}: {r}", sub.id));
        }
        scores.push(v.score);
    }
    let frozen: Vec<f64> = steps.iter().map(|s| s.frozen_score).collect();
    let weights = dag_weights(&frozen, pack.alpha())?;
    let score = dag_score(&weights, &scores)?;
    Ok(Verdict {
        score,
        reason: (score < 1.0).then(|| {
            format!(
                "subtask scores {scores:?}, weights {:?}; {}",
                weights
                    .iter()
                    .map(|w| (w * 1e4).round() / 1e4)
                    .collect::<Vec<_>>(),
                notes.join("; ")
            )
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyResult {
    pub gt_score: f64,
    pub noisy_score: f64,
    pub pass: bool,
}

impl ConsistencyResult {
    pub fn new(gt_score: f64, noisy_score: f64) -> Self {
        ConsistencyResult {
            gt_score,
            noisy_score,
            pass: gt_score >= GT_FLOOR && noisy_score < NOISY_CEILING,
        }
    }
}

/// The benchmark gate: the ground truth must score 1.0 against itself and
/// the noisy primary input must score below 0.3.
pub fn consistency_check(
    pack: &TaskPack,
    task: &TaskSpec,
    sandbox: &Sandbox,
) -> Result<ConsistencyResult> {
    let gt = pack.ground_truth_path(task);
    let noisy = pack
        .input_paths(task)
        .into_iter()
        .next()
        .ok_or_else(|| Error::Evaluation(format!("task `{}` has no inputs", task.id)))?;
    let gt_score = evaluate_task(pack, task, &gt, sandbox)?.score;
    let noisy_score = evaluate_task(pack, task, &noisy, sandbox)?.score;
    Ok(ConsistencyResult::new(gt_score, noisy_score))
}
