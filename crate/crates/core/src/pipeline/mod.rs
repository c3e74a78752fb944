//! End-to-end runs: planner, executor and evaluator over a task pack, plus
//! the benchmark build and the library self-test.

mod build;
mod run;
mod selftest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use build::{
    bench_build, bench_build_with, BuildReport, Quarantined, QUARANTINE_DIR, QUARANTINE_INDEX,
};
pub use run::{plan_task, run_pack, run_pack_with, run_task, PackRun, RunContext, TaskOutcome};
pub use selftest::{asset_selftest, SelftestResult, SelftestStatus};

use crate::error::{Error, Result};
use crate::executor::DEFAULT_K;
use crate::gateway::{
    CompletionParams, LiveGateway, LiveSettings, LlmGateway, MockGateway, ReplayGateway,
};
use crate::metrics::DEFAULT_TAU;
use crate::model::TaskSpec;
use crate::sandbox::{SandboxLimits, DEFAULT_MAX_ITER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Live,
    Mock,
    Replay,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "live" => Ok(Backend::Live),
            "mock" => Ok(Backend::Mock),
            "replay" => Ok(Backend::Replay),
            other => Err(format!("unknown backend `{other}` (live, mock, replay)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ablation {
    #[default]
    None,
    /// One script per task, generated straight from the objective.
    NoPlanner,
    /// Code generation without library exemplars.
    NoRag,
}

impl Ablation {
    /// Transcript subdirectory for this mode.
    pub fn variant(self) -> &'static str {
        match self {
            Ablation::None => "full",
            Ablation::NoPlanner => "no_planner",
            Ablation::NoRag => "no_rag",
        }
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Ablation::None),
            "no_planner" | "no-planner" => Ok(Ablation::NoPlanner),
            "no_rag" | "no-rag" => Ok(Ablation::NoRag),
            other => Err(format!(
                "unknown ablation `{other}` (none, no_planner, no_rag)"
            )),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::None => "none",
            Ablation::NoPlanner => "no_planner",
            Ablation::NoRag => "no_rag",
        })
    }
}

/// Opens the backend for one task.
pub type GatewayOpener<'a> = dyn Fn(&TaskSpec) -> Result<Box<dyn LlmGateway>> + Sync + 'a;

/// Transcript subdirectory used by the benchmark build.
pub const BENCH_VARIANT: &str = "bench";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: Backend,
    pub model_id: String,
    pub limits: SandboxLimits,
    pub max_iter: u32,
    pub k: usize,
    pub ablation: Ablation,
    pub parallelism: usize,
    /// Root of `<variant>/<task id>.jsonl` transcripts; required for replay.
    pub transcripts: Option<PathBuf>,
    /// When set, every task's conversation is saved under this root.
    pub record: Option<PathBuf>,
    pub tau: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: Backend::Replay,
            model_id: CompletionParams::default().model_id,
            limits: SandboxLimits::default(),
            max_iter: DEFAULT_MAX_ITER,
            k: DEFAULT_K,
            ablation: Ablation::None,
            parallelism: 1,
            transcripts: None,
            record: None,
            tau: DEFAULT_TAU,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.backend == Backend::Replay && self.transcripts.is_none() {
            return Err(Error::Config(
                "the replay backend needs a transcript directory".into(),
            ));
        }
        if self.limits.wall_clock_s.is_nan() || self.limits.wall_clock_s <= 0.0 {
            return Err(Error::Config(
                "the wall-clock limit must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> CompletionParams {
        CompletionParams {
            model_id: self.model_id.clone(),
            ..CompletionParams::default()
        }
    }

    /// Retrieval depth actually used: zero without retrieval.
    pub fn effective_k(&self) -> usize {
        if self.ablation == Ablation::NoRag {
            0
        } else {
            self.k
        }
    }
}

pub fn transcript_path(root: &Path, variant: &str, task_id: &str) -> PathBuf {
    root.join(variant).join(format!("{task_id}.jsonl"))
}

/// Opens the backend for one task. Replay reads that task's transcript, so
/// concurrent tasks never share a cursor.
pub fn open_gateway(cfg: &RunConfig, variant: &str, task_id: &str) -> Result<Box<dyn LlmGateway>> {
    Ok(match cfg.backend {
        Backend::Live => Box::new(LiveGateway::new(LiveSettings::from_env()?)),
        Backend::Mock => Box::new(MockGateway::echo()),
        Backend::Replay => {
            let root = cfg.transcripts.as_deref().ok_or_else(|| {
                Error::Config("the replay backend needs a transcript directory".into())
            })?;
            let path = transcript_path(root, variant, task_id);
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "no transcript at {}",
                    path.display()
                )));
            }
            Box::new(ReplayGateway::load(&path)?)
        }
    })
}

/// Whether an error ends just the current task rather than the whole run.
pub(crate) fn is_task_failure(e: &Error) -> bool {
    match e {
        Error::Gateway(g) => !matches!(g, crate::gateway::GatewayError::Config(_)),
        Error::Protocol { .. } | Error::Planning(_) => true,
        _ => false,
    }
}
