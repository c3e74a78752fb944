//! Task packs on disk.
//!
//! ```text
//! <pack>/pack.toml                      id, alpha, frozen scores
//! <pack>/tasks/<id>/manifest.json       one TaskSpec
//! <pack>/tasks/<id>/data/gt/...         ground truth
//! <pack>/tasks/<id>/data/noisy/...      pipeline inputs
//! <pack>/tasks/<id>/eval_script.py      optional, for kind=script
//! ```
//!
//! Paths inside a manifest are relative to the task directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Level, TaskSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PACK_FILE: &str = "pack.toml";
pub const TASKS_DIR: &str = "tasks";

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackConfig {
    pub id: String,
    /// Weighting strength for DAG-level scores.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Reference score of each operator-level task, copied into DAG
    /// compositions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub frozen_scores: BTreeMap<String, f64>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone)]
pub struct TaskPack {
    pub root: PathBuf,
    pub config: PackConfig,
    pub tasks: Vec<TaskSpec>,
}

impl TaskPack {
    pub fn open(root: &Path) -> Result<TaskPack> {
        let config = load_pack_config(root)?;
        let tasks = load_task_pack(root)?;
        Ok(TaskPack {
            root: root.to_path_buf(),
            config,
            tasks,
        })
    }

    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn task_dir(&self, id: &str) -> PathBuf {
        self.root.join(TASKS_DIR).join(id)
    }

    /// Absolute path of a manifest-relative file reference.
    pub fn resolve(&self, task: &TaskSpec, rel: &str) -> PathBuf {
        self.task_dir(&task.id).join(rel)
    }

    pub fn input_paths(&self, task: &TaskSpec) -> Vec<PathBuf> {
        task.inputs.iter().map(|i| self.resolve(task, i)).collect()
    }

    pub fn ground_truth_path(&self, task: &TaskSpec) -> PathBuf {
        self.resolve(task, &task.ground_truth)
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }
}

pub fn load_pack_config(root: &Path) -> Result<PackConfig> {
    let path = root.join(PACK_FILE);
    if !path.exists() {
        return Ok(PackConfig {
            id: root
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "pack".into()),
            alpha: DEFAULT_ALPHA,
            frozen_scores: BTreeMap::new(),
        });
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let config: PackConfig = toml::from_str(&text).map_err(|e| Error::Manifest {
        file: path.clone(),
        field: e
            .span()
            .map(|s| text[s].to_string())
            .unwrap_or_else(|| "?".into()),
        message: e.message().to_string(),
    })?;
    if config.alpha.is_nan() || config.alpha < 0.0 {
        return Err(Error::Manifest {
            file: path,
            field: "alpha".into(),
            message: format!("alpha must be >= 0, got {}", config.alpha),
        });
    }
    for (id, score) in &config.frozen_scores {
        if !(0.0..=1.0).contains(score) {
            return Err(Error::Manifest {
                file: path,
                field: format!("frozen_scores.{id}"),
                message: format!("frozen score {score} outside [0, 1]"),
            });
        }
    }
    Ok(config)
}

pub fn write_pack_config(root: &Path, config: &PackConfig) -> Result<()> {
    let path = root.join(PACK_FILE);
    let text = toml::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Parses one manifest, naming the offending field on failure.
pub fn parse_manifest(path: &Path, text: &str) -> Result<TaskSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: TaskSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Manifest {
        file: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    spec.validate().map_err(|v| Error::Manifest {
        file: path.to_path_buf(),
        field: v.field.to_string(),
        message: v.message,
    })?;
    Ok(spec)
}

pub fn read_manifest(path: &Path) -> Result<TaskSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(path, &text)
}

pub fn manifest_json(spec: &TaskSpec) -> String {
    let mut text = serde_json::to_string_pretty(spec).expect("TaskSpec serializes");
    text.push('\n');
    text
}

pub fn write_manifest(dir: &Path, spec: &TaskSpec) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest_json(spec)).map_err(|e| Error::io(&path, e))
}

/// Loads every task manifest under `<root>/tasks`, sorted by id.
///
/// A directory without a `tasks/` folder is an empty pack.
pub fn load_task_pack(root: &Path) -> Result<Vec<TaskSpec>> {
    let tasks_dir = root.join(TASKS_DIR);
    if !tasks_dir.is_dir() {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "pack directory not found"),
            ));
        }
        return Ok(Vec::new());
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(&tasks_dir)
        .map_err(|e| Error::io(&tasks_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();

    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut tasks = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let path = dir.join(MANIFEST_FILE);
        let spec = read_manifest(&path)?;
        if let Some(first) = seen.get(&spec.id) {
            return Err(Error::Conflict {
                id: spec.id.clone(),
                first: first.clone(),
                second: path,
            });
        }
        seen.insert(spec.id.clone(), path);
        tasks.push(spec);
    }

    for task in tasks.iter().filter(|t| t.level == Level::Dag) {
        for step in task.dag_composition.iter().flatten() {
            let known = tasks
                .iter()
                .any(|t| t.id == step.subtask && t.level == Level::Operator);
            if !known {
                return Err(Error::Manifest {
                    file: seen[&task.id].clone(),
                    field: "dag_composition.subtask".into(),
                    message: format!(
                        "`{}` is not an operator-level task of this pack",
                        step.subtask
                    ),
                });
            }
        }
    }

    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(tasks)
}
