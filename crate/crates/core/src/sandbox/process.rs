use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::trace::parse_traceback;
use crate::error::{Error, Result};
use crate::executor::CodeArtifact;

/// Captured bytes kept per stream.
pub const STREAM_CAP: usize = 64 * 1024;

const POLL: Duration = Duration::from_millis(10);
const NOBODY: libc::uid_t = 65534;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Network {
    Denied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxLimits {
    pub wall_clock_s: f64,
    /// Cap on the bytes a script may write under `out/`.
    pub max_output_bytes: u64,
    pub network: Network,
    /// Working-directory subfolders the script may write to.
    pub writable_dirs: Vec<String>,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        SandboxLimits {
            wall_clock_s: 120.0,
            max_output_bytes: 64 * 1024 * 1024,
            network: Network::Denied,
            writable_dirs: vec!["out".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    Error,
    Timeout,
    ResourceKill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub stdout_truncated: bool,
    pub stderr_truncated: bool,
    pub duration_s: f64,
    pub stack_trace: Option<String>,
    /// 1-based inclusive line range of the failing statement in the script.
    pub offending_span: Option<(u32, u32)>,
    /// Set when a staged input or its original changed during the run.
    pub inputs_tampered: bool,
}

/// Command line for one language tag; the script file name is appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpreter {
    pub command: Vec<String>,
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpreterTable(pub BTreeMap<String, Interpreter>);

impl Default for InterpreterTable {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        map.insert(
            "python".to_string(),
            Interpreter {
                command: vec!["python3".into(), "-B".into(), "-s".into()],
                file_name: "script.py".into(),
            },
        );
        InterpreterTable(map)
    }
}

/// A file copied into `inputs/<name>` before the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedFile {
    pub name: String,
    pub source: PathBuf,
}

impl StagedFile {
    pub fn from_path(path: &Path) -> Self {
        StagedFile {
            name: crate::table::file_name(path),
            source: path.to_path_buf(),
        }
    }

    pub fn named(name: &str, path: &Path) -> Self {
        StagedFile {
            name: name.to_string(),
            source: path.to_path_buf(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SandboxRun {
    pub outcome: ExecutionOutcome,
    /// Top-level files left in `out/`, by name.
    pub outputs: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Clone, Default)]
pub struct Sandbox {
    pub limits: SandboxLimits,
    pub interpreters: InterpreterTable,
}

/// Runs one artifact with the default interpreter table.
pub fn run_sandboxed(
    artifact: &CodeArtifact,
    inputs: &[StagedFile],
    limits: &SandboxLimits,
) -> Result<SandboxRun> {
    Sandbox {
        limits: limits.clone(),
        interpreters: InterpreterTable::default(),
    }
    .run(artifact, inputs)
}

fn sha256_file(path: &Path) -> Result<[u8; 32]> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).into())
}

fn find_program(program: &str) -> Option<PathBuf> {
    if program.contains('/') {
        let p = PathBuf::from(program);
        return p.is_file().then_some(p);
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).collect::<Vec<_>>())
        .unwrap_or_default()
        .into_iter()
        .chain(["/usr/local/bin", "/usr/bin", "/bin"].map(PathBuf::from))
        .map(|dir| dir.join(program))
        .find(|p| p.is_file())
}

fn dir_size(path: &Path) -> u64 {
    let Ok(entries) = fs::read_dir(path) else {
        return 0;
    };
    entries
        .filter_map(|e| e.ok())
        .map(|e| match e.metadata() {
            Ok(m) if m.is_dir() => dir_size(&e.path()),
            Ok(m) => m.len(),
            Err(_) => 0,
        })
        .sum()
}

#[derive(Default)]
struct Capture {
    kept: Vec<u8>,
    total: usize,
}

fn spawn_reader(
    mut stream: impl Read + Send + 'static,
) -> (Arc<Mutex<Capture>>, mpsc::Receiver<()>) {
    let capture = Arc::new(Mutex::new(Capture::default()));
    let (done_tx, done_rx) = mpsc::channel();
    let sink = capture.clone();
    std::thread::spawn(move || {
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let mut c = sink.lock().expect("capture lock");
                    let room = STREAM_CAP.saturating_sub(c.kept.len());
                    c.kept.extend_from_slice(&buf[..n.min(room)]);
                    c.total += n;
                }
            }
        }
        let _ = done_tx.send(());
    });
    (capture, done_rx)
}

fn finish_capture(capture: &Arc<Mutex<Capture>>, done: &mpsc::Receiver<()>) -> (String, bool) {
    // A grandchild that escaped the process group may hold the pipe open;
    // do not wait for it forever.
    let _ = done.recv_timeout(Duration::from_secs(1));
    let c = capture.lock().expect("capture lock");
    let mut text = String::from_utf8_lossy(&c.kept).into_owned();
    let truncated = c.total > c.kept.len();
    if truncated {
        text.push_str(&format!(
            "\n[truncated: {} of {} bytes omitted]\n",
            c.total - c.kept.len(),
            c.total
        ));
    }
    (text, truncated)
}

fn kill_group(pgid: i32) {
    // SAFETY: plain syscall on a process group we created.
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
}

impl Sandbox {
    pub fn new(limits: SandboxLimits) -> Self {
        Sandbox {
            limits,
            interpreters: InterpreterTable::default(),
        }
    }

    /// Resolves the interpreter for a language tag, failing with a
    /// configuration error when it is unknown or not installed.
    pub fn interpreter(&self, tag: &str) -> Result<(PathBuf, &Interpreter)> {
        let interp = self.interpreters.0.get(tag).ok_or_else(|| {
            Error::Config(format!(
                "no interpreter configured for language tag `{tag}`"
            ))
        })?;
        let program = interp
            .command
            .first()
            .ok_or_else(|| Error::Config(format!("empty interpreter command for `{tag}`")))?;
        let path = find_program(program).ok_or_else(|| {
            Error::Config(format!(
                "interpreter `{program}` for `{tag}` is not installed"
            ))
        })?;
        Ok((path, interp))
    }

    /// Runs a script in a fresh working directory holding `inputs/` (copies),
    /// `out/` and `run.log`. The child runs in its own process group without
    /// network access, with a scrubbed environment, and, when the harness
    /// runs as root, as an unprivileged user that may only write to `out/`.
    pub fn run(&self, artifact: &CodeArtifact, inputs: &[StagedFile]) -> Result<SandboxRun> {
        let (program, interp) = self.interpreter(&artifact.language_tag)?;

        let mut originals = Vec::with_capacity(inputs.len());
        for f in inputs {
            originals.push(sha256_file(&f.source)?);
        }

        let work = tempfile::Builder::new()
            .prefix("govdag-sandbox-")
            .tempdir()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let root = work.path();
        let in_dir = root.join("inputs");
        fs::create_dir(&in_dir).map_err(|e| Error::io(&in_dir, e))?;
        for f in inputs {
            let dest = in_dir.join(&f.name);
            fs::copy(&f.source, &dest).map_err(|e| Error::io(&dest, e))?;
            fs::set_permissions(&dest, fs::Permissions::from_mode(0o444))
                .map_err(|e| Error::io(&dest, e))?;
        }
        fs::set_permissions(&in_dir, fs::Permissions::from_mode(0o555))
            .map_err(|e| Error::io(&in_dir, e))?;
        let privileged = unsafe { libc::geteuid() } == 0;
        for dir in &self.limits.writable_dirs {
            let d = root.join(dir);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            fs::set_permissions(&d, fs::Permissions::from_mode(0o755))
                .map_err(|e| Error::io(&d, e))?;
            if privileged {
                std::os::unix::fs::chown(&d, Some(NOBODY), Some(NOBODY))
                    .map_err(|e| Error::io(&d, e))?;
            }
        }
        let out_dir = root.join("out");
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        let script = root.join(&interp.file_name);
        fs::write(&script, &artifact.source).map_err(|e| Error::io(&script, e))?;
        fs::set_permissions(&script, fs::Permissions::from_mode(0o444))
            .map_err(|e| Error::io(&script, e))?;
        fs::set_permissions(root, fs::Permissions::from_mode(0o755))
            .map_err(|e| Error::io(root, e))?;

        let mut cmd = Command::new(&program);
        cmd.args(&interp.command[1..])
            .arg(&interp.file_name)
            .current_dir(root)
            .env_clear()
            .env("PATH", "/usr/local/bin:/usr/bin:/bin")
            .env("HOME", root)
            .env("LANG", "C.UTF-8")
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONUTF8", "1")
            .env("PYTHONIOENCODING", "utf-8")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let fsize = self.limits.max_output_bytes.saturating_add(1);
        // SAFETY: the closure only issues async-signal-safe syscalls.
        unsafe {
            cmd.pre_exec(move || {
                if libc::setpgid(0, 0) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
                let size = libc::rlimit {
                    rlim_cur: fsize as libc::rlim_t,
                    rlim_max: fsize as libc::rlim_t,
                };
                libc::setrlimit(libc::RLIMIT_FSIZE, &size);
                let zero = libc::rlimit {
                    rlim_cur: 0,
                    rlim_max: 0,
                };
                libc::setrlimit(libc::RLIMIT_CORE, &zero);
                if privileged {
                    libc::unshare(libc::CLONE_NEWNET);
                    if libc::setgroups(0, std::ptr::null()) != 0
                        || libc::setgid(NOBODY) != 0
                        || libc::setuid(NOBODY) != 0
                    {
                        return Err(std::io::Error::last_os_error());
                    }
                } else {
                    // Best effort: unprivileged user namespaces may be off.
                    libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET);
                }
                Ok(())
            });
        }

        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Config(format!(
                    "cannot start interpreter {}: {e}",
                    program.display()
                ))
            } else {
                Error::io(&program, e)
            }
        })?;
        let pgid = child.id() as i32;
        let (out_cap, out_done) = spawn_reader(child.stdout.take().expect("piped"));
        let (err_cap, err_done) = spawn_reader(child.stderr.take().expect("piped"));

        let deadline = Duration::from_secs_f64(self.limits.wall_clock_s.max(0.0));
        let mut killed: Option<ExecStatus> = None;
        let mut polls = 0u32;
        let status = loop {
            match child.try_wait().map_err(|e| Error::io(&program, e))? {
                Some(status) => break status,
                None => {
                    if started.elapsed() >= deadline {
                        kill_group(pgid);
                        killed.get_or_insert(ExecStatus::Timeout);
                    } else if polls % 5 == 0 && dir_size(&out_dir) > self.limits.max_output_bytes {
                        kill_group(pgid);
                        killed.get_or_insert(ExecStatus::ResourceKill);
                    }
                    polls += 1;
                    std::thread::sleep(POLL);
                }
            }
        };
        let duration_s = started.elapsed().as_secs_f64();
        // Reap anything the script left running in its group.
        kill_group(pgid);

        let (stdout, stdout_truncated) = finish_capture(&out_cap, &out_done);
        let (stderr, stderr_truncated) = finish_capture(&err_cap, &err_done);
        // Interpreters report absolute script paths; the working directory
        // is random, so strip it to keep diagnostics reproducible.
        let prefix = format!("{}/", root.display());
        let (stdout, stderr) = (stdout.replace(&prefix, ""), stderr.replace(&prefix, ""));
        let exit_code = status
            .code()
            .unwrap_or_else(|| 128 + status.signal().unwrap_or(0));

        let out_bytes = dir_size(&out_dir);
        let status = match killed {
            Some(s) => s,
            None if out_bytes > self.limits.max_output_bytes => ExecStatus::ResourceKill,
            None if exit_code == 0 => ExecStatus::Ok,
            None => ExecStatus::Error,
        };

        let mut tampered = false;
        for (f, before) in inputs.iter().zip(&originals) {
            let staged = in_dir.join(&f.name);
            let staged_ok = sha256_file(&staged).map(|h| h == *before).unwrap_or(false);
            let original_ok = sha256_file(&f.source)
                .map(|h| h == *before)
                .unwrap_or(false);
            if !staged_ok || !original_ok {
                tracing::warn!(input = %f.source.display(), "input changed during sandbox run");
                tampered = true;
            }
        }

        let mut outputs = BTreeMap::new();
        if let Ok(entries) = fs::read_dir(&out_dir) {
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            for p in files {
                if let Ok(bytes) = fs::read(&p) {
                    outputs.insert(crate::table::file_name(&p), bytes);
                }
            }
        }

        let log = root.join("run.log");
        let _ = fs::write(&log, format!("{stdout}{stderr}"));

        let (stack_trace, offending_span) = if artifact.language_tag == "python" {
            match parse_traceback(&stderr, &interp.file_name) {
                Some((trace, span)) => (Some(trace), span),
                None => (None, None),
            }
        } else {
            (None, None)
        };
        // Restore permissions so the temporary directory can be removed.
        let _ = fs::set_permissions(&in_dir, fs::Permissions::from_mode(0o755));

        Ok(SandboxRun {
            outcome: ExecutionOutcome {
                status,
                exit_code,
                stdout,
                stderr,
                stdout_truncated,
                stderr_truncated,
                duration_s,
                stack_trace,
                offending_span,
                inputs_tampered: tampered,
            },
            outputs,
        })
    }
}
