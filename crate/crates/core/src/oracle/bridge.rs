//! Client side of the line-delimited JSON oracle bridge.
//!
//! The child process prints a handshake line `{"oracle": name, "version": 1}`
//! and then answers each request `{"id", "smiles"}` with `{"id", "score"}` or
//! `{"id", "error"}`, one JSON object per line.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Oracle, OracleError};
use crate::molgraph::Molecule;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSpec {
    /// Program and arguments of the child process.
    pub command: Vec<String>,
    /// Oracle name the child must announce in its handshake.
    pub name: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Times a dead or unresponsive child is restarted within one call.
    #[serde(default = "default_restarts")]
    pub restarts: u32,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_restarts() -> u32 {
    1
}

#[derive(Debug, Serialize)]
struct Request<'a> {
    id: u64,
    smiles: &'a str,
}

#[derive(Debug, Deserialize)]
struct Response {
    id: u64,
    score: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Handshake {
    oracle: Option<String>,
    version: Option<u32>,
    error: Option<String>,
}

enum Failure {
    Transport(String),
    Scoring(String),
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    next_id: u64,
}

impl Process {
    fn start(spec: &BridgeSpec) -> Result<Process, String> {
        let (program, args) = spec
            .command
            .split_first()
            .ok_or_else(|| "empty bridge command".to_string())?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot start {program}: {e}"))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let process = Process {
            child,
            stdin,
            lines: rx,
            next_id: 0,
        };
        let line = process.recv(timeout(spec))?;
        let hs: Handshake =
            serde_json::from_str(&line).map_err(|e| format!("bad handshake {line:?}: {e}"))?;
        if let Some(err) = hs.error {
            return Err(format!("bridge refused to start: {err}"));
        }
        if hs.oracle.as_deref() != Some(spec.name.as_str()) || hs.version != Some(PROTOCOL_VERSION) {
            return Err(format!(
                "handshake mismatch: expected oracle {:?} version {PROTOCOL_VERSION}, got {line}",
                spec.name
            ));
        }
        Ok(process)
    }

    fn recv(&self, wait: Duration) -> Result<String, String> {
        match self.lines.recv_timeout(wait) {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err(format!("no reply within {wait:?}")),
            Err(RecvTimeoutError::Disconnected) => Err("bridge process exited".to_string()),
        }
    }

    fn request(&mut self, smiles: &str, wait: Duration) -> Result<f64, Failure> {
        self.next_id += 1;
        let id = self.next_id;
        let mut line = serde_json::to_string(&Request { id, smiles }).expect("serializable");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Failure::Transport(format!("write failed: {e}")))?;
        let deadline = Instant::now() + wait;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let reply = self.recv(left).map_err(Failure::Transport)?;
            let resp: Response = serde_json::from_str(&reply)
                .map_err(|e| Failure::Transport(format!("malformed reply {reply:?}: {e}")))?;
            if resp.id != id {
                log::warn!("bridge reply for stale request {} ignored", resp.id);
                continue;
            }
            return match (resp.score, resp.error) {
                (_, Some(err)) => Err(Failure::Scoring(err)),
                (Some(s), None) if s.is_finite() => Ok(s),
                (Some(s), None) => Err(Failure::Scoring(format!("non-finite score {s}"))),
                (None, None) => Err(Failure::Transport(format!("reply without score: {reply}"))),
            };
        }
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn timeout(spec: &BridgeSpec) -> Duration {
    Duration::from_secs_f64(spec.timeout_secs.max(0.001))
}

/// Oracle served by a child process. Requests are serialized over one
/// child; a crashed or silent child is restarted up to `restarts` times
/// per call before the call fails.
pub struct BridgeOracle {
    spec: BridgeSpec,
    process: Mutex<Option<Process>>,
}

impl BridgeOracle {
    /// Starts the child and checks its handshake.
    pub fn spawn(spec: BridgeSpec) -> Result<Self, OracleError> {
        if spec.timeout_secs.is_nan() || spec.timeout_secs <= 0.0 {
            return Err(OracleError::InvalidSpec("bridge timeout must be positive".into()));
        }
        let process = Process::start(&spec).map_err(|message| OracleError::Bridge {
            oracle: spec.name.clone(),
            message,
        })?;
        Ok(BridgeOracle {
            spec,
            process: Mutex::new(Some(process)),
        })
    }

    pub fn spec(&self) -> &BridgeSpec {
        &self.spec
    }

    pub fn score_smiles(&self, smiles: &str) -> Result<f64, OracleError> {
        let mut guard = self.process.lock().unwrap_or_else(|p| p.into_inner());
        let mut last = String::new();
        for attempt in 0..=self.spec.restarts {
            if guard.is_none() {
                log::warn!("restarting bridge {} (attempt {attempt})", self.spec.name);
                match Process::start(&self.spec) {
                    Ok(p) => *guard = Some(p),
                    Err(e) => {
                        last = e;
                        continue;
                    }
                }
            }
            let process = guard.as_mut().expect("started");
            match process.request(smiles, timeout(&self.spec)) {
                Ok(score) => return Ok(score),
                Err(Failure::Scoring(message)) => {
                    return Err(OracleError::Scoring {
                        oracle: self.spec.name.clone(),
                        message,
                    })
                }
                Err(Failure::Transport(message)) => {
                    log::warn!("bridge {} failed: {message}", self.spec.name);
                    last = message;
                    *guard = None;
                }
            }
        }
        Err(OracleError::Bridge {
            oracle: self.spec.name.clone(),
            message: last,
        })
    }
}

impl Oracle for BridgeOracle {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn score(&self, _mol: &Molecule, smiles: &str) -> Result<f64, OracleError> {
        self.score_smiles(smiles)
    }
}
