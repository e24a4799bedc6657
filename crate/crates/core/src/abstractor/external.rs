//! Client side of the line-delimited JSON abstractor protocol.
//!
//! The child prints `{"protocol":"reflect-abs/1"}` on start-up, then answers
//! each request line `{"id","sentences","budget"}` with one response line
//! `{"id","summary"}` (or `{"id","error"}`), in order. One child serves one
//! request at a time; the pool spawns another child when all are busy.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROTOCOL: &str = "reflect-abs/1";
const STDERR_KEEP: usize = 2048;

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Handshake {
    pub protocol: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct AdapterRequest<'a> {
    pub id: &'a str,
    pub sentences: Vec<&'a str>,
    pub budget: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct AdapterResponse {
    pub id: String,
    #[serde(default)]
    pub summary: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
}

struct AdapterProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
}

impl AdapterProcess {
    fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::external(format!("cannot start `{command}`: {e}"), ""))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut stderr_pipe = child.stderr.take().expect("piped stderr");

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(n) = stderr_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|e| e.into_inner());
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > STDERR_KEEP {
                    let mut cut = s.len() - STDERR_KEEP;
                    while !s.is_char_boundary(cut) {
                        cut += 1;
                    }
                    s.drain(..cut);
                }
            }
        });

        let mut process = AdapterProcess {
            child,
            stdin,
            lines,
            stderr,
        };
        let first = process.read_line(timeout)?;
        match serde_json::from_str::<Handshake>(&first) {
            Ok(h) if h.protocol == PROTOCOL => Ok(process),
            _ => Err(process.fail(format!(
                "bad handshake {first:?}, expected {{\"protocol\":\"{PROTOCOL}\"}}"
            ))),
        }
    }

    fn stderr_excerpt(&self) -> String {
        // give the reader thread a moment to drain a dying child's last words
        thread::sleep(Duration::from_millis(20));
        self.stderr
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .trim()
            .to_string()
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::external(message, self.stderr_excerpt())
    }

    fn read_line(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(self.fail(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                Err(self.fail(format!("no response within {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.try_wait().ok().flatten();
                Err(self.fail(format!("process exited ({status:?})")))
            }
        }
    }

    fn request(&mut self, req: &AdapterRequest<'_>, timeout: Duration) -> Result<String> {
        let mut line = serde_json::to_string(req)?;
        line.push('\n');
        if let Err(e) = self
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
        {
            return Err(self.fail(format!("write failed: {e}")));
        }
        let reply = self.read_line(timeout)?;
        let resp: AdapterResponse = serde_json::from_str(&reply)
            .map_err(|e| self.fail(format!("malformed response {reply:?}: {e}")))?;
        if resp.id != req.id {
            return Err(self.fail(format!(
                "response id {:?} does not match request id {:?}",
                resp.id, req.id
            )));
        }
        match (resp.summary, resp.error) {
            (_, Some(err)) => Err(self.fail(format!("adapter error for {:?}: {err}", req.id))),
            (Some(summary), None) => Ok(summary),
            (None, None) => Err(self.fail("response has neither summary nor error")),
        }
    }
}

impl Drop for AdapterProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Pool of adapter processes sharing one command line.
pub struct ExternalPool {
    command: String,
    timeout: Duration,
    idle: Mutex<Vec<AdapterProcess>>,
}

impl ExternalPool {
    pub fn new(command: impl Into<String>, timeout: Duration) -> Self {
        ExternalPool {
            command: command.into(),
            timeout,
            idle: Mutex::new(Vec::new()),
        }
    }

    /// Send one request; a child that misbehaves is discarded, not reused.
    pub fn summarize(&self, id: &str, sentences: &[&str], budget: usize) -> Result<String> {
        let idle = self.idle.lock().unwrap_or_else(|e| e.into_inner()).pop();
        let mut process = match idle {
            Some(p) => p,
            None => AdapterProcess::spawn(&self.command, self.timeout)?,
        };
        let req = AdapterRequest {
            id,
            sentences: sentences.to_vec(),
            budget,
        };
        let summary = process.request(&req, self.timeout)?;
        self.idle
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(process);
        Ok(summary)
    }

    /// Number of idle children currently held.
    pub fn idle_count(&self) -> usize {
        self.idle.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}
