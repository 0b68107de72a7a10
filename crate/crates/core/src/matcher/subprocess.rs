use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::{MatcherError, MatcherRequest, MatcherResponse, PointMatcher};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
const PROTOCOL_VERSION: u64 = 1;

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    /// Set once the stream can no longer be trusted (timeout, violation).
    broken: Option<String>,
}

/// Client for an external matcher process speaking newline-delimited JSON on
/// its stdin/stdout. Crops are exchanged as PNG files in a per-session
/// directory under `A2PM_TMPDIR` (or the system temp directory). One request
/// is in flight at a time.
pub struct SubprocessMatcher {
    session: Mutex<Session>,
    name: String,
    timeout: Duration,
    dir: tempfile::TempDir,
}

impl std::fmt::Debug for SubprocessMatcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessMatcher")
            .field("name", &self.name)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

fn temp_root() -> PathBuf {
    std::env::var_os("A2PM_TMPDIR")
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

impl SubprocessMatcher {
    /// Spawns `command` (shell-style quoting) and performs the handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, MatcherError> {
        let argv = shlex::split(command)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| MatcherError::InvalidRequest(format!("cannot parse matcher command {command:?}")))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let root = temp_root();
        std::fs::create_dir_all(&root)?;
        let dir = tempfile::Builder::new().prefix("a2pm-").tempdir_in(root)?;
        let mut session = Session {
            child,
            stdin,
            lines: rx,
            next_id: 0,
            broken: None,
        };

        session.send(&json!({"type": "hello", "version": PROTOCOL_VERSION}))?;
        let reply = session.receive(timeout)?;
        if reply.get("type").and_then(Value::as_str) != Some("hello") {
            return Err(session.poison(format!("expected hello reply, got {reply}")));
        }
        if reply.get("version").and_then(Value::as_u64) != Some(PROTOCOL_VERSION) {
            return Err(session.poison(format!("unsupported protocol version in {reply}")));
        }
        let name = reply.get("name").and_then(Value::as_str).unwrap_or("external").to_string();
        Ok(Self {
            session: Mutex::new(session),
            name,
            timeout,
            dir,
        })
    }

    /// Directory holding the exchanged crops.
    pub fn exchange_dir(&self) -> &Path {
        self.dir.path()
    }
}

impl Session {
    fn send(&mut self, v: &Value) -> Result<(), MatcherError> {
        let mut line = v.to_string();
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| self.exited(e.to_string()))
    }

    fn receive(&mut self, timeout: Duration) -> Result<Value, MatcherError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => serde_json::from_str(&line).map_err(|e| self.poison(format!("malformed reply: {e}"))),
            Ok(Err(e)) => Err(self.exited(e.to_string())),
            Err(RecvTimeoutError::Timeout) => {
                self.broken = Some(format!("timed out after {timeout:?}"));
                let _ = self.child.kill();
                Err(MatcherError::Timeout(timeout))
            }
            Err(RecvTimeoutError::Disconnected) => Err(self.exited("stdout closed".into())),
        }
    }

    fn exited(&mut self, what: String) -> MatcherError {
        let status = self
            .child
            .try_wait()
            .ok()
            .flatten()
            .map_or_else(|| what.clone(), |s| format!("{what} ({s})"));
        self.broken = Some(status.clone());
        MatcherError::ProcessExited(status)
    }

    fn poison(&mut self, msg: String) -> MatcherError {
        self.broken = Some(msg.clone());
        let _ = self.child.kill();
        MatcherError::Protocol(msg)
    }
}

type ParsedMatches = (Vec<[f64; 4]>, Option<Vec<f64>>);

fn parse_matches(reply: &Value, id: u64) -> Result<ParsedMatches, String> {
    let ty = reply.get("type").and_then(Value::as_str);
    if reply.get("id").and_then(Value::as_u64) != Some(id) {
        return Err(format!("reply id does not echo request {id}: {reply}"));
    }
    match ty {
        Some("matches") => {}
        _ => return Err(format!("unexpected reply type in {reply}")),
    }
    let raw = reply
        .get("matches")
        .and_then(Value::as_array)
        .ok_or("reply has no matches array")?;
    let mut pairs = Vec::with_capacity(raw.len());
    for m in raw {
        let v: Vec<f64> = m
            .as_array()
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default();
        let [x0, y0, x1, y1] = v[..] else {
            return Err(format!("match entry is not four numbers: {m}"));
        };
        pairs.push([x0, y0, x1, y1]);
    }
    let confidences = match reply.get("confidences") {
        None | Some(Value::Null) => None,
        Some(c) => {
            let c: Vec<f64> = c
                .as_array()
                .ok_or("confidences is not an array")?
                .iter()
                .map(|v| v.as_f64().ok_or("non-numeric confidence"))
                .collect::<Result<_, _>>()?;
            if c.len() != pairs.len() {
                return Err(format!("{} confidences for {} matches", c.len(), pairs.len()));
            }
            Some(c)
        }
    };
    Ok((pairs, confidences))
}

impl PointMatcher for SubprocessMatcher {
    fn match_pair(&self, req: &MatcherRequest) -> Result<MatcherResponse, MatcherError> {
        let mut s = self.session.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(why) = &s.broken {
            return Err(MatcherError::ProcessExited(why.clone()));
        }
        let id = s.next_id;
        s.next_id += 1;
        let (p0, p1) = (
            self.dir.path().join(format!("{id}-0.png")),
            self.dir.path().join(format!("{id}-1.png")),
        );
        req.image0.save(&p0)?;
        req.image1.save(&p1)?;
        let result = (|| {
            s.send(&json!({
                "type": "match",
                "id": id,
                "image0": p0,
                "image1": p1,
                "max_matches": req.max_matches,
            }))?;
            let reply = s.receive(self.timeout)?;
            if reply.get("type").and_then(Value::as_str) == Some("error") {
                if reply.get("id").and_then(Value::as_u64) != Some(id) {
                    return Err(s.poison(format!("error reply does not echo request {id}: {reply}")));
                }
                let msg = reply.get("message").and_then(Value::as_str).unwrap_or("unspecified");
                return Err(MatcherError::Remote(msg.to_string()));
            }
            let (pairs, conf) = parse_matches(&reply, id).map_err(|m| s.poison(m))?;
            Ok(MatcherResponse::from_crop(&pairs, conf, &req.transform0, &req.transform1))
        })();
        let _ = std::fs::remove_file(&p0);
        let _ = std::fs::remove_file(&p1);
        result
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

impl Drop for SubprocessMatcher {
    fn drop(&mut self) {
        let s = self.session.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = s.child.kill();
        let _ = s.child.wait();
    }
}
