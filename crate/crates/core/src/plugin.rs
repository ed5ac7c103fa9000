//! Line-delimited JSON over stdio for external evaluators.
//!
//! The engine writes one JSON document and a newline to the child's stdin,
//! closes it, and reads one JSON object from the first non-empty stdout line.
//! A nonzero exit, malformed output or an elapsed timeout is a failure.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const TIMEOUT_ENV: &str = "PARETO_NAS_PLUGIN_TIMEOUT_MS";
pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;

/// Timeout from `PARETO_NAS_PLUGIN_TIMEOUT_MS`, falling back to 60 s.
pub fn default_timeout_ms() -> u64 {
    std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_TIMEOUT_MS)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
}

impl PluginCommand {
    pub fn new(
        program: impl Into<String>,
        args: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        PluginCommand {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
            timeout_ms: None,
        }
    }

    pub fn with_timeout_ms(mut self, ms: u64) -> Self {
        self.timeout_ms = Some(ms);
        self
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms.unwrap_or_else(default_timeout_ms))
    }

    /// Sends `request` and parses the reply. Errors are returned as a message.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        request: &Req,
        env: &[(&str, String)],
    ) -> std::result::Result<Resp, String> {
        let mut line =
            serde_json::to_string(request).map_err(|e| format!("encode request: {e}"))?;
        line.push('\n');
        let stdout = self.exchange(line.as_bytes(), env)?;
        let reply = stdout
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .ok_or_else(|| format!("`{}` produced no output", self.program))?;
        serde_json::from_str(reply).map_err(|e| format!("malformed reply {reply:?}: {e}"))
    }

    fn exchange(
        &self,
        input: &[u8],
        env: &[(&str, String)],
    ) -> std::result::Result<String, String> {
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        for (k, v) in env {
            cmd.env(k, v);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| format!("spawn `{}`: {e}", self.program))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = input.to_vec();
        // A child that never reads must not block us, so write from a thread.
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(&input);
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let deadline = Instant::now() + self.timeout();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!(
                        "`{}` timed out after {:?}",
                        self.program,
                        self.timeout()
                    ));
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err(format!("wait on `{}`: {e}", self.program)),
            }
        };
        let _ = writer.join();
        let out = reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(format!(
                "`{}` exited with {status}: {}",
                self.program,
                err.trim()
            ));
        }
        Ok(out)
    }
}
