//! Client side of the external-trainer protocol over a child process's stdio.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::{Message, PROTOCOL_VERSION};
use super::{check_len, Acquisition, EvalQuery, LossOracle, OracleCapabilities, QuerySizes};
use crate::error::{Error, OracleError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerEndpoint {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_version")]
    pub protocol_version: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_version() -> String {
    PROTOCOL_VERSION.to_string()
}

fn default_timeout() -> u64 {
    600
}

impl TrainerEndpoint {
    pub fn new(command: Vec<String>) -> Self {
        Self { command, protocol_version: default_version(), timeout_secs: default_timeout() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() {
            return Err(Error::Config("trainer command is empty".into()));
        }
        if self.protocol_version != PROTOCOL_VERSION {
            return Err(Error::Config(format!(
                "unsupported trainer protocol {:?}, expected {PROTOCOL_VERSION:?}",
                self.protocol_version
            )));
        }
        Ok(())
    }
}

/// A running trainer process. One request is in flight at a time.
pub struct TrainerOracle {
    ids: Vec<String>,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    next_id: u64,
}

impl std::fmt::Debug for TrainerOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainerOracle").field("ids", &self.ids).field("next_id", &self.next_id).finish()
    }
}

impl TrainerOracle {
    /// Launches the trainer and performs the hello handshake.
    pub fn connect(endpoint: &TrainerEndpoint, slice_ids: Vec<String>) -> Result<Self> {
        endpoint.validate()?;
        let mut child = Command::new(&endpoint.command[0])
            .args(&endpoint.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(OracleError::Launch)?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut oracle = Self {
            ids: slice_ids,
            child,
            stdin,
            lines: rx,
            timeout: Duration::from_secs(endpoint.timeout_secs),
            next_id: 1,
        };
        let hello = Message::Hello { version: PROTOCOL_VERSION.into(), id: None };
        match oracle.exchange(&hello)? {
            Message::Hello { version, .. } if version == PROTOCOL_VERSION => Ok(oracle),
            Message::Hello { version, .. } => {
                Err(OracleError::Protocol { message: format!("trainer speaks {version:?}"), raw: String::new() }.into())
            }
            other => Err(OracleError::Protocol { message: "expected hello".into(), raw: format!("{other:?}") }.into()),
        }
    }

    fn send(&mut self, msg: &Message) -> Result<(), OracleError> {
        let line = msg.to_line();
        if self.stdin.write_all(line.as_bytes()).and_then(|_| self.stdin.flush()).is_err() {
            return Err(self.crashed());
        }
        Ok(())
    }

    fn crashed(&mut self) -> OracleError {
        let status = match self.child.wait() {
            Ok(s) => s.to_string(),
            Err(e) => e.to_string(),
        };
        OracleError::TrainerCrashed { status }
    }

    fn receive(&mut self) -> Result<(Message, String), OracleError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(raw)) => match serde_json::from_str::<Message>(&raw) {
                Ok(msg) => Ok((msg, raw)),
                Err(e) => Err(OracleError::Protocol { message: e.to_string(), raw }),
            },
            Ok(Err(e)) => Err(OracleError::Protocol { message: e.to_string(), raw: String::new() }),
            Err(RecvTimeoutError::Timeout) => Err(OracleError::TrainerTimeout(self.timeout.as_secs())),
            Err(RecvTimeoutError::Disconnected) => Err(self.crashed()),
        }
    }

    fn exchange(&mut self, msg: &Message) -> Result<Message, OracleError> {
        self.send(msg)?;
        let (reply, raw) = self.receive()?;
        if let Message::Error { code, message, .. } = reply {
            return Err(OracleError::Remote { code, message });
        }
        if reply.id() != msg.id() {
            return Err(OracleError::Protocol {
                message: format!("response id {:?} does not match request id {:?}", reply.id(), msg.id()),
                raw,
            });
        }
        Ok(reply)
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn keyed<T: Copy>(&self, values: &[T]) -> BTreeMap<String, T> {
        self.ids.iter().cloned().zip(values.iter().copied()).collect()
    }

    fn unkeyed<T: Copy>(&self, map: &BTreeMap<String, T>, raw: &str) -> Result<Vec<T>, OracleError> {
        self.ids
            .iter()
            .map(|id| {
                map.get(id).copied().ok_or_else(|| OracleError::Protocol {
                    message: format!("response is missing slice {id}"),
                    raw: raw.to_string(),
                })
            })
            .collect()
    }
}

impl LossOracle for TrainerOracle {
    fn num_slices(&self) -> usize {
        self.ids.len()
    }

    fn capabilities(&self) -> OracleCapabilities {
        OracleCapabilities { reentrant: false, stateful: true }
    }

    fn evaluate(&mut self, query: &EvalQuery) -> Result<Vec<f64>, OracleError> {
        let id = self.take_id();
        let (fractions, sizes) = match &query.sizes {
            QuerySizes::Fractions(f) => {
                check_len("fractions", f, self.ids.len())?;
                (Some(self.keyed(f)), None)
            }
            QuerySizes::Sizes(s) => {
                check_len("sizes", s, self.ids.len())?;
                (None, Some(self.keyed(s)))
            }
        };
        let request = Message::Eval { id, fractions, sizes, seed: query.seed };
        match self.exchange(&request)? {
            Message::Losses { losses, .. } => {
                let raw = format!("{losses:?}");
                let values = self.unkeyed(&losses, &raw)?;
                if let Some(bad) = values.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
                    return Err(OracleError::Protocol { message: format!("invalid loss {bad}"), raw });
                }
                Ok(values)
            }
            other => Err(OracleError::Protocol { message: "expected losses".into(), raw: format!("{other:?}") }),
        }
    }

    fn acquire(&mut self, counts: &[u64]) -> Result<Acquisition, OracleError> {
        check_len("counts", counts, self.ids.len())?;
        let id = self.take_id();
        let request = Message::Acquire { id, counts: self.keyed(counts) };
        match self.exchange(&request)? {
            Message::Ack { realized, pool_limited, .. } => {
                let raw = format!("{realized:?}");
                let realized = self.unkeyed(&realized, &raw)?;
                let clamped = realized.iter().zip(counts).any(|(r, c)| r < c);
                Ok(Acquisition { realized, pool_limited: pool_limited || clamped })
            }
            other => Err(OracleError::Protocol { message: "expected ack".into(), raw: format!("{other:?}") }),
        }
    }
}

impl Drop for TrainerOracle {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
