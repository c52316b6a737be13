use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::mpsc::{channel, Receiver, Sender};

use thiserror::Error;

use crate::references::fmt_f64;
use crate::state::{Actuation, Command};

pub const COMMAND_LOG_HEADER: &str = "t,mode,f1,f2,f3,f4,ct,wx,wy,wz";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error("bridge closed")]
    Closed,
    #[error("bridge i/o error: {0}")]
    Io(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
}

/// Acknowledgement of a delivered command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ack {
    /// Time the command was stamped with on send.
    pub t: f64,
}

/// Sink for low-level commands.
pub trait Bridge: Send {
    fn name(&self) -> &'static str;

    /// Stamps `cmd` with `now` and delivers it.
    fn send(&mut self, cmd: &Command, now: f64) -> Result<Ack, BridgeError>;
}

fn stamped(cmd: &Command, now: f64) -> Result<Command, BridgeError> {
    if !cmd.is_finite() || !now.is_finite() {
        return Err(BridgeError::InvalidCommand("non-finite command".into()));
    }
    Ok(Command { t: now, ..*cmd })
}

/// Delivers commands over a channel; the simulator side drains it into
/// its delay line.
#[derive(Debug)]
pub struct SimBridge {
    tx: Sender<Command>,
}

impl SimBridge {
    pub fn channel() -> (Self, Receiver<Command>) {
        let (tx, rx) = channel();
        (Self { tx }, rx)
    }
}

impl Bridge for SimBridge {
    fn name(&self) -> &'static str {
        "sim"
    }

    fn send(&mut self, cmd: &Command, now: f64) -> Result<Ack, BridgeError> {
        let cmd = stamped(cmd, now)?;
        self.tx.send(cmd).map_err(|_| BridgeError::Closed)?;
        Ok(Ack { t: now })
    }
}

/// One command-log row. Fields of the inactive mode are left empty.
pub fn command_log_row(cmd: &Command) -> String {
    let mut cols = vec![fmt_f64(cmd.t), cmd.mode().as_str().to_string()];
    match cmd.actuation {
        Actuation::Thrusts(f) => {
            cols.extend(f.iter().map(|x| fmt_f64(*x)));
            cols.extend(std::iter::repeat_n(String::new(), 4));
        }
        Actuation::CollectiveThrustBodyrate {
            collective_thrust,
            bodyrate,
        } => {
            cols.extend(std::iter::repeat_n(String::new(), 4));
            cols.push(fmt_f64(collective_thrust));
            cols.extend(bodyrate.iter().map(|x| fmt_f64(*x)));
        }
    }
    cols.join(",")
}

/// Appends every command as a CSV row.
pub struct LogBridge<W: Write + Send> {
    out: W,
    wrote_header: bool,
}

impl<W: Write + Send> LogBridge<W> {
    pub fn new(out: W) -> Self {
        Self { out, wrote_header: false }
    }

    pub fn flush(&mut self) -> Result<(), BridgeError> {
        self.out.flush().map_err(|e| BridgeError::Io(e.to_string()))
    }

    pub fn into_inner(mut self) -> W {
        let _ = self.out.flush();
        self.out
    }
}

impl LogBridge<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, BridgeError> {
        let f = File::create(path).map_err(|e| BridgeError::Io(e.to_string()))?;
        Ok(Self::new(BufWriter::new(f)))
    }
}

impl<W: Write + Send> Bridge for LogBridge<W> {
    fn name(&self) -> &'static str {
        "log"
    }

    fn send(&mut self, cmd: &Command, now: f64) -> Result<Ack, BridgeError> {
        let cmd = stamped(cmd, now)?;
        let io = |e: std::io::Error| BridgeError::Io(e.to_string());
        if !self.wrote_header {
            writeln!(self.out, "{COMMAND_LOG_HEADER}").map_err(io)?;
            self.wrote_header = true;
        }
        writeln!(self.out, "{}", command_log_row(&cmd)).map_err(io)?;
        Ok(Ack { t: now })
    }
}
