use std::fmt;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use womctl_core::Error;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Io(String),
    Usage(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) | Failure::Core(Error::Parse(_)) => 1,
            Failure::Core(Error::CapExceeded { .. }) => 2,
            Failure::Core(Error::CostMismatch { .. }) => 4,
            Failure::Core(_) | Failure::Usage(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(m) | Failure::Usage(m) => f.write_str(m),
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Report {
    pub command: String,
    pub instance_digest: Value,
    pub results: Value,
    pub timings: serde_json::Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.into(), instance_digest: Value::Null, results: Value::Null, timings: serde_json::Map::new() }
    }

    pub fn time(&mut self, label: &str, seconds: f64) {
        self.timings.insert(label.into(), json!(seconds));
    }

    pub fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "instance_digest": self.instance_digest,
            "results": self.results,
            "timings": self.timings,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        write_json(path, &self.to_value())
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    std::fs::write(path, text + "\n").map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}
