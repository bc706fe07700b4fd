use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown switch port {port} (switch has {num_ports} ports)")]
    UnknownPort { port: u16, num_ports: u16 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite {what} at epoch {epoch}")]
    NonFinite { what: String, epoch: usize },

    #[error("class `{0}` is absent from the training labels")]
    MissingClass(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Metrics(String),

    #[error("trace is not time-sorted: packet {index} at {timestamp} precedes {previous}")]
    UnsortedTrace {
        index: usize,
        timestamp: f64,
        previous: f64,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("no ground-truth label for {} host-interval(s): {}", .0.len(), .0.join(", "))]
    LabelJoin(Vec<String>),

    #[error("model/dataset class mismatch: {0}")]
    ClassMismatch(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("pcap: {0}")]
    Pcap(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for validation failures, 2 for runtime or numeric ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::Io { .. } | Error::Pcap(_) => 2,
            _ => 1,
        }
    }
}
