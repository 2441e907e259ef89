use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("no nodes")]
    EmptyDag,

    #[error("invalid dag: {0}")]
    InvalidDag(String),

    #[error("invalid platform: {0}")]
    InvalidPlatform(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("assignment space has {count} members, exceeds bound {bound}")]
    EnumerationBound { count: u128, bound: u128 },

    #[error("unknown app {0}")]
    UnknownApp(String),

    #[error("unknown profile {0}")]
    UnknownProfile(String),

    #[error("unknown op kind {0}")]
    UnknownOp(String),

    #[error("horizon {horizon_ms} ms is shorter than 10x the longest period {period_ms} ms")]
    HorizonTooShort { horizon_ms: f64, period_ms: f64 },

    #[error("reports describe different workloads: {a} vs {b}")]
    WorkloadMismatch { a: String, b: String },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
