use thiserror::Error;

use crate::clock::ClockObjectId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid initial condition: {0}")]
    InvalidInitialCondition(String),

    #[error("clock object {0:?} has rate zero and must not be polled")]
    ZeroRateObject(ClockObjectId),

    #[error("space-time box too large: expected {expected:.3e} events, cap {cap:.3e}")]
    BoxTooLarge { expected: f64, cap: f64 },

    #[error("window overflow: infection reached site {site} inside the guard band of [{lo}, {hi}]")]
    WindowOverflow { site: i64, lo: i64, hi: i64 },

    #[error("truncation touched: left truncation influence front {front} reached right edge {edge}")]
    TruncationTouched { front: i64, edge: i64 },

    #[error("process is empty; nothing to step")]
    EmptyProcess,

    #[error("half-line process went extinct at t = {0}; truncation bug")]
    NeverDies(f64),

    #[error("history unavailable at t = {t}: retained range is [{from}, {to}]")]
    HistoryUnavailable { t: f64, from: f64, to: f64 },

    #[error("renewal monitor exhausted after cumulative time {0}")]
    MonitorExhausted(f64),

    #[error("record covers sites [{rec_lo}, {rec_hi}] x [{rec_t0}, {rec_t1}], which does not contain the requested region")]
    RecordIncomplete {
        rec_lo: i64,
        rec_hi: i64,
        rec_t0: f64,
        rec_t1: f64,
    },

    #[error("insufficient trials: have {have}, need {need}")]
    InsufficientTrials { have: usize, need: usize },

    #[error("too few valid trials: have {have}, need {need}")]
    TooFewTrials { have: usize, need: usize },

    #[error("insufficient extinctions in fit range: have {have}, need {need}")]
    InsufficientExtinctions { have: usize, need: usize },

    #[error("segment of {n} sites exceeds the oracle cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("cannot write output {path}: {source}")]
    OutputUnwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown suite `{name}`; available: {available}")]
    UnknownSuite { name: String, available: String },

    #[error("code version mismatch: manifest {manifest}, running {running}")]
    VersionMismatch { manifest: String, running: String },

    #[error("digest mismatch for trial {trial}: manifest {expected}, replay {actual}")]
    DigestMismatch {
        trial: usize,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
