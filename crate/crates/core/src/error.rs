//! Error type shared across the simulation library.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong dimension for the requested operation.
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A quantity that must be finite came out NaN or infinite.
    NonFinite { context: String, time: Option<f64> },
    /// The known gain bound dropped to (or below) its stated floor, so the
    /// control law's division is no longer safe.
    Assumption {
        level: usize,
        time: f64,
        bound: f64,
        floor: f64,
    },
    /// Invalid configuration or misuse of an operation's preconditions.
    Config(String),
    /// A recorded signal exceeded the blow-up guard during simulation.
    Divergence {
        time: f64,
        quantity: String,
        value: f64,
    },
    /// A metrics window contained no trajectory samples.
    EmptyWindow { event_time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                context,
                expected,
                actual,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {expected}, got {actual}"
            ),
            Error::NonFinite { context, time } => match time {
                Some(t) => write!(f, "non-finite value in {context} at t = {t}"),
                None => write!(f, "non-finite value in {context}"),
            },
            Error::Assumption {
                level,
                time,
                bound,
                floor,
            } => write!(
                f,
                "gain bound assumption violated at level {} (t = {time}): bound {bound} <= floor {floor}",
                level + 1
            ),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Divergence {
                time,
                quantity,
                value,
            } => write!(
                f,
                "simulation diverged at t = {time}: {quantity} = {value} exceeds guard"
            ),
            Error::EmptyWindow { event_time } => {
                write!(f, "no trajectory samples in window starting at t = {event_time}")
            }
        }
    }
}

impl std::error::Error for Error {}
