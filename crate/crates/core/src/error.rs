use thiserror::Error;

use crate::gridworld::Cell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("map rows are not rectangular: line {line} has {found} columns, expected {expected}")]
    NonRectangular {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown map character {ch:?} at line {line}, column {column}")]
    UnknownCharacter { ch: char, line: usize, column: usize },
    #[error("map has no start cells")]
    NoStarts,
    #[error("map has no goal cells")]
    NoGoals,
    #[error("map is empty")]
    EmptyMap,
    #[error("start cell ({}, {}) cannot reach any goal", .0.x, .0.y)]
    Disconnected(Cell),
    #[error("cell ({}, {}) lies outside the map", .0.x, .0.y)]
    OutOfBounds(Cell),
    #[error("cell ({}, {}) is listed as both obstacle and {what}", .cell.x, .cell.y)]
    Overlap { cell: Cell, what: &'static str },
    #[error("start probabilities sum to {0}, expected 1")]
    StartDistribution(f64),
    #[error("cell ({}, {}) is an obstacle or out of bounds", .0.x, .0.y)]
    InvalidState(Cell),
    #[error("two agents occupy cell ({}, {})", .0.x, .0.y)]
    InvalidJointState(Cell),
    #[error("{agents} agents requested but only {starts} start cells exist")]
    Capacity { agents: usize, starts: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("map generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },
    #[error("no episode records to aggregate")]
    EmptyRecords,
    #[error("malformed snapshot at line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Stable identifier used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonRectangular { .. } => "non_rectangular",
            Error::UnknownCharacter { .. } => "unknown_character",
            Error::NoStarts => "no_starts",
            Error::NoGoals => "no_goals",
            Error::EmptyMap => "empty_map",
            Error::Disconnected(_) => "disconnected",
            Error::OutOfBounds(_) => "out_of_bounds",
            Error::Overlap { .. } => "overlap",
            Error::StartDistribution(_) => "start_distribution",
            Error::InvalidState(_) => "invalid_state",
            Error::InvalidJointState(_) => "invalid_joint_state",
            Error::Capacity { .. } => "capacity",
            Error::Config(_) => "config",
            Error::Generation { .. } => "generation",
            Error::EmptyRecords => "empty_records",
            Error::Snapshot { .. } => "snapshot",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
