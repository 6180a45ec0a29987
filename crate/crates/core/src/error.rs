use std::fmt;

use thiserror::Error;

/// One violated model invariant, with the 1-based state/row/column it concerns.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewStates { num_states: usize },
    ZeroDimension,
    TransitionShape { rows: usize, cols: usize, expected: usize },
    StateCount { found: usize, expected: usize },
    RowSum { row: usize, sum: f64 },
    ExitRowNonZero { col: usize, value: f64 },
    EntryColumnNonZero { row: usize, value: f64 },
    EntryToExit { value: f64 },
    ProbabilityOutOfRange { row: usize, col: usize, value: f64 },
    MeanLength { state: usize, len: usize, dim: usize },
    VarianceLength { state: usize, len: usize, dim: usize },
    NonFiniteMean { state: usize, dim_index: usize },
    VarianceNotPositive { state: usize, dim_index: usize, value: f64 },
    VarianceBelowFloor { state: usize, dim_index: usize, value: f64, floor: f64 },
    StaleGconst { state: usize, cached: f64, recomputed: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            TooFewStates { num_states } => {
                write!(f, "model has {num_states} states, at least 3 are required")
            }
            ZeroDimension => write!(f, "observation dimension is zero"),
            TransitionShape { rows, cols, expected } => write!(
                f,
                "transition matrix is {rows}x{cols}, expected {expected}x{expected}"
            ),
            StateCount { found, expected } => {
                write!(f, "{found} emitting states given, expected {expected}")
            }
            RowSum { row, sum } => write!(f, "transition row {row} sums to {sum}, not 1"),
            ExitRowNonZero { col, value } => {
                write!(f, "exit row has non-zero entry {value} in column {col}")
            }
            EntryColumnNonZero { row, value } => {
                write!(f, "transition into entry state from row {row} is {value}")
            }
            EntryToExit { value } => write!(f, "entry state jumps straight to exit ({value})"),
            ProbabilityOutOfRange { row, col, value } => {
                write!(f, "transition ({row},{col}) = {value} is not a probability")
            }
            MeanLength { state, len, dim } => {
                write!(f, "state {state} mean has length {len}, expected {dim}")
            }
            VarianceLength { state, len, dim } => {
                write!(f, "state {state} variance has length {len}, expected {dim}")
            }
            NonFiniteMean { state, dim_index } => {
                write!(f, "state {state} mean[{dim_index}] is not finite")
            }
            VarianceNotPositive { state, dim_index, value } => {
                write!(f, "state {state} variance[{dim_index}] = {value} is not positive")
            }
            VarianceBelowFloor { state, dim_index, value, floor } => write!(
                f,
                "state {state} variance[{dim_index}] = {value} is below the floor {floor}"
            ),
            StaleGconst { state, cached, recomputed } => write!(
                f,
                "state {state} gconst {cached} disagrees with recomputed {recomputed}"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid variance {value} at dimension {dim_index}")]
    InvalidVariance { dim_index: usize, value: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("state {state} is not an emitting state of a {num_states}-state model")]
    NotEmitting { state: usize, num_states: usize },

    #[error("invalid model: {}", join_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid observations: {0}")]
    InvalidObservations(String),

    #[error("invalid alignment path: {0}")]
    InvalidPath(String),

    #[error("no path survives at frame {t}")]
    DeadTrellis { t: usize },

    #[error("corrupt trellis: missing backpointer at frame {t}, state {state}")]
    CorruptTrellis { t: usize, state: usize },

    #[error("{frames} frames cannot be split over {states} emitting states")]
    TooFewFrames { frames: usize, states: usize },

    #[error("training aborted at iteration {iteration}: {source}")]
    TrainingAborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("search space of {candidates} paths exceeds the limit of {limit}")]
    TooLarge { candidates: f64, limit: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
