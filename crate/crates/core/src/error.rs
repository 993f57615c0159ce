use std::fmt;

use crate::game::CoopLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which side of the table broke the game protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    QuestionPlayer,
    AnswerPlayer,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::QuestionPlayer => f.write_str("question-player"),
            Party::AnswerPlayer => f.write_str("answer-player"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("protocol violation by {party} in round {round}: {detail}")]
    ProtocolViolation {
        party: Party,
        round: usize,
        detail: String,
    },

    #[error("model shape mismatch: expected dimension {expected}, got {got}")]
    ModelShape { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("conditional error undefined: sample has no {0} items")]
    UndefinedConditional(CoopLabel),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point} is outside the hypothesis domain of size {domain}")]
    Domain { point: usize, domain: usize },

    #[error("exhaustive search infeasible for domain of size {size} (limit {limit})")]
    Infeasible { size: usize, limit: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "training aborted at episode {episode} (seed {episode_seed}): non-finite gradient, parameter norm {param_norm}"
    )]
    TrainingAborted {
        episode: usize,
        episode_seed: u64,
        param_norm: f64,
    },

    #[error("record does not fit the feature layout: {0}")]
    ConfigMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error in game {game_id}: {message}")]
    Schema { game_id: String, message: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("experiment cell p_nc={p_nc} strategy={strategy} seed={seed}: {source}")]
    Cell {
        p_nc: f64,
        strategy: String,
        seed: u64,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than bad configuration.
    pub fn is_data_error(&self) -> bool {
        if let Error::Cell { source, .. } = self {
            return source.is_data_error();
        }
        matches!(
            self,
            Error::Parse { .. }
                | Error::Schema { .. }
                | Error::InvalidRecord(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::InsufficientData(_)
                | Error::ConfigMismatch(_)
        )
    }
}
