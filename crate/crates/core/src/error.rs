use std::path::PathBuf;

use thiserror::Error;

use crate::model::{ObjectId, TermId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("term {term} has invalid weight {weight} (expected 0 < w <= 1)")]
    InvalidWeight { term: TermId, weight: f64 },

    #[error("term {0} appears more than once in a document")]
    DuplicateTerm(TermId),

    #[error("duplicate object id {0}")]
    DuplicateObjectId(u64),

    #[error("object ids must be contiguous from 0: position {position} holds id {id}")]
    NonContiguousIds { position: usize, id: ObjectId },

    #[error("document references term {0} which is not in the vocabulary")]
    UnknownTerm(TermId),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no SGPL of order {0} was built")]
    MissingGrid(u8),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no object has at least {0} distinct terms")]
    KeywordCount(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
