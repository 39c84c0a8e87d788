use std::io;

use thiserror::Error;

use crate::training::TrainReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("parse error at record {record}: {message} (last complete record: {last})", last = .last_complete.map_or_else(|| "none".to_string(), |i| i.to_string()))]
    Parse { record: usize, last_complete: Option<usize>, message: String },

    #[error("load error: {0}")]
    Load(String),

    #[error("numeric failure in `{block}`: {message}")]
    Numeric { block: String, message: String },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, report: Box<TrainReport> },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
