use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("map error: {0}")]
    Map(String),
    #[error("pose ({x:.3}, {y:.3}) lies inside an obstacle")]
    InvalidPose { x: f64, y: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("episode finished; call reset before stepping")]
    EpisodeFinished,
    #[error("no active episode; call reset first")]
    NoEpisode,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
