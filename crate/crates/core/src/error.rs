use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error at line {line}, key `{key}`: {message}")]
    Config { key: String, line: usize, message: String },

    #[error("element {element} inverted (det F = {det:e})")]
    ElementInversion { element: usize, det: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("particle {particle} has a vanishing area-weighted normal")]
    ZeroNormal { particle: usize },

    #[error("particle {particle} touches grid node {node:?} that is absent from the grid field")]
    MissingGridNode { particle: usize, node: [i64; 3] },

    #[error("non-finite state at step {step}")]
    NonFinite { step: u64 },

    #[error("toy trajectory went unstable (tau = {tau}, |x| = {x:e} at t = {t})")]
    Unstable { tau: f64, x: f64, t: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerics (inversion, blow-up) as opposed to
    /// bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ElementInversion { .. } | Error::NonFinite { .. } | Error::Unstable { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
