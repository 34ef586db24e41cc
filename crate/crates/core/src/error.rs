// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value {value} at position {position} is not a bipolar (+1/-1) element")]
    NotBipolar { position: usize, value: i64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("entry {value} at ({row}, {col}) is not representable as a {bits}-bit {} integer", if *.signed { "signed" } else { "unsigned" })]
    OutOfRange {
        row: usize,
        col: usize,
        value: i64,
        bits: u8,
        signed: bool,
    },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("tile has {rows} rows but the CAM holds at most {max}")]
    TooManyRows { rows: usize, max: usize },

    #[error("voltage {0} outside [0, 1]")]
    VoltageOutOfRange(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("perturbation {deviation} at position {position} exceeds epsilon {epsilon}")]
    PerturbationExceedsEpsilon {
        position: usize,
        deviation: f64,
        epsilon: f64,
    },

    #[error("bit-sliced mode requires a sliced operand")]
    SlicedOperandRequired,

    #[error("{path}: bad magic, expected {expected}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("{path}: corrupt tensor file: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
