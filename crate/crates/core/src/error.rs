use alloc::string::String;
use alloc::vec::Vec;

use crate::attribution::SliceKey;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,
    #[error("quantile out of range")]
    QuantileOutOfRange,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("negative value {0} in heatmap")]
    NegativeValue(f64),
    #[error("grid dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("expected {expected} values for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("cannot resample {src_w}x{src_h} down to {out_w}x{out_h}")]
    Downscale {
        src_w: usize,
        src_h: usize,
        out_w: usize,
        out_h: usize,
    },
    #[error("token index {index} out of range for {len} tokens")]
    TokenIndex { index: usize, len: usize },
    #[error("slice {key} provides {got} grids for {expected} tokens")]
    SliceTokenCount {
        key: SliceKey,
        expected: usize,
        got: usize,
    },
    #[error("slice {0} has grids of differing dimensions")]
    RaggedSlice(SliceKey),
    #[error("duplicate slice key {0}")]
    DuplicateSlice(SliceKey),
    #[error("no heatmap for {role} token {token:?}")]
    MissingToken { role: &'static str, token: String },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown instance ids: {0:?}")]
    UnknownInstances(Vec<String>),
    #[error("degenerate proportions")]
    DegenerateProportions,
    #[error("invalid sample: {0}")]
    InvalidSample(&'static str),
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error("threshold grid must be ascending and inside [0, 1]")]
    InvalidGrid,
    #[error("iou value {0} outside [0, 1]")]
    IouOutOfRange(f64),
    #[error("prompt template section {0:?} is empty")]
    EmptyTemplateSection(&'static str),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
