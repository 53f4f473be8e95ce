//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("audio file not found: {0}")]
    AudioNotFound(PathBuf),
    #[error("multi-channel unsupported: {path} has {channels} channels")]
    MultiChannel { path: PathBuf, channels: u16 },
    #[error("unsupported encoding in {path}: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),
    #[error("empty signal")]
    EmptySignal,
    #[error("signal too short: {got} samples, need at least {need}")]
    SignalTooShort { got: usize, need: usize },

    #[error("segments must be sorted and non-overlapping: {0}")]
    BadSegments(String),
    #[error("timeline has no speech")]
    NoSpeech,
    #[error("timeline has no {0:?} turns")]
    MissingSpeaker(crate::timeline::Speaker),
    #[error("call duration is zero")]
    ZeroDuration,

    #[error("envelope too short for one analysis window: {got} samples, need {need}")]
    EnvelopeTooShort { got: usize, need: usize },
    #[error("need at least 2 rhythm frames, got {0}")]
    TooFewFrames(usize),

    #[error("negative chi-square statistic: {0}")]
    NegativeStatistic(f64),
    #[error("p-value out of [0,1]: {0}")]
    BadPValue(f64),
    #[error("design matrix is rank deficient (column {0})")]
    RankDeficient(usize),
    #[error("response is constant; model is degenerate")]
    ConstantResponse,
    #[error("model did not converge: {0}")]
    NotConverged(String),
    #[error("likelihood ratio test: {0}")]
    BadLrt(String),
    #[error("dataset invalid: {0}")]
    BadDataset(String),

    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("SMO did not converge after {passes} passes (best dual objective {objective})")]
    SmoNotConverged { passes: usize, objective: f64 },
    #[error("score/label lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("score out of range [0, 35]: {0}")]
    ScoreOutOfRange(u32),
    #[error("not enough eligible speakers: {got}, need at least {need}")]
    TooFewSpeakers { got: usize, need: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("csv parse error in {path}: {detail}")]
    CsvSchema { path: PathBuf, detail: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
