use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported audio encoding in {path}: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    #[error("zero-length audio in {path}")]
    EmptyAudio { path: PathBuf },

    #[error("malformed label row {line} in {path}: {reason}")]
    MalformedLabel {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("unknown condition {0:?} (expected NoSpeech, CleanSpeech, SpeechMusic or SpeechNoise)")]
    UnknownCondition(String),

    #[error("overlapping spans in file_id {file_id}: [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingSpans {
        file_id: String,
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("model file {path}: {reason}")]
    BadModelFile { path: PathBuf, reason: String },

    #[error("smoother file {path}: {reason}")]
    BadSmootherFile { path: PathBuf, reason: String },

    #[error("empty training dataset")]
    EmptyDataset,

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("sequence too short: need at least {need} frames, got {got}")]
    TooShort { need: usize, got: usize },

    #[error("state {state} has {got} frames, need at least {need} for {mixtures} mixtures")]
    InsufficientStateData {
        state: usize,
        got: usize,
        need: usize,
        mixtures: usize,
    },

    #[error("EM diverged: non-finite log-likelihood at iteration {iteration}")]
    EmDiverged { iteration: usize },

    #[error("observation {0} outside [0, 1]")]
    ObservationOutOfRange(f64),

    #[error("emission variant does not match smoothing mode {mode}")]
    VariantMismatch { mode: String },

    #[error(
        "target FPR {target} unreachable: control range [{lo}, {hi}] spans FPR [{fpr_lo}, {fpr_hi}]"
    )]
    TargetUnreachable {
        target: f64,
        lo: f64,
        hi: f64,
        fpr_lo: f64,
        fpr_hi: f64,
    },

    #[error("reports have mismatched FPRs: {0}")]
    FprMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code per the CLI contract: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
