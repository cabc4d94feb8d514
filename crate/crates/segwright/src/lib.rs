//! Voice activity detection and speech segmentation toolkit.
//!
//! Four VAD variants are provided, selectable through one pipeline:
//!
//! * `energy` — per-frame log-energy thresholding relative to the file mean.
//! * `cnn` — a small (~120k parameter) CNN classifying 32x32 log-mel
//!   spectrogram windows, one decision per 10 ms frame.
//! * `cnn-hmm` — CNN hard labels smoothed by a two-state HMM with Bernoulli
//!   emissions and Viterbi decoding.
//! * `cnn-gmm-hmm` — CNN speech-neuron probabilities smoothed by a two-state
//!   HMM with 3-mixture GMM emissions.
//!
//! Supporting pieces: WAV loading and dense label parsing ([`audio`]),
//! log-mel feature extraction ([`features`]), supervised smoother training
//! ([`smoothing`]), frame-decision to segment conversion ([`segmentation`]),
//! TPR-at-fixed-FPR scoring and operating-point tuning ([`evaluation`]), and
//! a deterministic synthetic corpus generator ([`synth`]) so the whole
//! pipeline can be trained and evaluated without external data.
//!
//! See the `examples/` directory for one runnable example per capability,
//! or the `segwright` binary for the subcommand CLI.

pub mod audio;
pub mod cli;
pub mod cnn;
pub mod energy;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod segmentation;
pub mod smoothing;
pub mod synth;

pub use audio::{AudioBuffer, Condition, LabelTrack};
pub use cnn::{CnnModel, FramePrediction, TrainConfig};
pub use energy::EnergyVadConfig;
pub use error::Error;
pub use evaluation::{EvalReport, TuneResult};
pub use features::{FeatureConfig, FeatureMatrix, SpectrogramWindow};
pub use segmentation::{Segment, SegmentPostConfig};
pub use smoothing::SmootherParams;
pub use synth::SynthConfig;

/// Canonical sample rate after normalization.
pub const SAMPLE_RATE_HZ: u32 = 16_000;
