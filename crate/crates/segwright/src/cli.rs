//! Subcommand implementations behind the `segwright` binary.
//!
//! Each subcommand is a thin orchestration of the library modules; the
//! binary only parses arguments and dispatches here. All primary outputs
//! are byte-reproducible given identical flags, inputs and seed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audio::{self, Condition, LabelTrack};
use crate::cnn::{self, CnnModel, FramePrediction, Optimizer, TrainSample};
use crate::energy::{decisions_from_energies, frame_log_energies, EnergyVadConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    compare_systems, score_frames, tune_operating_point, EvalReport, NamedReport, TuneResult,
    DEFAULT_FPR_TOL, DEFAULT_TARGET_FPR,
};
use crate::features::{compute_log_mel, normalize_features, stack_windows, FeatureConfig};
use crate::segmentation::{
    decisions_to_segments, read_segments_csv, segments_to_decisions, write_segments,
    SegmentFormat, SegmentPostConfig,
};
use crate::smoothing::{
    fit_gmm_hmm_supervised, fit_hmm_supervised, load_smoother, save_smoother, smooth_decisions,
    EmConfig, Emissions, SmoothMode, SmootherParams,
};
use crate::synth::{generate, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Energy,
    Cnn,
    CnnHmm,
    CnnGmmHmm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Energy => "energy",
            Method::Cnn => "cnn",
            Method::CnnHmm => "cnn-hmm",
            Method::CnnGmmHmm => "cnn-gmm-hmm",
        }
    }

    fn needs_model(self) -> bool {
        !matches!(self, Method::Energy)
    }

    fn needs_smoother(self) -> bool {
        matches!(self, Method::CnnHmm | Method::CnnGmmHmm)
    }
}

#[derive(Debug, Parser)]
#[command(name = "segwright", version, about = "Voice activity detection and speech segmentation")]
pub struct App {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus (WAVs plus labels.csv).
    MakeCorpus(MakeCorpusArgs),
    /// Train the frame-classification CNN on a labeled corpus.
    TrainCnn(TrainCnnArgs),
    /// Fit the Bernoulli-emission HMM smoother from CNN hard labels.
    FitHmm(FitHmmArgs),
    /// Fit the 3-mixture GMM-emission HMM smoother from CNN probabilities.
    FitGmmHmm(FitGmmHmmArgs),
    /// Run VAD on audio and write speech segments.
    Segment(SegmentArgs),
    /// Score hypothesized segments against dense reference labels.
    Evaluate(EvaluateArgs),
    /// Tune a method's operating point to a target FPR on calibration data.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
pub struct MakeCorpusArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Total corpus duration in seconds.
    #[arg(long, default_value_t = 600.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Duration of each generated WAV file.
    #[arg(long, default_value_t = 60.0)]
    pub file_seconds: f64,
    /// Overlay SNR for the noise/music speech conditions, in dB.
    #[arg(long, default_value_t = 5.0)]
    pub snr_db: f64,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Frame hop in seconds.
    #[arg(long, default_value_t = 0.010)]
    pub frame_period: f64,
    /// Analysis window length in seconds.
    #[arg(long, default_value_t = 0.025)]
    pub window_len: f64,
    #[arg(long, default_value_t = 32)]
    pub mel_bands: usize,
    /// Apply per-file mean-variance normalization to the features.
    #[arg(long)]
    pub mvn: bool,
}

impl FeatureArgs {
    pub fn to_feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            num_mel_bands: self.mel_bands,
            frame_period_sec: self.frame_period,
            window_sec: self.window_len,
            ..FeatureConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainCnnArgs {
    /// Corpus directory containing WAV files and labels.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Cap on training windows, subsampled evenly across the corpus.
    #[arg(long, default_value_t = 2000)]
    pub max_windows: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct FitHmmArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct FitGmmHmmArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub mixtures: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Input WAV file or directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output segment file, or directory when the input is a directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub smoother: Option<PathBuf>,
    /// Energy method: threshold offset in dB relative to the file mean.
    #[arg(long, default_value_t = 0.0)]
    pub offset_db: f64,
    /// Raw CNN method: decision threshold on the speech probability.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[arg(long, default_value_t = 0.2)]
    pub min_speech: f64,
    #[arg(long, default_value_t = 0.1)]
    pub min_gap: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pad: f64,
    /// Worker threads for directory input.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Rttm,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Hypothesis segments CSV (any number of file_ids).
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference dense label CSV.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Optional report CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// System name used in the report.
    #[arg(long, default_value = "system")]
    pub name: String,
    /// When set, warn if the achieved FPR is off this target by more than --tol.
    #[arg(long)]
    pub target_fpr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FPR_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.010)]
    pub frame_period: f64,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Calibration directory: WAV files plus labels.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub smoother: Option<PathBuf>,
    /// For HMM methods: where to write the smoother with the tuned bias.
    /// For energy/cnn: where to write the tuned control value.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TARGET_FPR)]
    pub target_fpr: f64,
    #[arg(long, default_value_t = DEFAULT_FPR_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 40)]
    pub max_iter: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
}

pub fn run(app: App) -> Result<()> {
    match app.command {
        Command::MakeCorpus(args) => run_make_corpus(&args),
        Command::TrainCnn(args) => run_train_cnn(&args),
        Command::FitHmm(args) => run_fit_hmm(&args),
        Command::FitGmmHmm(args) => run_fit_gmm_hmm(&args),
        Command::Segment(args) => run_segment(&args),
        Command::Evaluate(args) => run_evaluate(&args).map(|_| ()),
        Command::Tune(args) => run_tune(&args).map(|_| ()),
    }
}

// ---------------------------------------------------------------------------
// Corpus helpers shared by several subcommands.

/// Sorted (file_id, path) pairs for every `.wav` under `dir`.
pub fn list_corpus_wavs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "wav") {
            let file_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push((file_id, path));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Usage(format!(
            "no .wav files found in {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn find_track<'a>(tracks: &'a [LabelTrack], file_id: &str) -> Result<&'a LabelTrack> {
    tracks
        .iter()
        .find(|t| t.file_id == file_id)
        .ok_or_else(|| Error::Usage(format!("no labels for file_id {file_id}")))
}

/// CNN speech/non-speech probabilities for one file.
pub fn predictions_for_audio(
    model: &CnnModel,
    audio: &audio::AudioBuffer,
    cfg: &FeatureConfig,
    mvn: bool,
) -> Result<Vec<FramePrediction>> {
    let mut feats = compute_log_mel(audio, cfg)?;
    if mvn {
        normalize_features(&mut feats);
    }
    stack_windows(&feats)
        .iter()
        .map(|w| model.forward(w))
        .collect()
}

/// Per-file cache for tuning and evaluation: whatever the method needs to
/// produce decisions for any control value without re-running the front end.
pub enum CachedScores {
    Energies(Vec<f64>),
    Predictions(Vec<FramePrediction>),
}

pub struct CalibrationFile {
    pub file_id: String,
    pub scores: CachedScores,
    pub labels: Vec<Condition>,
}

/// Loads a labeled corpus and runs the method front end once per file.
pub fn prepare_calibration(
    method: Method,
    dir: &Path,
    model: Option<&CnnModel>,
    feature_cfg: &FeatureConfig,
    mvn: bool,
) -> Result<Vec<CalibrationFile>> {
    let wavs = list_corpus_wavs(dir)?;
    let tracks = audio::load_label_track(&dir.join("labels.csv"))?;
    let mut files = Vec::with_capacity(wavs.len());
    for (file_id, path) in wavs {
        let buf = audio::load_audio(&path)?;
        let scores = match method {
            Method::Energy => CachedScores::Energies(frame_log_energies(
                &buf,
                feature_cfg.frame_period_sec,
            )),
            _ => {
                let model = model.expect("validated: cnn methods carry a model");
                CachedScores::Predictions(predictions_for_audio(model, &buf, feature_cfg, mvn)?)
            }
        };
        let num_frames = match &scores {
            CachedScores::Energies(e) => e.len(),
            CachedScores::Predictions(p) => p.len(),
        };
        let track = find_track(&tracks, &file_id)?;
        let labels = audio::rasterize_labels(track, feature_cfg.frame_period_sec, num_frames);
        files.push(CalibrationFile {
            file_id,
            scores,
            labels,
        });
    }
    Ok(files)
}

/// Decisions for one cached file at a given control value. The control is
/// the dB offset for energy, the probability threshold for raw CNN, and the
/// speech bias for the HMM methods.
pub fn decisions_at_control(
    method: Method,
    scores: &CachedScores,
    smoother: Option<&SmootherParams>,
    control: f64,
) -> Result<Vec<bool>> {
    match (method, scores) {
        (Method::Energy, CachedScores::Energies(energies)) => {
            Ok(decisions_from_energies(energies, control))
        }
        (Method::Cnn, CachedScores::Predictions(preds)) => {
            Ok(preds.iter().map(|p| p.p_speech > control).collect())
        }
        (Method::CnnHmm, CachedScores::Predictions(preds)) => {
            let mut params = smoother
                .ok_or_else(|| Error::Usage("cnn-hmm requires a smoother".into()))?
                .clone();
            params.speech_bias = control;
            smooth_decisions(preds, &params, SmoothMode::Hard)
        }
        (Method::CnnGmmHmm, CachedScores::Predictions(preds)) => {
            let mut params = smoother
                .ok_or_else(|| Error::Usage("cnn-gmm-hmm requires a smoother".into()))?
                .clone();
            params.speech_bias = control;
            smooth_decisions(preds, &params, SmoothMode::Soft)
        }
        _ => Err(Error::Usage("method does not match cached scores".into())),
    }
}

/// Pooled FPR over all calibration files at one control value.
pub fn fpr_at_control(
    method: Method,
    files: &[CalibrationFile],
    smoother: Option<&SmootherParams>,
    control: f64,
) -> Result<f64> {
    let mut false_alarms = 0usize;
    let mut nospeech = 0usize;
    for file in files {
        let decisions = decisions_at_control(method, &file.scores, smoother, control)?;
        for (&d, &label) in decisions.iter().zip(&file.labels) {
            if label == Condition::NoSpeech {
                nospeech += 1;
                false_alarms += d as usize;
            }
        }
    }
    Ok(false_alarms as f64 / nospeech.max(1) as f64)
}

/// Default control search range per method.
pub fn control_range(method: Method) -> (f64, f64) {
    match method {
        Method::Energy => (-40.0, 40.0),
        Method::Cnn => (0.0, 1.0),
        Method::CnnHmm | Method::CnnGmmHmm => (-30.0, 30.0),
    }
}

// ---------------------------------------------------------------------------
// Subcommands.

pub fn run_make_corpus(args: &MakeCorpusArgs) -> Result<()> {
    if args.seconds <= 0.0 || args.file_seconds <= 0.0 {
        return Err(Error::Usage("--seconds and --file-seconds must be > 0".into()));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let num_files = (args.seconds / args.file_seconds).ceil() as usize;
    let mut tracks = Vec::with_capacity(num_files);
    let mut remaining = args.seconds;
    for i in 0..num_files {
        let duration = remaining.min(args.file_seconds);
        remaining -= duration;
        let file_id = format!("synth_{i:04}");
        let cfg = SynthConfig {
            duration_sec: duration,
            seed: args.seed.wrapping_add(i as u64),
            snr_db: args.snr_db,
            file_id: file_id.clone(),
            ..SynthConfig::default()
        };
        let (buf, track) = generate(&cfg)?;
        audio::write_audio(&args.out.join(format!("{file_id}.wav")), &buf)?;
        tracks.push(track);
        log::info!("wrote {file_id}.wav ({duration:.1} s)");
    }
    audio::write_label_tracks(&args.out.join("labels.csv"), &tracks)?;
    Ok(())
}

/// Builds the (window, speech, nonspeech) training set from a labeled corpus.
/// Windows are subsampled evenly down to `max_windows`.
pub fn build_training_set(
    dir: &Path,
    feature_cfg: &FeatureConfig,
    mvn: bool,
    max_windows: usize,
) -> Result<Vec<TrainSample>> {
    let wavs = list_corpus_wavs(dir)?;
    let tracks = audio::load_label_track(&dir.join("labels.csv"))?;
    let mut all = Vec::new();
    for (file_id, path) in wavs {
        let buf = audio::load_audio(&path)?;
        let mut feats = compute_log_mel(&buf, feature_cfg)?;
        if mvn {
            normalize_features(&mut feats);
        }
        let windows = stack_windows(&feats);
        let track = find_track(&tracks, &file_id)?;
        let labels =
            audio::rasterize_labels(track, feature_cfg.frame_period_sec, windows.len());
        for (window, label) in windows.into_iter().zip(labels) {
            all.push(TrainSample {
                window,
                speech: label.is_speech(),
                // Non-speech audio is present except in clean speech.
                nonspeech: label != Condition::CleanSpeech,
            });
        }
    }
    if all.len() > max_windows && max_windows > 0 {
        let stride = all.len() as f64 / max_windows as f64;
        all = (0..max_windows)
            .map(|i| all[(i as f64 * stride) as usize].clone())
            .collect();
    }
    Ok(all)
}

pub fn run_train_cnn(args: &TrainCnnArgs) -> Result<()> {
    let feature_cfg = args.features.to_feature_config();
    if feature_cfg.num_mel_bands != 32 {
        return Err(Error::Usage("the CNN requires --mel-bands 32".into()));
    }
    let dataset = build_training_set(
        &args.data,
        &feature_cfg,
        args.features.mvn,
        args.max_windows,
    )?;
    log::info!("training on {} windows", dataset.len());
    let cfg = cnn::TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        seed: args.seed,
        optimizer: Optimizer::Adam,
        log_progress: true,
    };
    let outcome = cnn::cnn_train(&dataset, &[], &cfg)?;
    cnn::save_model(&outcome.model, &args.out)?;
    Ok(())
}

/// Runs the corpus through the CNN, returning per-file probabilities and
/// aligned ground-truth speech states.
fn corpus_predictions(
    dir: &Path,
    model: &CnnModel,
    feature_cfg: &FeatureConfig,
    mvn: bool,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let wavs = list_corpus_wavs(dir)?;
    let tracks = audio::load_label_track(&dir.join("labels.csv"))?;
    let mut probs = Vec::new();
    let mut states = Vec::new();
    for (file_id, path) in wavs {
        let buf = audio::load_audio(&path)?;
        let preds = predictions_for_audio(model, &buf, feature_cfg, mvn)?;
        let track = find_track(&tracks, &file_id)?;
        let labels =
            audio::rasterize_labels(track, feature_cfg.frame_period_sec, preds.len());
        probs.extend(preds.iter().map(|p| p.p_speech));
        states.extend(labels.iter().map(|c| c.is_speech()));
    }
    Ok((probs, states))
}

pub fn run_fit_hmm(args: &FitHmmArgs) -> Result<()> {
    let model = cnn::load_model(&args.model)?;
    let feature_cfg = args.features.to_feature_config();
    let (probs, states) =
        corpus_predictions(&args.data, &model, &feature_cfg, args.features.mvn)?;
    let bits: Vec<bool> = probs.iter().map(|&p| p > 0.5).collect();
    let params = fit_hmm_supervised(&bits, &states)?;
    save_smoother(&params, &args.out)?;
    Ok(())
}

pub fn run_fit_gmm_hmm(args: &FitGmmHmmArgs) -> Result<()> {
    let model = cnn::load_model(&args.model)?;
    let feature_cfg = args.features.to_feature_config();
    let (probs, states) =
        corpus_predictions(&args.data, &model, &feature_cfg, args.features.mvn)?;
    let fit = fit_gmm_hmm_supervised(&probs, &states, args.mixtures, &EmConfig::default())?;
    save_smoother(&fit.params, &args.out)?;
    Ok(())
}

fn validate_segment_flags(args: &SegmentArgs) -> Result<()> {
    if args.method.needs_model() && args.model.is_none() {
        return Err(Error::Usage(format!(
            "--method {} requires --model",
            args.method.name()
        )));
    }
    if args.method.needs_smoother() && args.smoother.is_none() {
        return Err(Error::Usage(format!(
            "--method {} requires --smoother",
            args.method.name()
        )));
    }
    if args.method == Method::Energy && args.model.is_some() {
        return Err(Error::Usage("--method energy does not take --model".into()));
    }
    if args.method.needs_model() && args.features.mel_bands != 32 {
        return Err(Error::Usage("CNN methods require --mel-bands 32".into()));
    }
    Ok(())
}

/// Loaded artifacts for one segmentation run.
struct SegmentContext {
    method: Method,
    model: Option<CnnModel>,
    smoother: Option<SmootherParams>,
    feature_cfg: FeatureConfig,
    mvn: bool,
    offset_db: f64,
    threshold: f64,
    post: SegmentPostConfig,
}

impl SegmentContext {
    fn decisions_for(&self, buf: &audio::AudioBuffer) -> Result<Vec<bool>> {
        match self.method {
            Method::Energy => {
                let cfg = EnergyVadConfig {
                    threshold_offset_db: self.offset_db,
                    frame_period_sec: self.feature_cfg.frame_period_sec,
                };
                Ok(crate::energy::energy_vad(buf, &cfg))
            }
            Method::Cnn => {
                let preds = predictions_for_audio(
                    self.model.as_ref().unwrap(),
                    buf,
                    &self.feature_cfg,
                    self.mvn,
                )?;
                Ok(preds.iter().map(|p| p.p_speech > self.threshold).collect())
            }
            Method::CnnHmm | Method::CnnGmmHmm => {
                let preds = predictions_for_audio(
                    self.model.as_ref().unwrap(),
                    buf,
                    &self.feature_cfg,
                    self.mvn,
                )?;
                let mode = if self.method == Method::CnnHmm {
                    SmoothMode::Hard
                } else {
                    SmoothMode::Soft
                };
                smooth_decisions(preds.as_slice(), self.smoother.as_ref().unwrap(), mode)
            }
        }
    }

    fn segment_file(&self, input: &Path, out: &Path, format: SegmentFormat) -> Result<()> {
        let buf = audio::load_audio(input)?;
        let decisions = self.decisions_for(&buf)?;
        let file_id = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let segments = decisions_to_segments(
            &decisions,
            self.feature_cfg.frame_period_sec,
            &file_id,
            &self.post,
        );
        write_segments(&segments, out, format)
    }
}

pub fn run_segment(args: &SegmentArgs) -> Result<()> {
    validate_segment_flags(args)?;
    if let Some(params) = args.smoother.as_ref().map(|p| load_smoother(p)).transpose()? {
        let gmm = matches!(params.emissions, Emissions::Gmm { .. });
        match (args.method, gmm) {
            (Method::CnnHmm, true) => {
                return Err(Error::Usage(
                    "cnn-hmm needs a Bernoulli smoother, got a GMM one".into(),
                ))
            }
            (Method::CnnGmmHmm, false) => {
                return Err(Error::Usage(
                    "cnn-gmm-hmm needs a GMM smoother, got a Bernoulli one".into(),
                ))
            }
            _ => {}
        }
    }
    let ctx = SegmentContext {
        method: args.method,
        model: args.model.as_ref().map(|p| cnn::load_model(p)).transpose()?,
        smoother: args.smoother.as_ref().map(|p| load_smoother(p)).transpose()?,
        feature_cfg: args.features.to_feature_config(),
        mvn: args.features.mvn,
        offset_db: args.offset_db,
        threshold: args.threshold,
        post: SegmentPostConfig {
            min_speech_sec: args.min_speech,
            min_gap_sec: args.min_gap,
            pad_sec: args.pad,
        },
    };
    let format = match args.format {
        OutputFormat::Csv => SegmentFormat::Csv,
        OutputFormat::Rttm => SegmentFormat::Rttm,
    };

    if args.input.is_dir() {
        let wavs = list_corpus_wavs(&args.input)?;
        std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
        let ext = match format {
            SegmentFormat::Csv => "csv",
            SegmentFormat::Rttm => "rttm",
        };
        let jobs = args
            .jobs
            .unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            })
            .max(1);
        // Files are chunked over workers; output paths are derived from the
        // sorted input names, so ordering is stable regardless of timing.
        let results: Vec<Result<()>> = std::thread::scope(|scope| {
            let chunk = wavs.len().div_ceil(jobs);
            let handles: Vec<_> = wavs
                .chunks(chunk)
                .map(|batch| {
                    let ctx = &ctx;
                    let out_dir = &args.out;
                    scope.spawn(move || {
                        batch
                            .iter()
                            .map(|(file_id, path)| {
                                ctx.segment_file(
                                    path,
                                    &out_dir.join(format!("{file_id}.{ext}")),
                                    format,
                                )
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        results.into_iter().collect::<Result<Vec<()>>>()?;
        Ok(())
    } else {
        ctx.segment_file(&args.input, &args.out, format)
    }
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<EvalReport> {
    let segments = read_segments_csv(&args.hyp)?;
    let tracks = audio::load_label_track(&args.reference)?;
    let mut decisions = Vec::new();
    let mut labels = Vec::new();
    for track in &tracks {
        let end = track
            .spans
            .last()
            .map(|s| s.end_sec)
            .unwrap_or(0.0);
        let num_frames = (end / args.frame_period).round() as usize;
        let file_segments: Vec<_> = segments
            .iter()
            .filter(|s| s.file_id == track.file_id)
            .cloned()
            .collect();
        decisions.extend(segments_to_decisions(
            &file_segments,
            args.frame_period,
            num_frames,
        ));
        labels.extend(audio::rasterize_labels(track, args.frame_period, num_frames));
    }
    let report = score_frames(&decisions, &labels)?;

    let named = NamedReport {
        name: args.name.clone(),
        report: report.clone(),
    };
    let comparison = compare_systems(std::slice::from_ref(&named), f64::INFINITY)?;
    print!("{}", comparison.text_table);
    if let (Some(target), Some(fpr)) = (args.target_fpr, report.fpr) {
        if (fpr - target).abs() > args.tol {
            log::warn!("achieved FPR {fpr:.4} is off target {target:.4} by more than {}", args.tol);
        }
    }
    if let Some(out) = &args.out {
        std::fs::write(out, &comparison.csv).map_err(|e| Error::io(out, e))?;
    }
    Ok(report)
}

pub fn run_tune(args: &TuneArgs) -> Result<TuneResult> {
    if args.method.needs_model() && args.model.is_none() {
        return Err(Error::Usage(format!(
            "--method {} requires --model",
            args.method.name()
        )));
    }
    if args.method.needs_smoother() && args.smoother.is_none() {
        return Err(Error::Usage(format!(
            "--method {} requires --smoother",
            args.method.name()
        )));
    }
    let model = args.model.as_ref().map(|p| cnn::load_model(p)).transpose()?;
    let smoother = args
        .smoother
        .as_ref()
        .map(|p| load_smoother(p))
        .transpose()?;
    let feature_cfg = args.features.to_feature_config();
    let files = prepare_calibration(
        args.method,
        &args.data,
        model.as_ref(),
        &feature_cfg,
        args.features.mvn,
    )?;
    let (lo, hi) = control_range(args.method);
    let result = tune_operating_point(
        |control| {
            fpr_at_control(args.method, &files, smoother.as_ref(), control)
                .expect("calibration evaluation failed")
        },
        lo,
        hi,
        args.target_fpr,
        args.tol,
        args.max_iter,
    )?;
    println!(
        "method={} control={} fpr={:.4} iterations={} converged={}",
        args.method.name(),
        result.control_value,
        result.achieved_fpr,
        result.iterations,
        result.converged
    );
    if let Some(out) = &args.out {
        if args.method.needs_smoother() {
            let mut params = smoother.expect("validated above");
            params.speech_bias = result.control_value;
            save_smoother(&params, out)?;
        } else {
            let text = format!(
                "control_value {}\nachieved_fpr {}\nconverged {}\n",
                result.control_value, result.achieved_fpr, result.converged
            );
            std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
        }
    }
    Ok(result)
}
