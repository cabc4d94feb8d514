//! Audio loading, normalization and dense ground-truth label handling.
//!
//! Everything downstream of this module works on mono 16 kHz audio in
//! [-1, 1]. WAV input may be 16-bit PCM, 1 or 2 channels, at any rate;
//! stereo is downmixed by averaging and other rates are resampled by
//! linear interpolation.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;

/// Mono PCM samples at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// One of the four dense label conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    NoSpeech,
    CleanSpeech,
    SpeechMusic,
    SpeechNoise,
}

impl Condition {
    /// The three speech conditions collapse onto a single positive class.
    pub fn is_speech(self) -> bool {
        !matches!(self, Condition::NoSpeech)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "NoSpeech" => Ok(Condition::NoSpeech),
            "CleanSpeech" => Ok(Condition::CleanSpeech),
            "SpeechMusic" | "Speech+Music" => Ok(Condition::SpeechMusic),
            "SpeechNoise" | "Speech+Noise" => Ok(Condition::SpeechNoise),
            other => Err(Error::UnknownCondition(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::NoSpeech => "NoSpeech",
            Condition::CleanSpeech => "CleanSpeech",
            Condition::SpeechMusic => "SpeechMusic",
            Condition::SpeechNoise => "SpeechNoise",
        }
    }
}

/// A labeled time span, start-inclusive / end-exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpan {
    pub start_sec: f64,
    pub end_sec: f64,
    pub condition: Condition,
}

/// Dense condition labels for one file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTrack {
    pub file_id: String,
    pub spans: Vec<LabelSpan>,
}

/// Loads a RIFF/WAVE file and normalizes to mono 16 kHz in [-1, 1].
pub fn load_audio(path: &Path) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: format!(
                "expected 16-bit integer PCM, got {} bits {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: format!("expected 1 or 2 channels, got {}", spec.channels),
        });
    }

    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;

    let channels = spec.channels as usize;
    let mut samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f64 = frame.iter().map(|&s| s as f64).sum();
            sum / channels as f64 / 32768.0
        })
        .collect();

    if samples.is_empty() {
        return Err(Error::EmptyAudio {
            path: path.to_path_buf(),
        });
    }
    if spec.sample_rate != SAMPLE_RATE_HZ {
        samples = resample_linear(&samples, spec.sample_rate, SAMPLE_RATE_HZ);
    }
    Ok(AudioBuffer {
        samples,
        sample_rate_hz: SAMPLE_RATE_HZ,
    })
}

/// Writes mono audio as 16-bit PCM WAV.
pub fn write_audio(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::UnsupportedAudio {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
    }
    writer.finalize().map_err(|e| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(())
}

/// Resamples by linear interpolation over the source sample grid.
fn resample_linear(samples: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    let n_out = (samples.len() as u64 * to_hz as u64 / from_hz as u64) as usize;
    let ratio = from_hz as f64 / to_hz as f64;
    (0..n_out)
        .map(|i| {
            let pos = i as f64 * ratio;
            let i0 = pos.floor() as usize;
            let frac = pos - i0 as f64;
            let a = samples[i0.min(samples.len() - 1)];
            let b = samples[(i0 + 1).min(samples.len() - 1)];
            a + (b - a) * frac
        })
        .collect()
}

/// Parses the label CSV (`file_id,start_sec,end_sec,condition`) into one
/// track per file_id, spans sorted and checked for overlap.
///
/// A literal header line `file_id,start,end,label` is accepted and skipped.
pub fn load_label_track(path: &Path) -> Result<Vec<LabelTrack>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut by_file: BTreeMap<String, Vec<LabelSpan>> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line == "file_id,start,end,label" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedLabel {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let start_sec: f64 = fields[1].trim().parse().map_err(|_| Error::MalformedLabel {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: format!("bad start time {:?}", fields[1]),
        })?;
        let end_sec: f64 = fields[2].trim().parse().map_err(|_| Error::MalformedLabel {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: format!("bad end time {:?}", fields[2]),
        })?;
        if !(start_sec < end_sec) {
            return Err(Error::MalformedLabel {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("start {} must be < end {}", start_sec, end_sec),
            });
        }
        let condition = Condition::parse(fields[3].trim())?;
        by_file
            .entry(fields[0].trim().to_string())
            .or_default()
            .push(LabelSpan {
                start_sec,
                end_sec,
                condition,
            });
    }

    let mut tracks = Vec::new();
    for (file_id, mut spans) in by_file {
        spans.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
        for pair in spans.windows(2) {
            if pair[1].start_sec < pair[0].end_sec {
                return Err(Error::OverlappingSpans {
                    file_id,
                    a_start: pair[0].start_sec,
                    a_end: pair[0].end_sec,
                    b_start: pair[1].start_sec,
                    b_end: pair[1].end_sec,
                });
            }
        }
        tracks.push(LabelTrack { file_id, spans });
    }
    Ok(tracks)
}

/// Writes label tracks in the CSV layout `load_label_track` reads.
pub fn write_label_tracks(path: &Path, tracks: &[LabelTrack]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    writeln!(out, "file_id,start,end,label").map_err(|e| Error::io(path, e))?;
    for track in tracks {
        for span in &track.spans {
            writeln!(
                out,
                "{},{:.6},{:.6},{}",
                track.file_id,
                span.start_sec,
                span.end_sec,
                span.condition.name()
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// Assigns each frame the condition of the span containing its center time
/// (start-inclusive, end-exclusive). Uncovered frames get `NoSpeech`.
pub fn rasterize_labels(
    track: &LabelTrack,
    frame_period_sec: f64,
    num_frames: usize,
) -> Vec<Condition> {
    (0..num_frames)
        .map(|t| {
            let center = (t as f64 + 0.5) * frame_period_sec;
            track
                .spans
                .iter()
                .find(|span| span.start_sec <= center && center < span.end_sec)
                .map(|span| span.condition)
                .unwrap_or(Condition::NoSpeech)
        })
        .collect()
}
