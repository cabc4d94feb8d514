//! Deterministic synthetic corpus generation.
//!
//! Stand-ins for the four conditions: "speech" is an amplitude-modulated
//! harmonic complex, "music" a sustained chord, "noise" shaped broadband
//! noise. NoSpeech stretches alternate between near-silence and non-speech
//! distractor events (noise bursts, chords, or speech mimics), which is
//! what makes the energy baseline imperfect and gives the classifiers
//! something to beat.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioBuffer, Condition, LabelSpan, LabelTrack};
use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub duration_sec: f64,
    pub seed: u64,
    /// Proportions over (NoSpeech, CleanSpeech, SpeechMusic, SpeechNoise).
    pub condition_mix: [f64; 4],
    /// Mean SNR of the noise/music overlay on speech, in dB. Each event
    /// draws its own SNR a few dB around this, so per-frame classifier
    /// confidence varies and smoothing has errors to correct.
    pub snr_db: f64,
    pub event_len_range_sec: (f64, f64),
    pub file_id: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_sec: 60.0,
            seed: 0,
            condition_mix: [0.40, 0.24, 0.18, 0.18],
            snr_db: 5.0,
            event_len_range_sec: (0.4, 1.2),
            file_id: "synth".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.condition_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "condition_mix sums to {sum}, expected 1"
            )));
        }
        if self.duration_sec <= 0.0 {
            return Err(Error::InvalidConfig("duration_sec must be > 0".into()));
        }
        if self.event_len_range_sec.0 <= 0.0
            || self.event_len_range_sec.0 > self.event_len_range_sec.1
        {
            return Err(Error::InvalidConfig("bad event_len_range_sec".into()));
        }
        Ok(())
    }
}

// Background dither keeps no two windows bit-identical, so tuned thresholds
// always have a continuum of scores to cut through.
const DITHER_AMP: f64 = 5e-4;

const CONDITIONS: [Condition; 4] = [
    Condition::NoSpeech,
    Condition::CleanSpeech,
    Condition::SpeechMusic,
    Condition::SpeechNoise,
];

/// Generates one labeled file, bit-reproducible from `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> Result<(AudioBuffer, LabelTrack)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total_samples = (cfg.duration_sec * SAMPLE_RATE_HZ as f64).round() as usize;
    let mut samples = vec![0.0f64; total_samples];
    for s in samples.iter_mut() {
        *s = rng.gen_range(-DITHER_AMP..DITHER_AMP);
    }

    let mut spans = Vec::new();
    let mut elapsed = [0.0f64; 4]; // realized seconds per condition
    let mut cursor = 0usize;
    while cursor < total_samples {
        // Deficit scheduling keeps realized proportions close to the mix.
        let total_elapsed: f64 = elapsed.iter().sum::<f64>().max(1e-9);
        let mut condition_idx = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for i in 0..4 {
            let deficit = cfg.condition_mix[i] - elapsed[i] / total_elapsed;
            if deficit > best_deficit {
                best_deficit = deficit;
                condition_idx = i;
            }
        }
        let len_sec = rng.gen_range(cfg.event_len_range_sec.0..=cfg.event_len_range_sec.1);
        let len = ((len_sec * SAMPLE_RATE_HZ as f64).round() as usize)
            .min(total_samples - cursor);
        let condition = CONDITIONS[condition_idx];
        render_event(&mut rng, &mut samples[cursor..cursor + len], condition, cfg.snr_db);
        let start_sec = cursor as f64 / SAMPLE_RATE_HZ as f64;
        let end_sec = (cursor + len) as f64 / SAMPLE_RATE_HZ as f64;
        spans.push(LabelSpan {
            start_sec,
            end_sec,
            condition,
        });
        elapsed[condition_idx] += end_sec - start_sec;
        cursor += len;
    }

    // Rounding can leave a sliver at the end; label it NoSpeech.
    if let Some(last) = spans.last() {
        if last.end_sec < cfg.duration_sec - 1e-9 {
            let start_sec = last.end_sec;
            spans.push(LabelSpan {
                start_sec,
                end_sec: cfg.duration_sec,
                condition: Condition::NoSpeech,
            });
        }
    } else {
        spans.push(LabelSpan {
            start_sec: 0.0,
            end_sec: cfg.duration_sec,
            condition: Condition::NoSpeech,
        });
    }

    for s in samples.iter_mut() {
        *s = s.clamp(-1.0, 1.0);
    }
    Ok((
        AudioBuffer {
            samples,
            sample_rate_hz: SAMPLE_RATE_HZ,
        },
        LabelTrack {
            file_id: cfg.file_id.clone(),
            spans,
        },
    ))
}

// Event levels are target RMS values. Clean speech is loud. The noisy
// conditions put a distractor-level background first and bury speech at or
// below it, so their total energy is indistinguishable from NoSpeech
// distractors (the energy baseline degrades exactly there) and per-frame
// classification is genuinely uncertain (run-level smoothing has headroom).
const CLEAN_RMS: (f64, f64) = (0.10, 0.30);
// NoSpeech distractors run louder than noisy-condition backgrounds so a
// pure energy detector cannot separate the two by level.
// NoSpeech distractors run louder than noisy-condition backgrounds so a
// pure energy detector cannot separate the two by level.
const NOSPEECH_DISTRACTOR_RMS: (f64, f64) = (0.015, 0.45);
const NOSPEECH_DISTRACTOR_PROB: f64 = 0.65;
const BACKGROUND_RMS: (f64, f64) = (0.03, 0.15);
const SNR_JITTER_DB: (f64, f64) = (-11.0, 2.0);
// A minority of noisy-condition events are buried below the background by
// a per-event depth: per-frame hard decisions on them collapse while the
// soft scores stay informative, which is where density emissions earn
// their keep. The depth continuum also spreads event flip points so tuned
// operating points respond in fine steps.
const BURIED_PROB: f64 = 0.35;
const BURIED_SNR_DB: (f64, f64) = (-9.0, -5.0);
// Speech and the mimic distractor share the same harmonic texture and
// differ only in amplitude-modulation rate; mimic rates near the speech
// band are hard, distant ones easy, so classifier confidence on mimics is
// graded and operating-point controls respond in fine steps.
const SPEECH_AM_HZ: (f64, f64) = (2.5, 8.0);
// Half of the speech events carry a few brief near-silent dips, like stop
// closures between syllables. Each dip is short enough that a sequence
// smoother carries the speech state across it, while a per-frame classifier
// drops those frames.
const DIP_PROB: f64 = 0.5;
const DIP_COUNT: (u32, u32) = (1, 3);
const DIP_LEN_SEC: (f64, f64) = (0.03, 0.06);
const DIP_GAIN: f64 = 0.05;
const MIMIC_AM_HZ: (f64, f64) = (8.5, 18.0);

fn render_event(rng: &mut ChaCha8Rng, out: &mut [f64], condition: Condition, snr_db: f64) {
    match condition {
        Condition::NoSpeech => {
            // Most of the NoSpeech time carries a distractor.
            if rng.gen_bool(NOSPEECH_DISTRACTOR_PROB) {
                let rms = log_uniform(rng, NOSPEECH_DISTRACTOR_RMS.0, NOSPEECH_DISTRACTOR_RMS.1);
                match rng.gen_range(0..3) {
                    0 => add_noise(rng, out, rms),
                    1 => add_chord(rng, out, rms),
                    // The hard distractor: speech texture at a non-speech
                    // modulation rate.
                    _ => add_mimic(rng, out, rms),
                }
            }
        }
        Condition::CleanSpeech => {
            let rms = log_uniform(rng, CLEAN_RMS.0, CLEAN_RMS.1);
            add_speech(rng, out, rms);
        }
        Condition::SpeechMusic => {
            let bg = log_uniform(rng, BACKGROUND_RMS.0, BACKGROUND_RMS.1);
            let snr = noisy_snr(rng, snr_db);
            add_chord(rng, out, bg);
            add_speech(rng, out, speech_rms(bg, snr));
        }
        Condition::SpeechNoise => {
            let bg = log_uniform(rng, BACKGROUND_RMS.0, BACKGROUND_RMS.1);
            let snr = noisy_snr(rng, snr_db);
            add_noise(rng, out, bg);
            add_speech(rng, out, speech_rms(bg, snr));
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn speech_rms(background_rms: f64, snr_db: f64) -> f64 {
    background_rms * 10f64.powf(snr_db / 20.0)
}

fn noisy_snr(rng: &mut ChaCha8Rng, snr_db: f64) -> f64 {
    if rng.gen_bool(BURIED_PROB) {
        // Buried events sit in a narrow band just under the background:
        // audible in aggregate, but no single frame is convincing on its own.
        rng.gen_range(BURIED_SNR_DB.0..BURIED_SNR_DB.1)
    } else {
        snr_db + rng.gen_range(SNR_JITTER_DB.0..SNR_JITTER_DB.1)
    }
}

/// Adds `event` into `out` scaled to an exact target RMS, so the level
/// knobs above are in real signal units regardless of generator shape.
fn mix_at_rms(out: &mut [f64], event: &[f64], target_rms: f64) {
    let ms = event.iter().map(|v| v * v).sum::<f64>() / event.len().max(1) as f64;
    if ms <= 0.0 {
        return;
    }
    let scale = target_rms / ms.sqrt();
    for (o, e) in out.iter_mut().zip(event) {
        *o += scale * e;
    }
}

/// Amplitude-modulated harmonic complex with a randomized fundamental in
/// 120-300 Hz; partials up to 4 kHz with 1/n rolloff.
fn harmonic_am_event(rng: &mut ChaCha8Rng, len: usize, am_range: (f64, f64)) -> Vec<f64> {
    let f0 = rng.gen_range(120.0..300.0);
    let am_hz = rng.gen_range(am_range.0..am_range.1);
    let am_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let num_partials = ((4000.0 / f0) as usize).max(1);
    let phases: Vec<f64> = (0..num_partials)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    (0..len)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE_HZ as f64;
            let mut v = 0.0;
            for (n, &phase) in phases.iter().enumerate() {
                let h = (n + 1) as f64;
                v += (std::f64::consts::TAU * f0 * h * t + phase).sin() / h;
            }
            let am = 0.55 + 0.45 * (std::f64::consts::TAU * am_hz * t + am_phase).sin();
            am * v
        })
        .collect()
}

fn add_speech(rng: &mut ChaCha8Rng, out: &mut [f64], target_rms: f64) {
    let mut event = harmonic_am_event(rng, out.len(), SPEECH_AM_HZ);
    if rng.gen_bool(DIP_PROB) {
        let dips = rng.gen_range(DIP_COUNT.0..=DIP_COUNT.1);
        for _ in 0..dips {
            let gap = (rng.gen_range(DIP_LEN_SEC.0..DIP_LEN_SEC.1)
                * SAMPLE_RATE_HZ as f64) as usize;
            if event.len() < 4 * gap {
                continue;
            }
            // Keep dips away from the edges so spans still open and close
            // with voiced material.
            let start = rng.gen_range(gap..event.len() - 2 * gap);
            let ramp = ((0.005 * SAMPLE_RATE_HZ as f64) as usize).max(1);
            for i in 0..gap {
                let fade = ((i.min(gap - 1 - i)) as f64 / ramp as f64).min(1.0);
                event[start + i] *= 1.0 - fade * (1.0 - DIP_GAIN);
            }
        }
    }
    mix_at_rms(out, &event, target_rms);
}

/// Same texture as speech; only the modulation rate says otherwise.
fn add_mimic(rng: &mut ChaCha8Rng, out: &mut [f64], target_rms: f64) {
    let event = harmonic_am_event(rng, out.len(), MIMIC_AM_HZ);
    mix_at_rms(out, &event, target_rms);
}

/// Sustained three-note chord (no modulation).
fn add_chord(rng: &mut ChaCha8Rng, out: &mut [f64], target_rms: f64) {
    let root = rng.gen_range(200.0..600.0);
    let ratios = [1.0, 1.26, 1.5];
    let phases: [f64; 3] = [
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
    ];
    let event: Vec<f64> = (0..out.len())
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE_HZ as f64;
            ratios
                .iter()
                .zip(&phases)
                .map(|(r, &phase)| (std::f64::consts::TAU * root * r * t + phase).sin())
                .sum()
        })
        .collect();
    mix_at_rms(out, &event, target_rms);
}

/// Broadband noise shaped by a one-pole lowpass.
fn add_noise(rng: &mut ChaCha8Rng, out: &mut [f64], target_rms: f64) {
    let pole = 0.5;
    let mut prev = 0.0;
    let event: Vec<f64> = (0..out.len())
        .map(|_| {
            let white: f64 = rng.gen_range(-1.0..1.0);
            prev = pole * prev + (1.0 - pole) * white;
            prev
        })
        .collect();
    mix_at_rms(out, &event, target_rms);
}
