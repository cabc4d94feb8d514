//! Energy-threshold VAD baseline: per-frame log-energy compared against the
//! file mean plus a configurable offset.

use crate::audio::AudioBuffer;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyVadConfig {
    /// dB offset relative to the file's mean frame log-energy.
    pub threshold_offset_db: f64,
    pub frame_period_sec: f64,
}

impl Default for EnergyVadConfig {
    fn default() -> Self {
        EnergyVadConfig {
            threshold_offset_db: 0.0,
            frame_period_sec: 0.010,
        }
    }
}

const ENERGY_FLOOR: f64 = 1e-12;

/// Per-frame log-energies: 10 log10 of the mean squared amplitude over each
/// frame, floored.
pub fn frame_log_energies(audio: &AudioBuffer, frame_period_sec: f64) -> Vec<f64> {
    let hop = (frame_period_sec * audio.sample_rate_hz as f64).round() as usize;
    if hop == 0 || audio.samples.len() < hop {
        return Vec::new();
    }
    let num_frames = audio.samples.len() / hop;
    (0..num_frames)
        .map(|t| {
            let frame = &audio.samples[t * hop..(t + 1) * hop];
            let ms = frame.iter().map(|s| s * s).sum::<f64>() / hop as f64;
            10.0 * ms.max(ENERGY_FLOOR).log10()
        })
        .collect()
}

/// Binary speech decisions: strictly greater than (mean + offset) means
/// speech, so a constant file is all no-speech.
pub fn energy_vad(audio: &AudioBuffer, cfg: &EnergyVadConfig) -> Vec<bool> {
    let energies = frame_log_energies(audio, cfg.frame_period_sec);
    decisions_from_energies(&energies, cfg.threshold_offset_db)
}

/// Thresholding step split out so the tuner can sweep the offset without
/// recomputing energies.
pub fn decisions_from_energies(energies: &[f64], threshold_offset_db: f64) -> Vec<bool> {
    if energies.is_empty() {
        return Vec::new();
    }
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let threshold = mean + threshold_offset_db;
    energies.iter().map(|&e| e > threshold).collect()
}
