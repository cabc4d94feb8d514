//! Log-mel filterbank features on 10 ms frames and 32x32 spectrogram windows.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub const NUM_MEL_BANDS: usize = 32;
pub const WINDOW_FRAMES: usize = 32;

/// Feature extraction configuration. Defaults give 32 bands on a 10 ms hop
/// with a 25 ms Hann analysis window and a 512-point FFT at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub num_mel_bands: usize,
    pub frame_period_sec: f64,
    pub window_sec: f64,
    pub fft_size: usize,
    pub mel_low_hz: f64,
    pub mel_high_hz: f64,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            num_mel_bands: NUM_MEL_BANDS,
            frame_period_sec: 0.010,
            window_sec: 0.025,
            fft_size: 512,
            mel_low_hz: 20.0,
            mel_high_hz: 7800.0,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if self.num_mel_bands == 0 {
            return Err(Error::InvalidConfig("num_mel_bands must be > 0".into()));
        }
        if self.frame_period_sec <= 0.0 || self.window_sec <= 0.0 {
            return Err(Error::InvalidConfig(
                "frame_period_sec and window_sec must be > 0".into(),
            ));
        }
        if !(self.mel_low_hz < self.mel_high_hz
            && self.mel_high_hz <= sample_rate_hz as f64 / 2.0)
        {
            return Err(Error::InvalidConfig(format!(
                "need mel_low_hz < mel_high_hz <= {}",
                sample_rate_hz as f64 / 2.0
            )));
        }
        let win = (self.window_sec * sample_rate_hz as f64).round() as usize;
        if win > self.fft_size {
            return Err(Error::InvalidConfig(format!(
                "analysis window ({win} samples) exceeds fft_size {}",
                self.fft_size
            )));
        }
        Ok(())
    }
}

/// T frames by `num_mel_bands` log-energies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Vec<Vec<f64>>,
    pub frame_period_sec: f64,
}

impl FeatureMatrix {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// One 32x32 (time x mel) CNN input, centered on `center_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramWindow {
    /// Row-major, `values[time * 32 + mel]`.
    pub values: Vec<f64>,
    pub center_frame: usize,
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, peak-normalized, as per-filter weights over
/// the `fft_size/2 + 1` power-spectrum bins.
pub fn mel_filterbank(cfg: &FeatureConfig, sample_rate_hz: u32) -> Vec<Vec<f64>> {
    let num_bins = cfg.fft_size / 2 + 1;
    let mel_lo = hz_to_mel(cfg.mel_low_hz);
    let mel_hi = hz_to_mel(cfg.mel_high_hz);
    // num_mel_bands filters need num_mel_bands + 2 edge points.
    let edges: Vec<f64> = (0..cfg.num_mel_bands + 2)
        .map(|i| {
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.num_mel_bands + 1) as f64)
        })
        .collect();
    let bin_hz = sample_rate_hz as f64 / cfg.fft_size as f64;

    (0..cfg.num_mel_bands)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..num_bins)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// Center frequency (Hz) of each mel filter; used by tests and diagnostics.
pub fn mel_centers_hz(cfg: &FeatureConfig) -> Vec<f64> {
    let mel_lo = hz_to_mel(cfg.mel_low_hz);
    let mel_hi = hz_to_mel(cfg.mel_high_hz);
    (1..=cfg.num_mel_bands)
        .map(|i| {
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.num_mel_bands + 1) as f64)
        })
        .collect()
}

/// Computes log-mel filterbank energies. Frame t windows
/// `window_sec` of samples starting at `t * frame_period_sec` (Hann),
/// zero-padded to `fft_size`; frames run while at least one hop of audio
/// remains, the tail zero-padded. Audio shorter than one analysis window
/// yields an empty matrix.
pub fn compute_log_mel(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    cfg.validate(audio.sample_rate_hz)?;
    let hop = (cfg.frame_period_sec * audio.sample_rate_hz as f64).round() as usize;
    let win = (cfg.window_sec * audio.sample_rate_hz as f64).round() as usize;
    if audio.samples.len() < win {
        return Ok(FeatureMatrix {
            frames: Vec::new(),
            frame_period_sec: cfg.frame_period_sec,
        });
    }
    let num_frames = audio.samples.len() / hop;
    let bank = mel_filterbank(cfg, audio.sample_rate_hz);
    let hann: Vec<f64> = (0..win)
        .map(|i| {
            0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos()
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let num_bins = cfg.fft_size / 2 + 1;
    let mut frames = Vec::with_capacity(num_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];

    for t in 0..num_frames {
        let start = t * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = if i < win {
                audio.samples.get(start + i).copied().unwrap_or(0.0) * hann[i]
            } else {
                0.0
            };
            *slot = Complex::new(s, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..num_bins].iter().map(|c| c.norm_sqr()).collect();
        let row: Vec<f64> = bank
            .iter()
            .map(|filter| {
                let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                energy.max(cfg.log_floor).ln()
            })
            .collect();
        frames.push(row);
    }
    Ok(FeatureMatrix {
        frames,
        frame_period_sec: cfg.frame_period_sec,
    })
}

/// Stacks features into one 32-frame window per frame: window for frame t
/// covers frames [t-16, t+15], with out-of-range frames edge-replicated.
pub fn stack_windows(feats: &FeatureMatrix) -> Vec<SpectrogramWindow> {
    let t_max = feats.num_frames();
    (0..t_max)
        .map(|t| {
            let mut values = Vec::with_capacity(WINDOW_FRAMES * NUM_MEL_BANDS);
            for offset in 0..WINDOW_FRAMES as isize {
                let src = (t as isize + offset - 16).clamp(0, t_max as isize - 1) as usize;
                values.extend_from_slice(&feats.frames[src]);
            }
            SpectrogramWindow {
                values,
                center_frame: t,
            }
        })
        .collect()
}

/// Optional per-file mean-variance normalization of a feature matrix.
pub fn normalize_features(feats: &mut FeatureMatrix) {
    let t = feats.num_frames();
    if t == 0 {
        return;
    }
    let bands = feats.frames[0].len();
    for b in 0..bands {
        let mean: f64 = feats.frames.iter().map(|f| f[b]).sum::<f64>() / t as f64;
        let var: f64 =
            feats.frames.iter().map(|f| (f[b] - mean).powi(2)).sum::<f64>() / t as f64;
        let sd = var.sqrt().max(1e-10);
        for f in feats.frames.iter_mut() {
            f[b] = (f[b] - mean) / sd;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SAMPLE_RATE_HZ;

    fn audio_from(samples: Vec<f64>) -> AudioBuffer {
        AudioBuffer {
            samples,
            sample_rate_hz: SAMPLE_RATE_HZ,
        }
    }

    /// O(N^2) DFT of one Hann-windowed, zero-padded frame; independent of the
    /// FFT path.
    fn direct_dft_log_mel_frame(samples: &[f64], cfg: &FeatureConfig) -> Vec<f64> {
        let win = (cfg.window_sec * SAMPLE_RATE_HZ as f64).round() as usize;
        let mut frame = vec![0.0; cfg.fft_size];
        for i in 0..win {
            let hann =
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos();
            frame[i] = samples.get(i).copied().unwrap_or(0.0) * hann;
        }
        let num_bins = cfg.fft_size / 2 + 1;
        let mut power = vec![0.0; num_bins];
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &x) in frame.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * k as f64 * n as f64
                    / cfg.fft_size as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            *p = re * re + im * im;
        }
        mel_filterbank(cfg, SAMPLE_RATE_HZ)
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(cfg.log_floor).ln()
            })
            .collect()
    }

    #[test]
    fn one_second_gives_100_frames() {
        let audio = audio_from(vec![0.1; SAMPLE_RATE_HZ as usize]);
        let feats = compute_log_mel(&audio, &FeatureConfig::default()).unwrap();
        assert_eq!(feats.num_frames(), 100);
        assert_eq!(feats.frames[0].len(), 32);
    }

    #[test]
    fn silence_hits_log_floor() {
        let audio = audio_from(vec![0.0; SAMPLE_RATE_HZ as usize]);
        let cfg = FeatureConfig::default();
        let feats = compute_log_mel(&audio, &cfg).unwrap();
        let floor = cfg.log_floor.ln();
        for row in &feats.frames {
            for &v in row {
                assert_eq!(v, floor);
            }
        }
    }

    #[test]
    fn short_audio_gives_empty_matrix() {
        let audio = audio_from(vec![0.1; 100]);
        let feats = compute_log_mel(&audio, &FeatureConfig::default()).unwrap();
        assert_eq!(feats.num_frames(), 0);
        assert!(stack_windows(&feats).is_empty());
    }

    #[test]
    fn sine_peaks_at_nearest_mel_band_and_matches_dft_oracle() {
        let cfg = FeatureConfig::default();
        let freq = 1000.0;
        let samples: Vec<f64> = (0..SAMPLE_RATE_HZ as usize / 2)
            .map(|i| {
                0.5 * (2.0 * std::f64::consts::PI * freq * i as f64
                    / SAMPLE_RATE_HZ as f64)
                    .sin()
            })
            .collect();
        let feats = compute_log_mel(&audio_from(samples.clone()), &cfg).unwrap();

        let argmax = |row: &[f64]| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0
        };
        let centers = mel_centers_hz(&cfg);
        let nearest = centers
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq).abs().total_cmp(&(b.1 - freq).abs()))
            .unwrap()
            .0;
        assert_eq!(argmax(&feats.frames[10]), nearest);

        // Frame 10 against the direct-DFT reference.
        let hop = 160;
        let oracle = direct_dft_log_mel_frame(&samples[10 * hop..], &cfg);
        for (a, b) in feats.frames[10].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "fft {a} vs dft {b}");
        }
    }

    #[test]
    fn energy_monotone_in_gain() {
        let cfg = FeatureConfig::default();
        let samples: Vec<f64> = (0..8000)
            .map(|i| 0.2 * (0.007 * i as f64).sin() + 0.05 * (0.031 * i as f64).cos())
            .collect();
        let scaled: Vec<f64> = samples.iter().map(|s| s * 2.0).collect();
        let a = compute_log_mel(&audio_from(samples), &cfg).unwrap();
        let b = compute_log_mel(&audio_from(scaled), &cfg).unwrap();
        for (ra, rb) in a.frames.iter().zip(&b.frames) {
            for (&va, &vb) in ra.iter().zip(rb) {
                assert!(vb >= va - 1e-12);
            }
        }
    }

    #[test]
    fn filterbank_weights_cover_passband() {
        let cfg = FeatureConfig::default();
        let bank = mel_filterbank(&cfg, SAMPLE_RATE_HZ);
        let bin_hz = SAMPLE_RATE_HZ as f64 / cfg.fft_size as f64;
        for b in 0..cfg.fft_size / 2 + 1 {
            let f = b as f64 * bin_hz;
            let total: f64 = bank.iter().map(|filter| filter[b]).sum();
            // Strictly inside the band edges every bin is touched by some
            // triangle; between adjacent centers the two weights sum to 1.
            if f > cfg.mel_low_hz + bin_hz && f < cfg.mel_high_hz - bin_hz {
                assert!(total > 0.0 && total <= 1.0 + 1e-12, "bin {b}: {total}");
            }
        }
    }

    #[test]
    fn stacking_constant_features_gives_identical_windows() {
        let feats = FeatureMatrix {
            frames: vec![vec![1.5; 32]; 50],
            frame_period_sec: 0.010,
        };
        let windows = stack_windows(&feats);
        assert_eq!(windows.len(), 50);
        for w in &windows {
            assert_eq!(w.values, windows[0].values);
        }
    }

    #[test]
    fn stacking_interior_window_matches_direct_slice() {
        // Ramp features: frame t has constant value t.
        let feats = FeatureMatrix {
            frames: (0..100).map(|t| vec![t as f64; 32]).collect(),
            frame_period_sec: 0.010,
        };
        let windows = stack_windows(&feats);
        assert_eq!(windows.len(), 100);
        // Naive slice oracle for the window at t=50: frames 34..66.
        let expected: Vec<f64> = (34..66).flat_map(|t| vec![t as f64; 32]).collect();
        assert_eq!(windows[50].values, expected);
    }

    #[test]
    fn stacking_edges_replicate() {
        let feats = FeatureMatrix {
            frames: (0..40).map(|t| vec![t as f64; 32]).collect(),
            frame_period_sec: 0.010,
        };
        let windows = stack_windows(&feats);
        // First window: frames clamped to 0 for the 16 out-of-range slots.
        assert!(windows[0].values[..16 * 32].iter().all(|&v| v == 0.0));
        assert_eq!(windows[0].values[16 * 32], 0.0);
        assert_eq!(windows[0].values[17 * 32], 1.0);
        // Last window replicates the final frame.
        let last = &windows[39];
        assert!(last.values[(17 * 32)..].iter().all(|&v| v == 39.0));
    }
}
