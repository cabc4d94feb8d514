//! Computes log-mel features and stacked CNN input windows for a WAV file.
//!
//! Run: `cargo run --example extract_features -- path/to/audio.wav`

use segwright::audio::load_audio;
use segwright::features::{compute_log_mel, stack_windows, FeatureConfig};
use segwright::synth::{generate, SynthConfig};

fn main() {
    let cfg = FeatureConfig::default();
    let audio = match std::env::args().nth(1) {
        Some(path) => load_audio(std::path::Path::new(&path)).unwrap(),
        None => {
            println!("no WAV given; generating 10 s of synthetic audio");
            generate(&SynthConfig {
                duration_sec: 10.0,
                ..SynthConfig::default()
            })
            .unwrap()
            .0
        }
    };
    let feats = compute_log_mel(&audio, &cfg).unwrap();
    println!(
        "{} frames x {} mel bands ({} ms hop)",
        feats.num_frames(),
        feats.frames.first().map_or(0, |f| f.len()),
        cfg.frame_period_sec * 1000.0
    );
    let windows = stack_windows(&feats);
    println!(
        "{} stacked 32x32 windows (320 ms context, edge-replicated)",
        windows.len()
    );
    if let Some(w) = windows.first() {
        let mean: f64 = w.values.iter().sum::<f64>() / w.values.len() as f64;
        println!("first window mean log-energy: {mean:.3}");
    }
}
