//! Segments an audio file with the energy VAD and prints the segments in
//! CSV form. The energy method needs no trained model, so this runs on any
//! 16-bit PCM WAV out of the box.
//!
//! Run: `cargo run --example segment_audio -- path/to/audio.wav`

use segwright::audio::load_audio;
use segwright::energy::{energy_vad, EnergyVadConfig};
use segwright::segmentation::{decisions_to_segments, SegmentPostConfig};
use segwright::synth::{generate, SynthConfig};

fn main() {
    let (audio, file_id) = match std::env::args().nth(1) {
        Some(path) => (
            load_audio(std::path::Path::new(&path)).unwrap(),
            std::path::Path::new(&path)
                .file_stem()
                .unwrap()
                .to_string_lossy()
                .into_owned(),
        ),
        None => {
            println!("no WAV given; generating 20 s of synthetic audio");
            let (audio, _) = generate(&SynthConfig {
                duration_sec: 20.0,
                seed: 4,
                ..SynthConfig::default()
            })
            .unwrap();
            (audio, "synth".into())
        }
    };

    let cfg = EnergyVadConfig::default();
    let decisions = energy_vad(&audio, &cfg);
    let segments = decisions_to_segments(
        &decisions,
        cfg.frame_period_sec,
        &file_id,
        &SegmentPostConfig::default(),
    );
    println!("file_id,segment_id,start_sec,end_sec");
    for s in &segments {
        println!("{},{},{:.6},{:.6}", s.file_id, s.segment_id, s.start_sec, s.end_sec);
    }
    println!("# {} segments", segments.len());
}
