//! Generates a small labeled synthetic corpus.
//!
//! Run: `cargo run --example make_corpus -- /tmp/segwright-corpus`

use segwright::audio::{write_audio, write_label_tracks};
use segwright::synth::{generate, SynthConfig};

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "/tmp/segwright-corpus".into());
    let out = std::path::PathBuf::from(out);
    std::fs::create_dir_all(&out).unwrap();

    let mut tracks = Vec::new();
    for i in 0..3u64 {
        let file_id = format!("synth_{i:04}");
        let cfg = SynthConfig {
            duration_sec: 30.0,
            seed: i,
            file_id: file_id.clone(),
            ..SynthConfig::default()
        };
        let (audio, track) = generate(&cfg).unwrap();
        write_audio(&out.join(format!("{file_id}.wav")), &audio).unwrap();
        println!("{file_id}.wav: {} spans", track.spans.len());
        tracks.push(track);
    }
    write_label_tracks(&out.join("labels.csv"), &tracks).unwrap();
    println!("corpus written to {}", out.display());
}
