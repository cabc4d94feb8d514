//! Trains a tiny CNN frame classifier on a freshly generated corpus and
//! saves it. Scaled down to finish in under a minute; raise the corpus
//! length, window cap, and epochs for a real model.
//!
//! Run: `cargo run --release --example train_cnn -- /tmp/segwright-model.sgwt`

use segwright::cli::{self, FeatureArgs, MakeCorpusArgs, TrainCnnArgs};

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "/tmp/segwright-model.sgwt".into());
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("train");
    cli::run_make_corpus(&MakeCorpusArgs {
        out: data.clone(),
        seconds: 60.0,
        seed: 0,
        file_seconds: 30.0,
        snr_db: 5.0,
    })
    .unwrap();
    cli::run_train_cnn(&TrainCnnArgs {
        data,
        out: out.clone().into(),
        epochs: 2,
        seed: 0,
        lr: 1e-3,
        batch_size: 32,
        max_windows: 400,
        features: FeatureArgs {
            frame_period: 0.010,
            window_len: 0.025,
            mel_bands: 32,
            mvn: false,
        },
    })
    .unwrap();
    println!("model written to {out}");
}
