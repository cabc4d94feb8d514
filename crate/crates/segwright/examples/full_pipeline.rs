//! The whole toolkit end to end at miniature scale: generate corpora, train
//! the CNN, fit both HMM smoothers, segment a test set with each method, and
//! score the results. Mirrors what the `segwright` binary's subcommands do,
//! driven through the library.
//!
//! Run: `cargo run --release --example full_pipeline` (takes a few minutes)

use segwright::cli::{
    self, prepare_calibration, CachedScores, FeatureArgs, MakeCorpusArgs, Method, TrainCnnArgs,
};
use segwright::cnn;
use segwright::evaluation::score_frames;
use segwright::features::FeatureConfig;
use segwright::smoothing::{
    fit_gmm_hmm_supervised, fit_hmm_supervised, smooth_decisions, EmConfig, SmoothMode,
};

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let train = tmp.path().join("train");
    let test = tmp.path().join("test");
    for (dir, seconds, seed) in [(&train, 120.0, 1u64), (&test, 60.0, 50)] {
        cli::run_make_corpus(&MakeCorpusArgs {
            out: dir.clone(),
            seconds,
            seed,
            file_seconds: 60.0,
            snr_db: 5.0,
        })
        .unwrap();
    }

    let model_path = tmp.path().join("model.sgwt");
    println!("training CNN...");
    cli::run_train_cnn(&TrainCnnArgs {
        data: train.clone(),
        out: model_path.clone(),
        epochs: 2,
        seed: 7,
        lr: 1e-3,
        batch_size: 32,
        max_windows: 800,
        features: FeatureArgs {
            frame_period: 0.010,
            window_len: 0.025,
            mel_bands: 32,
            mvn: false,
        },
    })
    .unwrap();
    let model = cnn::load_model(&model_path).unwrap();
    let feature_cfg = FeatureConfig::default();

    println!("fitting smoothers...");
    let cal_train =
        prepare_calibration(Method::Cnn, &train, Some(&model), &feature_cfg, false).unwrap();
    let mut probs = Vec::new();
    let mut states = Vec::new();
    for file in &cal_train {
        if let CachedScores::Predictions(preds) = &file.scores {
            probs.extend(preds.iter().map(|p| p.p_speech));
        }
        states.extend(file.labels.iter().map(|c| c.is_speech()));
    }
    let bits: Vec<bool> = probs.iter().map(|&p| p > 0.5).collect();
    let hmm = fit_hmm_supervised(&bits, &states).unwrap();
    let gmm = fit_gmm_hmm_supervised(&probs, &states, 3, &EmConfig::default())
        .unwrap()
        .params;

    println!("scoring on the test set...");
    let cal_test =
        prepare_calibration(Method::Cnn, &test, Some(&model), &feature_cfg, false).unwrap();
    let named: [(&str, Box<dyn Fn(&CachedScores) -> Vec<bool>>); 3] = [
        (
            "cnn",
            Box::new(|scores| match scores {
                CachedScores::Predictions(p) => p.iter().map(|x| x.p_speech > 0.5).collect(),
                _ => unreachable!(),
            }),
        ),
        (
            "cnn-hmm",
            Box::new(|scores| match scores {
                CachedScores::Predictions(p) => {
                    smooth_decisions(p, &hmm, SmoothMode::Hard).unwrap()
                }
                _ => unreachable!(),
            }),
        ),
        (
            "cnn-gmm-hmm",
            Box::new(|scores| match scores {
                CachedScores::Predictions(p) => {
                    smooth_decisions(p, &gmm, SmoothMode::Soft).unwrap()
                }
                _ => unreachable!(),
            }),
        ),
    ];
    for (name, decide) in &named {
        let mut decisions = Vec::new();
        let mut labels = Vec::new();
        for file in &cal_test {
            decisions.extend(decide(&file.scores));
            labels.extend(file.labels.iter().copied());
        }
        let report = score_frames(&decisions, &labels).unwrap();
        println!(
            "{name:12} tpr_all {:.3}  fpr {:.3}",
            report.tpr_all.unwrap(),
            report.fpr.unwrap()
        );
    }
}
