//! Tunes the energy VAD to the 0.315 target FPR on a synthetic calibration
//! corpus, then reports per-condition TPR at that operating point.
//!
//! Run: `cargo run --release --example tune_and_evaluate`

use segwright::cli::{
    self, control_range, decisions_at_control, fpr_at_control, prepare_calibration,
    MakeCorpusArgs, Method,
};
use segwright::evaluation::{
    score_frames, tune_operating_point, DEFAULT_FPR_TOL, DEFAULT_TARGET_FPR,
};
use segwright::features::FeatureConfig;

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("cal");
    cli::run_make_corpus(&MakeCorpusArgs {
        out: data.clone(),
        seconds: 120.0,
        seed: 9,
        file_seconds: 60.0,
        snr_db: 5.0,
    })
    .unwrap();

    let method = Method::Energy;
    let files =
        prepare_calibration(method, &data, None, &FeatureConfig::default(), false).unwrap();
    let (lo, hi) = control_range(method);
    let result = tune_operating_point(
        |control| fpr_at_control(method, &files, None, control).unwrap(),
        lo,
        hi,
        DEFAULT_TARGET_FPR,
        DEFAULT_FPR_TOL,
        40,
    )
    .unwrap();
    println!(
        "tuned offset {:.3} dB -> FPR {:.4} in {} iterations",
        result.control_value, result.achieved_fpr, result.iterations
    );

    let mut decisions = Vec::new();
    let mut labels = Vec::new();
    for file in &files {
        decisions
            .extend(decisions_at_control(method, &file.scores, None, result.control_value).unwrap());
        labels.extend(file.labels.iter().copied());
    }
    let report = score_frames(&decisions, &labels).unwrap();
    println!(
        "tpr_clean {:.3}  tpr_noise {:.3}  tpr_music {:.3}  tpr_all {:.3}  fpr {:.3}",
        report.tpr_clean.unwrap_or(f64::NAN),
        report.tpr_noise.unwrap_or(f64::NAN),
        report.tpr_music.unwrap_or(f64::NAN),
        report.tpr_all.unwrap_or(f64::NAN),
        report.fpr.unwrap_or(f64::NAN),
    );
}
