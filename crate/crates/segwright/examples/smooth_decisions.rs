//! Shows HMM smoothing cleaning up noisy per-frame VAD bits: isolated
//! flips disappear while genuine state changes survive.
//!
//! Run: `cargo run --example smooth_decisions`

use segwright::cnn::FramePrediction;
use segwright::smoothing::{fit_hmm_supervised, smooth_decisions, SmoothMode};

fn render(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '#' } else { '.' }).collect()
}

fn main() {
    // Ground truth: two speech bursts. Observed: the same with scattered
    // classifier errors.
    let truth: Vec<bool> = (0..60).map(|i| (10..25).contains(&i) || (40..55).contains(&i)).collect();
    let mut observed = truth.clone();
    for &i in &[3usize, 17, 18, 30, 47, 58] {
        observed[i] = !observed[i];
    }

    let params = fit_hmm_supervised(&observed, &truth).unwrap();
    let preds: Vec<FramePrediction> = observed
        .iter()
        .map(|&b| FramePrediction {
            p_speech: if b { 0.9 } else { 0.1 },
            p_nonspeech: if b { 0.1 } else { 0.9 },
        })
        .collect();
    let smoothed = smooth_decisions(&preds, &params, SmoothMode::Hard).unwrap();

    println!("truth:    {}", render(&truth));
    println!("observed: {}", render(&observed));
    println!("smoothed: {}", render(&smoothed));
    let errors_before = observed.iter().zip(&truth).filter(|(a, b)| a != b).count();
    let errors_after = smoothed.iter().zip(&truth).filter(|(a, b)| a != b).count();
    println!("frame errors: {errors_before} -> {errors_after}");
}
