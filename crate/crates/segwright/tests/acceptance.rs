//! Release acceptance suite. One test per criterion; each prints a single
//! `criterion N ...: PASS` line on success. Tolerances are pinned here and
//! are not configurable.

use std::path::Path;
use std::time::Instant;

use segwright::audio::Condition;
use segwright::cli::{
    self, control_range, decisions_at_control, fpr_at_control, prepare_calibration,
    CachedScores, EvaluateArgs, FeatureArgs, FitGmmHmmArgs, FitHmmArgs, MakeCorpusArgs, Method,
    OutputFormat, SegmentArgs, TrainCnnArgs,
};
use segwright::cnn::{self, CnnModel, PARAM_COUNT};
use segwright::evaluation::{score_frames, tune_operating_point, EvalReport};
use segwright::features::SpectrogramWindow;
use segwright::smoothing::{
    emission_loglik, fit_gmm_em, fit_gmm_hmm_supervised, fit_hmm_supervised, viterbi, EmConfig,
    Emissions, HmmTransitions, Observation, SmootherParams,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TARGET_FPR: f64 = 0.315;
const FPR_TOL: f64 = 0.005;

fn default_features() -> FeatureArgs {
    FeatureArgs {
        frame_period: 0.010,
        window_len: 0.025,
        mel_bands: 32,
        mvn: false,
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: Viterbi against exhaustive path enumeration.

fn bernoulli_params(trans: [[f64; 2]; 2], pi: [f64; 2], p_obs1: [f64; 2]) -> SmootherParams {
    SmootherParams {
        transitions: HmmTransitions { trans, pi },
        emissions: Emissions::Bernoulli { p_obs1 },
        speech_bias: 0.0,
    }
}

fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// On exact score ties the decoder's backward "prefer predecessor 0" rule
/// keeps the path with state 0 at the latest differing position.
fn colex_less(a: &[bool], b: &[bool]) -> bool {
    if b.is_empty() {
        return true;
    }
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return !x;
        }
    }
    false
}

fn enumerate_best(obs: &[Observation], params: &SmootherParams) -> (Vec<bool>, f64) {
    let t_len = obs.len();
    let mut best_path = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    for mask in 0..(1u32 << t_len) {
        let path: Vec<bool> = (0..t_len).map(|t| (mask >> t) & 1 == 1).collect();
        let mut score = safe_ln(params.transitions.pi[path[0] as usize]);
        score += emission_loglik(params, obs[0]).unwrap()[path[0] as usize];
        for t in 1..t_len {
            score += safe_ln(params.transitions.trans[path[t - 1] as usize][path[t] as usize]);
            score += emission_loglik(params, obs[t]).unwrap()[path[t] as usize];
        }
        // Terms are summed in the decoder's order, so scores are
        // bit-identical per path and exact comparison is safe.
        if score > best_score || (score == best_score && colex_less(&path, &best_path)) {
            best_score = score;
            best_path = path;
        }
    }
    (best_path, best_score)
}

#[test]
fn criterion_1_viterbi_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(424_242);
    for trial in 0..200 {
        let t_len = rng.gen_range(1..=12);
        let r = |rng: &mut ChaCha8Rng| rng.gen_range(0.05..0.95);
        let a00 = r(&mut rng);
        let a11 = r(&mut rng);
        let pi0 = r(&mut rng);
        let params = bernoulli_params(
            [[a00, 1.0 - a00], [1.0 - a11, a11]],
            [pi0, 1.0 - pi0],
            [r(&mut rng), r(&mut rng)],
        );
        let obs: Vec<Observation> = (0..t_len).map(|_| Observation::Bit(rng.gen())).collect();
        let decoded = viterbi(&obs, &params).unwrap();
        let (best_path, best_score) = enumerate_best(&obs, &params);
        assert!(
            (decoded.log_prob - best_score).abs() < 1e-9,
            "trial {trial}: log-prob {} vs oracle {}",
            decoded.log_prob,
            best_score
        );
        assert_eq!(decoded.path, best_path, "trial {trial}: path mismatch");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 1 took {elapsed:.1} s, budget 10 s");
    println!("criterion 1 (Viterbi oracle equivalence, 200 instances): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 2: CNN structure and finite-difference gradients.

#[test]
fn criterion_2_cnn_structure_and_gradients() {
    let start = Instant::now();
    let model = CnnModel::new_random(31);
    assert_eq!(model.param_count(), PARAM_COUNT);
    assert_eq!(model.param_count(), 121_474);
    assert_eq!(cnn::FLATTEN_DIM, 1024);

    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let window = SpectrogramWindow {
        values: (0..32 * 32).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        center_frame: 0,
    };
    let targets = [1.0, 0.0];
    let (_, grad) = model.loss_and_grad(&window, targets).unwrap();
    let base = model.params_flat();
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let mut scratch = model.clone();
    for _ in 0..1000 {
        let idx = rng.gen_range(0..base.len());
        let mut plus = base.clone();
        plus[idx] += h;
        scratch.set_params_flat(&plus).unwrap();
        let (loss_plus, _) = scratch.loss_and_grad(&window, targets).unwrap();
        let mut minus = base.clone();
        minus[idx] -= h;
        scratch.set_params_flat(&minus).unwrap();
        let (loss_minus, _) = scratch.loss_and_grad(&window, targets).unwrap();
        let fd = (loss_plus - loss_minus) / (2.0 * h);
        let denom = grad[idx].abs().max(fd.abs()).max(1e-6);
        max_rel = max_rel.max((grad[idx] - fd).abs() / denom);
    }
    assert!(max_rel < 1e-4, "max relative gradient error {max_rel:.2e}");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 2 took {elapsed:.1} s, budget 60 s");
    println!("criterion 2 (CNN structure 121,474 params; FD gradients on 1,000 params): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 3: EM log-likelihood monotonicity and 3-cluster recovery.

fn assert_monotone(history: &[f64], what: &str) {
    for pair in history.windows(2) {
        assert!(
            pair[1] >= pair[0] - 1e-8,
            "{what}: log-likelihood decreased {} -> {}",
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn criterion_3_em_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let true_means = [0.1, 0.5, 0.9];
    let mut data = Vec::new();
    for _ in 0..3000 {
        let k = rng.gen_range(0..3);
        // Box-Muller; sd 0.02 keeps the clusters well separated.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        data.push(true_means[k] + 0.02 * z);
    }
    let fit = fit_gmm_em(&data, 3, &EmConfig::default()).unwrap();
    assert_monotone(&fit.loglik_history, "3-cluster fit");

    // Bijective matching: each true mean claims its nearest fitted mean and
    // no fitted mean is claimed twice.
    let mut claimed = [false; 3];
    for &truth in &true_means {
        let (best, dist) = fit
            .state
            .means
            .iter()
            .enumerate()
            .map(|(i, m)| (i, (m - truth).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(dist < 0.02, "mean {truth} recovered as {}", fit.state.means[best]);
        assert!(!claimed[best], "fitted mean {best} claimed twice");
        claimed[best] = true;
    }

    // A supervised GMM-HMM fit must also have monotone per-state histories.
    let probs: Vec<f64> = (0..2000)
        .map(|i| {
            let speech = (i / 50) % 2 == 1;
            let base: f64 = if speech { 0.85 } else { 0.15 };
            (base + rng.gen_range(-0.12..0.12)).clamp(0.001, 0.999)
        })
        .collect();
    let states: Vec<bool> = (0..2000).map(|i| (i / 50) % 2 == 1).collect();
    let hmm_fit = fit_gmm_hmm_supervised(&probs, &states, 3, &EmConfig::default()).unwrap();
    for (s, hist) in hmm_fit.loglik_history.iter().enumerate() {
        assert_monotone(hist, &format!("gmm-hmm state {s}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 3 took {elapsed:.1} s, budget 10 s");
    println!("criterion 3 (EM monotone log-likelihood; 3-cluster mean recovery): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 4: supervised HMM hand-count fixtures, exact rational values.

#[test]
fn criterion_4_supervised_hmm_hand_counts() {
    let truth = [false, false, true, true];
    let obs = [false, true, true, true];
    let params = fit_hmm_supervised(&obs, &truth).unwrap();
    assert_eq!(params.transitions.trans[0][0], 2.0 / 4.0);
    assert_eq!(params.transitions.trans[0][1], 2.0 / 4.0);
    assert_eq!(params.transitions.trans[1][1], 2.0 / 3.0);
    assert_eq!(params.transitions.trans[1][0], 1.0 / 3.0);
    assert_eq!(params.transitions.pi, [0.5, 0.5]);
    match params.emissions {
        Emissions::Bernoulli { p_obs1 } => {
            assert_eq!(p_obs1[0], 2.0 / 4.0);
            assert_eq!(p_obs1[1], 3.0 / 4.0);
        }
        _ => panic!("expected Bernoulli emissions"),
    }

    let zeros = vec![false; 100];
    let params = fit_hmm_supervised(&zeros, &zeros).unwrap();
    assert_eq!(params.transitions.trans[0][0], 100.0 / 101.0);
    assert_eq!(params.transitions.pi, [1.0, 0.0]);
    match params.emissions {
        Emissions::Bernoulli { p_obs1 } => assert_eq!(p_obs1[0], 1.0 / 102.0),
        _ => panic!("expected Bernoulli emissions"),
    }
    println!("criterion 4 (supervised HMM add-one hand counts, exact): PASS");
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6: end-to-end synthetic benchmark with operating-point
// tuning for all four methods.

fn noisy_subset_tpr(report: &EvalReport) -> f64 {
    let n = report.frames_noise as f64;
    let m = report.frames_music as f64;
    (report.tpr_noise.unwrap() * n + report.tpr_music.unwrap() * m) / (n + m)
}

fn make_corpus(dir: &Path, seconds: f64, seed: u64) {
    cli::run_make_corpus(&MakeCorpusArgs {
        out: dir.to_path_buf(),
        seconds,
        seed,
        file_seconds: 60.0,
        snr_db: 5.0,
    })
    .unwrap();
}

#[test]
fn criterion_5_and_6_end_to_end_benchmark() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let train = tmp.path().join("train");
    let test = tmp.path().join("test");
    make_corpus(&train, 600.0, 1);
    make_corpus(&test, 300.0, 101);

    let model_path = tmp.path().join("model.sgwt");
    cli::run_train_cnn(&TrainCnnArgs {
        data: train.clone(),
        out: model_path.clone(),
        epochs: 2,
        seed: 7,
        lr: 1e-3,
        batch_size: 32,
        max_windows: 800,
        features: default_features(),
    })
    .unwrap();
    let model = cnn::load_model(&model_path).unwrap();
    let feature_cfg = default_features().to_feature_config();

    // One CNN pass over the training corpus feeds both smoother fits.
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
    let gmm_fit = fit_gmm_hmm_supervised(&probs, &states, 3, &EmConfig::default()).unwrap();
    for (s, hist) in gmm_fit.loglik_history.iter().enumerate() {
        assert_monotone(hist, &format!("benchmark gmm-hmm state {s}"));
    }
    let gmm = gmm_fit.params;

    // One CNN pass over the test corpus serves the three CNN-based methods.
    let cal_energy = prepare_calibration(Method::Energy, &test, None, &feature_cfg, false).unwrap();
    let cal_cnn =
        prepare_calibration(Method::Cnn, &test, Some(&model), &feature_cfg, false).unwrap();

    let systems: [(Method, Option<&SmootherParams>, &[cli::CalibrationFile]); 4] = [
        (Method::Energy, None, &cal_energy),
        (Method::Cnn, None, &cal_cnn),
        (Method::CnnHmm, Some(&hmm), &cal_cnn),
        (Method::CnnGmmHmm, Some(&gmm), &cal_cnn),
    ];
    let mut reports = Vec::new();
    for (method, smoother, files) in systems {
        let (lo, hi) = control_range(method);
        let result = tune_operating_point(
            |control| fpr_at_control(method, files, smoother, control).unwrap(),
            lo,
            hi,
            TARGET_FPR,
            FPR_TOL,
            40,
        )
        .unwrap();
        assert!(
            result.converged && result.iterations <= 40,
            "{}: tuner did not converge ({} iterations)",
            method.name(),
            result.iterations
        );
        assert!(
            (result.achieved_fpr - TARGET_FPR).abs() <= FPR_TOL,
            "{}: achieved FPR {:.4} off target",
            method.name(),
            result.achieved_fpr
        );
        let mut decisions = Vec::new();
        let mut labels = Vec::new();
        for file in files {
            decisions
                .extend(decisions_at_control(method, &file.scores, smoother, result.control_value).unwrap());
            labels.extend(file.labels.iter().copied());
        }
        let report = score_frames(&decisions, &labels).unwrap();
        println!(
            "  {:12} control={:+.5} fpr={:.4} tpr_all={:.4} (clean {:.3} noise {:.3} music {:.3})",
            method.name(),
            result.control_value,
            report.fpr.unwrap(),
            report.tpr_all.unwrap(),
            report.tpr_clean.unwrap(),
            report.tpr_noise.unwrap(),
            report.tpr_music.unwrap(),
        );
        reports.push((method, report));
    }
    println!("criterion 6 (all four methods tuned to FPR {TARGET_FPR} +/- {FPR_TOL}): PASS");

    let tpr = |m: Method| {
        reports
            .iter()
            .find(|(method, _)| *method == m)
            .map(|(_, r)| r.tpr_all.unwrap())
            .unwrap()
    };
    let gmm_tpr = tpr(Method::CnnGmmHmm);
    let hmm_tpr = tpr(Method::CnnHmm);
    let cnn_tpr = tpr(Method::Cnn);
    let energy_tpr = tpr(Method::Energy);
    assert!(
        gmm_tpr >= hmm_tpr && hmm_tpr >= cnn_tpr && cnn_tpr >= energy_tpr,
        "ordering violated: gmm {gmm_tpr:.4}, hmm {hmm_tpr:.4}, cnn {cnn_tpr:.4}, energy {energy_tpr:.4}"
    );
    assert!(gmm_tpr >= 0.95, "cnn-gmm-hmm tpr_all {gmm_tpr:.4} < 0.95");
    let gmm_noisy = noisy_subset_tpr(&reports.iter().find(|(m, _)| *m == Method::CnnGmmHmm).unwrap().1);
    let energy_noisy = noisy_subset_tpr(&reports.iter().find(|(m, _)| *m == Method::Energy).unwrap().1);
    assert!(
        gmm_noisy - energy_noisy >= 0.03,
        "noisy-subset gap {:.4} < 0.03 (gmm {gmm_noisy:.4}, energy {energy_noisy:.4})",
        gmm_noisy - energy_noisy
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "benchmark took {elapsed:.0} s, budget 900 s");
    println!(
        "criterion 5 (end-to-end ordering gmm {gmm_tpr:.3} >= hmm {hmm_tpr:.3} >= cnn {cnn_tpr:.3} >= energy {energy_tpr:.3}; {elapsed:.0} s): PASS"
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: hand-built scoring fixture.

#[test]
fn criterion_7_scoring_fixture() {
    use Condition::*;
    let labels = [
        CleanSpeech, CleanSpeech, CleanSpeech, CleanSpeech,
        SpeechNoise, SpeechNoise,
        NoSpeech, NoSpeech, NoSpeech, NoSpeech,
    ];
    let decisions = [
        true, true, true, false, // clean: 3/4
        true, false, // noise: 1/2
        true, false, false, false, // nospeech: 1/4 false alarms
    ];
    let report = score_frames(&decisions, &labels).unwrap();
    assert_eq!(report.tpr_clean, Some(0.75));
    assert_eq!(report.tpr_noise, Some(0.5));
    assert_eq!(report.tpr_music, None);
    assert_eq!(report.tpr_all, Some(4.0 / 6.0));
    assert_eq!(report.fpr, Some(0.25));
    println!("criterion 7 (10-frame scoring fixture, exact): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 8: byte-identical re-run of the scripted pipeline.

fn scripted_pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let train = root.join("train");
    let test = root.join("test");
    cli::run_make_corpus(&MakeCorpusArgs {
        out: train.clone(),
        seconds: 60.0,
        seed: 11,
        file_seconds: 30.0,
        snr_db: 5.0,
    })
    .unwrap();
    cli::run_make_corpus(&MakeCorpusArgs {
        out: test.clone(),
        seconds: 30.0,
        seed: 211,
        file_seconds: 30.0,
        snr_db: 5.0,
    })
    .unwrap();
    let model = root.join("model.sgwt");
    cli::run_train_cnn(&TrainCnnArgs {
        data: train.clone(),
        out: model.clone(),
        epochs: 1,
        seed: 5,
        lr: 1e-3,
        batch_size: 32,
        max_windows: 150,
        features: default_features(),
    })
    .unwrap();
    cli::run_fit_hmm(&FitHmmArgs {
        data: train.clone(),
        model: model.clone(),
        out: root.join("hmm.txt"),
        features: default_features(),
    })
    .unwrap();
    cli::run_fit_gmm_hmm(&FitGmmHmmArgs {
        data: train.clone(),
        model: model.clone(),
        out: root.join("gmm.txt"),
        mixtures: 3,
        features: default_features(),
    })
    .unwrap();
    let seg_dir = root.join("segments");
    cli::run_segment(&SegmentArgs {
        method: Method::CnnGmmHmm,
        input: test.clone(),
        out: seg_dir.clone(),
        model: Some(model.clone()),
        smoother: Some(root.join("gmm.txt")),
        offset_db: 0.0,
        threshold: 0.5,
        format: OutputFormat::Csv,
        min_speech: 0.2,
        min_gap: 0.1,
        pad: 0.0,
        jobs: Some(1),
        features: default_features(),
    })
    .unwrap();
    // Single-file test corpus, so its segment CSV is usable as-is.
    cli::run_evaluate(&EvaluateArgs {
        hyp: seg_dir.join("synth_0000.csv"),
        reference: test.join("labels.csv"),
        out: Some(root.join("report.csv")),
        name: "cnn-gmm-hmm".into(),
        target_fpr: None,
        tol: FPR_TOL,
        frame_period: 0.010,
    })
    .unwrap();

    let mut artifacts = Vec::new();
    for rel in [
        "model.sgwt",
        "hmm.txt",
        "gmm.txt",
        "segments/synth_0000.csv",
        "report.csv",
    ] {
        artifacts.push((rel.to_string(), std::fs::read(root.join(rel)).unwrap()));
    }
    artifacts
}

#[test]
fn criterion_8_pipeline_determinism() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    let run_a = scripted_pipeline(tmp_a.path());
    let run_b = scripted_pipeline(tmp_b.path());
    for ((name_a, bytes_a), (name_b, bytes_b)) in run_a.iter().zip(&run_b) {
        assert_eq!(name_a, name_b);
        assert!(
            bytes_a == bytes_b,
            "{name_a}: differs between identical runs"
        );
    }
    println!("criterion 8 (byte-identical pipeline re-run: model, smoothers, segments, report): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 9 is a manual, out-of-repo experiment: given externally supplied
// dense-label data in the evaluate CSV format, `segwright evaluate` applies
// the per-condition TPR-at-FPR-0.315 protocol over 10 ms frames. There is no
// CI gate; see the README's evaluation section.

#[test]
#[ignore = "manual: requires externally supplied labeled data"]
fn criterion_9_external_data_protocol() {}
