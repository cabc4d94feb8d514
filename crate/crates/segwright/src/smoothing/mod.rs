//! Temporal smoothing of CNN outputs with a two-state HMM.
//!
//! States are the ground-truth labels {no-speech = 0, speech = 1}.
//! Emissions are either Bernoulli over the hard speech-neuron bit or a
//! per-state 3-mixture GMM over the speech-neuron probability. All
//! parameters are estimated in a supervised manner from aligned
//! (observation, true-state) sequences; decoding is exact Viterbi in the
//! log domain.

mod gmm;
mod io;
mod viterbi;

pub use gmm::{fit_gmm_em, EmConfig, GmmState};
pub use io::{load_smoother, save_smoother, SMOOTHER_FORMAT_VERSION};
pub use viterbi::viterbi;

use crate::cnn::FramePrediction;
use crate::error::{Error, Result};

/// Clamp applied to probability observations before GMM fitting/scoring.
pub const PROB_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct HmmTransitions {
    /// `trans[i][j]` = P(state j at t+1 | state i at t).
    pub trans: [[f64; 2]; 2],
    /// Initial distribution over {no-speech, speech}.
    pub pi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Emissions {
    /// `p_obs1[s]` = P(CNN says speech | true state s).
    Bernoulli { p_obs1: [f64; 2] },
    /// One GMM over the speech-neuron probability per state.
    Gmm { states: [GmmState; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherParams {
    pub transitions: HmmTransitions,
    pub emissions: Emissions,
    /// Log-domain offset added to the speech state's emission log-likelihood;
    /// the operating-point control for FPR tuning.
    pub speech_bias: f64,
}

/// An HMM observation: a hard bit or a probability in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Bit(bool),
    Prob(f64),
}

/// Hard/soft selector for [`smooth_decisions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothMode {
    Hard,
    Soft,
}

/// Add-one smoothed transitions plus empirical initial distribution from a
/// ground-truth state sequence.
fn fit_transitions(true_states: &[bool]) -> Result<HmmTransitions> {
    if true_states.len() < 2 {
        return Err(Error::TooShort {
            need: 2,
            got: true_states.len(),
        });
    }
    let mut bigram = [[0u64; 2]; 2];
    for pair in true_states.windows(2) {
        bigram[pair[0] as usize][pair[1] as usize] += 1;
    }
    let mut trans = [[0.0; 2]; 2];
    for i in 0..2 {
        let total = bigram[i][0] + bigram[i][1];
        for j in 0..2 {
            trans[i][j] = (bigram[i][j] + 1) as f64 / (total + 2) as f64;
        }
    }
    let speech = true_states.iter().filter(|&&s| s).count() as f64;
    let t = true_states.len() as f64;
    Ok(HmmTransitions {
        trans,
        pi: [(t - speech) / t, speech / t],
    })
}

/// Supervised Bernoulli-HMM estimation from aligned hard observations and
/// ground-truth states, with add-one smoothing on all counts.
pub fn fit_hmm_supervised(observed_bits: &[bool], true_states: &[bool]) -> Result<SmootherParams> {
    if observed_bits.len() != true_states.len() {
        return Err(Error::LengthMismatch {
            left: observed_bits.len(),
            right: true_states.len(),
        });
    }
    let transitions = fit_transitions(true_states)?;
    let mut obs1 = [0u64; 2];
    let mut total = [0u64; 2];
    for (&o, &s) in observed_bits.iter().zip(true_states) {
        total[s as usize] += 1;
        if o {
            obs1[s as usize] += 1;
        }
    }
    let p_obs1 = [
        (obs1[0] + 1) as f64 / (total[0] + 2) as f64,
        (obs1[1] + 1) as f64 / (total[1] + 2) as f64,
    ];
    Ok(SmootherParams {
        transitions,
        emissions: Emissions::Bernoulli { p_obs1 },
        speech_bias: 0.0,
    })
}

/// A GMM-HMM fit: the parameters plus the per-state EM log-likelihood
/// trajectory (one entry per iteration, non-decreasing by construction).
#[derive(Debug, Clone)]
pub struct GmmHmmFit {
    pub params: SmootherParams,
    pub loglik_history: [Vec<f64>; 2],
}

/// Supervised GMM-HMM estimation: transitions as in [`fit_hmm_supervised`],
/// then per state an EM fit of a `num_mixtures` GMM to that state's
/// observations (clamped away from 0 and 1 first).
pub fn fit_gmm_hmm_supervised(
    observed_probs: &[f64],
    true_states: &[bool],
    num_mixtures: usize,
    em_cfg: &EmConfig,
) -> Result<GmmHmmFit> {
    if observed_probs.len() != true_states.len() {
        return Err(Error::LengthMismatch {
            left: observed_probs.len(),
            right: true_states.len(),
        });
    }
    let transitions = fit_transitions(true_states)?;
    let mut per_state: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&p, &s) in observed_probs.iter().zip(true_states) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ObservationOutOfRange(p));
        }
        per_state[s as usize].push(p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));
    }
    let need = num_mixtures * 10;
    for (state, data) in per_state.iter().enumerate() {
        if data.len() < need {
            return Err(Error::InsufficientStateData {
                state,
                got: data.len(),
                need,
                mixtures: num_mixtures,
            });
        }
    }
    let fit0 = fit_gmm_em(&per_state[0], num_mixtures, em_cfg)?;
    let fit1 = fit_gmm_em(&per_state[1], num_mixtures, em_cfg)?;
    Ok(GmmHmmFit {
        params: SmootherParams {
            transitions,
            emissions: Emissions::Gmm {
                states: [fit0.state, fit1.state],
            },
            speech_bias: 0.0,
        },
        loglik_history: [fit0.loglik_history, fit1.loglik_history],
    })
}

/// Per-state emission log-likelihood of one observation, with the speech
/// entry offset by `speech_bias`.
pub fn emission_loglik(params: &SmootherParams, obs: Observation) -> Result<[f64; 2]> {
    let mut ll = match (&params.emissions, obs) {
        (Emissions::Bernoulli { p_obs1 }, Observation::Bit(bit)) => {
            let per_state = |p: f64| if bit { p.ln() } else { (1.0 - p).ln() };
            [per_state(p_obs1[0]), per_state(p_obs1[1])]
        }
        (Emissions::Gmm { states }, Observation::Prob(p)) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ObservationOutOfRange(p));
            }
            let x = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            [states[0].log_density(x), states[1].log_density(x)]
        }
        (Emissions::Bernoulli { .. }, _) => {
            return Err(Error::VariantMismatch {
                mode: "soft".into(),
            })
        }
        (Emissions::Gmm { .. }, _) => {
            return Err(Error::VariantMismatch {
                mode: "hard".into(),
            })
        }
    };
    ll[1] += params.speech_bias;
    Ok(ll)
}

/// Smooths per-frame CNN predictions into binary decisions via Viterbi.
///
/// Hard mode thresholds `p_speech` at 0.5 (strictly greater means speech)
/// and uses Bernoulli emissions; soft mode feeds `p_speech` directly to the
/// GMM emissions.
pub fn smooth_decisions(
    predictions: &[FramePrediction],
    params: &SmootherParams,
    mode: SmoothMode,
) -> Result<Vec<bool>> {
    match (mode, &params.emissions) {
        (SmoothMode::Hard, Emissions::Bernoulli { .. }) => {
            let obs: Vec<Observation> = predictions
                .iter()
                .map(|p| Observation::Bit(p.p_speech > 0.5))
                .collect();
            Ok(viterbi(&obs, params)?.path)
        }
        (SmoothMode::Soft, Emissions::Gmm { .. }) => {
            let obs: Vec<Observation> = predictions
                .iter()
                .map(|p| Observation::Prob(p.p_speech))
                .collect();
            Ok(viterbi(&obs, params)?.path)
        }
        (mode, _) => Err(Error::VariantMismatch {
            mode: format!("{mode:?}"),
        }),
    }
}
