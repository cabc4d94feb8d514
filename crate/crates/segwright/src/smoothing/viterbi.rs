//! Exact maximum a-posteriori path decoding for the two-state HMM.

use super::{emission_loglik, Observation, SmootherParams};
use crate::error::Result;

pub struct ViterbiResult {
    pub path: Vec<bool>,
    pub log_prob: f64,
}

fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log-domain Viterbi. Ties are broken toward state 0 (no-speech), both in
/// the per-step predecessor choice and in the final-state selection.
pub fn viterbi(observations: &[Observation], params: &SmootherParams) -> Result<ViterbiResult> {
    assert!(!observations.is_empty(), "empty observation sequence");
    let t_len = observations.len();
    let log_trans = [
        [
            safe_ln(params.transitions.trans[0][0]),
            safe_ln(params.transitions.trans[0][1]),
        ],
        [
            safe_ln(params.transitions.trans[1][0]),
            safe_ln(params.transitions.trans[1][1]),
        ],
    ];

    let mut delta = [0.0f64; 2];
    let first = emission_loglik(params, observations[0])?;
    for s in 0..2 {
        delta[s] = safe_ln(params.transitions.pi[s]) + first[s];
    }
    let mut backptr = vec![[0usize; 2]; t_len];

    for (t, &obs) in observations.iter().enumerate().skip(1) {
        let emit = emission_loglik(params, obs)?;
        let mut next = [0.0f64; 2];
        for j in 0..2 {
            // Strictly-greater comparison keeps state 0 on ties.
            let from0 = delta[0] + log_trans[0][j];
            let from1 = delta[1] + log_trans[1][j];
            let (best, arg) = if from1 > from0 { (from1, 1) } else { (from0, 0) };
            next[j] = best + emit[j];
            backptr[t][j] = arg;
        }
        delta = next;
    }

    let mut state = if delta[1] > delta[0] { 1 } else { 0 };
    let log_prob = delta[state];
    let mut path = vec![false; t_len];
    for t in (0..t_len).rev() {
        path[t] = state == 1;
        state = backptr[t][state];
    }
    Ok(ViterbiResult { path, log_prob })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::{Emissions, HmmTransitions};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params_from(trans: [[f64; 2]; 2], pi: [f64; 2], p_obs1: [f64; 2]) -> SmootherParams {
        SmootherParams {
            transitions: HmmTransitions { trans, pi },
            emissions: Emissions::Bernoulli { p_obs1 },
            speech_bias: 0.0,
        }
    }

    /// Brute-force oracle: score all 2^T paths. On score ties the decoder's
    /// backward tie rule ("prefer predecessor 0") keeps the path with state 0
    /// at the latest position where tied candidates differ, so the oracle
    /// compares tied paths from the end.
    fn enumerate_best(obs: &[Observation], params: &SmootherParams) -> (Vec<bool>, f64) {
        let t_len = obs.len();
        let mut best_path = Vec::new();
        let mut best_score = f64::NEG_INFINITY;
        for mask in 0..(1u32 << t_len) {
            let path: Vec<bool> = (0..t_len).map(|t| (mask >> t) & 1 == 1).collect();
            let mut score =
                super::safe_ln(params.transitions.pi[path[0] as usize]);
            score += emission_loglik(params, obs[0]).unwrap()[path[0] as usize];
            for t in 1..t_len {
                score += super::safe_ln(
                    params.transitions.trans[path[t - 1] as usize][path[t] as usize],
                );
                score += emission_loglik(params, obs[t]).unwrap()[path[t] as usize];
            }
            // Terms are summed in the same order the decoder uses, so path
            // scores are bit-identical and exact comparison is safe.
            let better =
                score > best_score || (score == best_score && colex_less(&path, &best_path));
            if better {
                best_score = score;
                best_path = path;
            }
        }
        (best_path, best_score)
    }

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

    #[test]
    fn near_deterministic_emissions_follow_observations() {
        let params = params_from(
            [[0.5, 0.5], [0.5, 0.5]],
            [0.5, 0.5],
            [1e-9, 1.0 - 1e-9],
        );
        let obs: Vec<Observation> = [true, true, false, true, false, false]
            .iter()
            .map(|&b| Observation::Bit(b))
            .collect();
        let result = viterbi(&obs, &params).unwrap();
        assert_eq!(result.path, vec![true, true, false, true, false, false]);
    }

    #[test]
    fn uniform_probabilities_give_all_no_speech() {
        let params = params_from([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5], [0.5, 0.5]);
        let obs = vec![Observation::Bit(true); 10];
        let result = viterbi(&obs, &params).unwrap();
        assert!(result.path.iter().all(|&s| !s), "tie rule must pick state 0");
    }

    #[test]
    fn matches_exhaustive_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..200 {
            let t_len = rng.gen_range(1..=12);
            let r = |rng: &mut ChaCha8Rng| rng.gen_range(0.05..0.95);
            let a00 = r(&mut rng);
            let a11 = r(&mut rng);
            let pi0 = r(&mut rng);
            let params = params_from(
                [[a00, 1.0 - a00], [1.0 - a11, a11]],
                [pi0, 1.0 - pi0],
                [r(&mut rng), r(&mut rng)],
            );
            let obs: Vec<Observation> =
                (0..t_len).map(|_| Observation::Bit(rng.gen())).collect();
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
    }
}
