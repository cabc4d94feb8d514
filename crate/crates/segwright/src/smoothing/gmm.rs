//! One-dimensional GMM estimation by EM with deterministic quantile
//! initialization.

use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-4;
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Relative log-likelihood improvement below which EM stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tol: 1e-7,
            max_iter: 200,
        }
    }
}

/// Mixture weights, means and variances of one state's GMM.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl GmmState {
    /// Log density as a stable log-sum-exp over weighted Gaussians.
    pub fn log_density(&self, x: f64) -> f64 {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(&w, (&mu, &var))| w.ln() + log_normal(x, mu, var))
            .collect();
        log_sum_exp(&logs)
    }
}

pub(crate) fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub struct GmmFit {
    pub state: GmmState,
    /// Total data log-likelihood after each EM iteration.
    pub loglik_history: Vec<f64>,
}

/// Fits a `num_mixtures` GMM to `data` by EM.
///
/// Initialization is deterministic: means at the 1/6, 3/6, 5/6 (generally
/// (2i+1)/2K) quantiles of the sorted data, uniform weights, pooled sample
/// variance. The variance floor is applied every M-step.
pub fn fit_gmm_em(data: &[f64], num_mixtures: usize, cfg: &EmConfig) -> Result<GmmFit> {
    assert!(num_mixtures >= 1 && !data.is_empty());
    let n = data.len();
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mean_all = data.iter().sum::<f64>() / n as f64;
    let pooled_var = (data.iter().map(|x| (x - mean_all).powi(2)).sum::<f64>() / n as f64)
        .max(VARIANCE_FLOOR);

    let mut state = GmmState {
        weights: vec![1.0 / num_mixtures as f64; num_mixtures],
        means: (0..num_mixtures)
            .map(|i| {
                let q = (2 * i + 1) as f64 / (2 * num_mixtures) as f64;
                sorted[((q * (n - 1) as f64).round() as usize).min(n - 1)]
            })
            .collect(),
        vars: vec![pooled_var; num_mixtures],
    };

    let mut history = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    for iteration in 0..cfg.max_iter {
        // E-step: responsibilities, and the total log-likelihood for free.
        let mut resp = vec![0.0; n * num_mixtures];
        let mut total_ll = 0.0;
        for (t, &x) in data.iter().enumerate() {
            let logs: Vec<f64> = (0..num_mixtures)
                .map(|k| state.weights[k].ln() + log_normal(x, state.means[k], state.vars[k]))
                .collect();
            let lse = log_sum_exp(&logs);
            total_ll += lse;
            for k in 0..num_mixtures {
                resp[t * num_mixtures + k] = (logs[k] - lse).exp();
            }
        }
        if !total_ll.is_finite() {
            return Err(Error::EmDiverged { iteration });
        }
        history.push(total_ll);

        // M-step with weight and variance floors.
        for k in 0..num_mixtures {
            let nk: f64 = (0..n).map(|t| resp[t * num_mixtures + k]).sum();
            let nk_safe = nk.max(1e-300);
            let mean = (0..n)
                .map(|t| resp[t * num_mixtures + k] * data[t])
                .sum::<f64>()
                / nk_safe;
            let var = (0..n)
                .map(|t| resp[t * num_mixtures + k] * (data[t] - mean).powi(2))
                .sum::<f64>()
                / nk_safe;
            state.means[k] = mean;
            state.vars[k] = var.max(VARIANCE_FLOOR);
            state.weights[k] = (nk / n as f64).max(WEIGHT_FLOOR);
        }
        let wsum: f64 = state.weights.iter().sum();
        for w in state.weights.iter_mut() {
            *w /= wsum;
        }

        let improvement = (total_ll - prev_ll) / prev_ll.abs().max(1.0);
        if iteration > 0 && improvement < cfg.tol {
            break;
        }
        prev_ll = total_ll;
    }

    Ok(GmmFit {
        state,
        loglik_history: history,
    })
}
