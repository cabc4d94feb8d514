//! Frame-level scoring (per-condition TPR at a fixed FPR) and bisection
//! tuning of a system's scalar operating-point control.

use crate::audio::Condition;
use crate::error::{Error, Result};

/// Default evaluation operating point.
pub const DEFAULT_TARGET_FPR: f64 = 0.315;
pub const DEFAULT_FPR_TOL: f64 = 0.005;

/// Frame-level scoring result. Per-condition TPRs are `None` when the
/// condition has no frames (undefined, not zero).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tpr_clean: Option<f64>,
    pub tpr_noise: Option<f64>,
    pub tpr_music: Option<f64>,
    /// Micro average over the three speech conditions.
    pub tpr_all: Option<f64>,
    pub fpr: Option<f64>,
    pub frames_clean: usize,
    pub frames_noise: usize,
    pub frames_music: usize,
    pub frames_nospeech: usize,
    pub num_frames_total: usize,
}

/// Scores binary decisions against dense condition labels. The three speech
/// conditions collapse to one positive class; FPR is computed over NoSpeech
/// frames only.
pub fn score_frames(decisions: &[bool], labels: &[Condition]) -> Result<EvalReport> {
    if decisions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: decisions.len(),
            right: labels.len(),
        });
    }
    let mut hits = [0usize; 3]; // clean, noise, music
    let mut totals = [0usize; 3];
    let mut false_alarms = 0usize;
    let mut nospeech = 0usize;
    for (&d, &label) in decisions.iter().zip(labels) {
        match label {
            Condition::CleanSpeech => {
                totals[0] += 1;
                hits[0] += d as usize;
            }
            Condition::SpeechNoise => {
                totals[1] += 1;
                hits[1] += d as usize;
            }
            Condition::SpeechMusic => {
                totals[2] += 1;
                hits[2] += d as usize;
            }
            Condition::NoSpeech => {
                nospeech += 1;
                false_alarms += d as usize;
            }
        }
    }
    let rate = |h: usize, t: usize| if t > 0 { Some(h as f64 / t as f64) } else { None };
    let speech_total: usize = totals.iter().sum();
    let speech_hits: usize = hits.iter().sum();
    Ok(EvalReport {
        tpr_clean: rate(hits[0], totals[0]),
        tpr_noise: rate(hits[1], totals[1]),
        tpr_music: rate(hits[2], totals[2]),
        tpr_all: rate(speech_hits, speech_total),
        fpr: rate(false_alarms, nospeech),
        frames_clean: totals[0],
        frames_noise: totals[1],
        frames_music: totals[2],
        frames_nospeech: nospeech,
        num_frames_total: decisions.len(),
    })
}

/// Result of operating-point tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub control_value: f64,
    pub achieved_fpr: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Bisects a scalar control until the system's FPR on the calibration set is
/// within `tol` of `target_fpr`.
///
/// `eval_fpr` maps a control value to the achieved FPR; it must be
/// empirically monotone over `[control_lo, control_hi]` (either direction).
/// Returns the bracketing value closest to the target if `max_iter` runs out.
pub fn tune_operating_point(
    mut eval_fpr: impl FnMut(f64) -> f64,
    control_lo: f64,
    control_hi: f64,
    target_fpr: f64,
    tol: f64,
    max_iter: usize,
) -> Result<TuneResult> {
    let fpr_lo = eval_fpr(control_lo);
    let fpr_hi = eval_fpr(control_hi);
    let (min_f, max_f) = (fpr_lo.min(fpr_hi), fpr_lo.max(fpr_hi));
    if target_fpr < min_f - tol || target_fpr > max_f + tol {
        return Err(Error::TargetUnreachable {
            target: target_fpr,
            lo: control_lo,
            hi: control_hi,
            fpr_lo,
            fpr_hi,
        });
    }
    for &(control, fpr) in &[(control_lo, fpr_lo), (control_hi, fpr_hi)] {
        if (fpr - target_fpr).abs() <= tol {
            return Ok(TuneResult {
                control_value: control,
                achieved_fpr: fpr,
                iterations: 0,
                converged: true,
            });
        }
    }

    // FPR increases toward whichever endpoint had the larger value.
    let (mut lo, mut hi, mut f_lo, mut f_hi) = if fpr_lo <= fpr_hi {
        (control_lo, control_hi, fpr_lo, fpr_hi)
    } else {
        (control_hi, control_lo, fpr_hi, fpr_lo)
    };
    let mut best = TuneResult {
        control_value: lo,
        achieved_fpr: f_lo,
        iterations: 0,
        converged: false,
    };
    for iteration in 1..=max_iter {
        let mid = (lo + hi) / 2.0;
        let f_mid = eval_fpr(mid);
        if (f_mid - target_fpr).abs() < (best.achieved_fpr - target_fpr).abs() {
            best = TuneResult {
                control_value: mid,
                achieved_fpr: f_mid,
                iterations: iteration,
                converged: false,
            };
        }
        if (f_mid - target_fpr).abs() <= tol {
            return Ok(TuneResult {
                control_value: mid,
                achieved_fpr: f_mid,
                iterations: iteration,
                converged: true,
            });
        }
        if f_mid < target_fpr {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let _ = (f_lo, f_hi);
    best.iterations = max_iter;
    Ok(best)
}

/// One row of a system comparison.
#[derive(Debug, Clone)]
pub struct NamedReport {
    pub name: String,
    pub report: EvalReport,
}

/// Systems ranked by `tpr_all` (descending, ties keep input order), with a
/// plain-text table and CSV in the column order Clean, Noise, Music, All.
pub struct Comparison {
    pub ranking: Vec<String>,
    pub text_table: String,
    pub csv: String,
}

pub fn compare_systems(reports: &[NamedReport], fpr_tol: f64) -> Result<Comparison> {
    if let Some(first) = reports.first() {
        for r in reports.iter().skip(1) {
            let (a, b) = (first.report.fpr, r.report.fpr);
            if let (Some(a), Some(b)) = (a, b) {
                if (a - b).abs() > fpr_tol {
                    return Err(Error::FprMismatch(format!(
                        "{} at {:.4} vs {} at {:.4}",
                        first.name, a, r.name, b
                    )));
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..reports.len()).collect();
    // Stable sort preserves input order on ties (ties reported as-is).
    order.sort_by(|&a, &b| {
        let ta = reports[a].report.tpr_all.unwrap_or(f64::NAN);
        let tb = reports[b].report.tpr_all.unwrap_or(f64::NAN);
        tb.partial_cmp(&ta).unwrap_or(std::cmp::Ordering::Equal)
    });

    let fmt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.3}"),
        None => "n/a".to_string(),
    };
    let mut text = format!(
        "{:<16} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "system", "clean", "noise", "music", "all", "fpr"
    );
    let mut csv = String::from("system,clean,noise,music,all,fpr\n");
    for &i in &order {
        let r = &reports[i];
        text.push_str(&format!(
            "{:<16} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
            r.name,
            fmt(r.report.tpr_clean),
            fmt(r.report.tpr_noise),
            fmt(r.report.tpr_music),
            fmt(r.report.tpr_all),
            fmt(r.report.fpr)
        ));
        let raw = |v: Option<f64>| match v {
            Some(x) => format!("{x}"),
            None => String::new(),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name,
            raw(r.report.tpr_clean),
            raw(r.report.tpr_noise),
            raw(r.report.tpr_music),
            raw(r.report.tpr_all),
            raw(r.report.fpr)
        ));
    }
    Ok(Comparison {
        ranking: order.iter().map(|&i| reports[i].name.clone()).collect(),
        text_table: text,
        csv,
    })
}
