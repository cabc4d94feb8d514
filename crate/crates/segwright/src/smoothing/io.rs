//! Key/value text serialization of smoother parameters.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::{Emissions, GmmState, HmmTransitions, SmootherParams};
use crate::error::{Error, Result};

pub const SMOOTHER_FORMAT_VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn save_smoother(params: &SmootherParams, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let werr = |e| Error::io(path, e);
    writeln!(out, "format_version {SMOOTHER_FORMAT_VERSION}").map_err(werr)?;
    writeln!(out, "pi {}", join(&params.transitions.pi)).map_err(werr)?;
    let t = &params.transitions.trans;
    writeln!(out, "trans {}", join(&[t[0][0], t[0][1], t[1][0], t[1][1]])).map_err(werr)?;
    writeln!(out, "speech_bias {}", params.speech_bias).map_err(werr)?;
    match &params.emissions {
        Emissions::Bernoulli { p_obs1 } => {
            writeln!(out, "emission bernoulli").map_err(werr)?;
            writeln!(out, "bern_p_obs1 {}", join(p_obs1)).map_err(werr)?;
        }
        Emissions::Gmm { states } => {
            writeln!(out, "emission gmm").map_err(werr)?;
            for (s, state) in states.iter().enumerate() {
                writeln!(out, "gmm{s}_weights {}", join(&state.weights)).map_err(werr)?;
                writeln!(out, "gmm{s}_means {}", join(&state.means)).map_err(werr)?;
                writeln!(out, "gmm{s}_vars {}", join(&state.vars)).map_err(werr)?;
            }
        }
    }
    out.flush().map_err(werr)?;
    Ok(())
}

pub fn load_smoother(path: &Path) -> Result<SmootherParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::BadSmootherFile {
        path: path.to_path_buf(),
        reason,
    };

    let mut fields: HashMap<&str, &str> = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| bad(format!("malformed line {line:?}")))?;
        fields.insert(key, value);
    }

    let floats = |key: &str, expect: usize| -> Result<Vec<f64>> {
        let raw = fields
            .get(key)
            .ok_or_else(|| bad(format!("missing key {key}")))?;
        let values: Vec<f64> = raw
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("bad value for {key}: {e}")))?;
        if values.len() != expect {
            return Err(bad(format!(
                "{key} has {} values, expected {expect}",
                values.len()
            )));
        }
        Ok(values)
    };

    let version: u32 = fields
        .get("format_version")
        .ok_or_else(|| bad("missing format_version".into()))?
        .parse()
        .map_err(|_| bad("bad format_version".into()))?;
    if version != SMOOTHER_FORMAT_VERSION {
        return Err(bad(format!(
            "format version {version}, expected {SMOOTHER_FORMAT_VERSION}"
        )));
    }

    let pi_v = floats("pi", 2)?;
    let t_v = floats("trans", 4)?;
    let speech_bias: f64 = fields
        .get("speech_bias")
        .ok_or_else(|| bad("missing speech_bias".into()))?
        .parse()
        .map_err(|_| bad("bad speech_bias".into()))?;

    let emissions = match fields.get("emission").copied() {
        Some("bernoulli") => {
            let p = floats("bern_p_obs1", 2)?;
            Emissions::Bernoulli {
                p_obs1: [p[0], p[1]],
            }
        }
        Some("gmm") => {
            let mut states = Vec::with_capacity(2);
            for s in 0..2 {
                let weights = fields
                    .get(format!("gmm{s}_weights").as_str())
                    .ok_or_else(|| bad(format!("missing gmm{s}_weights")))?
                    .split_whitespace()
                    .count();
                states.push(GmmState {
                    weights: floats(&format!("gmm{s}_weights"), weights)?,
                    means: floats(&format!("gmm{s}_means"), weights)?,
                    vars: floats(&format!("gmm{s}_vars"), weights)?,
                });
            }
            let s1 = states.pop().unwrap();
            let s0 = states.pop().unwrap();
            Emissions::Gmm { states: [s0, s1] }
        }
        other => return Err(bad(format!("bad emission variant {other:?}"))),
    };

    Ok(SmootherParams {
        transitions: HmmTransitions {
            trans: [[t_v[0], t_v[1]], [t_v[2], t_v[3]]],
            pi: [pi_v[0], pi_v[1]],
        },
        emissions,
        speech_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("smoother.txt");
        let params = SmootherParams {
            transitions: HmmTransitions {
                trans: [[0.9123456789012345, 0.0876543210987655], [0.2, 0.8]],
                pi: [1.0 / 3.0, 2.0 / 3.0],
            },
            emissions: Emissions::Bernoulli {
                p_obs1: [1.0 / 102.0, 0.75],
            },
            speech_bias: -0.125,
        };
        save_smoother(&params, &path).unwrap();
        assert_eq!(load_smoother(&path).unwrap(), params);
    }

    #[test]
    fn gmm_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("smoother.txt");
        let state = |offset: f64| GmmState {
            weights: vec![0.5, 0.3, 0.2],
            means: vec![0.1 + offset, 0.5, 0.9],
            vars: vec![1e-4, 0.02, 0.003],
        };
        let params = SmootherParams {
            transitions: HmmTransitions {
                trans: [[0.95, 0.05], [0.07, 0.93]],
                pi: [0.4, 0.6],
            },
            emissions: Emissions::Gmm {
                states: [state(0.0), state(0.01)],
            },
            speech_bias: 2.5,
        };
        save_smoother(&params, &path).unwrap();
        assert_eq!(load_smoother(&path).unwrap(), params);
    }

    #[test]
    fn missing_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("smoother.txt");
        std::fs::write(&path, "format_version 1\npi 0.5 0.5\n").unwrap();
        assert!(matches!(
            load_smoother(&path),
            Err(Error::BadSmootherFile { .. })
        ));
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("smoother.txt");
        std::fs::write(&path, "format_version 9\n").unwrap();
        assert!(matches!(
            load_smoother(&path),
            Err(Error::BadSmootherFile { .. })
        ));
    }
}
