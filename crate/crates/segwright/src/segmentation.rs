//! Frame decisions to time-stamped speech segments, plus CSV/RTTM writers.
//!
//! Each emitted segment carries a unique `segment_id` which doubles as its
//! pseudo-speaker label, so segment output can feed downstream consumers
//! that expect per-speaker segments without running diarization.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub file_id: String,
    pub start_sec: f64,
    pub end_sec: f64,
    pub segment_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPostConfig {
    /// Segments shorter than this are dropped (after gap merging).
    pub min_speech_sec: f64,
    /// Gaps shorter than this are merged away (before the drop).
    pub min_gap_sec: f64,
    /// Symmetric padding, clipped to file bounds and neighbor midpoints.
    pub pad_sec: f64,
}

impl Default for SegmentPostConfig {
    fn default() -> Self {
        SegmentPostConfig {
            min_speech_sec: 0.2,
            min_gap_sec: 0.1,
            pad_sec: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentFormat {
    Csv,
    Rttm,
}

/// Converts per-frame speech decisions into segments.
///
/// Maximal runs of speech frames become half-open intervals on the frame
/// grid; then gaps shorter than `min_gap_sec` are merged, segments shorter
/// than `min_speech_sec` dropped, and `pad_sec` applied symmetrically. The
/// merge-before-drop order is part of the contract: a short burst next to a
/// short gap survives if merging first makes it long enough.
pub fn decisions_to_segments(
    decisions: &[bool],
    frame_period_sec: f64,
    file_id: &str,
    cfg: &SegmentPostConfig,
) -> Vec<Segment> {
    assert!(frame_period_sec > 0.0);
    let file_end = decisions.len() as f64 * frame_period_sec;

    // Maximal runs of speech frames: [first * fp, (last + 1) * fp).
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<usize> = None;
    for (t, &d) in decisions.iter().enumerate() {
        match (d, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                runs.push((s as f64 * frame_period_sec, t as f64 * frame_period_sec));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s as f64 * frame_period_sec, file_end));
    }

    // Merge short gaps.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(prev) if run.0 - prev.1 < cfg.min_gap_sec => prev.1 = run.1,
            _ => merged.push(run),
        }
    }

    // Drop short segments.
    merged.retain(|&(s, e)| e - s >= cfg.min_speech_sec);

    // Pad, clipped to file bounds and neighbor midpoints.
    let padded: Vec<(f64, f64)> = merged
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| {
            let lo = if i == 0 {
                0.0
            } else {
                (merged[i - 1].1 + s) / 2.0
            };
            let hi = if i + 1 == merged.len() {
                file_end
            } else {
                (e + merged[i + 1].0) / 2.0
            };
            ((s - cfg.pad_sec).max(lo), (e + cfg.pad_sec).min(hi))
        })
        .collect();

    padded
        .into_iter()
        .enumerate()
        .map(|(i, (start_sec, end_sec))| Segment {
            file_id: file_id.to_string(),
            start_sec,
            end_sec,
            segment_id: format!("{file_id}_{i:04}"),
        })
        .collect()
}

/// Writes segments as CSV (`file_id,segment_id,start_sec,end_sec`, six
/// decimal places) or RTTM speaker rows.
pub fn write_segments(segments: &[Segment], path: &Path, format: SegmentFormat) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let werr = |e| Error::io(path, e);
    match format {
        SegmentFormat::Csv => {
            writeln!(out, "file_id,segment_id,start_sec,end_sec").map_err(werr)?;
            for seg in segments {
                writeln!(
                    out,
                    "{},{},{:.6},{:.6}",
                    seg.file_id, seg.segment_id, seg.start_sec, seg.end_sec
                )
                .map_err(werr)?;
            }
        }
        SegmentFormat::Rttm => {
            for seg in segments {
                writeln!(
                    out,
                    "SPEAKER {} 1 {:.6} {:.6} <NA> <NA> {} <NA> <NA>",
                    seg.file_id,
                    seg.start_sec,
                    seg.end_sec - seg.start_sec,
                    seg.segment_id
                )
                .map_err(werr)?;
            }
        }
    }
    out.flush().map_err(werr)?;
    Ok(())
}

/// Reads the CSV layout produced by [`write_segments`].
pub fn read_segments_csv(path: &Path) -> Result<Vec<Segment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut segments = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line == "file_id,segment_id,start_sec,end_sec") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedLabel {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::MalformedLabel {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("bad number {s:?}"),
            })
        };
        segments.push(Segment {
            file_id: fields[0].to_string(),
            segment_id: fields[1].to_string(),
            start_sec: parse(fields[2])?,
            end_sec: parse(fields[3])?,
        });
    }
    Ok(segments)
}

/// Rasterizes segments back to per-frame speech decisions (frame-center rule).
pub fn segments_to_decisions(
    segments: &[Segment],
    frame_period_sec: f64,
    num_frames: usize,
) -> Vec<bool> {
    (0..num_frames)
        .map(|t| {
            let center = (t as f64 + 0.5) * frame_period_sec;
            segments
                .iter()
                .any(|s| s.start_sec <= center && center < s.end_sec)
        })
        .collect()
}
