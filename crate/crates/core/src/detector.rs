//! Sleeper detection in the aerial strip and detection scoring.
//!
//! Detectors return fixed-size square boxes, ordered nearest-first (smallest
//! row, i.e. closest to the near edge of the strip, first).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PixelPoint;
use crate::raster::Raster;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetectorError {
    #[error("detector expects {expected:?} input, got {got:?}")]
    InputKindMismatch { expected: InputKind, got: InputKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub center_px: PixelPoint,
    pub box_side_px: f64,
    pub confidence: f64,
}

impl Detection {
    /// Position along the track axis (row in the strip).
    pub fn y(&self) -> f64 {
        self.center_px.y
    }
}

fn by_row(a: &Detection, b: &Detection) -> Ordering {
    a.center_px.y.total_cmp(&b.center_px.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    Raster,
    Oracle,
}

/// What a detector is fed for one frame.
#[derive(Debug, Clone, Copy)]
pub enum DetectorInput<'a> {
    Raster(&'a Raster),
    /// Pre-computed detections (e.g. simulator oracle or an annotation file).
    Oracle(&'a [Detection]),
}

impl DetectorInput<'_> {
    pub fn kind(&self) -> InputKind {
        match self {
            DetectorInput::Raster(_) => InputKind::Raster,
            DetectorInput::Oracle(_) => InputKind::Oracle,
        }
    }
}

pub trait SleeperDetector {
    fn input_kind(&self) -> InputKind;

    fn detect(&self, input: DetectorInput<'_>) -> Result<Vec<Detection>, DetectorError>;
}

/// Passes oracle detections through with full confidence.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleDetector;

impl SleeperDetector for OracleDetector {
    fn input_kind(&self) -> InputKind {
        InputKind::Oracle
    }

    fn detect(&self, input: DetectorInput<'_>) -> Result<Vec<Detection>, DetectorError> {
        let DetectorInput::Oracle(dets) = input else {
            return Err(DetectorError::InputKindMismatch {
                expected: InputKind::Oracle,
                got: input.kind(),
            });
        };
        let mut out: Vec<Detection> = dets
            .iter()
            .map(|d| Detection {
                confidence: 1.0,
                ..*d
            })
            .collect();
        out.sort_by(by_row);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakDetector {
    pub threshold: f64,
    pub min_gap_px: usize,
    pub box_side_px: f64,
}

impl Default for PeakDetector {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            min_gap_px: 20,
            box_side_px: 30.0,
        }
    }
}

impl SleeperDetector for PeakDetector {
    fn input_kind(&self) -> InputKind {
        InputKind::Raster
    }

    fn detect(&self, input: DetectorInput<'_>) -> Result<Vec<Detection>, DetectorError> {
        let DetectorInput::Raster(strip) = input else {
            return Err(DetectorError::InputKindMismatch {
                expected: InputKind::Raster,
                got: input.kind(),
            });
        };
        let mut dets = peak_detect(strip, self.threshold, self.min_gap_px);
        for d in &mut dets {
            d.box_side_px = self.box_side_px;
        }
        Ok(dets)
    }
}

/// Classical band detector on the row-mean intensity profile.
///
/// Rows whose mean exceeds `threshold` form runs; runs separated by fewer
/// than `min_gap_px` sub-threshold rows are merged. Each run yields one
/// detection at its intensity-weighted centroid row, with confidence equal
/// to the normalised peak excess over the threshold. Boxes default to 30 px.
pub fn peak_detect(strip: &Raster, threshold: f64, min_gap_px: usize) -> Vec<Detection> {
    let profile = strip.row_means();
    let center_x = (strip.width() as f64 - 1.0) / 2.0;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (row, &v) in profile.iter().enumerate() {
        if v <= threshold {
            continue;
        }
        match runs.last_mut() {
            // gap = rows strictly between the previous run's end and this row
            Some((_, end)) if row - *end - 1 < min_gap_px => *end = row,
            _ => runs.push((row, row)),
        }
    }

    runs.into_iter()
        .map(|(start, end)| {
            let mut wsum = 0.0;
            let mut ysum = 0.0;
            let mut peak = f64::MIN;
            for (row, &v) in profile.iter().enumerate().take(end + 1).skip(start) {
                if v > threshold {
                    wsum += v;
                    ysum += v * row as f64;
                }
                peak = peak.max(v);
            }
            let confidence = ((peak - threshold) / (1.0 - threshold)).clamp(0.0, 1.0);
            Detection {
                center_px: PixelPoint::new(center_x, ysum / wsum),
                box_side_px: 30.0,
                confidence,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub mean_latency_s: f64,
}

impl DetectionScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            mean_latency_s: 0.0,
        }
    }

    pub fn with_latency(mut self, mean_latency_s: f64) -> Self {
        self.mean_latency_s = mean_latency_s;
        self
    }
}

/// Greedy one-to-one matching of a single frame; returns the number of matches.
fn match_frame(pred: &[f64], truth: &[f64], tol: f64) -> usize {
    let mut cand: Vec<(f64, f64, f64, usize, usize)> = Vec::new();
    for (i, &p) in pred.iter().enumerate() {
        for (j, &t) in truth.iter().enumerate() {
            let d = (p - t).abs();
            if d <= tol {
                cand.push((d, p, t, i, j));
            }
        }
    }
    // Distance first, then positions, so input order never decides a match.
    cand.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    let mut pred_used = vec![false; pred.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matched = 0;
    for (_, _, _, i, j) in cand {
        if !pred_used[i] && !truth_used[j] {
            pred_used[i] = true;
            truth_used[j] = true;
            matched += 1;
        }
    }
    matched
}

/// Precision / recall / F1 over aligned per-frame lists of row positions.
///
/// Frames missing from the shorter side count as empty.
pub fn score_detections(predicted: &[Vec<f64>], truth: &[Vec<f64>], match_tol_px: f64) -> DetectionScore {
    let frames = predicted.len().max(truth.len());
    let empty: Vec<f64> = Vec::new();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for k in 0..frames {
        let p = predicted.get(k).unwrap_or(&empty);
        let t = truth.get(k).unwrap_or(&empty);
        let m = match_frame(p, t, match_tol_px);
        tp += m;
        fp += p.len() - m;
        fn_ += t.len() - m;
    }
    DetectionScore::from_counts(tp, fp, fn_)
}
