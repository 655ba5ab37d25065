//! Detection quality against ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DetectionRecord;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::synth::FrameTruth;

/// Per-frame counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// 1.0 when there are no detections (see `zero_detections`).
    pub precision: f64,
    /// 1.0 when there are no true targets (see `zero_truths`).
    pub recall: f64,
    pub f1: f64,
    pub zero_detections: bool,
    pub zero_truths: bool,
    pub match_radius: f64,
    pub per_frame: Vec<FrameEval>,
}

/// Greedy nearest-first one-to-one matching; returns the number of matches.
/// Candidate pairs are ordered by distance, then truth index, then
/// detection position, so the result does not depend on detection order.
fn match_frame(detections: &[Point], truths: &[Point], radius: f64) -> usize {
    let mut dets: Vec<Point> = detections.to_vec();
    dets.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut pairs = Vec::new();
    for (ti, t) in truths.iter().enumerate() {
        for (di, d) in dets.iter().enumerate() {
            let dist = t.distance(*d);
            if dist <= radius {
                pairs.push((dist, ti, di));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truths.len()];
    let mut used_d = vec![false; dets.len()];
    let mut matched = 0;
    for (_, ti, di) in pairs {
        if !used_t[ti] && !used_d[di] {
            used_t[ti] = true;
            used_d[di] = true;
            matched += 1;
        }
    }
    matched
}

/// Evaluates every ground-truth frame.
pub fn evaluate(detections: &[DetectionRecord], truth: &[FrameTruth], match_radius: f64) -> Result<EvalReport> {
    evaluate_from(detections, truth, match_radius, 0)
}

/// Evaluates ground-truth frames with index `>= first_frame`; detections of
/// earlier frames are ignored. A detection whose frame has no ground-truth
/// record is an input error.
pub fn evaluate_from(detections: &[DetectionRecord], truth: &[FrameTruth], match_radius: f64, first_frame: usize) -> Result<EvalReport> {
    if !(match_radius.is_finite() && match_radius >= 0.0) {
        return Err(Error::param(format!("match radius must be non-negative, got {match_radius}")));
    }
    let mut truths: BTreeMap<usize, Vec<Point>> = BTreeMap::new();
    for record in truth {
        let points = record.targets.iter().map(|t| t.position()).collect();
        if truths.insert(record.frame, points).is_some() {
            return Err(Error::input(format!("ground truth lists frame {} twice", record.frame)));
        }
    }
    let mut dets: BTreeMap<usize, Vec<Point>> = BTreeMap::new();
    for d in detections {
        if !truths.contains_key(&d.frame) {
            return Err(Error::input(format!("detections reference frame {} which has no ground truth", d.frame)));
        }
        dets.entry(d.frame).or_default().push(Point::new(d.x, d.y));
    }
    let mut per_frame = Vec::new();
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (&frame, t) in truths.range(first_frame..) {
        let d = dets.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        let m = match_frame(d, t, match_radius);
        let row = FrameEval {
            frame,
            true_positives: m,
            false_positives: d.len() - m,
            false_negatives: t.len() - m,
        };
        tp += row.true_positives;
        fp += row.false_positives;
        fneg += row.false_negatives;
        per_frame.push(row);
    }
    let zero_detections = tp + fp == 0;
    let zero_truths = tp + fneg == 0;
    let precision = if zero_detections { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if zero_truths { 1.0 } else { tp as f64 / (tp + fneg) as f64 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
        precision,
        recall,
        f1,
        zero_detections,
        zero_truths,
        match_radius,
        per_frame,
    })
}
