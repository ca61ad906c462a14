//! Detector evaluation against ground truth: greedy per-class matching,
//! precision/recall, average precision, mAP and IoU-threshold histograms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{enclosing_hbb, iou_obb, GeomError, QuadOBB, RectAA};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_HISTOGRAM_THRESHOLDS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no ground truth to evaluate against")]
    NoGroundTruth,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Which box representation is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxMode {
    /// Rotated polygons.
    #[default]
    Obb,
    /// Enclosing axis-aligned rectangles of both sides.
    Hbb,
}

impl FromStr for BoxMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "obb" => Ok(BoxMode::Obb),
            "hbb" => Ok(BoxMode::Hbb),
            other => Err(format!("unknown box mode {other:?} (expected obb or hbb)")),
        }
    }
}

impl fmt::Display for BoxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxMode::Obb => "obb",
            BoxMode::Hbb => "hbb",
        })
    }
}

/// Precision envelope integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMethod {
    #[default]
    AllPoints,
    ElevenPoint,
}

impl FromStr for ApMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all-points" | "all_points" => Ok(ApMethod::AllPoints),
            "11-point" | "eleven_point" => Ok(ApMethod::ElevenPoint),
            other => Err(format!("unknown AP method {other:?} (expected all-points or 11-point)")),
        }
    }
}

/// A box on either side of the comparison. Ground-truth confidence is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBox {
    pub class_id: u32,
    pub quad: QuadOBB,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MatchLabel {
    Tp,
    Fp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    /// Position of the frame in the evaluated sequence.
    pub frame: usize,
    pub pred_index: usize,
    pub gt_index: Option<usize>,
    /// IoU with the matched ground truth, or the best same-class IoU for FPs.
    pub iou: f64,
    pub label: MatchLabel,
    pub class_id: u32,
    pub confidence: f64,
}

impl MatchRecord {
    pub fn is_tp(&self) -> bool {
        self.label == MatchLabel::Tp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Prediction,
    GroundTruth,
}

/// A box excluded from matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditNote {
    pub frame: usize,
    pub side: Side,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameMatch {
    pub records: Vec<MatchRecord>,
    pub dropped: Vec<AuditNote>,
    /// Valid ground-truth instances per class.
    pub gt_counts: BTreeMap<u32, usize>,
}

fn check_threshold(t: f64) -> Result<(), EvalError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(EvalError::Config(format!("IoU threshold {t} outside (0, 1)")));
    }
    Ok(())
}

fn boxes_overlap(a: &RectAA, b: &RectAA) -> bool {
    a.x_min <= b.x_max && b.x_min <= a.x_max && a.y_min <= b.y_max && b.y_min <= a.y_max
}

struct Prepared {
    index: usize,
    class_id: u32,
    quad: QuadOBB,
    hbb: RectAA,
    confidence: f64,
}

fn prepare(
    frame: usize,
    side: Side,
    boxes: &[EvalBox],
    mode: BoxMode,
    dropped: &mut Vec<AuditNote>,
) -> Vec<Prepared> {
    let mut out = Vec::with_capacity(boxes.len());
    for (index, b) in boxes.iter().enumerate() {
        if let Some(d) = b.quad.degeneracy() {
            dropped.push(AuditNote {
                frame,
                side,
                index,
                reason: format!("degenerate quad: {d}"),
            });
            continue;
        }
        let hbb = enclosing_hbb(&b.quad);
        let quad = match mode {
            BoxMode::Obb => b.quad,
            BoxMode::Hbb => QuadOBB::from_rect(&hbb),
        };
        out.push(Prepared {
            index,
            class_id: b.class_id,
            quad,
            hbb,
            confidence: b.confidence,
        });
    }
    out
}

/// Greedy one-to-one matching within one frame.
///
/// Per class, predictions are visited by descending confidence (input order
/// on ties); each claims the unmatched ground truth of highest IoU at or
/// above the threshold (lowest index on ties). Degenerate boxes are dropped
/// and reported. Records come back in prediction input order.
pub fn match_frame(
    frame: usize,
    preds: &[EvalBox],
    gts: &[EvalBox],
    iou_threshold: f64,
    mode: BoxMode,
) -> Result<FrameMatch, EvalError> {
    check_threshold(iou_threshold)?;
    let mut out = FrameMatch::default();
    let preds = prepare(frame, Side::Prediction, preds, mode, &mut out.dropped);
    let gts = prepare(frame, Side::GroundTruth, gts, mode, &mut out.dropped);
    for g in &gts {
        *out.gt_counts.entry(g.class_id).or_default() += 1;
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence).then(a.cmp(&b)));
    let mut taken = vec![false; gts.len()];
    for pi in order {
        let p = &preds[pi];
        let mut best_any = 0.0f64;
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if g.class_id != p.class_id || !boxes_overlap(&p.hbb, &g.hbb) {
                continue;
            }
            let iou = iou_obb(&p.quad, &g.quad)?;
            best_any = best_any.max(iou);
            if taken[gi] || iou < iou_threshold {
                continue;
            }
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        let record = match best {
            Some((gi, iou)) => {
                taken[gi] = true;
                MatchRecord {
                    frame,
                    pred_index: p.index,
                    gt_index: Some(gts[gi].index),
                    iou,
                    label: MatchLabel::Tp,
                    class_id: p.class_id,
                    confidence: p.confidence,
                }
            }
            None => MatchRecord {
                frame,
                pred_index: p.index,
                gt_index: None,
                iou: best_any,
                label: MatchLabel::Fp,
                class_id: p.class_id,
                confidence: p.confidence,
            },
        };
        out.records.push(record);
    }
    out.records.sort_by_key(|r| r.pred_index);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall at every distinct confidence cut, highest first.
///
/// Records with equal confidence enter together, so the curve does not
/// depend on the order of tied records.
pub fn pr_curve(records: &[MatchRecord], total_gt: usize) -> Vec<PrPoint> {
    let mut sorted: Vec<&MatchRecord> = records.iter().collect();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let conf = sorted[i].confidence;
        while i < sorted.len() && sorted[i].confidence == conf {
            if sorted[i].is_tp() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            confidence: conf,
            precision: tp as f64 / (tp + fp) as f64,
            recall: if total_gt == 0 { 0.0 } else { tp as f64 / total_gt as f64 },
        });
    }
    points
}

/// Average precision of one class. `None` when the class has no ground
/// truth (such classes are left out of mAP).
pub fn average_precision(records: &[MatchRecord], total_gt: usize, method: ApMethod) -> Option<f64> {
    if total_gt == 0 {
        return None;
    }
    let curve = pr_curve(records, total_gt);
    let ap = match method {
        ApMethod::AllPoints => {
            let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
            for k in (0..envelope.len().saturating_sub(1)).rev() {
                envelope[k] = envelope[k].max(envelope[k + 1]);
            }
            let mut prev_recall = 0.0;
            let mut ap = 0.0;
            for (p, env) in curve.iter().zip(&envelope) {
                ap += (p.recall - prev_recall) * env;
                prev_recall = p.recall;
            }
            ap
        }
        ApMethod::ElevenPoint => {
            let sum: f64 = (0..=10)
                .map(|t| {
                    let t = t as f64 / 10.0;
                    curve
                        .iter()
                        .filter(|p| p.recall >= t)
                        .map(|p| p.precision)
                        .fold(0.0, f64::max)
                })
                .sum();
            sum / 11.0
        }
    };
    Some(ap.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub threshold: f64,
    pub count: usize,
    /// Share of matched predictions with IoU at or above the threshold.
    pub fraction: f64,
    /// Same count over all predictions.
    pub fraction_of_predictions: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IouHistogram {
    pub matched: usize,
    pub predictions: usize,
    pub bins: Vec<HistogramBin>,
}

/// Cumulative IoU distribution of true positives, thresholds ascending.
pub fn iou_threshold_histogram(records: &[MatchRecord], thresholds: &[f64]) -> IouHistogram {
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let matched: Vec<f64> = records.iter().filter(|r| r.is_tp()).map(|r| r.iou).collect();
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let bins = ts
        .into_iter()
        .map(|t| {
            let count = matched.iter().filter(|iou| **iou >= t).count();
            HistogramBin {
                threshold: t,
                count,
                fraction: ratio(count, matched.len()),
                fraction_of_predictions: ratio(count, records.len()),
            }
        })
        .collect();
    IouHistogram {
        matched: matched.len(),
        predictions: records.len(),
        bins,
    }
}

/// Confidence cut at which the single precision/recall pair is reported.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum OperatingPoint {
    #[default]
    MaxF1,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub box_mode: BoxMode,
    pub ap_method: ApMethod,
    pub operating_point: OperatingPoint,
    pub histogram_thresholds: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            box_mode: BoxMode::Obb,
            ap_method: ApMethod::AllPoints,
            operating_point: OperatingPoint::MaxF1,
            histogram_thresholds: DEFAULT_HISTOGRAM_THRESHOLDS.to_vec(),
        }
    }
}

/// Predictions and ground truth of one frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalFrame {
    pub frame_id: String,
    pub preds: Vec<EvalBox>,
    pub gts: Vec<EvalBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub iou_threshold: f64,
    pub box_mode: BoxMode,
    pub ap_method: ApMethod,
    pub per_class_ap: BTreeMap<u32, f64>,
    pub map: f64,
    pub precision: f64,
    pub recall: f64,
    pub operating_confidence: Option<f64>,
    pub num_predictions: usize,
    pub num_ground_truth: usize,
    pub num_true_positives: usize,
    pub iou_histogram: IouHistogram,
    pub dropped: Vec<AuditNote>,
}

/// All match records of a dataset plus per-class ground-truth counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchSet {
    pub records: Vec<MatchRecord>,
    pub dropped: Vec<AuditNote>,
    pub gt_counts: BTreeMap<u32, usize>,
}

/// Match every frame in parallel; output order follows frame order.
pub fn match_frames(frames: &[EvalFrame], iou_threshold: f64, mode: BoxMode) -> Result<MatchSet, EvalError> {
    let per_frame: Vec<FrameMatch> = frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| match_frame(i, &f.preds, &f.gts, iou_threshold, mode))
        .collect::<Result<_, _>>()?;
    let mut set = MatchSet::default();
    for fm in per_frame {
        set.records.extend(fm.records);
        set.dropped.extend(fm.dropped);
        for (class, n) in fm.gt_counts {
            *set.gt_counts.entry(class).or_default() += n;
        }
    }
    Ok(set)
}

fn operating_pair(records: &[MatchRecord], total_gt: usize, op: OperatingPoint) -> (f64, f64, Option<f64>) {
    match op {
        OperatingPoint::MaxF1 => {
            let mut best: Option<(f64, PrPoint)> = None;
            for p in pr_curve(records, total_gt) {
                let f1 = if p.precision + p.recall > 0.0 {
                    2.0 * p.precision * p.recall / (p.precision + p.recall)
                } else {
                    0.0
                };
                if best.is_none_or(|(b, _)| f1 > b) {
                    best = Some((f1, p));
                }
            }
            best.map_or((0.0, 0.0, None), |(_, p)| (p.precision, p.recall, Some(p.confidence)))
        }
        OperatingPoint::Fixed(t) => {
            let kept: Vec<&MatchRecord> = records.iter().filter(|r| r.confidence >= t).collect();
            let tp = kept.iter().filter(|r| r.is_tp()).count();
            let precision = if kept.is_empty() { 0.0 } else { tp as f64 / kept.len() as f64 };
            (precision, tp as f64 / total_gt as f64, Some(t))
        }
    }
}

/// Summarize a matched dataset into an [`EvalResult`].
pub fn summarize(set: &MatchSet, cfg: &EvalConfig) -> Result<EvalResult, EvalError> {
    let total_gt: usize = set.gt_counts.values().sum();
    if total_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut by_class: BTreeMap<u32, Vec<MatchRecord>> = BTreeMap::new();
    for r in &set.records {
        by_class.entry(r.class_id).or_default().push(r.clone());
    }
    let mut per_class_ap = BTreeMap::new();
    for (&class, &n) in &set.gt_counts {
        let recs = by_class.get(&class).map(Vec::as_slice).unwrap_or(&[]);
        if let Some(ap) = average_precision(recs, n, cfg.ap_method) {
            per_class_ap.insert(class, ap);
        }
    }
    let map = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    let (precision, recall, operating_confidence) = operating_pair(&set.records, total_gt, cfg.operating_point);
    Ok(EvalResult {
        iou_threshold: cfg.iou_threshold,
        box_mode: cfg.box_mode,
        ap_method: cfg.ap_method,
        per_class_ap,
        map,
        precision,
        recall,
        operating_confidence,
        num_predictions: set.records.len(),
        num_ground_truth: total_gt,
        num_true_positives: set.records.iter().filter(|r| r.is_tp()).count(),
        iou_histogram: iou_threshold_histogram(&set.records, &cfg.histogram_thresholds),
        dropped: set.dropped.clone(),
    })
}

/// Match and summarize in one step.
pub fn evaluate(frames: &[EvalFrame], cfg: &EvalConfig) -> Result<EvalResult, EvalError> {
    if let OperatingPoint::Fixed(t) = cfg.operating_point {
        if !(0.0..=1.0).contains(&t) {
            return Err(EvalError::Config(format!("operating confidence {t} outside [0, 1]")));
        }
    }
    let set = match_frames(frames, cfg.iou_threshold, cfg.box_mode)?;
    summarize(&set, cfg)
}

/// Mean of mAP over IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn map_50_95(frames: &[EvalFrame], cfg: &EvalConfig) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for i in 0..10 {
        let t = 0.5 + 0.05 * i as f64;
        let set = match_frames(frames, t, cfg.box_mode)?;
        total += summarize(&set, &EvalConfig { iou_threshold: t, ..cfg.clone() })?.map;
    }
    Ok(total / 10.0)
}
