//! Serialization of result tables. Column and key order are fixed and floats
//! use the shortest round-trip representation, so equal results always give
//! equal bytes.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalResult;
use crate::exposure::{BrandMetrics, RankEntry, VideoReport};
use crate::tightness::{TrBinStat, TrComparison};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

const BRAND_HEADER: [&str; 9] = [
    "video_id",
    "brand_id",
    "brand_name",
    "frames_present",
    "exposure_s",
    "avg_cov_present_pct",
    "avg_cov_overall_pct",
    "max_cov_pct",
    "detection_count",
];

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn finish<W: Write>(mut wtr: csv::Writer<W>) -> Result<(), ReportError> {
    wtr.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per brand; an empty slice still writes the header.
pub fn write_brand_metrics<W: Write>(w: W, rows: &[BrandMetrics], format: ReportFormat) -> Result<(), ReportError> {
    match format {
        ReportFormat::Csv => {
            let mut wtr = csv_writer(w);
            wtr.write_record(BRAND_HEADER)?;
            for r in rows {
                wtr.write_record([
                    r.video_id.clone(),
                    r.brand_id.to_string(),
                    r.brand_name.clone().unwrap_or_default(),
                    r.frames_present.to_string(),
                    r.exposure_s.to_string(),
                    r.avg_cov_present_pct.to_string(),
                    r.avg_cov_overall_pct.to_string(),
                    r.max_cov_pct.to_string(),
                    r.detection_count.to_string(),
                ])?;
            }
            finish(wtr)
        }
        ReportFormat::Json => write_json(w, rows),
    }
}

pub fn read_brand_metrics<R: Read>(r: R, format: ReportFormat) -> Result<Vec<BrandMetrics>, ReportError> {
    match format {
        ReportFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(r);
            let mut out = Vec::new();
            for rec in rdr.deserialize::<BrandRow>() {
                let row = rec?;
                out.push(BrandMetrics {
                    video_id: row.video_id,
                    brand_id: row.brand_id,
                    brand_name: row.brand_name.filter(|s| !s.is_empty()),
                    frames_present: row.frames_present,
                    exposure_s: row.exposure_s,
                    avg_cov_present_pct: row.avg_cov_present_pct,
                    avg_cov_overall_pct: row.avg_cov_overall_pct,
                    max_cov_pct: row.max_cov_pct,
                    detection_count: row.detection_count,
                });
            }
            Ok(out)
        }
        ReportFormat::Json => Ok(serde_json::from_reader(r)?),
    }
}

#[derive(Deserialize)]
struct BrandRow {
    video_id: String,
    brand_id: u32,
    brand_name: Option<String>,
    frames_present: u64,
    exposure_s: f64,
    avg_cov_present_pct: f64,
    avg_cov_overall_pct: f64,
    max_cov_pct: f64,
    detection_count: u64,
}

/// Visible frames per brand: `video_id,brand_id,frame_index,coverage`.
pub fn write_timeline_csv<W: Write>(w: W, videos: &[VideoReport]) -> Result<(), ReportError> {
    let mut wtr = csv_writer(w);
    wtr.write_record(["video_id", "brand_id", "frame_index", "coverage"])?;
    for v in videos {
        for (brand, points) in &v.timeline.series {
            for p in points {
                wtr.write_record([
                    v.video_id.clone(),
                    brand.to_string(),
                    p.frame_index.to_string(),
                    p.coverage.to_string(),
                ])?;
            }
        }
    }
    finish(wtr)
}

/// Top-K brands per video: `video_id,rank,brand_id,frames_present,exposure_s`.
pub fn write_ranking_csv<W: Write>(w: W, videos: &[VideoReport]) -> Result<(), ReportError> {
    let mut wtr = csv_writer(w);
    wtr.write_record(["video_id", "rank", "brand_id", "frames_present", "exposure_s"])?;
    for v in videos {
        for e in &v.timeline.ranking {
            write_rank(&mut wtr, &v.video_id, e)?;
        }
    }
    finish(wtr)
}

fn write_rank<W: Write>(wtr: &mut csv::Writer<W>, video: &str, e: &RankEntry) -> Result<(), ReportError> {
    wtr.write_record([
        video.to_string(),
        e.rank.to_string(),
        e.brand_id.to_string(),
        e.frames_present.to_string(),
        e.exposure_s.to_string(),
    ])?;
    Ok(())
}

/// JSON is the full result; CSV is one `class_id,ap` row per class followed
/// by `metric,value` style summary rows under the `class_id` column.
pub fn write_eval_result<W: Write>(w: W, result: &EvalResult, format: ReportFormat) -> Result<(), ReportError> {
    match format {
        ReportFormat::Json => write_json(w, result),
        ReportFormat::Csv => {
            let mut wtr = csv_writer(w);
            wtr.write_record(["key", "value"])?;
            for (class, ap) in &result.per_class_ap {
                wtr.write_record([format!("ap_class_{class}"), ap.to_string()])?;
            }
            let summary = [
                ("map", result.map.to_string()),
                ("precision", result.precision.to_string()),
                ("recall", result.recall.to_string()),
                ("operating_confidence", opt(result.operating_confidence)),
                ("iou_threshold", result.iou_threshold.to_string()),
                ("box_mode", result.box_mode.to_string()),
                ("num_predictions", result.num_predictions.to_string()),
                ("num_ground_truth", result.num_ground_truth.to_string()),
                ("num_true_positives", result.num_true_positives.to_string()),
            ];
            for (k, v) in summary {
                wtr.write_record([k.to_string(), v])?;
            }
            for b in &result.iou_histogram.bins {
                wtr.write_record([format!("iou_ge_{}", b.threshold), b.fraction.to_string()])?;
            }
            finish(wtr)
        }
    }
}

pub fn read_eval_result_json<R: Read>(r: R) -> Result<EvalResult, ReportError> {
    Ok(serde_json::from_reader(r)?)
}

/// Bin table of one sample source.
pub fn write_tr_bins<W: Write>(w: W, source: &str, bins: &[TrBinStat], format: ReportFormat) -> Result<(), ReportError> {
    match format {
        ReportFormat::Json => write_json(w, bins),
        ReportFormat::Csv => {
            let mut wtr = csv_writer(w);
            wtr.write_record(["source", "lo_deg", "hi_deg", "n", "mean_tr", "ci95_half_width"])?;
            for b in bins {
                wtr.write_record([
                    source.to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.n.to_string(),
                    opt(b.mean_tr),
                    opt(b.ci95_half_width),
                ])?;
            }
            finish(wtr)
        }
    }
}

pub fn write_tr_comparison<W: Write>(w: W, cmp: &TrComparison, format: ReportFormat) -> Result<(), ReportError> {
    match format {
        ReportFormat::Json => write_json(w, cmp),
        ReportFormat::Csv => {
            let mut wtr = csv_writer(w);
            wtr.write_record(["lo_deg", "hi_deg", "gt_n", "gt_mean", "pred_n", "pred_mean", "abs_gap"])?;
            for r in &cmp.rows {
                wtr.write_record([
                    r.lo.to_string(),
                    r.hi.to_string(),
                    r.gt_n.to_string(),
                    opt(r.gt_mean),
                    r.pred_n.to_string(),
                    opt(r.pred_mean),
                    opt(r.abs_gap),
                ])?;
            }
            finish(wtr)
        }
    }
}

pub fn read_tr_bins_json<R: Read>(r: R) -> Result<Vec<TrBinStat>, ReportError> {
    Ok(serde_json::from_reader(r)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
