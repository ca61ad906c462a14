use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use exposure_core::eval::{evaluate as run_eval, EvalBox, EvalConfig, EvalFrame, OperatingPoint};
use exposure_core::exposure::{analyze_stream, AnalyzeOptions, TemporalFilter};
use exposure_core::ingest::{
    load_split_labels, parse_detections_stream, ClassMap, FrameMeta, ImageSize, IngestReport, MetaTable,
    RecordContext, Strictness,
};
use exposure_core::loss::{run_loss_fixtures, LossParams};
use exposure_core::report::{
    write_brand_metrics, write_eval_result, write_json, write_ranking_csv, write_timeline_csv, write_tr_bins,
    write_tr_comparison,
};
use exposure_core::tightness::{bin_by_orientation, compare_gt_pred_tr, SampleSource, TrSample};

use crate::error::CliError;
use crate::{AnalyzeArgs, CommonArgs, EvaluateArgs, FitArgs, LosscheckArgs, MetaArgs};

const MAX_LISTED_WARNINGS: usize = 100;

#[derive(Serialize)]
struct Counts {
    frames: u64,
    detections: usize,
    classes: usize,
}

#[derive(Serialize)]
struct Runtime {
    jobs: usize,
    wall_clock_s: f64,
}

/// Written as `run_report.json`. Everything except `runtime` is a pure
/// function of the inputs and configuration.
#[derive(Serialize)]
struct RunReport<'a, C: Serialize, R: Serialize> {
    command: &'static str,
    config: &'a C,
    counts: Counts,
    ingest: &'a IngestReportSummary,
    warnings: Vec<String>,
    result: R,
    runtime: Runtime,
}

#[derive(Serialize, Default)]
struct IngestReportSummary {
    total: usize,
    accepted: usize,
    skipped: usize,
}

impl From<&IngestReport> for IngestReportSummary {
    fn from(r: &IngestReport) -> Self {
        Self {
            total: r.total,
            accepted: r.accepted,
            skipped: r.skipped.len(),
        }
    }
}

fn strictness(common: &CommonArgs) -> Strictness {
    if common.strict {
        Strictness::Strict
    } else {
        Strictness::Warn
    }
}

/// Skipped records were already logged during ingest; only `extra` is logged here.
fn collect_warnings(report: &IngestReport, extra: Vec<String>) -> Vec<String> {
    for w in &extra {
        warn!("{w}");
    }
    let mut out = extra;
    let skipped = report.skipped.len();
    out.extend(
        report
            .skipped
            .iter()
            .take(MAX_LISTED_WARNINGS)
            .map(|s| format!("skipped input {}: {}", s.index, s.reason)),
    );
    if skipped > MAX_LISTED_WARNINGS {
        out.push(format!("... and {} more skipped inputs", skipped - MAX_LISTED_WARNINGS));
    }
    out
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::with_capacity(1 << 20, io::stdin())));
    }
    let file = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::with_capacity(1 << 20, file)))
}

fn create(out_dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = out_dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn prepare_out(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Config(format!("{}: {e}", out_dir.display())))
}

fn load_classes(path: Option<&Path>) -> Result<Option<ClassMap>, CliError> {
    Ok(path.map(ClassMap::load).transpose()?)
}

fn flag_meta(args: &MetaArgs) -> Result<Option<FrameMeta>, CliError> {
    match (args.width, args.height, args.fps, args.frames) {
        (None, None, None, None) => Ok(None),
        (Some(w), Some(h), Some(fps), Some(n)) => Ok(Some(FrameMeta::new(w, h, fps, n)?)),
        _ => Err(CliError::Config(
            "--width, --height, --fps and --frames must be given together".into(),
        )),
    }
}

fn meta_table(args: &MetaArgs) -> Result<MetaTable, CliError> {
    let mut table = match &args.meta {
        Some(path) => MetaTable::load(path)?,
        None => MetaTable::default(),
    };
    if let Some(m) = flag_meta(args)? {
        table.default = Some(m);
    }
    if table.default.is_none() && table.by_video.is_empty() {
        return Err(CliError::Config(
            "missing frame metadata: pass --meta or --width/--height/--fps/--frames".into(),
        ));
    }
    Ok(table)
}

/// Image sizes for label denormalization: sidecar rows first, then flags.
fn size_resolver(args: &MetaArgs) -> Result<impl Fn(&str) -> Option<ImageSize>, CliError> {
    let table = match &args.meta {
        Some(path) => MetaTable::load(path)?,
        None => MetaTable::default(),
    };
    let fallback = match (args.width, args.height) {
        (Some(w), Some(h)) => Some(ImageSize::new(w, h)?),
        (None, None) => None,
        _ => return Err(CliError::Config("--width and --height must be given together".into())),
    };
    if fallback.is_none() && table.by_video.is_empty() && table.default.is_none() {
        return Err(CliError::Config(
            "missing image size: pass --meta or --width/--height".into(),
        ));
    }
    Ok(move |stem: &str| table.get(stem).map(|m| m.size()).or(fallback))
}

fn finish_report<C: Serialize, R: Serialize>(
    out_dir: &Path,
    command: &'static str,
    config: &C,
    counts: Counts,
    ingest: &IngestReportSummary,
    warnings: Vec<String>,
    result: R,
    jobs: usize,
    started: Instant,
) -> Result<(), CliError> {
    let report = RunReport {
        command,
        config,
        counts,
        ingest,
        warnings,
        result,
        runtime: Runtime {
            jobs,
            wall_clock_s: started.elapsed().as_secs_f64(),
        },
    };
    write_json(create(out_dir, "run_report.json")?, &report)?;
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeSummary {
    videos: usize,
    brand_rows: usize,
    detections_used: usize,
    below_threshold: usize,
}

pub fn analyze(args: &AnalyzeArgs, jobs: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let metas = meta_table(&args.meta)?;
    let classes = load_classes(args.classes.as_deref())?;
    let opts = AnalyzeOptions {
        conf_threshold: args.conf_threshold,
        top_k: args.top_k,
        filter: TemporalFilter {
            min_run: args.min_run,
            max_gap: args.max_gap,
        },
        strictness: strictness(&args.common),
        ..Default::default()
    };
    let reader = open_input(&args.detections)?;
    let output = analyze_stream(reader, &metas, classes.as_ref(), &opts)?;

    let out_dir = &args.common.out;
    prepare_out(out_dir)?;
    let format = args.common.format;
    let rows = output.brand_rows();
    write_brand_metrics(create(out_dir, &format!("brand_metrics.{}", format.extension()))?, &rows, format)?;
    write_timeline_csv(create(out_dir, "timeline.csv")?, &output.videos)?;
    write_ranking_csv(create(out_dir, "ranking.csv")?, &output.videos)?;

    let mut extra = Vec::new();
    if output.ingest.total == 0 {
        extra.push("input contains no detections".to_string());
    }
    let brands: std::collections::BTreeSet<u32> = rows.iter().map(|r| r.brand_id).collect();
    let counts = Counts {
        frames: output.videos.iter().map(|v| v.meta.frame_count).sum(),
        detections: output.ingest.total,
        classes: brands.len(),
    };
    info!(
        "analyzed {} detections over {} videos in {:.3}s",
        output.ingest.total,
        output.videos.len(),
        started.elapsed().as_secs_f64()
    );
    println!(
        "analyze: {} records, {} accepted, {} skipped, {} brand rows",
        output.ingest.total,
        output.ingest.accepted,
        output.ingest.skipped.len(),
        rows.len()
    );
    let summary = AnalyzeSummary {
        videos: output.videos.len(),
        brand_rows: rows.len(),
        detections_used: output.detections_used,
        below_threshold: output.below_threshold,
    };
    finish_report(
        out_dir,
        "analyze",
        args,
        counts,
        &(&output.ingest).into(),
        collect_warnings(&output.ingest, extra),
        summary,
        jobs,
        started,
    )
}

#[derive(Serialize)]
struct EvaluateSummary {
    map: f64,
    precision: f64,
    recall: f64,
    per_class_ap: BTreeMap<u32, f64>,
}

pub fn evaluate(args: &EvaluateArgs, jobs: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let strict = strictness(&args.common);
    let classes = load_classes(args.classes.as_deref())?;
    let sizes = size_resolver(&args.meta)?;
    let labels = load_split_labels(&args.labels, args.split, classes.as_ref(), strict, sizes)?;

    let ctx = RecordContext {
        classes: classes.as_ref(),
        meta: None,
        require_meta: false,
    };
    let (preds, pred_report) = parse_detections_stream(open_input(&args.detections)?, ctx, strict)?;

    let mut frames: BTreeMap<String, EvalFrame> = labels
        .frames
        .iter()
        .map(|(stem, gts)| {
            let frame = EvalFrame {
                frame_id: stem.clone(),
                preds: Vec::new(),
                gts: gts
                    .iter()
                    .map(|g| EvalBox {
                        class_id: g.class_id,
                        quad: g.quad.clone(),
                        confidence: 1.0,
                    })
                    .collect(),
            };
            (stem.clone(), frame)
        })
        .collect();
    let mut extra = labels.unpaired.clone();
    let mut orphan_preds = 0usize;
    for d in preds {
        match frames.get_mut(&d.video_id) {
            Some(f) => f.preds.push(EvalBox {
                class_id: d.class_id,
                quad: d.quad,
                confidence: d.confidence,
            }),
            None => orphan_preds += 1,
        }
    }
    if orphan_preds > 0 {
        extra.push(format!("{orphan_preds} predictions refer to images outside the split"));
    }

    let cfg = EvalConfig {
        iou_threshold: args.iou_threshold,
        box_mode: args.box_mode,
        ap_method: args.ap_method,
        operating_point: args.conf_threshold.map_or(OperatingPoint::MaxF1, OperatingPoint::Fixed),
        ..Default::default()
    };
    let frames: Vec<EvalFrame> = frames.into_values().collect();
    let result = run_eval(&frames, &cfg)?;
    extra.extend(result.dropped.iter().map(|n| format!("{n:?}")));

    let out_dir = &args.common.out;
    prepare_out(out_dir)?;
    let format = args.common.format;
    write_eval_result(create(out_dir, &format!("eval_result.{}", format.extension()))?, &result, format)?;
    println!(
        "evaluate: mAP@{} = {:.4}, P = {:.4}, R = {:.4} over {} frames",
        result.iou_threshold,
        result.map,
        result.precision,
        result.recall,
        frames.len()
    );

    let mut ingest = labels.report.clone();
    ingest.merge(pred_report);
    let counts = Counts {
        frames: frames.len() as u64,
        detections: result.num_predictions,
        classes: result.per_class_ap.len(),
    };
    let summary = EvaluateSummary {
        map: result.map,
        precision: result.precision,
        recall: result.recall,
        per_class_ap: result.per_class_ap.clone(),
    };
    finish_report(
        out_dir,
        "evaluate",
        args,
        counts,
        &(&ingest).into(),
        collect_warnings(&ingest, extra),
        summary,
        jobs,
        started,
    )
}

#[derive(Serialize)]
struct FitSummary {
    gt_samples: usize,
    pred_samples: usize,
    mean_abs_gap: BTreeMap<String, Option<f64>>,
}

pub fn fit(args: &FitArgs, jobs: usize) -> Result<(), CliError> {
    let started = Instant::now();
    if args.labels.is_none() && args.detections.is_none() {
        return Err(CliError::Config("fit needs --labels and/or --detections".into()));
    }
    let strict = strictness(&args.common);
    let classes = load_classes(args.classes.as_deref())?;
    let mut ingest = IngestReport::default();
    let mut extra = Vec::new();

    let mut gt = Vec::new();
    if let Some(root) = &args.labels {
        let labels = load_split_labels(root, args.split, classes.as_ref(), strict, size_resolver(&args.meta)?)?;
        for g in labels.frames.values().flatten() {
            gt.push(TrSample::from_quad(&g.quad, g.class_id, SampleSource::GroundTruth).map_err(|e| {
                CliError::Data(format!("{}: {e}", g.frame_id))
            })?);
        }
        extra.extend(labels.unpaired);
        ingest.merge(labels.report);
    }

    let mut pred = Vec::new();
    let mut frames = std::collections::BTreeSet::new();
    if let Some(path) = &args.detections {
        let ctx = RecordContext {
            classes: classes.as_ref(),
            meta: None,
            require_meta: false,
        };
        let (dets, report) = parse_detections_stream(open_input(path)?, ctx, strict)?;
        ingest.merge(report);
        for d in dets.iter().filter(|d| d.confidence >= args.conf_threshold) {
            frames.insert((d.video_id.clone(), d.frame_index));
            pred.push(TrSample::from_quad(&d.quad, d.class_id, SampleSource::Prediction).map_err(|e| {
                CliError::Data(format!("{} frame {}: {e}", d.video_id, d.frame_index))
            })?);
        }
    }
    if gt.is_empty() && pred.is_empty() {
        return Err(CliError::Config("empty sample set: no boxes to analyze".into()));
    }

    let widths = match args.bin_width {
        Some(w) => vec![w],
        None => vec![15.0, 5.0],
    };
    let out_dir = &args.common.out;
    prepare_out(out_dir)?;
    let format = args.common.format;
    let ext = format.extension();
    let mut gaps = BTreeMap::new();
    for w in widths {
        if !gt.is_empty() {
            let bins = bin_by_orientation(&gt, w)?;
            write_tr_bins(create(out_dir, &format!("tr_gt_w{w}.{ext}"))?, "gt", &bins, format)?;
        }
        if !pred.is_empty() {
            let bins = bin_by_orientation(&pred, w)?;
            write_tr_bins(create(out_dir, &format!("tr_pred_w{w}.{ext}"))?, "pred", &bins, format)?;
        }
        if !gt.is_empty() && !pred.is_empty() {
            let cmp = compare_gt_pred_tr(&gt, &pred, w)?;
            write_tr_comparison(create(out_dir, &format!("tr_gap_w{w}.{ext}"))?, &cmp, format)?;
            gaps.insert(format!("{w}"), cmp.mean_abs_gap);
        }
    }
    println!("fit: {} ground-truth and {} predicted boxes", gt.len(), pred.len());

    let counts = Counts {
        frames: frames.len() as u64,
        detections: pred.len(),
        classes: gt.iter().chain(&pred).map(|s| s.class_id).collect::<std::collections::BTreeSet<_>>().len(),
    };
    let summary = FitSummary {
        gt_samples: gt.len(),
        pred_samples: pred.len(),
        mean_abs_gap: gaps,
    };
    finish_report(
        out_dir,
        "fit",
        args,
        counts,
        &(&ingest).into(),
        collect_warnings(&ingest, extra),
        summary,
        jobs,
        started,
    )
}

fn loss_params(args: &LosscheckArgs) -> Result<LossParams, CliError> {
    let mut params = LossParams::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut value = serde_json::to_value(params).map_err(|e| CliError::Config(e.to_string()))?;
        let overrides: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let obj = value.as_object_mut().expect("params serialize to an object");
        for (k, v) in overrides {
            if !obj.contains_key(&k) {
                return Err(CliError::Config(format!("{}: unknown loss parameter `{k}`", path.display())));
            }
            obj.insert(k, v);
        }
        params = serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    if let Some(g) = args.gamma {
        params.gamma = g;
    }
    if let Some(a) = args.alpha {
        params.alpha = a;
    }
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(params)
}

pub fn losscheck(args: &LosscheckArgs) -> Result<(), CliError> {
    let params = loss_params(args)?;
    let report = run_loss_fixtures(&params).map_err(|e| CliError::Config(e.to_string()))?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for o in &report.outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{status} {} (expected {}, got {}, tol {})",
            o.name, o.expected, o.actual, o.tolerance
        )?;
    }
    writeln!(out, "gradient grid max relative error: {:e}", report.gradient_max_rel_err)?;
    if let Some(dir) = &args.out {
        prepare_out(dir)?;
        write_json(create(dir, "losscheck.json")?, &report)?;
    }
    if report.passed() {
        writeln!(out, "losscheck: all {} checks passed", report.outcomes.len())?;
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|o| o.name.as_str()).collect();
        Err(CliError::Check(format!("{} loss checks failed: {}", names.len(), names.join("; "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_meta_flags_rejected() {
        let args = MetaArgs {
            meta: None,
            width: Some(10.0),
            height: None,
            fps: None,
            frames: None,
        };
        assert!(matches!(meta_table(&args), Err(CliError::Config(_))));
        let none = MetaArgs { width: None, ..args };
        assert!(matches!(meta_table(&none), Err(CliError::Config(_))));
    }
}
