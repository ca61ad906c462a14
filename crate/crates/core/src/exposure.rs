//! Brand visibility metrics: per-frame coverage, exposure time, coverage
//! averages, detection counts and top-K exposure timelines.
//!
//! Coverage of brand `l` in frame `i` is the summed area of its detections
//! clipped to the frame, divided by the frame area and capped at 1. Overlaps
//! are summed, not unioned. A brand is present (`z = 1`) when its coverage is
//! positive. With `Z = Σz`, `S = Σ z·c` over `N` frames at `r` fps:
//!
//! * exposure = `Z / r` seconds
//! * present coverage = `100·S/Z` percent (0 when `Z = 0`)
//! * overall coverage = `100·S/N` percent
//! * max coverage = `100·max c` percent

use std::collections::BTreeMap;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{clip_to_rect, GeomError, Polygon, QuadOBB};
use crate::ingest::{
    parse_detection_record, ClassMap, FrameMeta, IngestError, IngestReport, MetaTable,
    RecordContext, Strictness,
};
use crate::numeric::CompensatedSum;

/// Detections below this confidence are ignored unless configured otherwise.
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("frame {frame} outside video of {count} frames")]
    FrameOutOfRange { frame: u64, count: u64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Coverage of one brand in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCoverage {
    pub frame_index: u64,
    pub brand_id: u32,
    /// Fraction of the frame covered, capped at 1.
    pub coverage: f64,
    pub visible: bool,
    pub detection_count: u64,
}

impl FrameCoverage {
    pub fn from_area(brand_id: u32, frame_index: u64, area: f64, count: u64, meta: &FrameMeta) -> Self {
        let coverage = (area / meta.frame_area()).clamp(0.0, 1.0);
        Self {
            frame_index,
            brand_id,
            coverage,
            visible: coverage > 0.0,
            detection_count: count,
        }
    }
}

/// Coverage of one brand in one frame from its detection quads.
pub fn frame_coverage<'a, I>(
    brand_id: u32,
    frame_index: u64,
    quads: I,
    meta: &FrameMeta,
) -> Result<FrameCoverage, GeomError>
where
    I: IntoIterator<Item = &'a QuadOBB>,
{
    let rect = meta.frame_rect();
    let mut area = CompensatedSum::default();
    let mut count = 0;
    for q in quads {
        area.add(clip_to_rect(q, &rect)?.area());
        count += 1;
    }
    Ok(FrameCoverage::from_area(brand_id, frame_index, area.value(), count, meta))
}

/// Video-level metrics of one brand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandMetrics {
    pub video_id: String,
    pub brand_id: u32,
    pub brand_name: Option<String>,
    pub frames_present: u64,
    pub exposure_s: f64,
    pub avg_cov_present_pct: f64,
    pub avg_cov_overall_pct: f64,
    pub max_cov_pct: f64,
    pub detection_count: u64,
}

fn check_meta(meta: &FrameMeta) -> Result<(), MetricsError> {
    if !(meta.fps.is_finite() && meta.fps > 0.0) {
        return Err(MetricsError::Config(format!("frame rate must be positive, got {}", meta.fps)));
    }
    if meta.frame_count == 0 {
        return Err(MetricsError::Config("video has zero frames".into()));
    }
    Ok(())
}

/// Aggregate all frame coverages of one brand. Frames without an entry are
/// treated as absent. Results do not depend on input order.
pub fn aggregate_brand(
    video_id: &str,
    brand_id: u32,
    coverages: &[FrameCoverage],
    meta: &FrameMeta,
) -> Result<BrandMetrics, MetricsError> {
    check_meta(meta)?;
    let mut sorted: Vec<&FrameCoverage> = coverages.iter().collect();
    sorted.sort_by_key(|c| c.frame_index);

    let mut present = 0u64;
    let mut covered = CompensatedSum::default();
    let mut max_cov = 0.0f64;
    let mut detections = 0u64;
    for c in sorted {
        if c.frame_index >= meta.frame_count {
            return Err(MetricsError::FrameOutOfRange {
                frame: c.frame_index,
                count: meta.frame_count,
            });
        }
        detections += c.detection_count;
        if c.visible {
            present += 1;
            covered.add(c.coverage);
            max_cov = max_cov.max(c.coverage);
        }
    }
    let s = covered.value();
    Ok(BrandMetrics {
        video_id: video_id.to_string(),
        brand_id,
        brand_name: None,
        frames_present: present,
        exposure_s: present as f64 / meta.fps,
        avg_cov_present_pct: if present == 0 { 0.0 } else { 100.0 * s / present as f64 },
        avg_cov_overall_pct: 100.0 * s / meta.frame_count as f64,
        max_cov_pct: 100.0 * max_cov,
        detection_count: detections,
    })
}

/// Presence smoothing over a dense per-frame series.
///
/// Gaps of at most `max_gap` absent frames between two visible runs are
/// bridged first, then visible runs shorter than `min_run` are removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalFilter {
    pub min_run: u64,
    pub max_gap: u64,
}

impl Default for TemporalFilter {
    fn default() -> Self {
        Self { min_run: 1, max_gap: 0 }
    }
}

impl TemporalFilter {
    pub fn is_identity(&self) -> bool {
        self.min_run <= 1 && self.max_gap == 0
    }

    fn validate(&self) -> Result<(), MetricsError> {
        if self.min_run == 0 {
            return Err(MetricsError::Config("min_run must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn temporal_filter(z: &[bool], filter: &TemporalFilter) -> Result<Vec<bool>, MetricsError> {
    filter.validate()?;
    let mut out = z.to_vec();
    if filter.max_gap > 0 {
        let mut last_on: Option<usize> = None;
        for i in 0..out.len() {
            if !z[i] {
                continue;
            }
            if let Some(prev) = last_on {
                let gap = (i - prev - 1) as u64;
                if gap > 0 && gap <= filter.max_gap {
                    out[prev + 1..i].iter_mut().for_each(|v| *v = true);
                }
            }
            last_on = Some(i);
        }
    }
    if filter.min_run > 1 {
        let mut i = 0;
        while i < out.len() {
            if !out[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < out.len() && out[i] {
                i += 1;
            }
            if ((i - start) as u64) < filter.min_run {
                out[start..i].iter_mut().for_each(|v| *v = false);
            }
        }
    }
    Ok(out)
}

/// Apply [`temporal_filter`] to one brand's coverages over `frame_count`
/// frames. Bridged frames become present with zero coverage; suppressed
/// frames are zeroed.
pub fn apply_temporal_filter(
    brand_id: u32,
    coverages: &[FrameCoverage],
    frame_count: u64,
    filter: &TemporalFilter,
) -> Result<Vec<FrameCoverage>, MetricsError> {
    filter.validate()?;
    let mut sorted: Vec<FrameCoverage> = coverages.to_vec();
    sorted.sort_by_key(|c| c.frame_index);
    if filter.is_identity() {
        return Ok(sorted);
    }
    let mut z = vec![false; frame_count as usize];
    for c in &sorted {
        if c.frame_index >= frame_count {
            return Err(MetricsError::FrameOutOfRange {
                frame: c.frame_index,
                count: frame_count,
            });
        }
        z[c.frame_index as usize] |= c.visible;
    }
    let kept = temporal_filter(&z, filter)?;
    let by_frame: BTreeMap<u64, FrameCoverage> = sorted.into_iter().map(|c| (c.frame_index, c)).collect();
    let mut out = Vec::new();
    for (i, on) in kept.into_iter().enumerate() {
        let frame = i as u64;
        match (by_frame.get(&frame), on) {
            (Some(c), true) => out.push(FrameCoverage { visible: true, ..*c }),
            (Some(c), false) if c.visible => out.push(FrameCoverage {
                coverage: 0.0,
                visible: false,
                detection_count: 0,
                ..*c
            }),
            (Some(c), false) => out.push(*c),
            (None, true) => out.push(FrameCoverage {
                frame_index: frame,
                brand_id,
                coverage: 0.0,
                visible: true,
                detection_count: 0,
            }),
            (None, false) => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub frame_index: u64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub brand_id: u32,
    pub frames_present: u64,
    pub exposure_s: f64,
}

/// Per-brand presence series and top-K ranking by exposure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExposureTimeline {
    pub series: BTreeMap<u32, Vec<TimelinePoint>>,
    pub ranking: Vec<RankEntry>,
}

/// Build the timeline of one video from coverages of all brands.
///
/// Ranking is by exposure descending, ties broken by lower brand id, and is
/// truncated to `k` entries.
pub fn build_timeline(
    coverages: &[FrameCoverage],
    meta: &FrameMeta,
    k: usize,
) -> Result<ExposureTimeline, MetricsError> {
    check_meta(meta)?;
    if k == 0 {
        return Err(MetricsError::Config("top-K must be at least 1".into()));
    }
    let mut series: BTreeMap<u32, Vec<TimelinePoint>> = BTreeMap::new();
    let mut seen: BTreeMap<u32, ()> = BTreeMap::new();
    for c in coverages {
        seen.insert(c.brand_id, ());
        if c.visible {
            series.entry(c.brand_id).or_default().push(TimelinePoint {
                frame_index: c.frame_index,
                coverage: c.coverage,
            });
        }
    }
    for points in series.values_mut() {
        points.sort_by_key(|p| p.frame_index);
        points.dedup_by_key(|p| p.frame_index);
    }
    let mut ranking: Vec<(u32, u64)> = seen
        .keys()
        .map(|b| (*b, series.get(b).map_or(0, |s| s.len() as u64)))
        .collect();
    ranking.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranking.truncate(k);
    let ranking = ranking
        .into_iter()
        .enumerate()
        .map(|(i, (brand_id, frames))| RankEntry {
            rank: i + 1,
            brand_id,
            frames_present: frames,
            exposure_s: frames as f64 / meta.fps,
        })
        .collect();
    Ok(ExposureTimeline { series, ranking })
}

/// Orders metric rows by video, exposure descending, then brand id.
pub fn sort_brand_rows(rows: &mut [BrandMetrics]) {
    rows.sort_by(|a, b| {
        a.video_id
            .cmp(&b.video_id)
            .then(b.frames_present.cmp(&a.frames_present))
            .then(a.brand_id.cmp(&b.brand_id))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub conf_threshold: f64,
    pub top_k: usize,
    pub filter: TemporalFilter,
    pub strictness: Strictness,
    /// Records parsed per parallel batch.
    pub batch_size: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            top_k: 10,
            filter: TemporalFilter::default(),
            strictness: Strictness::Warn,
            batch_size: 16_384,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    pub meta: FrameMeta,
    pub brands: Vec<BrandMetrics>,
    pub timeline: ExposureTimeline,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOutput {
    pub videos: Vec<VideoReport>,
    pub ingest: IngestReport,
    pub below_threshold: usize,
    pub detections_used: usize,
}

impl AnalyzeOutput {
    pub fn brand_rows(&self) -> Vec<BrandMetrics> {
        let mut rows: Vec<BrandMetrics> = self.videos.iter().flat_map(|v| v.brands.iter().cloned()).collect();
        sort_brand_rows(&mut rows);
        rows
    }
}

#[derive(Default)]
struct FrameAccum {
    area: CompensatedSum,
    count: u64,
}

/// Stream a JSON-lines detection source into per-brand metrics.
///
/// Records are parsed and clipped in parallel batches on the current rayon
/// pool; accumulation is sequential in input order so the result does not
/// depend on the number of worker threads.
pub fn analyze_stream<R: BufRead>(
    mut reader: R,
    metas: &MetaTable,
    classes: Option<&ClassMap>,
    opts: &AnalyzeOptions,
) -> Result<AnalyzeOutput, MetricsError> {
    if !(0.0..=1.0).contains(&opts.conf_threshold) {
        return Err(MetricsError::Config(format!(
            "confidence threshold {} outside [0, 1]",
            opts.conf_threshold
        )));
    }
    if opts.top_k == 0 {
        return Err(MetricsError::Config("top-K must be at least 1".into()));
    }
    opts.filter.validate()?;
    let ctx = RecordContext {
        classes,
        meta: Some(metas),
        require_meta: true,
    };

    let mut out = AnalyzeOutput::default();
    let mut accum: BTreeMap<(String, u32, u64), FrameAccum> = BTreeMap::new();
    let mut line_no = 0usize;
    let batch_size = opts.batch_size.max(1);
    let mut batch: Vec<(usize, String)> = Vec::with_capacity(batch_size);
    loop {
        batch.clear();
        let mut eof = false;
        while batch.len() < batch_size {
            let mut line = String::new();
            if reader.read_line(&mut line).map_err(IngestError::from)? == 0 {
                eof = true;
                break;
            }
            line_no += 1;
            if !line.trim().is_empty() {
                batch.push((line_no, line));
            }
        }
        let parsed: Vec<_> = batch
            .par_iter()
            .map(|(index, line)| {
                let det = parse_detection_record(line.trim(), &ctx)
                    .map_err(|kind| IngestError::Record { index: *index, kind })?;
                let meta = metas.get(&det.video_id).expect("record context requires metadata");
                let area = clip_to_rect(&det.quad, &meta.frame_rect())
                    .map(|c| c.area())
                    .unwrap_or(0.0);
                Ok::<_, IngestError>((det, area))
            })
            .collect();
        for ((index, _), item) in batch.iter().zip(parsed) {
            let Some((det, area)) = out.ingest.record(item, *index, opts.strictness)? else {
                continue;
            };
            if det.confidence < opts.conf_threshold {
                out.below_threshold += 1;
                continue;
            }
            out.detections_used += 1;
            let slot = accum
                .entry((det.video_id, det.class_id, det.frame_index))
                .or_default();
            slot.area.add(area);
            slot.count += 1;
        }
        if eof {
            break;
        }
    }

    let mut per_video: BTreeMap<String, BTreeMap<u32, Vec<FrameCoverage>>> = BTreeMap::new();
    for ((video, brand, frame), acc) in accum {
        let meta = metas.get(&video).expect("validated during parsing");
        per_video
            .entry(video)
            .or_default()
            .entry(brand)
            .or_default()
            .push(FrameCoverage::from_area(brand, frame, acc.area.value(), acc.count, meta));
    }

    for (video_id, brands) in per_video {
        let meta = *metas.get(&video_id).expect("validated during parsing");
        let mut rows = Vec::with_capacity(brands.len());
        let mut all = Vec::new();
        for (brand, covs) in brands {
            let covs = apply_temporal_filter(brand, &covs, meta.frame_count, &opts.filter)?;
            let mut m = aggregate_brand(&video_id, brand, &covs, &meta)?;
            m.brand_name = classes.and_then(|c| c.name(brand)).map(str::to_string);
            rows.push(m);
            all.extend(covs);
        }
        sort_brand_rows(&mut rows);
        let timeline = build_timeline(&all, &meta, opts.top_k)?;
        out.videos.push(VideoReport {
            video_id,
            meta,
            brands: rows,
            timeline,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point2, RectAA};
    use proptest::prelude::*;

    fn meta(w: f64, h: f64, fps: f64, n: u64) -> FrameMeta {
        FrameMeta::new(w, h, fps, n).unwrap()
    }

    fn cov(frame: u64, c: f64) -> FrameCoverage {
        FrameCoverage {
            frame_index: frame,
            brand_id: 0,
            coverage: c,
            visible: c > 0.0,
            detection_count: 1,
        }
    }

    #[test]
    fn frame_coverage_fixtures() {
        let m = meta(100.0, 100.0, 25.0, 10);
        let empty = frame_coverage(0, 0, [], &m).unwrap();
        assert_eq!((empty.coverage, empty.visible, empty.detection_count), (0.0, false, 0));

        let sq = QuadOBB::from_rect(&RectAA::new(10.0, 10.0, 20.0, 20.0).unwrap());
        let one = frame_coverage(0, 0, [&sq], &m).unwrap();
        assert_eq!((one.coverage, one.visible), (0.01, true));

        let full = QuadOBB::from_rect(&RectAA::new(0.0, 0.0, 100.0, 100.0).unwrap());
        let capped = frame_coverage(0, 0, [&full, &full], &m).unwrap();
        assert_eq!(capped.coverage, 1.0);
        assert_eq!(capped.detection_count, 2);

        let off = QuadOBB::from_rect(&RectAA::new(200.0, 0.0, 210.0, 10.0).unwrap());
        let hidden = frame_coverage(0, 0, [&off], &m).unwrap();
        assert!(!hidden.visible);
        assert_eq!(hidden.detection_count, 1);
    }

    #[test]
    fn aggregate_fixture() {
        let m = meta(100.0, 100.0, 2.0, 4);
        let r = aggregate_brand("v", 0, &[cov(1, 0.02), cov(2, 0.04)], &m).unwrap();
        assert_eq!(r.exposure_s, 1.0);
        assert_eq!(r.avg_cov_present_pct, 3.0);
        assert_eq!(r.avg_cov_overall_pct, 1.5);
        assert_eq!(r.max_cov_pct, 4.0);
        assert_eq!(r.detection_count, 2);
    }

    #[test]
    fn aggregate_edges() {
        let m = meta(100.0, 100.0, 25.0, 50);
        let none = aggregate_brand("v", 3, &[], &m).unwrap();
        assert_eq!(
            (none.exposure_s, none.avg_cov_present_pct, none.avg_cov_overall_pct, none.max_cov_pct, none.detection_count),
            (0.0, 0.0, 0.0, 0.0, 0)
        );
        let all: Vec<_> = (0..50).map(|i| cov(i, 1.0)).collect();
        let sat = aggregate_brand("v", 0, &all, &m).unwrap();
        assert_eq!(sat.exposure_s, 2.0);
        assert_eq!((sat.avg_cov_present_pct, sat.avg_cov_overall_pct, sat.max_cov_pct), (100.0, 100.0, 100.0));

        let zero = FrameMeta { frame_count: 0, ..m };
        assert!(matches!(aggregate_brand("v", 0, &[], &zero), Err(MetricsError::Config(_))));
        let bad_fps = FrameMeta { fps: 0.0, ..m };
        assert!(aggregate_brand("v", 0, &[], &bad_fps).is_err());
        assert!(matches!(
            aggregate_brand("v", 0, &[cov(50, 0.1)], &m),
            Err(MetricsError::FrameOutOfRange { .. })
        ));
    }

    #[test]
    fn timeline_ranking() {
        let m = meta(10.0, 10.0, 1.0, 10);
        let mut covs = Vec::new();
        for (brand, frames) in [(0u32, 2u64), (1, 5), (2, 5)] {
            for f in 0..frames {
                covs.push(FrameCoverage { brand_id: brand, ..cov(f, 0.1) });
            }
        }
        let t = build_timeline(&covs, &m, 2).unwrap();
        let ids: Vec<_> = t.ranking.iter().map(|r| r.brand_id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(t.ranking[0].exposure_s, 5.0);
        let all = build_timeline(&covs, &m, 10).unwrap();
        assert_eq!(all.ranking.len(), 3);
        assert_eq!(all.series[&0].len(), 2);
        assert!(build_timeline(&covs, &m, 0).is_err());
    }

    #[test]
    fn filter_fixtures() {
        let id = TemporalFilter::default();
        let z = [true, false, true, true, false];
        assert_eq!(temporal_filter(&z, &id).unwrap(), z.to_vec());
        let bridge = TemporalFilter { min_run: 1, max_gap: 1 };
        assert_eq!(temporal_filter(&[true, false, true], &bridge).unwrap(), vec![true; 3]);
        let runs = TemporalFilter { min_run: 2, max_gap: 0 };
        assert_eq!(temporal_filter(&[false, true, false], &runs).unwrap(), vec![false; 3]);
        // leading and trailing absences are not gaps
        assert_eq!(
            temporal_filter(&[false, true, false, false], &TemporalFilter { min_run: 1, max_gap: 5 }).unwrap(),
            vec![false, true, false, false]
        );
        assert!(temporal_filter(&z, &TemporalFilter { min_run: 0, max_gap: 0 }).is_err());
    }

    #[test]
    fn filter_applied_to_coverage() {
        let m = meta(100.0, 100.0, 1.0, 6);
        let covs = [cov(0, 0.2), cov(2, 0.4), cov(5, 0.3)];
        let f = TemporalFilter { min_run: 2, max_gap: 1 };
        let out = apply_temporal_filter(0, &covs, 6, &f).unwrap();
        let r = aggregate_brand("v", 0, &out, &m).unwrap();
        // frames 0..=2 bridged into one run, frame 5 suppressed
        assert_eq!(r.frames_present, 3);
        assert!((r.avg_cov_overall_pct - 10.0).abs() < 1e-12);
        assert_eq!(r.max_cov_pct, 40.0);
        assert_eq!(r.detection_count, 2);
    }

    #[test]
    fn analyze_small_stream() {
        let lines = [
            r#"{"video_id":"v","frame":1,"class":0,"poly":[[0,0],[20,0],[20,10],[0,10]],"conf":0.9}"#,
            r#"{"video_id":"v","frame":2,"class":0,"poly":[[0,0],[20,0],[20,20],[0,20]],"conf":0.9}"#,
            r#"{"video_id":"v","frame":2,"class":1,"poly":[[0,0],[20,0],[20,20],[0,20]],"conf":0.2}"#,
            r#"{"video_id":"v","frame":9,"class":1,"poly":[[0,0],[20,0],[20,20],[0,20]],"conf":0.9}"#,
        ]
        .join("\n");
        let metas = MetaTable::single(meta(100.0, 100.0, 2.0, 4));
        let out = analyze_stream(lines.as_bytes(), &metas, None, &AnalyzeOptions::default()).unwrap();
        assert_eq!(out.ingest.total, 4);
        assert_eq!(out.ingest.skipped.len(), 1);
        assert_eq!(out.below_threshold, 1);
        let rows = out.brand_rows();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.exposure_s, r.avg_cov_present_pct, r.avg_cov_overall_pct, r.max_cov_pct), (1.0, 3.0, 1.5, 4.0));

        let strict = AnalyzeOptions {
            strictness: Strictness::Strict,
            ..Default::default()
        };
        assert!(analyze_stream(lines.as_bytes(), &metas, None, &strict).is_err());
    }

    #[test]
    fn rotated_quad_coverage() {
        let m = meta(100.0, 100.0, 1.0, 1);
        let q = QuadOBB::rotated_rect(Point2::new(50.0, 50.0), 20.0, 10.0, 33.0).unwrap();
        let c = frame_coverage(0, 0, [&q], &m).unwrap();
        assert!((c.coverage - 0.02).abs() < 1e-15);
    }

    fn arb_series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 1..200)
    }

    proptest! {
        #[test]
        fn coverage_identity(series in arb_series()) {
            let n = series.len() as u64;
            let m = meta(10.0, 10.0, 30.0, n);
            let covs: Vec<_> = series.iter().enumerate().map(|(i, c)| cov(i as u64, *c)).collect();
            let r = aggregate_brand("v", 0, &covs, &m).unwrap();
            let lhs = r.avg_cov_overall_pct * n as f64;
            let rhs = r.avg_cov_present_pct * r.frames_present as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
            if r.frames_present > 0 {
                prop_assert!(r.avg_cov_overall_pct <= r.avg_cov_present_pct * (1.0 + 1e-12));
                prop_assert!(r.max_cov_pct >= r.avg_cov_present_pct * (1.0 - 1e-12));
            }
            prop_assert!(r.exposure_s <= n as f64 / 30.0 + 1e-12);
        }

        #[test]
        fn aggregate_is_order_independent(series in arb_series(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let m = meta(10.0, 10.0, 25.0, series.len() as u64);
            let covs: Vec<_> = series.iter().enumerate().map(|(i, c)| cov(i as u64, *c)).collect();
            let mut shuffled = covs.clone();
            shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            prop_assert_eq!(aggregate_brand("v", 0, &covs, &m).unwrap(), aggregate_brand("v", 0, &shuffled, &m).unwrap());
        }

        #[test]
        fn exposure_is_additive(a in arb_series(), b in arb_series()) {
            let fps = 25.0;
            let all: Vec<f64> = a.iter().chain(&b).copied().collect();
            let ex = |s: &[f64]| {
                let m = meta(10.0, 10.0, fps, s.len() as u64);
                let covs: Vec<_> = s.iter().enumerate().map(|(i, c)| cov(i as u64, *c)).collect();
                aggregate_brand("v", 0, &covs, &m).unwrap()
            };
            let (ra, rb, rall) = (ex(&a), ex(&b), ex(&all));
            prop_assert_eq!(ra.frames_present + rb.frames_present, rall.frames_present);
            prop_assert!((ra.exposure_s + rb.exposure_s - rall.exposure_s).abs() <= 1e-12 * rall.exposure_s.max(1.0));
        }

        #[test]
        fn filter_monotone(z in prop::collection::vec(any::<bool>(), 0..120), run in 1u64..6, gap in 0u64..6) {
            let count = |v: &[bool]| v.iter().filter(|x| **x).count();
            let shrink = temporal_filter(&z, &TemporalFilter { min_run: run, max_gap: 0 }).unwrap();
            prop_assert!(count(&shrink) <= count(&z));
            let grow = temporal_filter(&z, &TemporalFilter { min_run: 1, max_gap: gap }).unwrap();
            prop_assert!(count(&grow) >= count(&z));
        }
    }
}
