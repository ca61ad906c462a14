//! Input formats: YOLO-OBB label files, class maps, JSON-lines detection
//! streams, split directory layouts and frame metadata sidecars.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Degeneracy, GeomError, Point2, QuadOBB, RectAA};

/// Slack allowed outside `[0, 1]` for normalized label coordinates.
pub const LABEL_COORD_TOL: f64 = 1e-6;

/// Significant digits used when writing normalized label coordinates.
pub const LABEL_SIG_DIGITS: usize = 9;

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "webp", "tif", "tiff"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelErrorKind {
    #[error("expected 9 fields, found {0}")]
    FieldCount(usize),
    #[error("class id {0:?} is not a non-negative integer")]
    BadClassId(String),
    #[error("non-numeric token {0:?}")]
    NonNumeric(String),
    #[error("coordinate {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error("degenerate quad: {0}")]
    Degenerate(Degeneracy),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordErrorKind {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("confidence out of range: {0}")]
    ConfidenceOutOfRange(f64),
    #[error("expected 4 vertices, found {0}")]
    VertexCount(usize),
    #[error("vertex {0} is not an [x, y] pair")]
    BadVertex(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("unknown class name {0:?}")]
    UnknownClassName(String),
    #[error("class name {0:?} given but no class map loaded")]
    NoClassMap(String),
    #[error("unknown class id {0}")]
    UnknownClassId(u32),
    #[error("degenerate quad: {0}")]
    Degenerate(Degeneracy),
    #[error("frame {frame} outside video of {count} frames")]
    FrameOutOfRange { frame: u64, count: u64 },
    #[error("no frame metadata for video {0:?}")]
    NoMeta(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}line {line}: {kind}", source_prefix(.source_name))]
    Label {
        source_name: Option<String>,
        line: usize,
        kind: LabelErrorKind,
    },
    #[error("record {index}: {kind}")]
    Record { index: usize, kind: RecordErrorKind },
    #[error("class map line {line}: {msg}")]
    ClassMap { line: usize, msg: String },
    #[error("invalid frame metadata: {0}")]
    Meta(String),
    #[error("missing directory {}", .0.display())]
    MissingDir(PathBuf),
    #[error("duplicate stem {stem:?} in {}", .dir.display())]
    DuplicateStem { stem: String, dir: PathBuf },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{}: {source}", .path.display())]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn source_prefix(name: &Option<String>) -> String {
    name.as_ref().map(|n| format!("{n}: ")).unwrap_or_default()
}

impl IngestError {
    fn file(path: &Path, source: io::Error) -> Self {
        IngestError::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// How malformed input records are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    /// Log, count and skip.
    #[default]
    Warn,
    /// First malformed record aborts.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipNote {
    pub index: usize,
    pub reason: String,
}

/// Accounting for one ingestion pass: `accepted + skipped.len() == total`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: usize,
    pub accepted: usize,
    pub skipped: Vec<SkipNote>,
}

impl IngestReport {
    pub fn merge(&mut self, other: IngestReport) {
        self.total += other.total;
        self.accepted += other.accepted;
        self.skipped.extend(other.skipped);
    }

    pub fn is_balanced(&self) -> bool {
        self.accepted + self.skipped.len() == self.total
    }

    /// Applies the strictness policy to one record outcome.
    pub(crate) fn record<T>(
        &mut self,
        outcome: Result<T, IngestError>,
        index: usize,
        strictness: Strictness,
    ) -> Result<Option<T>, IngestError> {
        self.total += 1;
        match outcome {
            Ok(v) => {
                self.accepted += 1;
                Ok(Some(v))
            }
            Err(e) if strictness == Strictness::Strict => Err(e),
            Err(e) => {
                log::warn!("skipping input: {e}");
                self.skipped.push(SkipNote {
                    index,
                    reason: e.to_string(),
                });
                Ok(None)
            }
        }
    }
}

/// Dense `id -> name` table with a reverse index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassMap {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl ClassMap {
    pub fn from_names<I, S>(names: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = ClassMap::default();
        for (i, name) in names.into_iter().enumerate() {
            let name: String = name.into();
            if name.trim().is_empty() {
                return Err(IngestError::ClassMap {
                    line: i + 1,
                    msg: "empty class name".into(),
                });
            }
            let id = i as u32;
            if map.ids.insert(name.clone(), id).is_some() {
                return Err(IngestError::ClassMap {
                    line: i + 1,
                    msg: format!("duplicate class name {name:?}"),
                });
            }
            map.names.push(name);
        }
        Ok(map)
    }

    /// One class name per line; the zero-based line number is the id.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut lines: Vec<&str> = text.lines().map(str::trim).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        Self::from_names(lines)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::file(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.names.len()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: f64,
    pub height: f64,
}

impl ImageSize {
    pub fn new(width: f64, height: f64) -> Result<Self, IngestError> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(IngestError::Meta(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn rect(&self) -> RectAA {
        RectAA {
            x_min: 0.0,
            y_min: 0.0,
            x_max: self.width,
            y_max: self.height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Video geometry and timing: `W x H` pixels, `fps` frames per second and
/// `frame_count` frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub width: f64,
    pub height: f64,
    pub fps: f64,
    pub frame_count: u64,
}

impl FrameMeta {
    pub fn new(width: f64, height: f64, fps: f64, frame_count: u64) -> Result<Self, IngestError> {
        ImageSize::new(width, height)?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(IngestError::Meta(format!("frame rate must be positive, got {fps}")));
        }
        Ok(Self {
            width,
            height,
            fps,
            frame_count,
        })
    }

    pub fn size(&self) -> ImageSize {
        ImageSize {
            width: self.width,
            height: self.height,
        }
    }

    pub fn frame_area(&self) -> f64 {
        self.width * self.height
    }

    pub fn frame_rect(&self) -> RectAA {
        self.size().rect()
    }

    /// Seconds per frame.
    pub fn frame_duration(&self) -> f64 {
        1.0 / self.fps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaRow {
    video_id: String,
    width: f64,
    height: f64,
    fps: f64,
    frame_count: u64,
}

/// Per-video frame metadata with an optional fallback for unlisted videos.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaTable {
    pub default: Option<FrameMeta>,
    pub by_video: BTreeMap<String, FrameMeta>,
}

impl MetaTable {
    pub fn single(meta: FrameMeta) -> Self {
        Self {
            default: Some(meta),
            by_video: BTreeMap::new(),
        }
    }

    /// Sidecar CSV with header `video_id,width,height,fps,frame_count`.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self, IngestError> {
        let mut table = MetaTable::default();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: MetaRow = row?;
            let meta = FrameMeta::new(row.width, row.height, row.fps, row.frame_count)?;
            table.by_video.insert(row.video_id, meta);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let file = fs::File::open(path).map_err(|e| IngestError::file(path, e))?;
        Self::read_csv(io::BufReader::new(file))
    }

    pub fn get(&self, video_id: &str) -> Option<&FrameMeta> {
        self.by_video.get(video_id).or(self.default.as_ref())
    }
}

/// One annotated logo instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frame_id: String,
    pub class_id: u32,
    pub quad: QuadOBB,
}

/// One detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub video_id: String,
    pub frame_index: u64,
    pub class_id: u32,
    pub quad: QuadOBB,
    pub confidence: f64,
}

fn label_err(line: usize, kind: LabelErrorKind) -> IngestError {
    IngestError::Label {
        source_name: None,
        line,
        kind,
    }
}

/// Parse `class_id x1 y1 x2 y2 x3 y3 x4 y4` (normalized coordinates) into a
/// ground-truth instance in pixels.
///
/// Coordinates within [`LABEL_COORD_TOL`] of the unit interval are clamped.
/// Degenerate quads are returned with their flag set.
pub fn parse_obb_label_line(
    line: &str,
    line_no: usize,
    frame_id: &str,
    img: &ImageSize,
    classes: Option<&ClassMap>,
) -> Result<GroundTruth, IngestError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 9 {
        return Err(label_err(line_no, LabelErrorKind::FieldCount(fields.len())));
    }
    let class_id: u32 = fields[0]
        .parse()
        .map_err(|_| label_err(line_no, LabelErrorKind::BadClassId(fields[0].to_string())))?;
    if let Some(map) = classes {
        if !map.contains(class_id) {
            return Err(label_err(line_no, LabelErrorKind::UnknownClass(class_id)));
        }
    }
    let mut coords = [0.0f64; 8];
    for (slot, tok) in coords.iter_mut().zip(&fields[1..]) {
        let v: f64 = tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| label_err(line_no, LabelErrorKind::NonNumeric(tok.to_string())))?;
        if !(-LABEL_COORD_TOL..=1.0 + LABEL_COORD_TOL).contains(&v) {
            return Err(label_err(line_no, LabelErrorKind::OutOfRange(v)));
        }
        *slot = v.clamp(0.0, 1.0);
    }
    let raw = [0, 1, 2, 3].map(|i| Point2::new(coords[2 * i] * img.width, coords[2 * i + 1] * img.height));
    let quad = QuadOBB::normalize(raw).expect("finite coordinates");
    Ok(GroundTruth {
        frame_id: frame_id.to_string(),
        class_id,
        quad,
    })
}

/// Shortest decimal that round-trips `v` rounded to `digits` significant digits.
pub fn format_sig(v: f64, digits: usize) -> String {
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .expect("formatted float parses");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

/// Serialize a ground-truth instance back to a normalized label line.
pub fn format_label_line(gt: &GroundTruth, img: &ImageSize) -> String {
    let mut out = gt.class_id.to_string();
    for p in gt.quad.points() {
        out.push(' ');
        out.push_str(&format_sig(p.x / img.width, LABEL_SIG_DIGITS));
        out.push(' ');
        out.push_str(&format_sig(p.y / img.height, LABEL_SIG_DIGITS));
    }
    out
}

/// Read every instance from a label file. Degenerate quads are reported as
/// skipped under [`Strictness::Warn`] and fatal under [`Strictness::Strict`].
pub fn read_label_file(
    path: &Path,
    frame_id: &str,
    img: &ImageSize,
    classes: Option<&ClassMap>,
    strictness: Strictness,
) -> Result<(Vec<GroundTruth>, IngestReport), IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::file(path, e))?;
    let name = path.display().to_string();
    let mut report = IngestReport::default();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let parsed = parse_obb_label_line(line, line_no, frame_id, img, classes).and_then(|gt| {
            match gt.quad.degeneracy() {
                Some(d) => Err(label_err(line_no, LabelErrorKind::Degenerate(d))),
                None => Ok(gt),
            }
        });
        let parsed = parsed.map_err(|e| match e {
            IngestError::Label { line, kind, .. } => IngestError::Label {
                source_name: Some(name.clone()),
                line,
                kind,
            },
            other => other,
        });
        if let Some(gt) = report.record(parsed, line_no, strictness)? {
            out.push(gt);
        }
    }
    Ok((out, report))
}

/// Class reference in a detection record: numeric id or class-map name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassRef {
    Id(u32),
    Name(String),
}

/// Wire form of one detection: one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub video_id: String,
    pub frame: u64,
    pub class: ClassRef,
    pub poly: Vec<[f64; 2]>,
    pub conf: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        DetectionRecord {
            video_id: d.video_id.clone(),
            frame: d.frame_index,
            class: ClassRef::Id(d.class_id),
            poly: d.quad.points().iter().map(|p| [p.x, p.y]).collect(),
            conf: d.confidence,
        }
    }
}

#[derive(Debug, Deserialize)]
struct LooseRecord {
    video_id: Option<String>,
    frame: Option<u64>,
    class: Option<ClassRef>,
    poly: Option<Vec<Vec<f64>>>,
    conf: Option<f64>,
}

/// Validation context for detection records.
#[derive(Debug, Clone, Copy, Default)]
pub struct RecordContext<'a> {
    pub classes: Option<&'a ClassMap>,
    pub meta: Option<&'a MetaTable>,
    /// Require metadata for every video (otherwise unknown videos pass).
    pub require_meta: bool,
}

/// Parse and validate one JSON-lines detection record.
pub fn parse_detection_record(
    line: &str,
    ctx: &RecordContext<'_>,
) -> Result<Detection, RecordErrorKind> {
    let rec: LooseRecord =
        serde_json::from_str(line).map_err(|e| RecordErrorKind::Malformed(e.to_string()))?;
    let video_id = rec.video_id.ok_or(RecordErrorKind::MissingField("video_id"))?;
    let frame_index = rec.frame.ok_or(RecordErrorKind::MissingField("frame"))?;
    let class = rec.class.ok_or(RecordErrorKind::MissingField("class"))?;
    let poly = rec.poly.ok_or(RecordErrorKind::MissingField("poly"))?;
    let confidence = rec.conf.ok_or(RecordErrorKind::MissingField("conf"))?;

    if !(0.0..=1.0).contains(&confidence) {
        return Err(RecordErrorKind::ConfidenceOutOfRange(confidence));
    }
    let class_id = match class {
        ClassRef::Id(id) => {
            if ctx.classes.is_some_and(|m| !m.contains(id)) {
                return Err(RecordErrorKind::UnknownClassId(id));
            }
            id
        }
        ClassRef::Name(name) => match ctx.classes {
            None => return Err(RecordErrorKind::NoClassMap(name)),
            Some(m) => m.id(&name).ok_or(RecordErrorKind::UnknownClassName(name))?,
        },
    };
    if poly.len() != 4 {
        return Err(RecordErrorKind::VertexCount(poly.len()));
    }
    let mut raw = [Point2::default(); 4];
    for (i, (slot, v)) in raw.iter_mut().zip(&poly).enumerate() {
        if v.len() != 2 {
            return Err(RecordErrorKind::BadVertex(i));
        }
        *slot = Point2::new(v[0], v[1]);
    }
    let quad = match QuadOBB::normalize(raw) {
        Ok(q) => q,
        Err(GeomError::NonFinite { .. }) => return Err(RecordErrorKind::NonFinite),
        Err(e) => return Err(RecordErrorKind::Malformed(e.to_string())),
    };
    if let Some(d) = quad.degeneracy() {
        return Err(RecordErrorKind::Degenerate(d));
    }
    if let Some(table) = ctx.meta {
        match table.get(&video_id) {
            Some(m) if frame_index >= m.frame_count => {
                return Err(RecordErrorKind::FrameOutOfRange {
                    frame: frame_index,
                    count: m.frame_count,
                })
            }
            None if ctx.require_meta => return Err(RecordErrorKind::NoMeta(video_id)),
            _ => {}
        }
    }
    Ok(Detection {
        video_id,
        frame_index,
        class_id,
        quad,
        confidence,
    })
}

/// Streaming, order-preserving reader over a JSON-lines detection source.
///
/// Yields one result per non-blank line; `index` in errors is the 1-based
/// line number. Memory use is one line buffer regardless of input size.
pub struct DetectionStream<'a, R> {
    reader: R,
    buf: String,
    line_no: usize,
    ctx: RecordContext<'a>,
}

impl<'a, R: BufRead> DetectionStream<'a, R> {
    pub fn new(reader: R, ctx: RecordContext<'a>) -> Self {
        Self {
            reader,
            buf: String::new(),
            line_no: 0,
            ctx,
        }
    }
}

impl<R: BufRead> Iterator for DetectionStream<'_, R> {
    type Item = Result<Detection, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let index = self.line_no;
            return Some(
                parse_detection_record(line, &self.ctx)
                    .map_err(|kind| IngestError::Record { index, kind }),
            );
        }
    }
}

/// Parse a whole detection stream under a strictness policy.
pub fn parse_detections_stream<R: BufRead>(
    reader: R,
    ctx: RecordContext<'_>,
    strictness: Strictness,
) -> Result<(Vec<Detection>, IngestReport), IngestError> {
    let mut report = IngestReport::default();
    let mut out = Vec::new();
    for item in DetectionStream::new(reader, ctx) {
        let index = match item {
            Err(IngestError::Record { index, .. }) => index,
            Err(e) => return Err(e),
            Ok(_) => report.total + 1,
        };
        if let Some(d) = report.record(item, index, strictness)? {
            out.push(d);
        }
    }
    Ok((out, report))
}

/// Serialize one detection as a JSON line (no trailing newline).
pub fn format_detection_line(d: &Detection) -> String {
    serde_json::to_string(&DetectionRecord::from(d)).expect("detection record serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, val or test)")),
        }
    }
}

/// One frame of a split. A missing label means a background image; a missing
/// image means an orphan label (kept only in non-strict mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPair {
    pub stem: String,
    pub label: Option<PathBuf>,
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitListing {
    pub pairs: Vec<SplitPair>,
    pub unpaired: Vec<String>,
}

fn list_stems(dir: &Path, accept: impl Fn(&str) -> bool) -> Result<BTreeMap<String, PathBuf>, IngestError> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(|e| IngestError::file(dir, e))? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        if !accept(&ext) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
            continue;
        };
        if out.insert(stem.clone(), path).is_some() {
            return Err(IngestError::DuplicateStem {
                stem,
                dir: dir.to_path_buf(),
            });
        }
    }
    Ok(out)
}

/// List `<root>/<split>/{images,labels}` and pair files by stem.
pub fn load_split(root: &Path, split: Split, strictness: Strictness) -> Result<SplitListing, IngestError> {
    let dir = root.join(split.as_str());
    if !dir.is_dir() {
        return Err(IngestError::MissingDir(dir));
    }
    let images = list_stems(&dir.join("images"), |e| IMAGE_EXTENSIONS.contains(&e))?;
    let mut labels = list_stems(&dir.join("labels"), |e| e == "txt")?;
    let mut listing = SplitListing::default();
    for (stem, image) in images {
        let label = labels.remove(&stem);
        if label.is_none() {
            listing.unpaired.push(format!("image {stem} has no label file"));
        }
        listing.pairs.push(SplitPair {
            stem,
            label,
            image: Some(image),
        });
    }
    for (stem, label) in labels {
        log::warn!("label {} has no matching image", label.display());
        listing.unpaired.push(format!("label {stem} has no image"));
        if strictness == Strictness::Warn {
            listing.pairs.push(SplitPair {
                stem,
                label: Some(label),
                image: None,
            });
        }
    }
    listing.pairs.sort_by(|a, b| a.stem.cmp(&b.stem));
    Ok(listing)
}

/// Ground truth of a whole split, keyed by frame stem.
#[derive(Debug, Clone, Default)]
pub struct SplitLabels {
    pub frames: BTreeMap<String, Vec<GroundTruth>>,
    pub report: IngestReport,
    pub unpaired: Vec<String>,
}

/// Load and parse every label file of a split. `sizes` resolves the pixel
/// size of each frame stem.
pub fn load_split_labels<F>(
    root: &Path,
    split: Split,
    classes: Option<&ClassMap>,
    strictness: Strictness,
    sizes: F,
) -> Result<SplitLabels, IngestError>
where
    F: Fn(&str) -> Option<ImageSize>,
{
    let listing = load_split(root, split, strictness)?;
    let mut out = SplitLabels {
        unpaired: listing.unpaired,
        ..Default::default()
    };
    for pair in listing.pairs {
        let img = sizes(&pair.stem)
            .ok_or_else(|| IngestError::Meta(format!("no image size for frame {:?}", pair.stem)))?;
        let gts = match &pair.label {
            Some(path) => {
                let (gts, report) = read_label_file(path, &pair.stem, &img, classes, strictness)?;
                out.report.merge(report);
                gts
            }
            None => Vec::new(),
        };
        out.frames.insert(pair.stem, gts);
    }
    Ok(out)
}
