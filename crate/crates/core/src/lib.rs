//! Rotation-aware sponsor visibility analytics: oriented-box geometry,
//! label and detection ingest, per-brand exposure metrics, detector
//! evaluation, tightness analysis and detection losses.

pub mod eval;
pub mod exposure;
pub mod geom;
pub mod ingest;
pub mod loss;
pub mod numeric;
pub mod report;
pub mod tightness;

pub use geom::{iou_obb, GeomError, Point2, Polygon, QuadOBB, RectAA};
pub use ingest::{ClassMap, Detection, FrameMeta, GroundTruth, IngestError, IngestReport, Strictness};
