//! Python bindings: `import exposure_engine`.

use exposure_core::eval::{self, ApMethod, BoxMode, EvalBox, EvalConfig, EvalFrame, OperatingPoint};
use exposure_core::exposure::{self, TemporalFilter};
use exposure_core::geom::{self, Point2, Polygon, QuadOBB, RectAA};
use exposure_core::ingest::{self, FrameMeta, GroundTruth, ImageSize};
use exposure_core::loss::{self, AnchorTargets, LossParams};
use exposure_core::tightness;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pts(v: &[Point2]) -> Vec<(f64, f64)> {
    v.iter().map(|p| (p.x, p.y)).collect()
}

/// Oriented box stored as a counter-clockwise quad.
#[pyclass(name = "Quad", module = "exposure_engine", frozen)]
pub struct PyQuad {
    inner: QuadOBB,
}

#[pymethods]
impl PyQuad {
    /// Normalizes vertex order; degenerate quads are kept and flagged.
    #[new]
    fn new(points: [(f64, f64); 4]) -> PyResult<Self> {
        let raw = points.map(Point2::from);
        QuadOBB::normalize(raw).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn rotated_rect(cx: f64, cy: f64, width: f64, height: f64, theta_deg: f64) -> PyResult<Self> {
        QuadOBB::rotated_rect(Point2::new(cx, cy), width, height, theta_deg)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_rect(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> PyResult<Self> {
        let r = RectAA::new(x_min, y_min, x_max, y_max).map_err(err)?;
        Ok(Self { inner: QuadOBB::from_rect(&r) })
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        pts(self.inner.points())
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.area()
    }

    /// `None`, "zero area", "self-intersecting" or "non-convex".
    #[getter]
    fn degeneracy(&self) -> Option<String> {
        self.inner.degeneracy().map(|d| d.to_string())
    }

    fn orientation_deg(&self) -> PyResult<f64> {
        geom::obb_orientation_deg(&self.inner).map_err(err)
    }

    fn tightness_ratio(&self) -> PyResult<f64> {
        tightness::tightness_ratio(&self.inner).map_err(err)
    }

    /// `(x_min, y_min, x_max, y_max)`
    fn enclosing_hbb(&self) -> (f64, f64, f64, f64) {
        let r = geom::enclosing_hbb(&self.inner);
        (r.x_min, r.y_min, r.x_max, r.y_max)
    }

    fn iou(&self, other: &PyQuad) -> PyResult<f64> {
        geom::iou_obb(&self.inner, &other.inner).map_err(err)
    }

    fn intersection(&self, other: &PyQuad) -> PyResult<Vec<(f64, f64)>> {
        let c = geom::convex_intersection(&self.inner, &other.inner).map_err(err)?;
        Ok(pts(c.vertices()))
    }

    fn clip_to_frame(&self, width: f64, height: f64) -> PyResult<Vec<(f64, f64)>> {
        let frame = RectAA::frame(width, height).map_err(err)?;
        let c = geom::clip_to_rect(&self.inner, &frame).map_err(err)?;
        Ok(pts(c.vertices()))
    }

    fn __repr__(&self) -> String {
        let p = self.inner.points();
        format!(
            "Quad([({}, {}), ({}, {}), ({}, {}), ({}, {})])",
            p[0].x, p[0].y, p[1].x, p[1].y, p[2].x, p[2].y, p[3].x, p[3].y
        )
    }
}

#[pyfunction]
fn iou(a: &PyQuad, b: &PyQuad) -> PyResult<f64> {
    geom::iou_obb(&a.inner, &b.inner).map_err(err)
}

#[pyfunction]
fn polygon_area(points: Vec<(f64, f64)>) -> PyResult<f64> {
    let v: Vec<Point2> = points.into_iter().map(Point2::from).collect();
    geom::polygon_area(&v).map_err(err)
}

#[pyfunction]
fn tr_rect(width: f64, height: f64, theta_deg: f64) -> PyResult<f64> {
    tightness::tr_rect_closed_form(width, height, theta_deg).map_err(err)
}

fn params(gamma: f64, alpha: f64) -> PyResult<LossParams> {
    let p = LossParams { gamma, alpha, ..Default::default() };
    p.validate().map_err(err)?;
    Ok(p)
}

#[pyfunction]
fn bce(p: f64, q: f64) -> f64 {
    loss::bce_soft(p, q)
}

#[pyfunction]
#[pyo3(signature = (p, y, gamma = 2.0, alpha = 1.0))]
fn focal_loss(p: f64, y: bool, gamma: f64, alpha: f64) -> f64 {
    loss::focal_loss_weighted(p, y, gamma, alpha)
}

#[pyfunction]
#[pyo3(signature = (p, y, q, gamma = 2.0, alpha = 0.75))]
fn vfl(p: f64, y: bool, q: f64, gamma: f64, alpha: f64) -> PyResult<f64> {
    loss::vfl(p, y, q, &params(gamma, alpha)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p, y, q, gamma = 2.0, alpha = 0.75))]
fn vfl_grad(p: f64, y: bool, q: f64, gamma: f64, alpha: f64) -> PyResult<f64> {
    loss::vfl_grad(p, y, q, &params(gamma, alpha)?).map_err(err)
}

/// Row-major `anchors x classes` arrays flattened to lists.
#[pyfunction]
#[pyo3(signature = (p, y, q, anchors, classes, gamma = 2.0, alpha = 0.75))]
fn cls_loss(
    p: Vec<f64>,
    y: Vec<bool>,
    q: Vec<f64>,
    anchors: usize,
    classes: usize,
    gamma: f64,
    alpha: f64,
) -> PyResult<f64> {
    let t = AnchorTargets::new(anchors, classes, p, y, q).map_err(err)?;
    loss::cls_loss(&t, &params(gamma, alpha)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (l_box, l_cls, l_dfl, lambda_box = 1.0, lambda_cls = 1.0, lambda_dfl = 1.0))]
fn total_loss(l_box: f64, l_cls: f64, l_dfl: f64, lambda_box: f64, lambda_cls: f64, lambda_dfl: f64) -> PyResult<f64> {
    let p = LossParams { lambda_box, lambda_cls, lambda_dfl, ..Default::default() };
    p.validate().map_err(err)?;
    loss::total_loss(l_box, l_cls, l_dfl, &p).map_err(err)
}

/// Returns `(passed, [failed fixture names], max gradient relative error)`.
#[pyfunction]
#[pyo3(signature = (gamma = 2.0, alpha = 0.75))]
fn losscheck(gamma: f64, alpha: f64) -> PyResult<(bool, Vec<String>, f64)> {
    let report = loss::run_loss_fixtures(&params(gamma, alpha)?).map_err(err)?;
    let failed = report.failures().map(|f| f.name.clone()).collect();
    Ok((report.passed(), failed, report.gradient_max_rel_err))
}

/// Summed clipped area of `quads` over the frame area, capped at 1.
#[pyfunction]
fn frame_coverage(quads: Vec<PyRef<'_, PyQuad>>, width: f64, height: f64) -> PyResult<f64> {
    let meta = FrameMeta::new(width, height, 1.0, 1).map_err(err)?;
    let c = exposure::frame_coverage(0, 0, quads.iter().map(|q| &q.inner), &meta).map_err(err)?;
    Ok(c.coverage)
}

/// Per-frame coverages of one brand (`len == frame_count`) to summary metrics.
#[pyfunction]
#[pyo3(signature = (coverages, fps, width = 1.0, height = 1.0))]
fn brand_metrics<'py>(
    py: Python<'py>,
    coverages: Vec<f64>,
    fps: f64,
    width: f64,
    height: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let meta = FrameMeta::new(width, height, fps, coverages.len() as u64).map_err(err)?;
    let area = meta.frame_area();
    let frames: Vec<_> = coverages
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0.0)
        .map(|(i, c)| exposure::FrameCoverage::from_area(0, i as u64, c * area, 1, &meta))
        .collect();
    let m = exposure::aggregate_brand("", 0, &frames, &meta).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("frames_present", m.frames_present)?;
    d.set_item("exposure_s", m.exposure_s)?;
    d.set_item("avg_cov_present_pct", m.avg_cov_present_pct)?;
    d.set_item("avg_cov_overall_pct", m.avg_cov_overall_pct)?;
    d.set_item("max_cov_pct", m.max_cov_pct)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (visible, min_run = 1, max_gap = 0))]
fn temporal_filter(visible: Vec<bool>, min_run: u64, max_gap: u64) -> PyResult<Vec<bool>> {
    exposure::temporal_filter(&visible, &TemporalFilter { min_run, max_gap }).map_err(err)
}

type PyBox<'py> = (u32, PyRef<'py, PyQuad>, f64);
type PyGt<'py> = (u32, PyRef<'py, PyQuad>);

/// `frames` is a list of `(predictions, ground_truth)` where predictions are
/// `(class_id, Quad, confidence)` and ground truth `(class_id, Quad)`.
#[pyfunction]
#[pyo3(signature = (frames, iou_threshold = 0.5, box_mode = "obb", ap_method = "all_points", conf_threshold = None))]
fn evaluate<'py>(
    py: Python<'py>,
    frames: Vec<(Vec<PyBox<'py>>, Vec<PyGt<'py>>)>,
    iou_threshold: f64,
    box_mode: &str,
    ap_method: &str,
    conf_threshold: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = EvalConfig {
        iou_threshold,
        box_mode: box_mode.parse::<BoxMode>().map_err(err)?,
        ap_method: ap_method.parse::<ApMethod>().map_err(err)?,
        operating_point: conf_threshold.map_or(OperatingPoint::MaxF1, OperatingPoint::Fixed),
        ..Default::default()
    };
    let frames: Vec<EvalFrame> = frames
        .iter()
        .enumerate()
        .map(|(i, (preds, gts))| EvalFrame {
            frame_id: i.to_string(),
            preds: preds
                .iter()
                .map(|(c, q, s)| EvalBox { class_id: *c, quad: q.inner.clone(), confidence: *s })
                .collect(),
            gts: gts
                .iter()
                .map(|(c, q)| EvalBox { class_id: *c, quad: q.inner.clone(), confidence: 1.0 })
                .collect(),
        })
        .collect();
    let r = eval::evaluate(&frames, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("map", r.map)?;
    d.set_item("per_class_ap", r.per_class_ap)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("operating_confidence", r.operating_confidence)?;
    d.set_item("num_predictions", r.num_predictions)?;
    d.set_item("num_ground_truth", r.num_ground_truth)?;
    d.set_item("num_true_positives", r.num_true_positives)?;
    let hist: Vec<(f64, usize, f64, f64)> = r
        .iou_histogram
        .bins
        .iter()
        .map(|b| (b.threshold, b.count, b.fraction, b.fraction_of_predictions))
        .collect();
    d.set_item("iou_histogram", hist)?;
    Ok(d)
}

/// Parse one normalized label line into `(class_id, Quad)` in pixels.
#[pyfunction]
fn parse_label_line(line: &str, width: f64, height: f64) -> PyResult<(u32, PyQuad)> {
    let img = ImageSize::new(width, height).map_err(err)?;
    let gt = ingest::parse_obb_label_line(line, 1, "", &img, None).map_err(err)?;
    Ok((gt.class_id, PyQuad { inner: gt.quad }))
}

#[pyfunction]
fn format_label_line(class_id: u32, quad: &PyQuad, width: f64, height: f64) -> PyResult<String> {
    let img = ImageSize::new(width, height).map_err(err)?;
    let gt = GroundTruth { frame_id: String::new(), class_id, quad: quad.inner.clone() };
    Ok(ingest::format_label_line(&gt, &img))
}

#[pymodule]
fn exposure_engine(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuad>()?;
    m.add("GEOM_EPS", geom::GEOM_EPS)?;
    m.add("PROB_EPS", loss::PROB_EPS)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(polygon_area, m)?)?;
    m.add_function(wrap_pyfunction!(tr_rect, m)?)?;
    m.add_function(wrap_pyfunction!(bce, m)?)?;
    m.add_function(wrap_pyfunction!(focal_loss, m)?)?;
    m.add_function(wrap_pyfunction!(vfl, m)?)?;
    m.add_function(wrap_pyfunction!(vfl_grad, m)?)?;
    m.add_function(wrap_pyfunction!(cls_loss, m)?)?;
    m.add_function(wrap_pyfunction!(total_loss, m)?)?;
    m.add_function(wrap_pyfunction!(losscheck, m)?)?;
    m.add_function(wrap_pyfunction!(frame_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(brand_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(temporal_filter, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_label_line, m)?)?;
    m.add_function(wrap_pyfunction!(format_label_line, m)?)?;
    Ok(())
}
