//! Exact planar geometry for oriented boxes.
//!
//! Oriented boxes are stored as four-vertex convex polygons in pixel space.
//! Intersections are computed by half-plane clipping, which is exact up to
//! floating point for convex operands and never produces more than eight
//! vertices for two quads.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// On-edge classification tolerance, in pixels.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self::new(x, y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self::new(x, y)
    }
}

#[inline]
fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Why a quad failed validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    ZeroArea,
    SelfIntersecting,
    NonConvex,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Degeneracy::ZeroArea => "zero area",
            Degeneracy::SelfIntersecting => "self-intersecting",
            Degeneracy::NonConvex => "non-convex",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("non-finite coordinate ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("degenerate quad: {0}")]
    Degenerate(Degeneracy),
    #[error("IoU undefined: both polygons have zero area")]
    ZeroUnion,
    #[error("invalid rectangle: min ({x_min}, {y_min}) exceeds max ({x_max}, {y_max})")]
    InvalidRect {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
}

/// Anything that can be viewed as an ordered vertex ring.
pub trait Polygon {
    fn vertices(&self) -> &[Point2];

    /// Unsigned shoelace area. Empty and sub-triangle rings have area 0.
    fn area(&self) -> f64 {
        signed_area(self.vertices()).abs()
    }
}

/// Shoelace signed area, positive for counter-clockwise rings.
///
/// Vertices are translated to the first one before accumulating, which keeps
/// the result stable for boxes far from the origin.
pub fn signed_area(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let o = pts[0];
    let mut acc = 0.0;
    for w in pts[1..].windows(2) {
        acc += cross(w[0].sub(o), w[1].sub(o));
    }
    acc * 0.5
}

/// Shoelace area of an arbitrary vertex list.
pub fn polygon_area(pts: &[Point2]) -> Result<f64, GeomError> {
    check_finite(pts)?;
    Ok(signed_area(pts).abs())
}

fn check_finite(pts: &[Point2]) -> Result<(), GeomError> {
    match pts.iter().find(|p| !p.is_finite()) {
        Some(p) => Err(GeomError::NonFinite { x: p.x, y: p.y }),
        None => Ok(()),
    }
}

/// Axis-aligned rectangle, also used for frames and derived HBBs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectAA {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl RectAA {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeomError> {
        for p in [Point2::new(x_min, y_min), Point2::new(x_max, y_max)] {
            check_finite(&[p])?;
        }
        if x_min > x_max || y_min > y_max {
            return Err(GeomError::InvalidRect {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// The frame rectangle `[0, width] x [0, height]`.
    pub fn frame(width: f64, height: f64) -> Result<Self, GeomError> {
        Self::new(0.0, 0.0, width, height)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
    }
}

/// Axis-aligned IoU computed directly from extents.
pub fn iou_aabb(a: &RectAA, b: &RectAA) -> Result<f64, GeomError> {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return Err(GeomError::ZeroUnion);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// An oriented box as four vertices in canonical order.
///
/// Canonical order is counter-clockwise starting from the vertex with the
/// smallest `(y, x)`. Quads that fail validation are still representable and
/// carry their [`Degeneracy`] so callers can pick a drop or keep policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOBB {
    vertices: [Point2; 4],
    degeneracy: Option<Degeneracy>,
}

impl Polygon for QuadOBB {
    fn vertices(&self) -> &[Point2] {
        &self.vertices
    }
}

impl QuadOBB {
    /// Canonicalize winding and start vertex, then classify the quad.
    ///
    /// Only non-finite input is an error; degenerate shapes are flagged.
    pub fn normalize(raw: [Point2; 4]) -> Result<Self, GeomError> {
        check_finite(&raw)?;
        let mut v = raw;
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        rotate_to_canonical_start(&mut v);
        let degeneracy = classify(&v);
        Ok(Self {
            vertices: v,
            degeneracy,
        })
    }

    /// Same as [`QuadOBB::normalize`] but rejects degenerate shapes.
    pub fn new_valid(raw: [Point2; 4]) -> Result<Self, GeomError> {
        let q = Self::normalize(raw)?;
        q.ensure_valid()?;
        Ok(q)
    }

    pub fn from_rect(r: &RectAA) -> Self {
        let v = [
            Point2::new(r.x_min, r.y_min),
            Point2::new(r.x_max, r.y_min),
            Point2::new(r.x_max, r.y_max),
            Point2::new(r.x_min, r.y_max),
        ];
        let degeneracy = classify(&v);
        Self {
            vertices: v,
            degeneracy,
        }
    }

    /// A `width x height` rectangle centered on `center`, rotated
    /// counter-clockwise by `theta_deg`.
    pub fn rotated_rect(
        center: Point2,
        width: f64,
        height: f64,
        theta_deg: f64,
    ) -> Result<Self, GeomError> {
        let (s, c) = theta_deg.to_radians().sin_cos();
        let (hw, hh) = (width / 2.0, height / 2.0);
        let corner = |dx: f64, dy: f64| {
            Point2::new(center.x + dx * c - dy * s, center.y + dx * s + dy * c)
        };
        Self::normalize([
            corner(-hw, -hh),
            corner(hw, -hh),
            corner(hw, hh),
            corner(-hw, hh),
        ])
    }

    pub fn points(&self) -> &[Point2; 4] {
        &self.vertices
    }

    pub fn degeneracy(&self) -> Option<Degeneracy> {
        self.degeneracy
    }

    pub fn is_degenerate(&self) -> bool {
        self.degeneracy.is_some()
    }

    pub fn ensure_valid(&self) -> Result<(), GeomError> {
        match self.degeneracy {
            Some(d) => Err(GeomError::Degenerate(d)),
            None => Ok(()),
        }
    }

    /// Convex quads whose only problem is zero area can still be clipped.
    fn ensure_convex(&self) -> Result<(), GeomError> {
        match self.degeneracy {
            Some(d @ (Degeneracy::SelfIntersecting | Degeneracy::NonConvex)) => {
                Err(GeomError::Degenerate(d))
            }
            _ => Ok(()),
        }
    }
}

/// Canonicalize four raw points into a [`QuadOBB`].
pub fn normalize_quad(raw: [Point2; 4]) -> Result<QuadOBB, GeomError> {
    QuadOBB::normalize(raw)
}

fn rotate_to_canonical_start(v: &mut [Point2]) {
    if v.is_empty() {
        return;
    }
    let start = v
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    v.rotate_left(start);
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    cross(b.sub(a), c.sub(a))
}

fn segments_cross(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn classify(v: &[Point2; 4]) -> Option<Degeneracy> {
    if segments_cross(v[0], v[1], v[2], v[3]) || segments_cross(v[1], v[2], v[3], v[0]) {
        return Some(Degeneracy::SelfIntersecting);
    }
    if signed_area(v) <= GEOM_EPS {
        return Some(Degeneracy::ZeroArea);
    }
    for i in 0..4 {
        let e0 = v[(i + 1) % 4].sub(v[i]);
        let e1 = v[(i + 2) % 4].sub(v[(i + 1) % 4]);
        if cross(e0, e1) < -GEOM_EPS * e0.norm() * e1.norm() {
            return Some(Degeneracy::NonConvex);
        }
    }
    None
}

/// Convex clip result: `a ∩ b` or `quad ∩ frame`. Empty means no overlap.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClipPolygon {
    vertices: Vec<Point2>,
}

impl Polygon for ClipPolygon {
    fn vertices(&self) -> &[Point2] {
        &self.vertices
    }
}

impl ClipPolygon {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    fn finish(mut pts: Vec<Point2>) -> Self {
        pts.dedup_by(|a, b| a.sub(*b).norm() <= GEOM_EPS);
        while pts.len() > 1 && pts[0].sub(pts[pts.len() - 1]).norm() <= GEOM_EPS {
            pts.pop();
        }
        if pts.len() < 3 || signed_area(&pts).abs() <= GEOM_EPS {
            return Self::empty();
        }
        rotate_to_canonical_start(&mut pts);
        Self { vertices: pts }
    }
}

/// One Sutherland-Hodgman pass: keep the part of `poly` where `dist >= 0`.
///
/// `dist` is a signed distance in pixels; points within [`GEOM_EPS`] of the
/// boundary count as inside.
fn clip_halfplane<F>(poly: &[Point2], out: &mut Vec<Point2>, dist: F)
where
    F: Fn(Point2) -> f64,
{
    out.clear();
    let n = poly.len();
    if n == 0 {
        return;
    }
    let mut s = poly[n - 1];
    let mut ds = dist(s);
    for &e in poly {
        let de = dist(e);
        let s_in = ds >= -GEOM_EPS;
        let e_in = de >= -GEOM_EPS;
        if s_in != e_in {
            let t = (ds / (ds - de)).clamp(0.0, 1.0);
            out.push(Point2::new(s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)));
        }
        if e_in {
            out.push(e);
        }
        s = e;
        ds = de;
    }
}

/// Clip a quad to an axis-aligned rectangle.
pub fn clip_to_rect(poly: &QuadOBB, frame: &RectAA) -> Result<ClipPolygon, GeomError> {
    poly.ensure_convex()?;
    if poly.is_degenerate() || frame.area() <= 0.0 {
        return Ok(ClipPolygon::empty());
    }
    let mut cur: Vec<Point2> = poly.vertices.to_vec();
    let mut next = Vec::with_capacity(8);
    let r = *frame;
    let planes: [&dyn Fn(Point2) -> f64; 4] = [
        &|p: Point2| p.x - r.x_min,
        &|p: Point2| r.x_max - p.x,
        &|p: Point2| p.y - r.y_min,
        &|p: Point2| r.y_max - p.y,
    ];
    for plane in planes {
        clip_halfplane(&cur, &mut next, plane);
        std::mem::swap(&mut cur, &mut next);
        if cur.is_empty() {
            return Ok(ClipPolygon::empty());
        }
    }
    Ok(ClipPolygon::finish(cur))
}

/// Intersection of two convex quads.
pub fn convex_intersection(a: &QuadOBB, b: &QuadOBB) -> Result<ClipPolygon, GeomError> {
    a.ensure_convex()?;
    b.ensure_convex()?;
    if a.is_degenerate() || b.is_degenerate() {
        return Ok(ClipPolygon::empty());
    }
    let mut cur: Vec<Point2> = a.vertices.to_vec();
    let mut next = Vec::with_capacity(8);
    let clip = &b.vertices;
    for i in 0..4 {
        let p0 = clip[i];
        let edge = clip[(i + 1) % 4].sub(p0);
        let len = edge.norm();
        // b is counter-clockwise, so its interior lies left of each edge
        clip_halfplane(&cur, &mut next, |p| cross(edge, p.sub(p0)) / len);
        std::mem::swap(&mut cur, &mut next);
        if cur.is_empty() {
            return Ok(ClipPolygon::empty());
        }
    }
    Ok(ClipPolygon::finish(cur))
}

/// Rotated IoU of two oriented boxes.
pub fn iou_obb(a: &QuadOBB, b: &QuadOBB) -> Result<f64, GeomError> {
    a.ensure_convex()?;
    b.ensure_convex()?;
    let (area_a, area_b) = (a.area(), b.area());
    if area_a + area_b <= 0.0 {
        return Err(GeomError::ZeroUnion);
    }
    let inter = convex_intersection(a, b)?.area();
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return Err(GeomError::ZeroUnion);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

pub fn enclosing_hbb(poly: &QuadOBB) -> RectAA {
    let v = &poly.vertices;
    let mut r = RectAA {
        x_min: v[0].x,
        y_min: v[0].y,
        x_max: v[0].x,
        y_max: v[0].y,
    };
    for p in &v[1..] {
        r.x_min = r.x_min.min(p.x);
        r.y_min = r.y_min.min(p.y);
        r.x_max = r.x_max.max(p.x);
        r.y_max = r.y_max.max(p.y);
    }
    r
}

/// Angle of the longer edge pair against the horizontal axis, folded into
/// `[0, 90]` degrees. Squares use the first canonical edge.
pub fn obb_orientation_deg(poly: &QuadOBB) -> Result<f64, GeomError> {
    poly.ensure_valid()?;
    let v = &poly.vertices;
    let edge = |i: usize| v[(i + 1) % 4].sub(v[i]);
    let pair_a = edge(0).norm() + edge(2).norm();
    let pair_b = edge(1).norm() + edge(3).norm();
    let e = if pair_b > pair_a * (1.0 + GEOM_EPS) {
        edge(1)
    } else {
        edge(0)
    };
    let deg = e.y.atan2(e.x).to_degrees().abs();
    let deg = if deg > 90.0 { 180.0 - deg } else { deg };
    Ok(deg.clamp(0.0, 90.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(raw: [(f64, f64); 4]) -> [Point2; 4] {
        raw.map(Point2::from)
    }

    fn unit_square() -> QuadOBB {
        QuadOBB::new_valid(pts([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap()
    }

    #[test]
    fn area_fixtures() {
        assert_eq!(unit_square().area(), 1.0);
        let collinear = pts([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        assert_eq!(polygon_area(&collinear).unwrap(), 0.0);
        let r = QuadOBB::rotated_rect(Point2::new(3.0, -2.0), 2.0, 1.0, 37.0).unwrap();
        assert_relative_eq!(r.area(), 2.0, max_relative = 1e-12);
        assert_eq!(polygon_area(&[]).unwrap(), 0.0);
    }

    #[test]
    fn area_rejects_nan() {
        let bad = [Point2::new(0.0, 0.0), Point2::new(f64::NAN, 1.0), Point2::new(1.0, 1.0)];
        assert!(matches!(polygon_area(&bad), Err(GeomError::NonFinite { .. })));
        let raw = pts([(0.0, 0.0), (1.0, 0.0), (f64::INFINITY, 1.0), (0.0, 1.0)]);
        assert!(QuadOBB::normalize(raw).is_err());
    }

    #[test]
    fn normalize_winding_and_start() {
        let cw = QuadOBB::normalize(pts([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])).unwrap();
        assert_eq!(cw.points(), unit_square().points());
        let shifted =
            QuadOBB::normalize(pts([(1.0, 1.0), (0.0, 1.0), (0.0, 0.0), (1.0, 0.0)])).unwrap();
        assert_eq!(shifted.points()[0], Point2::new(0.0, 0.0));
        assert_eq!(shifted.points(), unit_square().points());
        assert!(signed_area(shifted.points()) > 0.0);
    }

    #[test]
    fn normalize_flags_degenerate() {
        let bow = QuadOBB::normalize(pts([(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)])).unwrap();
        assert_eq!(bow.degeneracy(), Some(Degeneracy::SelfIntersecting));
        let flat = QuadOBB::normalize(pts([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)])).unwrap();
        assert_eq!(flat.degeneracy(), Some(Degeneracy::ZeroArea));
        let dart = QuadOBB::normalize(pts([(0.0, 0.0), (2.0, 1.0), (4.0, 0.0), (2.0, 3.0)])).unwrap();
        assert_eq!(dart.degeneracy(), Some(Degeneracy::NonConvex));
        assert!(QuadOBB::new_valid(*dart.points()).is_err());
    }

    #[test]
    fn clip_fixtures() {
        let frame = RectAA::frame(100.0, 100.0).unwrap();
        let inside = QuadOBB::rotated_rect(Point2::new(50.0, 50.0), 20.0, 10.0, 25.0).unwrap();
        let c = clip_to_rect(&inside, &frame).unwrap();
        assert_eq!(c.vertices(), inside.vertices());

        let outside = QuadOBB::from_rect(&RectAA::new(200.0, 200.0, 210.0, 210.0).unwrap());
        assert!(clip_to_rect(&outside, &frame).unwrap().is_empty());

        let straddle = QuadOBB::from_rect(&RectAA::new(-5.0, 20.0, 5.0, 30.0).unwrap());
        assert_relative_eq!(clip_to_rect(&straddle, &frame).unwrap().area(), 50.0, max_relative = 1e-12);
    }

    /// Count of integer-lattice cell centers covered, an independent area estimate.
    fn raster_area(q: &QuadOBB, frame: &RectAA, step: f64) -> f64 {
        let v = q.points();
        let inside = |p: Point2| (0..4).all(|i| orient(v[i], v[(i + 1) % 4], p) >= 0.0);
        let mut n = 0usize;
        let mut y = frame.y_min + step / 2.0;
        while y < frame.y_max {
            let mut x = frame.x_min + step / 2.0;
            while x < frame.x_max {
                if inside(Point2::new(x, y)) {
                    n += 1;
                }
                x += step;
            }
            y += step;
        }
        n as f64 * step * step
    }

    #[test]
    fn clip_half_overlap_matches_raster() {
        let frame = RectAA::frame(100.0, 100.0).unwrap();
        let straddle = QuadOBB::from_rect(&RectAA::new(-5.0, 20.0, 5.0, 30.0).unwrap());
        let oracle = raster_area(&straddle, &frame, 0.05);
        assert!((oracle - 50.0).abs() < 0.5, "raster oracle {oracle}");
        assert!((clip_to_rect(&straddle, &frame).unwrap().area() - oracle).abs() < 0.5);
    }

    #[test]
    fn intersection_fixtures() {
        let a = unit_square();
        assert_eq!(convex_intersection(&a, &a).unwrap().area(), a.area());
        let far = QuadOBB::from_rect(&RectAA::new(5.0, 5.0, 6.0, 6.0).unwrap());
        assert!(convex_intersection(&a, &far).unwrap().is_empty());

        let centered = QuadOBB::rotated_rect(Point2::new(0.0, 0.0), 1.0, 1.0, 0.0).unwrap();
        let diamond = QuadOBB::rotated_rect(Point2::new(0.0, 0.0), 1.0, 1.0, 45.0).unwrap();
        let inter = convex_intersection(&centered, &diamond).unwrap();
        assert_eq!(inter.len(), 8);
        assert_relative_eq!(inter.area(), 2.0 * (2f64.sqrt() - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn iou_fixtures() {
        let a = unit_square();
        assert_eq!(iou_obb(&a, &a).unwrap(), 1.0);
        let shifted = QuadOBB::from_rect(&RectAA::new(0.5, 0.0, 1.5, 1.0).unwrap());
        assert_relative_eq!(iou_obb(&a, &shifted).unwrap(), 1.0 / 3.0, max_relative = 1e-12);
        let centered = QuadOBB::rotated_rect(Point2::new(0.0, 0.0), 1.0, 1.0, 0.0).unwrap();
        let diamond = QuadOBB::rotated_rect(Point2::new(0.0, 0.0), 1.0, 1.0, 45.0).unwrap();
        assert_relative_eq!(iou_obb(&centered, &diamond).unwrap(), 0.5f64.sqrt(), max_relative = 1e-12);
        let touching = QuadOBB::from_rect(&RectAA::new(1.0, 0.0, 2.0, 1.0).unwrap());
        assert_eq!(iou_obb(&a, &touching).unwrap(), 0.0);
    }

    #[test]
    fn iou_errors() {
        let flat = QuadOBB::normalize(pts([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)])).unwrap();
        assert_eq!(iou_obb(&flat, &flat), Err(GeomError::ZeroUnion));
        let bow = QuadOBB::normalize(pts([(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)])).unwrap();
        assert!(matches!(iou_obb(&bow, &unit_square()), Err(GeomError::Degenerate(_))));
        assert_eq!(iou_obb(&flat, &unit_square()).unwrap(), 0.0);
    }

    #[test]
    fn hbb_fixtures() {
        let r = QuadOBB::from_rect(&RectAA::new(0.0, 0.0, 2.0, 1.0).unwrap());
        assert_eq!(enclosing_hbb(&r), RectAA::new(0.0, 0.0, 2.0, 1.0).unwrap());
        let d = QuadOBB::rotated_rect(Point2::new(0.0, 0.0), 1.0, 1.0, 45.0).unwrap();
        let h = enclosing_hbb(&d);
        let half = 2f64.sqrt() / 2.0;
        assert_relative_eq!(h.x_min, -half, max_relative = 1e-12);
        assert_relative_eq!(h.y_max, half, max_relative = 1e-12);
        assert_relative_eq!(h.area(), 2.0, max_relative = 1e-12);
        let r45 = QuadOBB::rotated_rect(Point2::new(10.0, 10.0), 2.0, 1.0, 45.0).unwrap();
        assert_relative_eq!(enclosing_hbb(&r45).area(), 4.5, max_relative = 1e-12);
    }

    #[test]
    fn aabb_iou_agrees_with_polygon_iou() {
        let a = RectAA::new(0.0, 0.0, 3.0, 2.0).unwrap();
        let b = RectAA::new(1.0, 0.5, 4.5, 3.0).unwrap();
        let poly = iou_obb(&QuadOBB::from_rect(&a), &QuadOBB::from_rect(&b)).unwrap();
        assert_relative_eq!(iou_aabb(&a, &b).unwrap(), poly, max_relative = 1e-12);
    }

    #[test]
    fn orientation_fixtures() {
        let c = Point2::new(50.0, 50.0);
        let flat = QuadOBB::rotated_rect(c, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(obb_orientation_deg(&flat).unwrap(), 0.0);
        let r30 = QuadOBB::rotated_rect(c, 2.0, 1.0, 30.0).unwrap();
        assert_relative_eq!(obb_orientation_deg(&r30).unwrap(), 30.0, max_relative = 1e-9);
        let tall = QuadOBB::rotated_rect(c, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(obb_orientation_deg(&tall).unwrap(), 90.0);
        let r120 = QuadOBB::rotated_rect(c, 2.0, 1.0, 120.0).unwrap();
        assert_relative_eq!(obb_orientation_deg(&r120).unwrap(), 60.0, max_relative = 1e-9);
        let flat_q = QuadOBB::normalize(pts([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)])).unwrap();
        assert!(obb_orientation_deg(&flat_q).is_err());
    }

    fn arb_rect() -> impl Strategy<Value = QuadOBB> {
        (0.0..100.0, 0.0..100.0, 0.5..40.0, 0.5..40.0, 0.0..180.0).prop_map(|(x, y, w, h, t)| {
            QuadOBB::rotated_rect(Point2::new(x, y), w, h, t).unwrap()
        })
    }

    proptest! {
        #[test]
        fn rigid_motion_preserves_area(q in arb_rect(), t in 0.0..360.0f64, dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
            let (s, c) = t.to_radians().sin_cos();
            let moved = q.points().map(|p| Point2::new(p.x * c - p.y * s + dx, p.x * s + p.y * c + dy));
            let m = QuadOBB::normalize(moved).unwrap();
            prop_assert!((m.area() - q.area()).abs() <= 1e-9 * q.area());
        }

        #[test]
        fn iou_bounded_and_symmetric(a in arb_rect(), b in arb_rect()) {
            let ab = iou_obb(&a, &b).unwrap();
            let ba = iou_obb(&b, &a).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1e-300) + 1e-15);
            let iab = convex_intersection(&a, &b).unwrap().area();
            let iba = convex_intersection(&b, &a).unwrap().area();
            prop_assert!((iab - iba).abs() <= 1e-9 * iab.max(iba) + 1e-12);
        }

        #[test]
        fn clipping_never_grows(q in arb_rect(), w in 1.0..120.0f64, h in 1.0..120.0f64) {
            let frame = RectAA::frame(w, h).unwrap();
            let c = clip_to_rect(&q, &frame).unwrap().area();
            prop_assert!(c <= q.area() * (1.0 + 1e-12));
            prop_assert!(c <= frame.area() * (1.0 + 1e-12));
        }

        #[test]
        fn hbb_contains_vertices(q in arb_rect()) {
            let h = enclosing_hbb(&q);
            prop_assert!(q.points().iter().all(|p| h.contains(*p, 1e-9)));
        }

        #[test]
        fn normalize_is_idempotent(q in arb_rect()) {
            let again = QuadOBB::normalize(*q.points()).unwrap();
            prop_assert_eq!(again, q);
        }
    }
}
