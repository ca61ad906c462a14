//! Tightness ratio (oriented-box area over enclosing axis-aligned box area)
//! and its breakdown by box orientation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{enclosing_hbb, obb_orientation_deg, GeomError, Polygon, QuadOBB};

pub const DEFAULT_BIN_WIDTH_DEG: f64 = 15.0;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum TightnessError {
    #[error("bin width {0} does not divide 90 degrees evenly")]
    BinWidth(f64),
    #[error("invalid rectangle: w={w}, h={h}, theta={theta}")]
    InvalidRect { w: f64, h: f64, theta: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

pub fn tightness_ratio(quad: &QuadOBB) -> Result<f64, GeomError> {
    quad.ensure_valid()?;
    let tr = quad.area() / enclosing_hbb(quad).area();
    Ok(tr.min(1.0))
}

/// Tightness ratio of a `w x h` rectangle rotated by `theta_deg`:
/// `w·h / (w·h + ((w² + h²)/2)·sin 2θ)`.
pub fn tr_rect_closed_form(w: f64, h: f64, theta_deg: f64) -> Result<f64, TightnessError> {
    if !(w > 0.0 && h > 0.0 && (0.0..=90.0).contains(&theta_deg)) {
        return Err(TightnessError::InvalidRect { w, h, theta: theta_deg });
    }
    let area = w * h;
    Ok(area / (area + 0.5 * (w * w + h * h) * (2.0 * theta_deg).to_radians().sin()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    GroundTruth,
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrSample {
    pub source: SampleSource,
    pub class_id: u32,
    pub tr: f64,
    pub orientation_deg: f64,
}

impl TrSample {
    pub fn from_quad(quad: &QuadOBB, class_id: u32, source: SampleSource) -> Result<Self, GeomError> {
        Ok(Self {
            source,
            class_id,
            tr: tightness_ratio(quad)?,
            orientation_deg: obb_orientation_deg(quad)?,
        })
    }
}

/// Mean tightness ratio over `[lo, hi)` degrees; the last bin also holds 90°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrBinStat {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mean_tr: Option<f64>,
    /// `1.96·s/√n` with the sample standard deviation; needs `n >= 2`.
    pub ci95_half_width: Option<f64>,
}

fn bin_count(width: f64) -> Result<usize, TightnessError> {
    if !(width.is_finite() && width > 0.0 && width <= 90.0) {
        return Err(TightnessError::BinWidth(width));
    }
    let bins = 90.0 / width;
    let rounded = bins.round();
    if (bins - rounded).abs() > 1e-9 {
        return Err(TightnessError::BinWidth(width));
    }
    Ok(rounded as usize)
}

pub fn bin_by_orientation(samples: &[TrSample], bin_width_deg: f64) -> Result<Vec<TrBinStat>, TightnessError> {
    let n_bins = bin_count(bin_width_deg)?;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for s in samples {
        let idx = ((s.orientation_deg / bin_width_deg).floor() as usize).min(n_bins - 1);
        groups[idx].push(s.tr);
    }
    Ok(groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let n = g.len();
            let mean = (n > 0).then(|| g.iter().sum::<f64>() / n as f64);
            let ci = match (n >= 2, mean) {
                (true, Some(m)) => {
                    let var = g.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
                    Some(Z_95 * var.sqrt() / (n as f64).sqrt())
                }
                _ => None,
            };
            TrBinStat {
                lo: i as f64 * bin_width_deg,
                hi: (i + 1) as f64 * bin_width_deg,
                n,
                mean_tr: mean,
                ci95_half_width: ci,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrGapRow {
    pub lo: f64,
    pub hi: f64,
    pub gt_n: usize,
    pub gt_mean: Option<f64>,
    pub pred_n: usize,
    pub pred_mean: Option<f64>,
    /// Only when both sides have samples in the bin.
    pub abs_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrComparison {
    pub bin_width_deg: f64,
    pub rows: Vec<TrGapRow>,
    pub mean_abs_gap: Option<f64>,
}

pub fn compare_gt_pred_tr(
    gt: &[TrSample],
    pred: &[TrSample],
    bin_width_deg: f64,
) -> Result<TrComparison, TightnessError> {
    let g = bin_by_orientation(gt, bin_width_deg)?;
    let p = bin_by_orientation(pred, bin_width_deg)?;
    let rows: Vec<TrGapRow> = g
        .iter()
        .zip(&p)
        .map(|(g, p)| TrGapRow {
            lo: g.lo,
            hi: g.hi,
            gt_n: g.n,
            gt_mean: g.mean_tr,
            pred_n: p.n,
            pred_mean: p.mean_tr,
            abs_gap: g.mean_tr.zip(p.mean_tr).map(|(a, b)| (a - b).abs()),
        })
        .collect();
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.abs_gap).collect();
    let mean_abs_gap = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
    Ok(TrComparison {
        bin_width_deg,
        rows,
        mean_abs_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(tr: f64, deg: f64) -> TrSample {
        TrSample {
            source: SampleSource::GroundTruth,
            class_id: 0,
            tr,
            orientation_deg: deg,
        }
    }

    #[test]
    fn tr_fixtures() {
        let c = Point2::new(100.0, 100.0);
        assert_eq!(tightness_ratio(&QuadOBB::rotated_rect(c, 30.0, 10.0, 0.0).unwrap()).unwrap(), 1.0);
        let sq = QuadOBB::rotated_rect(c, 1.0, 1.0, 45.0).unwrap();
        assert_relative_eq!(tightness_ratio(&sq).unwrap(), 0.5, max_relative = 1e-12);
        let r = QuadOBB::rotated_rect(c, 2.0, 1.0, 45.0).unwrap();
        assert_relative_eq!(tightness_ratio(&r).unwrap(), 4.0 / 9.0, max_relative = 1e-12);
        let flat = QuadOBB::normalize([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)].map(Point2::from)).unwrap();
        assert!(tightness_ratio(&flat).is_err());
    }

    #[test]
    fn closed_form_fixtures() {
        assert_eq!(tr_rect_closed_form(3.0, 1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(tr_rect_closed_form(2.0, 2.0, 45.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(tr_rect_closed_form(2.0, 1.0, 45.0).unwrap(), 4.0 / 9.0, max_relative = 1e-15);
        assert!(tr_rect_closed_form(0.0, 1.0, 10.0).is_err());
        assert!(tr_rect_closed_form(1.0, 1.0, 91.0).is_err());
    }

    #[test]
    fn closed_form_minimum_at_45() {
        for (w, h) in [(1.0, 1.0), (5.0, 1.0), (1.0, 7.5), (30.0, 12.0)] {
            let at45 = tr_rect_closed_form(w, h, 45.0).unwrap();
            for i in 0..=900 {
                let t = i as f64 / 10.0;
                assert!(tr_rect_closed_form(w, h, t).unwrap() >= at45 - 1e-15, "w={w} h={h} t={t}");
            }
        }
    }

    #[test]
    fn binning_fixtures() {
        let flat: Vec<_> = (0..5).map(|_| sample(1.0, 0.0)).collect();
        let bins = bin_by_orientation(&flat, 15.0).unwrap();
        assert_eq!(bins.len(), 6);
        assert_eq!((bins[0].n, bins[0].mean_tr), (5, Some(1.0)));
        assert!(bins[1..].iter().all(|b| b.n == 0 && b.mean_tr.is_none()));

        let two = bin_by_orientation(&[sample(0.4, 20.0), sample(0.6, 25.0)], 15.0).unwrap();
        assert_relative_eq!(two[1].mean_tr.unwrap(), 0.5, max_relative = 1e-12);
        let want = 1.96 * 0.02f64.sqrt() / 2f64.sqrt();
        assert_relative_eq!(two[1].ci95_half_width.unwrap(), want, max_relative = 1e-12);
        assert!((two[1].ci95_half_width.unwrap() - 0.196).abs() < 1e-3);

        assert!(matches!(bin_by_orientation(&flat, 7.0), Err(TightnessError::BinWidth(_))));
        assert_eq!(bin_by_orientation(&flat, 5.0).unwrap().len(), 18);
        let edge = bin_by_orientation(&[sample(0.9, 90.0)], 15.0).unwrap();
        assert_eq!(edge[5].n, 1);
        assert!(edge[5].ci95_half_width.is_none());
    }

    #[test]
    fn comparison_fixtures() {
        let gt = [sample(0.9, 5.0), sample(0.5, 44.0), sample(0.7, 70.0)];
        let same = compare_gt_pred_tr(&gt, &gt, 15.0).unwrap();
        assert!(same.rows.iter().filter_map(|r| r.abs_gap).all(|g| g == 0.0));
        assert_eq!(same.mean_abs_gap, Some(0.0));

        let shifted: Vec<_> = gt.iter().map(|s| TrSample { tr: s.tr + 0.05, ..*s }).collect();
        let c = compare_gt_pred_tr(&gt, &shifted, 15.0).unwrap();
        for g in c.rows.iter().filter_map(|r| r.abs_gap) {
            assert_relative_eq!(g, 0.05, max_relative = 1e-9);
        }

        let pred = [sample(0.8, 20.0)];
        let d = compare_gt_pred_tr(&gt, &pred, 15.0).unwrap();
        assert!(d.rows.iter().all(|r| r.abs_gap.is_none()));
        assert_eq!(d.mean_abs_gap, None);
    }

    proptest! {
        #[test]
        fn tr_bounds_and_scale(w in 0.5..200.0f64, h in 0.5..200.0f64, t in 0.0..180.0f64, k in 0.01..100.0f64) {
            let c = Point2::new(500.0, 300.0);
            let q = QuadOBB::rotated_rect(c, w, h, t).unwrap();
            let tr = tightness_ratio(&q).unwrap();
            prop_assert!(tr > 0.0 && tr <= 1.0);
            let scaled = QuadOBB::normalize(q.points().map(|p| Point2::new(p.x * k, p.y * k))).unwrap();
            prop_assert!((tightness_ratio(&scaled).unwrap() - tr).abs() <= 1e-12 * tr);
        }

        #[test]
        fn tr_equals_one_only_when_axis_aligned(w in 1.0..100.0f64, h in 1.0..100.0f64, t in 1e-3..89.999f64) {
            let q = QuadOBB::rotated_rect(Point2::new(0.0, 0.0), w, h, t).unwrap();
            prop_assert!(tightness_ratio(&q).unwrap() < 1.0);
        }
    }
}
