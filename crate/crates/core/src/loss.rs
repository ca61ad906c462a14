//! Classification losses for dense detection heads: soft-target BCE, focal
//! loss and varifocal loss, the anchor-averaged classification term and the
//! weighted total objective. All losses are in nats.
//!
//! Varifocal loss weights the soft-target BCE by `α·p^γ` for negatives and by
//! the quality target `q` for positives:
//!
//! ```text
//! VFL(p, y, q) = (α·p^γ·(1 − y) + q·y) · BCE(p, q)
//! BCE(p, q)    = −q·ln p − (1 − q)·ln(1 − p)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::CompensatedSum;

/// Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` before any log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("negative sample (y = 0) must have q = 0, got q = {0}")]
    NegativeWithQuality(f64),
    #[error("quality target {0} outside [0, 1]")]
    QualityOutOfRange(f64),
    #[error("probability {0} is not finite")]
    NonFinite(f64),
    #[error("invalid loss parameter: {0}")]
    Param(String),
    #[error("empty anchor set")]
    NoAnchors,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("negative loss component {name} = {value}")]
    NegativeComponent { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub gamma: f64,
    pub alpha: f64,
    pub lambda_box: f64,
    pub lambda_cls: f64,
    pub lambda_dfl: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.75,
            lambda_box: 1.0,
            lambda_cls: 1.0,
            lambda_dfl: 1.0,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(LossError::Param(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(LossError::Param(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        for (name, v) in [
            ("lambda_box", self.lambda_box),
            ("lambda_cls", self.lambda_cls),
            ("lambda_dfl", self.lambda_dfl),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(LossError::Param(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn check_inputs(p: f64, q: f64) -> Result<(), LossError> {
    if !p.is_finite() {
        return Err(LossError::NonFinite(p));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(LossError::QualityOutOfRange(q));
    }
    Ok(())
}

/// Binary cross-entropy against a soft target.
pub fn bce_soft(p: f64, q: f64) -> f64 {
    let p = clamp_prob(p);
    -q * p.ln() - (1.0 - q) * (1.0 - p).ln()
}

/// Focal loss on a one-hot target: `−(1 − p_t)^γ · ln p_t`.
pub fn focal_loss(p: f64, y: bool, gamma: f64) -> f64 {
    let p = clamp_prob(p);
    let pt = if y { p } else { 1.0 - p };
    -(1.0 - pt).powf(gamma) * pt.ln()
}

/// Focal loss scaled by an optional weight `α`; `α = 1` is [`focal_loss`].
pub fn focal_loss_weighted(p: f64, y: bool, gamma: f64, alpha: f64) -> f64 {
    alpha * focal_loss(p, y, gamma)
}

fn vfl_weight(p: f64, y: bool, q: f64, params: &LossParams) -> f64 {
    if y {
        q
    } else {
        params.alpha * p.powf(params.gamma)
    }
}

/// Varifocal loss of one anchor-class entry.
pub fn vfl(p: f64, y: bool, q: f64, params: &LossParams) -> Result<f64, LossError> {
    check_inputs(p, q)?;
    if !y && q != 0.0 {
        return Err(LossError::NegativeWithQuality(q));
    }
    let pc = clamp_prob(p);
    Ok(vfl_weight(pc, y, q, params) * bce_soft(pc, q))
}

/// Analytic `d VFL / d p`. Zero where the probability clamp is active.
///
/// Positives: `q·(−q/p + (1 − q)/(1 − p))`. Negatives (q = 0):
/// `α·(γ·p^(γ−1)·(−ln(1 − p)) + p^γ/(1 − p))`.
pub fn vfl_grad(p: f64, y: bool, q: f64, params: &LossParams) -> Result<f64, LossError> {
    check_inputs(p, q)?;
    if !y && q != 0.0 {
        return Err(LossError::NegativeWithQuality(q));
    }
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
        return Ok(0.0);
    }
    if y {
        return Ok(q * (-q / p + (1.0 - q) / (1.0 - p)));
    }
    let g = params.gamma;
    let bce = -(1.0 - p).ln();
    let weight_grad = if g == 0.0 { 0.0 } else { g * p.powf(g - 1.0) };
    Ok(params.alpha * (weight_grad * bce + p.powf(g) / (1.0 - p)))
}

/// Row-major `anchors x classes` matrices of probabilities, binary labels and
/// quality targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorTargets {
    pub anchors: usize,
    pub classes: usize,
    pub p: Vec<f64>,
    pub y: Vec<bool>,
    pub q: Vec<f64>,
}

impl AnchorTargets {
    pub fn new(anchors: usize, classes: usize, p: Vec<f64>, y: Vec<bool>, q: Vec<f64>) -> Result<Self, LossError> {
        let n = anchors * classes;
        if p.len() != n || y.len() != n || q.len() != n {
            return Err(LossError::Shape(format!(
                "expected {n} entries, got p={}, y={}, q={}",
                p.len(),
                y.len(),
                q.len()
            )));
        }
        Ok(Self { anchors, classes, p, y, q })
    }
}

/// Classification term: mean over anchors of the per-anchor VFL class sum.
pub fn cls_loss(targets: &AnchorTargets, params: &LossParams) -> Result<f64, LossError> {
    params.validate()?;
    if targets.anchors == 0 || targets.classes == 0 {
        return Err(LossError::NoAnchors);
    }
    let n = targets.anchors * targets.classes;
    if targets.p.len() != n || targets.y.len() != n || targets.q.len() != n {
        return Err(LossError::Shape(format!("expected {n} entries")));
    }
    let mut total = CompensatedSum::default();
    for i in 0..n {
        total.add(vfl(targets.p[i], targets.y[i], targets.q[i], params)?);
    }
    Ok(total.value() / targets.anchors as f64)
}

/// `λ_box·L_box + λ_cls·L_cls + λ_dfl·L_dfl`.
pub fn total_loss(l_box: f64, l_cls: f64, l_dfl: f64, params: &LossParams) -> Result<f64, LossError> {
    params.validate()?;
    for (name, value) in [("l_box", l_box), ("l_cls", l_cls), ("l_dfl", l_dfl)] {
        if !(value >= 0.0) {
            return Err(LossError::NegativeComponent { name, value });
        }
    }
    Ok(params.lambda_box * l_box + params.lambda_cls * l_cls + params.lambda_dfl * l_dfl)
}

/// Outcome of one named check in [`run_loss_fixtures`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureOutcome {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCheckReport {
    pub params: Option<LossParams>,
    pub outcomes: Vec<FixtureOutcome>,
    pub gradient_max_rel_err: f64,
}

impl LossCheckReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FixtureOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

/// Central finite difference of `vfl` in `p`.
pub fn vfl_grad_fd(p: f64, y: bool, q: f64, params: &LossParams, h: f64) -> Result<f64, LossError> {
    Ok((vfl(p + h, y, q, params)? - vfl(p - h, y, q, params)?) / (2.0 * h))
}

/// Relative error with an absolute floor for gradients that vanish.
pub fn grad_rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-6 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub const GRAD_GRID_P: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const GRAD_GRID_Q: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const GRAD_FD_STEP: f64 = 1e-6;
pub const GRAD_REL_TOL: f64 = 1e-6;

/// Run the frozen substitution fixtures and the gradient grid with `params`.
///
/// Fixture expectations assume γ = 2, α = 0.75; running with other values is
/// a negative control and is expected to fail the weight-dependent cases.
pub fn run_loss_fixtures(params: &LossParams) -> Result<LossCheckReport, LossError> {
    params.validate()?;
    let mut report = LossCheckReport {
        params: Some(*params),
        ..Default::default()
    };
    let mut check = |name: &str, expected: f64, actual: f64, tolerance: f64| {
        report.outcomes.push(FixtureOutcome {
            name: name.to_string(),
            expected,
            actual,
            tolerance,
            passed: (expected - actual).abs() <= tolerance,
        });
    };
    let ln2 = std::f64::consts::LN_2;
    // frozen values, computed independently in double precision
    check("bce_soft(0.5, 0.5)", 0.6931471805599453, bce_soft(0.5, 0.5), 1e-4);
    check("bce_soft(1-, 1)", 0.0, bce_soft(1.0, 1.0), 1e-6);
    check("bce_soft(0.5, 0)", 0.6931471805599453, bce_soft(0.5, 0.0), 1e-4);
    check("focal(γ=0, y=1, p=0.5)", 0.6931471805599453, focal_loss(0.5, true, 0.0), 1e-4);
    check("focal(γ=2, y=1, p=0.9)", 0.0010536051565782623, focal_loss(0.9, true, 2.0), 1e-4);
    check("focal(y=1, p=1-)", 0.0, focal_loss(1.0, true, params.gamma), 1e-6);
    check("vfl(y=0, p=0.5)", 0.12996509635498974, vfl(0.5, false, 0.0, params)?, 1e-4);
    check("vfl(y=1, q=0.8, p=0.8)", 0.40032172742830355, vfl(0.8, true, 0.8, params)?, 1e-4);
    check("vfl(y=1, q=1, p=1-)", 0.0, vfl(1.0, true, 1.0, params)?, 1e-6);
    let single = AnchorTargets::new(1, 1, vec![0.5], vec![false], vec![0.0])?;
    check("cls_loss(one negative, p=0.5)", 0.12996509635498974, cls_loss(&single, params)?, 1e-4);
    check(
        "total_loss(1, 2, 3) with unit weights",
        6.0,
        total_loss(1.0, 2.0, 3.0, &LossParams { lambda_box: 1.0, lambda_cls: 1.0, lambda_dfl: 1.0, ..*params })?,
        1e-12,
    );
    check("vfl_grad(y=1, q=1, p=0.5)", -2.0, vfl_grad(0.5, true, 1.0, params)?, 1e-9);

    // reductions
    for p in GRAD_GRID_P {
        for y in [false, true] {
            let q = if y { 1.0 } else { 0.0 };
            check(&format!("focal γ=0 == bce (p={p}, y={})", y as u8), bce_soft(p, q), focal_loss(p, y, 0.0), 1e-12);
        }
        check(&format!("vfl(y=1, q=1) == -ln p (p={p})"), -p.ln(), vfl(p, true, 1.0, params)?, 1e-12);
    }
    check("ln 2 reference", ln2, bce_soft(0.5, 0.5), 1e-12);

    // gradient grid
    let mut worst = 0.0f64;
    for p in GRAD_GRID_P {
        for y in [false, true] {
            for q in GRAD_GRID_Q {
                let q = if y { q } else { 0.0 };
                let a = vfl_grad(p, y, q, params)?;
                let n = vfl_grad_fd(p, y, q, params, GRAD_FD_STEP)?;
                worst = worst.max(grad_rel_err(a, n));
            }
        }
    }
    report.gradient_max_rel_err = worst;
    report.outcomes.push(FixtureOutcome {
        name: "gradient grid max relative error".into(),
        expected: 0.0,
        actual: worst,
        tolerance: GRAD_REL_TOL,
        passed: worst < GRAD_REL_TOL,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn bce_fixtures() {
        assert_relative_eq!(bce_soft(0.5, 0.5), LN2, max_relative = 1e-15);
        assert!(bce_soft(1.0, 1.0) < 1e-6);
        assert_relative_eq!(bce_soft(0.5, 0.0), LN2, max_relative = 1e-15);
        assert!(bce_soft(0.0, 1.0).is_finite());
    }

    #[test]
    fn focal_fixtures() {
        assert_relative_eq!(focal_loss(0.5, true, 0.0), LN2, max_relative = 1e-15);
        assert!((focal_loss(0.9, true, 2.0) - 0.001054).abs() < 1e-6);
        assert!(focal_loss(1.0, true, 2.0) < 1e-12);
        assert_eq!(focal_loss_weighted(0.3, false, 2.0, 1.0), focal_loss(0.3, false, 2.0));
        assert_relative_eq!(focal_loss_weighted(0.3, true, 2.0, 0.25), 0.25 * focal_loss(0.3, true, 2.0));
    }

    #[test]
    fn vfl_fixtures() {
        let d = LossParams::default();
        assert!(vfl(1.0, true, 1.0, &d).unwrap() < 1e-6);
        assert!((vfl(0.5, false, 0.0, &d).unwrap() - 0.1300).abs() < 1e-4);
        assert!((vfl(0.8, true, 0.8, &d).unwrap() - 0.4003).abs() < 1e-4);
        assert_eq!(vfl(0.5, false, 0.3, &d), Err(LossError::NegativeWithQuality(0.3)));
        assert_eq!(vfl(0.5, true, 1.3, &d), Err(LossError::QualityOutOfRange(1.3)));
        assert!(vfl(f64::NAN, true, 1.0, &d).is_err());
    }

    #[test]
    fn cls_loss_fixtures() {
        let d = LossParams::default();
        let one = AnchorTargets::new(1, 1, vec![0.5], vec![false], vec![0.0]).unwrap();
        assert!((cls_loss(&one, &d).unwrap() - 0.1300).abs() < 1e-4);
        let two = AnchorTargets::new(2, 1, vec![0.5, 0.5], vec![false, false], vec![0.0, 0.0]).unwrap();
        assert_eq!(cls_loss(&two, &d).unwrap(), cls_loss(&one, &d).unwrap());

        // positives with p == q: per-anchor sums are q·BCE(q, q)
        let ps = vec![0.3, 0.6, 0.9, 0.8];
        let t = AnchorTargets::new(2, 2, ps.clone(), vec![true; 4], ps.clone()).unwrap();
        let want = (ps.iter().map(|p| p * bce_soft(*p, *p)).sum::<f64>()) / 2.0;
        assert_relative_eq!(cls_loss(&t, &d).unwrap(), want, max_relative = 1e-12);

        assert_eq!(cls_loss(&AnchorTargets::new(0, 3, vec![], vec![], vec![]).unwrap(), &d), Err(LossError::NoAnchors));
        assert!(AnchorTargets::new(2, 2, vec![0.5], vec![true], vec![0.5]).is_err());
    }

    #[test]
    fn total_loss_fixtures() {
        let d = LossParams::default();
        assert_eq!(total_loss(1.0, 2.0, 3.0, &d).unwrap(), 6.0);
        let no_cls = LossParams { lambda_cls: 0.0, ..d };
        assert_eq!(total_loss(1.0, 100.0, 3.0, &no_cls).unwrap(), total_loss(1.0, 0.0, 3.0, &no_cls).unwrap());
        assert_eq!(total_loss(0.0, 0.0, 0.0, &d).unwrap(), 0.0);
        assert!(matches!(total_loss(-1.0, 0.0, 0.0, &d), Err(LossError::NegativeComponent { name: "l_box", .. })));
    }

    #[test]
    fn gradient_fixtures() {
        let d = LossParams::default();
        assert_eq!(vfl_grad(0.5, true, 1.0, &d).unwrap(), -2.0);
        let tiny = vfl_grad(1e-5, false, 0.0, &d).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-9);
        assert_eq!(vfl_grad(0.0, false, 0.0, &d).unwrap(), 0.0);
        let g0 = LossParams { gamma: 0.0, ..d };
        let a = vfl_grad(0.3, false, 0.0, &g0).unwrap();
        assert_relative_eq!(a, 0.75 / 0.7, max_relative = 1e-12);
    }

    #[test]
    fn gradient_grid_matches_finite_differences() {
        for gamma in [0.0, 1.0, 2.0, 3.5] {
            let params = LossParams { gamma, ..Default::default() };
            for p in GRAD_GRID_P {
                for y in [false, true] {
                    for q in GRAD_GRID_Q {
                        let q = if y { q } else { 0.0 };
                        let a = vfl_grad(p, y, q, &params).unwrap();
                        let n = vfl_grad_fd(p, y, q, &params, GRAD_FD_STEP).unwrap();
                        assert!(grad_rel_err(a, n) < GRAD_REL_TOL, "p={p} y={y} q={q} γ={gamma}: {a} vs {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn fixture_suite_passes_with_defaults() {
        let r = run_loss_fixtures(&LossParams::default()).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn fixture_suite_catches_wrong_alpha() {
        let r = run_loss_fixtures(&LossParams { alpha: 0.5, ..Default::default() }).unwrap();
        let failed: Vec<_> = r.failures().map(|o| o.name.as_str()).collect();
        assert!(failed.contains(&"vfl(y=0, p=0.5)"), "{failed:?}");
    }

    proptest! {
        #[test]
        fn losses_non_negative(p in 0.0..=1.0f64, q in 0.0..=1.0f64, y in any::<bool>(), gamma in 0.0..5.0f64) {
            let params = LossParams { gamma, ..Default::default() };
            prop_assert!(bce_soft(p, q) >= -1e-15);
            prop_assert!(focal_loss(p, y, gamma) >= 0.0);
            let q = if y { q } else { 0.0 };
            prop_assert!(vfl(p, y, q, &params).unwrap() >= 0.0);
        }

        #[test]
        fn bce_minimized_at_target(q in 0.01..0.99f64, d in 0.001..0.2f64) {
            let at = bce_soft(q, q);
            prop_assert!(bce_soft((q + d).min(1.0), q) >= at);
            prop_assert!(bce_soft((q - d).max(0.0), q) >= at);
        }

        #[test]
        fn negatives_increase_with_p(a in 0.001..0.998f64, d in 1e-4..0.5f64) {
            let params = LossParams::default();
            let b = (a + d).min(0.999);
            prop_assume!(b > a);
            prop_assert!(vfl(b, false, 0.0, &params).unwrap() > vfl(a, false, 0.0, &params).unwrap());
        }

        #[test]
        fn positives_scale_with_quality(p in 0.01..0.99f64, q in 0.0..=1.0f64) {
            let params = LossParams::default();
            let v = vfl(p, true, q, &params).unwrap();
            prop_assert!((v - q * bce_soft(p, q)).abs() <= 1e-15 * v.max(1.0));
        }
    }

    #[test]
    fn negative_suppression_vanishes() {
        let params = LossParams::default();
        let ratio = |p: f64| vfl(p, false, 0.0, &params).unwrap() / bce_soft(p, 0.0);
        assert!(ratio(1e-3) < 1e-5);
        assert!(ratio(1e-5) < ratio(1e-3));
    }
}
