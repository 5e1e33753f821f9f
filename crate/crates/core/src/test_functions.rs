//! Convex test functions for the entropy-type energy inequalities, with
//! automatic admissibility checks.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex `φ ∈ W^{2,∞}` with its first two derivatives.
#[derive(Clone)]
pub struct ConvexTestFunction {
    label: String,
    value: RealFn,
    d1: RealFn,
    d2: RealFn,
}

impl fmt::Debug for ConvexTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexTestFunction").field("label", &self.label).finish()
    }
}

/// Sample points used by the admissibility checks: a uniform grid on
/// `[-10, 10]` plus a geometric ladder reaching `±10³`.
fn sample_points() -> Vec<f64> {
    let mut ys: Vec<f64> = (0..=4000).map(|i| -10.0 + i as f64 * 0.005).collect();
    let mut y = 1e-6;
    while y <= 1e3 {
        ys.push(y);
        ys.push(-y);
        y *= 1.1;
    }
    ys
}

impl ConvexTestFunction {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), value: Arc::new(value), d1: Arc::new(d1), d2: Arc::new(d2) }
    }

    /// `φ(y) = y`.
    pub fn linear() -> Self {
        Self::new("y", |y| y, |_| 1.0, |_| 0.0)
    }

    /// `φ(y) = y²`.
    pub fn square() -> Self {
        Self::new("y^2", |y| y * y, |y| 2.0 * y, |_| 2.0)
    }

    /// `φ(y) = ½(y − C)²₊`, the level-set truncation.
    pub fn upper_truncation(c: f64) -> Self {
        Self::new(
            format!("half_pos_sq(y-{c})"),
            move |y| 0.5 * (y - c).max(0.0).powi(2),
            move |y| (y - c).max(0.0),
            move |y| if y >= c { 1.0 } else { 0.0 },
        )
    }

    /// `φ(y) = ½(−y − C)²₊`.
    pub fn lower_truncation(c: f64) -> Self {
        Self::new(
            format!("half_pos_sq(-y-{c})"),
            move |y| 0.5 * (-y - c).max(0.0).powi(2),
            move |y| -(-y - c).max(0.0),
            move |y| if -y >= c { 1.0 } else { 0.0 },
        )
    }

    /// `φ(y) = √(y² + δ²)`.
    pub fn smoothed_abs(delta: f64) -> Self {
        Self::new(
            format!("smooth_abs({delta})"),
            move |y| (y * y + delta * delta).sqrt(),
            move |y| y / (y * y + delta * delta).sqrt(),
            move |y| delta * delta / (y * y + delta * delta).powf(1.5),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        (self.value)(y)
    }

    #[inline]
    pub fn d1(&self, y: f64) -> f64 {
        (self.d1)(y)
    }

    #[inline]
    pub fn d2(&self, y: f64) -> f64 {
        (self.d2)(y)
    }

    /// `φ′(y)/y` for `y ≥ 0`, with the limit `φ″(0⁺)` at the origin.
    #[inline]
    pub fn ratio(&self, y: f64) -> f64 {
        if y < 1e-30 {
            self.d2(1e-30)
        } else {
            self.d1(y) / y
        }
    }

    fn reject(&self, reason: String) -> Error {
        Error::InadmissibleTestFunction { label: self.label.clone(), reason }
    }

    /// Convexity (`φ″ ≥ 0` on samples) and quadratic growth
    /// (`φ(y)/y² ≤ 1` at `y = 10³, 10⁶`).
    pub fn check_scalar(&self) -> Result<()> {
        for y in sample_points() {
            let d2 = self.d2(y);
            if !(d2 >= 0.0) {
                return Err(self.reject(format!("second derivative {d2} < 0 at y = {y}")));
            }
        }
        for y in [1e3, 1e6] {
            for s in [y, -y] {
                let growth = self.value(s) / (s * s);
                if !(growth <= 1.0 + 1e-12) {
                    return Err(self.reject(format!("phi(y)/y^2 = {growth} > 1 at y = {s}")));
                }
            }
        }
        Ok(())
    }

    /// Scalar admissibility plus `φ″(y) − φ′(y)/y ≥ 0` for `y > 0` and
    /// `φ′(0) = 0`, as required when `φ` is applied to `|u|`.
    pub fn check_system(&self) -> Result<()> {
        self.check_scalar()?;
        let d1_0 = self.d1(0.0);
        if d1_0 != 0.0 {
            return Err(self.reject(format!("phi'(0) = {d1_0} is not 0")));
        }
        for y in sample_points().into_iter().filter(|&y| y > 0.0) {
            let (d2, r) = (self.d2(y), self.d1(y) / y);
            if !(d2 - r >= -1e-12 * (d2.abs() + r.abs())) {
                return Err(self.reject(format!("phi'' - phi'/y = {} < 0 at y = {y}", d2 - r)));
            }
        }
        Ok(())
    }
}

/// Geometric ladder `scale · 2^{−j}`, `j = 0..4`.
fn ladder(scale: f64) -> Vec<f64> {
    let s = if scale > 0.0 { scale } else { 1.0 };
    (0..4).map(|j| s * 0.5f64.powi(j)).collect()
}

/// Test functions for the scalar inequality, with truncation levels scaled by
/// `scale` (typically `sup|θ₀|`).
pub fn scalar_battery(scale: f64) -> Vec<ConvexTestFunction> {
    let mut out = vec![ConvexTestFunction::linear(), ConvexTestFunction::square()];
    for c in ladder(scale) {
        out.push(ConvexTestFunction::upper_truncation(c));
        out.push(ConvexTestFunction::lower_truncation(c));
    }
    out.push(ConvexTestFunction::smoothed_abs(0.1 * if scale > 0.0 { scale } else { 1.0 }));
    out
}

/// Test functions for the system inequality, applied to `|u|`.
pub fn system_battery(scale: f64) -> Vec<ConvexTestFunction> {
    let mut out = vec![ConvexTestFunction::square(), ConvexTestFunction::upper_truncation(0.0)];
    for c in ladder(scale) {
        out.push(ConvexTestFunction::upper_truncation(c));
    }
    out
}
