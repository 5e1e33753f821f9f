//! Level and time ladders `C_k`, `T_k` and the source integrability exponents.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    ScalarBounded,
    ScalarLayer,
    SystemBounded,
    SystemLayer,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] =
        [ScheduleKind::ScalarBounded, ScheduleKind::ScalarLayer, ScheduleKind::SystemBounded, ScheduleKind::SystemLayer];

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::ScalarBounded => "scalar_bounded",
            ScheduleKind::ScalarLayer => "scalar_layer",
            ScheduleKind::SystemBounded => "system_bounded",
            ScheduleKind::SystemLayer => "system_layer",
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, ScheduleKind::ScalarBounded | ScheduleKind::ScalarLayer)
    }

    pub fn is_layer(&self) -> bool {
        matches!(self, ScheduleKind::ScalarLayer | ScheduleKind::SystemLayer)
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown schedule kind `{s}`")))
    }
}

/// `C_k = K(1 − 2^{−k})` for scalar kinds and `C_k = K 2^k` for system
/// kinds; `T_k = 0` for bounded kinds and `T_k = t₀(1 − η^k)` for layer kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSchedule {
    pub kind: ScheduleKind,
    pub k_level: f64,
    pub t0: f64,
    pub eta: f64,
    pub kmax: usize,
}

impl LevelSchedule {
    pub fn new(kind: ScheduleKind, k_level: f64, t0: f64, eta: f64, kmax: usize) -> Result<Self> {
        if !(k_level > 0.0 && k_level.is_finite()) {
            return Err(Error::InvalidParameter(format!("level K = {k_level} must be positive")));
        }
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::InvalidParameter(format!("t0 = {t0} must be nonnegative")));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParameter(format!("eta = {eta} must lie in (0, 1)")));
        }
        if kmax == 0 {
            return Err(Error::InvalidParameter("kmax must be at least 1".into()));
        }
        Ok(Self { kind, k_level, t0, eta, kmax })
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k > self.kmax {
            return Err(Error::LevelOutOfRange { k, kmax: self.kmax });
        }
        Ok(())
    }

    pub fn c(&self, k: usize) -> Result<f64> {
        self.check_k(k)?;
        Ok(if self.kind.is_scalar() {
            self.k_level * (1.0 - 0.5f64.powi(k as i32))
        } else {
            self.k_level * 2f64.powi(k as i32)
        })
    }

    pub fn t(&self, k: usize) -> Result<f64> {
        self.check_k(k)?;
        Ok(if self.kind.is_layer() { self.t0 * (1.0 - self.eta.powi(k as i32)) } else { 0.0 })
    }

    /// `sup_k T_k`: `t₀` for layer kinds, `0` otherwise.
    pub fn t_limit(&self) -> f64 {
        if self.kind.is_layer() {
            self.t0
        } else {
            0.0
        }
    }
}

/// Integrability exponents of the sources: `ρ^α F` and `ρ^{1+α}|G|²/µ` in
/// `L^p(L^q)`, density in `L^∞(L^r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceExponents {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl SourceExponents {
    /// Every violated condition, named by the inequality it breaks.
    pub fn violations(&self, layer: bool) -> Vec<String> {
        let mut out = Vec::new();
        let (a, p, q, r) = (self.alpha, self.p, self.q, self.r);
        if !(a > 0.0 && a < 1.0) {
            out.push(format!("0 < alpha < 1 fails at alpha = {a}"));
        }
        if !(p >= 1.0 && q >= 1.0) {
            out.push(format!("p, q >= 1 fails at p = {p}, q = {q}"));
        }
        if a > 0.0 && a < 1.0 && !(p > 1.0 / (1.0 - a)) {
            out.push(format!("p > 1/(1-alpha) fails: p = {p}, needs p > {}", 1.0 / (1.0 - a)));
        }
        if !(2.0 / p + 3.0 / q < 2.0) {
            out.push(format!("2/p + 3/q < 2 fails: 2/p + 3/q = {}", 2.0 / p + 3.0 / q));
        }
        if layer && !(r > 1.5) {
            out.push(format!("r > 3/2 fails at r = {r}"));
        }
        out
    }

    pub fn new(alpha: f64, p: f64, q: f64, r: f64, layer: bool) -> Result<Self> {
        let s = Self { alpha, p, q, r };
        let v = s.violations(layer);
        if v.is_empty() {
            Ok(s)
        } else {
            Err(Error::InvalidParameter(v.join("; ")))
        }
    }

    /// Superlinearity exponent produced by the source estimates:
    /// `β = min(2 − α − 1/p, 1 + 2α − 3/q)`.
    pub fn beta(&self) -> f64 {
        (2.0 - self.alpha - 1.0 / self.p).min(1.0 + 2.0 * self.alpha - 3.0 / self.q)
    }

    /// `(β₁, β₂, γ) = ((1+β)/2, β, 2β − 1)`.
    pub fn recursion_exponents(&self) -> (f64, f64, f64) {
        let b = self.beta();
        (0.5 * (1.0 + b), b, 2.0 * b - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladders() {
        let s = LevelSchedule::new(ScheduleKind::ScalarBounded, 4.0, 0.0, 0.5, 10).unwrap();
        assert_eq!(s.c(0).unwrap(), 0.0);
        assert_eq!(s.c(1).unwrap(), 2.0);
        assert_eq!(s.c(3).unwrap(), 3.5);
        assert_eq!(s.t(5).unwrap(), 0.0);
        assert!(matches!(s.c(11), Err(Error::LevelOutOfRange { .. })));

        let s = LevelSchedule::new(ScheduleKind::SystemLayer, 1.5, 0.2, 0.5, 8).unwrap();
        assert_eq!(s.c(0).unwrap(), 1.5);
        assert_eq!(s.c(3).unwrap(), 12.0);
        for k in 1..=8 {
            let dt = s.t(k).unwrap() - s.t(k - 1).unwrap();
            let expected = 0.2 * 0.5f64.powi(k as i32 - 1) * 0.5;
            assert!((dt - expected).abs() < 1e-15);
            assert!(dt > 0.0);
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(LevelSchedule::new(ScheduleKind::ScalarBounded, 0.0, 0.0, 0.5, 4).is_err());
        assert!(LevelSchedule::new(ScheduleKind::ScalarLayer, 1.0, 0.1, 1.0, 4).is_err());
        assert!(LevelSchedule::new(ScheduleKind::ScalarLayer, 1.0, 0.1, 0.5, 0).is_err());
        assert_eq!("system_layer".parse::<ScheduleKind>().unwrap(), ScheduleKind::SystemLayer);
        assert!("nope".parse::<ScheduleKind>().is_err());
    }

    #[test]
    fn exponent_conditions() {
        let v = SourceExponents { alpha: 0.5, p: 1.0, q: 10.0, r: 2.0 }.violations(false);
        assert!(v.iter().any(|m| m.contains("p > 1/(1-alpha)")));
        assert!(SourceExponents::new(0.5, 4.0, 8.0, 1.2, true).is_err());
        let e = SourceExponents::new(0.5, 4.0, 8.0, 1.2, false).unwrap();
        assert!((e.beta() - (1.25f64).min(2.0 - 3.0 / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn model_exponents() {
        let e = SourceExponents { alpha: 1.0 / 3.0, p: f64::INFINITY, q: f64::INFINITY, r: 2.0 };
        let (b1, b2, g) = e.recursion_exponents();
        assert!((b2 - 5.0 / 3.0).abs() < 1e-15);
        assert!((b1 - 4.0 / 3.0).abs() < 1e-15);
        assert!((g - 7.0 / 3.0).abs() < 1e-15);
    }
}
