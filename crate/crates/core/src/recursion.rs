//! Abstract superlinear recursions behind the level-set iteration.
//!
//! Every computation uses the saturated recursion (inequality taken as
//! equality), which dominates any sequence satisfying the inequality.

use crate::error::{Error, Result};

/// Iterates below this count as zero for the scalar variant.
pub const CONVERGED_BELOW: f64 = 1e-30;
pub const DEFAULT_KMAX: usize = 200;
/// Relative bracket width at which the threshold bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-3;
/// Largest `K` tried when expanding a bracket.
pub const K_CEILING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `U_k = (A^k/K^s)(U_{k−1}^{β₁} + U_{k−1}^{β₂})`.
    Scalar,
    /// `U_k = (1/K^s)(U_{k−1}^{β₁} + U_{k−1}^{β₂}) + εκU_{k−1}`.
    System { eps: f64, kappa: f64, eps1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionParams {
    pub a: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Bound on `U₀`.
    pub c: f64,
    pub variant: Variant,
    pub k: f64,
    /// Power `s` of `K` in the denominator (1 unless folded from a model).
    pub k_power: f64,
    pub kmax: usize,
}

impl RecursionParams {
    pub fn scalar(a: f64, beta1: f64, beta2: f64, c: f64, k: f64) -> Result<Self> {
        Self { a, beta1, beta2, c, variant: Variant::Scalar, k, k_power: 1.0, kmax: DEFAULT_KMAX }.validated()
    }

    pub fn system(beta1: f64, beta2: f64, c: f64, eps: f64, kappa: f64, eps1: f64, k: f64) -> Result<Self> {
        Self {
            a: 1.0,
            beta1,
            beta2,
            c,
            variant: Variant::System { eps, kappa, eps1 },
            k,
            k_power: 1.0,
            kmax: DEFAULT_KMAX,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let mut bad = Vec::new();
        if !(self.a >= 1.0 && self.a.is_finite()) {
            bad.push(format!("A >= 1 fails at A = {}", self.a));
        }
        if !(1.0 < self.beta1 && self.beta1 < self.beta2 && self.beta2.is_finite()) {
            bad.push(format!("1 < beta1 < beta2 fails at beta1 = {}, beta2 = {}", self.beta1, self.beta2));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            bad.push(format!("C > 0 fails at C = {}", self.c));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            bad.push(format!("K > 0 fails at K = {}", self.k));
        }
        if !(self.k_power > 0.0) {
            bad.push(format!("K power must be positive, got {}", self.k_power));
        }
        if self.kmax == 0 {
            bad.push("kmax >= 1 fails".into());
        }
        if let Variant::System { eps, kappa, eps1 } = self.variant {
            if !(eps > 0.0 && eps < 1.0) {
                bad.push(format!("0 < eps < 1 fails at eps = {eps}"));
            }
            if !(kappa > 0.0 && kappa < 1.0) {
                bad.push(format!("0 < kappa < 1 fails at kappa = {kappa}"));
            }
            if !(eps1 > eps && eps1 < 1.0) {
                bad.push(format!("eps < eps1 < 1 fails at eps1 = {eps1}"));
            }
        }
        if bad.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(bad.join("; ")))
        }
    }

    pub fn with_k(self, k: f64) -> Self {
        Self { k, ..self }
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }

    pub fn with_kmax(self, kmax: usize) -> Self {
        Self { kmax, ..self }
    }

    /// One saturated step from `U_{k−1} = u` to level `k`.
    pub fn step(&self, k: usize, u: f64) -> f64 {
        let nonlinear = (u.powf(self.beta1) + u.powf(self.beta2)) / self.k.powf(self.k_power);
        match self.variant {
            Variant::Scalar => self.a.powi(k as i32) * nonlinear,
            Variant::System { eps, kappa, .. } => nonlinear + eps * kappa * u,
        }
    }

    /// `(C^{β₁−1} + C^{β₂−1})/K^s ≤ (ε₁ − ε)κ`, the smallness condition of
    /// the system variant. Always false for the scalar variant.
    pub fn system_condition(&self) -> bool {
        match self.variant {
            Variant::Scalar => false,
            Variant::System { eps, kappa, eps1 } => {
                (self.c.powf(self.beta1 - 1.0) + self.c.powf(self.beta2 - 1.0)) / self.k.powf(self.k_power)
                    <= (eps1 - eps) * kappa
            }
        }
    }

    /// Smallest `K` meeting [`Self::system_condition`].
    pub fn system_k_min(&self) -> Option<f64> {
        match self.variant {
            Variant::Scalar => None,
            Variant::System { eps, kappa, eps1 } => Some(
                ((self.c.powf(self.beta1 - 1.0) + self.c.powf(self.beta2 - 1.0)) / ((eps1 - eps) * kappa))
                    .powf(1.0 / self.k_power),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTrace {
    pub iterates: Vec<f64>,
    pub converged: bool,
    /// Overflowed to a non-finite value; the trace stops there.
    pub diverged: bool,
    /// `exp` of the least-squares slope of `ln U_k` against `k` over the
    /// positive iterates; 0 when fewer than two are positive.
    pub decay_rate: f64,
}

impl RecursionTrace {
    pub fn last(&self) -> f64 {
        *self.iterates.last().expect("trace holds U0")
    }
}

fn geometric_rate(iterates: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = iterates
        .iter()
        .enumerate()
        .filter(|(_, &u)| u > 0.0 && u.is_finite())
        .map(|(k, &u)| (k as f64, u.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    crate::degiorgi::slope(&pts).exp()
}

/// Iterates the saturated recursion from `U0` up to `kmax`.
pub fn iterate(params: &RecursionParams, u0: f64) -> Result<RecursionTrace> {
    if !(u0 >= 0.0 && u0 <= params.c) {
        return Err(Error::InvalidParameter(format!("0 <= U0 <= C fails: U0 = {u0}, C = {}", params.c)));
    }
    let mut iterates = Vec::with_capacity(params.kmax + 1);
    iterates.push(u0);
    let mut u = u0;
    let mut diverged = false;
    for k in 1..=params.kmax {
        u = params.step(k, u);
        if !u.is_finite() {
            diverged = true;
            break;
        }
        iterates.push(u);
    }
    let decay_rate = if diverged { f64::INFINITY } else { geometric_rate(&iterates) };
    let converged = !diverged
        && match params.variant {
            Variant::Scalar => iterates[params.kmax] < CONVERGED_BELOW,
            Variant::System { .. } => decay_rate < 1.0,
        };
    Ok(RecursionTrace { iterates, converged, diverged, decay_rate })
}

/// First `k` with `U_k > (ε₁κ)^k C`, if any (system variant only).
pub fn geometric_bound_violation(params: &RecursionParams, trace: &RecursionTrace) -> Option<usize> {
    let Variant::System { kappa, eps1, .. } = params.variant else {
        return None;
    };
    let q = eps1 * kappa;
    trace
        .iterates
        .iter()
        .enumerate()
        .find(|&(k, &u)| u > q.powi(k as i32) * params.c * (1.0 + 4.0 * f64::EPSILON))
        .map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSearch {
    pub k0: f64,
    /// Final bracket: diverged at `k_lo`, converged at `k_hi`.
    pub k_lo: f64,
    pub k_hi: f64,
    /// Every evaluated `K` with its outcome, sorted by `K`.
    pub evaluations: Vec<(f64, bool)>,
    /// No converged `K` lies below a diverged one among the evaluations.
    pub monotone: bool,
}

/// Bisects (geometrically) the converged/diverged boundary in `K`.
pub fn find_k0(params: &RecursionParams, u0: f64, bracket: (f64, f64)) -> Result<ThresholdSearch> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("bracket must satisfy 0 < K_lo < K_hi, got [{lo}, {hi}]")));
    }
    let mut evaluations = Vec::new();
    let mut converges = |k: f64| -> Result<bool> {
        let ok = iterate(&params.with_k(k), u0)?.converged;
        evaluations.push((k, ok));
        Ok(ok)
    };
    if converges(lo)? {
        let ev = evaluations.clone();
        return Ok(ThresholdSearch { k0: lo, k_lo: lo, k_hi: lo, evaluations: ev, monotone: true });
    }
    while !converges(hi)? {
        if hi >= K_CEILING {
            return Err(Error::InvalidParameter(format!("no convergence even at K = {hi:e}")));
        }
        lo = hi;
        hi = (hi * 10.0).min(K_CEILING);
    }
    while hi / lo - 1.0 > BISECTION_WIDTH {
        let mid = (lo * hi).sqrt();
        if converges(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    evaluations.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first_converged = evaluations.iter().position(|e| e.1).unwrap_or(evaluations.len());
    let monotone = evaluations[first_converged..].iter().all(|e| e.1);
    Ok(ThresholdSearch { k0: hi, k_lo: lo, k_hi: hi, evaluations, monotone })
}

fn check_wbar_args(a: f64, beta1: f64) -> Result<()> {
    if !(a >= 1.0) {
        return Err(Error::InvalidParameter(format!("A >= 1 fails at A = {a}")));
    }
    if !(beta1 > 1.0) {
        return Err(Error::InvalidParameter(format!("beta1 > 1 fails at beta1 = {beta1}")));
    }
    Ok(())
}

/// The smallness threshold `(2A)^{−1/(β₁−1)²}` for the auxiliary sequence
/// `W_k = (2A)^k W_{k−1}^{β₁}`.
pub fn wbar_threshold(a: f64, beta1: f64) -> Result<f64> {
    check_wbar_args(a, beta1)?;
    Ok((2.0 * a).powf(-1.0 / (beta1 - 1.0).powi(2)))
}

/// `(2A)^{−β₁/(β₁−1)²}`: the exact boundary below which `W_k → 0`.
pub fn wbar_threshold_sharp(a: f64, beta1: f64) -> Result<f64> {
    check_wbar_args(a, beta1)?;
    Ok((2.0 * a).powf(-beta1 / (beta1 - 1.0).powi(2)))
}

/// `W_0..W_kmax` of `W_k = (2A)^k W_{k−1}^{β₁}`, stopping at overflow.
pub fn w_sequence(a: f64, beta1: f64, w0: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![w0];
    let mut w = w0;
    for k in 1..=kmax {
        w = (2.0 * a).powi(k as i32) * w.powf(beta1);
        if !w.is_finite() {
            break;
        }
        out.push(w);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WCheck {
    /// Every `W_k` with `k ≥ 1` stayed below 1.
    pub stays_below_one: bool,
    /// `W_kmax < 10⁻³⁰`.
    pub tends_to_zero: bool,
}

pub fn w_check(a: f64, beta1: f64, w0: f64, kmax: usize) -> WCheck {
    let w = w_sequence(a, beta1, w0, kmax);
    let complete = w.len() == kmax + 1;
    WCheck {
        stays_below_one: complete && w[1..].iter().all(|&x| x < 1.0),
        tends_to_zero: complete && w[kmax] < CONVERGED_BELOW,
    }
}

/// Bisection over `W₀` of the boundary between `W_k → 0` and divergence.
pub fn w_divergence_boundary(a: f64, beta1: f64, kmax: usize) -> Result<f64> {
    check_wbar_args(a, beta1)?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while w_check(a, beta1, hi, kmax).tends_to_zero {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if w_check(a, beta1, mid, kmax).tends_to_zero {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `W̄_k = (2A)^{k/(β₁−1)}(2A)^{β₁/(β₁−1)²}W_k`, normalized so that
/// `W̄_{k+1} = W̄_k^{β₁}`.
pub fn wbar_sequence(a: f64, beta1: f64, w: &[f64]) -> Vec<f64> {
    let s = 2.0 * a;
    let b = beta1 / (beta1 - 1.0).powi(2);
    w.iter().enumerate().map(|(k, &x)| s.powf(k as f64 / (beta1 - 1.0) + b) * x).collect()
}

/// Largest relative defect of `W̄_{k+1} = W̄_k^{β₁}` along a sequence, with
/// `W̄` normalized by the exponent `b` (pass `β₁/(β₁−1)²` for the identity).
pub fn wbar_identity_defect(a: f64, beta1: f64, w0: f64, kmax: usize, b: f64) -> f64 {
    let s = 2.0 * a;
    let w = w_sequence(a, beta1, w0, kmax);
    let wbar: Vec<f64> = w.iter().enumerate().map(|(k, &x)| s.powf(k as f64 / (beta1 - 1.0) + b) * x).collect();
    wbar.windows(2)
        .filter(|p| p[1] > 0.0 && p[1].is_finite() && p[1] > 1e-250)
        .map(|p| ((p[1] - p[0].powf(beta1)) / p[1]).abs())
        .fold(0.0, f64::max)
}

/// The model recursion `U_k ≤ C 2^{7k/3} K^{−7/3} U_{k−1}^{5/3}`, with
/// `β₂` nudged above `β₁` to keep the ordering strict.
pub fn model_recursion_preset() -> RecursionParams {
    RecursionParams {
        a: 2f64.powf(7.0 / 3.0),
        beta1: 5.0 / 3.0,
        beta2: 5.0 / 3.0 + 1e-6,
        c: 1.0,
        variant: Variant::Scalar,
        k: 10.0,
        k_power: 7.0 / 3.0,
        kmax: DEFAULT_KMAX,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eps() -> f64 {
        (2.0f64 / 3.0).sqrt()
    }

    #[test]
    fn direct_iteration_oracle() {
        let p = RecursionParams::scalar(1.0, 1.5, 2.0, 1.0, 4.0).unwrap();
        let t = iterate(&p, 1.0).unwrap();
        assert_eq!(t.iterates[1], 0.5);
        let u2 = (0.5f64.powf(1.5) + 0.25) / 4.0;
        assert!((t.iterates[2] - u2).abs() < 1e-16);
        assert!((t.iterates[2] - 0.15089).abs() < 1e-5);
        assert!(t.iterates.windows(2).all(|w| w[1] <= w[0]));
        assert!(t.converged);
    }

    #[test]
    fn zero_start_stays_zero() {
        let p = RecursionParams::scalar(3.0, 1.2, 1.7, 1.0, 1.5).unwrap();
        let t = iterate(&p, 0.0).unwrap();
        assert!(t.iterates.iter().all(|&u| u == 0.0));
        assert!(t.converged);
        let s = find_k0(&p, 0.0, (0.5, 10.0)).unwrap();
        assert_eq!(s.k0, 0.5);
    }

    #[test]
    fn validation() {
        assert!(RecursionParams::scalar(0.5, 1.5, 2.0, 1.0, 4.0).is_err());
        assert!(RecursionParams::scalar(1.0, 2.0, 1.5, 1.0, 4.0).is_err());
        assert!(RecursionParams::system(1.5, 2.0, 1.0, 0.8, 0.3, 0.7, 10.0).is_err());
        let p = RecursionParams::scalar(1.0, 1.5, 2.0, 1.0, 4.0).unwrap();
        assert!(iterate(&p, 1.5).is_err());
    }

    #[test]
    fn overflow_is_divergence() {
        let p = RecursionParams::scalar(4.0, 1.5, 2.0, 1.0, 0.01).unwrap();
        let t = iterate(&p, 1.0).unwrap();
        assert!(t.diverged && !t.converged);
    }

    #[test]
    fn dichotomy_at_twice_threshold() {
        let p = RecursionParams::scalar(2.0, 1.5, 2.0, 1.0, 1.0).unwrap();
        let s = find_k0(&p, 1.0, (1.0, 10.0)).unwrap();
        assert!(s.k0.is_finite() && s.monotone);
        assert!(s.k_hi / s.k_lo - 1.0 <= BISECTION_WIDTH);
        let t = iterate(&p.with_k(2.0 * s.k0), 1.0).unwrap();
        assert!(t.converged);
        assert!(t.iterates.iter().skip(10).all(|&u| u < 1e-30));
        assert!(!iterate(&p.with_k(s.k_lo), 1.0).unwrap().converged);
        // Doubling kmax does not move the boundary.
        let s2 = find_k0(&p.with_kmax(400), 1.0, (1.0, 10.0)).unwrap();
        assert!((s2.k0 / s.k0 - 1.0).abs() <= 2.0 * BISECTION_WIDTH);
    }

    #[test]
    fn threshold_grows_with_a() {
        let ks: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&a| find_k0(&RecursionParams::scalar(a, 1.5, 2.0, 1.0, 1.0).unwrap(), 1.0, (0.1, 10.0)).unwrap().k0)
            .collect();
        assert!(ks[0] <= ks[1] && ks[1] <= ks[2], "{ks:?}");
    }

    #[test]
    fn system_geometric_decay() {
        let probe = RecursionParams::system(1.5, 2.0, 1.0, eps(), 0.3, 0.95, 1.0).unwrap();
        let kmin = probe.system_k_min().unwrap();
        for factor in [1.0, 1.5, 10.0, 1e3] {
            let p = probe.with_k(kmin * factor);
            assert!(p.system_condition() || factor == 1.0);
            let t = iterate(&p, 1.0).unwrap();
            assert_eq!(geometric_bound_violation(&p, &t), None);
            assert!(t.converged && t.decay_rate <= 0.95 * 0.3 + 1e-12);
        }
    }

    #[test]
    fn wbar_arithmetic() {
        assert_eq!(wbar_threshold(1.0, 2.0).unwrap(), 0.5);
        assert_eq!(wbar_threshold(2.0, 2.0).unwrap(), 0.25);
        assert!(wbar_threshold(0.5, 2.0).is_err());
        assert!(wbar_threshold(1.0, 1.0).is_err());
        assert!((wbar_threshold(2.0, 1.5).unwrap() - 1.0 / 256.0).abs() < 1e-18);
    }

    #[test]
    fn sharp_threshold_is_the_boundary() {
        for &(a, b) in &[(1.0, 2.0), (2.0, 1.5), (2.0, 2.0), (3.0, 1.8)] {
            let sharp = wbar_threshold_sharp(a, b).unwrap();
            let empirical = w_divergence_boundary(a, b, DEFAULT_KMAX).unwrap();
            assert!((empirical / sharp - 1.0).abs() < 1e-9, "{a} {b}: {empirical} vs {sharp}");
            let w = w_check(a, b, 0.999 * sharp, DEFAULT_KMAX);
            assert!(w.stays_below_one && w.tends_to_zero);
        }
    }

    #[test]
    fn wbar_normalization() {
        for &(a, b, w0) in &[(2.0, 1.5, 2e-4), (1.0, 2.0, 0.2), (3.0, 1.8, 1e-3)] {
            let exact = wbar_identity_defect(a, b, w0, 30, b / (b - 1.0).powi(2));
            assert!(exact < 1e-11, "{exact}");
            let w = w_sequence(a, b, w0, 5);
            let wb = wbar_sequence(a, b, &w);
            assert!((wb[1] / wb[0].powf(b) - 1.0).abs() < 1e-12);
        }
        // With exponent 1/(β₁−1)² the ratio W̄_{k+1}/W̄_k^{β₁} is 2A, not ≤ 1.
        let w = w_sequence(2.0, 1.5, 1e-4, 3);
        let s = 4.0f64;
        let wb: Vec<f64> = w.iter().enumerate().map(|(k, &x)| s.powf(k as f64 / 0.5 + 4.0) * x).collect();
        assert!((wb[1] / wb[0].powf(1.5) - 4.0).abs() < 1e-10);
    }

    #[test]
    fn model_preset() {
        let p = model_recursion_preset();
        assert!((p.a - 5.0397).abs() < 1e-4);
        assert!(p.validated().is_ok());
        assert!(iterate(&p, 1.0).unwrap().converged);
        assert!(!iterate(&p.with_k(1e-3), 1.0).unwrap().converged);
    }

    proptest! {
        #[test]
        fn traces_monotone_in_data(
            u0 in 0.0..1.0f64, du in 0.0..0.5f64,
            k in 0.5..20.0f64, dk in 0.0..5.0f64,
            a in 1.0..4.0f64, da in 0.0..2.0f64,
            system in any::<bool>(),
        ) {
            let base = if system {
                RecursionParams::system(1.3, 1.9, 1.5, eps(), 0.3, 0.9, k).unwrap()
            } else {
                RecursionParams::scalar(a, 1.3, 1.9, 1.5, k).unwrap()
            };
            let t = iterate(&base, u0).unwrap();
            let bigger_u0 = iterate(&base, (u0 + du).min(1.5)).unwrap();
            let smaller_k = iterate(&base.with_k(k / (1.0 + dk)), u0).unwrap();
            let bigger_a = iterate(&base.with_a(a + da), u0).unwrap();
            for other in [&bigger_u0, &smaller_k, &bigger_a] {
                for (i, &u) in t.iterates.iter().enumerate() {
                    match other.iterates.get(i) {
                        Some(&v) => prop_assert!(v >= u),
                        None => prop_assert!(other.diverged),
                    }
                }
            }
            prop_assert!(t.iterates.iter().all(|&u| u >= 0.0));
        }
    }
}
