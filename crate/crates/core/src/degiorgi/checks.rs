//! Numerical replay of the inequalities that drive the level-set iteration.

use crate::degiorgi::energy::{interval_weights, LevelAnalysis, LevelSetReport};
use crate::degiorgi::fields::{dk_sq, rk_values, truncate_magnitude, Derivatives};
use crate::degiorgi::schedule::{LevelSchedule, SourceExponents};
use crate::error::{Error, Result};
use crate::grid::{gradient, gradient_sq, norm, NormSpec, ScalarField, VectorField};
use crate::trajectory::Trajectory;

/// Contraction factor of the second-viscosity estimate when
/// `C_k/(C_k − C_{k−1}) = 2`.
pub const SECOND_VISCOSITY_EPS: f64 = 0.816_496_580_927_726;
/// Relative slack allowed on the second-viscosity bound.
pub const SECOND_VISCOSITY_TOL: f64 = 1e-6;
/// Constant in the `C_tol · h` allowance for the pointwise inequalities.
pub const APPENDIX_C_TOL: f64 = 10.0;
/// Allowed spread of a calibrated constant relative to the finest grid.
pub const CALIBRATION_STABILITY: f64 = 0.2;

/// A computed left side against the right side it should not exceed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    /// `lhs/rhs`, with `0/0 = 0` and `x/0 = ∞`.
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else if self.rhs == 0.0 {
            f64::INFINITY
        } else {
            self.lhs / self.rhs
        }
    }

    /// `lhs ≤ constant · rhs · (1 + rel_tol)`.
    pub fn passes(&self, constant: f64, rel_tol: f64) -> bool {
        self.lhs <= constant * self.rhs * (1.0 + rel_tol)
    }
}

/// Smallest constant making every check pass.
pub fn calibrate(checks: &[BoundCheck]) -> f64 {
    checks.iter().map(BoundCheck::ratio).fold(0.0, f64::max)
}

/// Whether every calibrated constant is within `±CALIBRATION_STABILITY` of
/// the last (finest-grid) one.
pub fn calibration_stable(constants: &[f64]) -> bool {
    match constants.last() {
        Some(&finest) if finest > 0.0 && finest.is_finite() => {
            constants.iter().all(|c| ((c / finest) - 1.0).abs() <= CALIBRATION_STABILITY)
        }
        Some(&finest) => constants.iter().all(|&c| c == finest),
        None => false,
    }
}

pub const APPENDIX_LABELS: [&str; 5] = [
    "|u|(1 - v/|u|) <= C",
    "(v/|u|)|grad u| <= d",
    "1{|u|>=C}|grad|u|| <= d",
    "|grad v| <= d",
    "|grad(u v/|u|)| <= 3d",
];

/// Integrated violations `∫(lhs − rhs)₊ dx` of the pointwise inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixReport {
    pub h: f64,
    pub level: f64,
    pub violations: [f64; 5],
}

impl AppendixReport {
    pub fn worst(&self) -> f64 {
        self.violations.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self, c_tol: f64) -> bool {
        self.worst() <= c_tol * self.h
    }
}

/// Evaluates the five pointwise inequalities relating `u`, `v = (|u| − C)₊`
/// and `d` on the grid.
pub fn check_appendix(u: &VectorField, level: f64) -> Result<AppendixReport> {
    if !(level >= 0.0) {
        return Err(Error::InvalidParameter(format!("level C = {level} must be nonnegative")));
    }
    let grid = *u.grid();
    let d = Derivatives::new(u);
    let mag = d.magnitude.values();
    let d2 = dk_sq(&d, level);
    let v = truncate_magnitude(&d.magnitude, level);
    let grad_v_sq = gradient_sq(&VectorField::replicate(&v, 1));
    let w: Vec<Vec<f64>> = u
        .components()
        .iter()
        .map(|comp| {
            comp.iter()
                .zip(mag)
                .zip(v.values())
                .map(|((x, &m), &vv)| if m > 0.0 { x * vv / m } else { 0.0 })
                .collect()
        })
        .collect();
    let grad_w_sq = gradient_sq(&VectorField::new(grid, w)?);
    let mut viol = [0.0; 5];
    for c in 0..grid.len() {
        let m = mag[c];
        let dk = d2[c].sqrt();
        let ratio = if m > 0.0 { v.values()[c] / m } else { 0.0 };
        let lhs = [
            (m * (1.0 - ratio)).abs(),
            ratio * d.grad_sq.values()[c].sqrt(),
            if m >= level { d.grad_mag_sq.values()[c].sqrt() } else { 0.0 },
            grad_v_sq.values()[c].sqrt(),
            grad_w_sq.values()[c].sqrt(),
        ];
        let rhs = [level, dk, dk, dk, 3.0 * dk];
        for i in 0..5 {
            viol[i] += (lhs[i] - rhs[i]).max(0.0);
        }
    }
    let vol = grid.cell_volume();
    Ok(AppendixReport { h: grid.h(), level, violations: viol.map(|x| x * vol) })
}

/// Norm exponents `(p₁, q₁) = (1/(β−α), 3/(2α+β))` of the weighted
/// interpolation inequality, validated.
pub fn interpolation_exponents(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("0 < alpha < 1 fails at alpha = {alpha}")));
    }
    if !(beta > 1.0) {
        return Err(Error::InvalidParameter(format!("beta > 1 fails at beta = {beta}")));
    }
    let p1 = 1.0 / (beta - alpha);
    let q1 = 3.0 / (2.0 * alpha + beta);
    if !(p1 >= 1.0) {
        return Err(Error::InvalidParameter(format!("p1 = 1/(beta - alpha) >= 1 fails: p1 = {p1}")));
    }
    if !(q1 >= 1.0) {
        return Err(Error::InvalidParameter(format!("q1 = 3/(2 alpha + beta) >= 1 fails: q1 = {q1}")));
    }
    Ok((p1, q1))
}

fn truncations(an: &LevelAnalysis<'_>, c: f64) -> Vec<ScalarField> {
    an.derivatives.iter().map(|d| truncate_magnitude(&d.magnitude, c)).collect()
}

/// `‖ρ^α v_k^{2β}‖_{L^{p₁}(T_k,T;L^{q₁})}` against `U_k^β`.
pub fn check_interpolation(
    an: &LevelAnalysis<'_>,
    schedule: &LevelSchedule,
    k: usize,
    alpha: f64,
    beta: f64,
) -> Result<BoundCheck> {
    let (p1, q1) = interpolation_exponents(alpha, beta)?;
    let e = an.level_energy(schedule, k)?;
    let powered: Vec<ScalarField> =
        truncations(an, e.c_k).iter().map(|v| v.map(|x| x.powf(2.0 * beta))).collect::<Result<_>>()?;
    let lhs = norm(&an.traj.times, &powered, &an.traj.rho, &NormSpec::new(p1, q1, alpha)?, e.t_k)?;
    Ok(BoundCheck { lhs, rhs: e.u_k.powf(beta) })
}

/// `‖ρ^{1/5} v_{k−1}‖²_{L^{10/3}}` in space-time against `U_{k−1}`.
pub fn check_sobolev_special(an: &LevelAnalysis<'_>, schedule: &LevelSchedule, k: usize) -> Result<BoundCheck> {
    if k == 0 {
        return Err(Error::InvalidParameter("level k must be at least 1".into()));
    }
    let e = an.level_energy(schedule, k - 1)?;
    let spec = NormSpec::new(10.0 / 3.0, 10.0 / 3.0, 0.2)?;
    let lhs = norm(&an.traj.times, &truncations(an, e.c_k), &an.traj.rho, &spec, e.t_k)?;
    Ok(BoundCheck { lhs: lhs * lhs, rhs: e.u_k })
}

/// Exponent `α = (2r − 3)/(r − 1)` of the time-layer estimate.
pub fn time_layer_alpha(r: f64) -> Result<f64> {
    if !(r > 1.5) {
        return Err(Error::InvalidParameter(format!("r > 3/2 fails at r = {r}")));
    }
    Ok((2.0 * r - 3.0) / (r - 1.0))
}

/// Time-averaged energy `(T_k − T_{k−1})^{−1}∫_{T_{k−1}}^{T_k}∫ρv_k²/2`
/// against `(T_k − T_{k−1})^{−1}(C_k − C_{k−1})^{−2α/3}‖ρ‖^{(3−α)/3}_{L^∞L^r}
/// U_{k−1}^{1+α/3}`.
pub fn check_time_layer(an: &LevelAnalysis<'_>, schedule: &LevelSchedule, k: usize, r: f64) -> Result<BoundCheck> {
    let alpha = time_layer_alpha(r)?;
    if !schedule.kind.is_layer() {
        return Err(Error::InvalidParameter("time-layer check needs a layer schedule".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("level k must be at least 1".into()));
    }
    let (c_k, c_prev) = (schedule.c(k)?, schedule.c(k - 1)?);
    let (t_k, t_prev) = (schedule.t(k)?, schedule.t(k - 1)?);
    let width = t_k - t_prev;
    let weights = interval_weights(&an.traj.times, t_prev, t_k);
    let mut integral = 0.0;
    for (n, d) in an.derivatives.iter().enumerate() {
        if weights[n] > 0.0 {
            let v = truncate_magnitude(&d.magnitude, c_k);
            integral += weights[n] * 0.5 * crate::grid::weighted_l2(&v, &an.traj.rho[n])?;
        }
    }
    let ones: Vec<ScalarField> = an.traj.rho.iter().map(|r| ScalarField::constant(*r.grid(), 1.0)).collect();
    let rho_norm = norm(
        &an.traj.times,
        &an.traj.rho,
        &ones,
        &NormSpec::new(f64::INFINITY, r, 0.0)?,
        an.traj.times[0] - 1.0,
    )?;
    let u_prev = an.level_energy(schedule, k - 1)?.u_k;
    let rhs = (c_k - c_prev).powf(-2.0 * alpha / 3.0) * rho_norm.powf((3.0 - alpha) / 3.0) * u_prev.powf(1.0 + alpha / 3.0)
        / width;
    Ok(BoundCheck { lhs: integral / width, rhs })
}

/// `|∫_{T_{k−1}}^T ∫ λ r_k|` against `εκU_{k−1}`, `ε = √(2/3)`.
pub fn check_second_viscosity(an: &LevelAnalysis<'_>, schedule: &LevelSchedule, k: usize) -> Result<BoundCheck> {
    if schedule.kind.is_scalar() {
        return Err(Error::InvalidParameter(
            "second-viscosity check needs a system schedule (C_k/(C_k - C_{k-1}) is unbounded otherwise)".into(),
        ));
    }
    let (lambda, kappa) = match (&an.traj.lambda, an.traj.kappa) {
        (Some(l), Some(k)) => (l, k),
        _ => return Err(Error::InvalidParameter("trajectory carries no second viscosity".into())),
    };
    if k == 0 {
        return Err(Error::InvalidParameter("level k must be at least 1".into()));
    }
    let prev = an.level_energy(schedule, k - 1)?;
    let c_k = schedule.c(k)?;
    let weights = interval_weights(&an.traj.times, prev.t_k, f64::INFINITY);
    let vol = an.traj.grid().cell_volume();
    let mut total = 0.0;
    for (n, d) in an.derivatives.iter().enumerate() {
        if weights[n] > 0.0 {
            let r = rk_values(d, c_k);
            let mut s = 0.0;
            for (l, rc) in lambda.values().iter().zip(r) {
                s += l * rc;
            }
            total += weights[n] * s * vol;
        }
    }
    Ok(BoundCheck { lhs: total.abs(), rhs: SECOND_VISCOSITY_EPS * kappa * prev.u_k })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub k: usize,
    pub c_k: f64,
    pub measure: f64,
    /// `U_k / C_k²`.
    pub energy_bound: f64,
    /// `∫∫v_k² / C_k²`, the bound Chebyshev gives directly.
    pub identity_bound: f64,
}

impl TailRow {
    pub fn energy_bound_holds(&self) -> bool {
        self.measure <= self.energy_bound * (1.0 + 1e-12)
    }

    pub fn identity_bound_holds(&self) -> bool {
        self.measure <= self.identity_bound * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// Least-squares slope of `−log₂(measure)` against `k` over the first
    /// four levels; `∞` if fewer than two of them have positive measure.
    pub p_hat: f64,
    /// `2 + log₂(1/κ)`.
    pub target: f64,
}

/// Integrability exponent `2 + log₂(1/κ)`.
pub fn tail_target(kappa: f64) -> f64 {
    2.0 + (1.0 / kappa).log2()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Tail measures `L({|u| ≥ 2C_k})` against `U_k/C_k²`, and the fitted decay
/// exponent.
pub fn chebyshev_tail(traj: &Trajectory, report: &LevelSetReport) -> Result<TailReport> {
    if report.schedule.kind.is_scalar() {
        return Err(Error::InvalidParameter("tail analysis needs a system schedule".into()));
    }
    let kappa = traj.kappa.ok_or_else(|| Error::InvalidParameter("trajectory carries no kappa".into()))?;
    let rows: Vec<TailRow> = report
        .rows
        .iter()
        .map(|r| {
            let c2 = r.energy.c_k * r.energy.c_k;
            TailRow {
                k: r.energy.k,
                c_k: r.energy.c_k,
                measure: r.tail_measure,
                energy_bound: r.energy.u_k / c2,
                identity_bound: r.truncated_l2 / c2,
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.measure > 0.0).take(4).map(|r| (r.k as f64, -r.measure.log2())).collect();
    let p_hat = if pts.len() < 2 { f64::INFINITY } else { slope(&pts) };
    Ok(TailReport { rows, p_hat, target: tail_target(kappa) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingReport {
    pub pass: bool,
    /// Largest `(|u| − K)₊` found, with its snapshot time and cell.
    pub worst_excess: f64,
    pub location: Option<(f64, usize)>,
}

/// Checks `(|u| − K)₊ = 0` (within `10⁻¹²`) on every snapshot after `t_after`.
pub fn gradient_vanishing(traj: &Trajectory, k_level: f64, t_after: f64) -> VanishingReport {
    let mut worst = 0.0;
    let mut location = None;
    for (n, u) in traj.u.iter().enumerate() {
        if traj.times[n] <= t_after {
            continue;
        }
        for c in 0..traj.grid().len() {
            let excess = (u.norm_at(c) - k_level).max(0.0);
            if excess > worst {
                worst = excess;
                location = Some((traj.times[n], c));
            }
        }
    }
    VanishingReport { pass: worst <= 1e-12, worst_excess: worst, location }
}

/// Outcome of fitting the level recursion to computed energies.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionFit {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    /// Smallest `A` (scalar) or prefactor (system) making the recursion hold.
    pub prefactor: f64,
    /// Per-level slack `bound_k − U_k` at the fitted prefactor.
    pub slack: Vec<f64>,
    /// Superlinearity exponent from regressing `log U_k` on
    /// `(1, k, log U_{k−1})`, when at least three pairs are positive.
    pub fitted_beta: Option<f64>,
    /// Level at which `U_{k−1} = 0` but `U_k > 0`.
    pub hard_failure: Option<usize>,
    pub pass: bool,
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let mut mi = m;
        for r in 0..3 {
            mi[r][i] = b[r];
        }
        *o = det(mi) / d;
    }
    Some(out)
}

/// Least-squares fit of `log U_k = a + b k + β log U_{k−1}`.
pub fn fit_beta(u: &[f64]) -> Option<f64> {
    let rows: Vec<[f64; 4]> = (1..u.len())
        .filter(|&k| u[k] > 0.0 && u[k - 1] > 0.0)
        .map(|k| [1.0, k as f64, u[k - 1].ln(), u[k].ln()])
        .collect();
    if rows.len() < 3 {
        return None;
    }
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for r in &rows {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
            atb[i] += r[i] * r[3];
        }
    }
    solve3(ata, atb).map(|x| x[2])
}

/// Smallest constants for which the computed `U_k` satisfy
/// `U_k ≤ (A^k/K^γ)(U_{k−1}^{β₁} + U_{k−1}^{β₂})` (scalar schedules) or
/// `U_k ≤ P(U_{k−1}^{β₁} + U_{k−1}^{β₂})/K^γ + εκU_{k−1}` (system schedules),
/// with `(β₁, β₂, γ)` from the source exponents.
pub fn check_recursion(report: &LevelSetReport, exponents: &SourceExponents, kappa: Option<f64>) -> Result<RecursionFit> {
    let (beta1, beta2, gamma) = exponents.recursion_exponents();
    let u = report.u();
    let big_k = report.schedule.k_level;
    let scalar = report.schedule.kind.is_scalar();
    let eps_kappa = if scalar {
        0.0
    } else {
        SECOND_VISCOSITY_EPS * kappa.ok_or_else(|| Error::InvalidParameter("system recursion needs kappa".into()))?
    };
    let mut hard_failure = None;
    let mut prefactor: f64 = if scalar { 1.0 } else { 0.0 };
    for k in 1..u.len() {
        if u[k - 1] == 0.0 {
            if u[k] > 0.0 && hard_failure.is_none() {
                hard_failure = Some(k);
            }
            continue;
        }
        let base = u[k - 1].powf(beta1) + u[k - 1].powf(beta2);
        if scalar {
            let ratio = u[k] * big_k.powf(gamma) / base;
            if ratio > 0.0 {
                prefactor = prefactor.max(ratio.powf(1.0 / k as f64));
            }
        } else {
            prefactor = prefactor.max((u[k] - eps_kappa * u[k - 1]).max(0.0) * big_k.powf(gamma) / base);
        }
    }
    let slack = (1..u.len())
        .map(|k| {
            let base = u[k - 1].powf(beta1) + u[k - 1].powf(beta2);
            let bound = if scalar {
                prefactor.powi(k as i32) / big_k.powf(gamma) * base
            } else {
                prefactor * base / big_k.powf(gamma) + eps_kappa * u[k - 1]
            };
            bound - u[k]
        })
        .collect();
    let pass = hard_failure.is_none() && prefactor.is_finite() && beta1 > 1.0 && beta2 > 1.0;
    Ok(RecursionFit { beta1, beta2, gamma, prefactor, slack, fitted_beta: fit_beta(&u), hard_failure, pass })
}

/// Cellwise `|∇v|` of a scalar field, for diagnostics.
pub fn gradient_magnitude(f: &ScalarField) -> ScalarField {
    let g = gradient(f);
    let vals = (0..f.grid().len()).map(|c| g.norm_at(c)).collect();
    ScalarField::from_vec_unchecked(*f.grid(), vals)
}
