//! Density transport `∂tρ + div(ρv) = 0`: a conservative first-order upwind
//! update and a family of exact (manufactured) density/velocity pairs.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{divergence, Grid, ScalarField, VectorField};

/// Stand-in for `|v|_∞` when the velocity vanishes.
pub const TINY_SPEED: f64 = 1e-300;
/// Default Courant number. Keeps the outflow fraction below one for any
/// velocity in one or two dimensions.
pub const DEFAULT_CFL: f64 = 0.25;

/// Density and prescribed velocity at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportState {
    pub rho: ScalarField,
    pub v: VectorField,
    pub t: f64,
}

impl TransportState {
    pub fn new(rho: ScalarField, v: VectorField, t: f64) -> Result<Self> {
        if rho.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        if let Some(cell) = rho.values().iter().position(|&r| r < 0.0) {
            return Err(Error::NegativeDensity { cell, value: rho.values()[cell] });
        }
        Ok(Self { rho, v, t })
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }
}

/// Largest stable time step `cfl·h / max(|v|_∞, tiny)`, where `|v|_∞` is the
/// largest component magnitude.
pub fn cfl_dt(v: &VectorField, grid: &Grid, cfl: f64) -> f64 {
    cfl * grid.h() / v.max_component_abs().max(TINY_SPEED)
}

/// Face velocities along `axis`; entry `c` sits between cell `c` and its
/// `+axis` neighbour.
pub fn face_velocity(v: &VectorField, axis: usize) -> Vec<f64> {
    let g = *v.grid();
    if axis >= v.ncomp() {
        return vec![0.0; g.len()];
    }
    let comp = v.component(axis);
    (0..g.len()).map(|c| 0.5 * (comp[c] + comp[g.shift(c, axis, 1)])).collect()
}

/// Largest fraction of a cell's content leaving it in one step of size `dt`.
/// Returns the fraction and the cell where it is attained.
pub fn max_outflow_fraction(v: &VectorField, dt: f64) -> (f64, usize) {
    let g = *v.grid();
    let mut out = vec![0.0; g.len()];
    for axis in 0..g.dim() {
        let vf = face_velocity(v, axis);
        for c in 0..g.len() {
            out[c] += vf[c].max(0.0) + (-vf[g.shift(c, axis, -1)]).max(0.0);
        }
    }
    let scale = dt / g.h();
    let mut worst = (0.0, 0);
    for (c, o) in out.iter().enumerate() {
        if o * scale > worst.0 {
            worst = (o * scale, c);
        }
    }
    worst
}

/// Validates `dt` against the positivity bound of the upwind update.
pub fn check_step(v: &VectorField, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let (fraction, cell) = max_outflow_fraction(v, dt);
    if fraction > 1.0 + 1e-12 {
        return Err(Error::CflViolation { dt, fraction, cell });
    }
    Ok(())
}

/// One conservative upwind step for a cell quantity `q` carried by `v`:
/// face flux `v_f⁺ q_L + v_f⁻ q_R`. Applied to `ρ` and to `ρθ` with the same
/// velocity it moves both along the same discrete characteristics.
pub fn upwind_step(q: &[f64], v: &VectorField, dt: f64) -> Vec<f64> {
    let g = *v.grid();
    let lam = dt / g.h();
    let mut out = q.to_vec();
    for axis in 0..g.dim() {
        let vf = face_velocity(v, axis);
        let flux: Vec<f64> = (0..g.len())
            .map(|c| vf[c].max(0.0) * q[c] + vf[c].min(0.0) * q[g.shift(c, axis, 1)])
            .collect();
        for c in 0..g.len() {
            out[c] -= lam * (flux[c] - flux[g.shift(c, axis, -1)]);
        }
    }
    out
}

/// Advances the density by one upwind step; the velocity is held fixed.
pub fn advance_density(s: &TransportState, dt: f64) -> Result<TransportState> {
    check_step(&s.v, dt)?;
    let mut rho = upwind_step(s.rho.values(), &s.v, dt);
    // The update is a nonnegative combination of old values; clip the
    // roundoff-sized negatives it can still produce next to vacuum.
    rho.iter_mut().for_each(|r| *r = r.max(0.0));
    Ok(TransportState { rho: ScalarField::new(*s.grid(), rho)?, v: s.v.clone(), t: s.t + dt })
}

/// Families of exact solutions of the continuity equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Smooth positive periodic profile moving with constant velocity.
    Translate,
    /// Compactly supported bump moving with constant velocity; exactly zero
    /// outside its support.
    VacuumBlob,
    /// `v = a sin(2πx/L)` along each axis, density compressed towards the
    /// centre line by the characteristics.
    Compressive1d,
}

impl PairKind {
    pub const ALL: [PairKind; 3] = [PairKind::Translate, PairKind::VacuumBlob, PairKind::Compressive1d];

    pub fn name(&self) -> &'static str {
        match self {
            PairKind::Translate => "translate",
            PairKind::VacuumBlob => "vacuum_blob",
            PairKind::Compressive1d => "compressive_1d",
        }
    }
}

impl FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PairKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Parameters of a manufactured pair. Unused fields are ignored by a kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams {
    /// Constant velocity for `translate` and `vacuum_blob`.
    pub velocity: [f64; 2],
    /// Velocity amplitude `a` for `compressive_1d`.
    pub amplitude: f64,
    /// Peak density of the initial profile.
    pub peak: f64,
    /// Bump centre at `t = 0`.
    pub center: [f64; 2],
    /// Bump support radius for `vacuum_blob`.
    pub radius: f64,
    /// Constant added to the initial density.
    pub floor: f64,
}

impl Default for PairParams {
    fn default() -> Self {
        Self { velocity: [0.0, 0.0], amplitude: 0.0, peak: 1.0, center: [0.5, 0.5], radius: 0.25, floor: 0.0 }
    }
}

/// Signed periodic displacement `x − c` folded into `[−L/2, L/2)`.
fn periodic_offset(x: f64, c: f64, length: f64) -> f64 {
    (x - c + 0.5 * length).rem_euclid(length) - 0.5 * length
}

/// Foot of the characteristic of `ẋ = a sin(kx)` through `x` at time `t`, and
/// the Jacobian `∂x₀/∂x`.
fn compressive_foot(x: f64, a: f64, k: f64, t: f64) -> (f64, f64) {
    let e = (-a * k * t).exp();
    let (s, c) = (0.5 * k * x).sin_cos();
    let x0 = (2.0 / k) * (s * e).atan2(c);
    let jac = e / (c * c + s * s * e * e);
    (x0, jac)
}

/// Exact density and velocity of `kind` at time `t`, sampled at cell centres.
pub fn manufactured_pair(kind: PairKind, params: &PairParams, grid: &Grid, t: f64) -> Result<TransportState> {
    if !(params.peak >= 0.0 && params.floor >= 0.0) {
        return Err(Error::InvalidParameter("peak and floor must be nonnegative".into()));
    }
    let l = grid.length();
    let dim = grid.dim();
    let k = 2.0 * PI / l;
    let p = *params;
    let (rho, v) = match kind {
        PairKind::Translate => {
            let rho = ScalarField::from_fn(*grid, |x| {
                let mut prod = 1.0;
                for (a, xa) in x.iter().enumerate().take(dim) {
                    prod *= ((k * (xa - p.velocity[a] * t - p.center[a])).cos() - 1.0).exp();
                }
                p.peak * prod + p.floor
            })?;
            (rho, VectorField::from_fn(*grid, dim, |_| p.velocity.to_vec())?)
        }
        PairKind::VacuumBlob => {
            if !(p.radius > 0.0 && p.radius < 0.5 * l) {
                return Err(Error::InvalidParameter("blob radius must lie in (0, L/2)".into()));
            }
            let rho = ScalarField::from_fn(*grid, |x| {
                let mut r2 = 0.0;
                for (a, xa) in x.iter().enumerate().take(dim) {
                    let d = periodic_offset(*xa - p.velocity[a] * t, p.center[a], l);
                    r2 += d * d;
                }
                let r = r2.sqrt();
                let bump = if r < p.radius { (0.5 * PI * r / p.radius).cos().powi(4) } else { 0.0 };
                p.peak * bump + p.floor
            })?;
            (rho, VectorField::from_fn(*grid, dim, |_| p.velocity.to_vec())?)
        }
        PairKind::Compressive1d => {
            let a = p.amplitude;
            let rho = ScalarField::from_fn(*grid, |x| {
                let mut profile = 1.0;
                let mut jac = 1.0;
                for xa in x.iter().take(dim) {
                    let (x0, j) = compressive_foot(*xa, a, k, t);
                    profile *= 1.0 + 0.5 * (k * x0).cos();
                    jac *= j;
                }
                (p.peak * profile + p.floor) * jac
            })?;
            let v = VectorField::from_fn(*grid, dim, |x| (0..dim).map(|ax| a * (k * x[ax]).sin()).collect())?;
            (rho, v)
        }
    };
    TransportState::new(rho, v, t)
}

/// Max-norm of `∂tρ + div(ρv)` for a manufactured pair, with a centred time
/// difference of width `2 dt` and the grid divergence.
pub fn continuity_residual(kind: PairKind, params: &PairParams, grid: &Grid, t: f64, dt: f64) -> Result<f64> {
    let fwd = manufactured_pair(kind, params, grid, t + dt)?;
    let bwd = manufactured_pair(kind, params, grid, t - dt)?;
    let now = manufactured_pair(kind, params, grid, t)?;
    let flux: Vec<Vec<f64>> = now
        .v
        .components()
        .iter()
        .map(|comp| comp.iter().zip(now.rho.values()).map(|(v, r)| v * r).collect())
        .collect();
    let div = divergence(&VectorField::new(*grid, flux)?);
    let mut worst: f64 = 0.0;
    for c in 0..grid.len() {
        let dt_rho = (fwd.rho.values()[c] - bwd.rho.values()[c]) / (2.0 * dt);
        worst = worst.max((dt_rho + div.values()[c]).abs());
    }
    Ok(worst)
}
