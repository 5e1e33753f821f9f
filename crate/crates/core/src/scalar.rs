//! Scalar degenerate advection-diffusion
//! `∂t(ρθ) + div(ρvθ) − div(µ∇θ) = ρF + div(ρG)` with `µ ≥ 1` and `ρ ≥ 0`.
//!
//! Each step transports `ρθ` with the density's own upwind fluxes, then
//! solves the backward-Euler diffusion problem
//! `(ρ/dt)θ + Lθ = (ρ/dt)θ* + ρF + div(ρG)`. The implicit matrix stays
//! invertible on vacuum cells; only a density vanishing everywhere leaves the
//! constants in the kernel, and then the mean of `θ` is held fixed.

use std::fmt;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::continuity::{advance_density, cfl_dt, check_step, upwind_step, TransportState};
use crate::diffusion::Diffusion;
use crate::error::{Error, Result};
use crate::grid::{divergence, Grid, ScalarField, VectorField};
use crate::linsolve::pcg;
use crate::test_functions::ConvexTestFunction;
use crate::trajectory::Trajectory;

/// Relative tolerance of the per-step energy inequality check.
pub const ENERGY_TOL: f64 = 1e-8;

/// Source terms `F` and `G` as functions of the density and time.
pub trait ScalarForcing: Send + Sync {
    fn evaluate(&self, rho: &ScalarField, t: f64) -> Result<(ScalarField, VectorField)>;
}

/// `F = 0`, `G = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl ScalarForcing for NoForcing {
    fn evaluate(&self, rho: &ScalarField, _t: f64) -> Result<(ScalarField, VectorField)> {
        let g = *rho.grid();
        Ok((ScalarField::zeros(g), VectorField::zeros(g, g.dim())))
    }
}

/// `F = f ρ^{−α}` on `{ρ > 0}` and `0` on vacuum, with the bounded profile
/// `f = amplitude · Π_axes cos(2πx_a/L)`. Thus `ρ^α F = f` stays bounded
/// while `F` itself blows up at the vacuum boundary.
#[derive(Debug, Clone, Copy)]
pub struct DensityPowerForcing {
    pub alpha: f64,
    pub amplitude: f64,
}

impl DensityPowerForcing {
    pub fn profile(&self, grid: &Grid) -> Result<ScalarField> {
        let k = 2.0 * PI / grid.length();
        let dim = grid.dim();
        ScalarField::from_fn(*grid, |x| self.amplitude * x.iter().take(dim).map(|xa| (k * xa).cos()).product::<f64>())
    }
}

impl ScalarForcing for DensityPowerForcing {
    fn evaluate(&self, rho: &ScalarField, _t: f64) -> Result<(ScalarField, VectorField)> {
        let g = *rho.grid();
        let f = self.profile(&g)?;
        let values = rho
            .values()
            .iter()
            .zip(f.values())
            .map(|(&r, &fv)| if r > 0.0 { fv * r.powf(-self.alpha) } else { 0.0 })
            .collect();
        Ok((ScalarField::new(g, values)?, VectorField::zeros(g, g.dim())))
    }
}

/// Fixed `F` and `G` fields, independent of density and time.
#[derive(Debug, Clone)]
pub struct PrescribedForcing {
    pub f: ScalarField,
    pub g: VectorField,
}

impl ScalarForcing for PrescribedForcing {
    fn evaluate(&self, _rho: &ScalarField, _t: f64) -> Result<(ScalarField, VectorField)> {
        Ok((self.f.clone(), self.g.clone()))
    }
}

/// One time slice of a scalar run. `f` and `g` are the sources evaluated at
/// this state's density and time, i.e. the ones used by the step that
/// produced it.
#[derive(Clone)]
pub struct ScalarRunState {
    pub theta: ScalarField,
    pub transport: TransportState,
    pub mu: ScalarField,
    pub f: ScalarField,
    pub g: VectorField,
    pub t: f64,
    pub forcing: Arc<dyn ScalarForcing>,
}

impl fmt::Debug for ScalarRunState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarRunState")
            .field("t", &self.t)
            .field("theta", &self.theta)
            .field("transport", &self.transport)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

/// Checks the viscosity floor `µ ≥ 1` cellwise.
pub fn check_viscosity_floor(mu: &ScalarField) -> Result<()> {
    match mu.values().iter().position(|&m| !(m >= 1.0)) {
        Some(c) => Err(Error::Coefficient(format!("viscosity floor mu >= 1 fails at cell {c} (mu = {})", mu.values()[c]))),
        None => Ok(()),
    }
}

/// `ρ G` as a vector field.
fn density_flux(rho: &ScalarField, g: &VectorField) -> VectorField {
    let comps = g
        .components()
        .iter()
        .map(|comp| comp.iter().zip(rho.values()).map(|(a, r)| a * r).collect())
        .collect();
    VectorField::from_vecs_unchecked(*rho.grid(), comps)
}

/// Cellwise `ρF + div_h(ρG)`.
pub(crate) fn source_density(rho: &ScalarField, f: &ScalarField, g: &VectorField) -> (Vec<f64>, Vec<f64>) {
    let rf = rho.values().iter().zip(f.values()).map(|(r, x)| r * x).collect();
    let dg = divergence(&density_flux(rho, g)).into_values();
    (rf, dg)
}

impl ScalarRunState {
    pub fn new(theta: ScalarField, transport: TransportState, mu: ScalarField, forcing: Arc<dyn ScalarForcing>) -> Result<Self> {
        let g = *theta.grid();
        if *transport.grid() != g || *mu.grid() != g {
            return Err(Error::GridMismatch);
        }
        check_viscosity_floor(&mu)?;
        let t = transport.t;
        let (f, gv) = forcing.evaluate(&transport.rho, t)?;
        Ok(Self { theta, transport, mu, f, g: gv, t, forcing })
    }

    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }

    pub fn rho(&self) -> &ScalarField {
        &self.transport.rho
    }
}

/// Transported value `θ* = (ρθ)*/ρ*`, a convex combination of old values on
/// cells that keep positive mass and `θⁿ` elsewhere.
pub(crate) fn advect_quantity(rho_new: &[f64], rho_old: &[f64], q: &[f64], v: &VectorField, dt: f64) -> Vec<f64> {
    let (lo, hi) = q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let rq: Vec<f64> = rho_old.iter().zip(q).map(|(r, x)| r * x).collect();
    let rq_new = upwind_step(&rq, v, dt);
    rho_new
        .iter()
        .zip(rq_new)
        .zip(q)
        .map(|((&r, m), &old)| if r > 0.0 { (m / r).clamp(lo, hi) } else { old })
        .collect()
}

/// Solves `(ρ/dt)x + L x = b` with warm start `x`. If `ρ ≡ 0` the right side
/// is projected onto mean-zero fields and the mean of `x` is kept.
pub(crate) fn implicit_solve(
    op: &Diffusion,
    rho: &[f64],
    dt: f64,
    mut b: Vec<f64>,
    x: &mut [f64],
) -> Result<()> {
    let g = *op.grid();
    let n = g.len();
    let mass: Vec<f64> = rho.iter().map(|r| r / dt).collect();
    let vacuum = rho.iter().all(|&r| r == 0.0);
    let mean_before = x.iter().sum::<f64>() / n as f64;
    if vacuum {
        let mb = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mb);
    }
    let mut diag = op.diagonal();
    for (d, m) in diag.iter_mut().zip(&mass) {
        *d += m;
    }
    let apply = |y: &[f64], out: &mut [f64]| {
        for i in 0..y.len() {
            out[i] = mass[i] * y[i];
        }
        op.apply_add(y, out);
    };
    pcg(apply, &diag, &b, x, 10 * n)?;
    if vacuum {
        let shift = mean_before - x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v += shift);
    }
    Ok(())
}

/// Advances a scalar state by `dt`.
pub fn advance_scalar(s: &ScalarRunState, dt: f64) -> Result<ScalarRunState> {
    check_step(&s.transport.v, dt)?;
    let transport = advance_density(&s.transport, dt)?;
    let rho_new = transport.rho.values();
    let theta_star = advect_quantity(rho_new, s.rho().values(), s.theta.values(), &s.transport.v, dt);

    let t = s.t + dt;
    let (f, gv) = s.forcing.evaluate(&transport.rho, t)?;
    let (rf, dg) = source_density(&transport.rho, &f, &gv);
    let b: Vec<f64> = (0..theta_star.len()).map(|c| rho_new[c] / dt * theta_star[c] + rf[c] + dg[c]).collect();

    let op = Diffusion::new(&s.mu, 1.0);
    let mut theta = theta_star;
    implicit_solve(&op, rho_new, dt, b, &mut theta)?;
    let theta = ScalarField::new(*s.grid(), theta)?;
    Ok(ScalarRunState { theta, transport, mu: s.mu.clone(), f, g: gv, t, forcing: s.forcing.clone() })
}

/// Terms of the discrete energy inequality over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyResidual {
    /// Left side minus right side; the inequality holds when this is ≤ 0.
    pub residual: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `dt` times the discrete dissipation.
    pub dissipation: f64,
    /// `dt Σ φ′ ρF h^dim`.
    pub f_term: f64,
    /// `dt Σ φ′ div(ρG) h^dim`.
    pub g_term: f64,
    /// Magnitude of the λ cross term (zero for scalar runs).
    pub cross_term: f64,
    /// Cellwise sum of magnitudes of the energy and source contributions,
    /// so that cancellation inside a sum does not shrink the scale.
    pub magnitude: f64,
}

impl EnergyResidual {
    /// Sum of magnitudes of all contributions.
    pub fn scale(&self) -> f64 {
        self.magnitude + self.dissipation.abs() + self.cross_term.abs()
    }

    pub fn passes(&self) -> bool {
        self.residual <= ENERGY_TOL * self.scale()
    }
}

/// `Σ ρ φ(θ) h^dim` and `Σ ρ |φ(θ)| h^dim`.
fn phi_energy(rho: &ScalarField, theta: &ScalarField, phi: &ConvexTestFunction) -> (f64, f64) {
    let (mut s, mut a) = (0.0, 0.0);
    for (r, y) in rho.values().iter().zip(theta.values()) {
        let e = r * phi.value(*y);
        s += e;
        a += e.abs();
    }
    let vol = rho.grid().cell_volume();
    (s * vol, a * vol)
}

/// Residual of `d/dt ∫ρφ(θ) + ∫µφ″(θ)|∇θ|² ≤ ∫ρFφ′(θ) + ∫φ′(θ)div(ρG)` over
/// one step, with the dissipation in face form
/// `Σ_f µ_f (φ′(θ_R) − φ′(θ_L))(θ_R − θ_L)/h²`.
pub fn energy_residual(
    before: &ScalarRunState,
    after: &ScalarRunState,
    dt: f64,
    phi: &ConvexTestFunction,
) -> Result<EnergyResidual> {
    phi.check_scalar()?;
    if before.grid() != after.grid() {
        return Err(Error::GridMismatch);
    }
    let (e0, a0) = phi_energy(before.rho(), &before.theta, phi);
    let (e1, a1) = phi_energy(after.rho(), &after.theta, phi);
    let dphi: Vec<f64> = after.theta.values().iter().map(|&y| phi.d1(y)).collect();
    let op = Diffusion::new(&after.mu, 1.0);
    let dissipation = dt * op.form(&dphi, after.theta.values());
    let (rf, dg) = source_density(after.rho(), &after.f, &after.g);
    let vol = after.grid().cell_volume();
    let (mut sf, mut sg, mut abs_src) = (0.0, 0.0, 0.0);
    for c in 0..dphi.len() {
        sf += dphi[c] * rf[c];
        sg += dphi[c] * dg[c];
        abs_src += (dphi[c] * rf[c]).abs() + (dphi[c] * dg[c]).abs();
    }
    let f_term = dt * sf * vol;
    let g_term = dt * sg * vol;
    let residual = e1 - e0 + dissipation - f_term - g_term;
    let magnitude = a0 + a1 + dt * abs_src * vol;
    Ok(EnergyResidual { residual, energy_before: e0, energy_after: e1, dissipation, f_term, g_term, cross_term: 0.0, magnitude })
}

/// Time-stepping controls shared by the scalar and system drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunControl {
    pub t_final: f64,
    pub cfl: f64,
    pub max_dt: f64,
    /// Store a snapshot every this many steps (the final state is always kept).
    pub snapshot_every: usize,
}

impl RunControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("final time {} must be nonnegative", self.t_final)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl {} must lie in (0, 1]", self.cfl)));
        }
        if !(self.max_dt > 0.0) {
            return Err(Error::InvalidParameter(format!("max_dt {} must be positive", self.max_dt)));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidParameter("snapshot_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Step size from time `t`, shortened to land on `t_final`.
    pub fn next_dt(&self, v: &VectorField, t: f64) -> f64 {
        let dt = cfl_dt(v, v.grid(), self.cfl).min(self.max_dt);
        let remaining = self.t_final - t;
        if remaining <= dt * (1.0 + 1e-9) {
            remaining
        } else {
            dt
        }
    }
}

/// One energy-inequality evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRecord {
    pub step: usize,
    pub t: f64,
    pub phi_label: String,
    pub residual: f64,
    pub scale: f64,
    pub cross_term: f64,
    pub pass: bool,
}

/// Per-step extrema of the unknown, used for maximum-principle and
/// uniformity checks without storing every state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepExtrema {
    pub step: usize,
    pub t: f64,
    pub min: f64,
    pub max: f64,
    /// `max |θ|`, or `max |u|` for systems.
    pub sup_abs: f64,
}

/// Output of [`run_scalar`].
#[derive(Debug, Clone)]
pub struct ScalarRun {
    pub snapshots: Vec<ScalarRunState>,
    pub residuals: Vec<ResidualRecord>,
    pub extrema: Vec<StepExtrema>,
    pub steps: usize,
}

impl ScalarRun {
    pub fn final_state(&self) -> &ScalarRunState {
        self.snapshots.last().expect("run keeps the initial state")
    }

    pub fn all_residuals_pass(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }

    /// Analyzer view with `u = θ` and `ν = µ`.
    pub fn trajectory(&self) -> Result<Trajectory> {
        let times = self.snapshots.iter().map(|s| s.t).collect();
        let rho = self.snapshots.iter().map(|s| s.rho().clone()).collect();
        let theta: Vec<ScalarField> = self.snapshots.iter().map(|s| s.theta.clone()).collect();
        Trajectory::from_scalar(times, rho, &theta, self.snapshots[0].mu.clone())
    }
}

fn extrema(step: usize, t: f64, theta: &ScalarField) -> StepExtrema {
    StepExtrema { step, t, min: theta.min(), max: theta.max(), sup_abs: theta.max_abs() }
}

/// Runs from `initial` to `control.t_final`, evaluating the energy inequality
/// for every function in `battery` at every step.
pub fn run_scalar(initial: ScalarRunState, control: &RunControl, battery: &[ConvexTestFunction]) -> Result<ScalarRun> {
    control.validate()?;
    for phi in battery {
        phi.check_scalar()?;
    }
    let mut run = ScalarRun {
        extrema: vec![extrema(0, initial.t, &initial.theta)],
        snapshots: vec![initial.clone()],
        residuals: Vec::new(),
        steps: 0,
    };
    let mut cur = initial;
    let mut step = 0;
    while cur.t < control.t_final {
        let dt = control.next_dt(&cur.transport.v, cur.t);
        if dt <= 0.0 {
            break;
        }
        let mut next = advance_scalar(&cur, dt)?;
        step += 1;
        let last = next.t >= control.t_final || control.t_final - next.t <= 1e-12 * control.t_final;
        if last {
            next.t = control.t_final;
            next.transport.t = control.t_final;
        }
        for phi in battery {
            let r = energy_residual(&cur, &next, dt, phi)?;
            run.residuals.push(ResidualRecord {
                step,
                t: next.t,
                phi_label: phi.label().to_string(),
                residual: r.residual,
                scale: r.scale(),
                cross_term: 0.0,
                pass: r.passes(),
            });
        }
        run.extrema.push(extrema(step, next.t, &next.theta));
        if last || step % control.snapshot_every == 0 {
            run.snapshots.push(next.clone());
        }
        cur = next;
        if last {
            break;
        }
    }
    run.steps = step;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuity::{manufactured_pair, PairKind, PairParams};
    use crate::test_functions::scalar_battery;
    use proptest::prelude::*;

    fn heat_state(n: usize, sigma: f64) -> ScalarRunState {
        let g = Grid::new(1, n, 1.0).unwrap();
        let rho = ScalarField::constant(g, 1.0);
        let tr = TransportState::new(rho, VectorField::zeros(g, 1), 0.0).unwrap();
        let theta = ScalarField::from_fn(g, |x| (-(x[0] - 0.5).powi(2) / (2.0 * sigma * sigma)).exp()).unwrap();
        ScalarRunState::new(theta, tr, ScalarField::constant(g, 1.0), Arc::new(NoForcing)).unwrap()
    }

    /// Periodic heat solution of a unit-height Gaussian of width `sigma`.
    fn heat_exact(x: f64, t: f64, sigma: f64) -> f64 {
        let var = sigma * sigma + 2.0 * t;
        let mut s = 0.0;
        for m in -5i32..=5 {
            let d = x - 0.5 + m as f64;
            s += (-d * d / (2.0 * var)).exp();
        }
        s * sigma / var.sqrt()
    }

    fn heat_error(n: usize, dt: f64) -> f64 {
        let sigma = 0.05;
        let ctl = RunControl { t_final: 0.02, cfl: 0.5, max_dt: dt, snapshot_every: 1000000 };
        let run = run_scalar(heat_state(n, sigma), &ctl, &[]).unwrap();
        let fin = run.final_state();
        let g = *fin.grid();
        let mut e = 0.0;
        for c in 0..g.len() {
            e += (fin.theta.values()[c] - heat_exact(g.center(c)[0], fin.t, sigma)).powi(2) * g.h();
        }
        e.sqrt()
    }

    #[test]
    fn heat_error_is_small() {
        assert!(heat_error(256, 1e-4) < 1e-3);
    }

    #[test]
    fn heat_spatial_order() {
        // Time error made negligible by a tiny step.
        let e1 = heat_error(32, 2e-6);
        let e2 = heat_error(64, 2e-6);
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "order {order}, errors {e1} {e2}");
    }

    #[test]
    fn constant_state_is_preserved() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let p = PairParams { velocity: [0.5, -0.3], radius: 0.3, ..Default::default() };
        let tr = manufactured_pair(PairKind::VacuumBlob, &p, &g, 0.0).unwrap();
        let s = ScalarRunState::new(ScalarField::constant(g, 1.75), tr, ScalarField::constant(g, 2.0), Arc::new(NoForcing))
            .unwrap();
        let s2 = advance_scalar(&s, 0.01).unwrap();
        assert!(s2.theta.values().iter().all(|&v| v == 1.75));
    }

    #[test]
    fn zero_steps_keeps_initial_state() {
        let ctl = RunControl { t_final: 0.0, cfl: 0.5, max_dt: 1e-3, snapshot_every: 1 };
        let run = run_scalar(heat_state(16, 0.1), &ctl, &[]).unwrap();
        assert_eq!(run.snapshots.len(), 1);
        assert_eq!(run.steps, 0);
    }

    #[test]
    fn viscosity_floor_enforced() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let tr = TransportState::new(ScalarField::constant(g, 1.0), VectorField::zeros(g, 1), 0.0).unwrap();
        let err = ScalarRunState::new(ScalarField::zeros(g), tr, ScalarField::constant(g, 0.5), Arc::new(NoForcing));
        assert!(matches!(err, Err(Error::Coefficient(_))));
    }

    #[test]
    fn full_vacuum_keeps_mean() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let tr = TransportState::new(ScalarField::zeros(g), VectorField::zeros(g, 1), 0.0).unwrap();
        let theta = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() + 0.3).unwrap();
        let s = ScalarRunState::new(theta.clone(), tr, ScalarField::constant(g, 1.0), Arc::new(NoForcing)).unwrap();
        let s2 = advance_scalar(&s, 0.01).unwrap();
        let m0 = theta.integral();
        assert!((s2.theta.integral() - m0).abs() < 1e-12);
        assert!(s2.theta.max() - s2.theta.min() < 1e-9);
    }

    #[test]
    fn linear_phi_conserves_weighted_mean() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        let p = PairParams { amplitude: 0.4, ..Default::default() };
        let tr = manufactured_pair(PairKind::Compressive1d, &p, &g, 0.0).unwrap();
        let theta = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let mu = ScalarField::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 7.0 }).unwrap();
        let s = ScalarRunState::new(theta, tr, mu, Arc::new(NoForcing)).unwrap();
        let dt = cfl_dt(&s.transport.v, &g, 0.25);
        let s2 = advance_scalar(&s, dt).unwrap();
        let r = energy_residual(&s, &s2, dt, &ConvexTestFunction::linear()).unwrap();
        assert!(r.residual.abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn square_phi_dissipates_on_heat() {
        let s = heat_state(128, 0.05);
        let s2 = advance_scalar(&s, 1e-3).unwrap();
        let r = energy_residual(&s, &s2, 1e-3, &ConvexTestFunction::square()).unwrap();
        assert!(r.residual <= 0.0);
        assert!(r.dissipation > 0.0);
    }

    #[test]
    fn inadmissible_phi_rejected() {
        let s = heat_state(16, 0.1);
        let s2 = advance_scalar(&s, 1e-3).unwrap();
        let bad = ConvexTestFunction::new("-y^2", |y| -y * y, |y| -2.0 * y, |_| -2.0);
        assert!(matches!(energy_residual(&s, &s2, 1e-3, &bad), Err(Error::InadmissibleTestFunction { .. })));
    }

    #[test]
    fn sources_enter_residual() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let p = PairParams { velocity: [0.4, 0.1], radius: 0.3, ..Default::default() };
        let tr = manufactured_pair(PairKind::VacuumBlob, &p, &g, 0.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let gv = VectorField::from_fn(g, 2, |x| vec![(2.0 * PI * x[1]).cos(), 0.5]).unwrap();
        let forcing = Arc::new(PrescribedForcing { f, g: gv });
        let theta = ScalarField::from_fn(g, |x| x[0] * (1.0 - x[0])).unwrap();
        let s = ScalarRunState::new(theta, tr, ScalarField::constant(g, 1.5), forcing).unwrap();
        let ctl = RunControl { t_final: 0.05, cfl: 0.25, max_dt: 5e-3, snapshot_every: 1 };
        let run = run_scalar(s, &ctl, &scalar_battery(0.25)).unwrap();
        assert!(run.all_residuals_pass());
        let lin: Vec<_> = run.residuals.iter().filter(|r| r.phi_label == "y").collect();
        assert!(lin.iter().all(|r| r.residual.abs() <= 1e-10 * r.scale.max(1e-300)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn max_principle_and_suitability(
            theta0 in prop::collection::vec(-2.0..2.0f64, 12),
            rho0 in prop::collection::vec(prop_oneof![Just(0.0), 0.0..3.0f64], 12),
            vel in prop::collection::vec(-1.0..1.0f64, 12),
            mu0 in prop::collection::vec(1.0..20.0f64, 12),
            steps in 1usize..6,
        ) {
            let g = Grid::new(1, 12, 1.0).unwrap();
            let tr = TransportState::new(ScalarField::new(g, rho0).unwrap(), VectorField::new(g, vec![vel]).unwrap(), 0.0).unwrap();
            let theta = ScalarField::new(g, theta0).unwrap();
            let (lo, hi) = (theta.min(), theta.max());
            let mut s = ScalarRunState::new(theta, tr, ScalarField::new(g, mu0).unwrap(), Arc::new(NoForcing)).unwrap();
            let battery = scalar_battery(2.0);
            for _ in 0..steps {
                let dt = cfl_dt(&s.transport.v, &g, 0.25).min(0.05);
                let next = advance_scalar(&s, dt).unwrap();
                prop_assert!(next.theta.max() <= hi + 1e-10);
                prop_assert!(next.theta.min() >= lo - 1e-10);
                for phi in &battery {
                    let r = energy_residual(&s, &next, dt, phi).unwrap();
                    prop_assert!(r.passes(), "{} {:?}", phi.label(), r);
                }
                s = next;
            }
        }
    }
}
