//! Vector system
//! `∂t(ρu) + div(ρv⊗u) − div(2µ∇u) − ∇(λ div u) = ρF + div(ρG)` for a
//! three-component unknown `u`, with `ν = 2µ + 3λ ≥ 1` and `3|λ| ≤ κν`,
//! `0 < κ < 1/2`.
//!
//! The step mirrors the scalar one: upwind transport of `ρu` with the density
//! fluxes, then one coupled implicit solve with the symmetric operator
//! `(ρ/dt) + L_{2µ} + Dᵀ λ D`, where `D` is the centred divergence and
//! `−Dᵀ` the centred gradient.

use std::fmt;
use std::sync::Arc;

use crate::continuity::{advance_density, check_step, TransportState};
use crate::diffusion::Diffusion;
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient_sq, Grid, ScalarField, VectorField};
use crate::linsolve::pcg;
use crate::scalar::{advect_quantity, check_viscosity_floor, EnergyResidual, ResidualRecord, RunControl, StepExtrema};
use crate::test_functions::ConvexTestFunction;
use crate::trajectory::Trajectory;

/// Number of components of the system unknown.
pub const NCOMP: usize = 3;
/// Below this magnitude a cell contributes nothing to the λ cross term.
pub const ZERO_MAGNITUDE: f64 = 1e-30;

/// Source terms of the system. `g[j]` is the vector `(G_{1j}, …, G_{dim j})`
/// whose divergence forces component `j`.
pub trait SystemForcing: Send + Sync {
    fn evaluate(&self, rho: &ScalarField, t: f64) -> Result<(VectorField, Vec<VectorField>)>;
}

fn zero_sources(grid: Grid) -> (VectorField, Vec<VectorField>) {
    (VectorField::zeros(grid, NCOMP), vec![VectorField::zeros(grid, grid.dim()); NCOMP])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoSystemForcing;

impl SystemForcing for NoSystemForcing {
    fn evaluate(&self, rho: &ScalarField, _t: f64) -> Result<(VectorField, Vec<VectorField>)> {
        Ok(zero_sources(*rho.grid()))
    }
}

/// Pressure-type forcing `F = 0`, `G_ij = −ρ^{γ−1} δ_ij`.
#[derive(Debug, Clone, Copy)]
pub struct BarotropicForcing {
    pub gamma: f64,
}

impl SystemForcing for BarotropicForcing {
    fn evaluate(&self, rho: &ScalarField, _t: f64) -> Result<(VectorField, Vec<VectorField>)> {
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("adiabatic exponent {} must exceed 1", self.gamma)));
        }
        let grid = *rho.grid();
        let (f, mut g) = zero_sources(grid);
        let p: Vec<f64> = rho.values().iter().map(|&r| -r.max(0.0).powf(self.gamma - 1.0)).collect();
        for (j, gj) in g.iter_mut().enumerate().take(grid.dim()) {
            let mut comps = gj.components().to_vec();
            comps[j] = p.clone();
            *gj = VectorField::new(grid, comps)?;
        }
        Ok((f, g))
    }
}

/// Fixed source fields.
#[derive(Debug, Clone)]
pub struct PrescribedSystemForcing {
    pub f: VectorField,
    pub g: Vec<VectorField>,
}

impl SystemForcing for PrescribedSystemForcing {
    fn evaluate(&self, _rho: &ScalarField, _t: f64) -> Result<(VectorField, Vec<VectorField>)> {
        Ok((self.f.clone(), self.g.clone()))
    }
}

/// `λ = −κν/3` with `ν = 2µ/(1+κ)`, the most negative second viscosity
/// allowed by `3|λ| ≤ κν`.
pub fn saturated_lambda(mu: &ScalarField, kappa: f64) -> Result<ScalarField> {
    mu.map(|m| -2.0 * kappa * m / (3.0 * (1.0 + kappa)))
}

/// Cellwise checks of `µ ≥ 1`, `ν = 2µ + 3λ ≥ 1`, `3|λ| ≤ κν` and
/// `0 < κ < 1/2`. Returns `ν`.
pub fn check_coefficients(mu: &ScalarField, lambda: &ScalarField, kappa: f64) -> Result<ScalarField> {
    if mu.grid() != lambda.grid() {
        return Err(Error::GridMismatch);
    }
    if !(kappa > 0.0 && kappa < 0.5) {
        return Err(Error::Coefficient(format!("ratio bound 0 < kappa < 1/2 fails at kappa = {kappa}")));
    }
    check_viscosity_floor(mu)?;
    let nu: Vec<f64> = mu.values().iter().zip(lambda.values()).map(|(m, l)| 2.0 * m + 3.0 * l).collect();
    for (c, (&n, &l)) in nu.iter().zip(lambda.values()).enumerate() {
        if !(n >= 1.0 - 1e-12) {
            return Err(Error::Coefficient(format!("nu = 2 mu + 3 lambda >= 1 fails at cell {c} (nu = {n})")));
        }
        if !(3.0 * l.abs() <= kappa * n * (1.0 + 1e-12)) {
            return Err(Error::Coefficient(format!(
                "3|lambda| <= kappa nu fails at cell {c} (3|lambda| = {}, kappa nu = {})",
                3.0 * l.abs(),
                kappa * n
            )));
        }
    }
    ScalarField::new(*mu.grid(), nu)
}

#[derive(Clone)]
pub struct SystemRunState {
    pub u: VectorField,
    pub transport: TransportState,
    pub mu: ScalarField,
    pub lambda: ScalarField,
    pub nu: ScalarField,
    pub kappa: f64,
    pub f: VectorField,
    pub g: Vec<VectorField>,
    pub t: f64,
    pub forcing: Arc<dyn SystemForcing>,
}

impl fmt::Debug for SystemRunState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemRunState")
            .field("t", &self.t)
            .field("kappa", &self.kappa)
            .field("u", &self.u)
            .field("transport", &self.transport)
            .finish_non_exhaustive()
    }
}

impl SystemRunState {
    pub fn new(
        u: VectorField,
        transport: TransportState,
        mu: ScalarField,
        lambda: ScalarField,
        kappa: f64,
        forcing: Arc<dyn SystemForcing>,
    ) -> Result<Self> {
        let grid = *u.grid();
        if u.ncomp() != NCOMP {
            return Err(Error::InvalidParameter(format!("system unknown needs {NCOMP} components")));
        }
        if *transport.grid() != grid || *mu.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let nu = check_coefficients(&mu, &lambda, kappa)?;
        let t = transport.t;
        let (f, g) = evaluate_checked(forcing.as_ref(), &transport.rho, t)?;
        Ok(Self { u, transport, mu, lambda, nu, kappa, f, g, t, forcing })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn rho(&self) -> &ScalarField {
        &self.transport.rho
    }
}

fn evaluate_checked(forcing: &dyn SystemForcing, rho: &ScalarField, t: f64) -> Result<(VectorField, Vec<VectorField>)> {
    let (f, g) = forcing.evaluate(rho, t)?;
    if f.ncomp() != NCOMP || g.len() != NCOMP {
        return Err(Error::InvalidParameter("system sources must have three components".into()));
    }
    Ok((f, g))
}

/// `ρ F_j + div(ρ G_{·j})` split into its two parts, per component.
fn system_sources(rho: &ScalarField, f: &VectorField, g: &[VectorField]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let grid = *rho.grid();
    let r = rho.values();
    let rf = f.components().iter().map(|comp| comp.iter().zip(r).map(|(a, b)| a * b).collect()).collect();
    let dg = g
        .iter()
        .map(|gj| {
            let flux = gj.components().iter().map(|comp| comp.iter().zip(r).map(|(a, b)| a * b).collect()).collect();
            divergence(&VectorField::from_vecs_unchecked(grid, flux)).into_values()
        })
        .collect();
    (rf, dg)
}

/// Centred divergence of the stacked unknown `x = (u_0, u_1, u_2)`.
fn stacked_divergence(grid: &Grid, x: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let inv = 0.5 / grid.h();
    let mut out = vec![0.0; n];
    for axis in 0..grid.dim() {
        let comp = &x[axis * n..(axis + 1) * n];
        for (c, o) in out.iter_mut().enumerate() {
            *o += (comp[grid.shift(c, axis, 1)] - comp[grid.shift(c, axis, -1)]) * inv;
        }
    }
    out
}

/// `out += Dᵀ(λ D x) = −∇(λ div x)` on the stacked unknown.
fn add_second_viscosity(grid: &Grid, lambda: &[f64], x: &[f64], out: &mut [f64]) {
    let n = grid.len();
    let inv = 0.5 / grid.h();
    let ld: Vec<f64> = stacked_divergence(grid, x).iter().zip(lambda).map(|(d, l)| d * l).collect();
    for axis in 0..grid.dim() {
        let o = &mut out[axis * n..(axis + 1) * n];
        for (c, oc) in o.iter_mut().enumerate() {
            *oc -= (ld[grid.shift(c, axis, 1)] - ld[grid.shift(c, axis, -1)]) * inv;
        }
    }
}

/// Applies the implicit system operator without the mass term.
pub fn apply_viscous_operator(mu: &ScalarField, lambda: &ScalarField, u: &VectorField) -> VectorField {
    let grid = *u.grid();
    let n = grid.len();
    let op = Diffusion::new(mu, 2.0);
    let x: Vec<f64> = u.components().concat();
    let mut out = vec![0.0; x.len()];
    for j in 0..u.ncomp() {
        op.apply_add(&x[j * n..(j + 1) * n], &mut out[j * n..(j + 1) * n]);
    }
    add_second_viscosity(&grid, lambda.values(), &x, &mut out);
    VectorField::from_vecs_unchecked(grid, out.chunks(n).map(|c| c.to_vec()).collect())
}

/// Advances a system state by `dt`.
pub fn advance_velocity(s: &SystemRunState, dt: f64) -> Result<SystemRunState> {
    check_step(&s.transport.v, dt)?;
    let nu = check_coefficients(&s.mu, &s.lambda, s.kappa)?;
    let grid = *s.grid();
    let n = grid.len();
    let transport = advance_density(&s.transport, dt)?;
    let rho_new = transport.rho.values();
    let t = s.t + dt;
    let (f, g) = evaluate_checked(s.forcing.as_ref(), &transport.rho, t)?;
    let (rf, dg) = system_sources(&transport.rho, &f, &g);

    let mut x = Vec::with_capacity(NCOMP * n);
    let mut b = Vec::with_capacity(NCOMP * n);
    for j in 0..NCOMP {
        let star = advect_quantity(rho_new, s.rho().values(), s.u.component(j), &s.transport.v, dt);
        for c in 0..n {
            b.push(rho_new[c] / dt * star[c] + rf[j][c] + dg[j][c]);
        }
        x.extend(star);
    }

    let op = Diffusion::new(&s.mu, 2.0);
    let vacuum = rho_new.iter().all(|&r| r == 0.0);
    let means_before: Vec<f64> = (0..NCOMP).map(|j| x[j * n..(j + 1) * n].iter().sum::<f64>() / n as f64).collect();
    if vacuum {
        for j in 0..NCOMP {
            let blk = &mut b[j * n..(j + 1) * n];
            let m = blk.iter().sum::<f64>() / n as f64;
            blk.iter_mut().for_each(|v| *v -= m);
        }
    }
    let mass: Vec<f64> = rho_new.iter().map(|r| r / dt).collect();
    let mut diag = Vec::with_capacity(NCOMP * n);
    let base = op.diagonal();
    for _ in 0..NCOMP {
        diag.extend(base.iter().zip(&mass).map(|(d, m)| d + m));
    }
    let lambda = s.lambda.values();
    let apply = |y: &[f64], out: &mut [f64]| {
        for j in 0..NCOMP {
            let (yj, oj) = (&y[j * n..(j + 1) * n], &mut out[j * n..(j + 1) * n]);
            for c in 0..n {
                oj[c] = mass[c] * yj[c];
            }
            op.apply_add(yj, oj);
        }
        add_second_viscosity(&grid, lambda, y, out);
    };
    pcg(apply, &diag, &b, &mut x, 10 * n)?;
    if vacuum {
        for j in 0..NCOMP {
            let blk = &mut x[j * n..(j + 1) * n];
            let shift = means_before[j] - blk.iter().sum::<f64>() / n as f64;
            blk.iter_mut().for_each(|v| *v += shift);
        }
    }
    let u = VectorField::new(grid, x.chunks(n).map(|c| c.to_vec()).collect())?;
    Ok(SystemRunState {
        u,
        transport,
        mu: s.mu.clone(),
        lambda: s.lambda.clone(),
        nu,
        kappa: s.kappa,
        f,
        g,
        t,
        forcing: s.forcing.clone(),
    })
}

/// `Σ ρ φ(|u|) h^dim`.
fn phi_energy(rho: &ScalarField, u: &VectorField, phi: &ConvexTestFunction) -> (f64, f64) {
    let (mut s, mut a) = (0.0, 0.0);
    for (c, r) in rho.values().iter().enumerate() {
        let e = r * phi.value(u.norm_at(c));
        s += e;
        a += e.abs();
    }
    let vol = rho.grid().cell_volume();
    (s * vol, a * vol)
}

/// Residual of the system energy inequality over one step:
///
/// `Δ∫ρφ(|u|) + dt·Σ_f ν_f Δw·Δu/h² − dt·(F-term + G-term + cross term)`
///
/// with `w = (φ′(|u|)/|u|) u`. The face form of the ν term is the discrete
/// counterpart of `∫ν(φ′/|u|)|∇u|² + ∫ν(φ″ − φ′/|u|)|∇|u||²`, and the cross
/// term `−Σ λ (div w − (φ′/|u|) div u) div u` that of
/// `−∫λ(φ″ − φ′/|u|)(u·∇|u|/|u|) div u`.
pub fn system_energy_residual(
    before: &SystemRunState,
    after: &SystemRunState,
    dt: f64,
    phi: &ConvexTestFunction,
) -> Result<EnergyResidual> {
    phi.check_system()?;
    if before.grid() != after.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *after.grid();
    let n = grid.len();
    let vol = grid.cell_volume();
    let (e0, a0) = phi_energy(before.rho(), &before.u, phi);
    let (e1, a1) = phi_energy(after.rho(), &after.u, phi);

    let mag = after.u.magnitude();
    let ratio: Vec<f64> = mag.values().iter().map(|&y| phi.ratio(y)).collect();
    let w: Vec<Vec<f64>> = after.u.components().iter().map(|comp| comp.iter().zip(&ratio).map(|(a, g)| a * g).collect()).collect();

    let nu_op = Diffusion::new(&after.nu, 1.0);
    let dissipation = dt * w.iter().zip(after.u.components()).map(|(wj, uj)| nu_op.form(wj, uj)).sum::<f64>();

    let u_flat = after.u.components().concat();
    let w_flat = w.concat();
    let du = stacked_divergence(&grid, &u_flat);
    let dw = stacked_divergence(&grid, &w_flat);
    let mut cross = 0.0;
    for c in 0..n {
        if mag.values()[c] < ZERO_MAGNITUDE {
            continue;
        }
        cross -= after.lambda.values()[c] * (dw[c] - ratio[c] * du[c]) * du[c];
    }
    let cross_term = dt * cross * vol;

    let (rf, dg) = system_sources(after.rho(), &after.f, &after.g);
    let (mut sf, mut sg, mut abs_src) = (0.0, 0.0, 0.0);
    for j in 0..NCOMP {
        for c in 0..n {
            sf += w[j][c] * rf[j][c];
            sg += w[j][c] * dg[j][c];
            abs_src += (w[j][c] * rf[j][c]).abs() + (w[j][c] * dg[j][c]).abs();
        }
    }
    let f_term = dt * sf * vol;
    let g_term = dt * sg * vol;
    let residual = e1 - e0 + dissipation - f_term - g_term - cross_term;
    let magnitude = a0 + a1 + dt * abs_src * vol;
    Ok(EnergyResidual { residual, energy_before: e0, energy_after: e1, dissipation, f_term, g_term, cross_term, magnitude })
}

/// `Σ g [2µ|∇u|² + λ(div u)² − ν|∇u|²] h^dim` with centred cell gradients and
/// weight `g ≥ 0`. Equals `Σ g λ[(div u)² − 3|∇u|²] h^dim`, nonnegative
/// whenever `λ ≤ 0`.
pub fn quadratic_form_gap(u: &VectorField, mu: &ScalarField, lambda: &ScalarField, weight: &ScalarField) -> f64 {
    let grad2 = gradient_sq(u);
    let div = divergence(u);
    let mut s = 0.0;
    for c in 0..u.grid().len() {
        let (m, l, g) = (mu.values()[c], lambda.values()[c], weight.values()[c]);
        let nu = 2.0 * m + 3.0 * l;
        s += g * (2.0 * m * grad2.values()[c] + l * div.values()[c].powi(2) - nu * grad2.values()[c]);
    }
    s * u.grid().cell_volume()
}

/// Output of [`run_system`].
#[derive(Debug, Clone)]
pub struct SystemRun {
    pub snapshots: Vec<SystemRunState>,
    pub residuals: Vec<ResidualRecord>,
    pub extrema: Vec<StepExtrema>,
    pub steps: usize,
}

impl SystemRun {
    pub fn final_state(&self) -> &SystemRunState {
        self.snapshots.last().expect("run keeps the initial state")
    }

    pub fn all_residuals_pass(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let first = &self.snapshots[0];
        let times = self.snapshots.iter().map(|s| s.t).collect();
        let rho = self.snapshots.iter().map(|s| s.rho().clone()).collect();
        let u = self.snapshots.iter().map(|s| s.u.clone()).collect();
        Trajectory::new(times, rho, u, first.nu.clone())?.with_second_viscosity(first.lambda.clone(), first.kappa)
    }
}

fn extrema(step: usize, t: f64, u: &VectorField) -> StepExtrema {
    let comps = u.components();
    let min = comps.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let max = comps.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    StepExtrema { step, t, min, max, sup_abs: u.max_abs() }
}

/// Runs from `initial` to `control.t_final`, checking the system energy
/// inequality for every function in `battery` at every step.
pub fn run_system(initial: SystemRunState, control: &RunControl, battery: &[ConvexTestFunction]) -> Result<SystemRun> {
    control.validate()?;
    for phi in battery {
        phi.check_system()?;
    }
    let mut run = SystemRun {
        extrema: vec![extrema(0, initial.t, &initial.u)],
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
        let mut next = advance_velocity(&cur, dt)?;
        step += 1;
        let last = next.t >= control.t_final || control.t_final - next.t <= 1e-12 * control.t_final;
        if last {
            next.t = control.t_final;
            next.transport.t = control.t_final;
        }
        for phi in battery {
            let r = system_energy_residual(&cur, &next, dt, phi)?;
            run.residuals.push(ResidualRecord {
                step,
                t: next.t,
                phi_label: phi.label().to_string(),
                residual: r.residual,
                scale: r.scale(),
                cross_term: r.cross_term.abs(),
                pass: r.passes(),
            });
        }
        run.extrema.push(extrema(step, next.t, &next.u));
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
