//! Level energies `U_k = sup_{t>T_k} ∫ρ v_k²/2 + ∫_{T_k}^T ∫ ν d_k²` and the
//! per-level report.

use crate::degiorgi::fields::{dk_sq, truncate_magnitude, Derivatives};
use crate::degiorgi::schedule::LevelSchedule;
use crate::error::{Error, Result};
use crate::grid::weighted_l2;
use crate::trajectory::Trajectory;

/// Right-endpoint quadrature weights of the snapshots over `(a, b]`:
/// snapshot `n` stands for `(t_{n−1}, t_n]` (the first one for `(a, t_0]`)
/// and gets the length of its overlap with `(a, b]`.
pub fn interval_weights(times: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut left = a;
    for &t in times {
        let lo = left.max(a);
        let hi = t.min(b);
        out.push(if t > a && hi > lo { hi - lo } else { 0.0 });
        left = t;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelEnergy {
    pub k: usize,
    pub c_k: f64,
    pub t_k: f64,
    pub u_k: f64,
    pub sup_part: f64,
    pub dissipation_part: f64,
}

/// One row of the level-set report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRow {
    pub energy: LevelEnergy,
    /// Space-time measure of `{|u| ≥ 2C_k}` over `t > T_k`.
    pub tail_measure: f64,
    /// `∫_{T_k}^T ∫ v_k²`, the unweighted truncated energy.
    pub truncated_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetReport {
    pub schedule: LevelSchedule,
    pub rows: Vec<LevelRow>,
}

impl LevelSetReport {
    pub fn u(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy.u_k).collect()
    }

    /// First level whose energy is exactly zero.
    pub fn first_zero_level(&self) -> Option<usize> {
        self.rows.iter().find(|r| r.energy.u_k == 0.0).map(|r| r.energy.k)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy.u_k <= w[0].energy.u_k)
    }
}

/// A trajectory together with derivative data of each snapshot.
#[derive(Debug, Clone)]
pub struct LevelAnalysis<'a> {
    pub traj: &'a Trajectory,
    pub derivatives: Vec<Derivatives>,
}

impl<'a> LevelAnalysis<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        let derivatives = std::thread::scope(|scope| {
            let handles: Vec<_> = traj
                .u
                .chunks(traj.u.len().div_ceil(4).max(1))
                .map(|chunk| scope.spawn(move || chunk.iter().map(Derivatives::new).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("derivative worker panicked")).collect()
        });
        Self { traj, derivatives }
    }

    fn window(&self, t_k: f64) -> Result<Vec<f64>> {
        let t_final = self.traj.final_time();
        if !(t_k < t_final) {
            return Err(Error::EmptyWindow { t_k, t_final });
        }
        Ok(interval_weights(&self.traj.times, t_k, f64::INFINITY))
    }

    /// `U` at level `c` over `t > t_start`.
    pub fn energy_at(&self, c: f64, t_start: f64) -> Result<(f64, f64)> {
        let weights = self.window(t_start)?;
        let vol = self.traj.grid().cell_volume();
        let nu = self.traj.nu.values();
        let mut sup_part: f64 = 0.0;
        let mut diss = 0.0;
        for (n, d) in self.derivatives.iter().enumerate() {
            if self.traj.times[n] <= t_start {
                continue;
            }
            let v = truncate_magnitude(&d.magnitude, c);
            sup_part = sup_part.max(0.5 * weighted_l2(&v, &self.traj.rho[n])?);
            if weights[n] > 0.0 {
                let mut s = 0.0;
                for (nu_c, d2) in nu.iter().zip(dk_sq(d, c)) {
                    s += nu_c * d2;
                }
                diss += weights[n] * s * vol;
            }
        }
        Ok((sup_part, diss))
    }

    pub fn level_energy(&self, schedule: &LevelSchedule, k: usize) -> Result<LevelEnergy> {
        let (c_k, t_k) = (schedule.c(k)?, schedule.t(k)?);
        let (sup_part, dissipation_part) = self.energy_at(c_k, t_k)?;
        Ok(LevelEnergy { k, c_k, t_k, u_k: sup_part + dissipation_part, sup_part, dissipation_part })
    }

    /// Space-time measure of `{|u| ≥ level}` and `∫∫ (|u| − c)₊²` over
    /// `t > t_start`.
    pub fn tail(&self, level: f64, c: f64, t_start: f64) -> Result<(f64, f64)> {
        let weights = self.window(t_start)?;
        let vol = self.traj.grid().cell_volume();
        let (mut measure, mut l2) = (0.0, 0.0);
        for (n, d) in self.derivatives.iter().enumerate() {
            if weights[n] == 0.0 {
                continue;
            }
            let (mut count, mut s) = (0usize, 0.0);
            for &m in d.magnitude.values() {
                if m >= level {
                    count += 1;
                }
                let v = (m - c).max(0.0);
                s += v * v;
            }
            measure += weights[n] * count as f64 * vol;
            l2 += weights[n] * s * vol;
        }
        Ok((measure, l2))
    }

    pub fn report(&self, schedule: &LevelSchedule) -> Result<LevelSetReport> {
        let mut rows = Vec::with_capacity(schedule.kmax + 1);
        for k in 0..=schedule.kmax {
            let energy = self.level_energy(schedule, k)?;
            let (tail_measure, truncated_l2) = self.tail(2.0 * energy.c_k, energy.c_k, energy.t_k)?;
            rows.push(LevelRow { energy, tail_measure, truncated_l2 });
        }
        Ok(LevelSetReport { schedule: *schedule, rows })
    }
}

/// `U_k` and its two parts for one level.
pub fn level_energy(traj: &Trajectory, schedule: &LevelSchedule, k: usize) -> Result<LevelEnergy> {
    LevelAnalysis::new(traj).level_energy(schedule, k)
}

/// `U_k`, tail measures and truncated energies for `k = 0..=kmax`.
pub fn analyze(traj: &Trajectory, schedule: &LevelSchedule) -> Result<LevelSetReport> {
    LevelAnalysis::new(traj).report(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degiorgi::schedule::ScheduleKind;
    use crate::grid::{gradient_sq, Grid, ScalarField, VectorField};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn simple_traj(values: impl Fn(f64, [f64; 2]) -> f64, times: &[f64]) -> Trajectory {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let rho: Vec<_> = times.iter().map(|_| ScalarField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin()).unwrap()).collect();
        let theta: Vec<_> = times.iter().map(|&t| ScalarField::from_fn(g, |x| values(t, x)).unwrap()).collect();
        Trajectory::from_scalar(times.to_vec(), rho, &theta, ScalarField::constant(g, 1.5)).unwrap()
    }

    #[test]
    fn weights_cover_window() {
        let w = interval_weights(&[0.0, 0.1, 0.3, 0.6], 0.05, f64::INFINITY);
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 0.05).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 0.55).abs() < 1e-15);
        let w = interval_weights(&[0.0, 0.1, 0.3, 0.6], 0.05, 0.2);
        assert!((w.iter().sum::<f64>() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn constant_field_above_its_level_has_no_energy() {
        let traj = simple_traj(|_, _| 0.7, &[0.0, 0.1, 0.2]);
        let s = LevelSchedule::new(ScheduleKind::ScalarBounded, 1.6, 0.0, 0.5, 4).unwrap();
        assert_eq!(level_energy(&traj, &s, 1).unwrap().u_k, 0.0);
    }

    #[test]
    fn zero_level_is_full_energy() {
        let times = [0.0, 0.05, 0.1, 0.2];
        let f = |t: f64, x: [f64; 2]| (2.0 * PI * x[0]).sin() * (-t).exp() + 0.2;
        let traj = simple_traj(f, &times);
        let s = LevelSchedule::new(ScheduleKind::ScalarBounded, 1.0, 0.0, 0.5, 4).unwrap();
        let e = level_energy(&traj, &s, 0).unwrap();
        // Independent evaluation: sup ∫ρθ²/2 over t > 0 plus Σ Δt ∫µ|∇θ|².
        let g = *traj.grid();
        let mut sup: f64 = 0.0;
        let mut diss = 0.0;
        for n in 1..times.len() {
            let mut kin = 0.0;
            for c in 0..g.len() {
                kin += traj.rho[n].values()[c] * traj.u[n].component(0)[c].powi(2);
            }
            sup = sup.max(0.5 * kin * g.h());
            let gs = gradient_sq(&traj.u[n]);
            diss += (times[n] - times[n - 1]) * 1.5 * gs.values().iter().sum::<f64>() * g.h();
        }
        assert!((e.sup_part - sup).abs() < 1e-13 * sup);
        assert!((e.dissipation_part - diss).abs() < 1e-12 * diss);
    }

    #[test]
    fn empty_window_rejected() {
        let traj = simple_traj(|_, _| 1.0, &[0.0, 0.1]);
        let s = LevelSchedule::new(ScheduleKind::ScalarLayer, 1.0, 0.5, 0.5, 4).unwrap();
        assert!(matches!(level_energy(&traj, &s, 3), Err(Error::EmptyWindow { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn energies_nonincreasing(
            vals in prop::collection::vec(-4.0..4.0f64, 3 * 16 * 4),
            rho in prop::collection::vec(0.0..2.0f64, 16 * 4),
            k_level in 0.5..5.0f64,
            system in any::<bool>(),
            layer in any::<bool>(),
        ) {
            let g = Grid::new(2, 4, 1.0).unwrap();
            let times = vec![0.0, 0.1, 0.25, 0.3];
            let u: Vec<VectorField> = vals.chunks(48).map(|c| VectorField::new(g, c.chunks(16).map(|x| x.to_vec()).collect()).unwrap()).collect();
            let rho: Vec<ScalarField> = rho.chunks(16).map(|c| ScalarField::new(g, c.to_vec()).unwrap()).collect();
            let nu = ScalarField::constant(g, 1.3);
            let traj = Trajectory::new(times, rho, u, nu).unwrap();
            let kind = match (system, layer) {
                (false, false) => ScheduleKind::ScalarBounded,
                (false, true) => ScheduleKind::ScalarLayer,
                (true, false) => ScheduleKind::SystemBounded,
                (true, true) => ScheduleKind::SystemLayer,
            };
            let s = LevelSchedule::new(kind, k_level, 0.2, 0.5, 6).unwrap();
            let rep = analyze(&traj, &s).unwrap();
            prop_assert!(rep.is_nonincreasing(), "{:?}", rep.u());
            for r in &rep.rows {
                prop_assert!(r.energy.sup_part >= 0.0 && r.energy.dissipation_part >= 0.0);
            }
        }
    }
}
