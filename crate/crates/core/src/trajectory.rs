//! Stored solution snapshots handed from the solvers to the level-set
//! analyzer.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

/// Snapshots of density and unknown at increasing times, together with the
/// (time-independent) dissipation coefficient `ν` and, for systems, the
/// second viscosity `λ` and the ratio bound `κ`.
///
/// Scalar runs store `θ` as a one-component `u`, so `|u| = |θ|` and `ν = µ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<ScalarField>,
    pub u: Vec<VectorField>,
    pub nu: ScalarField,
    pub lambda: Option<ScalarField>,
    pub kappa: Option<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, rho: Vec<ScalarField>, u: Vec<VectorField>, nu: ScalarField) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if rho.len() != times.len() || u.len() != times.len() {
            return Err(Error::InvalidParameter("trajectory lengths differ".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("snapshot times must increase".into()));
        }
        let g = *nu.grid();
        if rho.iter().any(|r| *r.grid() != g) || u.iter().any(|x| *x.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { times, rho, u, nu, lambda: None, kappa: None })
    }

    /// Scalar trajectory with `u = θ`.
    pub fn from_scalar(times: Vec<f64>, rho: Vec<ScalarField>, theta: &[ScalarField], mu: ScalarField) -> Result<Self> {
        let u = theta.iter().map(|t| VectorField::replicate(t, 1)).collect();
        Self::new(times, rho, u, mu)
    }

    pub fn with_second_viscosity(mut self, lambda: ScalarField, kappa: f64) -> Result<Self> {
        if *lambda.grid() != *self.grid() {
            return Err(Error::GridMismatch);
        }
        self.lambda = Some(lambda);
        self.kappa = Some(kappa);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        self.nu.grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is nonempty")
    }

    /// `sup_n max_x |u|` over all snapshots.
    pub fn sup_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, u| m.max(u.max_abs()))
    }
}
