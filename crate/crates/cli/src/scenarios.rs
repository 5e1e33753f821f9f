//! Scenario registry and construction of initial states.

use std::f64::consts::PI;
use std::sync::Arc;

use vbl_core::continuity::{manufactured_pair, PairKind, PairParams, TransportState};
use vbl_core::grid::{Grid, ScalarField, VectorField};
use vbl_core::scalar::{DensityPowerForcing, NoForcing, ScalarForcing, ScalarRunState};
use vbl_core::system::{saturated_lambda, BarotropicForcing, NoSystemForcing, SystemForcing, SystemRunState, NCOMP};
use vbl_core::{Error, Result};

use crate::config::{ExperimentConfig, LambdaSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Scalar,
    System,
    Recursion,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Scalar => "scalar",
            ScenarioKind::System => "system",
            ScenarioKind::Recursion => "recursion",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub kind: ScenarioKind,
    pub description: &'static str,
    /// What the scenario exercises.
    pub hook: &'static str,
    /// A complete configuration that loads cleanly.
    pub template: &'static str,
}

pub const REGISTRY: [Scenario; 6] = [
    Scenario {
        name: "heat_sanity",
        kind: ScenarioKind::Scalar,
        description: "rho = 1, v = 0, mu = 1, no sources: the periodic heat equation",
        hook: "degenerate model reduces to the heat equation; exact solution available",
        template: "\
[grid]
dim = 1
n = 1024
length = 1.0

[time]
t_final = 0.1
cfl = 0.25
max_dt = 1e-4
snapshot_every = 50

[scenario]
name = heat_sanity
amplitude = 1.0

[coefficients]
mu = 1.0

[degiorgi]
schedule = scalar_bounded
k_level = auto
margin = 0.1
kmax = 10

[exponents]
alpha = 0.3333333333333333
p = inf
q = inf
r = 2

[output]
directory = vbl-out/heat_sanity
precision = 17
",
    },
    Scenario {
        name: "vacuum_blob",
        kind: ScenarioKind::Scalar,
        description: "compactly supported density moving through vacuum, source F = f rho^(-alpha)",
        hook: "bounds uniform in the density floor; no degeneration on cavities",
        template: "\
[grid]
dim = 1
n = 256
length = 1.0

[time]
t_final = 0.2
cfl = 0.25
max_dt = 1e-3
snapshot_every = 5

[scenario]
name = vacuum_blob
amplitude = 1.0
velocity = 0.5
floor = 0.0
density_peak = 10.0
forcing_alpha = 0.5
forcing_amplitude = 4.0

[coefficients]
mu = 1.0

[degiorgi]
schedule = scalar_layer
k_level = auto
margin = 0.1
t0 = 0.05
eta = 0.7
kmax = 10

[exponents]
alpha = 0.5
p = inf
q = inf
r = 2

[output]
directory = vbl-out/vacuum_blob
precision = 17
",
    },
    Scenario {
        name: "rough_mu",
        kind: ScenarioKind::Scalar,
        description: "discontinuous viscosity (1 | 4) with a square-wave datum on a translating density",
        hook: "only mu >= 1 is assumed of the viscosity; no regularity",
        template: "\
[grid]
dim = 1
n = 256
length = 1.0

[time]
t_final = 0.1
cfl = 0.25
max_dt = 1e-3
snapshot_every = 5

[scenario]
name = rough_mu
amplitude = 1.0
velocity = 1.0
floor = 0.0

[coefficients]
mu = 1.0
mu_high = 4.0

[degiorgi]
schedule = scalar_bounded
k_level = auto
margin = 0.1
kmax = 10

[exponents]
alpha = 0.3333333333333333
p = inf
q = inf
r = 2

[output]
directory = vbl-out/rough_mu
precision = 17
",
    },
    Scenario {
        name: "barotropic_forcing",
        kind: ScenarioKind::System,
        description: "vector system with G = -rho^(gamma-1) I, saturated second viscosity",
        hook: "pressure term of barotropic compressible flow written as a source",
        template: "\
[grid]
dim = 1
n = 256
length = 1.0

[time]
t_final = 0.05
cfl = 0.25
max_dt = 1e-3
snapshot_every = 2

[scenario]
name = barotropic_forcing
amplitude = 1.0
velocity = 0.5
floor = 0.1
gamma = 1.4

[coefficients]
mu = 1.0
lambda = saturated
kappa = 0.25

[degiorgi]
schedule = system_bounded
k_level = 0.25
kmax = 8

[exponents]
alpha = 0.3333333333333333
p = inf
q = inf
r = 2

[output]
directory = vbl-out/barotropic_forcing
precision = 17
",
    },
    Scenario {
        name: "system_kappa_sweep",
        kind: ScenarioKind::System,
        description: "peaked vector datum on a positive density; tail decay against 2 + log2(1/kappa)",
        hook: "integrability exponent capped by the second-viscosity ratio kappa",
        template: "\
[grid]
dim = 1
n = 512
length = 1.0

[time]
t_final = 0.04
cfl = 0.25
max_dt = 2e-4
snapshot_every = 1

[scenario]
name = system_kappa_sweep
amplitude = 4.0
velocity = 0.5
floor = 0.5
tail_power = 0.6

[coefficients]
mu = 1.0
lambda = saturated
kappa = 0.25

[degiorgi]
schedule = system_bounded
k_level = 0.125
kmax = 8

[exponents]
alpha = 0.3333333333333333
p = inf
q = inf
r = 2

[output]
directory = vbl-out/system_kappa_sweep
precision = 17
",
    },
    Scenario {
        name: "recursion_only",
        kind: ScenarioKind::Recursion,
        description: "no PDE: iterate the saturated level recursions, locate thresholds",
        hook: "model recursion U_k <= 2^(7k/3) K^(-7/3) U_(k-1)^(5/3) and its vector variant",
        template: "\
[scenario]
name = recursion_only

[recursion]
preset = model
k = 10
kmax = 200

[output]
directory = vbl-out/recursion_only
precision = 17
",
    },
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    REGISTRY.iter().find(|s| s.name == name)
}

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|s| s.name).collect()
}

pub fn registry_text() -> String {
    let mut out = String::new();
    for s in &REGISTRY {
        out.push_str(&format!("{:<20} [{}] {}\n{:<20} {}\n", s.name, s.kind.name(), s.description, "", s.hook));
    }
    out
}

pub enum Initial {
    Scalar(ScalarRunState),
    System(SystemRunState),
}

pub fn grid(cfg: &ExperimentConfig) -> Result<Grid> {
    Grid::new(cfg.grid.dim, cfg.grid.n, cfg.grid.length)
}

fn mode(grid: &Grid) -> impl Fn([f64; 2]) -> f64 + '_ {
    let k = 2.0 * PI / grid.length();
    move |x| x.iter().take(grid.dim()).map(|xa| (k * xa).sin()).product()
}

/// Viscosity `mu` on the left half of the domain and `mu_high` on the right.
pub fn viscosity(cfg: &ExperimentConfig, grid: &Grid) -> Result<ScalarField> {
    let c = &cfg.coefficients;
    let half = 0.5 * grid.length();
    ScalarField::from_fn(*grid, |x| if x[0] < half { c.mu } else { c.mu_high })
}

fn transport(cfg: &ExperimentConfig, grid: &Grid, kind: PairKind, radius: f64) -> Result<TransportState> {
    let s = &cfg.scenario;
    let params = PairParams { velocity: [s.velocity, 0.0], radius, floor: s.floor, peak: s.density_peak, ..Default::default() };
    manufactured_pair(kind, &params, grid, 0.0)
}

fn lambda(cfg: &ExperimentConfig, mu: &ScalarField) -> Result<ScalarField> {
    match cfg.coefficients.lambda {
        LambdaSpec::Saturated => saturated_lambda(mu, cfg.coefficients.kappa),
        LambdaSpec::Value(l) => Ok(ScalarField::constant(*mu.grid(), l)),
    }
}

/// Exact heat solution `a e^{−µ dim (2π/L)² t} Π sin(2πx_a/L)` of
/// `heat_sanity`.
pub fn heat_exact(cfg: &ExperimentConfig, t: f64) -> Result<ScalarField> {
    let g = grid(cfg)?;
    let k = 2.0 * PI / g.length();
    let decay = (-cfg.coefficients.mu * g.dim() as f64 * k * k * t).exp();
    let m = mode(&g);
    ScalarField::from_fn(g, |x| cfg.scenario.amplitude * decay * m(x))
}

/// Periodic distance of `x` from the domain centre.
fn distance_from_center(grid: &Grid, x: [f64; 2]) -> f64 {
    let l = grid.length();
    let mut r2 = 0.0;
    for xa in x.iter().take(grid.dim()) {
        let d = xa - 0.5 * l;
        r2 += d * d;
    }
    r2.sqrt()
}

pub fn build(cfg: &ExperimentConfig) -> Result<Initial> {
    let scenario = find(&cfg.scenario.name).ok_or_else(|| Error::UnknownKind(cfg.scenario.name.clone()))?;
    if scenario.kind == ScenarioKind::Recursion {
        return Err(Error::InvalidParameter("recursion_only has no initial state".into()));
    }
    let g = grid(cfg)?;
    let s = &cfg.scenario;
    let mu = viscosity(cfg, &g)?;
    let amp = s.amplitude;
    let m = mode(&g);
    let k = 2.0 * PI / g.length();
    let scalar = |theta: ScalarField, tr: TransportState, forcing: Arc<dyn ScalarForcing>| {
        ScalarRunState::new(theta, tr, mu.clone(), forcing).map(Initial::Scalar)
    };
    let system = |u: VectorField, tr: TransportState, forcing: Arc<dyn SystemForcing>| {
        let l = lambda(cfg, &mu)?;
        SystemRunState::new(u, tr, mu.clone(), l, cfg.coefficients.kappa, forcing).map(Initial::System)
    };
    match scenario.name {
        "heat_sanity" => {
            let tr = TransportState::new(ScalarField::constant(g, 1.0), VectorField::zeros(g, g.dim()), 0.0)?;
            scalar(ScalarField::from_fn(g, |x| amp * m(x))?, tr, Arc::new(NoForcing))
        }
        "vacuum_blob" => {
            let tr = transport(cfg, &g, PairKind::VacuumBlob, 0.25)?;
            let theta = ScalarField::from_fn(g, |x| amp * x.iter().take(g.dim()).map(|xa| (k * xa).cos()).product::<f64>())?;
            let forcing = DensityPowerForcing { alpha: s.forcing_alpha, amplitude: s.forcing_amplitude };
            scalar(theta, tr, Arc::new(forcing))
        }
        "rough_mu" => {
            let tr = transport(cfg, &g, PairKind::Translate, 0.25)?;
            let theta = ScalarField::from_fn(g, |x| amp * (k * x[0]).sin().signum())?;
            scalar(theta, tr, Arc::new(NoForcing))
        }
        "barotropic_forcing" => {
            let tr = transport(cfg, &g, PairKind::Translate, 0.25)?;
            let u = VectorField::from_fn(g, NCOMP, |x| {
                let c = (k * x[0]).cos();
                vec![amp * m(x), 0.5 * amp * c, 0.25 * amp]
            })?;
            system(u, tr, Arc::new(BarotropicForcing { gamma: s.gamma }))
        }
        "system_kappa_sweep" => {
            let tr = transport(cfg, &g, PairKind::VacuumBlob, 0.25)?;
            let delta = 2.0 * g.h();
            let u = VectorField::from_fn(g, NCOMP, |x| {
                let bump = amp * (delta / (distance_from_center(&g, x) + delta)).powf(s.tail_power);
                vec![bump, 0.5 * bump, 0.0]
            })?;
            system(u, tr, Arc::new(NoSystemForcing))
        }
        other => Err(Error::UnknownKind(other.to_string())),
    }
}
