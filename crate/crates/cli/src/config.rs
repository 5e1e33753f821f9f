//! Experiment configuration: flat INI sections of `key = value` pairs.
//!
//! Loading never stops at the first problem; every violated constraint is
//! collected and reported together.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use vbl_core::degiorgi::{ScheduleKind, SourceExponents};

use crate::scenarios::{self, ScenarioKind};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub t_final: f64,
    pub cfl: f64,
    pub max_dt: f64,
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Adiabatic exponent of the pressure-type forcing.
    pub gamma: f64,
    /// Exponent in `F = f ρ^{−α}`.
    pub forcing_alpha: f64,
    pub forcing_amplitude: f64,
    /// Size of the initial datum.
    pub amplitude: f64,
    /// Density floor added to the transported profile.
    pub floor: f64,
    /// Peak of the transported density profile.
    pub density_peak: f64,
    pub velocity: f64,
    /// Decay power of the peaked initial datum of the tail scenario.
    pub tail_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    /// `λ = −κν/3`, the extreme admissible value.
    Saturated,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientConfig {
    pub mu: f64,
    /// Viscosity on the right half of the domain; equal to `mu` unless a
    /// discontinuous coefficient is wanted.
    pub mu_high: f64,
    pub lambda: LambdaSpec,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSpec {
    /// `K = 2 sup|u₀| + margin`.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegiorgiConfig {
    pub schedule: ScheduleKind,
    pub k_level: LevelSpec,
    pub margin: f64,
    pub t0: f64,
    pub eta: f64,
    pub kmax: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentConfig {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl ExponentConfig {
    pub fn source_exponents(&self) -> SourceExponents {
        SourceExponents { alpha: self.alpha, p: self.p, q: self.q, r: self.r }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Significant digits of CSV floats.
    pub precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionConfig {
    /// `model`, `scalar` or `system`.
    pub preset: String,
    pub a: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub c: f64,
    pub k: f64,
    pub kappa: f64,
    pub eps1: f64,
    pub kmax: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub scenario: ScenarioConfig,
    pub coefficients: CoefficientConfig,
    pub degiorgi: DegiorgiConfig,
    pub exponents: ExponentConfig,
    pub output: OutputConfig,
    pub recursion: RecursionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig { dim: 1, n: 256, length: 1.0 },
            time: TimeConfig { t_final: 0.1, cfl: 0.25, max_dt: 1e-3, snapshot_every: 1 },
            scenario: ScenarioConfig {
                name: "heat_sanity".into(),
                gamma: 1.4,
                forcing_alpha: 0.5,
                forcing_amplitude: 0.0,
                amplitude: 1.0,
                floor: 0.0,
                density_peak: 1.0,
                velocity: 0.0,
                tail_power: 0.25,
            },
            coefficients: CoefficientConfig { mu: 1.0, mu_high: 1.0, lambda: LambdaSpec::Saturated, kappa: 0.25 },
            degiorgi: DegiorgiConfig {
                schedule: ScheduleKind::ScalarBounded,
                k_level: LevelSpec::Auto,
                margin: 0.1,
                t0: 0.1,
                eta: 0.7,
                kmax: 10,
            },
            exponents: ExponentConfig { alpha: 1.0 / 3.0, p: f64::INFINITY, q: f64::INFINITY, r: 2.0 },
            output: OutputConfig { directory: PathBuf::from("vbl-out"), precision: 17 },
            recursion: RecursionConfig {
                preset: "model".into(),
                a: 2.0,
                beta1: 1.5,
                beta2: 2.0,
                c: 1.0,
                k: 10.0,
                kappa: 0.3,
                eps1: 0.95,
                kmax: 200,
            },
        }
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    ("grid", &["dim", "n", "length"]),
    ("time", &["t_final", "cfl", "max_dt", "snapshot_every"]),
    ("scenario", &["name", "gamma", "forcing_alpha", "forcing_amplitude", "amplitude", "floor", "density_peak", "velocity", "tail_power"]),
    ("coefficients", &["mu", "mu_high", "lambda", "kappa"]),
    ("degiorgi", &["schedule", "k_level", "margin", "t0", "eta", "kmax"]),
    ("exponents", &["alpha", "p", "q", "r"]),
    ("output", &["directory", "precision"]),
    ("recursion", &["preset", "a", "beta1", "beta2", "c", "k", "kappa", "eps1", "kmax"]),
];

struct Reader<'a> {
    ini: &'a Ini,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<&'a str> {
        self.ini.section(Some(section)).and_then(|s| s.get(key)).map(str::trim)
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> T {
        match self.raw(section, key) {
            None => default,
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.errors.push(format!("[{section}] {key} = `{v}` is not a valid value"));
                default
            }),
        }
    }
}

/// 1-based line of `key` inside `[section]` (`None` for keys before any
/// header, `key = None` for the header itself).
fn line_of(text: &str, section: Option<&str>, key: Option<&str>) -> usize {
    let mut current: Option<&str> = None;
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim());
            if key.is_none() && current == section {
                return i + 1;
            }
        } else if current == section && key.is_some_and(|k| l.split('=').next().map(str::trim) == Some(k)) {
            return i + 1;
        }
    }
    0
}

fn check_unknown(ini: &Ini, text: &str) -> Vec<String> {
    let mut errors = Vec::new();
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            for (key, _) in props.iter() {
                errors.push(format!("line {}: key `{key}` appears outside any section", line_of(text, None, Some(key))));
            }
            continue;
        };
        match KNOWN.iter().find(|(s, _)| *s == section) {
            None => errors.push(format!("line {}: unknown section [{section}]", line_of(text, Some(section), None))),
            Some((_, keys)) => {
                let keys: BTreeSet<&str> = keys.iter().copied().collect();
                for (key, _) in props.iter() {
                    if !keys.contains(key) {
                        errors.push(format!("line {}: unknown key `{key}` in [{section}]", line_of(text, Some(section), Some(key))));
                    }
                }
            }
        }
    }
    errors
}

/// Line-level shape check run before the INI parser, whose positions for
/// an unterminated section header point past the end of the file.
fn check_lines(text: &str) -> Result<(), ConfigError> {
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with(';') || l.starts_with('#') {
            continue;
        }
        let bad = if l.starts_with('[') {
            (!l.ends_with(']')).then_some("section header must end with `]`")
        } else {
            (!l.contains('=')).then_some("expected `key = value`")
        };
        if let Some(msg) = bad {
            return Err(ConfigError::Parse { line: i + 1, col: 1, msg: msg.into() });
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        check_lines(text)?;
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Parse { line: e.line, col: e.col, msg: e.msg.to_string() })?;
        let mut r = Reader { ini: &ini, errors: check_unknown(&ini, text) };
        let d = Self::default();
        let grid = GridConfig {
            dim: r.get("grid", "dim", d.grid.dim),
            n: r.get("grid", "n", d.grid.n),
            length: r.get("grid", "length", d.grid.length),
        };
        let time = TimeConfig {
            t_final: r.get("time", "t_final", d.time.t_final),
            cfl: r.get("time", "cfl", d.time.cfl),
            max_dt: r.get("time", "max_dt", d.time.max_dt),
            snapshot_every: r.get("time", "snapshot_every", d.time.snapshot_every),
        };
        let scenario = ScenarioConfig {
            name: r.get("scenario", "name", d.scenario.name.clone()),
            gamma: r.get("scenario", "gamma", d.scenario.gamma),
            forcing_alpha: r.get("scenario", "forcing_alpha", d.scenario.forcing_alpha),
            forcing_amplitude: r.get("scenario", "forcing_amplitude", d.scenario.forcing_amplitude),
            amplitude: r.get("scenario", "amplitude", d.scenario.amplitude),
            floor: r.get("scenario", "floor", d.scenario.floor),
            density_peak: r.get("scenario", "density_peak", d.scenario.density_peak),
            velocity: r.get("scenario", "velocity", d.scenario.velocity),
            tail_power: r.get("scenario", "tail_power", d.scenario.tail_power),
        };
        let mu = r.get("coefficients", "mu", d.coefficients.mu);
        let lambda = match r.raw("coefficients", "lambda") {
            None | Some("saturated") => LambdaSpec::Saturated,
            Some(_) => LambdaSpec::Value(r.get("coefficients", "lambda", 0.0)),
        };
        let coefficients = CoefficientConfig {
            mu,
            mu_high: r.get("coefficients", "mu_high", mu),
            lambda,
            kappa: r.get("coefficients", "kappa", d.coefficients.kappa),
        };
        let schedule = match r.raw("degiorgi", "schedule") {
            None => d.degiorgi.schedule,
            Some(s) => s.parse().unwrap_or_else(|_| {
                r.errors.push(format!(
                    "[degiorgi] schedule = `{s}` is not one of {}",
                    ScheduleKind::ALL.map(|k| k.name()).join(", ")
                ));
                d.degiorgi.schedule
            }),
        };
        let k_level = match r.raw("degiorgi", "k_level") {
            None | Some("auto") => LevelSpec::Auto,
            Some(_) => LevelSpec::Value(r.get("degiorgi", "k_level", 1.0)),
        };
        let degiorgi = DegiorgiConfig {
            schedule,
            k_level,
            margin: r.get("degiorgi", "margin", d.degiorgi.margin),
            t0: r.get("degiorgi", "t0", d.degiorgi.t0),
            eta: r.get("degiorgi", "eta", d.degiorgi.eta),
            kmax: r.get("degiorgi", "kmax", d.degiorgi.kmax),
        };
        let exponents = ExponentConfig {
            alpha: r.get("exponents", "alpha", d.exponents.alpha),
            p: r.get("exponents", "p", d.exponents.p),
            q: r.get("exponents", "q", d.exponents.q),
            r: r.get("exponents", "r", d.exponents.r),
        };
        let output = OutputConfig {
            directory: r.get("output", "directory", d.output.directory.clone()),
            precision: r.get("output", "precision", d.output.precision),
        };
        let recursion = RecursionConfig {
            preset: r.get("recursion", "preset", d.recursion.preset.clone()),
            a: r.get("recursion", "a", d.recursion.a),
            beta1: r.get("recursion", "beta1", d.recursion.beta1),
            beta2: r.get("recursion", "beta2", d.recursion.beta2),
            c: r.get("recursion", "c", d.recursion.c),
            k: r.get("recursion", "k", d.recursion.k),
            kappa: r.get("recursion", "kappa", d.recursion.kappa),
            eps1: r.get("recursion", "eps1", d.recursion.eps1),
            kmax: r.get("recursion", "kmax", d.recursion.kmax),
        };
        let cfg = Self { grid, time, scenario, coefficients, degiorgi, exponents, output, recursion };
        let mut errors = r.errors;
        errors.extend(cfg.violations());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Every violated constraint, named after the inequality it breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let kind = match scenarios::find(&self.scenario.name) {
            Some(s) => Some(s.kind),
            None => {
                out.push(format!("unknown scenario `{}`; registry: {}", self.scenario.name, scenarios::names().join(", ")));
                None
            }
        };
        if kind == Some(ScenarioKind::Recursion) {
            out.extend(self.recursion_violations());
            out.extend(self.output_violations());
            return out;
        }
        let g = &self.grid;
        if !(g.dim == 1 || g.dim == 2) {
            out.push(format!("grid dimension must be 1 or 2, got {}", g.dim));
        }
        if g.n < 4 {
            out.push(format!("grid needs n >= 4 cells per axis, got {}", g.n));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            out.push(format!("domain length must be positive, got {}", g.length));
        }
        let t = &self.time;
        if !(t.t_final > 0.0 && t.t_final.is_finite()) {
            out.push(format!("final time must be positive, got {}", t.t_final));
        }
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            out.push(format!("cfl must lie in (0, 1], got {}", t.cfl));
        }
        if !(t.max_dt > 0.0) {
            out.push(format!("max_dt must be positive, got {}", t.max_dt));
        }
        if t.snapshot_every == 0 {
            out.push("snapshot_every must be at least 1".into());
        }
        let s = &self.scenario;
        if !(s.floor >= 0.0 && s.floor.is_finite()) {
            out.push(format!("density floor must be nonnegative, got {}", s.floor));
        }
        if !(s.density_peak > 0.0 && s.density_peak.is_finite()) {
            out.push(format!("density peak must be positive, got {}", s.density_peak));
        }
        if !(s.gamma > 1.0) {
            out.push(format!("pressure law rho^(gamma-1) needs gamma > 1, got {}", s.gamma));
        }
        if !(s.forcing_alpha >= 0.0 && s.forcing_alpha < 1.0) {
            out.push(format!("forcing exponent 0 <= alpha < 1 fails at alpha = {}", s.forcing_alpha));
        }
        if !(s.tail_power > 0.0 && s.tail_power < 1.0) {
            out.push(format!("tail power must lie in (0, 1), got {}", s.tail_power));
        }
        let c = &self.coefficients;
        if !(c.mu >= 1.0) {
            out.push(format!("viscosity floor mu >= 1 fails at mu = {}", c.mu));
        }
        if !(c.mu_high >= 1.0) {
            out.push(format!("viscosity floor mu >= 1 fails at mu_high = {}", c.mu_high));
        }
        let system = kind == Some(ScenarioKind::System);
        if system {
            if !(c.kappa > 0.0 && c.kappa < 0.5) {
                out.push(format!("3|lambda| <= kappa nu requires 0 < kappa < 1/2; fails at kappa = {}", c.kappa));
            }
            if let LambdaSpec::Value(l) = c.lambda {
                let mu_min = c.mu.min(c.mu_high);
                let nu = 2.0 * mu_min + 3.0 * l;
                if l > 0.0 {
                    out.push(format!("only lambda <= 0 is supported, got lambda = {l}"));
                }
                if !(nu >= 1.0) {
                    out.push(format!("nu = 2 mu + 3 lambda >= 1 fails: nu = {nu}"));
                }
                if !(3.0 * l.abs() <= c.kappa * (2.0 * c.mu.max(c.mu_high) + 3.0 * l)) || !(3.0 * l.abs() <= c.kappa * nu) {
                    out.push(format!("3|lambda| <= kappa nu fails at lambda = {l}, kappa = {}", c.kappa));
                }
            }
        }
        let dg = &self.degiorgi;
        if let Some(k) = kind {
            if dg.schedule.is_scalar() != (k == ScenarioKind::Scalar) {
                out.push(format!("schedule {} does not match a {} scenario", dg.schedule.name(), k.name()));
            }
        }
        if let LevelSpec::Value(k) = dg.k_level {
            if !(k > 0.0 && k.is_finite()) {
                out.push(format!("level K must be positive, got {k}"));
            }
        }
        if !(dg.margin > 0.0) {
            out.push(format!("level margin must be positive, got {}", dg.margin));
        }
        if !(dg.eta > 0.0 && dg.eta < 1.0) {
            out.push(format!("eta must lie in (0, 1), got {}", dg.eta));
        }
        if dg.kmax == 0 {
            out.push("kmax must be at least 1".into());
        }
        if dg.schedule.is_layer() && !(dg.t0 > 0.0 && dg.t0 < t.t_final) {
            out.push(format!("time layer needs 0 < t0 < t_final, got t0 = {}", dg.t0));
        }
        out.extend(self.exponents.source_exponents().violations(dg.schedule.is_layer()));
        out.extend(self.output_violations());
        out
    }

    fn output_violations(&self) -> Vec<String> {
        let p = self.output.precision;
        if (1..=17).contains(&p) {
            Vec::new()
        } else {
            vec![format!("csv precision must be 1..=17 significant digits, got {p}")]
        }
    }

    fn recursion_violations(&self) -> Vec<String> {
        let r = &self.recursion;
        let mut out = Vec::new();
        if !["model", "scalar", "system"].contains(&r.preset.as_str()) {
            out.push(format!("recursion preset `{}` is not one of model, scalar, system", r.preset));
        }
        if r.kmax == 0 {
            out.push("recursion kmax must be at least 1".into());
        }
        if let Err(e) = crate::experiment::recursion_params(r) {
            out.push(e.to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse("[scenario]\nname = heat_sanity\n").unwrap();
        assert_eq!(cfg.grid.n, 256);
        assert_eq!(cfg.coefficients.lambda, LambdaSpec::Saturated);
        assert_eq!(cfg.degiorgi.k_level, LevelSpec::Auto);
        assert!(cfg.exponents.p.is_infinite());
    }

    #[test]
    fn reports_every_violation() {
        let text = "[scenario]\nname = barotropic_forcing\n[coefficients]\nkappa = 0.6\n[degiorgi]\nschedule = system_bounded\n\
                    [exponents]\nalpha = 0.5\np = 1\nq = 10\n";
        let Err(ConfigError::Invalid(errs)) = ExperimentConfig::parse(text) else { panic!("accepted") };
        assert!(errs.iter().any(|e| e.contains("0 < kappa < 1/2") && e.contains("0.6")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("p > 1/(1-alpha)") && e.contains("needs p > 2")), "{errs:?}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("[grid]\nn = 64\n[time\nt_final = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err}");
        let err = ExperimentConfig::parse("[grid]\n\nn 64\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let Err(ConfigError::Invalid(errs)) = ExperimentConfig::parse("[grid]\nnn = 3\nn = x\n[bogus]\na = 1\n") else {
            panic!()
        };
        assert!(errs.iter().any(|e| e.contains("`nn`")));
        assert!(errs.iter().any(|e| e.contains("`x`")));
        assert!(errs.iter().any(|e| e.contains("[bogus]")));
    }

    #[test]
    fn unknown_scenario_lists_registry() {
        let Err(ConfigError::Invalid(errs)) = ExperimentConfig::parse("[scenario]\nname = nope\n") else { panic!() };
        assert!(errs[0].contains("heat_sanity") && errs[0].contains("recursion_only"));
    }

    #[test]
    fn layer_needs_r_above_three_halves() {
        let text = "[degiorgi]\nschedule = scalar_layer\nt0 = 0.05\n[exponents]\nr = 1.2\n";
        let Err(ConfigError::Invalid(errs)) = ExperimentConfig::parse(text) else { panic!() };
        assert!(errs.iter().any(|e| e.contains("r > 3/2")));
    }
}
