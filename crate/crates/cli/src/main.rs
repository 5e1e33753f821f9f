use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vbl::config::{ConfigError, ExperimentConfig, RecursionConfig};
use vbl::experiment::{self, ExperimentError, OUTPUT_ENV};
use vbl::scenarios;

/// Level-set energy laboratory for degenerate advection-diffusion with vacuum.
#[derive(Parser)]
#[command(name = "vbl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run { config: PathBuf },
    /// Run a config once per density floor, concurrently, and compare.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1e-3,1e-1")]
        floors: Vec<f64>,
    },
    /// List the scenario registry, or print one scenario's config template.
    Scenarios {
        #[arg(long)]
        template: Option<String>,
    },
    /// Iterate a level recursion: a preset (model, scalar, system) or
    /// comma-separated `key=value` parameters (preset, a, beta1, beta2, c, k,
    /// kappa, eps1, kmax).
    Recursion { spec: String },
}

fn parse_recursion(spec: &str) -> Result<RecursionConfig, ConfigError> {
    let mut r = ExperimentConfig::default().recursion;
    if !spec.contains('=') {
        r.preset = spec.trim().to_string();
        return Ok(r);
    }
    let mut errors = Vec::new();
    for pair in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let Some((key, value)) = pair.split_once('=') else {
            errors.push(format!("`{pair}` is not key=value"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let num = value.parse::<f64>();
        match (key, num) {
            ("preset", _) => r.preset = value.to_string(),
            ("kmax", _) => match value.parse() {
                Ok(k) => r.kmax = k,
                Err(_) => errors.push(format!("kmax = `{value}` is not an integer")),
            },
            (_, Err(_)) => errors.push(format!("{key} = `{value}` is not a number")),
            ("a", Ok(x)) => r.a = x,
            ("beta1", Ok(x)) => r.beta1 = x,
            ("beta2", Ok(x)) => r.beta2 = x,
            ("c", Ok(x)) => r.c = x,
            ("k", Ok(x)) => r.k = x,
            ("kappa", Ok(x)) => r.kappa = x,
            ("eps1", Ok(x)) => r.eps1 = x,
            (other, _) => errors.push(format!("unknown recursion parameter `{other}`")),
        }
    }
    if !spec.contains("preset") {
        r.preset = "scalar".into();
    }
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.name = "recursion_only".into();
    cfg.recursion = r;
    errors.extend(cfg.violations());
    if errors.is_empty() {
        Ok(cfg.recursion)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

fn fail(e: ExperimentError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Scenarios { template: None } => {
            print!("{}", scenarios::registry_text());
            ExitCode::SUCCESS
        }
        Command::Scenarios { template: Some(name) } => match scenarios::find(&name) {
            Some(s) => {
                print!("{}", s.template);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown scenario `{name}`; registry: {}", scenarios::names().join(", "));
                ExitCode::from(2)
            }
        },
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            match experiment::run_experiment(&cfg) {
                Ok(o) => {
                    print!("{}", o.summary(&cfg));
                    println!("results in {}", o.dir.display());
                    ExitCode::from(o.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { config, floors } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            match experiment::run_sweep(&cfg, &floors) {
                Ok(s) => {
                    for (f, o) in &s.members {
                        println!("floor {f:e}: sup_(t >= t0)|theta| = {:.6e}", o.sup_after_t0);
                    }
                    println!("{}", s.check.render());
                    ExitCode::from(s.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Recursion { spec } => {
            let r = match parse_recursion(&spec) {
                Ok(r) => r,
                Err(e) => return fail(e.into()),
            };
            let dir = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("vbl-out/recursion"));
            let mut cfg = ExperimentConfig::default();
            cfg.scenario.name = "recursion_only".into();
            cfg.recursion = r;
            match experiment::run_experiment_in(&cfg, &dir) {
                Ok(o) => {
                    print!("{}", o.summary(&cfg));
                    ExitCode::from(o.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
    }
}
