use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pks::evolution::OutcomeKind;
use pks::harness::{self, bracket_critical_mass, parse_config, render_config, run_scenario, BracketOptions};
use pks::profile::{shoot_profile, SharpConstants, StationaryProfile};
use pks::{Error, Result};

#[derive(Parser)]
#[command(name = "pks", version, about = "Radial porous-medium Keller-Segel laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shoot the stationary profile and print the sharp constants.
    Profile {
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// Central height V(0); the unit-support normalization is reported too.
        #[arg(long, default_value_t = 1.0)]
        height: f64,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Run one scenario and write its CSV.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Run even when the initial data is not ordered with the barrier.
        #[arg(long)]
        force: bool,
    },
    /// Bisect the total mass between a bounded and a blowing-up run.
    Bracket {
        #[command(flatten)]
        source: Source,
        /// Lower end, in multiples of the critical mass unless --absolute.
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 8)]
        iters: usize,
        #[arg(long)]
        absolute: bool,
        #[arg(long, default_value_t = 20.0)]
        horizon_factor: f64,
    },
    /// Parse a configuration and print it with defaults filled in.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct Source {
    /// Configuration file; applied on top of --preset when both are given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Extra `section.key=value` lines, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Source {
    fn text(&self) -> Result<String> {
        let mut text = String::new();
        if let Some(name) = &self.preset {
            let preset = harness::preset(name).ok_or_else(|| {
                let names: Vec<_> = harness::PRESETS.iter().map(|(n, _)| *n).collect();
                Error::Validation(format!("unknown preset `{name}` (known: {})", names.join(", ")))
            })?;
            text.push_str(preset);
        }
        if let Some(path) = &self.config {
            text.push_str(&std::fs::read_to_string(path)?);
            text.push('\n');
        }
        if self.preset.is_none() && self.config.is_none() {
            return Err(Error::Validation("give --config or --preset".into()));
        }
        for line in &self.overrides {
            text.push_str(line);
            text.push('\n');
        }
        Ok(text)
    }

    fn load(&self) -> Result<harness::ScenarioConfig> {
        Ok(parse_config(&self.text()?)?)
    }
}

fn profile(d: usize, height: f64, step: Option<f64>) -> Result<i32> {
    let p = match step {
        Some(h) => shoot_profile(d, height, h)?,
        None => shoot_profile(d, height, pks::profile::default_step(d, height))?,
    };
    let unit = StationaryProfile::reference(d)?;
    let k = SharpConstants::reference(d)?;
    println!("d = {d}");
    println!("height = {height}");
    println!("support_radius = {:.14e}", p.support_radius());
    println!("mass = {:.14e}", p.mass());
    println!("stationarity_residual = {:.3e}", p.stationarity_residual());
    println!("unit_support_height = {:.14e}", unit.height());
    println!("c_d = {:.14e}", k.c_d);
    println!("C_star = {:.14e}", k.c_star);
    println!("M_c_star = {:.14e}", k.m_c_star);
    Ok(0)
}

fn simulate(source: &Source, force: bool) -> Result<i32> {
    let cfg = source.load()?;
    let (report, path) = run_scenario(&cfg, force)?;
    let o = &report.outcome;
    println!("scenario = {}", report.name);
    println!("outcome = {:?}", o.kind);
    println!("t_final = {:.10e}", o.t_final);
    println!("steps = {}", o.detail.steps);
    println!("peak_density = {:.10e}", o.detail.peak_density);
    if let Some(r) = o.detail.violation_radius {
        println!("violation_radius = {r:.10e}");
    }
    if !o.detail.message.is_empty() {
        println!("message = {}", o.detail.message);
    }
    for (name, value) in &report.metrics {
        println!("{name} = {value:.10e}");
    }
    println!("csv = {}", path.display());
    if o.kind == OutcomeKind::NumericalFailure {
        eprintln!("error: {}", o.detail.message);
    }
    Ok(report.exit_code())
}

fn bracket(source: &Source, lo: f64, hi: f64, iters: usize, absolute: bool, horizon_factor: f64) -> Result<i32> {
    let cfg = source.load()?;
    let options = BracketOptions {
        horizon_factor,
        ..BracketOptions::default()
    };
    let scale = if absolute {
        1.0
    } else {
        harness::Scenario::prepare(&cfg)?.critical_mass
    };
    let rep = bracket_critical_mass(&cfg, lo * scale, hi * scale, iters, options)?;
    println!("critical_mass = {:.10e}", rep.critical_mass);
    println!("horizon = {:.10e}", rep.horizon);
    for c in &rep.runs {
        println!(
            "mass = {:.10e} ({:.6} critical) {} t = {:.6e} peak_ratio = {:.4e}",
            c.mass,
            c.mass / rep.critical_mass,
            if c.bounded { "bounded" } else { "blow-up" },
            c.t_final,
            c.peak_ratio
        );
    }
    println!("lo = {:.10e} ({:.6} critical)", rep.lo, rep.lo / rep.critical_mass);
    println!("hi = {:.10e} ({:.6} critical)", rep.hi, rep.hi / rep.critical_mass);
    Ok(0)
}

fn validate(source: &Source) -> Result<i32> {
    let cfg = source.load()?;
    harness::Scenario::prepare(&cfg)?;
    print!("{}", render_config(&cfg));
    Ok(0)
}

fn presets(name: Option<&str>) -> Result<i32> {
    match name {
        Some(n) => {
            let text = harness::preset(n).ok_or_else(|| Error::Validation(format!("unknown preset `{n}`")))?;
            print!("{text}");
        }
        None => {
            for (n, _) in harness::PRESETS {
                println!("{n}");
            }
        }
    }
    Ok(0)
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Validation(_) | Error::Domain(_) | Error::Setup(_) | Error::WrongSolver(_) => 4,
        Error::Numerical(_) | Error::Convergence(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Profile { d, height, step } => profile(*d, *height, *step),
        Command::Simulate { source, force } => simulate(source, *force),
        Command::Bracket {
            source,
            lo,
            hi,
            iters,
            absolute,
            horizon_factor,
        } => bracket(source, *lo, *hi, *iters, *absolute, *horizon_factor),
        Command::Validate { source } => validate(source),
        Command::Presets { name } => presets(name.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
