//! Bisection on the total mass between a bounded and a blowing-up run.

use crate::error::{Error, Result};
use crate::evolution::{run_from, OutcomeKind, RunControls, SimulationState};
use crate::harness::config::{InitialData, MassSpec, ScenarioConfig};
use crate::harness::scenario::Scenario;
use crate::radial::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketOptions {
    /// Horizon in units of the collapse time of the initial bracket.
    pub horizon_factor: f64,
    /// A run blows up once its peak reaches this multiple of the initial peak.
    pub peak_factor: f64,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self {
            horizon_factor: 20.0,
            peak_factor: 10.0,
        }
    }
}

/// One classified run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub mass: f64,
    pub bounded: bool,
    pub t_final: f64,
    /// Final peak over initial peak.
    pub peak_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketReport {
    /// Largest mass seen bounded.
    pub lo: f64,
    /// Smallest mass seen blowing up.
    pub hi: f64,
    pub horizon: f64,
    /// `a_min^{d/2}·M_c⋆` of the configuration.
    pub critical_mass: f64,
    /// Every run, sorted by mass.
    pub runs: Vec<Classification>,
}

fn data_radius(cfg: &ScenarioConfig) -> f64 {
    if let Some(b) = &cfg.barrier {
        return b.r0;
    }
    match &cfg.initial {
        InitialData::BarrierScaled { radius: Some(r) } => *r,
        InitialData::GaussianBump { width } => *width,
        InitialData::Annulus { outer, .. } => *outer,
        _ => cfg.grid.r_max,
    }
}

fn template(cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
    if !cfg.initial.takes_total_mass() {
        return Err(Error::Validation(format!(
            "bracketing scales the total mass; initial.kind = {} fixes it",
            cfg.initial.kind_name()
        )));
    }
    let mut t = cfg.clone();
    if let InitialData::BarrierScaled { radius: None } = t.initial {
        t.initial = InitialData::BarrierScaled {
            radius: Some(data_radius(cfg)),
        };
    }
    t.barrier = None;
    t.supersolution = None;
    t.model.mu = None;
    Ok(t)
}

fn classify(template: &ScenarioConfig, mass: f64, horizon: f64, options: BracketOptions) -> Result<Classification> {
    let mut cfg = template.clone();
    cfg.model.total_mass = Some(MassSpec::Absolute(mass));
    let scenario = Scenario::prepare(&cfg)?;
    let params = scenario.model_params()?;
    let controls = RunControls {
        t_end: horizon,
        u_blowup: f64::INFINITY,
        dt_min: 0.0,
        peak_limit: options.peak_factor * scenario.initial_peak,
        cadence: usize::MAX,
        max_steps: u64::MAX,
        r_probe: 0.0,
        track_energy: false,
        comparison_factor: 10.0,
    };
    let (traj, outcome) = run_from(
        SimulationState::new(scenario.initial.clone()),
        &params,
        &scenario.coeffs,
        &scenario.grid,
        scenario.step_config(),
        &controls,
        None,
    )?;
    let bounded = match outcome.kind {
        OutcomeKind::Completed => true,
        OutcomeKind::BlowUp => false,
        _ => {
            return Err(Error::Numerical(format!(
                "classification at mass {mass} ended without a verdict: {}",
                outcome.detail.message
            )))
        }
    };
    let final_peak = traj.rows.last().map_or(outcome.detail.peak_density, |r| r.peak_density);
    Ok(Classification {
        mass,
        bounded,
        t_final: outcome.t_final,
        peak_ratio: final_peak / scenario.initial_peak,
    })
}

/// Horizon `factor·T⋆` with `μ = lo/hi`, `M_c ≈ lo` and the data radius.
pub fn classification_horizon(cfg: &ScenarioConfig, lo: f64, hi: f64, factor: f64) -> f64 {
    let d = cfg.model.d;
    let r0 = data_radius(cfg);
    let mu = lo / hi;
    let a = cfg.coefficients.a_at(r0);
    factor * r0.powi(d as i32) * a * sphere_area(d) / (d as f64 * lo * (mu.powf(-2.0 / d as f64) - 1.0))
}

/// Bisect the total mass of `cfg`'s initial data between `lo` and `hi`.
/// The endpoints are verified concurrently; they must straddle the threshold.
pub fn bracket_critical_mass(
    cfg: &ScenarioConfig,
    lo: f64,
    hi: f64,
    iters: usize,
    options: BracketOptions,
) -> Result<BracketReport> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Validation(format!("need 0 < lo < hi (got lo = {lo}, hi = {hi})")));
    }
    let template = template(cfg)?;
    let critical_mass = Scenario::prepare(&template)?.critical_mass;
    let horizon = classification_horizon(&template, lo, hi, options.horizon_factor);
    let (at_lo, at_hi) = std::thread::scope(|s| {
        let a = s.spawn(|| classify(&template, lo, horizon, options));
        let b = s.spawn(|| classify(&template, hi, horizon, options));
        (a.join(), b.join())
    });
    let at_lo = at_lo.map_err(|_| Error::Internal("classification thread panicked".into()))??;
    let at_hi = at_hi.map_err(|_| Error::Internal("classification thread panicked".into()))??;
    if !at_lo.bounded || at_hi.bounded {
        return Err(Error::Setup(format!(
            "endpoints do not bracket the threshold: mass {lo} {}, mass {hi} {}",
            verdict(&at_lo),
            verdict(&at_hi)
        )));
    }
    let mut runs = vec![at_lo, at_hi];
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let c = classify(&template, mid, horizon, options)?;
        if c.bounded {
            lo = mid;
        } else {
            hi = mid;
        }
        runs.push(c);
    }
    runs.sort_by(|a, b| a.mass.total_cmp(&b.mass));
    Ok(BracketReport {
        lo,
        hi,
        horizon,
        critical_mass,
        runs,
    })
}

fn verdict(c: &Classification) -> &'static str {
    if c.bounded {
        "stays bounded"
    } else {
        "blows up"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    #[test]
    fn fixed_mass_data_cannot_be_bracketed() {
        let cfg = parse_config("model.d = 3\ninitial.kind = barenblatt\n").unwrap();
        let err = bracket_critical_mass(&cfg, 1.0, 2.0, 1, BracketOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn inverted_endpoints_are_rejected() {
        let cfg = parse_config("model.d = 3\n").unwrap();
        assert!(bracket_critical_mass(&cfg, 2.0, 1.0, 1, BracketOptions::default()).is_err());
    }

    #[test]
    fn horizon_matches_collapse_time() {
        let cfg = parse_config("model.d = 3\ninitial.kind = barrier_scaled\ninitial.radius = 1\n").unwrap();
        let sigma = sphere_area(3);
        let h = classification_horizon(&cfg, 100.0, 400.0, 1.0);
        let expect = sigma / (3.0 * 100.0 * (0.25f64.powf(-2.0 / 3.0) - 1.0));
        assert!((h - expect).abs() < 1e-14 * expect);
    }
}
