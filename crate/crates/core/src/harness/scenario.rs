//! Turning a configuration into a run, and the run into CSV rows.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::barrier::{Barrier, FixedSupersolution, OrderingReport};
use crate::diagnostics::{DiagnosticsRow, Energetics, CONCENTRATION_WARNING};
use crate::error::{Error, Result};
use crate::evolution::{
    barenblatt_mass, run_from, BarenblattFixture, DriftMode, Monitor, Outcome, OutcomeKind, RunControls,
    SimulationState, StepConfig,
};
use crate::harness::config::{DriftChoice, Horizon, InitialData, MassSpec, ProbeSpec, ScenarioConfig};
use crate::profile::{critical_mass, SharpConstants, StationaryProfile};
use crate::radial::{
    ball_volume, mass_from_density, sphere_area, Coefficients, MassFunction, ModelParams, RadialDensity, RadialGrid,
};

/// Exact CSV header.
pub const CSV_HEADER: &str =
    "t,peak_density,entropy,potential_energy,free_energy,total_mass,comparison_gap,local_mass_origin";

/// A configuration resolved against its grid and profile, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: RadialGrid,
    pub coeffs: Coefficients,
    pub profile: StationaryProfile,
    pub constants: SharpConstants,
    /// `a_min^{d/2}·M_c⋆` over the grid.
    pub critical_mass: f64,
    /// Initial mass function in original variables.
    pub initial: MassFunction,
    pub t_start: f64,
    /// Mass ratio of the frame the solver runs in.
    pub mu: f64,
    pub barrier: Option<Barrier>,
    pub supersolution: Option<FixedSupersolution>,
    /// End time, original variables.
    pub t_end: f64,
    pub r_probe: f64,
    pub initial_peak: f64,
    /// Blow-up density threshold, original variables.
    pub u_blowup: f64,
}

/// Everything a finished scenario reports.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    /// Outcome with `t_final` in original time.
    pub outcome: Outcome,
    /// Rows in original variables.
    pub rows: Vec<DiagnosticsRow>,
    /// Named scalars in a fixed order.
    pub metrics: Vec<(&'static str, f64)>,
    pub ordering: Option<OrderingReport>,
}

impl ScenarioReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| *k == name).map(|&(_, v)| v)
    }

    /// Process exit code of the outcome.
    pub fn exit_code(&self) -> i32 {
        exit_code(self.outcome.kind)
    }
}

/// 0 Completed, 2 BlowUp, 3 ComparisonViolated, 5 numerical failure.
pub fn exit_code(kind: OutcomeKind) -> i32 {
    match kind {
        OutcomeKind::Completed => 0,
        OutcomeKind::BlowUp => 2,
        OutcomeKind::ComparisonViolated => 3,
        OutcomeKind::NumericalFailure => 5,
    }
}

fn resolve_mass(spec: MassSpec, critical: f64) -> f64 {
    match spec {
        MassSpec::Absolute(m) => m,
        MassSpec::Critical(f) => f * critical,
    }
}

/// Face masses of a uniform density on `[inner, outer]` carrying `mass`.
fn uniform_shell(grid: &RadialGrid, inner: f64, outer: f64, mass: f64) -> MassFunction {
    let d = grid.d();
    let total = ball_volume(d, outer) - ball_volume(d, inner);
    let values = grid
        .faces()
        .iter()
        .map(|&r| {
            let r = r.clamp(inner, outer);
            mass * (ball_volume(d, r) - ball_volume(d, inner)) / total
        })
        .collect();
    MassFunction { values }
}

fn add_masses(a: &MassFunction, b: &MassFunction) -> MassFunction {
    MassFunction {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
    }
}

fn scale_to(mass: MassFunction, target: f64) -> Result<MassFunction> {
    let total = mass.total();
    if !(total > 0.0) {
        return Err(Error::Validation("initial data carries no mass on the grid".into()));
    }
    let s = target / total;
    Ok(MassFunction {
        values: mass.values.iter().map(|v| v * s).collect(),
    })
}

fn check_support(grid: &RadialGrid, radius: f64, what: &str) -> Result<()> {
    if radius > grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::Validation(format!(
            "{what} extends to r = {radius}, beyond grid.r_max = {}",
            grid.r_max()
        )));
    }
    Ok(())
}

impl Scenario {
    pub fn prepare(config: &ScenarioConfig) -> Result<Self> {
        let cfg = config.clone();
        let d = cfg.model.d;
        let grid = if cfg.grid.grading > 1.0 {
            RadialGrid::graded(d, cfg.grid.r_max, cfg.grid.n_cells, cfg.grid.grading)?
        } else {
            RadialGrid::uniform(d, cfg.grid.r_max, cfg.grid.n_cells)?
        };
        let coeffs = cfg.coefficients.clone();
        coeffs.validate(&grid)?;
        let profile = StationaryProfile::reference(d)?;
        let constants = SharpConstants::reference(d)?;
        let a_min = coeffs.a_min_on(&grid);
        let critical = critical_mass(a_min, &constants)?;

        let barrier_mass = cfg
            .barrier
            .as_ref()
            .map(|b| coeffs.a_at(b.r0).powf(d as f64 / 2.0) * profile.mass());
        let given_mass = cfg.model.total_mass.map(|m| resolve_mass(m, critical));
        // Mass of the families that are scaled to it.
        let scaled_mass = match (barrier_mass, given_mass, cfg.model.mu) {
            (Some(mb), None, Some(mu)) => mb / mu,
            (_, Some(m), _) => m,
            (_, None, _) => 0.9 * critical,
        };

        let mut t_start = 0.0;
        let initial = match &cfg.initial {
            InitialData::BarrierScaled { radius } => {
                let radius = radius.or(cfg.barrier.as_ref().map(|b| b.r0)).ok_or_else(|| {
                    Error::Validation("barrier_scaled needs initial.radius or barrier.r0".into())
                })?;
                check_support(&grid, radius, "barrier_scaled data")?;
                profile.mass_function_on(&grid, radius, scaled_mass / profile.mass())
            }
            InitialData::GaussianBump { width } => {
                let u = RadialDensity::from_fn(&grid, |r| (-(r / width).powi(2)).exp())?;
                scale_to(mass_from_density(&u, &grid)?, scaled_mass)?
            }
            InitialData::Annulus { inner, outer } => {
                check_support(&grid, *outer, "annulus")?;
                uniform_shell(&grid, *inner, *outer, scaled_mass)
            }
            InitialData::SpikePlusShell {
                spike_radius,
                spike_mass,
                shell_inner,
                shell_outer,
                shell_mass,
            } => {
                check_support(&grid, *shell_outer, "shell")?;
                let spike = uniform_shell(&grid, 0.0, *spike_radius, resolve_mass(*spike_mass, critical));
                let shell = uniform_shell(&grid, *shell_inner, *shell_outer, resolve_mass(*shell_mass, critical));
                add_masses(&spike, &shell)
            }
            InitialData::Table { knots } => {
                let last = knots.last().map_or(0.0, |k| k.0);
                let table = crate::radial::RadialFunction::Table(knots.clone());
                let u = RadialDensity::from_fn(&grid, |r| {
                    if r > last {
                        0.0
                    } else {
                        crate::radial::eval_coefficient(&table, r)
                    }
                })?;
                let raw = mass_from_density(&u, &grid)?;
                if given_mass.is_some() || barrier_mass.is_some() {
                    scale_to(raw, scaled_mass)?
                } else {
                    raw
                }
            }
            InitialData::Barenblatt { c, t0 } => {
                let fixture = BarenblattFixture::new(d, *c)?;
                check_support(&grid, fixture.support_radius(*t0), "Barenblatt data")?;
                t_start = *t0;
                barenblatt_mass(*t0, &fixture, &grid)?
            }
        };
        initial.validate()?;
        let m0 = initial.total();

        let mu = match (barrier_mass, cfg.model.mu) {
            (Some(mb), _) => {
                let mu = mb / m0;
                if !(mu < 1.0) {
                    return Err(Error::Validation(format!(
                        "total mass {m0} does not exceed the barrier mass {mb}; the barrier needs μ < 1"
                    )));
                }
                mu
            }
            (None, Some(mu)) => mu,
            (None, None) => 1.0,
        };
        let barrier = match (&cfg.barrier, barrier_mass) {
            (Some(b), Some(mb)) => Some(Barrier::new(profile.clone(), &coeffs, b.r0, mu, mb)?),
            _ => None,
        };
        let supersolution = match &cfg.supersolution {
            Some(s) => {
                if mu != 1.0 {
                    return Err(Error::Validation("the fixed supersolution runs in the original frame (μ = 1)".into()));
                }
                Some(FixedSupersolution::fitted(profile.clone(), a_min, &initial, &grid, s.start_radius)?)
            }
            None => None,
        };
        let frame = mu.powf(1.0 - 2.0 / d as f64);
        let t_end = t_start
            + match cfg.time.t_end {
                Horizon::Absolute(t) => t - t_start,
                Horizon::Bound(x) => x * barrier.as_ref().map_or(0.0, Barrier::blow_up_time_bound),
                Horizon::Collapse(x) => x * frame * barrier.as_ref().map_or(0.0, Barrier::collapse_time),
                Horizon::Characteristic(x) => {
                    let radius = supersolution.as_ref().map_or(0.0, FixedSupersolution::radius);
                    x * sphere_area(d) * radius.powi(d as i32) / (d as f64 * a_min * m0)
                }
            };
        if !(t_end >= t_start) {
            return Err(Error::Validation(format!("time.t_end = {t_end} precedes the start time {t_start}")));
        }
        let r_probe = match cfg.output.r_probe {
            ProbeSpec::Absolute(r) => r,
            ProbeSpec::BarrierRadius(x) => x * barrier.as_ref().map_or(0.0, Barrier::r0),
            ProbeSpec::DomainRadius(x) => x * grid.r_max(),
        };
        let initial_peak = crate::radial::density_from_mass(&initial, &grid)?.peak();
        let u_blowup = cfg.time.u_blowup.unwrap_or(cfg.time.blowup_factor * initial_peak);
        Ok(Self {
            config: cfg,
            grid,
            coeffs,
            profile,
            constants,
            critical_mass: critical,
            initial,
            t_start,
            mu,
            barrier,
            supersolution,
            t_end,
            r_probe,
            initial_peak,
            u_blowup,
        })
    }

    /// Original time per unit of solver time, `μ^{1−2/d}`.
    pub fn time_factor(&self) -> f64 {
        self.mu.powf(1.0 - 2.0 / self.grid.d() as f64)
    }

    /// `a(0)^{d/2}·M_c⋆`, the mass that must gather at the origin at blow-up.
    pub fn concentration_threshold(&self) -> f64 {
        self.coeffs.a_at(0.0).powf(self.grid.d() as f64 / 2.0) * self.constants.m_c_star
    }

    pub fn step_config(&self) -> StepConfig {
        let mut sc = StepConfig::for_coefficients(&self.coeffs);
        if let DriftChoice::Fixed(mode) = self.config.time.drift {
            sc.drift = mode;
        }
        sc.cfl = self.config.time.cfl;
        sc
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.grid.d(), self.mu * self.initial.total(), self.mu)
    }

    pub fn ordering(&self) -> Result<Option<OrderingReport>> {
        self.barrier
            .as_ref()
            .map(|b| b.check_initial_ordering(&self.initial, &self.grid))
            .transpose()
    }

    /// Run to completion. With a barrier the initial ordering is checked
    /// first; unless `force` is set an unordered configuration is refused.
    pub fn run(&self, force: bool) -> Result<ScenarioReport> {
        let ordering = self.ordering()?;
        if let Some(rep) = &ordering {
            if !rep.holds && !force {
                return Err(Error::Setup(format!(
                    "initial data is not ordered with the barrier: μ·M(0,r) − M̄(0,r) = {:.6e} at r = {:.6e}; \
                     blow-up is not guaranteed (use --force to run anyway)",
                    rep.worst_margin, rep.worst_radius
                )));
            }
        }
        let mu = self.mu;
        let d = self.grid.d() as f64;
        let frame = self.time_factor();
        let params = self.model_params()?;
        let start = SimulationState::at(
            0.0,
            MassFunction {
                values: self.initial.values.iter().map(|v| v * mu).collect(),
            },
        );
        let controls = RunControls {
            t_end: (self.t_end - self.t_start) / frame,
            u_blowup: mu * self.u_blowup,
            dt_min: self.config.time.dt_min / frame,
            peak_limit: f64::INFINITY,
            cadence: self.config.output.cadence,
            max_steps: u64::MAX,
            r_probe: self.r_probe,
            track_energy: self.config.output.track_energy,
            comparison_factor: 10.0,
        };
        let monitor = match (&self.barrier, &self.supersolution) {
            (Some(b), _) => Some(Monitor::Collapsing(b.clone())),
            (None, Some(s)) => Some(Monitor::Fixed(s.clone())),
            _ => None,
        };
        let (traj, mut outcome) = run_from(
            start,
            &params,
            &self.coeffs,
            &self.grid,
            self.step_config(),
            &controls,
            monitor.as_ref(),
        )?;

        let m = params.m();
        let energy_scale = mu.powf(-m);
        let rows: Vec<DiagnosticsRow> = traj
            .rows
            .iter()
            .map(|r| DiagnosticsRow {
                t: self.t_start + frame * r.t,
                peak_density: r.peak_density / mu,
                entropy: r.entropy * energy_scale,
                potential_energy: r.potential_energy * energy_scale,
                free_energy: r.free_energy * energy_scale,
                total_mass: r.total_mass / mu,
                comparison_gap: r.comparison_gap.map(|g| g / mu),
                local_mass_at_origin: r.local_mass_at_origin / mu,
            })
            .collect();
        outcome.t_final = self.t_start + frame * outcome.t_final;
        outcome.detail.dt_last *= frame;
        outcome.detail.peak_density /= mu;
        if outcome.kind == OutcomeKind::BlowUp && mu != 1.0 {
            outcome.detail.message = format!(
                "peak density {:.6e} with last step {:.3e} in original variables; t_final is a resolution-limited proxy",
                outcome.detail.peak_density, outcome.detail.dt_last
            );
        }

        let mut metrics: Vec<(&'static str, f64)> = vec![
            ("initial_total_mass", self.initial.total()),
            ("critical_mass", self.critical_mass),
            ("mu", mu),
            ("initial_peak_density", self.initial_peak),
            ("u_blowup", self.u_blowup),
            ("t_end", self.t_end),
        ];
        let f0 = rows.first().map_or(0.0, |r| r.free_energy);
        metrics.push(("initial_free_energy", f0));
        if self.config.output.track_energy {
            metrics.push(("max_energy_rise", traj.max_energy_rise * energy_scale));
            metrics.push(("max_energy_rise_at", self.t_start + frame * traj.max_energy_rise_at));
            metrics.push(("energy_tolerance", 1e-8 * (1.0 + f0.abs())));
        }
        let threshold = self.concentration_threshold();
        metrics.push(("concentration_threshold", threshold));
        if let Some(first) = rows.iter().find(|r| r.local_mass_at_origin >= CONCENTRATION_WARNING * threshold) {
            metrics.push(("first_flag_time", first.t));
        }
        if let Some(b) = &self.barrier {
            metrics.push(("collapse_time", frame * b.collapse_time()));
            metrics.push(("blow_up_time_bound", b.blow_up_time_bound()));
            metrics.push(("barrier_mass", b.total_mass()));
        }
        if let Some(rep) = &ordering {
            metrics.push(("ordering_margin", rep.worst_margin));
        }
        if let Some(s) = &self.supersolution {
            metrics.push(("supersolution_radius", s.radius()));
            let a_min = self.coeffs.a_min_on(&self.grid);
            metrics.push((
                "characteristic_time",
                sphere_area(self.grid.d()) * s.radius().powf(d) / (d * a_min * self.initial.total()),
            ));
        }
        if let Some(w) = traj.worst_gap_margin {
            metrics.push(("worst_gap_margin", w / mu));
        }
        if let (InitialData::Barenblatt { c, .. }, Some(state)) = (&self.config.initial, &traj.final_state) {
            let fixture = BarenblattFixture::new(self.grid.d(), *c)?;
            let t = self.t_start + frame * state.t;
            if fixture.support_radius(t) <= self.grid.r_max() {
                let exact = barenblatt_mass(t, &fixture, &self.grid)?;
                metrics.push(("max_relative_mass_error", max_relative_error(&state.mass, &exact, mu)));
            }
        }
        if let Some(state) = &traj.final_state {
            metrics.push(("final_peak_density", crate::radial::density_from_mass(&state.mass, &self.grid)?.peak() / mu));
        }
        Ok(ScenarioReport {
            name: self.config.name.clone(),
            outcome,
            rows,
            metrics,
            ordering,
        })
    }

    /// Free energy of the initial data in original variables.
    pub fn initial_free_energy(&self) -> Result<f64> {
        let params = ModelParams::new(self.grid.d(), self.initial.total(), 1.0)?;
        Ok(Energetics::new(&params, &self.coeffs, &self.grid).evaluate(&self.initial.values)?.free_energy)
    }

    pub fn drift_mode(&self) -> DriftMode {
        self.step_config().drift
    }
}

/// `max |M_h − M|/M` over faces where `M > 0`, with `M_h` scaled by `1/μ`.
pub fn max_relative_error(computed: &MassFunction, exact: &MassFunction, mu: f64) -> f64 {
    computed
        .values
        .iter()
        .zip(&exact.values)
        .filter(|(_, e)| **e > 0.0)
        .map(|(c, e)| (c / mu - e).abs() / e)
        .fold(0.0, f64::max)
}

fn field(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line (without newline); absent values are empty fields.
pub fn format_row(row: &DiagnosticsRow) -> String {
    [
        field(row.t),
        field(row.peak_density),
        field(row.entropy),
        field(row.potential_energy),
        field(row.free_energy),
        field(row.total_mass),
        row.comparison_gap.map(field).unwrap_or_default(),
        field(row.local_mass_at_origin),
    ]
    .join(",")
}

pub fn write_csv(rows: &[DiagnosticsRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", format_row(row))?;
    }
    Ok(())
}

/// Output file for a scenario: `output.path` or `<name>.csv`, moved into
/// `PKS_OUTPUT_DIR` when that variable is set.
pub fn output_path(cfg: &ScenarioConfig, output_dir: Option<&Path>) -> PathBuf {
    let path = cfg
        .output
        .path
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.name)));
    match output_dir {
        Some(dir) => dir.join(path.file_name().map_or_else(|| PathBuf::from("scenario.csv"), PathBuf::from)),
        None => path,
    }
}

/// Run `cfg`, write its CSV, and return the report.
pub fn run_scenario(cfg: &ScenarioConfig, force: bool) -> Result<(ScenarioReport, PathBuf)> {
    let scenario = Scenario::prepare(cfg)?;
    let report = scenario.run(force)?;
    let dir = std::env::var_os("PKS_OUTPUT_DIR").map(PathBuf::from);
    let path = output_path(cfg, dir.as_deref());
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_csv(&report.rows, file)?;
    Ok((report, path))
}
