//! Explicit conservative time stepping of the mass function.
//!
//! For the frame with mass ratio `μ` the state obeys
//!
//! ```text
//! ∂_t M = σ r^{d−1} ∂_r(u^m) − σ r^{d−1} u·v,    v = μ^{1−2/d} ∂_r c,
//! ```
//!
//! with `u = ∂_r M/(σ r^{d−1})`. Each face carries one value of `M`; the
//! update adds `dt` times the flux through that face, so `M(0) = 0` and
//! `M(r_max)` never change. Diffusion uses centered differences of `u^m`
//! between neighbouring cell centers. The drift carries a face density that
//! keeps discrete steady states in exact pressure balance, bounded by the
//! upwind cell.

use crate::barrier::{Barrier, FixedSupersolution};
use crate::chemo::solve_gamma_positive;
use crate::diagnostics::{DiagnosticsRow, Energetics};
use crate::error::{Error, Result};
use crate::radial::{critical_exponent, Coefficients, MassFunction, ModelParams, RadialDensity, RadialGrid};

/// Time, mass function and step bookkeeping of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    pub mass: MassFunction,
    pub dt_last: f64,
    pub step_count: u64,
}

impl SimulationState {
    pub fn new(mass: MassFunction) -> Self {
        Self {
            t: 0.0,
            mass,
            dt_last: 0.0,
            step_count: 0,
        }
    }

    pub fn at(t: f64, mass: MassFunction) -> Self {
        Self { t, ..Self::new(mass) }
    }
}

/// Source of the drift velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    /// `v = −μ^{−2/d} M/(σ r^{d−1} a)`, valid for `γ ≡ 0`.
    Closed,
    /// `v = μ^{1−2/d} ∂_r c` from the boundary-value solve, source `μ^{−1}u`.
    Field,
    /// Pure porous-medium diffusion.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub cfl: f64,
    pub drift: DriftMode,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            drift: DriftMode::Closed,
        }
    }
}

impl StepConfig {
    /// Closed drift when `γ ≡ 0`, field drift otherwise.
    pub fn for_coefficients(coeffs: &Coefficients) -> Self {
        Self {
            drift: if coeffs.gamma_is_zero() {
                DriftMode::Closed
            } else {
                DriftMode::Field
            },
            ..Self::default()
        }
    }
}

/// Most halvings tried when a trial step breaks monotonicity.
const MAX_HALVINGS: usize = 60;

/// Reusable stepping machinery for one grid and coefficient set.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: RadialGrid,
    coeffs: Coefficients,
    params: ModelParams,
    config: StepConfig,
    m: f64,
    /// `A_i/(ρ_i − ρ_{i−1})` at interior faces.
    conductance: Vec<f64>,
    /// `μ^{−2/d}/a(r_i)` at faces.
    drift_coef: Vec<f64>,
    /// `1/h²` and `1/(h·A_i)` with `h` the smaller adjacent cell width.
    inv_h2: Vec<f64>,
    inv_h_area: Vec<f64>,
    inv_vol: Vec<f64>,
    halvings: u64,
    u: Vec<f64>,
    um: Vec<f64>,
    um1: Vec<f64>,
    inflow: Vec<f64>,
    flux: Vec<f64>,
    trial: Vec<f64>,
}

/// `m`-th power and `(m−1)`-th power of `u ≥ 0`, with the common cases done
/// by roots instead of `powf`.
#[inline]
fn powers(d: usize, m: f64, u: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    let q = match d {
        3 => u.cbrt(),
        4 => u.sqrt(),
        6 => {
            let c = u.cbrt();
            c * c
        }
        _ => u.powf(m - 1.0),
    };
    (u * q, q)
}

impl Stepper {
    pub fn new(params: &ModelParams, coeffs: &Coefficients, grid: &RadialGrid, config: StepConfig) -> Result<Self> {
        if params.d() != grid.d() {
            return Err(Error::Validation("model and grid dimensions differ".into()));
        }
        if !(config.cfl > 0.0 && config.cfl <= 1.0) {
            return Err(Error::Validation(format!("cfl must lie in (0, 1] (got {})", config.cfl)));
        }
        if config.drift == DriftMode::Closed && !coeffs.gamma_is_zero() {
            return Err(Error::WrongSolver("closed drift requires γ ≡ 0; use the field drift".into()));
        }
        coeffs.validate(grid)?;
        let n = grid.n_cells();
        let faces = grid.faces();
        let centers = grid.centers();
        let areas = grid.face_areas();
        let factor = params.drift_factor();
        let mut conductance = vec![0.0; n + 1];
        let mut inv_h2 = vec![0.0; n + 1];
        let mut inv_h_area = vec![0.0; n + 1];
        for i in 1..n {
            let h = (faces[i + 1] - faces[i]).min(faces[i] - faces[i - 1]);
            inv_h2[i] = 1.0 / (h * h);
            inv_h_area[i] = 1.0 / (h * areas[i]);
            conductance[i] = areas[i] / (centers[i] - centers[i - 1]);
        }
        let drift_coef = faces.iter().map(|&r| factor / coeffs.a_at(r)).collect();
        Ok(Self {
            grid: grid.clone(),
            coeffs: coeffs.clone(),
            params: *params,
            config,
            m: critical_exponent(grid.d()),
            conductance,
            drift_coef,
            inv_h2,
            inv_h_area,
            halvings: 0,
            inv_vol: grid.shell_volumes().iter().map(|v| 1.0 / v).collect(),
            u: vec![0.0; n],
            um: vec![0.0; n],
            um1: vec![0.0; n],
            inflow: vec![0.0; n + 1],
            flux: vec![0.0; n + 1],
            trial: vec![0.0; n + 1],
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Load densities and their powers; returns the peak density.
    fn load(&mut self, mass: &[f64]) -> f64 {
        let d = self.grid.d();
        let mut peak: f64 = 0.0;
        for j in 0..self.u.len() {
            let u = ((mass[j + 1] - mass[j]) * self.inv_vol[j]).max(0.0);
            self.u[j] = u;
            let (um, um1) = powers(d, self.m, u);
            self.um[j] = um;
            self.um1[j] = um1;
            peak = peak.max(u);
        }
        peak
    }

    /// `−A_i v_i` at each face: the drift's inward volume rate.
    fn load_drift(&mut self, mass: &[f64]) -> Result<()> {
        let n = self.u.len();
        match self.config.drift {
            DriftMode::Off => self.inflow.iter_mut().for_each(|g| *g = 0.0),
            DriftMode::Closed => {
                for i in 1..n {
                    self.inflow[i] = self.drift_coef[i] * mass[i];
                }
            }
            DriftMode::Field => {
                let density = RadialDensity { values: self.u.clone() };
                let mu = self.params.mu();
                let field = solve_gamma_positive(&density, &self.coeffs, &self.grid, 1.0 / mu)?;
                let kappa = mu.powf(1.0 - 2.0 / self.grid.d() as f64);
                let areas = self.grid.face_areas();
                for i in 1..n {
                    self.inflow[i] = -areas[i] * kappa * field.dc_dr[i];
                }
            }
        }
        self.inflow[0] = 0.0;
        self.inflow[n] = 0.0;
        Ok(())
    }

    /// Stable step size for the loaded state.
    fn stable_dt(&self) -> f64 {
        let n = self.u.len();
        let mut diff_rate: f64 = 0.0;
        let mut drift_rate: f64 = 0.0;
        for i in 1..n {
            let diff = self.um1[i - 1].max(self.um1[i]);
            diff_rate = diff_rate.max(diff * self.inv_h2[i]);
            if self.u[i] > 0.0 || self.u[i - 1] > 0.0 {
                drift_rate = drift_rate.max(self.inflow[i].abs() * self.inv_h_area[i]);
            }
        }
        let d = self.grid.d() as f64;
        let rate = (2.0 * self.m * d * diff_rate).max(drift_rate);
        if rate > 0.0 {
            self.config.cfl / rate
        } else {
            f64::INFINITY
        }
    }

    fn load_fluxes(&mut self) {
        let n = self.u.len();
        self.flux[0] = 0.0;
        self.flux[n] = 0.0;
        for i in 1..n {
            let diffusion = self.conductance[i] * (self.um[i] - self.um[i - 1]);
            let g = self.inflow[i];
            let drift = if g == 0.0 {
                0.0
            } else {
                g * self.face_density(i, g > 0.0)
            };
            self.flux[i] = diffusion + drift;
        }
    }

    /// Density carried by the drift through face `i`.
    ///
    /// Between two occupied cells this is the mean
    /// `ū = (m−1)/m·Δ(u^m)/Δ(u^{m−1})`, for which `Δ(u^m) = ū·Δp` holds
    /// exactly with `p = m/(m−1)·u^{m−1}`. A discrete steady state then
    /// balances pressure and drift the same way the continuous one does. The
    /// mean is capped at twice the upwind cell so that a thin cell cannot be
    /// drained faster than it is filled. Next to vacuum the upwind value is
    /// used.
    #[inline]
    fn face_density(&self, i: usize, inward: bool) -> f64 {
        let (inner, outer) = (self.u[i - 1], self.u[i]);
        let donor = if inward { outer } else { inner };
        if inner <= 0.0 || outer <= 0.0 {
            return donor;
        }
        let dq = self.um1[i] - self.um1[i - 1];
        let mean = if dq.abs() > 1e-5 * self.um1[i].max(self.um1[i - 1]) {
            (self.m - 1.0) / self.m * (self.um[i] - self.um[i - 1]) / dq
        } else {
            0.5 * (inner + outer)
        };
        mean.min(2.0 * donor)
    }

    /// Advance by one stable step, never past `t_cap`. Returns the accepted
    /// step size and the size the stability rule proposed.
    pub fn advance(&mut self, state: &mut SimulationState, t_cap: f64) -> Result<(f64, f64)> {
        let n = self.u.len();
        self.load(&state.mass.values);
        self.load_drift(&state.mass.values)?;
        let proposed = self.stable_dt();
        if proposed.is_nan() {
            return Err(Error::Numerical("step size is NaN".into()));
        }
        self.load_fluxes();
        let remaining = t_cap - state.t;
        let mut dt = proposed.min(remaining);
        if !(dt > 0.0) {
            return Err(Error::Numerical(format!("no admissible step at t = {}", state.t)));
        }
        let mass = &state.mass.values;
        let total = mass[n];
        let slack = 4.0 * f64::EPSILON * total;
        for _ in 0..MAX_HALVINGS {
            self.trial[0] = 0.0;
            self.trial[n] = total;
            let mut ok = true;
            for i in 1..n {
                let v = mass[i] + dt * self.flux[i];
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite mass at face {i}, t = {}", state.t)));
                }
                self.trial[i] = v;
            }
            for i in 1..=n {
                let (lo, hi) = (self.trial[i - 1], self.trial[i]);
                if hi < lo {
                    if lo - hi <= slack {
                        // Round-off in an empty cell.
                        if i < n {
                            self.trial[i] = lo;
                        } else {
                            self.trial[i - 1] = hi;
                        }
                    } else {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && self.trial[n - 1] <= total && self.trial[1] >= 0.0 {
                std::mem::swap(&mut state.mass.values, &mut self.trial);
                state.t = if dt == remaining { t_cap } else { state.t + dt };
                state.dt_last = dt;
                state.step_count += 1;
                debug_assert!(state.mass.values.windows(2).all(|w| w[1] >= w[0]));
                return Ok((dt, proposed));
            }
            dt *= 0.5;
            self.halvings += 1;
        }
        Err(Error::Numerical(format!(
            "monotonicity could not be kept at t = {} after {MAX_HALVINGS} halvings",
            state.t
        )))
    }

    /// Trial steps rejected for breaking monotonicity so far.
    pub fn halvings(&self) -> u64 {
        self.halvings
    }

    /// Peak cell density of a mass function on this grid.
    pub fn peak_density(&self, mass: &[f64]) -> f64 {
        mass.windows(2)
            .zip(&self.inv_vol)
            .map(|(w, iv)| (w[1] - w[0]) * iv)
            .fold(0.0, f64::max)
    }
}

/// One explicit step from `state` with the default configuration for the
/// coefficients.
pub fn step(
    state: &SimulationState,
    params: &ModelParams,
    coeffs: &Coefficients,
    grid: &RadialGrid,
) -> Result<SimulationState> {
    let mut stepper = Stepper::new(params, coeffs, grid, StepConfig::for_coefficients(coeffs))?;
    let mut next = state.clone();
    stepper.advance(&mut next, f64::INFINITY)?;
    Ok(next)
}

/// Comparison function watched during a run.
#[derive(Debug, Clone)]
pub enum Monitor {
    /// Ordering `M ≥ M̄(t)` inside `R(t)`, while `t < T⋆`.
    Collapsing(Barrier),
    /// Ordering `M ≤ M̄` on the initially ordered faces.
    Fixed(FixedSupersolution),
}

/// Stopping rules, sampling, and monitor tolerance of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunControls {
    pub t_end: f64,
    /// Density threshold for declaring blow-up.
    pub u_blowup: f64,
    /// Step size at or below which the run stops.
    pub dt_min: f64,
    /// Peak density that ends the run as blow-up whatever the step size;
    /// used when classifying runs as bounded or not.
    pub peak_limit: f64,
    /// Emit a row every `cadence` steps (and at the end).
    pub cadence: usize,
    pub max_steps: u64,
    /// Radius of the ball whose mass is recorded as `local_mass_at_origin`.
    pub r_probe: f64,
    /// Evaluate the free energy after every step, not only at rows.
    pub track_energy: bool,
    /// The monitor tolerates `−factor·max_j(M_{j+1} − M_j)`, i.e. the factor
    /// times `Δr·max ∂_r M` on a uniform grid.
    pub comparison_factor: f64,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            u_blowup: f64::INFINITY,
            dt_min: 1e-12,
            peak_limit: f64::INFINITY,
            cadence: 100,
            max_steps: 50_000_000,
            r_probe: 0.0,
            track_energy: false,
            comparison_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Completed,
    BlowUp,
    ComparisonViolated,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDetail {
    pub peak_density: f64,
    pub dt_last: f64,
    pub steps: u64,
    /// Radius of the worst comparison gap when the ordering broke.
    pub violation_radius: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub t_final: f64,
    pub detail: OutcomeDetail,
}

/// Sampled rows plus per-step summaries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub rows: Vec<DiagnosticsRow>,
    /// Largest `F_{k+1} − F_k` over steps taken below the blow-up threshold
    /// (only with `track_energy`).
    pub max_energy_rise: f64,
    /// Time of the step attaining `max_energy_rise`.
    pub max_energy_rise_at: f64,
    pub energy_checks: u64,
    /// Smallest `gap + tolerance` over sampled rows with an active monitor.
    pub worst_gap_margin: Option<f64>,
    pub final_state: Option<SimulationState>,
}

/// Gap, its radius and the tolerance it is held to.
type GapCheck = (f64, f64, f64);

struct Sampler<'a> {
    energetics: Energetics,
    grid: &'a RadialGrid,
    monitor: Option<&'a Monitor>,
    controls: &'a RunControls,
}

impl Sampler<'_> {
    fn tolerance(&self, mass: &[f64]) -> f64 {
        let cell = mass.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        self.controls.comparison_factor * cell
    }

    fn row(&self, state: &SimulationState, peak: f64) -> Result<(DiagnosticsRow, Option<GapCheck>)> {
        let e = self.energetics.evaluate(&state.mass.values)?;
        let gap = match self.monitor {
            Some(Monitor::Collapsing(b)) if state.t < b.collapse_time() => {
                let g = b.comparison_gap(&state.mass, self.grid, state.t)?;
                g.gap.is_finite().then_some((g.gap, g.radius))
            }
            Some(Monitor::Fixed(s)) => {
                let g = s.comparison_gap(&state.mass, self.grid);
                Some((g.gap, g.radius))
            }
            _ => None,
        };
        let check = gap.map(|(g, r)| (g, r, self.tolerance(&state.mass.values)));
        Ok((
            DiagnosticsRow {
                t: state.t,
                peak_density: peak,
                entropy: e.entropy,
                potential_energy: e.potential_energy,
                free_energy: e.free_energy,
                total_mass: state.mass.total(),
                comparison_gap: gap.map(|(g, _)| g),
                local_mass_at_origin: state.mass.at(self.grid, self.controls.r_probe),
            },
            check,
        ))
    }
}

/// Advance `initial` until `t_end`, blow-up, a broken ordering, or failure.
pub fn run(
    initial: MassFunction,
    params: &ModelParams,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    config: StepConfig,
    controls: &RunControls,
    monitor: Option<&Monitor>,
) -> Result<(Trajectory, Outcome)> {
    run_from(SimulationState::new(initial), params, coeffs, grid, config, controls, monitor)
}

/// As [`run`], starting from an arbitrary state.
pub fn run_from(
    start: SimulationState,
    params: &ModelParams,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    config: StepConfig,
    controls: &RunControls,
    monitor: Option<&Monitor>,
) -> Result<(Trajectory, Outcome)> {
    if start.mass.values.len() != grid.n_cells() + 1 {
        return Err(Error::Validation("initial mass function does not match the grid".into()));
    }
    start.mass.validate()?;
    if !(controls.t_end >= start.t) {
        return Err(Error::Validation(format!("t_end = {} is before the start time", controls.t_end)));
    }
    let cadence = controls.cadence.max(1) as u64;
    let mut stepper = Stepper::new(params, coeffs, grid, config)?;
    let sampler = Sampler {
        energetics: Energetics::new(params, coeffs, grid),
        grid,
        monitor,
        controls,
    };
    let mut traj = Trajectory::default();
    let mut state = start;
    let mut peak = stepper.peak_density(&state.mass.values);
    let mut last_energy = if controls.track_energy {
        Some(sampler.energetics.evaluate(&state.mass.values)?.free_energy)
    } else {
        None
    };

    let outcome = |kind, state: &SimulationState, peak, violation_radius, message: String| Outcome {
        kind,
        t_final: state.t,
        detail: OutcomeDetail {
            peak_density: peak,
            dt_last: state.dt_last,
            steps: state.step_count,
            violation_radius,
            message,
        },
    };

    // Row at the start; the ordering is checked on every row.
    macro_rules! sample {
        () => {{
            let (row, check) = sampler.row(&state, peak)?;
            traj.rows.push(row);
            if let Some((gap, radius, tol)) = check {
                let margin = gap + tol;
                traj.worst_gap_margin = Some(traj.worst_gap_margin.map_or(margin, |w: f64| w.min(margin)));
                if margin < 0.0 {
                    let o = outcome(
                        OutcomeKind::ComparisonViolated,
                        &state,
                        peak,
                        Some(radius),
                        format!("comparison gap {gap:.6e} below tolerance −{tol:.6e} at r = {radius:.6e}"),
                    );
                    traj.final_state = Some(state);
                    return Ok((traj, o));
                }
            }
        }};
    }
    sample!();

    loop {
        if state.t >= controls.t_end {
            if !state.step_count.is_multiple_of(cadence) {
                sample!();
            }
            let o = outcome(OutcomeKind::Completed, &state, peak, None, "reached t_end".into());
            traj.final_state = Some(state);
            return Ok((traj, o));
        }
        if state.step_count >= controls.max_steps {
            sample!();
            let o = outcome(
                OutcomeKind::NumericalFailure,
                &state,
                peak,
                None,
                format!("step budget of {} exhausted", controls.max_steps),
            );
            traj.final_state = Some(state);
            return Ok((traj, o));
        }
        let proposed = match stepper.advance(&mut state, controls.t_end) {
            Ok((_, proposed)) => proposed,
            Err(Error::Numerical(msg)) => {
                sample!();
                let o = outcome(OutcomeKind::NumericalFailure, &state, peak, None, msg);
                traj.final_state = Some(state);
                return Ok((traj, o));
            }
            Err(e) => return Err(e),
        };
        peak = stepper.peak_density(&state.mass.values);
        let resolved = peak < controls.u_blowup;
        if let Some(prev) = last_energy {
            let f = sampler.energetics.evaluate(&state.mass.values)?.free_energy;
            if resolved {
                if traj.energy_checks == 0 || f - prev > traj.max_energy_rise {
                    traj.max_energy_rise = f - prev;
                    traj.max_energy_rise_at = state.t;
                }
                traj.energy_checks += 1;
            }
            last_energy = Some(f);
        }
        if state.step_count.is_multiple_of(cadence) {
            sample!();
        }
        let step_small = proposed <= controls.dt_min;
        if peak >= controls.peak_limit {
            if !state.step_count.is_multiple_of(cadence) {
                sample!();
            }
            let o = outcome(
                OutcomeKind::BlowUp,
                &state,
                peak,
                None,
                format!("peak density {peak:.6e} reached the limit {:.6e}", controls.peak_limit),
            );
            traj.final_state = Some(state);
            return Ok((traj, o));
        }
        if !resolved && step_small {
            if !state.step_count.is_multiple_of(cadence) {
                sample!();
            }
            let o = outcome(
                OutcomeKind::BlowUp,
                &state,
                peak,
                None,
                format!("peak density {peak:.6e} with step {proposed:.3e}; t_final is a resolution-limited proxy"),
            );
            traj.final_state = Some(state);
            return Ok((traj, o));
        }
        if step_small {
            if !state.step_count.is_multiple_of(cadence) {
                sample!();
            }
            let o = outcome(
                OutcomeKind::NumericalFailure,
                &state,
                peak,
                None,
                format!("step {proposed:.3e} fell below dt_min with peak density {peak:.6e} under the threshold"),
            );
            traj.final_state = Some(state);
            return Ok((traj, o));
        }
    }
}

/// Parameters of the pressure-form self-similar porous-medium solution
/// `B(x,t) = t^{−λ}(C − k|x|²/t^{2β})₊`, with density `((m−1)B/m)^{1/(m−1)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattFixture {
    pub c: f64,
    pub lambda: f64,
    /// Exponent `β` of the support growth `t^β`.
    pub mu_exp: f64,
    pub k: f64,
    pub d: usize,
    pub m: f64,
}

impl BarenblattFixture {
    /// `λ = d(m−1)/(d(m−1)+2)`, `β = 1/(d(m−1)+2)`, `k = β/2`.
    pub fn new(d: usize, c: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!("d must be ≥ 3 (got {d})")));
        }
        if !(c > 0.0) {
            return Err(Error::Domain(format!("C must be positive (got {c})")));
        }
        let m = critical_exponent(d);
        let denom = d as f64 * (m - 1.0) + 2.0;
        let beta = 1.0 / denom;
        Ok(Self {
            c,
            lambda: d as f64 * (m - 1.0) / denom,
            mu_exp: beta,
            k: 0.5 * beta,
            d,
            m,
        })
    }

    /// Support radius `√(C/k)·t^β`.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.k).sqrt() * t.powf(self.mu_exp)
    }

    pub fn pressure(&self, t: f64, r: f64) -> f64 {
        (t.powf(-self.lambda) * (self.c - self.k * r * r / t.powf(2.0 * self.mu_exp))).max(0.0)
    }

    pub fn density(&self, t: f64, r: f64) -> f64 {
        let b = self.pressure(t, r);
        if b <= 0.0 {
            0.0
        } else {
            ((self.m - 1.0) * b / self.m).powf(1.0 / (self.m - 1.0))
        }
    }
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Face masses of the Barenblatt density at time `t`, by Gauss–Legendre
/// quadrature on each cell with the support edge as a break point.
pub fn barenblatt_mass(t: f64, fixture: &BarenblattFixture, grid: &RadialGrid) -> Result<MassFunction> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Barenblatt time must be positive (got {t})")));
    }
    if grid.d() != fixture.d {
        return Err(Error::Validation("grid dimension does not match the fixture".into()));
    }
    let edge = fixture.support_radius(t);
    let sigma = grid.sigma();
    let di = grid.d() as i32;
    let integrate = |a: f64, b: f64| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GAUSS8
            .iter()
            .map(|&(x, w)| {
                let r = mid + half * x;
                w * r.powi(di - 1) * fixture.density(t, r)
            })
            .sum::<f64>()
            * half
            * sigma
    };
    let mut values = Vec::with_capacity(grid.n_cells() + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for w in grid.faces().windows(2) {
        let (a, b) = (w[0], w[1]);
        if a < edge {
            acc += if b > edge {
                integrate(a, edge)
            } else {
                integrate(a, b)
            };
        }
        values.push(acc);
    }
    Ok(MassFunction { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::StationaryProfile;
    use crate::radial::{mass_from_density, RadialFunction};
    use approx::assert_relative_eq;

    fn params(total: f64, mu: f64) -> ModelParams {
        ModelParams::new(3, total, mu).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = RadialGrid::uniform(3, 2.0, 50).unwrap();
        let mut state = SimulationState::new(MassFunction::zeros(&grid));
        let coeffs = Coefficients::constant(1.0);
        let mut stepper = Stepper::new(&params(0.0, 1.0), &coeffs, &grid, StepConfig::default()).unwrap();
        for t_cap in [0.5, 1.0] {
            stepper.advance(&mut state, t_cap).unwrap();
        }
        assert!(state.mass.values.iter().all(|&v| v == 0.0));
        assert_eq!(state.t, 1.0);
    }

    #[test]
    fn conservation_and_monotonicity() {
        let grid = RadialGrid::uniform(3, 3.0, 200).unwrap();
        let u = RadialDensity::from_fn(&grid, |r| 50.0 * (-(r / 0.4).powi(2)).exp() + if r > 1.0 && r < 1.3 { 5.0 } else { 0.0 }).unwrap();
        let m = mass_from_density(&u, &grid).unwrap();
        let total = m.total();
        let mut state = SimulationState::new(m);
        let coeffs = Coefficients::new(RadialFunction::Polynomial(vec![1.0, 0.0, 1.0]), RadialFunction::Constant(0.0));
        let mut stepper = Stepper::new(&params(total, 0.8), &coeffs, &grid, StepConfig::default()).unwrap();
        for _ in 0..500 {
            stepper.advance(&mut state, f64::INFINITY).unwrap();
            assert_eq!(state.mass.total(), total);
            assert_eq!(state.mass.values[0], 0.0);
            assert!(state.mass.values.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn field_and_closed_drift_agree_for_zero_decay() {
        let grid = RadialGrid::uniform(3, 2.0, 300).unwrap();
        let u = RadialDensity::from_fn(&grid, |r| 300.0 * (-(r / 0.3).powi(2)).exp()).unwrap();
        let m = mass_from_density(&u, &grid).unwrap();
        let p = params(m.total(), 0.7);
        let coeffs = Coefficients::new(RadialFunction::Polynomial(vec![1.0, 0.5]), RadialFunction::Constant(0.0));
        let mut a = SimulationState::new(m.clone());
        let mut b = SimulationState::new(m);
        Stepper::new(&p, &coeffs, &grid, StepConfig { cfl: 0.4, drift: DriftMode::Closed })
            .unwrap()
            .advance(&mut a, f64::INFINITY)
            .unwrap();
        Stepper::new(&p, &coeffs, &grid, StepConfig { cfl: 0.4, drift: DriftMode::Field })
            .unwrap()
            .advance(&mut b, f64::INFINITY)
            .unwrap();
        assert_relative_eq!(a.dt_last, b.dt_last, max_relative = 1e-10);
        for (x, y) in a.mass.values.iter().zip(&b.mass.values) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }

    #[test]
    fn stationary_profile_is_nearly_fixed() {
        let profile = StationaryProfile::reference(3).unwrap();
        let grid = RadialGrid::uniform(3, 2.0, 400).unwrap();
        let m0 = profile.mass_function_on(&grid, 1.0, 1.0);
        let coeffs = Coefficients::constant(1.0);
        let mut state = SimulationState::new(m0.clone());
        let mut stepper = Stepper::new(&params(m0.total(), 1.0), &coeffs, &grid, StepConfig::default()).unwrap();
        for _ in 0..1000 {
            stepper.advance(&mut state, f64::INFINITY).unwrap();
        }
        let dr = grid.max_width();
        let dev = state.mass.values.iter().zip(&m0.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // C·Δr with C the profile's total mass.
        assert!(dev <= m0.total() * dr, "deviation {dev}");
    }

    #[test]
    fn zero_horizon_gives_one_row() {
        let grid = RadialGrid::uniform(3, 2.0, 50).unwrap();
        let u = RadialDensity::from_fn(&grid, |r| (-r * r).exp()).unwrap();
        let m = mass_from_density(&u, &grid).unwrap();
        let controls = RunControls {
            t_end: 0.0,
            ..RunControls::default()
        };
        let (traj, outcome) = run(m.clone(), &params(m.total(), 1.0), &Coefficients::constant(1.0), &grid, StepConfig::default(), &controls, None).unwrap();
        assert_eq!(outcome.kind, OutcomeKind::Completed);
        assert_eq!(traj.rows.len(), 1);
    }

    #[test]
    fn fixture_exponents() {
        let f = BarenblattFixture::new(3, 1.0).unwrap();
        assert_relative_eq!(f.lambda, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(f.mu_exp, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(f.k, 1.0 / 6.0, max_relative = 1e-15);
    }

    /// Residual of `B_t = (m−1)BΔB + |∇B|²` at an interior point, by finite
    /// differences, for given exponents.
    fn pressure_residual(d: usize, lambda: f64, beta: f64, k: f64) -> f64 {
        let m = critical_exponent(d);
        let b = |t: f64, r: f64| t.powf(-lambda) * (1.0 - k * r * r / t.powf(2.0 * beta));
        let (t, r, h) = (1.3, 0.5, 1e-4);
        let bt = (b(t + h, r) - b(t - h, r)) / (2.0 * h);
        let br = (b(t, r + h) - b(t, r - h)) / (2.0 * h);
        let brr = (b(t, r + h) - 2.0 * b(t, r) + b(t, r - h)) / (h * h);
        let lap = brr + (d as f64 - 1.0) / r * br;
        (bt - (m - 1.0) * b(t, r) * lap - br * br).abs()
    }

    #[test]
    fn corrected_exponents_solve_the_pressure_equation() {
        let f = BarenblattFixture::new(3, 1.0).unwrap();
        assert!(pressure_residual(3, f.lambda, f.mu_exp, f.k) < 1e-6);
        // The exponents λ/d and λ/(2d) leave a visible residual when m ≠ 2.
        assert!(pressure_residual(3, f.lambda, f.lambda / 3.0, f.lambda / 6.0) > 1e-2);
    }

    #[test]
    fn barenblatt_mass_is_conserved_and_support_grows() {
        let f = BarenblattFixture::new(3, 1.0).unwrap();
        let grid = RadialGrid::uniform(3, 6.0, 3000).unwrap();
        let one = barenblatt_mass(1.0, &f, &grid).unwrap();
        let two = barenblatt_mass(2.0, &f, &grid).unwrap();
        assert_relative_eq!(one.total(), two.total(), max_relative = 1e-6);
        assert_relative_eq!(f.support_radius(2.0) / f.support_radius(1.0), 2f64.powf(f.mu_exp), max_relative = 1e-12);
        assert!(barenblatt_mass(0.0, &f, &grid).is_err());
    }

    #[test]
    fn rescaled_frame_reproduces_original_run() {
        let grid = RadialGrid::uniform(3, 2.0, 120).unwrap();
        let u = RadialDensity::from_fn(&grid, |r| 80.0 * (-(r / 0.3).powi(2)).exp()).unwrap();
        let m = mass_from_density(&u, &grid).unwrap();
        let coeffs = Coefficients::new(RadialFunction::Polynomial(vec![1.0, 0.0, 1.0]), RadialFunction::Constant(0.0));
        let mu: f64 = 0.4;
        let frame = mu.powf(1.0 / 3.0);
        let t = 2e-3;
        let cadence = usize::MAX;
        let original = RunControls { t_end: t, cadence, ..RunControls::default() };
        let rescaled = RunControls { t_end: t / frame, cadence, ..RunControls::default() };
        let rho0 = MassFunction { values: m.values.iter().map(|v| v * mu).collect() };
        let (a, _) = run(m.clone(), &params(m.total(), 1.0), &coeffs, &grid, StepConfig::default(), &original, None).unwrap();
        let (b, _) = run(rho0, &params(mu * m.total(), mu), &coeffs, &grid, StepConfig::default(), &rescaled, None).unwrap();
        let (a, b) = (a.final_state.unwrap(), b.final_state.unwrap());
        assert_eq!(a.step_count, b.step_count);
        for (x, y) in a.mass.values.iter().zip(&b.mass.values) {
            assert!((x - y / mu).abs() <= 1e-10 * m.total(), "{x} vs {}", y / mu);
        }
    }

    #[test]
    fn barenblatt_short_window() {
        let grid = RadialGrid::uniform(3, 3.0, 512).unwrap();
        let f = BarenblattFixture::new(3, 1.0).unwrap();
        let (t0, t1) = (1.0, 1.25);
        let m0 = barenblatt_mass(t0, &f, &grid).unwrap();
        let p = params(m0.total(), 1.0);
        let controls = RunControls { t_end: t1 - t0, cadence: usize::MAX, ..RunControls::default() };
        let config = StepConfig { cfl: 0.4, drift: DriftMode::Off };
        let (traj, outcome) = run(m0, &p, &Coefficients::constant(1.0), &grid, config, &controls, None).unwrap();
        assert_eq!(outcome.kind, OutcomeKind::Completed);
        let exact = barenblatt_mass(t1, &f, &grid).unwrap();
        let got = traj.final_state.unwrap().mass;
        let err = got
            .values
            .iter()
            .zip(&exact.values)
            .filter(|(_, e)| **e > 0.0)
            .map(|(g, e)| (g - e).abs() / e)
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max relative error {err}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn steps_conserve_mass_and_monotonicity(
                amps in proptest::collection::vec(0.0f64..200.0, 1..4),
                widths in proptest::collection::vec(0.05f64..0.8, 3),
                centers in proptest::collection::vec(0.0f64..1.5, 3),
                mu in 0.2f64..1.0,
                slope in 0.0f64..2.0,
            ) {
                let grid = RadialGrid::uniform(3, 2.0, 80).unwrap();
                let u = RadialDensity::from_fn(&grid, |r| {
                    amps.iter()
                        .zip(&widths)
                        .zip(&centers)
                        .map(|((a, w), c)| a * (-((r - c) / w).powi(2)).exp())
                        .sum()
                })
                .unwrap();
                let m = mass_from_density(&u, &grid).unwrap();
                let total = m.total();
                let coeffs = Coefficients::new(RadialFunction::Polynomial(vec![1.0, slope]), RadialFunction::Constant(0.0));
                let mut stepper = Stepper::new(&params(total, mu), &coeffs, &grid, StepConfig::default()).unwrap();
                let mut state = SimulationState::new(m);
                for _ in 0..40 {
                    stepper.advance(&mut state, f64::INFINITY).unwrap();
                    prop_assert_eq!(state.mass.values[0], 0.0);
                    prop_assert_eq!(state.mass.total(), total);
                    prop_assert!(state.mass.values.windows(2).all(|w| w[1] >= w[0]));
                }
            }
        }
    }
}
