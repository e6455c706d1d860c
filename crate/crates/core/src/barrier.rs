//! Self-similar comparison functions built from the unit-support profile.
//!
//! [`Barrier`] collapses: `ū(t,x) = a(R₀)^{d/2} R(t)^{−d} V(x/R(t))` with
//! `R(t)^d = R₀^d − d·M_c(μ^{−2/d}−1)·t/(a(R₀)σ)`. It is a mass subsolution
//! of the rescaled system. [`FixedSupersolution`] keeps `R` fixed and bounds
//! critical-mass solutions from above. Both are evaluated in closed form; no
//! time stepping is involved.

use crate::error::{Error, Result};
use crate::profile::StationaryProfile;
use crate::radial::{sphere_area, Coefficients, MassFunction, RadialGrid};

/// Collapsing mass subsolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    r0: f64,
    a_at_r0: f64,
    mu: f64,
    critical_mass: f64,
    profile: StationaryProfile,
    d: usize,
}

/// Result of testing initial data against the barrier at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingReport {
    pub holds: bool,
    /// `min_r (μ·M(0,r) − M̄(0,r))` over faces in `[0, R₀]`.
    pub worst_margin: f64,
    /// Face radius where the minimum is attained.
    pub worst_radius: f64,
}

/// Smallest signed distance from the comparison ordering, with its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReading {
    pub gap: f64,
    pub radius: f64,
}

impl Barrier {
    /// `profile` must have unit support; `critical_mass` is the `M_c` of the
    /// coefficient field, at most the barrier mass `a(R₀)^{d/2}·M_V`.
    pub fn new(
        profile: StationaryProfile,
        coeffs: &Coefficients,
        r0: f64,
        mu: f64,
        critical_mass: f64,
    ) -> Result<Self> {
        if (profile.support_radius() - 1.0).abs() > 1e-12 {
            return Err(Error::Validation("barrier profile must have unit support".into()));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::Domain(format!("R0 must be positive (got {r0})")));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::Domain(format!("the barrier collapses only for mu in (0, 1) (got {mu})")));
        }
        if !(critical_mass > 0.0) {
            return Err(Error::Domain(format!("critical mass must be positive (got {critical_mass})")));
        }
        let a_at_r0 = coeffs.a_at(r0);
        let d = profile.d();
        let barrier_mass = a_at_r0.powf(d as f64 / 2.0) * profile.mass();
        if barrier_mass < critical_mass * (1.0 - 1e-12) {
            return Err(Error::Validation(format!(
                "barrier mass {barrier_mass} is below the critical mass {critical_mass}; a(R0) must be at least min a"
            )));
        }
        Ok(Self {
            r0,
            a_at_r0,
            mu,
            critical_mass,
            profile,
            d,
        })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn a_at_r0(&self) -> f64 {
        self.a_at_r0
    }

    pub fn critical_mass(&self) -> f64 {
        self.critical_mass
    }

    pub fn profile(&self) -> &StationaryProfile {
        &self.profile
    }

    /// Total mass of `ū`, `a(R₀)^{d/2}·M_V`.
    pub fn total_mass(&self) -> f64 {
        self.a_at_r0.powf(self.d as f64 / 2.0) * self.profile.mass()
    }

    /// `d·M_c(μ^{−2/d}−1)/(a(R₀)σ)`, the rate at which `R^d` shrinks.
    fn shrink_rate(&self) -> f64 {
        let d = self.d as f64;
        d * self.critical_mass * (self.mu.powf(-2.0 / d) - 1.0) / (self.a_at_r0 * sphere_area(self.d))
    }

    /// Root of `R`: `T⋆ = R₀^d·a(R₀)·σ/(d·M_c·(μ^{−2/d}−1))`.
    pub fn collapse_time(&self) -> f64 {
        self.r0.powi(self.d as i32) / self.shrink_rate()
    }

    /// `μ^{2/d−1}·T⋆`, a bound on the blow-up time in the original time
    /// variable.
    pub fn blow_up_time_bound(&self) -> f64 {
        self.mu.powf(2.0 / self.d as f64 - 1.0) * self.collapse_time()
    }

    pub fn radius_at(&self, t: f64) -> Result<f64> {
        let t_star = self.collapse_time();
        if !(0.0..=t_star).contains(&t) {
            return Err(Error::Domain(format!("t = {t} lies outside [0, T⋆ = {t_star}]")));
        }
        let rd = (self.r0.powi(self.d as i32) - self.shrink_rate() * t).max(0.0);
        Ok(rd.powf(1.0 / self.d as f64))
    }

    /// `M̄(t,r) = a(R₀)^{d/2}·M_V(r/R(t))` for `t < T⋆`.
    pub fn mass_at(&self, t: f64, r: f64) -> Result<f64> {
        let radius = self.live_radius(t)?;
        Ok(self.mass_within(radius, r))
    }

    fn live_radius(&self, t: f64) -> Result<f64> {
        let radius = self.radius_at(t)?;
        if radius <= 0.0 || t >= self.collapse_time() {
            return Err(Error::Domain(format!("the barrier has collapsed by t = {t}")));
        }
        Ok(radius)
    }

    fn mass_within(&self, radius: f64, r: f64) -> f64 {
        let value = self.a_at_r0.powf(self.d as f64 / 2.0) * self.profile.mass_at(r / radius);
        debug_assert!(
            r >= radius
                || value >= self.critical_mass * (r / radius).powi(self.d as i32) * (1.0 - 1e-9),
            "barrier mass below its lower bound at r = {r}"
        );
        value
    }

    /// Whether `M̄(0,r) ≤ μ·M(0,r)` at every face in `(0, R₀]`, where `μ` is
    /// the barrier's `M_c/M₀` and `M(0,·)` the initial data in the original
    /// variables.
    pub fn check_initial_ordering(&self, initial: &MassFunction, grid: &RadialGrid) -> Result<OrderingReport> {
        if grid.r_max() < self.r0 {
            return Err(Error::Validation(format!(
                "grid ends at {} but the ordering is required up to R0 = {}",
                grid.r_max(),
                self.r0
            )));
        }
        if initial.values.len() != grid.n_cells() + 1 {
            return Err(Error::Validation("mass function does not match the grid".into()));
        }
        let mut report = OrderingReport {
            holds: true,
            worst_margin: f64::INFINITY,
            worst_radius: 0.0,
        };
        for (&r, &m) in grid.faces().iter().zip(&initial.values).skip(1) {
            if r > self.r0 {
                break;
            }
            let margin = self.mu * m - self.mass_within(self.r0, r);
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.worst_radius = r;
            }
        }
        // A relative round-off allowance: equality is the designed case.
        report.holds = report.worst_margin >= -1e-12 * self.total_mass();
        Ok(report)
    }

    /// `min (M(t,r) − M̄(t,r))` over faces with `0 < r ≤ R(t)`, for the
    /// rescaled state `M`; infinite when no face lies inside `R(t)`.
    pub fn comparison_gap(&self, mass: &MassFunction, grid: &RadialGrid, t: f64) -> Result<GapReading> {
        let radius = self.live_radius(t)?;
        let mut reading = GapReading {
            gap: f64::INFINITY,
            radius: 0.0,
        };
        for (&r, &m) in grid.faces().iter().zip(&mass.values).skip(1) {
            if r > radius {
                break;
            }
            let gap = m - self.mass_within(radius, r);
            if gap < reading.gap {
                reading = GapReading { gap, radius: r };
            }
        }
        Ok(reading)
    }
}

/// Time-independent extremal `ā^{d/2} R^{−d} V(x/R)` with `ā = min a`; its
/// mass is the critical mass and it bounds critical-mass solutions from
/// above.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSupersolution {
    radius: f64,
    scale: f64,
    profile: StationaryProfile,
    /// Faces where the initial data lay below the supersolution.
    ordered: Vec<bool>,
}

impl FixedSupersolution {
    pub fn new(profile: StationaryProfile, radius: f64, a_min: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("radius must be positive (got {radius})")));
        }
        if (profile.support_radius() - 1.0).abs() > 1e-12 {
            return Err(Error::Validation("supersolution profile must have unit support".into()));
        }
        let scale = a_min.powf(profile.d() as f64 / 2.0);
        Ok(Self {
            radius,
            scale,
            profile,
            ordered: Vec::new(),
        })
    }

    /// Halve the radius from `start` until `M(0,r) ≤ M̄(r)` on `[0, R]`, then
    /// record where the data is ordered. Fails after 60 halvings.
    pub fn fitted(
        profile: StationaryProfile,
        a_min: f64,
        initial: &MassFunction,
        grid: &RadialGrid,
        start: f64,
    ) -> Result<Self> {
        let mut radius = start;
        for _ in 0..60 {
            let mut s = Self::new(profile.clone(), radius, a_min)?;
            let ordered_inside = grid
                .faces()
                .iter()
                .zip(&initial.values)
                .filter(|(&r, _)| r <= radius)
                .all(|(&r, &m)| m <= s.mass_at(r) * (1.0 + 1e-12));
            if ordered_inside {
                s.record_ordering(initial, grid);
                return Ok(s);
            }
            radius *= 0.5;
        }
        Err(Error::Setup("no supersolution radius orders the initial data".into()))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn total_mass(&self) -> f64 {
        self.scale * self.profile.mass()
    }

    pub fn mass_at(&self, r: f64) -> f64 {
        self.scale * self.profile.mass_at(r / self.radius)
    }

    pub fn record_ordering(&mut self, initial: &MassFunction, grid: &RadialGrid) {
        self.ordered = grid
            .faces()
            .iter()
            .zip(&initial.values)
            .map(|(&r, &m)| m <= self.mass_at(r) * (1.0 + 1e-12))
            .collect();
    }

    /// `min (M̄(r) − M(t,r))` over the initially ordered faces (all faces if
    /// no ordering was recorded).
    pub fn comparison_gap(&self, mass: &MassFunction, grid: &RadialGrid) -> GapReading {
        let mut reading = GapReading {
            gap: f64::INFINITY,
            radius: 0.0,
        };
        for (i, (&r, &m)) in grid.faces().iter().zip(&mass.values).enumerate().skip(1) {
            if !self.ordered.is_empty() && !self.ordered[i] {
                continue;
            }
            let gap = self.mass_at(r) - m;
            if gap < reading.gap {
                reading = GapReading { gap, radius: r };
            }
        }
        reading
    }
}
