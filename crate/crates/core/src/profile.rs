//! The compactly supported stationary profile and the sharp constants derived
//! from it.
//!
//! The profile solves `(V^m)' = −V·M_V/(σ r^{d−1})` with `M_V' = σ r^{d−1} V`.
//! Shooting is done in the pressure `p = m/(m−1)·V^{m−1}`, for which the
//! system reads
//!
//! ```text
//! p' = −M/(σ r^{d−1}),    M' = σ r^{d−1} V(p),
//! ```
//!
//! with `V(p) = ((m−1)p/m)^{1/(m−1)}`. The pressure is smooth up to the free
//! boundary and crosses zero with nonzero slope, so the touchdown radius is
//! well conditioned.

use crate::error::{Error, Result};
use crate::radial::{critical_exponent, sphere_area, MassFunction, RadialDensity, RadialGrid};

/// Minimum number of integration steps before touchdown.
pub const MIN_STEPS: usize = 1000;

/// Newtonian normalization constant `Γ(d/2+1)/(d(d−2)π^{d/2})`, equal to
/// `1/((d−2)σ)`.
pub fn compute_cd(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain(format!("d must be ≥ 3 (got {d})")));
    }
    Ok(1.0 / ((d as f64 - 2.0) * sphere_area(d)))
}

fn pressure_of(m: f64, v: f64) -> f64 {
    m / (m - 1.0) * v.powf(m - 1.0)
}

fn density_of(m: f64, p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        ((m - 1.0) * p / m).powf(1.0 / (m - 1.0))
    }
}

/// A sampled member of the stationary family.
///
/// Nodes are equally spaced except for the last interval, which ends exactly
/// at the support radius.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    d: usize,
    radii: Vec<f64>,
    values: Vec<f64>,
    pressures: Vec<f64>,
    masses: Vec<f64>,
    spacing: f64,
    support_radius: f64,
    mass: f64,
}

/// Default shooting step for a given starting height: about `1.4·10⁴` steps
/// to touchdown in three dimensions.
pub fn default_step(d: usize, height: f64) -> f64 {
    1e-3 * height.powf(-1.0 / d as f64)
}

/// Shoot from `V(0) = height` with the default radius bound.
pub fn shoot_profile(d: usize, height: f64, step: f64) -> Result<StationaryProfile> {
    shoot_profile_within(d, height, step, 1e3 * height.powf(-1.0 / d as f64))
}

/// Shoot from `V(0) = height`, failing if `V` has not vanished by `max_radius`.
pub fn shoot_profile_within(
    d: usize,
    height: f64,
    step: f64,
    max_radius: f64,
) -> Result<StationaryProfile> {
    if d < 3 {
        return Err(Error::Domain(format!("d must be ≥ 3 (got {d})")));
    }
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::Domain(format!("center height must be positive (got {height})")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("shooting step must be positive (got {step})")));
    }
    let m = critical_exponent(d);
    let sigma = sphere_area(d);
    let dm1 = d as i32 - 1;
    let rhs = |r: f64, p: f64, mass: f64| -> (f64, f64) {
        let dp = if r == 0.0 { 0.0 } else { -mass / (sigma * r.powi(dm1)) };
        (dp, sigma * r.powi(dm1) * density_of(m, p))
    };
    let rk4 = |r: f64, p: f64, mass: f64, h: f64| -> (f64, f64) {
        let (k1p, k1m) = rhs(r, p, mass);
        let (k2p, k2m) = rhs(r + 0.5 * h, p + 0.5 * h * k1p, mass + 0.5 * h * k1m);
        let (k3p, k3m) = rhs(r + 0.5 * h, p + 0.5 * h * k2p, mass + 0.5 * h * k2m);
        let (k4p, k4m) = rhs(r + h, p + h * k3p, mass + h * k3m);
        (
            p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            mass + h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m),
        )
    };

    // Near the origin the stage values of the one-step method divide
    // inaccurate masses by r^{d−1}, which costs an order of accuracy; the
    // first nodes come from the Taylor series instead.
    let series = OriginSeries::new(d, height);
    let k_start = ((series.radius / step) as usize).max(1);
    let mut radii = Vec::new();
    let mut pressures = Vec::new();
    let mut masses = Vec::new();
    for j in 0..=k_start {
        let r = j as f64 * step;
        let (p, mass) = series.eval(r);
        radii.push(r);
        pressures.push(p);
        masses.push(mass);
    }
    let mut k = k_start;
    loop {
        let r = k as f64 * step;
        if r > max_radius {
            return Err(Error::Convergence(format!(
                "profile did not reach zero before r = {max_radius} (step {step})"
            )));
        }
        let (p, mass) = (pressures[k], masses[k]);
        let (p_next, m_next) = rk4(r, p, mass, step);
        if !(p_next.is_finite() && m_next.is_finite()) {
            return Err(Error::Convergence(format!("shooting produced a non-finite value at r = {r}")));
        }
        if p_next > 0.0 {
            k += 1;
            radii.push(k as f64 * step);
            pressures.push(p_next);
            masses.push(m_next);
            continue;
        }
        if k + 1 < MIN_STEPS {
            return Err(Error::Convergence(format!(
                "touchdown after {} steps; at least {MIN_STEPS} are required, reduce the step",
                k + 1
            )));
        }
        // Touchdown lies in (r, r + step]. Start from the linear interpolant
        // of the pressure and polish with Newton on partial steps.
        let mut h = step * p / (p - p_next);
        for _ in 0..50 {
            let (ph, mh) = rk4(r, p, mass, h);
            let slope = -mh / (sigma * (r + h).powi(dm1));
            let dh = -ph / slope;
            h = (h + dh).clamp(0.0, step);
            if dh.abs() <= 1e-15 * step {
                break;
            }
        }
        let (_, m_end) = rk4(r, p, mass, h);
        let support = r + h;
        radii.push(support);
        pressures.push(0.0);
        masses.push(m_end);
        let values = pressures.iter().map(|&p| density_of(m, p)).collect();
        return Ok(StationaryProfile {
            d,
            radii,
            values,
            pressures,
            masses,
            spacing: step,
            support_radius: support,
            mass: m_end,
        });
    }
}

/// Taylor expansion of `(p, M)` in powers of `r²` about the origin.
struct OriginSeries {
    d: usize,
    pressure: Vec<f64>,
    density: Vec<f64>,
    /// Radius up to which the truncated series is accurate to round-off.
    radius: f64,
}

impl OriginSeries {
    const TERMS: usize = 24;

    fn new(d: usize, height: f64) -> Self {
        let m = critical_exponent(d);
        let df = d as f64;
        let alpha = 1.0 / (m - 1.0);
        let c = (m - 1.0) / m;
        let mut pressure = vec![pressure_of(m, height)];
        let mut density = vec![height];
        for n in 1..Self::TERMS {
            // p' = −M/(σ r^{d−1}) term by term.
            let prev = (n - 1) as f64;
            pressure.push(-density[n - 1] / ((2.0 * prev + 2.0) * (2.0 * prev + df)));
            // V = (c p)^α by the power-series recurrence for g^α.
            let g0 = c * pressure[0];
            let nf = n as f64;
            let sum: f64 = (1..=n)
                .map(|j| ((alpha + 1.0) * j as f64 - nf) * c * pressure[j] * density[n - j])
                .sum();
            density.push(sum / (nf * g0));
        }
        let last = pressure[Self::TERMS - 1].abs().max(1e-300);
        let radius = 0.5 * (1e-17 * pressure[0] / last).powf(1.0 / (2.0 * (Self::TERMS - 1) as f64));
        Self {
            d,
            pressure,
            density,
            radius,
        }
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        let x = r * r;
        let df = self.d as f64;
        let mut p = 0.0;
        let mut w = 0.0;
        for k in (0..Self::TERMS).rev() {
            p = p * x + self.pressure[k];
            w = w * x + self.density[k] / (2.0 * k as f64 + df);
        }
        (p, sphere_area(self.d) * r.powi(self.d as i32) * w)
    }
}

impl StationaryProfile {
    /// The unit-support profile in dimension `d`, shot from height 1 at the
    /// default step.
    pub fn reference(d: usize) -> Result<Self> {
        let p = shoot_profile(d, 1.0, default_step(d, 1.0))?;
        normalize_unit_support(&p)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cumulative mass `M_V` at each node.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn height(&self) -> f64 {
        self.values[0]
    }

    fn m(&self) -> f64 {
        critical_exponent(self.d)
    }

    fn locate(&self, r: f64) -> (usize, f64, f64) {
        let last = self.radii.len() - 2;
        let k = ((r / self.spacing) as usize).min(last);
        let r0 = self.radii[k];
        let h = self.radii[k + 1] - r0;
        (k, r0, h)
    }

    fn mass_slope(&self, k: usize) -> f64 {
        sphere_area(self.d) * self.radii[k].powi(self.d as i32 - 1) * self.values[k]
    }

    fn pressure_slope(&self, k: usize) -> f64 {
        let r = self.radii[k];
        if r == 0.0 {
            0.0
        } else {
            -self.masses[k] / (sphere_area(self.d) * r.powi(self.d as i32 - 1))
        }
    }

    /// `M_V(r)` by cubic Hermite interpolation; `mass()` beyond the support.
    pub fn mass_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.support_radius {
            return self.mass;
        }
        let (k, r0, h) = self.locate(r);
        hermite(
            (r - r0) / h,
            h,
            self.masses[k],
            self.mass_slope(k),
            self.masses[k + 1],
            self.mass_slope(k + 1),
        )
        .clamp(self.masses[k], self.masses[k + 1])
    }

    /// `V(r)`, interpolating the pressure; zero beyond the support.
    pub fn value_at(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.support_radius {
            return 0.0;
        }
        let (k, r0, h) = self.locate(r);
        let p = hermite(
            (r - r0) / h,
            h,
            self.pressures[k],
            self.pressure_slope(k),
            self.pressures[k + 1],
            self.pressure_slope(k + 1),
        );
        density_of(self.m(), p)
    }

    /// Face masses of `scale·R^{−d}·V(·/R)` on `grid`, exact up to the
    /// profile interpolation.
    pub fn mass_function_on(&self, grid: &RadialGrid, radius: f64, scale: f64) -> MassFunction {
        let mut values: Vec<f64> = grid.faces().iter().map(|&r| scale * self.mass_at(r / radius)).collect();
        values[0] = 0.0;
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        MassFunction { values }
    }

    /// Cell averages of `scale·R^{−d}·V(·/R)` on `grid`.
    pub fn density_on(&self, grid: &RadialGrid, radius: f64, scale: f64) -> RadialDensity {
        let mf = self.mass_function_on(grid, radius, scale);
        RadialDensity {
            values: crate::radial::density_values(&mf.values, grid.shell_volumes()),
        }
    }

    /// Largest relative deviation from stationarity at interior nodes,
    /// `max |(V^m)' + V·M_V/(σ r^{d−1})| / max(V)^m`, with `(V^m)'` taken by
    /// centered differences of the stored samples.
    pub fn stationarity_residual(&self) -> f64 {
        let m = self.m();
        let sigma = sphere_area(self.d);
        let n = self.radii.len();
        let vm: Vec<f64> = self.values.iter().map(|v| v.powf(m)).collect();
        let mut worst: f64 = 0.0;
        for k in 1..n.saturating_sub(2) {
            let r = self.radii[k];
            let h = self.radii[k + 1] - self.radii[k - 1];
            let lhs = (vm[k + 1] - vm[k - 1]) / h;
            let rhs = self.values[k] * self.masses[k] / (sigma * r.powi(self.d as i32 - 1));
            worst = worst.max((lhs + rhs).abs());
        }
        worst / self.height().powf(m)
    }
}

fn hermite(t: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// Mass-preserving rescaling to unit support: `V₁(r) = λ^d V(λ r)` with `λ`
/// the current support radius.
pub fn normalize_unit_support(p: &StationaryProfile) -> Result<StationaryProfile> {
    let lambda = p.support_radius;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("support radius must be positive (got {lambda})")));
    }
    let d = p.d as i32;
    let vscale = lambda.powi(d);
    let pscale = lambda.powi(d - 2);
    let mut out = StationaryProfile {
        d: p.d,
        radii: p.radii.iter().map(|r| r / lambda).collect(),
        values: p.values.iter().map(|v| v * vscale).collect(),
        pressures: p.pressures.iter().map(|q| q * pscale).collect(),
        masses: p.masses.clone(),
        spacing: p.spacing / lambda,
        support_radius: 1.0,
        mass: p.mass,
    };
    *out.radii.last_mut().unwrap() = 1.0;
    Ok(out)
}

/// The dimension's sharp constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpConstants {
    pub d: usize,
    pub c_d: f64,
    pub c_star: f64,
    pub m_c_star: f64,
}

impl SharpConstants {
    pub fn m(&self) -> f64 {
        critical_exponent(self.d)
    }

    /// The reference constants of dimension `d`.
    pub fn reference(d: usize) -> Result<Self> {
        sharp_constants(&StationaryProfile::reference(d)?)
    }
}

/// `M_c⋆` is the profile mass; `C⋆ = 2/((m−1)·c_d·M_c⋆^{2/d})`.
pub fn sharp_constants(p: &StationaryProfile) -> Result<SharpConstants> {
    if !(p.mass > 0.0 && p.mass.is_finite()) {
        return Err(Error::Validation(format!("profile mass must be positive (got {})", p.mass)));
    }
    let d = p.d;
    let c_d = compute_cd(d)?;
    let m = critical_exponent(d);
    let c_star = 2.0 / ((m - 1.0) * c_d * p.mass.powf(2.0 / d as f64));
    Ok(SharpConstants {
        d,
        c_d,
        c_star,
        m_c_star: p.mass,
    })
}

/// `a_min^{d/2}·M_c⋆`.
pub fn critical_mass(a_min: f64, k: &SharpConstants) -> Result<f64> {
    if !(a_min > 0.0 && a_min.is_finite()) {
        return Err(Error::Domain(format!("a_min must be positive (got {a_min})")));
    }
    Ok(a_min.powf(k.d as f64 / 2.0) * k.m_c_star)
}

/// `c_d` as an explicit Gamma quotient, kept for cross-checking.
#[cfg(test)]
fn cd_gamma_quotient(d: usize) -> f64 {
    use std::f64::consts::PI;
    // Γ(d/2 + 1) = (d/2)·Γ(d/2) and σ = 2π^{d/2}/Γ(d/2).
    let gamma_half_d = 2.0 * PI.powf(d as f64 / 2.0) / sphere_area(d);
    (d as f64 / 2.0) * gamma_half_d / (d as f64 * (d as f64 - 2.0) * PI.powf(d as f64 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Frozen constants; see `tests/golden.rs` for the oracle that produced them.
    const GOLDEN_MC_STAR_3: f64 = 202.895_207_576_52;
    const GOLDEN_MC_STAR_4: f64 = 1_992.951_825_763_95;

    #[test]
    fn cd_closed_forms() {
        assert_relative_eq!(compute_cd(3).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-12);
        assert_relative_eq!(compute_cd(4).unwrap(), 1.0 / (4.0 * PI * PI), max_relative = 1e-12);
        assert_relative_eq!(compute_cd(6).unwrap(), 1.0 / (4.0 * PI.powi(3)), max_relative = 1e-12);
        for d in 3..10 {
            assert_relative_eq!(compute_cd(d).unwrap(), cd_gamma_quotient(d), max_relative = 1e-12);
        }
        assert!(matches!(compute_cd(2), Err(Error::Domain(_))));
    }

    #[test]
    fn unit_support_after_normalization() {
        let p = shoot_profile(3, 2.0, default_step(3, 2.0)).unwrap();
        let n = normalize_unit_support(&p).unwrap();
        assert_eq!(n.support_radius(), 1.0);
        assert_eq!(n.mass(), p.mass());
        assert_eq!(n.value_at(1.0), 0.0);
        assert_eq!(n.value_at(1.5), 0.0);
        let twice = normalize_unit_support(&n).unwrap();
        assert_eq!(twice, n);
        let lambda = p.support_radius();
        for &r in &[0.0, 0.2, 0.5, 0.9] {
            assert_relative_eq!(n.value_at(r), lambda.powi(3) * p.value_at(lambda * r), max_relative = 1e-12);
        }
    }

    #[test]
    fn profile_is_decreasing() {
        let p = StationaryProfile::reference(3).unwrap();
        assert!(p.values().windows(2).all(|w| w[1] < w[0]));
        assert!(p.masses().windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*p.values().last().unwrap(), 0.0);
    }

    #[test]
    fn height_independence() {
        let a = normalize_unit_support(&shoot_profile(3, 1.0, default_step(3, 1.0)).unwrap()).unwrap();
        let b = normalize_unit_support(&shoot_profile(3, 5.0, default_step(3, 5.0)).unwrap()).unwrap();
        assert_relative_eq!(a.mass(), b.mass(), max_relative = 1e-5);
        let c = normalize_unit_support(&shoot_profile(3, 100.0, default_step(3, 100.0)).unwrap()).unwrap();
        assert_relative_eq!(a.mass(), c.mass(), max_relative = 1e-5);
    }

    #[test]
    fn reference_masses_match_golden() {
        assert_relative_eq!(StationaryProfile::reference(3).unwrap().mass(), GOLDEN_MC_STAR_3, max_relative = 1e-12);
        assert_relative_eq!(StationaryProfile::reference(4).unwrap().mass(), GOLDEN_MC_STAR_4, max_relative = 1e-12);
    }

    #[test]
    fn sharp_constants_satisfy_mass_identity() {
        for d in [3, 4, 5] {
            let k = SharpConstants::reference(d).unwrap();
            let m = k.m();
            let identity = (2.0 / ((m - 1.0) * k.c_star * k.c_d)).powf(d as f64 / 2.0);
            assert_relative_eq!(identity, k.m_c_star, max_relative = 1e-12);
        }
    }

    #[test]
    fn stationarity_residual_is_small() {
        for d in [3, 4] {
            let p = StationaryProfile::reference(d).unwrap();
            assert!(p.stationarity_residual() <= 1e-6, "d={d}: {}", p.stationarity_residual());
        }
    }

    #[test]
    fn critical_mass_scaling() {
        let k = SharpConstants::reference(3).unwrap();
        assert_eq!(critical_mass(1.0, &k).unwrap(), k.m_c_star);
        assert_relative_eq!(critical_mass(4.0, &k).unwrap(), 8.0 * k.m_c_star, max_relative = 1e-15);
        assert!(critical_mass(0.0, &k).is_err());
        let direct = (2.0 * 4.0 / ((k.m() - 1.0) * k.c_star * k.c_d)).powf(1.5);
        assert_relative_eq!(critical_mass(4.0, &k).unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn coarse_step_is_rejected() {
        assert!(matches!(shoot_profile(3, 1.0, 0.1), Err(Error::Convergence(_))));
        assert!(matches!(shoot_profile_within(3, 1.0, 1e-3, 5.0), Err(Error::Convergence(_))));
        assert!(matches!(shoot_profile(3, -1.0, 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn interpolated_mass_matches_nodes() {
        let p = StationaryProfile::reference(3).unwrap();
        for k in (0..p.radii().len()).step_by(997) {
            assert_relative_eq!(p.mass_at(p.radii()[k]), p.masses()[k], max_relative = 1e-12);
        }
        let grid = RadialGrid::uniform(3, 2.0, 400).unwrap();
        let mf = p.mass_function_on(&grid, 1.0, 1.0);
        assert_relative_eq!(mf.total(), p.mass(), max_relative = 1e-14);
        let u = p.density_on(&grid, 1.0, 1.0);
        assert!(u.values[300..].iter().all(|&v| v == 0.0));
    }
}
