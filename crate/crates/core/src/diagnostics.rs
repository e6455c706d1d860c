//! Scalar diagnostics: free energy, the sharp-HLS ratio, the concentration
//! monitor, and the reverse-Hölder family.

use crate::chemo::{closed_form_with, gauss_points, solve_gamma_positive};
use crate::error::{Error, Result};
use crate::profile::SharpConstants;
use crate::radial::{
    critical_exponent, density_values, Coefficients, MassFunction, ModelParams, RadialDensity, RadialGrid,
};

/// One sampled time of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub peak_density: f64,
    pub entropy: f64,
    pub potential_energy: f64,
    pub free_energy: f64,
    pub total_mass: f64,
    pub comparison_gap: Option<f64>,
    pub local_mass_at_origin: f64,
}

/// Entropy, interaction energy, and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub entropy: f64,
    pub potential_energy: f64,
    pub free_energy: f64,
}

/// Free-energy evaluator with coefficient samples cached for one grid.
///
/// In the frame with mass ratio `μ` the interaction is weighted by
/// `μ^{−2/d}`: the drift factor `μ^{1−2/d}` times the source scale `μ^{−1}`.
/// With `μ = 1` this is the plain `(1/(m−1))∫u^m − (1/2)∫uc`.
#[derive(Debug, Clone)]
pub struct Energetics {
    grid: RadialGrid,
    coeffs: Coefficients,
    m: f64,
    weight: f64,
    a_gauss: Vec<f64>,
    a_far: f64,
    gamma_zero: bool,
}

impl Energetics {
    pub fn new(params: &ModelParams, coeffs: &Coefficients, grid: &RadialGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: coeffs.clone(),
            m: params.m(),
            weight: params.drift_factor(),
            a_gauss: gauss_points(grid).map(|r| coeffs.a_at(r)).collect(),
            a_far: coeffs.a_at(grid.r_max()),
            gamma_zero: coeffs.gamma_is_zero(),
        }
    }

    pub fn entropy(&self, u: &[f64]) -> f64 {
        let m = self.m;
        u.iter()
            .zip(self.grid.shell_volumes())
            .filter(|(u, _)| **u > 0.0)
            .map(|(u, v)| u.powf(m) * v)
            .sum::<f64>()
            / (m - 1.0)
    }

    pub fn potential_energy(&self, mass: &[f64], u: &[f64]) -> Result<f64> {
        if self.gamma_zero {
            return Ok(closed_form_with(mass, &self.grid, &self.a_gauss, self.a_far, self.weight));
        }
        let density = RadialDensity { values: u.to_vec() };
        let field = solve_gamma_positive(&density, &self.coeffs, &self.grid, 1.0)?;
        Ok(self.weight * field.interaction_energy(&density, &self.grid))
    }

    pub fn evaluate(&self, mass: &[f64]) -> Result<EnergyParts> {
        let u = density_values(mass, self.grid.shell_volumes());
        let entropy = self.entropy(&u);
        let potential_energy = self.potential_energy(mass, &u)?;
        Ok(EnergyParts {
            entropy,
            potential_energy,
            free_energy: entropy - potential_energy,
        })
    }
}

/// `F = (1/(m−1))∫u^m − (1/2)∫uc`, weighted for the frame of `params.mu()`.
pub fn free_energy(
    mass: &MassFunction,
    params: &ModelParams,
    coeffs: &Coefficients,
    grid: &RadialGrid,
) -> Result<EnergyParts> {
    if mass.values.len() != grid.n_cells() + 1 {
        return Err(Error::Validation("mass function does not match the grid".into()));
    }
    mass.validate()?;
    Energetics::new(params, coeffs, grid).evaluate(&mass.values)
}

/// `D(f)/(‖f‖₁^{2−m}‖f‖_m^m)` with `D(f) = ∫∫ f(x)f(y)|x−y|^{2−d}` reduced
/// to `(1/c_d)∫ M²/(σ r^{d−1}) dr`.
pub fn hls_ratio(u: &RadialDensity, grid: &RadialGrid, k: &SharpConstants) -> Result<f64> {
    let mass = crate::radial::mass_from_density(u, grid)?;
    let total = mass.total();
    if total <= 0.0 {
        return Err(Error::Domain("HLS ratio of the zero density".into()));
    }
    let m = critical_exponent(grid.d());
    let ones = vec![1.0; 4 * grid.n_cells()];
    let interaction = 2.0 * closed_form_with(&mass.values, grid, &ones, 1.0, 1.0) / k.c_d;
    let lm: f64 = u
        .values
        .iter()
        .zip(grid.shell_volumes())
        .map(|(u, v)| u.powf(m) * v)
        .sum();
    Ok(interaction / (total.powf(2.0 - m) * lm))
}

/// Mass near the origin compared with the concentration threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReading {
    pub local_mass: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// Early-warning fraction of the concentration threshold.
pub const CONCENTRATION_WARNING: f64 = 0.9;

/// Mass inside `r_probe` against `a(0)^{d/2}·M_c⋆`; flagged at 90% of it.
pub fn concentration_monitor(
    mass: &MassFunction,
    grid: &RadialGrid,
    coeffs: &Coefficients,
    k: &SharpConstants,
    r_probe: f64,
) -> ConcentrationReading {
    let local_mass = mass.at(grid, r_probe);
    let threshold = coeffs.a_at(0.0).powf(k.d as f64 / 2.0) * k.m_c_star;
    ConcentrationReading {
        local_mass,
        threshold,
        flagged: local_mass >= CONCENTRATION_WARNING * threshold,
    }
}

/// Norms of `f_δ(x) = (δ + |x|)^{−α}` on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverseHolderNorms {
    pub l1: f64,
    /// The `L^{2d/(d+2)}` norm.
    pub l_sobolev: f64,
    /// The `L^m` norm.
    pub lm: f64,
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

/// Quadrature of the three norms on the cells of `grid` inside the unit
/// ball. `alpha` must lie strictly inside `(d/m, (d+2)/2)`.
pub fn reverse_holder_family(delta: f64, alpha: f64, d: usize, grid: &RadialGrid) -> Result<ReverseHolderNorms> {
    if d < 3 {
        return Err(Error::Domain(format!("d must be ≥ 3 (got {d})")));
    }
    let m = critical_exponent(d);
    let df = d as f64;
    let (lo, hi) = (df / m, (df + 2.0) / 2.0);
    if !(alpha > lo && alpha < hi) {
        return Err(Error::Domain(format!("alpha must lie in ({lo}, {hi}) (got {alpha})")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1] (got {delta})")));
    }
    if grid.d() != d {
        return Err(Error::Validation("grid dimension does not match d".into()));
    }
    if grid.r_max() < 1.0 {
        return Err(Error::Validation("grid must cover the unit ball".into()));
    }
    let p_sob = 2.0 * df / (df + 2.0);
    let sigma = grid.sigma();
    let mut sums = [0.0; 3];
    for w in grid.faces().windows(2) {
        let (r0, r1) = (w[0], w[1].min(1.0));
        if r0 >= 1.0 {
            break;
        }
        let (mid, half) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
        for &(x, wt) in &GAUSS8 {
            let r = mid + half * x;
            let jac = wt * half * sigma * r.powi(d as i32 - 1);
            let f = (delta + r).powf(-alpha);
            sums[0] += jac * f;
            sums[1] += jac * f.powf(p_sob);
            sums[2] += jac * f.powf(m);
        }
    }
    Ok(ReverseHolderNorms {
        l1: sums[0],
        l_sobolev: sums[1].powf(1.0 / p_sob),
        lm: sums[2].powf(1.0 / m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::StationaryProfile;
    use crate::radial::mass_from_density;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_params(total: f64) -> ModelParams {
        ModelParams::new(3, total, 1.0).unwrap()
    }

    #[test]
    fn zero_density_has_zero_energy() {
        let grid = RadialGrid::uniform(3, 2.0, 40).unwrap();
        let e = free_energy(&MassFunction::zeros(&grid), &unit_params(0.0), &Coefficients::constant(1.0), &grid).unwrap();
        assert_eq!((e.entropy, e.potential_energy, e.free_energy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn uniform_ball_energy() {
        let grid = RadialGrid::uniform(3, 4.0, 4000).unwrap();
        let u = RadialDensity::from_fn(&grid, |r| if r < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let mass = mass_from_density(&u, &grid).unwrap();
        let e = free_energy(&mass, &unit_params(mass.total()), &Coefficients::constant(1.0), &grid).unwrap();
        assert_relative_eq!(e.entropy, 4.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(e.potential_energy, 4.0 * PI / 15.0, max_relative = 1e-10);
        assert_eq!(e.free_energy, e.entropy - e.potential_energy);
    }

    #[test]
    fn extremals_have_zero_free_energy() {
        let profile = StationaryProfile::reference(3).unwrap();
        for radius in [0.25, 1.0, 4.0] {
            let grid = RadialGrid::uniform(3, 8.0 * radius, 4000).unwrap();
            let mass = profile.mass_function_on(&grid, radius, 1.0);
            let e = free_energy(&mass, &unit_params(mass.total()), &Coefficients::constant(1.0), &grid).unwrap();
            assert!(e.free_energy.abs() <= 1e-4 * e.entropy, "R={radius}: {e:?}");
        }
    }

    #[test]
    fn entropy_scale_covariance() {
        let profile = StationaryProfile::reference(3).unwrap();
        let m = 4.0 / 3.0;
        let values: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&radius| {
                let grid = RadialGrid::uniform(3, 2.0 * radius, 2000).unwrap();
                let mass = profile.mass_function_on(&grid, radius, 1.0);
                let e = free_energy(&mass, &unit_params(mass.total()), &Coefficients::constant(1.0), &grid).unwrap();
                e.entropy * radius.powf(3.0 * (m - 1.0))
            })
            .collect();
        for v in &values[1..] {
            assert_relative_eq!(*v, values[0], max_relative = 1e-6);
        }
    }

    #[test]
    fn hls_ratio_of_extremal_and_bump() {
        let k = SharpConstants::reference(3).unwrap();
        let profile = StationaryProfile::reference(3).unwrap();
        let mut ratios = Vec::new();
        for radius in [0.5, 1.0, 2.0] {
            let grid = RadialGrid::uniform(3, 2.0 * radius, 2000).unwrap();
            let u = profile.density_on(&grid, radius, 1.0);
            ratios.push(hls_ratio(&u, &grid, &k).unwrap());
        }
        assert_relative_eq!(ratios[1], k.c_star, max_relative = 1e-3);
        for r in &ratios[1..] {
            assert_relative_eq!(*r, ratios[0], max_relative = 1e-6);
        }
        let grid = RadialGrid::uniform(3, 8.0, 2000).unwrap();
        let bump = RadialDensity::from_fn(&grid, |r| (-r * r).exp()).unwrap();
        let ratio = hls_ratio(&bump, &grid, &k).unwrap();
        assert!(ratio < k.c_star, "{ratio} vs {}", k.c_star);
        let zero = RadialDensity::new(vec![0.0; 2000]).unwrap();
        assert!(matches!(hls_ratio(&zero, &grid, &k), Err(Error::Domain(_))));
    }

    #[test]
    fn concentration_threshold_scales_with_diffusivity() {
        let k = SharpConstants::reference(3).unwrap();
        let grid = RadialGrid::uniform(3, 4.0, 400).unwrap();
        let u = RadialDensity::from_fn(&grid, |r| (-r * r).exp()).unwrap();
        let mut mass = mass_from_density(&u, &grid).unwrap();
        let scale = 0.5 * k.m_c_star / mass.total();
        mass.values.iter_mut().for_each(|v| *v *= scale);
        let reading = concentration_monitor(&mass, &grid, &Coefficients::constant(2.0), &k, 0.2);
        assert_relative_eq!(reading.threshold, 2f64.powf(1.5) * k.m_c_star, max_relative = 1e-14);
        assert!(!reading.flagged);
    }

    #[test]
    fn reverse_holder_domain_and_finite_values() {
        let grid = RadialGrid::graded(3, 1.0, 400, 1.03).unwrap();
        assert!(reverse_holder_family(0.5, 2.2, 3, &grid).is_err());
        assert!(reverse_holder_family(0.5, 2.5, 3, &grid).is_err());
        let n = reverse_holder_family(1.0, 2.4, 3, &grid).unwrap();
        for v in [n.l1, n.l_sobolev, n.lm] {
            assert!(v.is_finite() && v > 0.0);
        }
        // ∫_{B₁} (1+|x|)^{−2.4} dx in closed form.
        let exact = {
            let f = |r: f64| {
                let s = 1.0 + r;
                s.powf(0.6) / 0.6 - 2.0 * s.powf(-0.4) / -0.4 + s.powf(-1.4) / -1.4
            };
            4.0 * PI * (f(1.0) - f(0.0))
        };
        assert_relative_eq!(n.l1, exact, max_relative = 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn hls_inequality_holds_for_bump_mixtures(
            bumps in prop::collection::vec((0.05f64..1.0, 0.0f64..1.5, 0.1f64..2.0), 1..4)
        ) {
            let k = SharpConstants::reference(3).unwrap();
            let grid = RadialGrid::uniform(3, 6.0, 600).unwrap();
            let u = RadialDensity::from_fn(&grid, |r| {
                bumps.iter().map(|&(w, c, h)| h * (-((r - c) / w).powi(2)).exp()).sum()
            }).unwrap();
            let ratio = hls_ratio(&u, &grid, &k).unwrap();
            prop_assert!(ratio <= k.c_star * (1.0 + 1e-3), "{} > {}", ratio, k.c_star);
        }
    }
}
