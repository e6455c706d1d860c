//! Radial discretization primitives.
//!
//! A radially symmetric density `u(r)` on `ℝ^d` is stored as cell averages on
//! a grid of spherical shells, and its cumulative mass
//! `M(r) = ∫_{|x|≤r} u dx` is stored at the shell faces. With densities at
//! cell centers and masses at faces, `M(0) = 0` and conservation are
//! structural: the outermost face carries the total mass and nothing else
//! can change it.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `Γ(n/2)` for a positive integer `n`, by the half-integer recursion.
fn gamma_half(n: usize) -> f64 {
    assert!(n > 0, "Γ(0) is undefined");
    let (mut value, mut k) = if n.is_multiple_of(2) { (1.0, 2) } else { (PI.sqrt(), 1) };
    while k < n {
        value *= k as f64 / 2.0;
        k += 2;
    }
    value
}

/// Surface area of the unit sphere in `ℝ^d`, `2π^{d/2}/Γ(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d)
}

/// Volume of the ball of radius `r` in `ℝ^d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    sphere_area(d) / d as f64 * r.powi(d as i32)
}

/// The L¹-critical diffusion exponent `m = 2 − 2/d`.
pub fn critical_exponent(d: usize) -> f64 {
    2.0 - 2.0 / d as f64
}

/// Dimension, total mass and mass-rescaling ratio of one simulation.
///
/// The diffusion exponent is never stored; [`ModelParams::m`] recomputes it
/// from the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    d: usize,
    total_mass: f64,
    mu: f64,
}

impl ModelParams {
    pub fn new(d: usize, total_mass: f64, mu: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!("d must be ≥ 3 (got {d})")));
        }
        if !(total_mass >= 0.0 && total_mass.is_finite()) {
            return Err(Error::Domain(format!(
                "total mass must be finite and nonnegative (got {total_mass})"
            )));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Domain(format!("mu must lie in (0, 1] (got {mu})")));
        }
        Ok(Self { d, total_mass, mu })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> f64 {
        critical_exponent(self.d)
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Coefficient of the closed drift in the mass equation, `μ^{−2/d}`.
    pub fn drift_factor(&self) -> f64 {
        self.mu.powf(-2.0 / self.d as f64)
    }
}

/// Spherical-shell grid on `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    d: usize,
    faces: Vec<f64>,
    centers: Vec<f64>,
    shells: Vec<f64>,
    face_areas: Vec<f64>,
    sigma: f64,
}

impl RadialGrid {
    /// Uniformly spaced faces.
    pub fn uniform(d: usize, r_max: f64, n_cells: usize) -> Result<Self> {
        Self::graded(d, r_max, n_cells, 1.0)
    }

    /// Geometrically graded faces: each cell is `ratio` times wider than the
    /// one inside it, so `ratio > 1` refines toward the origin.
    pub fn graded(d: usize, r_max: f64, n_cells: usize, ratio: f64) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::Validation("grid needs at least one cell".into()));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Validation(format!("r_max must be positive (got {r_max})")));
        }
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::Validation(format!("grading ratio must be positive (got {ratio})")));
        }
        let mut faces = Vec::with_capacity(n_cells + 1);
        faces.push(0.0);
        if (ratio - 1.0).abs() < 1e-14 {
            let h = r_max / n_cells as f64;
            faces.extend((1..n_cells).map(|i| i as f64 * h));
        } else {
            // h0 (q^n − 1)/(q − 1) = r_max
            let h0 = r_max * (ratio - 1.0) / (ratio.powi(n_cells as i32) - 1.0);
            let mut r = 0.0;
            let mut h = h0;
            for _ in 1..n_cells {
                r += h;
                faces.push(r);
                h *= ratio;
            }
        }
        faces.push(r_max);
        Self::from_faces(d, faces)
    }

    /// Build a grid from explicit face radii.
    pub fn from_faces(d: usize, faces: Vec<f64>) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!("d must be ≥ 3 (got {d})")));
        }
        if faces.len() < 2 || faces[0] != 0.0 {
            return Err(Error::Validation("faces must start at 0 and contain at least one cell".into()));
        }
        if faces.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("face radii must be strictly increasing".into()));
        }
        let sigma = sphere_area(d);
        let di = d as i32;
        let shells = faces
            .windows(2)
            .map(|w| sigma / d as f64 * (w[1].powi(di) - w[0].powi(di)))
            .collect();
        let centers = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let face_areas = faces.iter().map(|r| sigma * r.powi(di - 1)).collect();
        Ok(Self {
            d,
            faces,
            centers,
            shells,
            face_areas,
            sigma,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    pub fn r_max(&self) -> f64 {
        *self.faces.last().unwrap()
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Shell volumes `(σ/d)(r_{i+1}^d − r_i^d)`.
    pub fn shell_volumes(&self) -> &[f64] {
        &self.shells
    }

    /// Face areas `σ r_i^{d−1}`.
    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn width(&self, cell: usize) -> f64 {
        self.faces[cell + 1] - self.faces[cell]
    }

    pub fn min_width(&self) -> f64 {
        self.faces
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_width(&self) -> f64 {
        self.faces.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the last face with radius `≤ r`.
    pub fn face_at_or_below(&self, r: f64) -> usize {
        self.faces.partition_point(|&f| f <= r).saturating_sub(1)
    }
}

/// Radial profile of a coefficient function `a(r)` or `γ(r)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialFunction {
    Constant(f64),
    /// Piecewise-linear interpolation through `(r, value)` knots sorted by `r`;
    /// clamped to the end values outside the knot range.
    Table(Vec<(f64, f64)>),
    /// `c₀ + c₁ r + c₂ r² + …`
    Polynomial(Vec<f64>),
    /// Inner function clamped into `[lo, hi]`.
    Clamped {
        inner: Box<RadialFunction>,
        lo: f64,
        hi: f64,
    },
}

impl RadialFunction {
    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Validation("coefficient table is empty".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Validation("table radii must be strictly increasing".into()));
        }
        Ok(Self::Table(knots))
    }

    pub fn clamped(inner: RadialFunction, lo: f64, hi: f64) -> Self {
        Self::Clamped {
            inner: Box::new(inner),
            lo,
            hi,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Self::Constant(c) => *c == 0.0,
            Self::Table(knots) => knots.iter().all(|&(_, v)| v == 0.0),
            Self::Polynomial(c) => c.iter().all(|&v| v == 0.0),
            Self::Clamped { inner, lo, hi } => {
                (inner.is_identically_zero() && *lo <= 0.0 && *hi >= 0.0) || (*lo == 0.0 && *hi == 0.0)
            }
        }
    }

    /// Radii where the function has kinks (table knots), so that monotonicity
    /// checks can sample at table resolution.
    fn knots(&self) -> Vec<f64> {
        match self {
            Self::Table(k) => k.iter().map(|&(r, _)| r).collect(),
            Self::Clamped { inner, .. } => inner.knots(),
            _ => Vec::new(),
        }
    }
}

/// Deterministic evaluation of a coefficient at radius `r`. Negative radii
/// evaluate at the origin; tables clamp to their end values.
pub fn eval_coefficient(spec: &RadialFunction, r: f64) -> f64 {
    let r = r.max(0.0);
    match spec {
        RadialFunction::Constant(c) => *c,
        RadialFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &k| acc * r + k),
        RadialFunction::Table(knots) => {
            let first = knots[0];
            let last = knots[knots.len() - 1];
            if r <= first.0 {
                return first.1;
            }
            if r >= last.0 {
                return last.1;
            }
            let i = knots.partition_point(|&(x, _)| x <= r);
            let (x0, y0) = knots[i - 1];
            let (x1, y1) = knots[i];
            y0 + (y1 - y0) * (r - x0) / (x1 - x0)
        }
        RadialFunction::Clamped { inner, lo, hi } => eval_coefficient(inner, r).clamp(*lo, *hi),
    }
}

/// Chemo-attractant coefficients: diffusivity `a(r)` and decay `γ(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: RadialFunction,
    pub gamma: RadialFunction,
    /// When set, `a` is required to be nondecreasing on `[0, δ₀]`.
    pub monotone_radius: Option<f64>,
}

impl Coefficients {
    pub fn constant(a: f64) -> Self {
        Self {
            a: RadialFunction::Constant(a),
            gamma: RadialFunction::Constant(0.0),
            monotone_radius: None,
        }
    }

    pub fn new(a: RadialFunction, gamma: RadialFunction) -> Self {
        Self {
            a,
            gamma,
            monotone_radius: None,
        }
    }

    pub fn with_monotone_radius(mut self, delta0: f64) -> Self {
        self.monotone_radius = Some(delta0);
        self
    }

    pub fn a_at(&self, r: f64) -> f64 {
        eval_coefficient(&self.a, r)
    }

    pub fn gamma_at(&self, r: f64) -> f64 {
        eval_coefficient(&self.gamma, r)
    }

    pub fn gamma_is_zero(&self) -> bool {
        self.gamma.is_identically_zero()
    }

    /// Minimum of `a` over the grid's faces and centers.
    pub fn a_min_on(&self, grid: &RadialGrid) -> f64 {
        sample_points(grid).map(|r| self.a_at(r)).fold(f64::INFINITY, f64::min)
    }

    /// Check the coefficient hypotheses on the grid's sample points.
    pub fn validate(&self, grid: &RadialGrid) -> Result<()> {
        for r in sample_points(grid) {
            let a = self.a_at(r);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Validation(format!("a({r}) = {a} is not strictly positive")));
            }
            let g = self.gamma_at(r);
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Validation(format!("γ({r}) = {g} is negative")));
            }
        }
        if let Some(delta0) = self.monotone_radius {
            let mut pts: Vec<f64> = sample_points(grid).filter(|&r| r <= delta0).collect();
            pts.extend(self.a.knots().into_iter().filter(|&r| (0.0..=delta0).contains(&r)));
            pts.push(delta0);
            pts.sort_by(f64::total_cmp);
            for w in pts.windows(2) {
                let (a0, a1) = (self.a_at(w[0]), self.a_at(w[1]));
                if a1 < a0 {
                    return Err(Error::Validation(format!(
                        "a is not nondecreasing on [0, {delta0}]: a({}) = {a0} > a({}) = {a1}",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sample_points(grid: &RadialGrid) -> impl Iterator<Item = f64> + '_ {
    grid.faces().iter().chain(grid.centers()).copied()
}

/// Cumulative mass `M(r_i)` at each face of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    pub values: Vec<f64>,
}

impl MassFunction {
    /// Wrap face values after checking `M(0) = 0` and monotonicity.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mf = Self { values };
        mf.validate()?;
        Ok(mf)
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            values: vec![0.0; grid.n_cells() + 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.values.first() {
            Some(&0.0) => {}
            Some(&m0) => return Err(Error::Validation(format!("M(0) must be 0 (got {m0})"))),
            None => return Err(Error::Validation("empty mass function".into())),
        }
        if let Some(i) = self.values.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(Error::Validation(format!(
                "mass function decreases between faces {i} and {}",
                i + 1
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    /// `M(r)`, linear between faces and constant beyond the last one.
    pub fn at(&self, grid: &RadialGrid, r: f64) -> f64 {
        let faces = grid.faces();
        if r >= grid.r_max() {
            return self.total();
        }
        if r <= 0.0 {
            return 0.0;
        }
        let i = grid.face_at_or_below(r);
        let t = (r - faces[i]) / (faces[i + 1] - faces[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

/// Cell-averaged density `u(r_j)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    pub values: Vec<f64>,
}

impl RadialDensity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Validation(format!("density at cell {j} is {v}")));
        }
        Ok(Self { values })
    }

    /// Sample `f` at cell centers.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.centers().iter().map(|&r| f(r)).collect())
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Prefix sums of `u_j · shellvol_j`.
pub fn mass_from_density(u: &RadialDensity, grid: &RadialGrid) -> Result<MassFunction> {
    if u.values.len() != grid.n_cells() {
        return Err(Error::Validation(format!(
            "density has {} cells, grid has {}",
            u.values.len(),
            grid.n_cells()
        )));
    }
    if let Some((j, v)) = u.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::Validation(format!("density at cell {j} is {v}")));
    }
    let mut values = Vec::with_capacity(u.values.len() + 1);
    let mut acc = 0.0;
    values.push(acc);
    for (uj, vol) in u.values.iter().zip(grid.shell_volumes()) {
        acc += uj * vol;
        values.push(acc);
    }
    Ok(MassFunction { values })
}

/// Difference quotients `(M(r_{j+1}) − M(r_j)) / shellvol_j`.
pub fn density_from_mass(mass: &MassFunction, grid: &RadialGrid) -> Result<RadialDensity> {
    if mass.values.len() != grid.n_cells() + 1 {
        return Err(Error::Validation(format!(
            "mass function has {} faces, grid has {}",
            mass.values.len(),
            grid.n_cells() + 1
        )));
    }
    mass.validate()?;
    Ok(RadialDensity {
        values: density_values(&mass.values, grid.shell_volumes()),
    })
}

pub(crate) fn density_values(mass: &[f64], shells: &[f64]) -> Vec<f64> {
    mass.windows(2)
        .zip(shells)
        .map(|(w, vol)| (w[1] - w[0]) / vol)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn sphere_area_matches_known_values() {
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, max_relative = 1e-12);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-12);
        assert_relative_eq!(sphere_area(6), PI.powi(3), max_relative = 1e-12);
    }

    #[test]
    fn shells_sum_to_ball_volume() {
        for &(d, ratio) in &[(3, 1.0), (4, 1.0), (3, 1.01), (5, 0.995)] {
            let g = RadialGrid::graded(d, 2.5, 300, ratio).unwrap();
            let total: f64 = g.shell_volumes().iter().sum();
            assert_relative_eq!(total, ball_volume(d, 2.5), max_relative = 1e-12);
            assert!(g.shell_volumes().iter().all(|&v| v > 0.0));
            assert_eq!(g.faces()[0], 0.0);
            assert_eq!(g.r_max(), 2.5);
        }
    }

    #[test]
    fn graded_grid_refines_toward_origin() {
        let g = RadialGrid::graded(3, 1.0, 100, 1.03).unwrap();
        assert!(g.width(0) < g.width(99));
        assert_relative_eq!(g.width(1) / g.width(0), 1.03, max_relative = 1e-9);
    }

    #[test]
    fn model_params_reject_bad_inputs() {
        assert!(ModelParams::new(2, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 1.0, 0.0).is_err());
        assert!(ModelParams::new(3, 1.0, 1.5).is_err());
        assert!(ModelParams::new(3, -1.0, 1.0).is_err());
        let p = ModelParams::new(3, 1.0, 0.5).unwrap();
        assert_relative_eq!(p.m(), 4.0 / 3.0);
        assert_relative_eq!(p.drift_factor(), 0.5f64.powf(-2.0 / 3.0));
    }

    #[test]
    fn uniform_ball_mass() {
        let g = RadialGrid::uniform(3, 1.0, 64).unwrap();
        let u = RadialDensity::new(vec![1.0; 64]).unwrap();
        let m = mass_from_density(&u, &g).unwrap();
        assert_relative_eq!(m.total(), 4.0 * PI / 3.0, max_relative = 1e-12);
        assert_eq!(m.values[0], 0.0);
    }

    #[test]
    fn zero_density_has_zero_mass() {
        let g = RadialGrid::uniform(3, 1.0, 10).unwrap();
        let m = mass_from_density(&RadialDensity::new(vec![0.0; 10]).unwrap(), &g).unwrap();
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_density_is_rejected() {
        let g = RadialGrid::uniform(3, 1.0, 3).unwrap();
        let u = RadialDensity { values: vec![1.0, -1e-3, 1.0] };
        assert!(matches!(mass_from_density(&u, &g), Err(Error::Validation(_))));
    }

    #[test]
    fn ball_mass_function_gives_unit_density() {
        let g = RadialGrid::uniform(3, 1.0, 50).unwrap();
        let m = MassFunction::new(g.faces().iter().map(|r| 4.0 * PI / 3.0 * r.powi(3)).collect()).unwrap();
        let u = density_from_mass(&m, &g).unwrap();
        for v in u.values {
            assert_relative_eq!(v, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn truncated_ball_has_one_transition_cell() {
        // Faces at 0, 0.3, ..., 2.1: the jump r = 1 sits inside cell 3 = [0.9, 1.2].
        let g = RadialGrid::uniform(3, 2.1, 7).unwrap();
        let m = MassFunction::new(
            g.faces().iter().map(|r| 4.0 * PI / 3.0 * r.powi(3).min(1.0)).collect(),
        )
        .unwrap();
        let u = density_from_mass(&m, &g).unwrap();
        for j in 0..3 {
            assert_relative_eq!(u.values[j], 1.0, max_relative = 1e-12);
        }
        // (1 − 0.9³) / (1.2³ − 0.9³)
        assert_relative_eq!(u.values[3], 0.271 / 0.999, max_relative = 1e-12);
        for j in 4..7 {
            assert_eq!(u.values[j], 0.0);
        }
    }

    #[test]
    fn decreasing_mass_is_rejected() {
        let g = RadialGrid::uniform(3, 1.0, 2).unwrap();
        let m = MassFunction { values: vec![0.0, 2.0, 1.0] };
        assert!(matches!(density_from_mass(&m, &g), Err(Error::Validation(_))));
        assert!(MassFunction::new(vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn coefficient_evaluation() {
        assert_eq!(eval_coefficient(&RadialFunction::Constant(2.0), 0.7), 2.0);
        let table = RadialFunction::table(vec![(0.0, 1.0), (1.0, 3.0)]).unwrap();
        assert_eq!(eval_coefficient(&table, 0.5), 2.0);
        assert_eq!(eval_coefficient(&table, 5.0), 3.0);
        assert_eq!(eval_coefficient(&table, -1.0), 1.0);
        let poly = RadialFunction::Polynomial(vec![1.0, 0.0, 1.0]);
        assert_eq!(eval_coefficient(&poly, 2.0), 5.0);
        let clipped = RadialFunction::clamped(poly, 0.0, 2.0);
        assert_eq!(eval_coefficient(&clipped, 2.0), 2.0);
        assert_eq!(eval_coefficient(&clipped, 0.5), 1.25);
    }

    #[test]
    fn coefficient_validation() {
        let g = RadialGrid::uniform(3, 2.0, 20).unwrap();
        assert!(Coefficients::constant(1.0).validate(&g).is_ok());
        assert!(Coefficients::constant(0.0).validate(&g).is_err());
        let neg_gamma = Coefficients::new(RadialFunction::Constant(1.0), RadialFunction::Constant(-1.0));
        assert!(neg_gamma.validate(&g).is_err());
        let dip = RadialFunction::table(vec![(0.0, 1.0), (0.3, 0.9), (1.0, 2.0)]).unwrap();
        let c = Coefficients::new(dip, RadialFunction::Constant(0.0));
        assert!(c.clone().validate(&g).is_ok());
        assert!(c.with_monotone_radius(0.5).validate(&g).is_err());
        let rising = Coefficients::new(
            RadialFunction::clamped(RadialFunction::Polynomial(vec![1.0, 0.0, 1.0]), 0.0, 2.0),
            RadialFunction::Constant(0.0),
        )
        .with_monotone_radius(1.0);
        assert!(rising.validate(&g).is_ok());
        assert_eq!(rising.a_min_on(&g), 1.0);
    }

    proptest! {
        #[test]
        fn density_mass_roundtrip(values in prop::collection::vec(0.0f64..1e3, 1..60), ratio in 0.97f64..1.03) {
            let g = RadialGrid::graded(3, 3.0, values.len(), ratio).unwrap();
            let u = RadialDensity::new(values).unwrap();
            let m = mass_from_density(&u, &g).unwrap();
            let back = density_from_mass(&m, &g).unwrap();
            let scale = m.total().max(1e-300);
            for ((a, b), vol) in back.values.iter().zip(&u.values).zip(g.shell_volumes()) {
                prop_assert!((a - b).abs() * vol <= 1e-13 * scale);
            }
            let again = mass_from_density(&back, &g).unwrap();
            for (a, b) in again.values.iter().zip(&m.values) {
                prop_assert!((a - b).abs() <= 1e-13 * scale);
            }
        }
    }
}
