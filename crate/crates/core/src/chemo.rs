//! The radial chemo-attractant `c` solving `−∇·(a∇c) + γc = s·u`.
//!
//! `s` is the source scale: 1 for the original system and `μ^{−1}` for the
//! mass-rescaled one.

use crate::error::{Error, Result};
use crate::profile::compute_cd;
use crate::radial::{density_values, Coefficients, MassFunction, RadialDensity, RadialGrid};

/// Potential at cell centers and its radial derivative at faces.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemoField {
    pub c_values: Vec<f64>,
    pub dc_dr: Vec<f64>,
    pub source_mass_scale: f64,
}

impl ChemoField {
    /// Direct quadrature `(1/2)·Σ u_j c_j shellvol_j`.
    pub fn interaction_energy(&self, u: &RadialDensity, grid: &RadialGrid) -> f64 {
        0.5 * u
            .values
            .iter()
            .zip(&self.c_values)
            .zip(grid.shell_volumes())
            .map(|((u, c), v)| u * c * v)
            .sum::<f64>()
    }
}

/// Far-field potential at `r_max` for constant diffusivity `a_far` beyond it.
fn far_field(total: f64, a_far: f64, grid: &RadialGrid, scale: f64) -> Result<f64> {
    let d = grid.d();
    Ok(scale * total * compute_cd(d)? / (a_far * grid.r_max().powi(d as i32 - 2)))
}

/// Closed-form field for `γ ≡ 0`: `c'(r) = −s·M(r)/(σ r^{d−1} a(r))`, with the
/// potential recovered by inward trapezoid integration from the far-field
/// value `s·M·c_d/(a(r_max)·r_max^{d−2})`.
pub fn solve_gamma_zero(
    mass: &MassFunction,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    source_mass_scale: f64,
) -> Result<ChemoField> {
    if !coeffs.gamma_is_zero() {
        return Err(Error::WrongSolver(
            "γ is not identically zero; use solve_gamma_positive".into(),
        ));
    }
    check_faces(mass, grid)?;
    let faces = grid.faces();
    let areas = grid.face_areas();
    let n = grid.n_cells();
    let mut dc_dr = vec![0.0; n + 1];
    for i in 1..=n {
        dc_dr[i] = -source_mass_scale * mass.values[i] / (areas[i] * coeffs.a_at(faces[i]));
    }
    let mut c_face = far_field(mass.total(), coeffs.a_at(grid.r_max()), grid, source_mass_scale)?;
    let mut c_values = vec![0.0; n];
    for j in (0..n).rev() {
        let h = faces[j + 1] - faces[j];
        let mid = 0.5 * (dc_dr[j] + dc_dr[j + 1]);
        c_values[j] = c_face - 0.25 * h * (mid + dc_dr[j + 1]);
        c_face -= 0.5 * h * (dc_dr[j] + dc_dr[j + 1]);
    }
    Ok(ChemoField {
        c_values,
        dc_dr,
        source_mass_scale,
    })
}

/// Finite-volume solve of the two-point problem with `c'(0) = 0` and
/// `c(r_max) = 0`; one tridiagonal system on cell centers.
pub fn solve_gamma_positive(
    u: &RadialDensity,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    source_mass_scale: f64,
) -> Result<ChemoField> {
    let n = grid.n_cells();
    if u.values.len() != n {
        return Err(Error::Validation(format!("density has {} cells, grid has {n}", u.values.len())));
    }
    let faces = grid.faces();
    let centers = grid.centers();
    let areas = grid.face_areas();
    let vols = grid.shell_volumes();
    // Conductance of each face; face 0 has zero area.
    let mut cond = vec![0.0; n + 1];
    for i in 1..n {
        cond[i] = areas[i] * coeffs.a_at(faces[i]) / (centers[i] - centers[i - 1]);
    }
    cond[n] = areas[n] * coeffs.a_at(faces[n]) / (faces[n] - centers[n - 1]);

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        diag[j] = cond[j] + cond[j + 1] + coeffs.gamma_at(centers[j]) * vols[j];
        if j > 0 {
            lower[j] = -cond[j];
        }
        if j + 1 < n {
            upper[j] = -cond[j + 1];
        }
        rhs[j] = source_mass_scale * u.values[j] * vols[j];
    }
    let c_values = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut dc_dr = vec![0.0; n + 1];
    for i in 1..n {
        dc_dr[i] = (c_values[i] - c_values[i - 1]) / (centers[i] - centers[i - 1]);
    }
    dc_dr[n] = -c_values[n - 1] / (faces[n] - centers[n - 1]);
    Ok(ChemoField {
        c_values,
        dc_dr,
        source_mass_scale,
    })
}

/// Thomas algorithm. `lower[0]` and `upper[n−1]` are ignored.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Internal("singular tridiagonal system".into()));
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Internal(format!("singular tridiagonal system at row {i}")));
        }
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn check_faces(mass: &MassFunction, grid: &RadialGrid) -> Result<()> {
    if mass.values.len() != grid.n_cells() + 1 {
        return Err(Error::Validation(format!(
            "mass function has {} faces, grid has {}",
            mass.values.len(),
            grid.n_cells() + 1
        )));
    }
    Ok(())
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// `(s/2)·∫ M²/(σ r^{d−1} a) dr` over `[0, ∞)`, for `γ ≡ 0`. Inside each cell
/// the mass function is the exact one of a piecewise-constant density; beyond
/// `r_max` the mass is the total and `a = a(r_max)`.
pub fn potential_energy_closed_form(
    mass: &MassFunction,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    source_mass_scale: f64,
) -> Result<f64> {
    check_faces(mass, grid)?;
    let a: Vec<f64> = gauss_points(grid).map(|r| coeffs.a_at(r)).collect();
    let far = coeffs.a_at(grid.r_max());
    Ok(closed_form_with(&mass.values, grid, &a, far, source_mass_scale))
}

pub(crate) fn gauss_points(grid: &RadialGrid) -> impl Iterator<Item = f64> + '_ {
    grid.faces().windows(2).flat_map(|w| {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        GAUSS4.iter().map(move |&(x, _)| mid + half * x)
    })
}

/// Closed-form energy with `a` pre-sampled at the four Gauss points per cell.
pub(crate) fn closed_form_with(mass: &[f64], grid: &RadialGrid, a_gauss: &[f64], a_far: f64, scale: f64) -> f64 {
    let d = grid.d();
    let di = d as i32;
    let sigma = grid.sigma();
    let faces = grid.faces();
    let mut total = 0.0;
    for (j, w) in faces.windows(2).enumerate() {
        let (r0, r1) = (w[0], w[1]);
        let (mid, half) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
        let rate = (mass[j + 1] - mass[j]) / (r1.powi(di) - r0.powi(di));
        let base = r0.powi(di);
        let mut cell = 0.0;
        for (q, &(x, wt)) in GAUSS4.iter().enumerate() {
            let r = mid + half * x;
            let mr = mass[j] + rate * (r.powi(di) - base);
            cell += wt * mr * mr / (r.powi(di - 1) * a_gauss[4 * j + q]);
        }
        total += half * cell / sigma;
    }
    let m_tot = *mass.last().unwrap();
    let tail = m_tot * m_tot / (sigma * a_far * (d as f64 - 2.0) * grid.r_max().powi(di - 2));
    0.5 * scale * (total + tail)
}

/// Interaction energy `(1/2)∫u c`: closed form when `γ ≡ 0`, otherwise the
/// direct quadrature of the boundary-value solution.
pub fn potential_energy(
    mass: &MassFunction,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    source_mass_scale: f64,
) -> Result<f64> {
    if coeffs.gamma_is_zero() {
        return potential_energy_closed_form(mass, coeffs, grid, source_mass_scale);
    }
    check_faces(mass, grid)?;
    let u = RadialDensity {
        values: density_values(&mass.values, grid.shell_volumes()),
    };
    let field = solve_gamma_positive(&u, coeffs, grid, source_mass_scale)?;
    Ok(field.interaction_energy(&u, grid))
}
