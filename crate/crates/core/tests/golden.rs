//! Frozen reference values against an independent integration of the
//! stationary equation in `(V, M)` variables.

use pks::profile::{compute_cd, critical_mass, SharpConstants, StationaryProfile};
use pks::radial::sphere_area;

const GOLDEN_MC_D3: f64 = 202.895_207_576_52;
const GOLDEN_MC_D4: f64 = 1_992.951_825_763_95;

/// Mass of the stationary profile from `V(0) = 1`, integrating
/// `V' = −V^{2/d} M/(m σ r^{d−1})`, `M' = σ r^{d−1} V` with RK4 until `V`
/// reaches zero.
fn oracle_mass(d: usize, h: f64) -> f64 {
    let df = d as f64;
    let m = 2.0 - 2.0 / df;
    let sigma = sphere_area(d);
    let rhs = |r: f64, v: f64, mass: f64| {
        let v = v.max(0.0);
        let dv = -v.powf(2.0 / df) * mass / (m * sigma * r.powi(d as i32 - 1));
        (dv, sigma * r.powi(d as i32 - 1) * v)
    };
    // Leading terms at the origin: M ≈ σ r^d/d, V ≈ 1 − r²/(2 m d).
    let mut r = h;
    let mut v = 1.0 - r * r / (2.0 * m * df);
    let mut mass = sigma * r.powi(d as i32) / df;
    loop {
        let (k1v, k1m) = rhs(r, v, mass);
        let (k2v, k2m) = rhs(r + h / 2.0, v + h / 2.0 * k1v, mass + h / 2.0 * k1m);
        let (k3v, k3m) = rhs(r + h / 2.0, v + h / 2.0 * k2v, mass + h / 2.0 * k2m);
        let (k4v, k4m) = rhs(r + h, v + h * k3v, mass + h * k3m);
        let v_next = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let m_next = mass + h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        if v_next <= 0.0 {
            return m_next.max(mass);
        }
        v = v_next;
        mass = m_next;
        r += h;
    }
}

#[test]
fn oracle_reproduces_frozen_masses() {
    let d3 = oracle_mass(3, 2e-4);
    let d4 = oracle_mass(4, 2e-4);
    assert!((d3 / GOLDEN_MC_D3 - 1.0).abs() < 1e-6, "d=3 oracle {d3}");
    assert!((d4 / GOLDEN_MC_D4 - 1.0).abs() < 1e-6, "d=4 oracle {d4}");
}

#[test]
fn library_matches_frozen_masses() {
    for (d, golden) in [(3, GOLDEN_MC_D3), (4, GOLDEN_MC_D4)] {
        let k = SharpConstants::reference(d).unwrap();
        assert!((k.m_c_star / golden - 1.0).abs() < 1e-11, "d={d}: {}", k.m_c_star);
        let p = StationaryProfile::reference(d).unwrap();
        assert!((p.mass() / golden - 1.0).abs() < 1e-11);
    }
}

#[test]
fn sharp_constant_from_mass() {
    let k = SharpConstants::reference(3).unwrap();
    let m = k.m();
    let expect = 2.0 / ((m - 1.0) * compute_cd(3).unwrap() * GOLDEN_MC_D3.powf(2.0 / 3.0));
    assert!((k.c_star / expect - 1.0).abs() < 1e-11);
    assert!((critical_mass(2.0, &k).unwrap() / (2f64.powf(1.5) * GOLDEN_MC_D3) - 1.0).abs() < 1e-12);
}
