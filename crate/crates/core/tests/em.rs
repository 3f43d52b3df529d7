mod common;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;
use tevie::em::*;

fn wp() -> WaveParams {
    WaveParams::new(1e9).unwrap()
}

#[test]
fn wavenumber_at_one_gigahertz() {
    let w = wp();
    // c = 299 792 458 m/s
    assert!((w.k0 - 2.0 * PI * 1e9 / 299_792_458.0).abs() < 1e-9 * w.k0);
    assert!((w.eta0 - 376.730_313_4).abs() < 1e-6);
    assert!(WaveParams::new(0.0).is_err());
    assert!(WaveParams::new(f64::NAN).is_err());
}

#[test]
fn green_matches_series_oracle() {
    let w = wp();
    for r in [1e-4, 1e-2, 0.05, 0.1, 0.2] {
        let g = green_of_distance(w.k0, r);
        let o = common::green_oracle(w.k0, r);
        assert!((g - o).norm() < 1e-12 * o.norm(), "R={r}: {g} vs {o}");
    }
}

#[test]
fn contrast_examples() {
    let w = wp();
    assert_eq!(contrast(&Material::VACUUM, &w), C64::new(0.0, 0.0));
    let c = contrast(&Material::new(2.0, 0.0).unwrap(), &w);
    assert!((c - 0.5).norm() < 1e-15);
    let c = contrast(&Material::new(8.0, 0.0).unwrap(), &w);
    assert!((c - 0.875).norm() < 1e-15);
    assert!(Material::new(0.5, 0.0).is_err());
    assert!(Material::new(2.0, -1.0).is_err());
}

proptest! {
    #[test]
    fn green_solves_helmholtz_away_from_source(x in 0.05f64..0.5, y in -0.5f64..0.5) {
        let w = wp();
        let g = |a: f64, b: f64| green_of_distance(w.k0, a.hypot(b));
        let h = 1e-4;
        let lap = (g(x + h, y) + g(x - h, y) + g(x, y + h) + g(x, y - h) - 4.0 * g(x, y)) / (h * h);
        let res = lap + w.k0 * w.k0 * g(x, y);
        prop_assert!(res.norm() < 1e-4 * w.k0 * w.k0 * g(x, y).norm());
    }

    #[test]
    fn green_is_reciprocal(ax in -1.0f64..1.0, ay in -1.0f64..1.0, bx in -1.0f64..1.0, by in -1.0f64..1.0) {
        let w = wp();
        prop_assume!((ax - bx).hypot(ay - by) > 1e-6);
        let a = green(&w, [ax, ay], [bx, by]).unwrap();
        let b = green(&w, [bx, by], [ax, ay]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gradient_matches_finite_difference(x in 0.02f64..0.5, y in -0.5f64..0.5) {
        let w = wp();
        let h = 1e-6;
        let gr = grad_green(&w, [x, y], [0.0, 0.0]).unwrap();
        let fx = (green(&w, [x + h, y], [0.0, 0.0]).unwrap() - green(&w, [x - h, y], [0.0, 0.0]).unwrap()) / (2.0 * h);
        let fy = (green(&w, [x, y + h], [0.0, 0.0]).unwrap() - green(&w, [x, y - h], [0.0, 0.0]).unwrap()) / (2.0 * h);
        let scale = gr[0].norm() + gr[1].norm();
        prop_assert!((gr[0] - fx).norm() < 1e-6 * scale);
        prop_assert!((gr[1] - fy).norm() < 1e-6 * scale);
    }

    /// Lossy media with `e^{+jωt}` have `Im ε ≤ 0`, and so `Im χ ≤ 0`.
    #[test]
    fn lossy_contrast_is_passive(eps_r in 1.0f64..50.0, sigma in 0.0f64..1e4) {
        let w = wp();
        let m = Material::new(eps_r, sigma).unwrap();
        prop_assert!(complex_permittivity(&m, &w).im <= 0.0);
        let c = contrast(&m, &w);
        prop_assert!(c.im <= 0.0);
        // |1 - χ| = |ε_0/ε| ≤ 1
        prop_assert!((1.0 - c).norm() <= 1.0 + 1e-15);
    }

    /// Outgoing: phase decreases with distance as `e^{-jk_0 R}`.
    #[test]
    fn green_is_outgoing(r in 5.0f64..50.0) {
        let w = wp();
        let a = green_of_distance(w.k0, r);
        let b = green_of_distance(w.k0, r + 1e-3);
        let dphase = (b / a).arg();
        prop_assert!((dphase + w.k0 * 1e-3).abs() < 1e-3 * w.k0 * 1e-3 + 1e-9);
    }

    #[test]
    fn incident_field_is_transverse_plane_wave(angle in 0.0f64..(2.0 * PI), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let w = wp();
        let inc = IncidentWave::new(2.0, angle, &w);
        let e = incident_field(&inc, &w, [x, y]);
        let k = inc.direction;
        prop_assert!((e[0] * k[0] + e[1] * k[1]).norm() < 1e-14);
        prop_assert!(((e[0].norm_sqr() + e[1].norm_sqr()).sqrt() - 2.0).abs() < 1e-14);
        // E = η_0 H_z (ẑ × k̂)
        let hz = inc.hz(&w, [x, y]);
        let p = inc.polarization();
        prop_assert!((e[0] - w.eta0 * hz * p[0]).norm() < 1e-12);
        prop_assert!((p[0] + k[1]).abs() < 1e-15 && (p[1] - k[0]).abs() < 1e-15);
    }

    #[test]
    fn smooth_part_is_continuous_at_zero(r in 1e-9f64..1e-6) {
        let w = wp();
        let lim = green_smooth_limit(w.k0);
        let v = green_smooth_of_distance(w.k0, r);
        prop_assert!((v - lim).norm() < 1e-9);
        let full = green_of_distance(w.k0, r);
        prop_assert!((full - (v + r.ln() / (2.0 * PI))).norm() < 1e-12 * full.norm());
    }
}
