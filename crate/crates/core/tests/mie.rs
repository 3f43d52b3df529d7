use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;
use tevie::em::*;
use tevie::mie::*;

fn two_layer_cylinder(sigma_inner: f64) -> LayeredCylinder {
    LayeredCylinder::new(
        [0.0, 0.0],
        vec![0.05, 0.1],
        vec![
            Material::new(2.0, sigma_inner).unwrap(),
            Material::new(8.0, 0.0).unwrap(),
        ],
    )
    .unwrap()
}

fn solve(cyl: &LayeredCylinder, angle: f64) -> MieSolution {
    let wp = WaveParams::new(1e9).unwrap();
    solve_mie(cyl, &IncidentWave::new(1.0, angle, &wp), &wp).unwrap()
}

/// `H_z = -(∂_x E_y - ∂_y E_x)/(jωμ_0)` by central differences.
fn hz(sol: &MieSolution, p: [f64; 2]) -> C64 {
    let d = 1e-6;
    let e = |x: f64, y: f64| mie_total_field(sol, [x, y]).unwrap();
    let dey_dx = (e(p[0] + d, p[1])[1] - e(p[0] - d, p[1])[1]) / (2.0 * d);
    let dex_dy = (e(p[0], p[1] + d)[0] - e(p[0], p[1] - d)[0]) / (2.0 * d);
    -(dey_dx - dex_dy) / C64::new(0.0, sol.wave.omega * MU0)
}

/// Net power into a circle of radius `r`, `-∮ ½ Re(E_φ H_z^*) r dφ`.
fn absorbed_power(sol: &MieSolution, r: f64) -> f64 {
    let n = 720;
    let mut p = 0.0;
    for k in 0..n {
        let phi = 2.0 * PI * k as f64 / n as f64;
        let (s, c) = phi.sin_cos();
        let pt = [r * c, r * s];
        let e = mie_total_field(sol, pt).unwrap();
        let ephi = -e[0] * s + e[1] * c;
        p -= 0.5 * (ephi * hz(sol, pt).conj()).re * r * 2.0 * PI / n as f64;
    }
    p
}

#[test]
fn interface_residuals_for_two_layer_configuration() {
    for sigma in [0.0, 1.0, 10.0, 100.0, 1e3, 1e4] {
        let sol = solve(&two_layer_cylinder(sigma), 0.0);
        assert!(sol.max_residual <= 1e-10, "σ={sigma}: {}", sol.max_residual);
        assert!(
            sol.tail_ratio() < 1e-12,
            "σ={sigma}: tail {}",
            sol.tail_ratio()
        );
    }
}

#[test]
fn lossless_cylinder_conserves_power() {
    let sol = solve(&two_layer_cylinder(0.0), 0.0);
    let wp = sol.wave;
    // Incident power through the geometric cross-section, for scale.
    let scale = 1.0 / (2.0 * wp.eta0) * 0.2;
    let p = absorbed_power(&sol, 0.15);
    assert!(p.abs() < 1e-5 * scale, "net power {p:e} vs {scale:e}");
}

#[test]
fn lossy_cylinder_absorbs() {
    let wp = WaveParams::new(1e9).unwrap();
    let scale = 1.0 / (2.0 * wp.eta0) * 0.2;
    for sigma in [0.1, 1.0, 10.0] {
        let sol = solve(&two_layer_cylinder(sigma), 0.0);
        let p = absorbed_power(&sol, 0.15);
        assert!(p > 1e-4 * scale, "σ={sigma}: {p:e}");
        // Power is independent of the enclosing circle.
        let p2 = absorbed_power(&sol, 0.3);
        assert!((p - p2).abs() < 1e-4 * p.abs());
    }
}

#[test]
fn scattered_field_decays_as_inverse_sqrt() {
    let sol = solve(&two_layer_cylinder(0.0), 0.0);
    for phi in [0.0f64, 1.0, 2.5] {
        let at = |r: f64| {
            let (er, ep) = mie_scattered_field(&sol, [r * phi.cos(), r * phi.sin()]).unwrap();
            (er.norm_sqr() + ep.norm_sqr()).sqrt() * r.sqrt()
        };
        let (a, b) = (at(20.0), at(40.0));
        assert!((a - b).abs() < 0.01 * a, "φ={phi}: {a} vs {b}");
        // Radial component is O(ρ^{-3/2}).
        let (er, _) = mie_scattered_field(&sol, [40.0 * phi.cos(), 40.0 * phi.sin()]).unwrap();
        assert!(er.norm() * 40f64.sqrt() < 0.01 * b);
    }
}

#[test]
fn interior_points_are_rejected_for_scattered_field() {
    let sol = solve(&two_layer_cylinder(0.0), 0.0);
    assert!(matches!(
        mie_scattered_field(&sol, [0.05, 0.0]),
        Err(MieError::InteriorPoint { .. })
    ));
}

#[test]
fn scattered_field_satisfies_helmholtz() {
    let sol = solve(&two_layer_cylinder(10.0), 0.3);
    let k0 = sol.wave.k0;
    let d = 1e-4;
    for p in [[0.15, 0.0], [-0.1, 0.2], [0.0, -0.5]] {
        let e = |x: f64, y: f64| {
            let (er, ep) = mie_scattered_field(&sol, [x, y]).unwrap();
            let r = x.hypot(y);
            let (c, s) = (x / r, y / r);
            [er * c - ep * s, er * s + ep * c]
        };
        let c = e(p[0], p[1]);
        for k in 0..2 {
            let lap = (e(p[0] + d, p[1])[k]
                + e(p[0] - d, p[1])[k]
                + e(p[0], p[1] + d)[k]
                + e(p[0], p[1] - d)[k]
                - 4.0 * c[k])
                / (d * d);
            let res = lap + k0 * k0 * c[k];
            assert!(res.norm() < 1e-4 * k0 * k0 * (c[0].norm() + c[1].norm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// `D·ρ̂` and `E·φ̂` are continuous across every interface.
    #[test]
    fn boundary_conditions_hold(phi in 0.0f64..(2.0 * PI), sigma in 0.0f64..100.0, angle in 0.0f64..(2.0 * PI)) {
        let cyl = two_layer_cylinder(sigma);
        let sol = solve(&cyl, angle);
        let wp = sol.wave;
        let eps: Vec<C64> = cyl.materials.iter().map(|m| relative_permittivity(m, &wp)).collect();
        let (s, c) = phi.sin_cos();
        for (i, &r) in cyl.radii.iter().enumerate() {
            let inner = mie_total_field(&sol, [r * (1.0 - 1e-9) * c, r * (1.0 - 1e-9) * s]).unwrap();
            let outer = mie_total_field(&sol, [r * (1.0 + 1e-9) * c, r * (1.0 + 1e-9) * s]).unwrap();
            let eps_out = if i + 1 < eps.len() { eps[i + 1] } else { C64::new(1.0, 0.0) };
            let dn_in = eps[i] * (inner[0] * c + inner[1] * s);
            let dn_out = eps_out * (outer[0] * c + outer[1] * s);
            let et_in = -inner[0] * s + inner[1] * c;
            let et_out = -outer[0] * s + outer[1] * c;
            let scale = dn_in.norm() + dn_out.norm() + 1e-3;
            prop_assert!((dn_in - dn_out).norm() < 1e-6 * scale);
            prop_assert!((et_in - et_out).norm() < 1e-6 * (et_in.norm() + 1e-3));
        }
    }

    /// Rotating the incidence rotates the scattered field.
    #[test]
    fn rotation_covariance(angle in 0.0f64..(2.0 * PI), phi in 0.0f64..(2.0 * PI)) {
        let cyl = two_layer_cylinder(0.0);
        let a = solve(&cyl, 0.0);
        let b = solve(&cyl, angle);
        let r = 0.15;
        let ea = mie_scattered_field(&a, [r * phi.cos(), r * phi.sin()]).unwrap();
        let eb = mie_scattered_field(&b, [r * (phi + angle).cos(), r * (phi + angle).sin()]).unwrap();
        prop_assert!((ea.0 - eb.0).norm() < 1e-10 && (ea.1 - eb.1).norm() < 1e-10);
    }

    #[test]
    fn vacuum_layers_do_not_scatter(r1 in 0.01f64..0.1, dr in 0.01f64..0.1) {
        let cyl = LayeredCylinder::new([0.1, -0.2], vec![r1, r1 + dr], vec![Material::VACUUM; 2]).unwrap();
        let sol = solve(&cyl, 0.7);
        prop_assert!(sol.coefficients.iter().all(|c| c.norm() == 0.0));
    }
}
