//! Matrix entries by nested near-singular quadrature, independent of the
//! library's extraction.

use super::{green_oracle, integrate_segment_near, near_rule, outer_rule};
use num_complex::Complex64 as C64;
use tevie::assembly::{contrast_table, KERNEL_SIGN, LINE_CHARGE_SIGN};
use tevie::em::{contrast, Material, WaveParams};
use tevie::geom::{self, Point};
use tevie::mesh::*;

pub const K0: f64 = 2.0 * std::f64::consts::PI * 1e9 / 299_792_458.0;

pub fn jk() -> C64 {
    C64::new(0.0, K0)
}

pub fn two_region_mesh(h: f64) -> (Mesh, Vec<RwgEdge>, Vec<C64>) {
    let wp = WaveParams::new(1e9).unwrap();
    let mesh = build_layered_disk_mesh(&[0.05, 0.1], h).unwrap();
    let rwgs = extract_rwg_edges(&mesh);
    let mats = [
        Material::new(2.0, 0.0).unwrap(),
        Material::new(8.0, 0.5).unwrap(),
    ];
    let chi_r: Vec<C64> = mats.iter().map(|m| contrast(m, &wp)).collect();
    let chi = contrast_table(&mesh, &chi_r);
    (mesh, rwgs, chi)
}

pub fn tri(mesh: &Mesh, t: usize) -> [Point; 3] {
    mesh.triangle_points(t)
}

/// Source quantities of RWG `n` seen from `r`: `(∫ g χ f_n, ∫ g ∇'·(χ f_n))`,
/// including the line charge on its edge.
pub fn source_integrals(
    mesh: &Mesh,
    f: &RwgEdge,
    chi: &[C64],
    r: Point,
    n: usize,
) -> ([C64; 2], C64) {
    let g = |rp: Point| KERNEL_SIGN * green_oracle(K0, geom::dist(r, rp));
    let mut a = [C64::new(0.0, 0.0); 2];
    let mut phi = C64::new(0.0, 0.0);
    for side in [Side::Plus, Side::Minus] {
        let t = f.triangle(side);
        let c = chi[t];
        for (rp, w) in near_rule(&tri(mesh, t), r, n) {
            let gw = w * c * g(rp);
            let v = f.eval(side, rp);
            a[0] += gw * v[0];
            a[1] += gw * v[1];
            phi += gw * f.div(side);
        }
    }
    let lam = LINE_CHARGE_SIGN * (chi[f.minus] - chi[f.plus]) / f.length;
    if lam != C64::new(0.0, 0.0) {
        phi += lam * integrate_segment_near(f.endpoints[0], f.endpoints[1], r, g, n);
    }
    (a, phi)
}

/// `(Z_A[m][n], Z_φ[m][n])` by nested near-singular quadrature.
pub fn entry_oracle(
    mesh: &Mesh,
    rwgs: &[RwgEdge],
    chi: &[C64],
    m: usize,
    n: usize,
    res: usize,
) -> (C64, C64) {
    let (fm, fn_) = (&rwgs[m], &rwgs[n]);
    let mut za = C64::new(0.0, 0.0);
    let mut zp = C64::new(0.0, 0.0);
    for side in [Side::Plus, Side::Minus] {
        let pts = tri(mesh, fm.triangle(side));
        for (r, w) in outer_rule(&pts, res) {
            let (a, phi) = source_integrals(mesh, fn_, chi, r, res);
            let v = fm.eval(side, r);
            za += w * (v[0] * a[0] + v[1] * a[1]);
            zp += w * fm.div(side) * phi;
        }
    }
    (jk() * za, zp / jk())
}

pub fn shares_vertex(mesh: &Mesh, a: usize, b: usize) -> bool {
    let (ta, tb) = (mesh.triangles()[a].v, mesh.triangles()[b].v);
    ta.iter().any(|v| tb.contains(v))
}
