//! Independent numerical oracles for the integration tests. Nothing here calls
//! the library's quadrature or special functions except where a test compares
//! against them explicitly.

#![allow(dead_code)]

pub mod entries;

use num_complex::Complex64 as C64;

pub type P = [f64; 2];

/// Gauss–Legendre nodes and weights on [0, 1] via Newton on the Legendre
/// three-term recurrence.
pub fn gl01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Composite rule on [0, 1] with panels graded geometrically towards 0.
pub fn graded01(levels: usize, n: usize) -> Vec<(f64, f64)> {
    let base = gl01(n);
    let mut out = Vec::new();
    let mut hi = 1.0;
    for k in 0..=levels {
        let lo = if k == levels { 0.0 } else { hi / 4.0 };
        for &(x, w) in &base {
            out.push((lo + (hi - lo) * x, (hi - lo) * w));
        }
        hi = lo;
    }
    out
}

pub fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn cross(a: P, b: P) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn dist(a: P, b: P) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closest point of triangle `t` to `r`.
pub fn closest_point(t: &[P; 3], r: P) -> P {
    let area = cross(sub(t[1], t[0]), sub(t[2], t[0]));
    let inside =
        (0..3).all(|k| cross(sub(t[(k + 1) % 3], t[k]), sub(r, t[k])) * area.signum() >= 0.0);
    if inside {
        return r;
    }
    let mut best = t[0];
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let d = sub(b, a);
        let s = ((r[0] - a[0]) * d[0] + (r[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1]);
        let q = if s <= 0.0 {
            a
        } else if s >= 1.0 {
            b
        } else {
            [a[0] + s * d[0], a[1] + s * d[1]]
        };
        if dist(q, r) < dist(best, r) {
            best = q;
        }
    }
    best
}

/// Points and weights on `t`, concentrated at `apex` (a point of `t`):
/// the triangle is fanned from `apex` and each piece is Duffy-collapsed with a
/// graded rule in the radial direction.
pub fn rule_towards(
    t: &[P; 3],
    apex: P,
    radial: &[(f64, f64)],
    angular: &[(f64, f64)],
) -> Vec<(P, f64)> {
    let mut out = Vec::new();
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let jac = cross(sub(a, apex), sub(b, apex)).abs();
        if jac <= 1e-14 * (dist(a, b).powi(2)) {
            continue;
        }
        for &(u, wu) in radial {
            for &(v, wv) in angular {
                let p = [
                    apex[0] + u * ((1.0 - v) * (a[0] - apex[0]) + v * (b[0] - apex[0])),
                    apex[1] + u * ((1.0 - v) * (a[1] - apex[1]) + v * (b[1] - apex[1])),
                ];
                out.push((p, wu * wv * u * jac));
            }
        }
    }
    out
}

/// `∫_t f` for `f` singular (at most logarithmically) near `r`.
pub fn integrate_near(t: &[P; 3], r: P, mut f: impl FnMut(P) -> f64, n: usize) -> f64 {
    near_rule(t, r, n).into_iter().map(|(p, w)| w * f(p)).sum()
}

pub fn integrate_near_c(t: &[P; 3], r: P, mut f: impl FnMut(P) -> C64, n: usize) -> C64 {
    near_rule(t, r, n).into_iter().map(|(p, w)| w * f(p)).sum()
}

/// `∫_a^b f dl` for `f` singular near `r`, split at the foot of `r`.
pub fn integrate_segment_near(a: P, b: P, r: P, mut f: impl FnMut(P) -> C64, n: usize) -> C64 {
    let d = sub(b, a);
    let len = dist(a, b);
    let s = (((r[0] - a[0]) * d[0] + (r[1] - a[1]) * d[1]) / (len * len)).clamp(0.0, 1.0);
    let g = graded01(8, n);
    let mut acc = C64::new(0.0, 0.0);
    // [s, 1] graded at s, [0, s] graded at s.
    for &(x, w) in &g {
        if s < 1.0 {
            let t = s + (1.0 - s) * x;
            acc += w * (1.0 - s) * len * f([a[0] + t * d[0], a[1] + t * d[1]]);
        }
        if s > 0.0 {
            let t = s - s * x;
            acc += w * s * len * f([a[0] + t * d[0], a[1] + t * d[1]]);
        }
    }
    acc
}

/// Outer rule on a triangle: fanned from the centroid, with panels graded
/// towards the edges (where near-singular outer integrands vary fastest).
pub fn outer_rule(t: &[P; 3], n: usize) -> Vec<(P, f64)> {
    let c = [
        (t[0][0] + t[1][0] + t[2][0]) / 3.0,
        (t[0][1] + t[1][1] + t[2][1]) / 3.0,
    ];
    // Radial coordinate u runs centroid -> edge; grade towards u = 1.
    let radial: Vec<(f64, f64)> = graded01(3, n)
        .into_iter()
        .map(|(x, w)| (1.0 - x, w))
        .collect();
    rule_towards(t, c, &radial, &gl01(n))
}

/// Points and weights for integrands singular near `r`. Each fan piece is
/// split at the foot of the perpendicular from the apex, and the angular rule
/// is graded towards that foot, so apexes close to an edge stay resolved.
pub fn near_rule(t: &[P; 3], r: P, n: usize) -> Vec<(P, f64)> {
    let apex = closest_point(t, r);
    let radial = graded01(6, n);
    let angular = graded01(6, n);
    let mut out = Vec::new();
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let d = sub(b, a);
        let s = ((apex[0] - a[0]) * d[0] + (apex[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1]);
        let foot = [a[0] + s * d[0], a[1] + s * d[1]];
        let pieces: Vec<[P; 2]> = if s > 0.0 && s < 1.0 {
            vec![[foot, a], [foot, b]]
        } else if s >= 1.0 {
            vec![[b, a]]
        } else {
            vec![[a, b]]
        };
        for [f, e] in pieces {
            out.extend(rule_towards_edge(apex, f, e, &radial, &angular));
        }
    }
    out
}

/// Duffy rule on the triangle `(apex, f, e)` with `v = 0` at `f`.
fn rule_towards_edge(
    apex: P,
    f: P,
    e: P,
    radial: &[(f64, f64)],
    angular: &[(f64, f64)],
) -> Vec<(P, f64)> {
    let jac = cross(sub(f, apex), sub(e, apex)).abs();
    if jac <= 1e-14 * dist(f, e).powi(2) {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(radial.len() * angular.len());
    for &(u, wu) in radial {
        for &(v, wv) in angular {
            let p = [
                apex[0] + u * ((1.0 - v) * (f[0] - apex[0]) + v * (e[0] - apex[0])),
                apex[1] + u * ((1.0 - v) * (f[1] - apex[1]) + v * (e[1] - apex[1])),
            ];
            out.push((p, wu * wv * u * jac));
        }
    }
    out
}

/// `G = (j/4) H_0^(2)(k R)` from ascending series (independent of the library).
pub fn green_oracle(k: f64, r: f64) -> C64 {
    let (j0, y0) = bessel01_oracle(k * r);
    // (j/4)(J0 - j Y0) = Y0/4 + j J0/4
    C64::new(0.25 * y0, 0.25 * j0)
}

/// `J_0(x), Y_0(x)` by ascending series (x < 5 in tests).
pub fn bessel01_oracle(x: f64) -> (f64, f64) {
    assert!(x < 5.0, "oracle series range");
    let q = 0.25 * x * x;
    let (mut term, mut j0, mut s) = (1.0, 1.0, 0.0);
    let mut h = 0.0;
    for k in 1..60 {
        term *= -q / (k as f64 * k as f64);
        h += 1.0 / k as f64;
        j0 += term;
        s += term * h;
    }
    let gamma = 0.577_215_664_901_532_9;
    let y0 =
        2.0 / std::f64::consts::PI * ((0.5 * x).ln() + gamma) * j0 - 2.0 / std::f64::consts::PI * s;
    (j0, y0)
}
