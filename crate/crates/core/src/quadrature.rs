//! Symmetric triangle rules, Gauss-Legendre edge rules, and closed-form
//! integrals of `ln |r - r'|` over segments and triangles.

use crate::geom::{self, Point};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("no triangle rule with {0} points (supported: 1, 3, 6, 12)")]
    UnsupportedRule(usize),
    #[error("edge rule needs at least one point")]
    EmptyEdgeRule,
    #[error("degenerate element")]
    Degenerate,
}

/// Quadrature rule on a triangle in barycentric coordinates. Weights sum to 1
/// and are scaled by the triangle area when applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TriRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl TriRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and area-scaled weights on triangle `t`.
    pub fn map(&self, t: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let area = geom::signed_area(t[0], t[1], t[2]).abs();
        let t = *t;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&l, &w)| (geom::from_barycentric(&t, l), w * area))
    }

    /// `∫_T f dA`.
    pub fn integrate<F: FnMut(Point) -> f64>(&self, t: &[Point; 3], mut f: F) -> f64 {
        self.map(t).map(|(p, w)| w * f(p)).sum()
    }
}

fn orbit3(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[b, a, a], [a, b, a], [a, a, b]]
}

fn orbit6(a: f64, b: f64) -> [[f64; 3]; 6] {
    let c = 1.0 - a - b;
    [
        [a, b, c],
        [b, c, a],
        [c, a, b],
        [b, a, c],
        [a, c, b],
        [c, b, a],
    ]
}

/// Symmetric rule with `n_points` in {1, 3, 6, 12}, of degree 1, 2, 4, 6.
pub fn triangle_rule(n_points: usize) -> Result<TriRule, QuadError> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let push3 = |a: f64, w: f64, p: &mut Vec<[f64; 3]>, ws: &mut Vec<f64>| {
        for x in orbit3(a) {
            p.push(x);
            ws.push(w);
        }
    };
    let degree = match n_points {
        1 => {
            points.push([1.0 / 3.0; 3]);
            weights.push(1.0);
            1
        }
        3 => {
            push3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
            2
        }
        6 => {
            push3(
                0.445_948_490_915_965,
                0.223_381_589_678_011,
                &mut points,
                &mut weights,
            );
            push3(
                0.091_576_213_509_771,
                0.109_951_743_655_322,
                &mut points,
                &mut weights,
            );
            4
        }
        12 => {
            push3(
                0.249_286_745_170_910,
                0.116_786_275_726_379,
                &mut points,
                &mut weights,
            );
            push3(
                0.063_089_014_491_502,
                0.050_844_906_370_207,
                &mut points,
                &mut weights,
            );
            for x in orbit6(0.053_145_049_844_817, 0.310_352_451_033_784) {
                points.push(x);
                weights.push(0.082_851_075_618_374);
            }
            6
        }
        n => return Err(QuadError::UnsupportedRule(n)),
    };
    // Renormalise: the tabulated weights carry 15 digits.
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    Ok(TriRule {
        points,
        weights,
        degree,
    })
}

/// Gauss-Legendre rule mapped to `[0, 1]`, weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and length-scaled weights on segment `a`-`b`.
    pub fn map(&self, a: Point, b: Point) -> impl Iterator<Item = (Point, f64)> + '_ {
        let len = geom::dist(a, b);
        let d = geom::sub(b, a);
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (geom::add(a, geom::scale(d, t)), w * len))
    }
}

pub fn edge_rule(n: usize) -> Result<EdgeRule, QuadError> {
    if n == 0 {
        return Err(QuadError::EmptyEdgeRule);
    }
    let (x, w) = gauss_legendre(n);
    Ok(EdgeRule {
        points: x.iter().map(|&x| 0.5 * (x + 1.0)).collect(),
        weights: w.iter().map(|&w| 0.5 * w).collect(),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * d * d);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (z * p1 - p0) / (z * z - 1.0))
}

/// Local frame of segment `a`-`b` seen from `obs`: tangent coordinates of the
/// endpoints relative to the foot of the perpendicular, and the distance `d`
/// from `obs` to the carrier line.
fn segment_frame(a: Point, b: Point, obs: Point) -> Option<(f64, f64, f64)> {
    let d = geom::sub(b, a);
    let len = geom::norm(d);
    if !(len > 0.0) {
        return None;
    }
    let t = geom::scale(d, 1.0 / len);
    let s1 = geom::dot(geom::sub(a, obs), t);
    let s2 = s1 + len;
    let h = geom::cross(t, geom::sub(a, obs)).abs();
    Some((s1, s2, h))
}

/// `∫ ln(sqrt(s² + d²)) ds`.
fn log_antiderivative(s: f64, d: f64) -> f64 {
    let r2 = s * s + d * d;
    let log_part = if s == 0.0 { 0.0 } else { s * r2.ln() };
    let atan_part = if d == 0.0 {
        0.0
    } else {
        2.0 * d * (s / d).atan()
    };
    0.5 * (log_part - 2.0 * s + atan_part)
}

/// `∫_Γ ln |obs - r'| dl'` over the segment `a`-`b`.
pub fn log_integral_segment(a: Point, b: Point, obs: Point) -> Result<f64, QuadError> {
    let (s1, s2, d) = segment_frame(a, b, obs).ok_or(QuadError::Degenerate)?;
    Ok(log_antiderivative(s2, d) - log_antiderivative(s1, d))
}

/// `∫ (s² + d²)(ln(s² + d²) - 1)/4 ds`.
fn moment_antiderivative(s: f64, d: f64) -> f64 {
    let r2 = s * s + d * d;
    let ln = if r2 == 0.0 { 0.0 } else { r2.ln() };
    let at = if d == 0.0 { 0.0 } else { d * (s / d).atan() };
    let s3 = s * s * s;
    // ∫ s² ln(s²+d²) ds
    let a = s3 / 3.0 * ln - (2.0 / 3.0) * (s3 / 3.0 - d * d * s + d * d * at);
    // ∫ d² ln(s²+d²) ds
    let b = d * d * (s * ln - 2.0 * s + 2.0 * at);
    // ∫ (s² + d²) ds
    let c = s3 / 3.0 + d * d * s;
    0.25 * (a + b - c)
}

/// Vertices in counter-clockwise order.
fn edges_ccw(t: &[Point; 3]) -> Result<[Point; 3], QuadError> {
    let area = geom::signed_area(t[0], t[1], t[2]);
    if !(area.abs() > 0.0) {
        return Err(QuadError::Degenerate);
    }
    Ok(if area > 0.0 { *t } else { [t[0], t[2], t[1]] })
}

/// `∫_T ln |obs - r'| dA'`, exact for `obs` anywhere in the plane.
///
/// Divergence theorem on `∇·(ρ (ln|ρ|/2 - 1/4)) = ln|ρ|` with `ρ = r' - obs`
/// reduces the area integral to one segment integral per edge.
pub fn log_integral_triangle(t: &[Point; 3], obs: Point) -> Result<f64, QuadError> {
    let v = edges_ccw(t)?;
    let mut sum = 0.0;
    for k in 0..3 {
        let (a, b) = (v[k], v[(k + 1) % 3]);
        let e = geom::sub(b, a);
        let len = geom::norm(e);
        let n = [e[1] / len, -e[0] / len];
        let dn = geom::dot(geom::sub(a, obs), n);
        if dn == 0.0 {
            continue;
        }
        let (s1, s2, d) = segment_frame(a, b, obs).ok_or(QuadError::Degenerate)?;
        let seg = log_antiderivative(s2, d) - log_antiderivative(s1, d);
        sum += dn * (0.5 * seg - 0.25 * len);
    }
    Ok(sum)
}

/// `∫_T (r' - obs) ln |obs - r'| dA'`.
///
/// The integrand is the gradient of `R²(2 ln R - 1)/4`, so the integral is a
/// sum of edge integrals of that potential times the outward normal.
pub fn log_moment_triangle(t: &[Point; 3], obs: Point) -> Result<Point, QuadError> {
    let v = edges_ccw(t)?;
    let mut sum = [0.0, 0.0];
    for k in 0..3 {
        let (a, b) = (v[k], v[(k + 1) % 3]);
        let e = geom::sub(b, a);
        let len = geom::norm(e);
        let n = [e[1] / len, -e[0] / len];
        let (s1, s2, d) = segment_frame(a, b, obs).ok_or(QuadError::Degenerate)?;
        let w = moment_antiderivative(s2, d) - moment_antiderivative(s1, d);
        sum = geom::add(sum, geom::scale(n, w));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn rule_examples() {
        let r1 = triangle_rule(1).unwrap();
        assert!((r1.integrate(&UNIT, |_| 1.0) - 0.5).abs() < 1e-15);
        assert!((r1.integrate(&UNIT, |p| p[0]) - 1.0 / 6.0).abs() < 1e-15);
        let r3 = triangle_rule(3).unwrap();
        assert!((r3.integrate(&UNIT, |p| p[0] * p[0]) - 1.0 / 12.0).abs() < 1e-15);
        assert!(triangle_rule(4).is_err());
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        // ∫_T x^i y^j over the unit right triangle = i! j! / (i + j + 2)!
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        for n in [1, 3, 6, 12] {
            let r = triangle_rule(n).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r.points.iter().all(|l| l.iter().all(|&x| x > 0.0)));
            for i in 0..=r.degree {
                for j in 0..=(r.degree - i) {
                    let got = r.integrate(&UNIT, |p| p[0].powi(i as i32) * p[1].powi(j as i32));
                    let want = fact(i) * fact(j) / fact(i + j + 2);
                    assert!((got - want).abs() < 1e-14, "n={n} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn edge_rule_examples() {
        let r2 = edge_rule(2).unwrap();
        let int = |r: &EdgeRule, f: &dyn Fn(f64) -> f64| -> f64 {
            r.points
                .iter()
                .zip(&r.weights)
                .map(|(&x, &w)| w * f(x))
                .sum()
        };
        assert!((int(&r2, &|x| x) - 0.5).abs() < 1e-15);
        assert!((int(&r2, &|x| x * x * x) - 0.25).abs() < 1e-15);
        let r1 = edge_rule(1).unwrap();
        assert!((int(&r1, &|x| x * x) - 0.25).abs() < 1e-15);
        assert!(edge_rule(0).is_err());
        for n in 1..20 {
            let r = edge_rule(n).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let got = int(&r, &|x| x.powi(2 * n as i32 - 1));
            assert!((got - 1.0 / (2 * n) as f64).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn segment_midpoint_value() {
        let v = log_integral_segment([0.0, 0.0], [1.0, 0.0], [0.5, 0.0]).unwrap();
        assert!((v - (0.5f64.ln() - 1.0)).abs() < 1e-15);
        assert!(log_integral_segment([1.0, 1.0], [1.0, 1.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn triangle_far_field_limit() {
        let d = 100.0 * 2f64.sqrt();
        let obs = [1.0 / 3.0 + d, 1.0 / 3.0];
        let v = log_integral_triangle(&UNIT, obs).unwrap();
        assert!((v / (0.5 * d.ln()) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn degenerate_triangle_is_an_error() {
        let t = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert_eq!(
            log_integral_triangle(&t, [0.0, 1.0]),
            Err(QuadError::Degenerate)
        );
    }
}
