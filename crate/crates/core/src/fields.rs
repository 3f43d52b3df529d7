//! Field recovery from the coefficient vector and error metrics.

use crate::assembly::{KERNEL_SIGN, LINE_CHARGE_SIGN};
use crate::em::{self, CVec2, WaveParams};
use crate::geom::{self, Point};
use crate::linalg::C64;
use crate::mesh::{triangle_supports, Mesh, RwgEdge, Support};
use crate::quadrature::{self, QuadError};
use rayon::prelude::*;
use thiserror::Error;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const J: C64 = C64 { re: 0.0, im: 1.0 };

/// Closest allowed approach of an exterior point to a source point.
pub const MIN_SOURCE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("point ({0}, {1}) lies inside the mesh; use the interior field")]
    InsideDomain(f64, f64),
    #[error("point ({0}, {1}) is not inside any triangle")]
    OutsideDomain(f64, f64),
    #[error("point coincides with the cylindrical centre")]
    AtCenter,
    #[error("sample sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("reference field is identically zero")]
    ZeroReference,
    #[error("coefficient vector has {got} entries, expected {want}")]
    CoefficientLength { got: usize, want: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub position: Point,
    pub cartesian: CVec2,
    /// `(E_ρ, E_φ)`.
    pub cylindrical: (C64, C64),
}

/// `(E_ρ, E_φ)` with `ρ̂` radial from `center` and `φ̂ = ρ̂` rotated by +90°.
pub fn to_cylindrical(e: CVec2, point: Point, center: Point) -> Result<(C64, C64), FieldError> {
    let d = geom::sub(point, center);
    let r = geom::norm(d);
    if r == 0.0 {
        return Err(FieldError::AtCenter);
    }
    let (c, s) = (d[0] / r, d[1] / r);
    Ok((e[0] * c + e[1] * s, -e[0] * s + e[1] * c))
}

/// `‖E_num - E_ref‖₂ / ‖E_ref‖₂` over both cylindrical components.
pub fn relative_error(num: &[FieldSample], reference: &[FieldSample]) -> Result<f64, FieldError> {
    if num.len() != reference.len() {
        return Err(FieldError::LengthMismatch(num.len(), reference.len()));
    }
    let (mut diff, mut norm) = (0.0, 0.0);
    for (a, b) in num.iter().zip(reference) {
        diff += (a.cylindrical.0 - b.cylindrical.0).norm_sqr()
            + (a.cylindrical.1 - b.cylindrical.1).norm_sqr();
        norm += b.cylindrical.0.norm_sqr() + b.cylindrical.1.norm_sqr();
    }
    if norm == 0.0 {
        return Err(FieldError::ZeroReference);
    }
    Ok((diff / norm).sqrt())
}

/// `count` equally spaced points on a circle, starting on the +x side.
pub fn observation_circle(center: Point, radius: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            [
                center[0] + radius * phi.cos(),
                center[1] + radius * phi.sin(),
            ]
        })
        .collect()
}

/// Point sources of the discrete solution: current `χ J` and charge
/// `∇'·(χ J)` lumped at quadrature points.
pub struct FieldEvaluator<'a> {
    mesh: &'a Mesh,
    k0: f64,
    chi: Vec<C64>,
    d: Vec<C64>,
    supports: Vec<Vec<Support>>,
    rwgs: &'a [RwgEdge],
    /// `(point, χ J w)` for the vector-potential term.
    currents: Vec<(Point, CVec2)>,
    /// `(point, charge w)` for area and line charges.
    charges: Vec<(Point, C64)>,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(
        mesh: &'a Mesh,
        rwgs: &'a [RwgEdge],
        chi: &[C64],
        d: &[C64],
        k0: f64,
        tri_points: usize,
        edge_points: usize,
    ) -> Result<Self, FieldError> {
        if d.len() != rwgs.len() {
            return Err(FieldError::CoefficientLength {
                got: d.len(),
                want: rwgs.len(),
            });
        }
        let rule = quadrature::triangle_rule(tri_points)?;
        let erule = quadrature::edge_rule(edge_points)?;
        let nt = mesh.triangles().len();
        let supports = triangle_supports(rwgs, nt);
        let mut currents = Vec::new();
        let mut charges = Vec::new();
        for (q, sup) in supports.iter().enumerate() {
            if chi[q] == ZERO || sup.is_empty() {
                continue;
            }
            let pts = mesh.triangle_points(q);
            let area = mesh.area(q);
            let div: C64 = sup.iter().map(|s| d[s.rwg] * (s.side.sign() / area)).sum();
            for (r, w) in rule.map(&pts) {
                let mut jv = [ZERO, ZERO];
                for s in sup {
                    let c = d[s.rwg] * (s.side.sign() * w / (2.0 * area));
                    let f = geom::sub(r, s.free);
                    jv[0] += c * f[0];
                    jv[1] += c * f[1];
                }
                currents.push((r, [chi[q] * jv[0], chi[q] * jv[1]]));
                charges.push((r, chi[q] * div * w));
            }
        }
        for f in rwgs {
            let jump = chi[f.minus] - chi[f.plus];
            if jump == ZERO || d[f.index] == ZERO {
                continue;
            }
            let lam = LINE_CHARGE_SIGN * jump / f.length * d[f.index];
            for (r, w) in erule.map(f.endpoints[0], f.endpoints[1]) {
                charges.push((r, lam * w));
            }
        }
        Ok(FieldEvaluator {
            mesh,
            k0,
            chi: chi.to_vec(),
            d: d.to_vec(),
            supports,
            rwgs,
            currents,
            charges,
        })
    }

    /// Scattered field `-jk_0 ∫ g χ J + (1/jk_0) ∇ ∫ g ∇'·(χ J)` at a point
    /// outside the mesh.
    pub fn scattered(&self, p: Point) -> Result<CVec2, FieldError> {
        if self.mesh.locate(p).is_some() {
            return Err(FieldError::InsideDomain(p[0], p[1]));
        }
        let k0 = self.k0;
        let mut a = [ZERO, ZERO];
        for &(r, jv) in &self.currents {
            let dist = geom::dist(p, r);
            if dist < MIN_SOURCE_DISTANCE {
                return Err(FieldError::InsideDomain(p[0], p[1]));
            }
            let g = KERNEL_SIGN * em::green_of_distance(k0, dist);
            a[0] += g * jv[0];
            a[1] += g * jv[1];
        }
        let mut grad = [ZERO, ZERO];
        for &(r, q) in &self.charges {
            let dv = geom::sub(p, r);
            let dist = geom::norm(dv);
            if dist < MIN_SOURCE_DISTANCE {
                return Err(FieldError::InsideDomain(p[0], p[1]));
            }
            let (_, h1) = crate::specfun::hankel2_01_real(k0 * dist);
            // ∇_r G = -(j k_0 / 4) H_1^(2)(k_0 R) (r - r')/R
            let f = KERNEL_SIGN * C64::new(0.0, -0.25 * k0) * h1 / dist * q;
            grad[0] += f * dv[0];
            grad[1] += f * dv[1];
        }
        let jk = J * k0;
        Ok([-jk * a[0] + grad[0] / jk, -jk * a[1] + grad[1] / jk])
    }

    /// Total field `(1 - χ) J / (jk_0)` at a point inside the mesh.
    pub fn interior(&self, p: Point) -> Result<CVec2, FieldError> {
        let t = self
            .mesh
            .locate(p)
            .ok_or(FieldError::OutsideDomain(p[0], p[1]))?;
        Ok(self.interior_in(t, p))
    }

    /// Interior field evaluated with the expansion of triangle `t`.
    pub fn interior_in(&self, t: usize, p: Point) -> CVec2 {
        let area = self.mesh.area(t);
        let mut jv = [ZERO, ZERO];
        for s in &self.supports[t] {
            let c = self.d[s.rwg] * (s.side.sign() / (2.0 * area));
            let f = geom::sub(p, s.free);
            jv[0] += c * f[0];
            jv[1] += c * f[1];
        }
        let w = (1.0 - self.chi[t]) / (J * self.k0);
        [w * jv[0], w * jv[1]]
    }

    pub fn rwgs(&self) -> &[RwgEdge] {
        self.rwgs
    }

    /// Scattered-field samples on a set of exterior points, about `center`.
    pub fn sample_scattered(
        &self,
        points: &[Point],
        center: Point,
    ) -> Result<Vec<FieldSample>, FieldError> {
        points
            .par_iter()
            .map(|&p| {
                let e = self.scattered(p)?;
                Ok(FieldSample {
                    position: p,
                    cartesian: e,
                    cylindrical: to_cylindrical(e, p, center)?,
                })
            })
            .collect()
    }
}

/// One-shot scattered field at an exterior point.
#[allow(clippy::too_many_arguments)]
pub fn scattered_field(
    d: &[C64],
    mesh: &Mesh,
    rwgs: &[RwgEdge],
    chi: &[C64],
    wp: &WaveParams,
    tri_points: usize,
    edge_points: usize,
    point: Point,
) -> Result<CVec2, FieldError> {
    FieldEvaluator::new(mesh, rwgs, chi, d, wp.k0, tri_points, edge_points)?.scattered(point)
}

/// One-shot interior field.
pub fn interior_field(
    d: &[C64],
    mesh: &Mesh,
    rwgs: &[RwgEdge],
    chi: &[C64],
    wp: &WaveParams,
    point: Point,
) -> Result<CVec2, FieldError> {
    FieldEvaluator::new(mesh, rwgs, chi, d, wp.k0, 1, 1)?.interior(point)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn cylindrical_examples() {
        let x = [c(1.0), ZERO];
        assert_eq!(
            to_cylindrical(x, [2.0, 0.0], [0.0, 0.0]).unwrap(),
            (c(1.0), c(0.0))
        );
        let (er, ep) = to_cylindrical(x, [0.0, 3.0], [0.0, 0.0]).unwrap();
        assert!(er.norm() < 1e-16 && (ep + 1.0).norm() < 1e-16);
        let e = [C64::new(0.3, -1.2), C64::new(2.0, 0.5)];
        let (er, ep) = to_cylindrical(e, [0.7, -0.4], [0.1, 0.2]).unwrap();
        let n0 = e[0].norm_sqr() + e[1].norm_sqr();
        assert!((er.norm_sqr() + ep.norm_sqr() - n0).abs() < 1e-14);
        assert_eq!(
            to_cylindrical(e, [0.1, 0.2], [0.1, 0.2]),
            Err(FieldError::AtCenter)
        );
    }

    fn sample(er: f64, ep: f64) -> FieldSample {
        FieldSample {
            position: [0.0, 0.0],
            cartesian: [ZERO, ZERO],
            cylindrical: (c(er), c(ep)),
        }
    }

    #[test]
    fn relative_error_examples() {
        let a = vec![sample(1.0, 2.0), sample(-1.0, 0.5)];
        assert_eq!(relative_error(&a, &a).unwrap(), 0.0);
        let b: Vec<_> = a
            .iter()
            .map(|s| sample(1.1 * s.cylindrical.0.re, 1.1 * s.cylindrical.1.re))
            .collect();
        assert!((relative_error(&b, &a).unwrap() - 0.1).abs() < 1e-14);
        let z = vec![sample(0.0, 0.0)];
        assert_eq!(relative_error(&z, &z), Err(FieldError::ZeroReference));
        assert!(relative_error(&a, &z).is_err());
    }

    #[test]
    fn circle_points() {
        let p = observation_circle([1.0, 0.0], 0.5, 4);
        assert_eq!(p.len(), 4);
        assert!((p[1][0] - 1.0).abs() < 1e-15 && (p[1][1] - 0.5).abs() < 1e-15);
    }
}
