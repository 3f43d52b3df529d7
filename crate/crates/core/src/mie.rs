//! Series solution for a TE plane wave on a concentric layered cylinder.
//!
//! In layer `l` (core `l = 0`) the axial field is
//! `H_z = H_0 Σ_n [α J_|n|(k_l ρ) + β H_|n|(k_l ρ)] e^{jnφ}` with `β = 0` in the core.
//! Outside, `H_z = H_inc + H_0 Σ_n a_n H_n^(2)(k_0 ρ) e^{jnφ}` (signed order).
//! `H_z` and `(1/ε) ∂H_z/∂ρ` are continuous at every interface.

use crate::em::{self, CVec2, IncidentWave, Material, WaveParams};
use crate::geom::{self, Point};
use crate::linalg::{DenseMatrix, C64};
use crate::solver::lu_factor;
use crate::specfun::{self, SpecFunError};
use thiserror::Error;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const J: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MieError {
    #[error("invalid cylinder: {0}")]
    InvalidCylinder(String),
    #[error("point at radius {rho} is not outside the cylinder (radius {radius})")]
    InteriorPoint { rho: f64, radius: f64 },
    #[error("order {order} system is singular even after scaling")]
    Singular { order: usize },
    #[error(transparent)]
    SpecialFunction(#[from] SpecFunError),
    #[error(transparent)]
    Material(#[from] em::EmError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredCylinder {
    pub center: Point,
    /// Strictly increasing outer radii of each layer.
    pub radii: Vec<f64>,
    /// One material per layer, innermost first.
    pub materials: Vec<Material>,
}

impl LayeredCylinder {
    pub fn new(center: Point, radii: Vec<f64>, materials: Vec<Material>) -> Result<Self, MieError> {
        let c = LayeredCylinder {
            center,
            radii,
            materials,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), MieError> {
        if self.radii.is_empty() || self.radii.len() != self.materials.len() {
            return Err(MieError::InvalidCylinder(format!(
                "{} radii for {} materials",
                self.radii.len(),
                self.materials.len()
            )));
        }
        let mut prev = 0.0;
        for &r in &self.radii {
            if !(r > prev && r.is_finite()) {
                return Err(MieError::InvalidCylinder(format!(
                    "radii must increase from 0, got {:?}",
                    self.radii
                )));
            }
            prev = r;
        }
        for m in &self.materials {
            m.validate()?;
        }
        Ok(())
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().expect("validated")
    }

    /// Layer index containing radius `rho`, or `None` outside.
    pub fn layer_of(&self, rho: f64) -> Option<usize> {
        self.radii.iter().position(|&r| rho <= r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MieSolution {
    pub cylinder: LayeredCylinder,
    pub wave: WaveParams,
    pub incident: IncidentWave,
    pub n_max: usize,
    /// `a_n` for `n = -n_max..=n_max` (index `n + n_max`).
    pub coefficients: Vec<C64>,
    /// `[n + n_max][layer] = (α, β)` in the `|n|`-order basis.
    pub layer_coefficients: Vec<Vec<(C64, C64)>>,
    /// Relative wavenumbers `k_l / k_0` per layer.
    pub relative_wavenumbers: Vec<C64>,
    /// Largest relative interface residual over all orders.
    pub max_residual: f64,
}

/// `ceil(k_0 R + 6 (k_0 R)^{1/3} + 10)`.
pub fn truncation_order(k0: f64, radius: f64) -> usize {
    let x = k0 * radius;
    (x + 6.0 * x.cbrt() + 10.0).ceil() as usize
}

/// `J_0..=J_{n+1}` and `H_0..=H_{n+1}` with derivatives for orders `0..=n`.
struct Cyl {
    j: Vec<C64>,
    jp: Vec<C64>,
    h: Vec<C64>,
    hp: Vec<C64>,
}

fn cyl(nmax: usize, z: C64, need_h: bool) -> Result<Cyl, SpecFunError> {
    let deriv = |f: &[C64]| -> Vec<C64> {
        (0..=nmax)
            .map(|n| {
                if n == 0 {
                    -f[1]
                } else {
                    0.5 * (f[n - 1] - f[n + 1])
                }
            })
            .collect()
    };
    let j = specfun::bessel_j_seq(nmax + 1, z)?;
    let jp = deriv(&j);
    let (h, hp) = if need_h {
        let h = specfun::hankel2_seq(nmax + 1, z)?;
        let hp = deriv(&h);
        (h, hp)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(Cyl { j, jp, h, hp })
}

fn sign_of_order(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn solve_mie(
    cyl_: &LayeredCylinder,
    inc: &IncidentWave,
    wp: &WaveParams,
) -> Result<MieSolution, MieError> {
    cyl_.validate()?;
    let nl = cyl_.radii.len();
    let n_max = truncation_order(wp.k0, cyl_.outer_radius());
    let eps_r: Vec<C64> = cyl_
        .materials
        .iter()
        .map(|m| em::relative_permittivity(m, wp))
        .collect();
    let kr: Vec<C64> = eps_r.iter().map(|e| e.sqrt()).collect();
    let (eps_o, k_o) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let matched = eps_r.iter().all(|&e| e == eps_o);

    // Bessel tables at each interface: inside layer i and outside medium.
    struct Iface {
        inner: Cyl,
        outer: Cyl,
    }
    let mut ifaces = Vec::with_capacity(nl);
    for i in 0..nl {
        let r = cyl_.radii[i];
        let inner = cyl(n_max, kr[i] * wp.k0 * r, i > 0)?;
        let outer = if i + 1 < nl {
            cyl(n_max, kr[i + 1] * wp.k0 * r, true)?
        } else {
            cyl(n_max, C64::new(wp.k0 * r, 0.0), true)?
        };
        ifaces.push(Iface { inner, outer });
    }

    let dim = 2 * nl;
    // Unknowns: α_0, then (α_l, β_l) for shells, then a.
    let col_alpha = |l: usize| if l == 0 { 0 } else { 2 * l - 1 };
    let col_beta = |l: usize| 2 * l;
    let mut transfer = Vec::with_capacity(n_max + 1);
    let mut max_residual = 0.0f64;
    for n in 0..=n_max {
        let mut m = DenseMatrix::zeros(dim, dim);
        let mut rhs = vec![ZERO; dim];
        for (i, f) in ifaces.iter().enumerate() {
            let (r0, r1) = (2 * i, 2 * i + 1);
            let wi = kr[i] / eps_r[i];
            m[(r0, col_alpha(i))] += f.inner.j[n];
            m[(r1, col_alpha(i))] += wi * f.inner.jp[n];
            if i > 0 {
                m[(r0, col_beta(i))] += f.inner.h[n];
                m[(r1, col_beta(i))] += wi * f.inner.hp[n];
            }
            if i + 1 < nl {
                let wo = kr[i + 1] / eps_r[i + 1];
                m[(r0, col_alpha(i + 1))] -= f.outer.j[n];
                m[(r1, col_alpha(i + 1))] -= wo * f.outer.jp[n];
                m[(r0, col_beta(i + 1))] -= f.outer.h[n];
                m[(r1, col_beta(i + 1))] -= wo * f.outer.hp[n];
            } else {
                let wo = k_o / eps_o;
                m[(r0, dim - 1)] -= f.outer.h[n];
                m[(r1, dim - 1)] -= wo * f.outer.hp[n];
                rhs[r0] = f.outer.j[n];
                rhs[r1] = wo * f.outer.jp[n];
            }
        }
        // Column scaling by the largest Bessel value, then row equilibration.
        let mut scaled = m.clone();
        let mut col_scale = vec![1.0; dim];
        for (j, s) in col_scale.iter_mut().enumerate() {
            let mx = (0..dim).map(|i| m[(i, j)].norm()).fold(0.0, f64::max);
            if mx > 0.0 {
                *s = 1.0 / mx;
            }
            for i in 0..dim {
                scaled[(i, j)] *= *s;
            }
        }
        let mut row_scale = vec![1.0; dim];
        for (i, s) in row_scale.iter_mut().enumerate() {
            let mx = (0..dim).map(|j| scaled[(i, j)].norm()).fold(0.0, f64::max);
            if mx > 0.0 {
                *s = 1.0 / mx;
            }
            for j in 0..dim {
                scaled[(i, j)] *= *s;
            }
        }
        let b: Vec<C64> = rhs.iter().zip(&row_scale).map(|(v, s)| v * s).collect();
        let lu = lu_factor(scaled.clone()).map_err(|_| MieError::Singular { order: n })?;
        let mut y = lu.solve(&b);
        // Fixed-precision refinement restores a small componentwise residual.
        for _ in 0..3 {
            let r: Vec<C64> = b
                .iter()
                .zip(scaled.matvec(&y))
                .map(|(b, ay)| b - ay)
                .collect();
            for (yi, di) in y.iter_mut().zip(lu.solve(&r)) {
                *yi += di;
            }
        }
        let mut x: Vec<C64> = y.iter().zip(&col_scale).map(|(v, s)| v * s).collect();
        if matched {
            // Every layer is free space: the incident wave passes unchanged.
            x.iter_mut().for_each(|v| *v = ZERO);
            for l in 0..nl {
                x[col_alpha(l)] = C64::new(1.0, 0.0);
            }
        }

        // Residual of each interface equation relative to its largest term.
        for i in 0..dim {
            let terms = (0..dim).map(|j| m[(i, j)] * x[j]);
            let big = terms
                .clone()
                .map(|t| t.norm())
                .fold(rhs[i].norm(), f64::max);
            let res: C64 = terms.sum::<C64>() - rhs[i];
            if big > 0.0 {
                max_residual = max_residual.max(res.norm() / big);
            }
        }
        transfer.push(x);
    }

    let phi_i = inc.direction[1].atan2(inc.direction[0]);
    let mut coefficients = Vec::with_capacity(2 * n_max + 1);
    let mut layer_coefficients = Vec::with_capacity(2 * n_max + 1);
    for n in -(n_max as i64)..=(n_max as i64) {
        let an = n.unsigned_abs() as usize;
        // Incident amplitude on J_|n| e^{jnφ}: j^{-|n|} e^{-jnφ_i}.
        let inc_n = J.powi(-(an as i32)) * C64::from_polar(1.0, -(n as f64) * phi_i);
        let x = &transfer[an];
        // H_|n| = (-1)^n H_n for negative n.
        coefficients.push(inc_n * x[dim - 1] * if n < 0 { sign_of_order(n) } else { 1.0 });
        layer_coefficients.push(
            (0..nl)
                .map(|l| {
                    (
                        inc_n * x[col_alpha(l)],
                        if l == 0 { ZERO } else { inc_n * x[col_beta(l)] },
                    )
                })
                .collect(),
        );
    }

    Ok(MieSolution {
        cylinder: cyl_.clone(),
        wave: *wp,
        incident: *inc,
        n_max,
        coefficients,
        layer_coefficients,
        relative_wavenumbers: kr,
        max_residual,
    })
}

impl MieSolution {
    pub fn coefficient(&self, n: i64) -> C64 {
        self.coefficients[(n + self.n_max as i64) as usize]
    }

    /// `|a_{±N}| / max |a_n|`: size of the last retained term.
    pub fn tail_ratio(&self) -> f64 {
        let mx = self
            .coefficients
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if mx == 0.0 {
            return 0.0;
        }
        let n = self.n_max as i64;
        self.coefficient(n).norm().max(self.coefficient(-n).norm()) / mx
    }
}

/// `(E_ρ, E_φ)` of the scattered field at an exterior point, about the
/// cylinder centre.
pub fn mie_scattered_field(sol: &MieSolution, p: Point) -> Result<(C64, C64), MieError> {
    mie_scattered_field_truncated(sol, p, sol.n_max)
}

/// As [`mie_scattered_field`] with the sum cut at `|n| <= n_trunc`.
pub fn mie_scattered_field_truncated(
    sol: &MieSolution,
    p: Point,
    n_trunc: usize,
) -> Result<(C64, C64), MieError> {
    let d = geom::sub(p, sol.cylinder.center);
    let rho = geom::norm(d);
    let radius = sol.cylinder.outer_radius();
    if !(rho > radius) {
        return Err(MieError::InteriorPoint { rho, radius });
    }
    let phi = d[1].atan2(d[0]);
    let k0 = sol.wave.k0;
    let nt = n_trunc.min(sol.n_max);
    let c = cyl(nt, C64::new(k0 * rho, 0.0), true)?;
    let (mut dphi, mut drho) = (ZERO, ZERO);
    for n in -(nt as i64)..=(nt as i64) {
        let an = n.unsigned_abs() as usize;
        let s = if n < 0 { sign_of_order(n) } else { 1.0 };
        let a = sol.coefficient(n) * C64::from_polar(1.0, n as f64 * phi);
        dphi += a * s * c.h[an] * J * n as f64;
        drho += a * s * c.hp[an] * k0;
    }
    let pre = sol.incident.h0 / (J * sol.wave.omega * em::EPS0);
    Ok((pre * dphi / rho, -pre * drho))
}

/// Total electric field (Cartesian) anywhere; inside the cylinder from the
/// layer expansions, outside as incident plus scattered.
pub fn mie_total_field(sol: &MieSolution, p: Point) -> Result<CVec2, MieError> {
    let mut d = geom::sub(p, sol.cylinder.center);
    if d == [0.0, 0.0] {
        // The axis value is the limit along any direction.
        d = [1e-12 * sol.cylinder.radii[0], 0.0];
    }
    let rho = geom::norm(d);
    let Some(l) = sol.cylinder.layer_of(rho) else {
        let (er, ep) = mie_scattered_field(sol, p)?;
        let es = from_cylindrical(er, ep, d);
        let ei = em::incident_field(&sol.incident, &sol.wave, p);
        return Ok([es[0] + ei[0], es[1] + ei[1]]);
    };
    let phi = d[1].atan2(d[0]);
    let k = sol.relative_wavenumbers[l] * sol.wave.k0;
    let nmax = sol.n_max;
    let z = k * rho;
    let c = cyl(nmax, z, l > 0)?;
    let (mut dphi, mut drho) = (ZERO, ZERO);
    for (idx, lc) in sol.layer_coefficients.iter().enumerate() {
        let n = idx as i64 - nmax as i64;
        let an = n.unsigned_abs() as usize;
        let (a, b) = lc[l];
        let e = C64::from_polar(1.0, n as f64 * phi);
        let mut v = a * c.j[an];
        let mut vp = a * c.jp[an];
        if l > 0 {
            v += b * c.h[an];
            vp += b * c.hp[an];
        }
        dphi += v * e * J * n as f64;
        drho += vp * e * k;
    }
    let eps = em::complex_permittivity(&sol.cylinder.materials[l], &sol.wave);
    let pre = sol.incident.h0 / (J * sol.wave.omega * eps);
    Ok(from_cylindrical(pre * dphi / rho, -pre * drho, d))
}

fn from_cylindrical(er: C64, ep: C64, d: Point) -> CVec2 {
    let rho = geom::norm(d);
    let (c, s) = (d[0] / rho, d[1] / rho);
    [er * c - ep * s, er * s + ep * c]
}
