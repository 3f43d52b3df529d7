//! Constants, materials, the modified contrast, the incident plane wave and
//! the free-space 2D Green's function.
//!
//! Time convention `exp(+jωt)`. The Green's function is
//! `G(r, r') = (j/4) H_0^(2)(k_0 |r - r'|)`, split as
//! `G = (1/2π) ln R + G_smooth` with a bounded remainder.

use crate::geom::{self, Point};
use crate::specfun::{self, EULER_GAMMA};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;

pub type CVec2 = [Complex64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Green's function evaluated at coincident points; use the extraction path")]
    SingularEvaluation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub frequency: f64,
    pub omega: f64,
    pub k0: f64,
    pub eta0: f64,
}

impl WaveParams {
    pub fn new(frequency: f64) -> Result<WaveParams, EmError> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(EmError::InvalidParameter(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        let omega = 2.0 * PI * frequency;
        Ok(WaveParams {
            frequency,
            omega,
            k0: omega * (MU0 * EPS0).sqrt(),
            eta0: (MU0 / EPS0).sqrt(),
        })
    }

    /// Free-space phase constant; identical to `k0`.
    pub fn beta0(&self) -> f64 {
        self.k0
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub eps_r: f64,
    pub sigma: f64,
}

impl Material {
    pub const VACUUM: Material = Material {
        eps_r: 1.0,
        sigma: 0.0,
    };

    pub fn new(eps_r: f64, sigma: f64) -> Result<Material, EmError> {
        let m = Material { eps_r, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EmError> {
        if !(self.eps_r >= 1.0 && self.eps_r.is_finite()) {
            return Err(EmError::InvalidParameter(format!(
                "eps_r must be >= 1, got {}",
                self.eps_r
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(EmError::InvalidParameter(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// `ε = ε_r ε_0 - jσ/ω`.
pub fn complex_permittivity(m: &Material, wp: &WaveParams) -> Complex64 {
    Complex64::new(m.eps_r * EPS0, -m.sigma / wp.omega)
}

/// Modified contrast `χ = (ε - ε_0)/ε`, so that `1 - χ = ε_0/ε`.
pub fn contrast(m: &Material, wp: &WaveParams) -> Complex64 {
    let eps = complex_permittivity(m, wp);
    (eps - EPS0) / eps
}

/// Relative complex permittivity `ε/ε_0`.
pub fn relative_permittivity(m: &Material, wp: &WaveParams) -> Complex64 {
    complex_permittivity(m, wp) / EPS0
}

/// TE plane wave `H_z = H_0 exp(-j k_0 k̂·r)`, `E = E_0 p̂ exp(-j k_0 k̂·r)` with
/// `p̂ = ẑ × k̂` and `E_0 = η_0 H_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    pub h0: f64,
    pub e0: f64,
    pub direction: Point,
}

impl IncidentWave {
    /// Wave of electric amplitude `e0` travelling at angle `angle` (radians,
    /// from the x axis).
    pub fn new(e0: f64, angle: f64, wp: &WaveParams) -> IncidentWave {
        let (s, c) = angle.sin_cos();
        IncidentWave {
            h0: e0 / wp.eta0,
            e0,
            direction: [c, s],
        }
    }

    pub fn polarization(&self) -> Point {
        geom::perp(self.direction)
    }

    /// Incident magnetic field `H_z` at `p`.
    pub fn hz(&self, wp: &WaveParams, p: Point) -> Complex64 {
        self.h0 * phase(wp.k0 * geom::dot(self.direction, p))
    }
}

fn phase(kx: f64) -> Complex64 {
    Complex64::from_polar(1.0, -kx)
}

/// Incident electric field at `p`.
pub fn incident_field(inc: &IncidentWave, wp: &WaveParams, p: Point) -> CVec2 {
    let a = inc.e0 * phase(wp.k0 * geom::dot(inc.direction, p));
    let pol = inc.polarization();
    [a * pol[0], a * pol[1]]
}

/// `G(r, r') = (j/4) H_0^(2)(k_0 R)`.
pub fn green(wp: &WaveParams, r: Point, rp: Point) -> Result<Complex64, EmError> {
    let d = geom::dist(r, rp);
    if d == 0.0 {
        return Err(EmError::SingularEvaluation);
    }
    Ok(green_of_distance(wp.k0, d))
}

/// `G` as a function of `R > 0`.
#[inline]
pub fn green_of_distance(k0: f64, r: f64) -> Complex64 {
    let (h0, _) = specfun::hankel2_01_real(k0 * r);
    Complex64::new(0.0, 0.25) * h0
}

/// Gradient of `G` with respect to `r`:
/// `-(j k_0/4) H_1^(2)(k_0 R) (r - r')/R`.
pub fn grad_green(wp: &WaveParams, r: Point, rp: Point) -> Result<CVec2, EmError> {
    let d = geom::sub(r, rp);
    let dist = geom::norm(d);
    if dist == 0.0 {
        return Err(EmError::SingularEvaluation);
    }
    let (_, h1) = specfun::hankel2_01_real(wp.k0 * dist);
    let f = Complex64::new(0.0, -0.25 * wp.k0) * h1 / dist;
    Ok([f * d[0], f * d[1]])
}

/// `G - (1/2π) ln R`, defined at `R = 0` by its limit
/// `j/4 + (1/2π)(ln(k_0/2) + γ)`.
pub fn green_smooth(wp: &WaveParams, r: Point, rp: Point) -> Complex64 {
    green_smooth_of_distance(wp.k0, geom::dist(r, rp))
}

#[inline]
pub fn green_smooth_of_distance(k0: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * specfun::hankel2_0_regular(k0 * r) + k0.ln() / (2.0 * PI)
}

/// Limit of [`green_smooth`] at `R = 0`.
pub fn green_smooth_limit(k0: f64) -> Complex64 {
    Complex64::new(((0.5 * k0).ln() + EULER_GAMMA) / (2.0 * PI), 0.25)
}
