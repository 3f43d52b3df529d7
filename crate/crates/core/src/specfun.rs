//! Integer-order Bessel and Hankel functions of complex argument.
//!
//! Evaluation strategy by argument modulus:
//!
//! * `|z| <= 8`: ascending power series for `J_n`, log-series for `Y_0`, `Y_1`.
//! * `|z| > 8`: Miller backward recurrence for the whole `J_n` sequence,
//!   normalised with the generating-function identity
//!   `exp(±iz) = J_0 + 2 Σ (±i)^k J_k`, which carries the same exponential
//!   growth as `J_n` itself for complex arguments and therefore does not cancel.
//!   `Y_0`, `Y_1` come from Neumann series over that `J_n` sequence.
//! * `|z| > 50`: Hankel asymptotic expansions for orders 0 and 1.
//!
//! Higher orders of the second-kind functions use forward recurrence, which is
//! stable for them.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest supported order.
pub const MAX_ORDER: usize = 200;
/// Arguments must satisfy `|z| < MAX_MODULUS`.
pub const MAX_MODULUS: f64 = 1.0e4;

const SERIES_RADIUS: f64 = 8.0;
const ASYMPTOTIC_RADIUS: f64 = 50.0;

const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderOutOfRange(usize),
    #[error("argument modulus {0} is outside the supported range")]
    ModulusOutOfRange(f64),
    #[error("argument {0} lies on or beyond the branch cut of the second-kind functions")]
    BranchCut(Complex64),
}

fn check_order(n: usize) -> Result<(), SpecFunError> {
    if n > MAX_ORDER {
        return Err(SpecFunError::OrderOutOfRange(n));
    }
    Ok(())
}

fn check_modulus(z: Complex64) -> Result<(), SpecFunError> {
    let r = z.norm();
    if !(r < MAX_MODULUS) {
        return Err(SpecFunError::ModulusOutOfRange(r));
    }
    Ok(())
}

/// Second-kind functions need `z` off the cut `(-inf, 0]`; beyond the series
/// region the asymptotic expansions additionally require `Re z > 0`.
fn check_second_kind(z: Complex64) -> Result<(), SpecFunError> {
    check_modulus(z)?;
    let on_cut = z.im == 0.0 && z.re <= 0.0;
    let outside = z.re <= 0.0 && z.norm() > ASYMPTOTIC_RADIUS;
    if on_cut || outside || z.re.is_nan() || z.im.is_nan() {
        return Err(SpecFunError::BranchCut(z));
    }
    Ok(())
}

/// Bessel function of the first kind `J_n(z)`.
pub fn bessel_j(n: usize, z: Complex64) -> Result<Complex64, SpecFunError> {
    check_order(n)?;
    check_modulus(z)?;
    if z.norm() <= SERIES_RADIUS {
        Ok(j_series(n, z))
    } else {
        Ok(j_miller(n, z)[n])
    }
}

/// `J_0(z), ..., J_nmax(z)`.
pub fn bessel_j_seq(nmax: usize, z: Complex64) -> Result<Vec<Complex64>, SpecFunError> {
    check_order(nmax)?;
    check_modulus(z)?;
    Ok(j_sequence(nmax, z))
}

/// Bessel function of the second kind `Y_n(z)` (principal branch).
pub fn bessel_y(n: usize, z: Complex64) -> Result<Complex64, SpecFunError> {
    Ok(bessel_y_seq(n, z)?[n])
}

/// `Y_0(z), ..., Y_nmax(z)`.
pub fn bessel_y_seq(nmax: usize, z: Complex64) -> Result<Vec<Complex64>, SpecFunError> {
    check_order(nmax)?;
    check_second_kind(z)?;
    Ok(second_kind_sequences(nmax, z).0)
}

/// Hankel function of the second kind `H_n^(2)(z) = J_n(z) - i Y_n(z)`.
pub fn hankel2(n: usize, z: Complex64) -> Result<Complex64, SpecFunError> {
    Ok(hankel2_seq(n, z)?[n])
}

/// `H_0^(2)(z), ..., H_nmax^(2)(z)`.
pub fn hankel2_seq(nmax: usize, z: Complex64) -> Result<Vec<Complex64>, SpecFunError> {
    check_order(nmax)?;
    check_second_kind(z)?;
    Ok(second_kind_sequences(nmax, z).1)
}

/// `(Y_n, H_n^(2))` for `n = 0..=nmax`.
///
/// Off the real axis one Hankel function is exponentially small (`H^(2)` for
/// `Im z < 0`, `H^(1)` for `Im z > 0`). Forward recurrence is stable for that
/// recessive function but not for `Y_n` once `n > |z|`, so the recessive
/// function is recurred and `Y_n` is recovered from it and `J_n`.
fn second_kind_sequences(nmax: usize, z: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
    if z.im == 0.0 {
        let (y0, y1) = y01(z);
        let ys = forward_recurrence(nmax, z, y0, y1);
        let hs = if z.norm() > ASYMPTOTIC_RADIUS {
            let h0 = hankel_asymptotic(0, z, Kind::Second);
            let h1 = hankel_asymptotic(1, z, Kind::Second);
            forward_recurrence(nmax, z, h0, h1)
        } else {
            let js = j_sequence(nmax, z);
            js.iter().zip(&ys).map(|(j, y)| j - J * y).collect()
        };
        return (ys, hs);
    }
    let kind = if z.im < 0.0 {
        Kind::Second
    } else {
        Kind::First
    };
    let (r0, r1) = recessive_hankel_01(z, kind);
    let rec = forward_recurrence(nmax, z, r0, r1);
    let js = j_sequence(nmax, z);
    match kind {
        // H2 = J - iY  =>  Y = i (H2 - J)
        Kind::Second => {
            let ys = js.iter().zip(&rec).map(|(j, h)| J * (h - j)).collect();
            (ys, rec)
        }
        // H1 = J + iY  =>  Y = -i (H1 - J),  H2 = 2J - H1
        Kind::First => {
            let ys = js.iter().zip(&rec).map(|(j, h)| -J * (h - j)).collect();
            let hs = js.iter().zip(&rec).map(|(j, h)| 2.0 * j - h).collect();
            (ys, hs)
        }
    }
}

fn recessive_hankel_01(z: Complex64, kind: Kind) -> (Complex64, Complex64) {
    if z.norm() > ASYMPTOTIC_RADIUS {
        return (hankel_asymptotic(0, z, kind), hankel_asymptotic(1, z, kind));
    }
    if z.im.abs() > 1.0 {
        return hankel_from_k_integral(z, kind);
    }
    // Mild cancellation only: |H_dominant / H_recessive| <= e^2 here.
    let (y0, y1) = y01(z);
    let js = j_sequence(1, z);
    let s = match kind {
        Kind::First => J,
        Kind::Second => -J,
    };
    (js[0] + s * y0, js[1] + s * y1)
}

/// Orders 0 and 1 of the recessive Hankel function through
/// `K_nu(w) = int_0^inf exp(-w cosh t) cosh(nu t) dt`, `Re w > 0`:
/// `H2_nu(z) = (2/pi) i^(nu+1) K_nu(iz)` and `H1_nu(z) = (2/pi) (-i)^(nu+1) K_nu(-iz)`.
/// The integrand decays double-exponentially, so the trapezoidal rule
/// converges geometrically; the step is halved until successive sums agree.
fn hankel_from_k_integral(z: Complex64, kind: Kind) -> (Complex64, Complex64) {
    let (w, rot) = match kind {
        Kind::Second => (J * z, J),
        Kind::First => (-J * z, -J),
    };
    // Truncate where exp(-Re w (cosh t - 1)) < 1e-18.
    let t_max = (1.0 + 42.0 / w.re).acosh();
    let f = |t: f64| {
        let e = (-w * t.cosh()).exp();
        (e, e * (t.cosh()))
    };
    let mut h = t_max / 16.0;
    let (e0, e1) = f(0.0);
    let mut s0 = 0.5 * e0;
    let mut s1 = 0.5 * e1;
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let (a, b) = f(k as f64 * h);
        s0 += a;
        s1 += b;
        k += 1;
    }
    let mut prev = (s0 * h, s1 * h);
    for _ in 0..20 {
        // add midpoints
        let mut t = 0.5 * h;
        while t <= t_max {
            let (a, b) = f(t);
            s0 += a;
            s1 += b;
            t += h;
        }
        h *= 0.5;
        let cur = (s0 * h, s1 * h);
        let done = (cur.0 - prev.0).norm() <= 1e-15 * cur.0.norm()
            && (cur.1 - prev.1).norm() <= 1e-15 * cur.1.norm();
        prev = cur;
        if done {
            break;
        }
    }
    let c = 2.0 / PI;
    (c * rot * prev.0, c * rot * rot * prev.1)
}

/// Derivative `d/dz H_n^(2)(z) = (H_{n-1} - H_{n+1}) / 2`, with `H_{-1} = -H_1`.
pub fn hankel2_prime(n: usize, z: Complex64) -> Result<Complex64, SpecFunError> {
    check_order(n)?;
    let hs = hankel2_seq(n + 1, z)?;
    Ok(if n == 0 {
        -hs[1]
    } else {
        0.5 * (hs[n - 1] - hs[n + 1])
    })
}

/// `(H_0^(2)(x), H_1^(2)(x))` for real `x > 0`.
///
/// Hot path of matrix assembly; avoids the general complex machinery for the
/// small arguments that dominate there.
pub fn hankel2_01_real(x: f64) -> (Complex64, Complex64) {
    debug_assert!(x > 0.0);
    if x <= SERIES_RADIUS {
        let (j0, j1, y0, y1) = real_series_01(x);
        (Complex64::new(j0, -y0), Complex64::new(j1, -y1))
    } else {
        let z = Complex64::new(x, 0.0);
        let hs = hankel2_seq(1, z).expect("real positive argument within range");
        (hs[0], hs[1])
    }
}

/// `H_0^(2)(x) + j (2/pi) ln x` for real `x >= 0`: the Hankel function with
/// its logarithmic singularity removed. Continuous at `x = 0`.
pub fn hankel2_0_regular(x: f64) -> Complex64 {
    debug_assert!(x >= 0.0);
    let c = EULER_GAMMA - std::f64::consts::LN_2;
    if x == 0.0 {
        return Complex64::new(1.0, -(2.0 / PI) * c);
    }
    if x > SERIES_RADIUS {
        return hankel2_01_real(x).0 + J * ((2.0 / PI) * x.ln());
    }
    // J_0 - 1 and the harmonic-weighted sum of Y_0, kept apart so that the
    // ln(x) (J_0 - 1) product never cancels.
    let q = -0.25 * x * x;
    let mut t = 1.0;
    let mut j0m1 = 0.0;
    let mut ys = 0.0;
    let mut harmonic = 0.0;
    let mut k = 1.0;
    loop {
        t *= q / (k * k);
        harmonic += 1.0 / k;
        j0m1 += t;
        ys += harmonic * t;
        if k > 0.5 * x && t.abs() * (1.0 + harmonic) <= 1e-17 {
            break;
        }
        k += 1.0;
    }
    let j0 = 1.0 + j0m1;
    let y_reg = (2.0 / PI) * (x.ln() * j0m1 + c * j0 - ys);
    Complex64::new(j0, -y_reg)
}

/// `J_0(x) - 1` for real `x`, accurate for small `x` where the difference
/// would otherwise cancel.
pub fn bessel_j0_minus_one(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut t = 1.0;
    let mut s = 0.0;
    for k in 1..200 {
        t *= q / (k * k) as f64;
        s += t;
        if t.abs() <= 1e-17 * s.abs() {
            break;
        }
    }
    s
}

fn j_sequence(nmax: usize, z: Complex64) -> Vec<Complex64> {
    if z.norm() <= SERIES_RADIUS {
        (0..=nmax).map(|n| j_series(n, z)).collect()
    } else {
        let mut v = j_miller(nmax, z);
        v.truncate(nmax + 1);
        v
    }
}

fn j_series(n: usize, z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return if n == 0 { 1.0.into() } else { 0.0.into() };
    }
    let h = 0.5 * z;
    let mut lead = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        lead *= h / k as f64;
    }
    let q = -h * h;
    let mut term = lead;
    let mut sum = lead;
    for k in 1..400 {
        term *= q / ((k * (n + k)) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// Miller backward recurrence. Returns `J_0 ..= J_m` for some `m >= nmax`
/// (all orders the recurrence touched).
fn j_miller(nmax: usize, z: Complex64) -> Vec<Complex64> {
    const RESCALE: f64 = 1e-250;
    let az = z.norm();
    let mut start = nmax.max(az.ceil() as usize) + 30 + (10.0 * az.cbrt()).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let real = z.im == 0.0;
    // exp(+iz) grows when Im z < 0, exp(-iz) when Im z > 0.
    let unit = if z.im <= 0.0 { J } else { -J };
    let powers = [
        Complex64::new(1.0, 0.0),
        unit,
        unit * unit,
        unit * unit * unit,
    ];

    // Each stored value remembers how many rescalings happened before it was
    // produced, so values far below the final scale do not underflow early.
    let mut f = vec![Complex64::new(0.0, 0.0); start + 2];
    let mut level = vec![0u32; start + 2];
    let mut current = 0u32;
    f[start] = Complex64::new(1.0, 0.0);
    let mut norm = Complex64::new(0.0, 0.0);
    let two_over_z = 2.0 / z;
    for k in (1..=start).rev() {
        let mut above = f[k + 1];
        if level[k + 1] != current {
            above = scale_down(above, current - level[k + 1], RESCALE);
        }
        let mut next = two_over_z * k as f64 * f[k] - above;
        if real {
            if k % 2 == 0 {
                norm += 2.0 * f[k];
            }
        } else {
            norm += 2.0 * powers[k % 4] * f[k];
        }
        if next.norm() > 1e250 {
            next *= RESCALE;
            f[k] *= RESCALE;
            norm *= RESCALE;
            current += 1;
            level[k] = current;
        }
        f[k - 1] = next;
        level[k - 1] = current;
    }
    norm += f[0];
    let target = if real {
        Complex64::new(1.0, 0.0)
    } else {
        (unit * z).exp()
    };
    // Divide by magnitude first: the naive complex quotient squares `norm`.
    let nm = norm.norm();
    let scale = target * (norm.conj() / nm) / nm;
    f.truncate(start + 1);
    let log_scale = scale.norm().ln();
    let unit_scale = scale / scale.norm();
    for (v, &lv) in f.iter_mut().zip(&level) {
        // Combine magnitudes in log space so no intermediate under/overflows.
        let m = v.norm();
        if m == 0.0 {
            continue;
        }
        let log_mag = m.ln() + log_scale + f64::from(current - lv) * RESCALE.ln();
        *v = (*v / m) * unit_scale * log_mag.exp();
        if real {
            v.im = 0.0;
        }
    }
    f
}

fn scale_down(mut v: Complex64, times: u32, factor: f64) -> Complex64 {
    for _ in 0..times {
        v *= factor;
    }
    v
}

fn y01(z: Complex64) -> (Complex64, Complex64) {
    let az = z.norm();
    if az <= SERIES_RADIUS {
        y01_series(z)
    } else if az <= ASYMPTOTIC_RADIUS {
        y01_neumann(z)
    } else {
        let h10 = hankel_asymptotic(0, z, Kind::First);
        let h11 = hankel_asymptotic(1, z, Kind::First);
        let h20 = hankel_asymptotic(0, z, Kind::Second);
        let h21 = hankel_asymptotic(1, z, Kind::Second);
        let two_j = 2.0 * J;
        ((h10 - h20) / two_j, (h11 - h21) / two_j)
    }
}

fn y01_series(z: Complex64) -> (Complex64, Complex64) {
    let h = 0.5 * z;
    let q = -h * h;
    let log_term = h.ln() + EULER_GAMMA;
    // k = 0 terms
    let mut t0 = Complex64::new(1.0, 0.0); // q^k / (k!)^2
    let mut t1 = Complex64::new(1.0, 0.0); // q^k / (k! (k+1)!)
    let mut j0 = t0;
    let mut j1s = t1;
    let mut y0s = Complex64::new(0.0, 0.0);
    let mut y1s = t1; // (H_0 + H_1) u_0 = 1
    let mut harmonic = 0.0;
    for k in 1..400 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        j0 += t0;
        j1s += t1;
        y0s += harmonic * t0;
        y1s += (2.0 * harmonic + 1.0 / (kf + 1.0)) * t1;
        if t0.norm() * (1.0 + harmonic) <= 1e-17 * j0.norm().max(y0s.norm())
            && t1.norm() * (1.0 + harmonic) <= 1e-17 * j1s.norm().max(y1s.norm())
        {
            break;
        }
    }
    let j1 = h * j1s;
    let y0 = (2.0 / PI) * (log_term * j0 - y0s);
    let y1 = -1.0 / (PI * h) + (2.0 / PI) * log_term * j1 - (h / PI) * y1s;
    (y0, y1)
}

fn y01_neumann(z: Complex64) -> (Complex64, Complex64) {
    let js = j_miller(1, z);
    let m = js.len() - 1;
    let log_term = (0.5 * z).ln() + EULER_GAMMA;
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut k = 1;
    while 2 * k < m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kf = k as f64;
        s0 += sign * js[2 * k] / kf;
        s1 += sign * (js[2 * k - 1] - js[2 * k + 1]) / kf;
        k += 1;
    }
    let y0 = (2.0 / PI) * (log_term * js[0] - 2.0 * s0);
    let y1 = (2.0 / PI) * (log_term * js[1] - js[0] / z + s1);
    (y0, y1)
}

#[derive(Clone, Copy)]
enum Kind {
    First,
    Second,
}

fn hankel_asymptotic(order: u32, z: Complex64, kind: Kind) -> Complex64 {
    let mu = 4.0 * (order * order) as f64;
    let rot = match kind {
        Kind::First => J,
        Kind::Second => -J,
    };
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        term *= rot * (mu - odd * odd) / (8.0 * k as f64 * z);
        let size = term.norm();
        if size > last {
            break;
        }
        sum += term;
        last = size;
        if size <= 1e-17 * sum.norm() {
            break;
        }
    }
    let phase = z - order as f64 * FRAC_PI_2 - FRAC_PI_4;
    (2.0 / (PI * z)).sqrt() * (rot * phase).exp() * sum
}

fn forward_recurrence(nmax: usize, z: Complex64, f0: Complex64, f1: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(f0);
    if nmax == 0 {
        return out;
    }
    out.push(f1);
    let two_over_z = 2.0 / z;
    for k in 1..nmax {
        let next = two_over_z * k as f64 * out[k] - out[k - 1];
        out.push(next);
    }
    out
}

fn real_series_01(x: f64) -> (f64, f64, f64, f64) {
    let h = 0.5 * x;
    let q = -h * h;
    let log_term = h.ln() + EULER_GAMMA;
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut j0 = 1.0;
    let mut j1s = 1.0;
    let mut y0s = 0.0;
    let mut y1s = 1.0;
    let mut harmonic = 0.0;
    let mut k = 1.0;
    loop {
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        harmonic += 1.0 / k;
        j0 += t0;
        j1s += t1;
        y0s += harmonic * t0;
        y1s += (2.0 * harmonic + 1.0 / (k + 1.0)) * t1;
        if k > h && t0.abs() * (1.0 + harmonic) <= 1e-17 {
            break;
        }
        k += 1.0;
    }
    let j1 = h * j1s;
    let y0 = (2.0 / PI) * (log_term * j0 - y0s);
    let y1 = -1.0 / (PI * h) + (2.0 / PI) * log_term * j1 - (h / PI) * y1s;
    (j0, j1, y0, y1)
}
