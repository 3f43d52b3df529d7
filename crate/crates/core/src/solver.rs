//! Direct (LU) and iterative (restarted GMRES) solvers.

use crate::linalg::{norm2, DenseMatrix, LinearOperator, C64};
use std::time::Instant;
use thiserror::Error;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Largest system the dense direct solver accepts.
pub const DIRECT_SOLVE_LIMIT: usize = 6000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is singular to working precision (min/max pivot ratio {ratio:.3e})")]
    Singular { ratio: f64 },
    #[error("system of size {0} exceeds the direct-solve limit of {DIRECT_SOLVE_LIMIT}")]
    TooLarge(usize),
    #[error("dimension mismatch: operator {op}, right-hand side {rhs}")]
    Dimension { op: usize, rhs: usize },
    #[error("non-finite value in the system")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-6,
            restart: 100,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<C64>,
    /// Operator applications (GMRES) or 0 (direct).
    pub iterations: usize,
    /// Final `‖b - A x‖ / ‖b‖`.
    pub relative_residual: f64,
    /// Relative residual estimate after every iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub seconds: f64,
}

/// LU factors with row pivoting, `P A = L U` stored in place.
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

pub fn lu_factor(mut a: DenseMatrix) -> Result<LuFactors, SolveError> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    if !a.is_finite() {
        return Err(SolveError::NonFinite);
    }
    let scale = a.max_abs();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pmax = 0.0f64;
    for k in 0..n {
        let (piv, val) = (k..n)
            .map(|i| (i, a[(i, k)].norm()))
            .fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        pmax = pmax.max(val);
        if val <= scale * f64::EPSILON * n as f64 || val == 0.0 {
            return Err(SolveError::Singular {
                ratio: if pmax > 0.0 { val / pmax } else { 0.0 },
            });
        }
        if piv != k {
            for j in 0..n {
                a.data.swap(k * n + j, piv * n + j);
            }
            perm.swap(k, piv);
        }
        let inv = 1.0 / a[(k, k)];
        let (top, bottom) = a.data.split_at_mut((k + 1) * n);
        let prow = &top[k * n..];
        for row in bottom.chunks_mut(n) {
            let f = row[k] * inv;
            row[k] = f;
            if f != ZERO {
                for j in k + 1..n {
                    row[j] -= f * prow[j];
                }
            }
        }
    }
    Ok(LuFactors { lu: a, perm })
}

impl LuFactors {
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.perm.len();
        let mut x: Vec<C64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: C64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: C64 = row[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .map(|(a, b)| a * b)
                .sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

/// Dense LU solve of `A x = b`.
pub fn solve_direct(a: &DenseMatrix, b: &[C64]) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    if a.rows != b.len() || a.cols != b.len() {
        return Err(SolveError::Dimension {
            op: a.rows,
            rhs: b.len(),
        });
    }
    if a.rows > DIRECT_SOLVE_LIMIT {
        return Err(SolveError::TooLarge(a.rows));
    }
    let x = lu_factor(a.clone())?.solve(b);
    let res = relative_residual(a, &x, b);
    Ok(SolveReport {
        solution: x,
        iterations: 0,
        relative_residual: res,
        residual_history: vec![res],
        converged: true,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `‖b - A x‖ / ‖b‖` (0 for `b = 0`).
pub fn relative_residual(a: &dyn LinearOperator, x: &[C64], b: &[C64]) -> f64 {
    let mut ax = vec![ZERO; b.len()];
    a.apply(x, &mut ax);
    let bn = norm2(b);
    if bn == 0.0 {
        return norm2(&ax);
    }
    let r: Vec<C64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    norm2(&r) / bn
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    // Returns (c, s) with [c s; -conj(s) c] [a; b] = [r; 0], c real.
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, (b / bn).conj());
    }
    let t = an.hypot(bn);
    let c = an / t;
    let s = (a / an) * b.conj() / t;
    (c, s)
}

/// Restarted GMRES from a zero initial guess. On non-convergence the iterate
/// with the smallest true residual seen at a restart boundary is returned.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[C64],
    opts: &GmresOptions,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let n = a.dim();
    if b.len() != n {
        return Err(SolveError::Dimension {
            op: n,
            rhs: b.len(),
        });
    }
    if b.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(SolveError::NonFinite);
    }
    let bn = norm2(b);
    let mut x = vec![ZERO; n];
    if bn == 0.0 {
        return Ok(SolveReport {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
            residual_history: vec![0.0],
            converged: true,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let m = opts.restart.max(1).min(n.max(1));
    let mut history = Vec::new();
    let mut iters = 0usize;
    let mut r = b.to_vec();
    let mut best = (1.0f64, x.clone());
    let mut w = vec![ZERO; n];

    loop {
        let beta = norm2(&r);
        let rel = beta / bn;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= opts.tol || iters >= opts.max_iter {
            break;
        }
        let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|z| z / beta).collect());
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, C64)> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;
        while k < m && iters < opts.max_iter {
            a.apply(&v[k], &mut w);
            iters += 1;
            if w.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(SolveError::NonFinite);
            }
            // Modified Gram-Schmidt with one reorthogonalisation pass.
            let mut col = vec![ZERO; k + 2];
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij: C64 = vi.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    col[i] += hij;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= hij * vj;
                    }
                }
            }
            let wn = norm2(&w);
            col[k + 1] = C64::new(wn, 0.0);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let t = c * col[i] + s * col[i + 1];
                col[i + 1] = -s.conj() * col[i] + c * col[i + 1];
                col[i] = t;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            cs.push((c, s));
            h.push(col);
            history.push(g[k + 1].norm() / bn);
            k += 1;
            if g[k].norm() / bn <= opts.tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|z| z / wn).collect());
        }
        // Back substitution on the k x k triangle.
        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
        a.apply(&x, &mut w);
        for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
            *ri = bi - wi;
        }
    }
    let res = relative_residual(a, &best.1, b);
    Ok(SolveReport {
        converged: res <= opts.tol,
        solution: best.1,
        iterations: iters,
        relative_residual: res,
        residual_history: history,
        seconds: start.elapsed().as_secs_f64(),
    })
}
