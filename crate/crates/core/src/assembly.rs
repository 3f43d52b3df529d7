//! Galerkin discretisation of the modified-contrast volume equation
//!
//! ```text
//! (1 - χ) J / (jk_0) + jk_0 ∫ g χ J - (1/jk_0) ∇ ∫ g ∇'·(χ J) = E_inc
//! ```
//!
//! with RWG expansion and testing. The system matrix is
//! `I_χ + Z_A + Z_φ`, where `Z_φ` carries both the constant area charges
//! `χ^± div f_n` and the line charges on edges across which `χ` jumps.
//!
//! `Z_A` and `Z_φ` are held in factored form: a dense kernel between
//! quadrature points of well-separated triangles, exact moments for near
//! triangle pairs, and a triangle-to-edge table for line charges. None of these
//! depend on `χ`, so one [`Operator`] serves any contrast table on the same
//! mesh. Dense matrices can be exported for small problems.

use crate::em::{self, CVec2, IncidentWave, WaveParams};
use crate::geom::{self, Point};
use crate::linalg::{DenseMatrix, LinearOperator, SparseMatrix, C64};
use crate::mesh::{triangle_supports, Mesh, RwgEdge, Side, Support};
use crate::quadrature::{self, EdgeRule, QuadError, TriRule};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// The volume equation's kernel is `KERNEL_SIGN * G` with
/// `G = (j/4) H_0^(2)`. The outgoing solution of `(∇² + k²) u = -δ` is `-G`.
pub const KERNEL_SIGN: f64 = -1.0;

/// Line-charge density on `Γ_n` is
/// `LINE_CHARGE_SIGN * (χ^- - χ^+) / l_n`: the jump of `χ f_n · n̂` crossing
/// from the plus to the minus triangle.
pub const LINE_CHARGE_SIGN: f64 = 1.0;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const J: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("contrast table has {got} entries, mesh has {want} triangles")]
    ContrastLength { got: usize, want: usize },
    #[error("non-finite contrast on triangle {0}")]
    NonFiniteContrast(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Points per triangle for well-separated pairs and the excitation.
    pub tri_points: usize,
    /// Points per edge for well-separated line charges.
    pub edge_points: usize,
    /// Pairs closer than `near_factor` times the larger element diameter use
    /// singularity extraction.
    pub near_factor: f64,
    /// Outer rule on the testing triangle of near pairs.
    pub near_outer_points: usize,
    /// Rule for the smooth remainder on the source triangle of near pairs.
    pub near_inner_points: usize,
    /// Edge rule for the smooth remainder of near line charges.
    pub near_edge_points: usize,
    /// Midpoint refinements of the outer triangle for pairs that share a
    /// vertex, and for triangles touching a line-charge edge.
    pub touch_subdivision: usize,
    /// Rule for the smooth remainder on the source triangle of touching pairs.
    pub touch_inner_points: usize,
    /// Above this size the point kernel is recomputed in every product.
    pub max_kernel_bytes: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            tri_points: 1,
            edge_points: 2,
            near_factor: 2.0,
            near_outer_points: 12,
            near_inner_points: 6,
            near_edge_points: 8,
            touch_subdivision: 1,
            touch_inner_points: 12,
            max_kernel_bytes: 2_500_000_000,
        }
    }
}

#[inline]
fn kernel(k0: f64, r: f64) -> C64 {
    KERNEL_SIGN * em::green_of_distance(k0, r)
}

#[inline]
fn kernel_smooth(k0: f64, r: f64) -> C64 {
    KERNEL_SIGN * em::green_smooth_of_distance(k0, r)
}

/// Log coefficient of the kernel: `kernel = LOG_COEF ln R + kernel_smooth`.
const LOG_COEF: f64 = KERNEL_SIGN / (2.0 * PI);

#[inline]
fn cdot(a: [C64; 2], b: [C64; 2]) -> C64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn rdot(a: Point, b: [C64; 2]) -> C64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Kernel moments of a (test triangle p, source triangle q) pair with
/// `ρ = r - c_p`, `ρ' = r' - c_q`:
/// `i00 = ∬ g`, `ir = ∬ ρ g`, `irp = ∬ ρ' g`, `irr = ∬ ρ·ρ' g`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairMoments {
    pub i00: C64,
    pub ir: [C64; 2],
    pub irp: [C64; 2],
    pub irr: C64,
}

impl PairMoments {
    pub fn transpose(&self) -> PairMoments {
        PairMoments {
            i00: self.i00,
            ir: self.irp,
            irp: self.ir,
            irr: self.irr,
        }
    }

    fn average(a: &PairMoments, b: &PairMoments) -> PairMoments {
        let h = |x: C64, y: C64| 0.5 * (x + y);
        PairMoments {
            i00: h(a.i00, b.i00),
            ir: [h(a.ir[0], b.ir[0]), h(a.ir[1], b.ir[1])],
            irp: [h(a.irp[0], b.irp[0]), h(a.irp[1], b.irp[1])],
            irr: h(a.irr, b.irr),
        }
    }
}

#[derive(Debug, Clone)]
struct TriGeom {
    pts: [Point; 3],
    area: f64,
    centroid: Point,
    diam: f64,
    region: usize,
    verts: [usize; 3],
}

enum Kernel {
    /// Lower-triangular rows of the point kernel; near pairs hold zero.
    Stored(Vec<Vec<C64>>),
    OnTheFly,
}

/// Contrast-independent part of `Z_A + Z_φ` for one mesh and wavenumber.
pub struct Operator {
    k0: f64,
    opts: AssemblyOptions,
    rwgs: Vec<RwgEdge>,
    tris: Vec<TriGeom>,
    supports: Vec<Vec<Support>>,
    ng: usize,
    /// Quadrature points of all triangles, `ng` per triangle.
    points: Vec<Point>,
    weights: Vec<f64>,
    kernel: Kernel,
    /// Near pairs `(p, q, moments)` with `p <= q`.
    near: Vec<(usize, usize, PairMoments)>,
    /// RWG ids whose two triangles lie in different regions.
    line_rwgs: Vec<usize>,
    /// `line[k][p] = ∫_p ∫_Γ g dl' dA` for edge `line_rwgs[k]`.
    line: Vec<Vec<C64>>,
    near_outer: TriRule,
    near_inner: TriRule,
    touch_inner: TriRule,
    near_edge: EdgeRule,
    edge: EdgeRule,
}

impl Operator {
    pub fn new(
        mesh: &Mesh,
        rwgs: &[RwgEdge],
        k0: f64,
        opts: AssemblyOptions,
    ) -> Result<Operator, AssemblyError> {
        let rule = quadrature::triangle_rule(opts.tri_points)?;
        let edge = quadrature::edge_rule(opts.edge_points)?;
        let near_outer = quadrature::triangle_rule(opts.near_outer_points)?;
        let near_inner = quadrature::triangle_rule(opts.near_inner_points)?;
        let touch_inner = quadrature::triangle_rule(opts.touch_inner_points)?;
        let near_edge = quadrature::edge_rule(opts.near_edge_points)?;

        let nt = mesh.triangles().len();
        let tris: Vec<TriGeom> = (0..nt)
            .map(|t| {
                let pts = mesh.triangle_points(t);
                TriGeom {
                    pts,
                    area: mesh.area(t),
                    centroid: geom::centroid(&pts),
                    diam: geom::diameter(&pts),
                    region: mesh.triangles()[t].region,
                    verts: mesh.triangles()[t].v,
                }
            })
            .collect();
        let ng = rule.len();
        let mut points = Vec::with_capacity(nt * ng);
        let mut weights = Vec::with_capacity(nt * ng);
        for t in &tris {
            for (p, w) in rule.map(&t.pts) {
                points.push(p);
                weights.push(w);
            }
        }

        let mut op = Operator {
            k0,
            opts,
            rwgs: rwgs.to_vec(),
            supports: triangle_supports(rwgs, nt),
            tris,
            ng,
            points,
            weights,
            kernel: Kernel::OnTheFly,
            near: Vec::new(),
            line_rwgs: Vec::new(),
            line: Vec::new(),
            near_outer,
            near_inner,
            touch_inner,
            near_edge,
            edge,
        };

        let np = op.points.len();
        let bytes = np * (np + 1) / 2 * std::mem::size_of::<C64>();
        if bytes <= opts.max_kernel_bytes {
            let rows: Vec<Vec<C64>> = (0..np)
                .into_par_iter()
                .map(|i| {
                    let p = i / ng;
                    (0..=i)
                        .map(|j| {
                            let q = j / ng;
                            if op.is_near(p, q) {
                                ZERO
                            } else {
                                kernel(k0, geom::dist(op.points[i], op.points[j]))
                            }
                        })
                        .collect()
                })
                .collect();
            op.kernel = Kernel::Stored(rows);
        }

        op.near = (0..nt)
            .into_par_iter()
            .flat_map_iter(|p| {
                let op = &op;
                (p..nt)
                    .filter(move |&q| op.is_near(p, q))
                    .map(move |q| (p, q, op.near_moments(p, q)))
            })
            .collect();

        op.line_rwgs = rwgs
            .iter()
            .filter(|f| op.tris[f.plus].region != op.tris[f.minus].region)
            .map(|f| f.index)
            .collect();
        op.line = op
            .line_rwgs
            .par_iter()
            .map(|&n| op.line_column(n))
            .collect();
        Ok(op)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn options(&self) -> &AssemblyOptions {
        &self.opts
    }

    pub fn n_rwg(&self) -> usize {
        self.rwgs.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.tris.len()
    }

    pub fn near_pair_count(&self) -> usize {
        self.near.len()
    }

    pub fn kernel_is_stored(&self) -> bool {
        matches!(self.kernel, Kernel::Stored(_))
    }

    pub fn is_near(&self, p: usize, q: usize) -> bool {
        let (a, b) = (&self.tris[p], &self.tris[q]);
        geom::dist(a.centroid, b.centroid) < self.opts.near_factor * a.diam.max(b.diam)
    }

    fn is_near_edge(&self, p: usize, a: Point, b: Point) -> bool {
        let t = &self.tris[p];
        let mid = geom::scale(geom::add(a, b), 0.5);
        geom::dist(t.centroid, mid) < self.opts.near_factor * t.diam.max(geom::dist(a, b))
    }

    fn touches(&self, p: usize, q: usize) -> bool {
        let (a, b) = (&self.tris[p].verts, &self.tris[q].verts);
        a.iter().any(|v| b.contains(v))
    }

    /// Outer rule on triangle `p`, refined `levels` times by midpoint
    /// subdivision.
    fn outer_points(&self, p: usize, levels: usize) -> Vec<(Point, f64)> {
        let mut tris = vec![self.tris[p].pts];
        for _ in 0..levels {
            tris = tris.into_iter().flat_map(split4).collect();
        }
        tris.iter().flat_map(|t| self.near_outer.map(t)).collect()
    }

    /// Moments of the pair with the inner integral on `q` done by extraction
    /// and the outer integral on `p` by quadrature.
    fn near_moments_one_way(&self, p: usize, q: usize) -> PairMoments {
        let (tp, tq) = (&self.tris[p], &self.tris[q]);
        let touching = self.touches(p, q);
        let (outer, inner_rule) = if touching {
            (
                self.outer_points(p, self.opts.touch_subdivision),
                &self.touch_inner,
            )
        } else {
            (self.outer_points(p, 0), &self.near_inner)
        };
        let inner: Vec<(Point, f64)> = inner_rule.map(&tq.pts).collect();
        let mut m = PairMoments::default();
        for (r, w) in outer {
            let l = quadrature::log_integral_triangle(&tq.pts, r).expect("validated triangle");
            let mv = quadrature::log_moment_triangle(&tq.pts, r).expect("validated triangle");
            let rq = geom::sub(r, tq.centroid);
            let mut s0 = ZERO;
            let mut s1 = [ZERO, ZERO];
            for &(rp, wp) in &inner {
                let gs = wp * kernel_smooth(self.k0, geom::dist(r, rp));
                let d = geom::sub(rp, tq.centroid);
                s0 += gs;
                s1[0] += d[0] * gs;
                s1[1] += d[1] * gs;
            }
            let h0 = LOG_COEF * l + s0;
            let h1 = [
                LOG_COEF * (mv[0] + rq[0] * l) + s1[0],
                LOG_COEF * (mv[1] + rq[1] * l) + s1[1],
            ];
            let rho = geom::sub(r, tp.centroid);
            m.i00 += w * h0;
            m.ir[0] += w * rho[0] * h0;
            m.ir[1] += w * rho[1] * h0;
            m.irp[0] += w * h1[0];
            m.irp[1] += w * h1[1];
            m.irr += w * rdot(rho, h1);
        }
        m
    }

    /// Symmetrised near moments: the average of both integration orders, so
    /// the assembled near block is exactly reciprocal.
    pub fn near_moments(&self, p: usize, q: usize) -> PairMoments {
        let a = self.near_moments_one_way(p, q);
        let b = self.near_moments_one_way(q, p).transpose();
        PairMoments::average(&a, &b)
    }

    /// Point-rule moments for a well-separated pair.
    fn far_moments(&self, p: usize, q: usize) -> PairMoments {
        let (cp, cq) = (self.tris[p].centroid, self.tris[q].centroid);
        let mut m = PairMoments::default();
        for i in p * self.ng..(p + 1) * self.ng {
            let rho = geom::sub(self.points[i], cp);
            for j in q * self.ng..(q + 1) * self.ng {
                let rhop = geom::sub(self.points[j], cq);
                let g = self.weights[i] * self.weights[j] * self.kernel_at(i, j);
                m.i00 += g;
                m.ir[0] += rho[0] * g;
                m.ir[1] += rho[1] * g;
                m.irp[0] += rhop[0] * g;
                m.irp[1] += rhop[1] * g;
                m.irr += geom::dot(rho, rhop) * g;
            }
        }
        m
    }

    fn kernel_at(&self, i: usize, j: usize) -> C64 {
        match &self.kernel {
            Kernel::Stored(rows) => {
                if j <= i {
                    rows[i][j]
                } else {
                    rows[j][i]
                }
            }
            Kernel::OnTheFly => kernel(self.k0, geom::dist(self.points[i], self.points[j])),
        }
    }

    /// Moments of any ordered pair.
    pub fn pair_moments(&self, p: usize, q: usize) -> PairMoments {
        if self.is_near(p, q) {
            let (a, b) = (p.min(q), p.max(q));
            let k = self.near.partition_point(|&(x, y, _)| (x, y) < (a, b));
            let m = match self.near.get(k) {
                Some(&(x, y, m)) if (x, y) == (a, b) => m,
                _ => self.near_moments(a, b),
            };
            if p <= q {
                m
            } else {
                m.transpose()
            }
        } else {
            self.far_moments(p, q)
        }
    }

    /// `∫_p ∫_Γn g dl' dA` for every triangle `p`.
    fn line_column(&self, n: usize) -> Vec<C64> {
        let [a, b] = self.rwgs[n].endpoints;
        let far_pts: Vec<(Point, f64)> = self.edge.map(a, b).collect();
        let near_pts: Vec<(Point, f64)> = self.near_edge.map(a, b).collect();
        (0..self.tris.len())
            .map(|p| {
                let t = &self.tris[p];
                let mut acc = ZERO;
                if self.is_near_edge(p, a, b) {
                    let levels = if t.pts.contains(&a) || t.pts.contains(&b) {
                        self.opts.touch_subdivision
                    } else {
                        0
                    };
                    for (r, w) in self.outer_points(p, levels) {
                        let s = quadrature::log_integral_segment(a, b, r).expect("validated edge");
                        let mut v = C64::new(LOG_COEF * s, 0.0);
                        for &(rl, wl) in &near_pts {
                            v += wl * kernel_smooth(self.k0, geom::dist(r, rl));
                        }
                        acc += w * v;
                    }
                } else {
                    for i in p * self.ng..(p + 1) * self.ng {
                        for &(rl, wl) in &far_pts {
                            acc += self.weights[i]
                                * wl
                                * kernel(self.k0, geom::dist(self.points[i], rl));
                        }
                    }
                }
                acc
            })
            .collect()
    }

    fn line_density(&self, chi: &[C64], n: usize) -> C64 {
        let f = &self.rwgs[n];
        LINE_CHARGE_SIGN * (chi[f.minus] - chi[f.plus]) / f.length
    }

    /// `(Z_A + Z_φ) d` through per-triangle potentials.
    fn apply_potentials(&self, chi: &[C64], extra: &[(usize, Vec<C64>)], d: &[C64], y: &mut [C64]) {
        let nt = self.tris.len();
        // Source expansion per triangle: Σ d_n f_n(r') = α ρ' + B; charge 2α.
        let mut alpha = vec![ZERO; nt];
        let mut beta = vec![[ZERO, ZERO]; nt];
        for (q, sup) in self.supports.iter().enumerate() {
            let t = &self.tris[q];
            for s in sup {
                let c = d[s.rwg] * (s.side.sign() / (2.0 * t.area));
                let b = geom::sub(t.centroid, s.free);
                alpha[q] += c;
                beta[q][0] += c * b[0];
                beta[q][1] += c * b[1];
            }
        }

        let np = self.points.len();
        let mut src = vec![[ZERO; 3]; np];
        for (j, s) in src.iter_mut().enumerate() {
            let q = j / self.ng;
            let t = &self.tris[q];
            let cw = chi[q] * self.weights[j];
            let rho = geom::sub(self.points[j], t.centroid);
            s[0] = cw * (alpha[q] * rho[0] + beta[q][0]);
            s[1] = cw * (alpha[q] * rho[1] + beta[q][1]);
            s[2] = cw * 2.0 * alpha[q];
        }
        let pot = self.apply_kernel(&src);

        let mut u = vec![ZERO; nt];
        let mut v = vec![[ZERO, ZERO]; nt];
        let mut phi = vec![ZERO; nt];
        for (i, pi) in pot.iter().enumerate() {
            let p = i / self.ng;
            let w = self.weights[i];
            let rho = geom::sub(self.points[i], self.tris[p].centroid);
            u[p] += w * (rho[0] * pi[0] + rho[1] * pi[1]);
            v[p][0] += w * pi[0];
            v[p][1] += w * pi[1];
            phi[p] += w * pi[2];
        }

        let mut add_near = |p: usize, q: usize, m: &PairMoments| {
            let cq = chi[q];
            u[p] += cq * (alpha[q] * m.irr + cdot(m.ir, beta[q]));
            v[p][0] += cq * (alpha[q] * m.irp[0] + beta[q][0] * m.i00);
            v[p][1] += cq * (alpha[q] * m.irp[1] + beta[q][1] * m.i00);
            phi[p] += cq * 2.0 * alpha[q] * m.i00;
        };
        for (p, q, m) in &self.near {
            add_near(*p, *q, m);
            if p != q {
                add_near(*q, *p, &m.transpose());
            }
        }

        let lines = self
            .line_rwgs
            .iter()
            .zip(&self.line)
            .chain(extra.iter().map(|(n, c)| (n, c)));
        for (&n, col) in lines {
            let lam = self.line_density(chi, n) * d[n];
            if lam == ZERO {
                continue;
            }
            for (ph, &l) in phi.iter_mut().zip(col) {
                *ph += l * lam;
            }
        }

        let jk = J * self.k0;
        for (p, sup) in self.supports.iter().enumerate() {
            let t = &self.tris[p];
            for s in sup {
                let sg = s.side.sign();
                let a = geom::sub(t.centroid, s.free);
                let za = jk * (sg / (2.0 * t.area)) * (u[p] + rdot(a, v[p]));
                let zp = (sg / t.area) * phi[p] / jk;
                y[s.rwg] += za + zp;
            }
        }
    }

    /// Kernel applied to three point-source vectors.
    fn apply_kernel(&self, src: &[[C64; 3]]) -> Vec<[C64; 3]> {
        let np = src.len();
        // Fixed row ranges with private accumulators summed in order, so the
        // result does not depend on the thread count.
        const CHUNKS: usize = 16;
        let total = np * (np + 1) / 2;
        let mut bounds = vec![0usize];
        let mut acc = 0usize;
        for i in 0..np {
            acc += i + 1;
            if acc * CHUNKS >= total * bounds.len() && bounds.len() < CHUNKS {
                bounds.push(i + 1);
            }
        }
        if *bounds.last().unwrap() != np {
            bounds.push(np);
        }
        let ranges: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
        let partials: Vec<Vec<[C64; 3]>> = ranges
            .par_iter()
            .map(|&(lo, hi)| {
                let mut out = vec![[ZERO; 3]; np];
                for i in lo..hi {
                    let p = i / self.ng;
                    let xi = src[i];
                    let mut yi = [ZERO; 3];
                    let row_owned;
                    let row: &[C64] = match &self.kernel {
                        Kernel::Stored(rows) => &rows[i],
                        Kernel::OnTheFly => {
                            row_owned = (0..=i)
                                .map(|j| {
                                    if self.is_near(p, j / self.ng) {
                                        ZERO
                                    } else {
                                        kernel(self.k0, geom::dist(self.points[i], self.points[j]))
                                    }
                                })
                                .collect::<Vec<_>>();
                            &row_owned
                        }
                    };
                    for (j, &g) in row[..i].iter().enumerate() {
                        let xj = src[j];
                        yi[0] += g * xj[0];
                        yi[1] += g * xj[1];
                        yi[2] += g * xj[2];
                        let oj = &mut out[j];
                        oj[0] += g * xi[0];
                        oj[1] += g * xi[1];
                        oj[2] += g * xi[2];
                    }
                    let g = row[i];
                    for k in 0..3 {
                        out[i][k] += yi[k] + g * xi[k];
                    }
                }
                out
            })
            .collect();
        let mut pot = vec![[ZERO; 3]; np];
        for part in partials {
            for (a, b) in pot.iter_mut().zip(part) {
                a[0] += b[0];
                a[1] += b[1];
                a[2] += b[2];
            }
        }
        pot
    }

    /// Dense `Z_A` and `Z_φ` (area and line parts) for contrast `chi`.
    fn dense_parts(&self, chi: &[C64], extra: &[(usize, Vec<C64>)]) -> (DenseMatrix, DenseMatrix) {
        let n = self.rwgs.len();
        let nt = self.tris.len();
        let jk = J * self.k0;
        type Triplets = Vec<(usize, usize, C64)>;
        let rows: Vec<(Triplets, Triplets)> = (0..nt)
            .into_par_iter()
            .map(|p| {
                let tp = &self.tris[p];
                let mut za = Vec::new();
                let mut zp = Vec::new();
                if self.supports[p].is_empty() {
                    return (za, zp);
                }
                for (q, tq) in self.tris.iter().enumerate() {
                    if self.supports[q].is_empty() || chi[q] == ZERO {
                        continue;
                    }
                    let m = self.pair_moments(p, q);
                    for sm in &self.supports[p] {
                        let a = geom::sub(tp.centroid, sm.free);
                        for sn in &self.supports[q] {
                            let b = geom::sub(tq.centroid, sn.free);
                            let s = sm.side.sign() * sn.side.sign();
                            let core =
                                m.irr + rdot(a, m.irp) + rdot(b, m.ir) + geom::dot(a, b) * m.i00;
                            za.push((
                                sm.rwg,
                                sn.rwg,
                                jk * chi[q] * s / (4.0 * tp.area * tq.area) * core,
                            ));
                            zp.push((
                                sm.rwg,
                                sn.rwg,
                                s * chi[q] / (tp.area * tq.area) * m.i00 / jk,
                            ));
                        }
                    }
                }
                (za, zp)
            })
            .collect();
        let mut z_a = DenseMatrix::zeros(n, n);
        let mut z_phi = DenseMatrix::zeros(n, n);
        for (za, zp) in rows {
            for (i, j, v) in za {
                z_a[(i, j)] += v;
            }
            for (i, j, v) in zp {
                z_phi[(i, j)] += v;
            }
        }
        let lines = self
            .line_rwgs
            .iter()
            .zip(&self.line)
            .chain(extra.iter().map(|(n, c)| (n, c)));
        for (&e, col) in lines {
            let lam = self.line_density(chi, e);
            if lam == ZERO {
                continue;
            }
            for (p, sup) in self.supports.iter().enumerate() {
                for sm in sup {
                    let v = sm.side.sign() / self.tris[p].area * lam * col[p] / jk;
                    z_phi[(sm.rwg, e)] += v;
                }
            }
        }
        (z_a, z_phi)
    }

    fn missing_line_columns(&self, chi: &[C64]) -> Vec<(usize, Vec<C64>)> {
        let missing: Vec<usize> = self
            .rwgs
            .iter()
            .filter(|f| {
                chi[f.plus] != chi[f.minus] && self.line_rwgs.binary_search(&f.index).is_err()
            })
            .map(|f| f.index)
            .collect();
        missing
            .par_iter()
            .map(|&n| (n, self.line_column(n)))
            .collect()
    }
}

fn split4(t: [Point; 3]) -> [[Point; 3]; 4] {
    let m = |a: Point, b: Point| geom::scale(geom::add(a, b), 0.5);
    let (a, b, c) = (m(t[0], t[1]), m(t[1], t[2]), m(t[2], t[0]));
    [[t[0], a, c], [a, t[1], b], [c, b, t[2]], [a, b, c]]
}

/// `I_χ` by exact per-triangle moments: triangle `p` adds
/// `s_m s_n (1 - χ_p)/(jk_0) c_p` with `c_p = ∫_p f̂_m·f̂_n dA`.
pub fn assemble_gram(mesh: &Mesh, rwgs: &[RwgEdge], chi: &[C64], k0: f64) -> SparseMatrix {
    let nt = mesh.triangles().len();
    let supports = triangle_supports(rwgs, nt);
    let jk = J * k0;
    let mut trip = Vec::with_capacity(9 * nt);
    for (p, sup) in supports.iter().enumerate() {
        let pts = mesh.triangle_points(p);
        let c = geom::centroid(&pts);
        let area = mesh.area(p);
        // (1/12) Σ |v_i - c|² = ∫_p |r - c|² dA / A
        let m2 = pts
            .iter()
            .map(|&v| geom::dot(geom::sub(v, c), geom::sub(v, c)))
            .sum::<f64>()
            / 12.0;
        let w = (1.0 - chi[p]) / jk;
        for sm in sup {
            let a = geom::sub(c, sm.free);
            for sn in sup {
                let b = geom::sub(c, sn.free);
                let cp = (m2 + geom::dot(a, b)) / (4.0 * area);
                trip.push((sm.rwg, sn.rwg, sm.side.sign() * sn.side.sign() * w * cp));
            }
        }
    }
    SparseMatrix::from_triplets(rwgs.len(), trip)
}

/// `e_m = ∫ f_m · E_inc` by the given triangle rule.
pub fn assemble_rhs(
    mesh: &Mesh,
    rwgs: &[RwgEdge],
    inc: &IncidentWave,
    wp: &WaveParams,
    rule: &TriRule,
) -> Vec<C64> {
    let mut e = vec![ZERO; rwgs.len()];
    for f in rwgs {
        for side in [Side::Plus, Side::Minus] {
            let pts = mesh.triangle_points(f.triangle(side));
            for (r, w) in rule.map(&pts) {
                let ei: CVec2 = em::incident_field(inc, wp, r);
                let fv = f.eval(side, r);
                e[f.index] += w * (fv[0] * ei[0] + fv[1] * ei[1]);
            }
        }
    }
    e
}

/// Full system `I_χ + Z_A + Z_φ` for one contrast table.
pub struct SystemMatrices {
    pub op: Arc<Operator>,
    pub chi: Vec<C64>,
    pub gram: SparseMatrix,
    extra_lines: Vec<(usize, Vec<C64>)>,
}

impl SystemMatrices {
    pub fn new(
        op: Arc<Operator>,
        mesh: &Mesh,
        chi: Vec<C64>,
    ) -> Result<SystemMatrices, AssemblyError> {
        if chi.len() != op.n_triangles() {
            return Err(AssemblyError::ContrastLength {
                got: chi.len(),
                want: op.n_triangles(),
            });
        }
        if let Some(t) = chi
            .iter()
            .position(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(AssemblyError::NonFiniteContrast(t));
        }
        let gram = assemble_gram(mesh, &op.rwgs, &chi, op.k0);
        let extra_lines = op.missing_line_columns(&chi);
        Ok(SystemMatrices {
            op,
            chi,
            gram,
            extra_lines,
        })
    }

    pub fn k0(&self) -> f64 {
        self.op.k0
    }

    /// Dense `(Z_A, Z_φ)`.
    pub fn potentials_dense(&self) -> (DenseMatrix, DenseMatrix) {
        self.op.dense_parts(&self.chi, &self.extra_lines)
    }

    /// Dense `I_χ + Z_A + Z_φ`.
    pub fn dense(&self) -> DenseMatrix {
        let (za, zp) = self.potentials_dense();
        let mut m = za.add(&zp);
        for (i, r) in self.gram.rows.iter().enumerate() {
            for &(j, v) in r {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// `(Z_A + Z_φ) d` without the Gram part.
    pub fn apply_potentials(&self, d: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; d.len()];
        self.op
            .apply_potentials(&self.chi, &self.extra_lines, d, &mut y);
        y
    }
}

impl LinearOperator for SystemMatrices {
    fn dim(&self) -> usize {
        self.op.n_rwg()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        self.op.apply_potentials(&self.chi, &self.extra_lines, x, y);
        self.gram.apply_add(x, y);
    }
}

/// Per-triangle contrast from per-region values.
pub fn contrast_table(mesh: &Mesh, region_chi: &[C64]) -> Vec<C64> {
    mesh.triangles()
        .iter()
        .map(|t| region_chi[t.region])
        .collect()
}

/// Dense `Z_A` in one call (small problems).
pub fn assemble_vector_potential(
    mesh: &Mesh,
    rwgs: &[RwgEdge],
    chi: &[C64],
    k0: f64,
    opts: AssemblyOptions,
) -> Result<DenseMatrix, AssemblyError> {
    let op = Arc::new(Operator::new(mesh, rwgs, k0, opts)?);
    Ok(SystemMatrices::new(op, mesh, chi.to_vec())?
        .potentials_dense()
        .0)
}

/// Dense `Z_φ` in one call (small problems).
pub fn assemble_scalar_potential(
    mesh: &Mesh,
    rwgs: &[RwgEdge],
    chi: &[C64],
    k0: f64,
    opts: AssemblyOptions,
) -> Result<DenseMatrix, AssemblyError> {
    let op = Arc::new(Operator::new(mesh, rwgs, k0, opts)?);
    Ok(SystemMatrices::new(op, mesh, chi.to_vec())?
        .potentials_dense()
        .1)
}
