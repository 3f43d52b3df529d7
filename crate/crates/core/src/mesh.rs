//! Triangle meshes with region tags, a layered-disk generator, the ASCII mesh
//! format, and RWG functions on interior edges.
//!
//! The RWG function of interior edge `n` is
//! `(r - r_v+) / (2 A+)` on its plus triangle and `-(r - r_v-) / (2 A-)` on its
//! minus triangle, without the edge-length factor. Its normal component across
//! the shared edge is therefore `1 / l_n`.

use crate::geom::{self, Point};
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle}: {message}")]
    Topology { triangle: usize, message: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("mesh generation refused: {0}")]
    Refused(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triangle {
    /// Vertex indices, counter-clockwise once stored in a [`Mesh`].
    pub v: [usize; 3],
    pub region: usize,
}

/// An edge of the mesh with sorted vertex indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshEdge {
    pub v: [usize; 2],
    pub triangles: [usize; 2],
    /// 1 for boundary edges, 2 for interior edges.
    pub count: usize,
}

impl MeshEdge {
    pub fn is_interior(&self) -> bool {
        self.count == 2
    }
}

/// Validated conforming triangle mesh. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    region_count: usize,
    edges: Vec<MeshEdge>,
    triangle_edges: Vec<[usize; 3]>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.region_count == other.region_count
    }
}

impl Mesh {
    /// Validates and canonicalises a mesh. Triangles are reordered to
    /// counter-clockwise orientation.
    ///
    /// Rejected: out-of-range indices or regions, repeated vertices in a
    /// triangle, zero-area triangles, duplicate triangles, edges shared by more
    /// than two triangles, two triangles on the same side of a shared edge,
    /// and vertices hanging in the interior of a boundary edge.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<Triangle>,
        region_count: usize,
    ) -> Result<Mesh, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Invalid("mesh has no triangles".into()));
        }
        if let Some(i) = vertices
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(MeshError::Invalid(format!("vertex {i} is not finite")));
        }
        let mut tris = triangles;
        let mut seen = HashSet::with_capacity(tris.len());
        for (t, tri) in tris.iter_mut().enumerate() {
            let topo = |message: String| MeshError::Topology {
                triangle: t,
                message,
            };
            if let Some(&i) = tri.v.iter().find(|&&i| i >= vertices.len()) {
                return Err(topo(format!(
                    "vertex index {i} out of range ({} vertices)",
                    vertices.len()
                )));
            }
            if tri.region >= region_count {
                return Err(topo(format!(
                    "region {} out of range ({region_count} regions)",
                    tri.region
                )));
            }
            let [a, b, c] = tri.v;
            if a == b || b == c || a == c {
                return Err(topo("repeated vertex".into()));
            }
            let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
            let area = geom::signed_area(pa, pb, pc);
            let scale = geom::dist(pa, pb)
                .max(geom::dist(pb, pc))
                .max(geom::dist(pc, pa));
            if !(area.abs() > 1e-12 * scale * scale) {
                return Err(topo("zero-area triangle".into()));
            }
            if area < 0.0 {
                tri.v.swap(1, 2);
            }
            let mut key = tri.v;
            key.sort_unstable();
            if !seen.insert(key) {
                return Err(topo("duplicate triangle".into()));
            }
        }

        // Edges sorted by vertex pair. Each entry keeps the owning triangles
        // and whether that triangle traverses the edge low -> high.
        let mut map: BTreeMap<(usize, usize), Vec<(usize, bool)>> = BTreeMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                map.entry(key).or_default().push((t, a < b));
            }
        }
        let mut edges = Vec::with_capacity(map.len());
        let mut triangle_edges = vec![[usize::MAX; 3]; tris.len()];
        for (&(a, b), owners) in &map {
            let id = edges.len();
            match owners.as_slice() {
                [(t, _)] => edges.push(MeshEdge {
                    v: [a, b],
                    triangles: [*t, *t],
                    count: 1,
                }),
                [(t0, d0), (t1, d1)] => {
                    if d0 == d1 {
                        return Err(MeshError::Topology {
                            triangle: *t1.max(t0),
                            message: format!(
                                "overlaps triangle {} across edge ({a}, {b})",
                                t0.min(t1)
                            ),
                        });
                    }
                    edges.push(MeshEdge {
                        v: [a, b],
                        triangles: [*t0, *t1],
                        count: 2,
                    });
                }
                _ => {
                    return Err(MeshError::Topology {
                        triangle: owners[2].0,
                        message: format!("edge ({a}, {b}) shared by more than two triangles"),
                    })
                }
            }
            for &(t, _) in owners {
                let tri = tris[t].v;
                let k = (0..3).find(|&k| tri[k] != a && tri[k] != b).unwrap();
                triangle_edges[t][k] = id;
            }
        }

        check_hanging_vertices(&vertices, &edges)?;

        Ok(Mesh {
            vertices,
            triangles: tris,
            region_count,
            edges,
            triangle_edges,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    /// Edge ids of triangle `t`; entry `k` is the edge opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let v = self.triangles[t].v;
        [
            self.vertices[v[0]],
            self.vertices[v[1]],
            self.vertices[v[2]],
        ]
    }

    pub fn area(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        geom::signed_area(p[0], p[1], p[2])
    }

    pub fn centroid(&self, t: usize) -> Point {
        geom::centroid(&self.triangle_points(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].v;
        geom::dist(self.vertices[a], self.vertices[b])
    }

    pub fn interior_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_interior()).count()
    }

    /// Triangle containing `p` (boundary points included), by linear scan.
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.triangles.len()).find(|&t| {
            let l = geom::barycentric(&self.triangle_points(t), p);
            l.iter().all(|&x| x >= -1e-12)
        })
    }

    /// Distance from `p` to the nearest mesh vertex.
    pub fn min_distance_to_vertices(&self, p: Point) -> f64 {
        self.vertices
            .iter()
            .map(|&v| geom::dist(v, p))
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_hanging_vertices(vertices: &[Point], edges: &[MeshEdge]) -> Result<(), MeshError> {
    // A hanging vertex of a non-conforming mesh always sits on a boundary
    // edge and is itself an endpoint of boundary edges.
    let boundary: Vec<&MeshEdge> = edges.iter().filter(|e| !e.is_interior()).collect();
    let mut bverts: Vec<usize> = boundary.iter().flat_map(|e| e.v).collect();
    bverts.sort_unstable();
    bverts.dedup();
    for e in &boundary {
        let (a, b) = (vertices[e.v[0]], vertices[e.v[1]]);
        let d = geom::sub(b, a);
        let len2 = geom::dot(d, d);
        for &v in &bverts {
            if v == e.v[0] || v == e.v[1] {
                continue;
            }
            let w = geom::sub(vertices[v], a);
            let t = geom::dot(w, d) / len2;
            if t <= 1e-12 || t >= 1.0 - 1e-12 {
                continue;
            }
            if geom::cross(d, w).abs() <= 1e-12 * len2 {
                return Err(MeshError::Topology {
                    triangle: e.triangles[0],
                    message: format!("vertex {v} hangs on edge ({}, {})", e.v[0], e.v[1]),
                });
            }
        }
    }
    Ok(())
}

/// Ratio between the ring vertex spacing and the requested mean edge length.
/// Zipper strips between rings produce diagonals longer than the ring spacing,
/// so the spacing is set below `h_target`.
pub const RING_SPACING_FACTOR: f64 = 0.77;

/// Largest triangle count the generator will produce.
pub const MAX_GENERATED_TRIANGLES: usize = 4_000_000;

/// Concentric-ring mesh of a layered disk centred at the origin.
///
/// Region `i` is the annulus between `radii[i-1]` and `radii[i]` (the core for
/// `i = 0`). Every layer interface is a ring of vertices, so no triangle crosses
/// a layer circle. Layers thinner than the radial spacing still get one ring
/// of triangles, which is what makes very coarse meshes possible.
pub fn build_layered_disk_mesh(radii: &[f64], h_target: f64) -> Result<Mesh, MeshError> {
    if radii.is_empty() {
        return Err(MeshError::Refused("no layer radii".into()));
    }
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(MeshError::Refused(format!(
            "h_target must be positive, got {h_target}"
        )));
    }
    let mut prev = 0.0;
    for &r in radii {
        if !(r > prev && r.is_finite()) {
            return Err(MeshError::Refused(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        prev = r;
    }
    let outer = *radii.last().unwrap();
    if h_target >= 2.0 * outer {
        return Err(MeshError::Refused(format!(
            "h_target {h_target} is not smaller than the disk diameter {}",
            2.0 * outer
        )));
    }
    let s = RING_SPACING_FACTOR * h_target;
    let estimate = 4.0 * PI * outer * outer / (3f64.sqrt() * s * s);
    if estimate > MAX_GENERATED_TRIANGLES as f64 {
        return Err(MeshError::Refused(format!(
            "h_target {h_target} would need about {estimate:.0} triangles"
        )));
    }

    // Ring radii with the region of the band just inside each ring.
    let dr = s * 3f64.sqrt() / 2.0;
    let mut rings: Vec<(f64, usize)> = Vec::new();
    let mut inner = 0.0;
    for (layer, &r) in radii.iter().enumerate() {
        let m = (((r - inner) / dr).round() as usize).max(1);
        for k in 1..=m {
            let rk = if k == m {
                r
            } else {
                inner + (r - inner) * k as f64 / m as f64
            };
            rings.push((rk, layer));
        }
        inner = r;
    }

    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    let mut ring_start = Vec::with_capacity(rings.len());
    let mut ring_angles: Vec<Vec<f64>> = Vec::with_capacity(rings.len());
    for (j, &(r, _)) in rings.iter().enumerate() {
        let n = ((2.0 * PI * r / s).round() as usize).max(6);
        let offset = if j % 2 == 1 { PI / n as f64 } else { 0.0 };
        ring_start.push(vertices.len());
        let angles: Vec<f64> = (0..n)
            .map(|i| offset + 2.0 * PI * i as f64 / n as f64)
            .collect();
        for &a in &angles {
            let (sn, cs) = a.sin_cos();
            vertices.push([r * cs, r * sn]);
        }
        ring_angles.push(angles);
    }

    let mut triangles = Vec::new();
    let n0 = ring_angles[0].len();
    for i in 0..n0 {
        let a = ring_start[0] + i;
        let b = ring_start[0] + (i + 1) % n0;
        triangles.push(Triangle {
            v: [0, a, b],
            region: rings[0].1,
        });
    }
    for j in 1..rings.len() {
        zipper(
            (&ring_angles[j - 1], ring_start[j - 1]),
            (&ring_angles[j], ring_start[j]),
            rings[j].1,
            &mut triangles,
        );
    }
    Mesh::new(vertices, triangles, radii.len())
}

/// Triangulates the strip between two rings by always advancing the ring
/// whose next vertex has the smaller angle.
fn zipper(inner: (&[f64], usize), outer: (&[f64], usize), region: usize, out: &mut Vec<Triangle>) {
    let (ia, ib) = (inner.0, outer.0);
    let (na, nb) = (ia.len(), ib.len());
    let unwrap = |x: f64, base: f64| {
        let mut y = x;
        while y < base - PI {
            y += 2.0 * PI;
        }
        while y >= base + PI {
            y -= 2.0 * PI;
        }
        y
    };
    // Outer start: the vertex closest in angle to the first inner vertex.
    let j0 = (0..nb)
        .min_by(|&x, &y| {
            let dx = (unwrap(ib[x], ia[0]) - ia[0]).abs();
            let dy = (unwrap(ib[y], ia[0]) - ia[0]).abs();
            dx.total_cmp(&dy)
        })
        .unwrap();
    let alpha = |i: usize| ia[0] + 2.0 * PI * i as f64 / na as f64;
    let b0 = unwrap(ib[j0], ia[0]);
    let beta = |j: usize| b0 + 2.0 * PI * j as f64 / nb as f64;
    let va = |i: usize| inner.1 + i % na;
    let vb = |j: usize| outer.1 + (j0 + j) % nb;
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let advance_inner = j == nb || (i < na && alpha(i + 1) < beta(j + 1));
        if advance_inner {
            out.push(Triangle {
                v: [va(i), va(i + 1), vb(j)],
                region,
            });
            i += 1;
        } else {
            out.push(Triangle {
                v: [va(i), vb(j + 1), vb(j)],
                region,
            });
            j += 1;
        }
    }
}

/// Parses the ASCII mesh format:
///
/// ```text
/// NV NT NR
/// x y            (NV lines)
/// i j k region   (NT lines, 0-based)
/// ```
///
/// Lines starting with `#` and blank lines are ignored.
pub fn read_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, message: String| MeshError::Parse { line, message };

    let (hline, header) = lines
        .next()
        .ok_or_else(|| err(0, "empty mesh file".into()))?;
    let counts = parse_fields::<usize>(header, 3).map_err(|m| err(hline, m))?;
    let (nv, nt, nr) = (counts[0], counts[1], counts[2]);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(hline, format!("expected {nv} vertices, found {k}")))?;
        let xy = parse_fields::<f64>(l, 2).map_err(|m| err(ln, m))?;
        if !(xy[0].is_finite() && xy[1].is_finite()) {
            return Err(err(ln, "non-finite coordinate".into()));
        }
        vertices.push([xy[0], xy[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut tri_lines = Vec::with_capacity(nt);
    for k in 0..nt {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(hline, format!("expected {nt} triangles, found {k}")))?;
        let f = parse_fields::<usize>(l, 4).map_err(|m| err(ln, m))?;
        if let Some(&i) = f[..3].iter().find(|&&i| i >= nv) {
            return Err(err(
                ln,
                format!("vertex index {i} out of range ({nv} vertices)"),
            ));
        }
        if f[3] >= nr {
            return Err(err(
                ln,
                format!("region {} out of range ({nr} regions)", f[3]),
            ));
        }
        triangles.push(Triangle {
            v: [f[0], f[1], f[2]],
            region: f[3],
        });
        tri_lines.push(ln);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "unexpected trailing data".into()));
    }
    Mesh::new(vertices, triangles, nr).map_err(|e| match e {
        MeshError::Topology { triangle, message } => err(tri_lines[triangle], message),
        other => other,
    })
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>, String> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != n {
        return Err(format!("expected {n} fields, found {}", parts.len()));
    }
    parts
        .iter()
        .map(|p| p.parse::<T>().map_err(|_| format!("cannot parse '{p}'")))
        .collect()
}

/// Writes the ASCII mesh format. Coordinates use the shortest representation
/// that parses back to the same `f64`.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.region_count
    );
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {} {}", t.v[0], t.v[1], t.v[2], t.region);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// RWG function attached to one interior edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RwgEdge {
    pub index: usize,
    /// Id of the underlying [`MeshEdge`].
    pub mesh_edge: usize,
    pub plus: usize,
    pub minus: usize,
    /// Free vertex of the plus triangle, `r_v+`.
    pub free_plus: Point,
    /// Free vertex of the minus triangle, `r_v-`.
    pub free_minus: Point,
    pub area_plus: f64,
    pub area_minus: f64,
    pub endpoints: [Point; 2],
    pub length: f64,
}

impl RwgEdge {
    pub fn triangle(&self, side: Side) -> usize {
        match side {
            Side::Plus => self.plus,
            Side::Minus => self.minus,
        }
    }

    pub fn area(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.area_plus,
            Side::Minus => self.area_minus,
        }
    }

    pub fn free_vertex(&self, side: Side) -> Point {
        match side {
            Side::Plus => self.free_plus,
            Side::Minus => self.free_minus,
        }
    }

    /// Side of `triangle` in this function's support, if any.
    pub fn side_of(&self, triangle: usize) -> Option<Side> {
        if triangle == self.plus {
            Some(Side::Plus)
        } else if triangle == self.minus {
            Some(Side::Minus)
        } else {
            None
        }
    }

    /// Value of the function's restriction to `side` at `p`.
    pub fn eval(&self, side: Side, p: Point) -> Point {
        let a = self.area(side);
        geom::scale(
            geom::sub(p, self.free_vertex(side)),
            side.sign() / (2.0 * a),
        )
    }

    /// Value at `p` taken as a point of `triangle`; zero outside the support.
    pub fn eval_in(&self, triangle: usize, p: Point) -> Point {
        match self.side_of(triangle) {
            Some(side) => self.eval(side, p),
            None => [0.0, 0.0],
        }
    }

    /// Divergence on `side`: `+1/A+` or `-1/A-`.
    pub fn div(&self, side: Side) -> f64 {
        side.sign() / self.area(side)
    }

    /// Unit normal of the shared edge pointing from the plus into the minus
    /// triangle.
    pub fn normal(&self) -> Point {
        let t = geom::sub(self.endpoints[1], self.endpoints[0]);
        let mut n = geom::scale(geom::perp(t), 1.0 / self.length);
        let mid = geom::scale(geom::add(self.endpoints[0], self.endpoints[1]), 0.5);
        if geom::dot(n, geom::sub(mid, self.free_plus)) < 0.0 {
            n = geom::scale(n, -1.0);
        }
        n
    }
}

/// One RWG function per interior edge, in mesh-edge order (sorted by vertex
/// pair). The lower triangle id is the plus side.
pub fn extract_rwg_edges(mesh: &Mesh) -> Vec<RwgEdge> {
    let mut out = Vec::new();
    for (id, e) in mesh.edges().iter().enumerate() {
        if !e.is_interior() {
            continue;
        }
        let plus = e.triangles[0].min(e.triangles[1]);
        let minus = e.triangles[0].max(e.triangles[1]);
        let free = |t: usize| {
            let v = mesh.triangles()[t].v;
            let k = v.iter().position(|&i| i != e.v[0] && i != e.v[1]).unwrap();
            mesh.vertices()[v[k]]
        };
        let endpoints = [mesh.vertices()[e.v[0]], mesh.vertices()[e.v[1]]];
        out.push(RwgEdge {
            index: out.len(),
            mesh_edge: id,
            plus,
            minus,
            free_plus: free(plus),
            free_minus: free(minus),
            area_plus: mesh.area(plus),
            area_minus: mesh.area(minus),
            endpoints,
            length: geom::dist(endpoints[0], endpoints[1]),
        });
    }
    out
}

/// An RWG function restricted to one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub rwg: usize,
    pub side: Side,
    pub free: Point,
}

/// For each triangle, the (at most three) RWG functions supported on it.
pub fn triangle_supports(rwgs: &[RwgEdge], n_triangles: usize) -> Vec<Vec<Support>> {
    let mut out = vec![Vec::with_capacity(3); n_triangles];
    for f in rwgs {
        for side in [Side::Plus, Side::Minus] {
            out[f.triangle(side)].push(Support {
                rwg: f.index,
                side,
                free: f.free_vertex(side),
            });
        }
    }
    out
}

/// Edge-length statistics `(mean, min, max)` over all mesh edges.
pub fn edge_length_stats(mesh: &Mesh) -> (f64, f64, f64) {
    let n = mesh.edges().len();
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for e in 0..n {
        let l = mesh.edge_length(e);
        sum += l;
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (sum / n as f64, lo, hi)
}
