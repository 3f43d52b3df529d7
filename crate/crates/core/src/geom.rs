//! Small 2D vector helpers shared by the mesh, quadrature and field code.

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// z-component of the 3D cross product.
#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Signed area, positive for counter-clockwise vertex order.
#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

#[inline]
pub fn centroid(t: &[Point; 3]) -> Point {
    [
        (t[0][0] + t[1][0] + t[2][0]) / 3.0,
        (t[0][1] + t[1][1] + t[2][1]) / 3.0,
    ]
}

/// Longest edge of a triangle.
pub fn diameter(t: &[Point; 3]) -> f64 {
    dist(t[0], t[1]).max(dist(t[1], t[2])).max(dist(t[2], t[0]))
}

/// Barycentric coordinates of `p` with respect to `t`.
pub fn barycentric(t: &[Point; 3], p: Point) -> [f64; 3] {
    let a = signed_area(t[0], t[1], t[2]);
    let l0 = signed_area(p, t[1], t[2]) / a;
    let l1 = signed_area(t[0], p, t[2]) / a;
    [l0, l1, 1.0 - l0 - l1]
}

/// Point from barycentric coordinates.
#[inline]
pub fn from_barycentric(t: &[Point; 3], l: [f64; 3]) -> Point {
    [
        l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0],
        l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1],
    ]
}

/// Rotate by +90 degrees.
#[inline]
pub fn perp(a: Point) -> Point {
    [-a[1], a[0]]
}
