//! Planar rigid transforms, convex-decomposed shapes and the collision and
//! distance queries that define free space and tool dilation.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Penetration below this depth (meters) is treated as touching.
pub const TOUCH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Shortest signed arc from `from` to `to`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    wrap_angle(to - from)
}

/// Planar rigid transform. `theta` is kept in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl From<[f64; 3]> for Pose2 {
    fn from(v: [f64; 3]) -> Self {
        Pose2::new(v[0], v[1], v[2])
    }
}

impl From<Pose2> for [f64; 3] {
    fn from(p: Pose2) -> Self {
        [p.x, p.y, p.theta]
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 { x: 0.0, y: 0.0, theta: 0.0 };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 { x, y, theta: wrap_angle(theta) }
    }

    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Maps a point from this frame into the parent frame.
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(self.theta) + self.translation()
    }

    pub fn apply_vector(&self, v: Vec2) -> Vec2 {
        v.rotate(self.theta)
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let t = self.apply(other.translation());
        Pose2::new(t.x, t.y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Pose2 {
        let t = (-self.translation()).rotate(-self.theta);
        Pose2::new(t.x, t.y, -self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec2 { x: f64::INFINITY, y: f64::INFINITY },
        max: Vec2 { x: f64::NEG_INFINITY, y: f64::NEG_INFINITY },
    };

    pub fn from_points(pts: &[Vec2]) -> Aabb {
        let mut b = Aabb::EMPTY;
        for p in pts {
            b.include(*p);
        }
        b
    }

    pub fn include(&mut self, p: Vec2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb { min: self.min - Vec2::new(r, r), max: self.max + Vec2::new(r, r) }
    }

    /// Lower bound on the distance between anything inside the two boxes.
    pub fn gap(&self, o: &Aabb) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(0.0);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(0.0);
        dx.hypot(dy)
    }

    /// True when the open interiors overlap.
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.y < o.max.y && o.min.y < self.max.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }
}

/// Simple counter-clockwise polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl TryFrom<Vec<Vec2>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Vec2>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Vec2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

fn segments_cross(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Vec2, q0: Vec2, q1: Vec2, d: f64| {
        d == 0.0 && p.x >= q0.x.min(q1.x) && p.x <= q0.x.max(q1.x) && p.y >= q0.y.min(q1.y) && p.y <= q0.y.max(q1.y)
    };
    on(b0, a0, a1, d1) || on(b1, a0, a1, d2) || on(a0, b0, b1, d3) || on(a1, b0, b1, d4)
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry(format!("polygon needs at least 3 vertices, got {}", vertices.len())));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidGeometry("polygon has non-finite vertex".into()));
        }
        let poly = Polygon { vertices };
        if poly.signed_area() <= 0.0 {
            return Err(Error::InvalidGeometry("polygon must be counter-clockwise with positive area".into()));
        }
        let n = poly.vertices.len();
        for i in 0..n {
            for j in i + 1..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a0, a1) = poly.edge(i);
                let (b0, b1) = poly.edge(j);
                if segments_cross(a0, a1, b0, b1) {
                    return Err(Error::InvalidGeometry(format!("polygon edges {i} and {j} intersect")));
                }
            }
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle.
    pub fn rect(min: Vec2, max: Vec2) -> Result<Self> {
        Polygon::new(vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)])
    }

    /// Regular `sides`-gon circumscribing the disk of `radius` about `center`.
    /// Faces point along the coordinate axes when `sides` is a multiple of 4.
    pub fn circumscribed_disk(center: Vec2, radius: f64, sides: usize) -> Result<Self> {
        let step = 2.0 * PI / sides as f64;
        let circ = radius / (PI / sides as f64).cos();
        let verts = (0..sides)
            .map(|k| {
                let a = (k as f64 + 0.5) * step;
                center + Vec2::new(circ * a.cos(), circ * a.sin())
            })
            .collect();
        Polygon::new(verts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[i], self.vertices[(i + 1) % self.vertices.len()])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n).map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n])).sum::<f64>()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut c = Vec2::ZERO;
        let mut a2 = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            a2 += w;
            c += (p + q) * w;
        }
        c * (1.0 / (3.0 * a2))
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(c - b) >= -1e-12
        })
    }

    /// Closed point-in-polygon test: boundary points count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = self.edge(i);
            if point_segment_distance(p, a, b) <= 1e-12 {
                return true;
            }
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if (vi.y > p.y) != (vj.y > p.y) && p.x < (vj.x - vi.x) * (p.y - vi.y) / (vj.y - vi.y) + vi.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    pub fn transformed(&self, pose: &Pose2) -> Vec<Vec2> {
        let (s, c) = pose.theta.sin_cos();
        let t = pose.translation();
        self.vertices.iter().map(|v| Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y) + t).collect()
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t - p).norm()
}

/// Rigid body as an explicit convex decomposition in its own frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeDef", into = "ShapeDef")]
pub struct Shape {
    parts: Vec<Polygon>,
    mass_center: Vec2,
    circumradius: f64,
}

#[derive(Serialize, Deserialize)]
struct ShapeDef {
    parts: Vec<Polygon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass_center: Option<Vec2>,
}

impl TryFrom<ShapeDef> for Shape {
    type Error = Error;
    fn try_from(d: ShapeDef) -> Result<Self> {
        Shape::new(d.parts, d.mass_center)
    }
}

impl From<Shape> for ShapeDef {
    fn from(s: Shape) -> Self {
        ShapeDef { parts: s.parts, mass_center: Some(s.mass_center) }
    }
}

impl Shape {
    /// Builds a shape from convex parts. The mass center defaults to the
    /// area centroid of the union.
    pub fn new(parts: Vec<Polygon>, mass_center: Option<Vec2>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidGeometry("shape has no parts".into()));
        }
        for (i, p) in parts.iter().enumerate() {
            if !p.is_convex() {
                return Err(Error::InvalidGeometry(format!("shape part {i} is not convex")));
            }
        }
        let ident = Pose2::IDENTITY;
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                let a = ConvexPart::new(parts[i].transformed(&ident));
                let b = ConvexPart::new(parts[j].transformed(&ident));
                if a.collides(&b) {
                    return Err(Error::InvalidGeometry(format!("shape parts {i} and {j} overlap")));
                }
            }
        }
        let mc = mass_center.unwrap_or_else(|| area_centroid(&parts));
        let circumradius = parts.iter().flat_map(|p| p.vertices().iter()).map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Shape { parts, mass_center: mc, circumradius })
    }

    pub fn single(poly: Polygon) -> Self {
        Shape::new(vec![poly], None).expect("a single convex polygon is a valid shape")
    }

    pub fn parts(&self) -> &[Polygon] {
        &self.parts
    }

    pub fn mass_center(&self) -> Vec2 {
        self.mass_center
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(Polygon::signed_area).sum()
    }

    /// Largest vertex distance from the body origin.
    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    pub fn place(&self, pose: &Pose2) -> Body {
        Body::from_parts(self.parts.iter().map(|p| ConvexPart::new(p.transformed(pose))).collect())
    }
}

pub fn area_centroid(parts: &[Polygon]) -> Vec2 {
    let mut c = Vec2::ZERO;
    let mut a = 0.0;
    for p in parts {
        let pa = p.signed_area();
        c += p.centroid() * pa;
        a += pa;
    }
    c * (1.0 / a)
}

/// Convex polygon in world coordinates with its bounding box.
#[derive(Debug, Clone)]
pub struct ConvexPart {
    pub verts: Vec<Vec2>,
    pub aabb: Aabb,
}

impl ConvexPart {
    pub fn new(verts: Vec<Vec2>) -> Self {
        let aabb = Aabb::from_points(&verts);
        ConvexPart { verts, aabb }
    }

    /// Largest separating gap over the edge normals of both parts; negative
    /// means the interiors overlap by that depth along the best axis.
    pub fn separation(&self, o: &ConvexPart) -> f64 {
        axis_separation(&self.verts, &o.verts).max(axis_separation(&o.verts, &self.verts))
    }

    pub fn collides(&self, o: &ConvexPart) -> bool {
        if !self.aabb.overlaps(&o.aabb) {
            return false;
        }
        self.separation(o) < -TOUCH_EPS
    }

    pub fn distance(&self, o: &ConvexPart) -> f64 {
        if self.collides(o) {
            return 0.0;
        }
        let mut d = f64::INFINITY;
        for (p, q) in [(self, o), (o, self)] {
            let n = q.verts.len();
            for v in &p.verts {
                for i in 0..n {
                    d = d.min(point_segment_distance(*v, q.verts[i], q.verts[(i + 1) % n]));
                }
            }
        }
        d
    }
}

fn axis_separation(a: &[Vec2], b: &[Vec2]) -> f64 {
    let n = a.len();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let p = a[i];
        let e = a[(i + 1) % n] - p;
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        // outward normal of a counter-clockwise polygon
        let normal = Vec2::new(e.y, -e.x) * (1.0 / len);
        let mut min_b = f64::INFINITY;
        for v in b {
            min_b = min_b.min((*v - p).dot(normal));
        }
        best = best.max(min_b);
    }
    best
}

/// A placed body: world-frame convex parts plus an overall bounding box.
#[derive(Debug, Clone)]
pub struct Body {
    pub parts: Vec<ConvexPart>,
    pub aabb: Aabb,
}

impl Body {
    pub fn from_parts(parts: Vec<ConvexPart>) -> Self {
        let aabb = parts.iter().fold(Aabb::EMPTY, |b, p| b.union(&p.aabb));
        Body { parts, aabb }
    }

    pub fn merge(bodies: &[Body]) -> Body {
        Body::from_parts(bodies.iter().flat_map(|b| b.parts.iter().cloned()).collect())
    }

    pub fn collides(&self, o: &Body) -> bool {
        if !self.aabb.overlaps(&o.aabb) {
            return false;
        }
        self.parts.iter().any(|a| a.aabb.overlaps(&o.aabb) && o.parts.iter().any(|b| a.collides(b)))
    }

    pub fn distance(&self, o: &Body) -> f64 {
        self.distance_below(o, f64::INFINITY)
    }

    /// Minimal distance, pruning part pairs whose boxes are at least `cap` apart.
    /// Returns a value `>= cap` when every pair is pruned.
    pub fn distance_below(&self, o: &Body, cap: f64) -> f64 {
        let mut best = cap;
        for a in &self.parts {
            if a.aabb.gap(&o.aabb) >= best {
                continue;
            }
            for b in &o.parts {
                if a.aabb.gap(&b.aabb) >= best {
                    continue;
                }
                let d = a.distance(b);
                if d < best {
                    best = d;
                    if best == 0.0 {
                        return 0.0;
                    }
                }
            }
        }
        best
    }

    /// Collision against `o` dilated by `epsilon` (closed: touching at
    /// `epsilon` counts as contact).
    pub fn collides_dilated(&self, o: &Body, epsilon: f64) -> bool {
        if epsilon == 0.0 {
            return self.collides(o);
        }
        if self.aabb.gap(&o.aabb) > epsilon {
            return false;
        }
        self.distance_below(o, epsilon * (1.0 + 1e-12) + 1e-300) <= epsilon
    }
}

pub fn collide(a: &Shape, pa: &Pose2, b: &Shape, pb: &Pose2) -> bool {
    a.place(pa).collides(&b.place(pb))
}

pub fn distance(a: &Shape, pa: &Pose2, b: &Shape, pb: &Pose2) -> f64 {
    let (ba, bb) = (a.place(pa), b.place(pb));
    // evaluate in a canonical order so the result is exactly symmetric
    let d1 = ba.distance(&bb);
    let d2 = bb.distance(&ba);
    d1.min(d2)
}

pub fn collide_dilated(a: &Shape, pa: &Pose2, b: &Shape, pb: &Pose2, epsilon: f64) -> Result<bool> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("dilation must be non-negative, got {epsilon}")));
    }
    if collide(a, pa, b, pb) {
        return Ok(true);
    }
    Ok(distance(a, pa, b, pb) <= epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> Shape {
        Shape::single(Polygon::rect(Vec2::new(-0.5, -0.5), Vec2::new(0.5, 0.5)).unwrap())
    }

    #[test]
    fn pose_inverse_roundtrip() {
        let p = Pose2::new(0.3, -1.2, 2.9);
        let id = p.compose(&p.inverse());
        assert!(id.x.abs() < 1e-12 && id.y.abs() < 1e-12 && id.theta.abs() < 1e-12);
    }

    #[test]
    fn wrap_keeps_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]).is_err());
        // clockwise
        assert!(Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).is_err());
        // bow tie
        let bow = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        assert!(Polygon::new(bow).is_err());
    }

    #[test]
    fn disjoint_and_self_overlap() {
        let s = unit_square();
        assert!(!collide(&s, &Pose2::IDENTITY, &s, &Pose2::new(3.0, 0.0, 0.0)));
        assert!(collide(&s, &Pose2::IDENTITY, &s, &Pose2::IDENTITY));
    }

    #[test]
    fn touching_square_and_triangle_do_not_collide() {
        let sq = unit_square();
        // triangle whose apex touches the square's right edge at (0.5, 0)
        let tri =
            Shape::single(Polygon::new(vec![Vec2::new(0.5, 0.0), Vec2::new(1.5, -0.5), Vec2::new(1.5, 0.5)]).unwrap());
        assert!(!collide(&sq, &Pose2::IDENTITY, &tri, &Pose2::IDENTITY));
        assert_eq!(distance(&sq, &Pose2::IDENTITY, &tri, &Pose2::IDENTITY), 0.0);

        // point-sampling oracle: no sample at 1e-4 resolution is strictly
        // inside both shapes
        let inside_sq = |p: Vec2| p.x > -0.5 && p.x < 0.5 && p.y > -0.5 && p.y < 0.5;
        let tri_poly = &tri.parts()[0];
        let strictly_in_tri = |p: Vec2| {
            let v = tri_poly.vertices();
            (0..3).all(|i| (v[(i + 1) % 3] - v[i]).cross(p - v[i]) > 0.0)
        };
        let mut overlap = 0;
        let n = 2000;
        for i in 0..=n {
            for j in 0..=n {
                let p = Vec2::new(0.4 + 0.2 * i as f64 / n as f64, -0.1 + 0.2 * j as f64 / n as f64);
                if inside_sq(p) && strictly_in_tri(p) {
                    overlap += 1;
                }
            }
        }
        assert_eq!(overlap, 0);
        // and nudging the triangle left by 1e-4 is caught by both
        let nudged = Pose2::new(-1e-4, 0.0, 0.0);
        assert!(collide(&sq, &Pose2::IDENTITY, &tri, &nudged));
    }

    #[test]
    fn axis_aligned_gap() {
        let s = unit_square();
        let d = distance(&s, &Pose2::IDENTITY, &s, &Pose2::new(1.5, 0.0, 0.0));
        assert!((d - 0.5).abs() < 1e-12);
        assert_eq!(distance(&s, &Pose2::IDENTITY, &s, &Pose2::new(0.5, 0.2, 0.3)), 0.0);
    }

    #[test]
    fn disk_to_wall_distance() {
        let disk = Shape::single(Polygon::circumscribed_disk(Vec2::ZERO, 0.1, 16).unwrap());
        let wall = Shape::single(Polygon::rect(Vec2::new(-10.0, -20.0), Vec2::new(10.0, 0.0)).unwrap());
        for k in 0..32 {
            let theta = k as f64 * 0.1;
            let d = distance(&disk, &Pose2::new(0.0, 0.35, theta), &wall, &Pose2::IDENTITY);
            assert!((d - 0.25).abs() <= 0.002, "theta {theta}: {d}");
        }
    }

    #[test]
    fn dilation_boundaries() {
        let s = unit_square();
        let far = Pose2::new(1.5, 0.0, 0.0);
        let id = Pose2::IDENTITY;
        assert!(!collide_dilated(&s, &id, &s, &far, 0.4).unwrap());
        assert!(collide_dilated(&s, &id, &s, &far, 0.6).unwrap());
        assert!(collide_dilated(&s, &id, &s, &far, 0.5).unwrap());
        assert!(collide_dilated(&s, &id, &s, &far, -0.1).is_err());
        // placed-body path agrees with the shape-level predicate
        let (a, b) = (s.place(&id), s.place(&far));
        assert!(a.collides_dilated(&b, 0.5));
        assert!(!a.collides_dilated(&b, 0.4999));
    }

    #[test]
    fn point_in_polygon_is_closed() {
        let sq = Polygon::rect(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        assert!(sq.contains(Vec2::new(0.5, 0.5)));
        assert!(sq.contains(Vec2::new(1.0, 0.3)));
        assert!(sq.contains(Vec2::new(0.0, 0.0)));
        assert!(!sq.contains(Vec2::new(2.0, 0.5)));
    }

    #[test]
    fn overlapping_parts_rejected() {
        let a = Polygon::rect(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let b = Polygon::rect(Vec2::new(0.5, 0.0), Vec2::new(1.5, 1.0)).unwrap();
        assert!(Shape::new(vec![a.clone(), b], None).is_err());
        let c = Polygon::rect(Vec2::new(1.0, 0.0), Vec2::new(2.0, 1.0)).unwrap();
        assert!(Shape::new(vec![a, c], None).is_ok());
    }

    fn arb_pose() -> impl Strategy<Value = Pose2> {
        (-2.0..2.0f64, -2.0..2.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_consistent(pa in arb_pose(), pb in arb_pose(), eps in 0.0..0.5f64) {
            let s = unit_square();
            let tri = Shape::single(Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.6, 0.1), Vec2::new(0.1, 0.7)]).unwrap());
            let d1 = distance(&s, &pa, &tri, &pb);
            let d2 = distance(&tri, &pb, &s, &pa);
            prop_assert_eq!(d1, d2);
            let c = collide(&s, &pa, &tri, &pb);
            prop_assert_eq!(c, collide(&tri, &pb, &s, &pa));
            if c {
                prop_assert_eq!(d1, 0.0);
                prop_assert!(collide_dilated(&s, &pa, &tri, &pb, eps).unwrap());
            }
            if collide_dilated(&s, &pa, &tri, &pb, eps).unwrap() {
                prop_assert!(collide_dilated(&s, &pa, &tri, &pb, eps + 0.1).unwrap());
            }
        }

        #[test]
        fn rigid_transform_invariance(pa in arb_pose(), pb in arb_pose(), t in arb_pose()) {
            let s = unit_square();
            let d = distance(&s, &pa, &s, &pb);
            let d_t = distance(&s, &t.compose(&pa), &s, &t.compose(&pb));
            prop_assert!((d - d_t).abs() < 1e-9);
            // skip configurations within numerical reach of touching
            if d > 1e-9 || s.place(&pa).parts[0].separation(&s.place(&pb).parts[0]) < -1e-9 {
                prop_assert_eq!(collide(&s, &pa, &s, &pb), collide(&s, &t.compose(&pa), &s, &t.compose(&pb)));
            }
        }

        #[test]
        fn compose_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.x - r.x).abs() < 1e-9 && (l.y - r.y).abs() < 1e-9);
            prop_assert!(angle_diff(l.theta, r.theta).abs() < 1e-9);
        }
    }
}
