//! Planar geometry: vectors, poses, convex polygons and the contact tests
//! used by the world simulator and the renderer.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// 2D vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at `angle` radians from +x.
    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Normalized copy; zero-length input returns zero.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n <= f64::EPSILON {
            Vec2::ZERO
        } else {
            self / n
        }
    }

    /// Counter-clockwise perpendicular (rotate +90 degrees).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Position plus heading. Heading is kept in [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            position: Vec2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    /// Local point expressed in world coordinates.
    pub fn transform(&self, local: Vec2) -> Vec2 {
        self.position + local.rotated(self.heading)
    }
}

/// Wrap an angle into [-pi, pi).
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r >= std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Smallest signed difference a - b in [-pi, pi).
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Bounds {
            min: Vec2::new(min_x, min_y),
            max: Vec2::new(max_x, max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Whether `p` sits at least `margin` inside every side.
    pub fn contains_with_margin(&self, p: Vec2, margin: f64) -> bool {
        p.x >= self.min.x + margin
            && p.x <= self.max.x - margin
            && p.y >= self.min.y + margin
            && p.y <= self.max.y - margin
    }

    /// Distance from an interior point to the nearest side (negative outside).
    pub fn inner_distance(&self, p: Vec2) -> f64 {
        let dx = (p.x - self.min.x).min(self.max.x - p.x);
        let dy = (p.y - self.min.y).min(self.max.y - p.y);
        dx.min(dy)
    }

    /// The four sides as segments, counter-clockwise starting at min corner.
    pub fn sides(&self) -> [(Vec2, Vec2); 4] {
        let a = self.min;
        let b = Vec2::new(self.max.x, self.min.y);
        let c = self.max;
        let d = Vec2::new(self.min.x, self.max.y);
        [(a, b), (b, c), (c, d), (d, a)]
    }
}

/// Contact between two shapes. `normal` is unit length and points out of the
/// reference polygon toward the other shape; `depth` is the overlap along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub normal: Vec2,
    pub depth: f64,
}

/// Signed area of a polygon (positive for counter-clockwise winding).
pub fn polygon_area(verts: &[Vec2]) -> f64 {
    let n = verts.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += verts[i].cross(verts[(i + 1) % n]);
    }
    0.5 * acc
}

/// Strict convexity with counter-clockwise winding.
pub fn is_convex_ccw(verts: &[Vec2]) -> bool {
    let n = verts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let c = verts[(i + 2) % n];
        if (b - a).cross(c - b) <= 0.0 {
            return false;
        }
    }
    true
}

pub fn polygon_centroid(verts: &[Vec2]) -> Vec2 {
    let n = verts.len();
    let mut acc = Vec2::ZERO;
    let mut area = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let w = a.cross(b);
        acc = acc + (a + b) * w;
        area += w;
    }
    if area.abs() <= f64::EPSILON {
        verts.iter().fold(Vec2::ZERO, |s, v| s + *v) / n as f64
    } else {
        acc / (3.0 * area)
    }
}

/// Radius of the smallest circle around the centroid containing the polygon.
pub fn polygon_bounding_radius(verts: &[Vec2]) -> f64 {
    let c = polygon_centroid(verts);
    verts
        .iter()
        .map(|v| (*v - c).norm())
        .fold(0.0_f64, f64::max)
}

/// Point containment for a convex counter-clockwise polygon (boundary counts).
pub fn point_in_convex(p: Vec2, verts: &[Vec2]) -> bool {
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        if (b - a).cross(p - a) < 0.0 {
            return false;
        }
    }
    true
}

/// Closest point on segment ab to p.
pub fn closest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq <= f64::EPSILON {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    (p - closest_point_on_segment(p, a, b)).norm()
}

/// Closest pair of points between two segments.
pub fn segment_segment_closest(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> (Vec2, Vec2) {
    if segments_intersect(a1, a2, b1, b2) {
        // Intersecting segments share a point; locate it.
        let d1 = a2 - a1;
        let d2 = b2 - b1;
        let denom = d1.cross(d2);
        if denom.abs() > f64::EPSILON {
            let t = (b1 - a1).cross(d2) / denom;
            let p = a1 + d1 * t.clamp(0.0, 1.0);
            return (p, p);
        }
    }
    let candidates = [
        (closest_point_on_segment(b1, a1, a2), b1),
        (closest_point_on_segment(b2, a1, a2), b2),
        (a1, closest_point_on_segment(a1, b1, b2)),
        (a2, closest_point_on_segment(a2, b1, b2)),
    ];
    let mut best = candidates[0];
    let mut best_d = (best.0 - best.1).norm_sq();
    for &c in &candidates[1..] {
        let d = (c.0 - c.1).norm_sq();
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

pub fn segment_segment_distance(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> f64 {
    let (p, q) = segment_segment_closest(a1, a2, b1, b2);
    (p - q).norm()
}

/// Proper or touching intersection test.
pub fn segments_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    let d = |p: Vec2, q: Vec2, r: Vec2| (q - p).cross(r - p);
    let d1 = d(b1, b2, a1);
    let d2 = d(b1, b2, a2);
    let d3 = d(a1, a2, b1);
    let d4 = d(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_seg = |p: Vec2, q: Vec2, r: Vec2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on_seg(b1, b2, a1))
        || (d2 == 0.0 && on_seg(b1, b2, a2))
        || (d3 == 0.0 && on_seg(a1, a2, b1))
        || (d4 == 0.0 && on_seg(a1, a2, b2))
}

/// Disc vs convex polygon contact. The returned normal points out of the
/// polygon toward the disc; moving the polygon by `-normal * depth` (or the
/// disc by `normal * depth`) separates the shapes.
pub fn collide_disc_polygon(center: Vec2, radius: f64, verts: &[Vec2]) -> Option<Contact> {
    debug_assert!(radius > 0.0);
    if point_in_convex(center, verts) {
        // Center inside: push out through the nearest edge.
        let n = verts.len();
        let mut best_dist = f64::INFINITY;
        let mut best_normal = Vec2::ZERO;
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let outward = (b - a).normalized().perp() * -1.0;
            let dist = point_segment_distance(center, a, b);
            if dist < best_dist {
                best_dist = dist;
                best_normal = outward;
            }
        }
        return Some(Contact {
            normal: best_normal,
            depth: radius + best_dist,
        });
    }
    let n = verts.len();
    let mut best: Option<Vec2> = None;
    let mut best_d = f64::INFINITY;
    for i in 0..n {
        let q = closest_point_on_segment(center, verts[i], verts[(i + 1) % n]);
        let d = (center - q).norm();
        if d < best_d {
            best_d = d;
            best = Some(q);
        }
    }
    let q = best?;
    if best_d >= radius {
        return None;
    }
    let normal = if best_d > f64::EPSILON {
        (center - q) / best_d
    } else {
        Vec2::ZERO
    };
    Some(Contact {
        normal,
        depth: radius - best_d,
    })
}

/// Separation distance between a disc and a convex polygon (0 when touching
/// or overlapping).
pub fn disc_polygon_separation(center: Vec2, radius: f64, verts: &[Vec2]) -> f64 {
    if point_in_convex(center, verts) {
        return 0.0;
    }
    let n = verts.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        best = best.min(point_segment_distance(center, verts[i], verts[(i + 1) % n]));
    }
    (best - radius).max(0.0)
}

/// Capsule (segment ab inflated by `radius`) vs convex polygon contact.
/// Normal points out of the polygon toward the capsule.
pub fn collide_capsule_polygon(a: Vec2, b: Vec2, radius: f64, verts: &[Vec2]) -> Option<Contact> {
    let n = verts.len();
    let seg_hits_poly = point_in_convex(a, verts)
        || point_in_convex(b, verts)
        || (0..n).any(|i| segments_intersect(a, b, verts[i], verts[(i + 1) % n]));
    if seg_hits_poly {
        // Overlapping core: minimal translation via separating axes.
        let mut axes: Vec<Vec2> = Vec::with_capacity(n + 1);
        for i in 0..n {
            axes.push((verts[(i + 1) % n] - verts[i]).normalized().perp());
        }
        let seg_dir = (b - a).normalized();
        if seg_dir.norm_sq() > 0.0 {
            axes.push(seg_dir.perp());
        }
        let poly_center = polygon_centroid(verts);
        let seg_center = (a + b) * 0.5;
        let mut best_overlap = f64::INFINITY;
        let mut best_axis = Vec2::ZERO;
        for axis in axes {
            let (mut p_min, mut p_max) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in verts {
                let d = v.dot(axis);
                p_min = p_min.min(d);
                p_max = p_max.max(d);
            }
            let (s_min, s_max) = {
                let da = a.dot(axis);
                let db = b.dot(axis);
                (da.min(db), da.max(db))
            };
            // Translation needed to separate along this axis (not the
            // intersection length, which collapses for a point-width
            // projection contained in the other interval).
            let overlap = (p_max - s_min).min(s_max - p_min);
            if overlap < best_overlap {
                best_overlap = overlap;
                best_axis = axis;
            }
        }
        let mut normal = best_axis;
        if (seg_center - poly_center).dot(normal) < 0.0 {
            normal = -normal;
        }
        return Some(Contact {
            normal,
            depth: best_overlap.max(0.0) + radius,
        });
    }
    // Disjoint core: closest-feature distance.
    let mut best_d = f64::INFINITY;
    let mut best_pair = (Vec2::ZERO, Vec2::ZERO);
    for i in 0..n {
        let (p_seg, p_poly) = {
            let (p, q) = segment_segment_closest(a, b, verts[i], verts[(i + 1) % n]);
            (p, q)
        };
        let d = (p_seg - p_poly).norm();
        if d < best_d {
            best_d = d;
            best_pair = (p_poly, p_seg);
        }
    }
    if best_d >= radius {
        return None;
    }
    let normal = if best_d > f64::EPSILON {
        (best_pair.1 - best_pair.0) / best_d
    } else {
        (b - a).normalized().perp()
    };
    Some(Contact {
        normal,
        depth: radius - best_d,
    })
}

/// SAT overlap depth between two convex polygons; `None` when separated.
pub fn polygons_overlap(p1: &[Vec2], p2: &[Vec2]) -> Option<f64> {
    let mut best = f64::INFINITY;
    for (shape, other) in [(p1, p2), (p2, p1)] {
        let n = shape.len();
        for i in 0..n {
            let axis = (shape[(i + 1) % n] - shape[i]).normalized().perp();
            let project = |verts: &[Vec2]| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for v in verts {
                    let d = v.dot(axis);
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                (lo, hi)
            };
            let (a_lo, a_hi) = project(shape);
            let (b_lo, b_hi) = project(other);
            let overlap = a_hi.min(b_hi) - a_lo.max(b_lo);
            if overlap <= 0.0 {
                return None;
            }
            best = best.min(overlap);
        }
    }
    Some(best)
}

/// Minimum distance between two disjoint convex polygons (0 on overlap).
pub fn polygon_polygon_distance(p1: &[Vec2], p2: &[Vec2]) -> f64 {
    if polygons_overlap(p1, p2).is_some() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let n1 = p1.len();
    let n2 = p2.len();
    for i in 0..n1 {
        for j in 0..n2 {
            best = best.min(segment_segment_distance(
                p1[i],
                p1[(i + 1) % n1],
                p2[j],
                p2[(j + 1) % n2],
            ));
        }
    }
    best
}

/// Ray vs segment. Returns the ray parameter t >= 0 (in units of `dir`, which
/// need not be normalized) of the nearest hit.
pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let seg = b - a;
    let denom = dir.cross(seg);
    if denom.abs() <= 1e-15 {
        return None;
    }
    let diff = a - origin;
    let t = diff.cross(seg) / denom;
    let s = diff.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Ray vs circle; nearest non-negative ray parameter.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let a = dir.norm_sq();
    if a <= 1e-30 {
        return None;
    }
    let b = 2.0 * oc.dot(dir);
    let c = oc.norm_sq() - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t1 = (-b - sq) / (2.0 * a);
    let t2 = (-b + sq) / (2.0 * a);
    if t1 >= 0.0 {
        Some(t1)
    } else if t2 >= 0.0 {
        Some(t2)
    } else {
        None
    }
}

/// Ray vs capsule (segment ab inflated by radius).
pub fn ray_capsule(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2, radius: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |t: Option<f64>| {
        if let Some(t) = t {
            best = Some(match best {
                Some(old) => old.min(t),
                None => t,
            });
        }
    };
    consider(ray_circle(origin, dir, a, radius));
    consider(ray_circle(origin, dir, b, radius));
    let axis = (b - a).normalized();
    if axis.norm_sq() > 0.0 {
        let off = axis.perp() * radius;
        consider(ray_segment(origin, dir, a + off, b + off));
        consider(ray_segment(origin, dir, a - off, b - off));
    }
    best
}
