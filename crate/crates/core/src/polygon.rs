//! Planar polygons in the metric road frame and the small set of
//! constructions the marking templates are built from.

use serde::{Deserialize, Serialize};

use crate::geometry::GroundPoint;

/// A closed polygon; the closing edge from the last vertex back to the first
/// is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub vertices: Vec<GroundPoint>,
}

impl Polygon {
    pub fn new(vertices: Vec<GroundPoint>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area, positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.lateral * b.forward - b.lateral * a.forward;
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid. Falls back to the vertex mean for zero-area input.
    pub fn centroid(&self) -> GroundPoint {
        let n = self.vertices.len();
        let a = self.signed_area();
        if n == 0 {
            return GroundPoint::default();
        }
        if a.abs() < 1e-300 {
            let (sx, sy) = self
                .vertices
                .iter()
                .fold((0.0, 0.0), |(x, y), p| (x + p.lateral, y + p.forward));
            return GroundPoint::new(sx / n as f64, sy / n as f64);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let cross = p.lateral * q.forward - q.lateral * p.forward;
            cx += (p.lateral + q.lateral) * cross;
            cy += (p.forward + q.forward) * cross;
        }
        GroundPoint::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::of_points(self.vertices.iter().copied())
    }

    pub fn translated(&self, d: GroundPoint) -> Polygon {
        Polygon::new(
            self.vertices
                .iter()
                .map(|p| GroundPoint::new(p.lateral + d.lateral, p.forward + d.forward))
                .collect(),
        )
    }

    /// Counter-clockwise rotation about the origin (viewed from above).
    pub fn rotated(&self, angle: f64) -> Polygon {
        let (s, c) = angle.sin_cos();
        Polygon::new(
            self.vertices
                .iter()
                .map(|p| GroundPoint::new(c * p.lateral - s * p.forward, s * p.lateral + c * p.forward))
                .collect(),
        )
    }

    pub fn mirrored_lateral(&self) -> Polygon {
        Polygon::new(
            self.vertices
                .iter()
                .rev()
                .map(|p| GroundPoint::new(-p.lateral, p.forward))
                .collect(),
        )
    }

    /// True when no two non-adjacent edges touch and no edge is degenerate.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edge = |i: usize| (self.vertices[i], self.vertices[(i + 1) % n]);
        for i in 0..n {
            let (a, b) = edge(i);
            if a.distance(&b) == 0.0 {
                return false;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edge(i);
                let (c, d) = edge(j);
                if adjacent {
                    // Adjacent edges may only share their common vertex.
                    if n == 3 {
                        continue;
                    }
                    let (shared, far_i, far_j) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    if collinear_overlap(shared, far_i, far_j) {
                        return false;
                    }
                } else if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_valid(&self) -> bool {
        self.vertices.len() >= 3
            && self
                .vertices
                .iter()
                .all(|p| p.lateral.is_finite() && p.forward.is_finite())
            && self.area() > 0.0
            && self.is_simple()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_lateral: f64,
    pub max_lateral: f64,
    pub min_forward: f64,
    pub max_forward: f64,
}

impl Bounds {
    pub fn of_points(points: impl IntoIterator<Item = GroundPoint>) -> Self {
        let mut b = Bounds {
            min_lateral: f64::INFINITY,
            max_lateral: f64::NEG_INFINITY,
            min_forward: f64::INFINITY,
            max_forward: f64::NEG_INFINITY,
        };
        for p in points {
            b.min_lateral = b.min_lateral.min(p.lateral);
            b.max_lateral = b.max_lateral.max(p.lateral);
            b.min_forward = b.min_forward.min(p.forward);
            b.max_forward = b.max_forward.max(p.forward);
        }
        b
    }

    pub fn contains(&self, p: GroundPoint) -> bool {
        p.lateral >= self.min_lateral
            && p.lateral <= self.max_lateral
            && p.forward >= self.min_forward
            && p.forward <= self.max_forward
    }
}

fn orient(a: GroundPoint, b: GroundPoint, c: GroundPoint) -> f64 {
    (b.lateral - a.lateral) * (c.forward - a.forward) - (b.forward - a.forward) * (c.lateral - a.lateral)
}

fn on_segment(a: GroundPoint, b: GroundPoint, p: GroundPoint) -> bool {
    p.lateral >= a.lateral.min(b.lateral)
        && p.lateral <= a.lateral.max(b.lateral)
        && p.forward >= a.forward.min(b.forward)
        && p.forward <= a.forward.max(b.forward)
}

/// Closed-segment intersection test, touching counts.
pub fn segments_intersect(a: GroundPoint, b: GroundPoint, c: GroundPoint, d: GroundPoint) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Two edges sharing `shared` fold back onto each other.
fn collinear_overlap(shared: GroundPoint, p: GroundPoint, q: GroundPoint) -> bool {
    if orient(shared, p, q) != 0.0 {
        return false;
    }
    let dot = (p.lateral - shared.lateral) * (q.lateral - shared.lateral)
        + (p.forward - shared.forward) * (q.forward - shared.forward);
    dot > 0.0
}

/// Axis-aligned rectangle centred at `center`, `width` along lateral and
/// `length` along forward.
pub fn rectangle(center: GroundPoint, width: f64, length: f64) -> Polygon {
    let (hw, hl) = (0.5 * width, 0.5 * length);
    let (x, y) = (center.lateral, center.forward);
    Polygon::new(vec![
        GroundPoint::new(x - hw, y - hl),
        GroundPoint::new(x + hw, y - hl),
        GroundPoint::new(x + hw, y + hl),
        GroundPoint::new(x - hw, y + hl),
    ])
}

/// Thick segment from `a` to `b`; `cap` extends both ends by half the width.
pub fn stroke_segment(a: GroundPoint, b: GroundPoint, width: f64, cap: bool) -> Polygon {
    let len = a.distance(&b);
    let (dx, dy) = ((b.lateral - a.lateral) / len, (b.forward - a.forward) / len);
    let h = 0.5 * width;
    let (ex, ey) = if cap { (dx * h, dy * h) } else { (0.0, 0.0) };
    let (nx, ny) = (-dy * h, dx * h);
    Polygon::new(vec![
        GroundPoint::new(a.lateral - ex - nx, a.forward - ey - ny),
        GroundPoint::new(b.lateral + ex - nx, b.forward + ey - ny),
        GroundPoint::new(b.lateral + ex + nx, b.forward + ey + ny),
        GroundPoint::new(a.lateral - ex + nx, a.forward - ey + ny),
    ])
}

/// Outline of a polyline stroked to `width` with mitred joins and butt ends.
///
/// The result walks the left offset forward and the right offset back.
pub fn offset_polyline(points: &[GroundPoint], width: f64) -> Polygon {
    let n = points.len();
    assert!(n >= 2, "polyline needs at least two points");
    let h = 0.5 * width;
    let normal = |i: usize| {
        let (a, b) = (points[i], points[i + 1]);
        let len = a.distance(&b);
        (-(b.forward - a.forward) / len, (b.lateral - a.lateral) / len)
    };
    let mut offsets = Vec::with_capacity(n);
    for i in 0..n {
        let (mx, my) = if i == 0 {
            normal(0)
        } else if i == n - 1 {
            normal(n - 2)
        } else {
            let (ax, ay) = normal(i - 1);
            let (bx, by) = normal(i);
            let denom = 1.0 + ax * bx + ay * by;
            ((ax + bx) / denom, (ay + by) / denom)
        };
        offsets.push((mx * h, my * h));
    }
    let mut vertices = Vec::with_capacity(2 * n);
    for (p, (ox, oy)) in points.iter().zip(&offsets) {
        vertices.push(GroundPoint::new(p.lateral + ox, p.forward + oy));
    }
    for (p, (ox, oy)) in points.iter().zip(&offsets).rev() {
        vertices.push(GroundPoint::new(p.lateral - ox, p.forward - oy));
    }
    Polygon::new(vertices)
}

/// Largest miter scale factor (miter length over half-width) along a polyline.
pub fn max_miter_factor(points: &[GroundPoint]) -> f64 {
    let mut worst: f64 = 1.0;
    for w in points.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let (ux, uy) = unit(a, b);
        let (vx, vy) = unit(b, c);
        let cos_turn = ux * vx + uy * vy;
        // Miter length over half-width is 1 / cos(turn / 2).
        let half = ((1.0 + cos_turn) / 2.0).max(0.0).sqrt();
        worst = worst.max(if half > 0.0 { 1.0 / half } else { f64::INFINITY });
    }
    worst
}

fn unit(a: GroundPoint, b: GroundPoint) -> (f64, f64) {
    let len = a.distance(&b);
    ((b.lateral - a.lateral) / len, (b.forward - a.forward) / len)
}

/// Number of chords needed so a circular arc deviates from its polyline by at
/// most `tolerance`.
pub fn arc_segments(radius: f64, sweep: f64, tolerance: f64) -> usize {
    if radius <= tolerance {
        return 4;
    }
    let step = 2.0 * (1.0 - tolerance / radius).acos();
    ((sweep.abs() / step).ceil() as usize).max(1)
}

/// Points along an arc from angle `start` to `end` (radians, inclusive).
pub fn flatten_arc(center: GroundPoint, radius: f64, start: f64, end: f64, tolerance: f64) -> Vec<GroundPoint> {
    let n = arc_segments(radius, end - start, tolerance);
    (0..=n)
        .map(|k| {
            let a = start + (end - start) * k as f64 / n as f64;
            GroundPoint::new(center.lateral + radius * a.cos(), center.forward + radius * a.sin())
        })
        .collect()
}

/// Annular sector between two radii; simple as long as the sweep is below 2π.
pub fn annular_sector(
    center: GroundPoint,
    inner: f64,
    outer: f64,
    start: f64,
    end: f64,
    tolerance: f64,
) -> Polygon {
    let mut vertices = flatten_arc(center, outer, start, end, tolerance);
    let mut inner_arc = flatten_arc(center, inner, start, end, tolerance);
    inner_arc.reverse();
    vertices.extend(inner_arc);
    Polygon::new(vertices)
}

/// Three trapezoids forming a triangle outline of the given stroke width,
/// obtained by shrinking the triangle about its incentre.
pub fn triangle_outline(tri: [GroundPoint; 3], stroke: f64) -> Option<Vec<Polygon>> {
    let [a, b, c] = tri;
    let (la, lb, lc) = (b.distance(&c), c.distance(&a), a.distance(&b));
    let perimeter = la + lb + lc;
    let incenter = GroundPoint::new(
        (la * a.lateral + lb * b.lateral + lc * c.lateral) / perimeter,
        (la * a.forward + lb * b.forward + lc * c.forward) / perimeter,
    );
    let area = Polygon::new(tri.to_vec()).area();
    let inradius = 2.0 * area / perimeter;
    if stroke <= 0.0 || stroke >= inradius {
        return None;
    }
    let k = (inradius - stroke) / inradius;
    let shrink = |p: GroundPoint| {
        GroundPoint::new(
            incenter.lateral + k * (p.lateral - incenter.lateral),
            incenter.forward + k * (p.forward - incenter.forward),
        )
    };
    let inner = tri.map(shrink);
    Some(
        (0..3)
            .map(|i| {
                let j = (i + 1) % 3;
                Polygon::new(vec![tri[i], tri[j], inner[j], inner[i]])
            })
            .collect(),
    )
}

/// Even-odd point-in-polygon test over raw coordinates.
pub fn contains_even_odd(vertices: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = vertices[i];
        let [xj, yj] = vertices[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
