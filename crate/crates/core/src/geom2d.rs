//! Planar polygon helpers (mm).

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

pub type P2 = Point2<f64>;

/// Closed polygon; the closing edge from last to first vertex is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<P2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: P2,
    pub max: P2,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> P2 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: P2::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: P2::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn expand(&self, margin: f64) -> BBox {
        BBox {
            min: P2::new(self.min.x - margin, self.min.y - margin),
            max: P2::new(self.max.x + margin, self.max.y + margin),
        }
    }
}

impl Polygon {
    pub fn new(vertices: Vec<P2>) -> Self {
        Self { vertices }
    }

    pub fn rect(min: P2, max: P2) -> Self {
        Self::new(vec![
            min,
            P2::new(max.x, min.y),
            max,
            P2::new(min.x, max.y),
        ])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (P2, P2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn bbox(&self) -> BBox {
        let mut min = P2::new(f64::INFINITY, f64::INFINITY);
        let mut max = P2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        BBox { min, max }
    }

    /// Even-odd containment test. Boundary points may go either way.
    pub fn contains(&self, p: &P2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the nearest boundary edge.
    pub fn boundary_distance(&self, p: &P2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Contains `p` or lies within `tol` of the boundary.
    pub fn covers(&self, p: &P2, tol: f64) -> bool {
        self.contains(p) || self.boundary_distance(p) <= tol
    }

    /// Brute-force simplicity check: no pair of non-adjacent edges touches and
    /// no edge is degenerate.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<_> = self.edges().collect();
        if edges.iter().any(|(a, b)| (b - a).norm() == 0.0) {
            return false;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(&edges[i].0, &edges[i].1, &edges[j].0, &edges[j].1) {
                    return false;
                }
            }
        }
        true
    }

    /// Any edge of `self` touches any edge of `other`.
    pub fn edges_cross(&self, other: &Polygon) -> bool {
        self.edges().any(|(a, b)| {
            other
                .edges()
                .any(|(c, d)| segments_intersect(&a, &b, &c, &d))
        })
    }

    /// Boundary resampled so no step exceeds `max_step`; original vertices kept.
    pub fn resampled(&self, max_step: f64) -> Vec<P2> {
        let mut out = Vec::new();
        for (a, b) in self.edges() {
            out.extend(resample_segment(&a, &b, max_step));
            out.pop();
        }
        out
    }

    pub fn reversed(&self) -> Polygon {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon::new(v)
    }
}

/// Points from `a` to `b` inclusive, evenly spaced with step ≤ `max_step`.
pub fn resample_segment(a: &P2, b: &P2, max_step: f64) -> Vec<P2> {
    let len = (b - a).norm();
    let n = ((len / max_step).ceil() as usize).max(1);
    (0..=n)
        .map(|i| {
            if i == n {
                *b
            } else {
                a + (b - a) * (i as f64 / n as f64)
            }
        })
        .collect()
}

pub fn point_segment_distance(p: &P2, a: &P2, b: &P2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn on_segment(p: &P2, a: &P2, b: &P2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, including collinear overlap and touching.
pub fn segments_intersect(a: &P2, b: &P2, c: &P2, d: &P2) -> bool {
    let d1 = cross(&(d - c), &(a - c));
    let d2 = cross(&(d - c), &(b - c));
    let d3 = cross(&(b - a), &(c - a));
    let d4 = cross(&(b - a), &(d - a));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Intervals (in the parameter `t` along `origin + t·dir`) where the line is
/// inside `poly`, by the even-odd rule. Sorted and non-overlapping.
pub fn line_intervals(poly: &Polygon, origin: &P2, dir: &Vector2<f64>) -> Vec<(f64, f64)> {
    let normal = Vector2::new(-dir.y, dir.x);
    let mut hits = Vec::new();
    for (a, b) in poly.edges() {
        let sa = (a - origin).dot(&normal);
        let sb = (b - origin).dot(&normal);
        // half-open rule keeps vertex hits counted once
        if (sa > 0.0) != (sb > 0.0) {
            let t = sa / (sa - sb);
            let p = a + (b - a) * t;
            hits.push((p - origin).dot(dir));
        }
    }
    hits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hits.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}
