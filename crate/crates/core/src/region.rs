//! Convex rate regions in the `(R_y, R_z)` plane.
//!
//! Regions are stored as a canonical vertex list: counterclockwise, starting
//! at the lexicographically smallest vertex, with collinear vertices removed.
//! Two regions built from the same point set therefore compare equal
//! structurally and serialize to identical CSV bytes.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A point closer than this to the line through its hull neighbours counts
/// as collinear and is dropped.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// Points closer than this (per coordinate) are merged.
const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub r_y: f64,
    pub r_z: f64,
}

impl RatePair {
    pub const ORIGIN: RatePair = RatePair { r_y: 0.0, r_z: 0.0 };

    pub fn new(r_y: f64, r_z: f64) -> Self {
        RatePair { r_y, r_z }
    }

    fn sub(self, o: RatePair) -> RatePair {
        RatePair::new(self.r_y - o.r_y, self.r_z - o.r_z)
    }

    fn dot(self, o: RatePair) -> f64 {
        self.r_y * o.r_y + self.r_z * o.r_z
    }

    fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

fn cross(o: RatePair, a: RatePair, b: RatePair) -> f64 {
    (a.r_y - o.r_y) * (b.r_z - o.r_z) - (a.r_z - o.r_z) * (b.r_y - o.r_y)
}

/// Caps `(a, b, c)` on `R_y`, `R_z` and `R_y + R_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BoundTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        BoundTriple { a, b, c }
    }

    /// Support value of `polytope_from_triple(self)` without building it.
    ///
    /// Weights must be nonnegative.
    pub fn support(&self, w_y: f64, w_z: f64) -> f64 {
        if self.a < 0.0 || self.c <= 0.0 {
            return 0.0;
        }
        let b = self.b.max(0.0);
        // vertices of the clipped box are enough
        let ry_max = self.a.min(self.c);
        let rz_max = b.min(self.c);
        let mut best = (w_y * ry_max).max(w_z * rz_max).max(0.0);
        // corner on the R_y = a edge
        let top = b.min(self.c - self.a).max(0.0);
        if self.a <= self.c {
            best = best.max(w_y * self.a + w_z * top);
        }
        // corner on the R_z = b edge
        let right = self.a.min(self.c - b).max(0.0);
        if b <= self.c {
            best = best.max(w_y * right + w_z * b);
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegion2D {
    vertices: Vec<RatePair>,
}

impl ConvexRegion2D {
    /// The region `{(0, 0)}`.
    pub fn origin() -> Self {
        ConvexRegion2D {
            vertices: vec![RatePair::ORIGIN],
        }
    }

    /// Convex hull of a point set, canonicalized.
    ///
    /// Coordinates in `[-1e-12, 0)` are snapped to zero; anything more
    /// negative is rejected.
    pub fn hull(points: &[RatePair]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("convex hull of an empty point set".into()));
        }
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            if !(p.r_y.is_finite() && p.r_z.is_finite()) {
                return Err(Error::Numerical(format!("non-finite rate pair {p:?}")));
            }
            if p.r_y < -DEDUP_TOL || p.r_z < -DEDUP_TOL {
                return Err(Error::InvalidArgument(format!(
                    "rate pair ({}, {}) outside the nonnegative quadrant",
                    p.r_y, p.r_z
                )));
            }
            pts.push(RatePair::new(p.r_y.max(0.0), p.r_z.max(0.0)));
        }
        Ok(ConvexRegion2D {
            vertices: monotone_chain(pts),
        })
    }

    pub fn vertices(&self) -> &[RatePair] {
        &self.vertices
    }

    pub fn is_point(&self) -> bool {
        self.vertices.len() == 1
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            twice += p.r_y * q.r_z - q.r_y * p.r_z;
        }
        twice / 2.0
    }

    /// Euclidean distance from `p` to the region (zero inside).
    pub fn distance(&self, p: RatePair) -> f64 {
        let v = &self.vertices;
        match v.len() {
            1 => p.sub(v[0]).norm(),
            2 => segment_distance(p, v[0], v[1]),
            n => {
                let inside = (0..n).all(|i| cross(v[i], v[(i + 1) % n], p) >= 0.0);
                if inside {
                    return 0.0;
                }
                (0..n)
                    .map(|i| segment_distance(p, v[i], v[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Whether every vertex of `self` lies within `tol` of `other`.
    pub fn is_within(&self, other: &ConvexRegion2D, tol: f64) -> bool {
        self.vertices.iter().all(|&v| other.distance(v) <= tol)
    }

    /// Largest `R_z` in the region at the given `R_y`, or `None` when the
    /// vertical line misses the region.
    pub fn height_at(&self, r_y: f64) -> Option<f64> {
        let v = &self.vertices;
        let mut best: Option<f64> = None;
        let mut take = |z: f64| best = Some(best.map_or(z, |b: f64| b.max(z)));
        for (i, a) in v.iter().enumerate() {
            if a.r_y == r_y {
                take(a.r_z);
            }
            let b = v[(i + 1) % v.len()];
            let (lo, hi) = if a.r_y < b.r_y { (a.r_y, b.r_y) } else { (b.r_y, a.r_y) };
            if lo < r_y && r_y < hi {
                let t = (r_y - a.r_y) / (b.r_y - a.r_y);
                take(a.r_z + t * (b.r_z - a.r_z));
            }
        }
        best
    }

    /// Largest value of `w_y * r_y + w_z * r_z` over the region.
    pub fn max_along(&self, w_y: f64, w_z: f64) -> f64 {
        self.vertices
            .iter()
            .map(|v| w_y * v.r_y + w_z * v.r_z)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The boundary facing away from the origin, ordered by increasing
    /// `R_y`: from the point on the `R_z` axis to the point on the `R_y` axis.
    ///
    /// Regions that do not contain the origin as a vertex return all vertices.
    pub fn outer_boundary(&self) -> Vec<RatePair> {
        match self.vertices.split_first() {
            Some((first, rest)) if *first == RatePair::ORIGIN && !rest.is_empty() => {
                rest.iter().rev().copied().collect()
            }
            _ => self.vertices.clone(),
        }
    }

    /// Canonical CSV: header `r_y,r_z`, one vertex per line, 9 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r_y,r_z\n");
        for v in &self.vertices {
            writeln!(out, "{},{}", fmt9(v.r_y), fmt9(v.r_z)).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "r_y,r_z" => {}
            _ => return Err(Error::parse("csv", Some("line 1".into()), "expected header `r_y,r_z`")),
        }
        let mut pts = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::parse("csv", Some(format!("line {}", i + 2)), "expected two numbers");
            let (y, z) = line.split_once(',').ok_or_else(bad)?;
            let y: f64 = y.trim().parse().map_err(|_| bad())?;
            let z: f64 = z.trim().parse().map_err(|_| bad())?;
            pts.push(RatePair::new(y, z));
        }
        ConvexRegion2D::hull(&pts)
    }
}

/// Formats with 9 decimals, never printing `-0.000000000`.
pub fn fmt9(x: f64) -> String {
    let s = format!("{x:.9}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn segment_distance(p: RatePair, a: RatePair, b: RatePair) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.sub(a).norm();
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.sub(RatePair::new(a.r_y + t * ab.r_y, a.r_z + t * ab.r_z)).norm()
}

/// Andrew's monotone chain, counterclockwise from the lexicographic minimum.
fn monotone_chain(mut pts: Vec<RatePair>) -> Vec<RatePair> {
    pts.sort_by(|p, q| {
        p.r_y
            .partial_cmp(&q.r_y)
            .unwrap()
            .then(p.r_z.partial_cmp(&q.r_z).unwrap())
    });
    pts.dedup_by(|q, p| (p.r_y - q.r_y).abs() <= DEDUP_TOL && (p.r_z - q.r_z).abs() <= DEDUP_TOL);
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<RatePair> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && drops_middle(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && drops_middle(hull[hull.len() - 2], hull[hull.len() - 1], p)
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn drops_middle(a: RatePair, b: RatePair, p: RatePair) -> bool {
    // distance of b from the line a-p, without the division
    cross(a, b, p) <= COLLINEAR_TOL * p.sub(a).norm()
}

/// `{0 <= R_y <= a, 0 <= R_z <= max(b, 0), R_y + R_z <= c}`.
///
/// Returns the origin-only region when `a < 0` or `c <= 0`.
pub fn polytope_from_triple(t: BoundTriple) -> ConvexRegion2D {
    if t.a < 0.0 || t.c <= 0.0 {
        return ConvexRegion2D::origin();
    }
    let a = t.a;
    let b = t.b.max(0.0);
    let c = t.c;
    let rect = [
        RatePair::new(0.0, 0.0),
        RatePair::new(a, 0.0),
        RatePair::new(a, b),
        RatePair::new(0.0, b),
    ];
    // clip the box against R_y + R_z <= c
    let mut pts = Vec::with_capacity(6);
    for i in 0..4 {
        let p = rect[i];
        let q = rect[(i + 1) % 4];
        let fp = p.r_y + p.r_z - c;
        let fq = q.r_y + q.r_z - c;
        if fp <= 0.0 {
            pts.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let s = fp / (fp - fq);
            pts.push(RatePair::new(
                p.r_y + s * (q.r_y - p.r_y),
                p.r_z + s * (q.r_z - p.r_z),
            ));
        }
    }
    ConvexRegion2D::hull(&pts).expect("clipped box stays in the quadrant")
}

/// Convex hull of the union of the given regions.
pub fn union_hull(parts: &[ConvexRegion2D]) -> Result<ConvexRegion2D> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("union of zero regions".into()));
    }
    let pts: Vec<RatePair> = parts.iter().flat_map(|r| r.vertices.iter().copied()).collect();
    ConvexRegion2D::hull(&pts)
}

/// Whether `p` lies within distance `tol` of the region.
pub fn contains(region: &ConvexRegion2D, p: RatePair, tol: f64) -> bool {
    region.distance(p) <= tol
}

/// `max over the region of w_y * r_y + w_z * r_z`.
pub fn support_value(region: &ConvexRegion2D, w_y: f64, w_z: f64) -> Result<f64> {
    if w_y == 0.0 && w_z == 0.0 {
        return Err(Error::InvalidArgument("support direction must be nonzero".into()));
    }
    Ok(region.max_along(w_y, w_z))
}

/// Hausdorff distance between two convex regions.
///
/// For convex polygons the farthest point of one from the other is a vertex,
/// so checking vertices both ways is exact.
pub fn hausdorff(a: &ConvexRegion2D, b: &ConvexRegion2D) -> f64 {
    let ab = a.vertices.iter().map(|&v| b.distance(v)).fold(0.0, f64::max);
    let ba = b.vertices.iter().map(|&v| a.distance(v)).fold(0.0, f64::max);
    ab.max(ba)
}
