//! Reference intersection by recursive subdivision.
//!
//! Sub-patches that can still meet the segment are split at the midpoint,
//! alternating directions, until they are flat; each flat leaf is replaced by
//! the two triangles spanned by its corners and intersected exactly.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::intersect::IntersectionRecord;
use crate::patch::RationalBezierPatch;
use crate::pencil::ParametricLine;

/// Recursion limit on the number of successive splits.
pub const MAX_SUBDIVISION_DEPTH: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessTolerance {
    tol: f64,
}

impl FlatnessTolerance {
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::InvalidArgument(format!("flatness tolerance must be positive, got {tol}")));
        }
        Ok(Self { tol })
    }

    pub fn value(&self) -> f64 {
        self.tol
    }
}

/// De Casteljau split at `at` in direction 0 or 1.
pub fn split_patch(patch: &RationalBezierPatch, direction: usize, at: f64) -> (RationalBezierPatch, RationalBezierPatch) {
    patch.split(direction, at)
}

/// Unit mean of the normals on a 3x3 parameter grid, if it does not vanish.
fn sampled_normal(patch: &RationalBezierPatch) -> Option<Vector3<f64>> {
    let mut acc = Vector3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            if let Ok(n) = patch.normal([a as f64 / 2.0, b as f64 / 2.0]) {
                if n.iter().all(|c| c.is_finite()) {
                    acc += n;
                }
            }
        }
    }
    if acc.norm() > 1e-14 {
        return Some(acc.normalize());
    }
    // Corner diagonals as a fallback for degenerate sampled normals.
    let [p, q] = patch.degree();
    let d1 = patch.control_point(p, q) - patch.control_point(0, 0);
    let d2 = patch.control_point(0, q) - patch.control_point(p, 0);
    let n = d1.cross(&d2);
    (n.norm() > 1e-300).then(|| n.normalize())
}

/// Spread of the control net's support heights along the sampled average
/// normal; infinite if no normal can be estimated.
pub fn flatness_spread(patch: &RationalBezierPatch) -> f64 {
    match sampled_normal(patch) {
        Some(n) => {
            let (lo, hi) = patch
                .points()
                .iter()
                .map(|p| p.coords.dot(&n))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            hi - lo
        }
        None => f64::INFINITY,
    }
}

pub fn is_flat(patch: &RationalBezierPatch, ftol: FlatnessTolerance) -> bool {
    flatness_spread(patch) <= ftol.tol
}

/// Largest distance of a control point from the bilinear interpolant of the
/// four corner control points.
fn bilinear_deviation(patch: &RationalBezierPatch) -> f64 {
    let [p, q] = patch.degree();
    let c00 = patch.control_point(0, 0).coords;
    let c10 = patch.control_point(p, 0).coords;
    let c01 = patch.control_point(0, q).coords;
    let c11 = patch.control_point(p, q).coords;
    let mut dev = 0.0f64;
    for j in 0..=q {
        for i in 0..=p {
            let u = if p == 0 { 0.0 } else { i as f64 / p as f64 };
            let v = if q == 0 { 0.0 } else { j as f64 / q as f64 };
            let b = c00 * ((1.0 - u) * (1.0 - v)) + c10 * (u * (1.0 - v)) + c01 * ((1.0 - u) * v) + c11 * (u * v);
            dev = dev.max((patch.control_point(i, j).coords - b).norm());
        }
    }
    dev
}

/// Bounding directions aligned with the segment: its own axis and eight
/// directions in the orthogonal plane.
struct SegmentFrame {
    dirs: Vec<Vector3<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SegmentFrame {
    fn new(a: Point3<f64>, b: Point3<f64>) -> Self {
        let u = (b - a).normalize();
        let helper = if u.x.abs() < 0.6 { Vector3::x() } else { Vector3::y() };
        let e1 = u.cross(&helper).normalize();
        let e2 = u.cross(&e1);
        let mut dirs = vec![u];
        for k in 0..4 {
            let ang = std::f64::consts::PI * k as f64 / 4.0;
            dirs.push(e1 * ang.cos() + e2 * ang.sin());
        }
        let lo = dirs.iter().map(|d| a.coords.dot(d).min(b.coords.dot(d))).collect();
        let hi = dirs.iter().map(|d| a.coords.dot(d).max(b.coords.dot(d))).collect();
        Self { dirs, lo, hi }
    }

    fn may_hit(&self, patch: &RationalBezierPatch, slack: f64) -> bool {
        self.dirs.iter().enumerate().all(|(j, d)| {
            let (lo, hi) = patch
                .points()
                .iter()
                .map(|p| p.coords.dot(d))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            hi >= self.lo[j] - slack && lo <= self.hi[j] + slack
        })
    }
}

/// Segment/triangle intersection returning `(t, u, v)` with the hit at
/// `a + t (b - a)` and barycentric weights `u`, `v` on `p1`, `p2`.
fn segment_triangle(
    a: &Point3<f64>,
    dir: &Vector3<f64>,
    p0: &Point3<f64>,
    p1: &Point3<f64>,
    p2: &Point3<f64>,
) -> Option<(f64, f64, f64)> {
    let e1 = p1 - p0;
    let e2 = p2 - p0;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let s = a - p0;
    let u = s.dot(&h) / det;
    let qv = s.cross(&e1);
    let v = dir.dot(&qv) / det;
    let t = e2.dot(&qv) / det;
    let eps = 1e-12;
    if u < -eps || v < -eps || u + v > 1.0 + eps || t < -eps || t > 1.0 + eps {
        return None;
    }
    Some((t.clamp(0.0, 1.0), u, v))
}

/// Work counters for one subdivision run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SubdivisionStats {
    pub visited: usize,
    pub leaves: usize,
    pub max_depth: usize,
    /// Largest number of sub-patches alive at once.
    pub peak_live: usize,
}

struct Node {
    patch: RationalBezierPatch,
    u: [f64; 2],
    v: [f64; 2],
    depth: usize,
}

/// Intersections of the segment `line` (over its domain) with `patch`.
pub fn subdivision_intersect(
    patch: &RationalBezierPatch,
    line: &ParametricLine,
    ftol: FlatnessTolerance,
) -> Result<Vec<IntersectionRecord>> {
    subdivision_intersect_with_stats(patch, 0, line, ftol).map(|(r, _)| r)
}

pub fn subdivision_intersect_with_stats(
    patch: &RationalBezierPatch,
    patch_id: usize,
    line: &ParametricLine,
    ftol: FlatnessTolerance,
) -> Result<(Vec<IntersectionRecord>, SubdivisionStats)> {
    let tol = ftol.tol;
    let (a, b) = line.endpoints();
    let dir = b - a;
    let frame = SegmentFrame::new(a, b);
    let mut stats = SubdivisionStats::default();
    let mut hits: Vec<(f64, [f64; 2], Point3<f64>)> = Vec::new();
    let mut stack = vec![Node { patch: patch.clone(), u: [0.0, 1.0], v: [0.0, 1.0], depth: 0 }];
    while let Some(node) = stack.pop() {
        stats.visited += 1;
        stats.max_depth = stats.max_depth.max(node.depth);
        if !frame.may_hit(&node.patch, tol) {
            continue;
        }
        let flat = flatness_spread(&node.patch) <= tol && bilinear_deviation(&node.patch) <= tol;
        if flat {
            stats.leaves += 1;
            let [p, q] = node.patch.degree();
            let c = [
                node.patch.control_point(0, 0),
                node.patch.control_point(p, 0),
                node.patch.control_point(0, q),
                node.patch.control_point(p, q),
            ];
            let params = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
            for tri in [[0usize, 1, 3], [0, 3, 2]] {
                if let Some((t, bu, bv)) = segment_triangle(&a, &dir, &c[tri[0]], &c[tri[1]], &c[tri[2]]) {
                    let w0 = 1.0 - bu - bv;
                    let lu = w0 * params[tri[0]][0] + bu * params[tri[1]][0] + bv * params[tri[2]][0];
                    let lv = w0 * params[tri[0]][1] + bu * params[tri[1]][1] + bv * params[tri[2]][1];
                    let theta = [
                        (node.u[0] + lu * (node.u[1] - node.u[0])).clamp(0.0, 1.0),
                        (node.v[0] + lv * (node.v[1] - node.v[0])).clamp(0.0, 1.0),
                    ];
                    let xi = line.domain[0] + t * (line.domain[1] - line.domain[0]);
                    hits.push((xi, theta, a + dir * t));
                }
            }
            continue;
        }
        if node.depth >= MAX_SUBDIVISION_DEPTH {
            return Err(Error::ToleranceUnreachable { depth: node.depth });
        }
        let d = node.depth % 2;
        let (l, r) = node.patch.split(d, 0.5);
        let (lu, lv, ru, rv) = if d == 0 {
            let m = 0.5 * (node.u[0] + node.u[1]);
            ([node.u[0], m], node.v, [m, node.u[1]], node.v)
        } else {
            let m = 0.5 * (node.v[0] + node.v[1]);
            (node.u, [node.v[0], m], node.u, [m, node.v[1]])
        };
        stack.push(Node { patch: r, u: ru, v: rv, depth: node.depth + 1 });
        stack.push(Node { patch: l, u: lu, v: lv, depth: node.depth + 1 });
        stats.peak_live = stats.peak_live.max(stack.len());
    }

    hits.sort_by(|x, y| x.0.total_cmp(&y.0));
    let merge = 4.0 * tol + 64.0 * f64::EPSILON * patch.diameter();
    let mut out: Vec<IntersectionRecord> = Vec::new();
    for (xi, theta, p) in hits {
        if let Some(last) = out.last() {
            if (last.point() - p).norm() <= merge {
                continue;
            }
        }
        out.push(IntersectionRecord {
            xi,
            theta,
            point: [p.x, p.y, p.z],
            patch_id,
            multiplicity_hint: 1,
            self_intersection: false,
        });
    }
    Ok((out, stats))
}
