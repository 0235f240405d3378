//! Bézier extraction for open-uniform tensor-product B-spline surfaces.
//!
//! Each non-empty knot span becomes one rational Bézier patch. The Bézier
//! control points of a span `[a, b]` are blossom values
//! `P(a, .., a, b, .., b)`, evaluated with a de Boor recurrence whose argument
//! changes per level.

use nalgebra::{Point3, Vector4};

use crate::error::{Error, Result};
use crate::patch::RationalBezierPatch;

/// A tensor-product (rational) B-spline surface with clamped uniform knots.
#[derive(Debug, Clone)]
pub struct TensorBSplineSurface {
    degree: [usize; 2],
    knots: [Vec<f64>; 2],
    /// Control net, row-major by the first parametric index.
    points: Vec<Point3<f64>>,
    weights: Vec<f64>,
}

impl TensorBSplineSurface {
    pub fn new(
        degree: [usize; 2],
        knots: [Vec<f64>; 2],
        points: Vec<Point3<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut counts = [0usize; 2];
        for d in 0..2 {
            let kv = &knots[d];
            if kv.len() < 2 * (degree[d] + 1) {
                return Err(Error::InvalidArgument(format!(
                    "knot vector {d} has {} entries, needs at least {}",
                    kv.len(),
                    2 * (degree[d] + 1)
                )));
            }
            if kv.windows(2).any(|w| !(w[1] >= w[0])) {
                return Err(Error::InvalidArgument(format!("knot vector {d} is not non-decreasing")));
            }
            counts[d] = kv.len() - degree[d] - 1;
        }
        if points.len() != counts[0] * counts[1] || weights.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "control net must be {}x{}, got {} points and {} weights",
                counts[0],
                counts[1],
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
        }
        Ok(Self { degree, knots, points, weights })
    }

    pub fn degree(&self) -> [usize; 2] {
        self.degree
    }

    pub fn knots(&self) -> &[Vec<f64>; 2] {
        &self.knots
    }

    pub fn net_size(&self) -> [usize; 2] {
        [self.knots[0].len() - self.degree[0] - 1, self.knots[1].len() - self.degree[1] - 1]
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn homogeneous(&self) -> Vec<Vector4<f64>> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| Vector4::new(w * p.x, w * p.y, w * p.z, *w))
            .collect()
    }
}

fn check_open_uniform(degree: usize, knots: &[f64], dir: usize) -> Result<()> {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if !(last > first) {
        return Err(Error::UnsupportedInput(format!("knot vector {dir} has an empty domain")));
    }
    let clamped = knots[..=degree].iter().all(|k| *k == first) && knots[knots.len() - degree - 1..].iter().all(|k| *k == last);
    if !clamped {
        return Err(Error::UnsupportedInput(format!(
            "knot vector {dir} is not open (end knots need multiplicity {})",
            degree + 1
        )));
    }
    let mut breaks: Vec<f64> = knots.to_vec();
    breaks.dedup();
    let h = (last - first) / (breaks.len() - 1) as f64;
    for (j, b) in breaks.iter().enumerate() {
        if (b - (first + h * j as f64)).abs() > 1e-9 * (last - first) {
            return Err(Error::UnsupportedInput(format!("knot vector {dir} is not uniform")));
        }
    }
    Ok(())
}

/// Indices `k` of the non-empty spans `[knots[k], knots[k+1])`.
fn spans(degree: usize, knots: &[f64]) -> Vec<usize> {
    let n = knots.len() - degree - 1;
    (degree..n).filter(|&k| knots[k + 1] > knots[k]).collect()
}

/// Blossom `P(args[0], .., args[p-1])` of the local control points `d`
/// (length `p + 1`) belonging to span `k`.
fn blossom(degree: usize, knots: &[f64], span: usize, d: &[Vector4<f64>], args: &[f64]) -> Vector4<f64> {
    let mut work = d.to_vec();
    for r in 1..=degree {
        let t = args[r - 1];
        for j in (r..=degree).rev() {
            let i = span - degree + j;
            let denom = knots[i + degree + 1 - r] - knots[i];
            let alpha = if denom == 0.0 { 0.0 } else { (t - knots[i]) / denom };
            work[j] = work[j - 1] * (1.0 - alpha) + work[j] * alpha;
        }
    }
    work[degree]
}

/// Bézier points of one span of a univariate B-spline (homogeneous).
fn extract_span(degree: usize, knots: &[f64], span: usize, ctrl: &[Vector4<f64>]) -> Vec<Vector4<f64>> {
    let (a, b) = (knots[span], knots[span + 1]);
    let local = &ctrl[span - degree..=span];
    (0..=degree)
        .map(|i| {
            let args: Vec<f64> = (0..degree).map(|r| if r < degree - i { a } else { b }).collect();
            blossom(degree, knots, span, local, &args)
        })
        .collect()
}

/// Bézier segments of a univariate open-uniform B-spline given homogeneous control points.
pub fn extract_curve_segments(degree: usize, knots: &[f64], ctrl: &[Vector4<f64>]) -> Result<Vec<Vec<Vector4<f64>>>> {
    if knots.len() != ctrl.len() + degree + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} control points need {} knots, got {}",
            ctrl.len(),
            ctrl.len() + degree + 1,
            knots.len()
        )));
    }
    check_open_uniform(degree, knots, 0)?;
    Ok(spans(degree, knots).into_iter().map(|s| extract_span(degree, knots, s, ctrl)).collect())
}

/// Converts the surface into one Bézier patch per non-empty knot span.
///
/// Patches are ordered with the first-direction span index varying fastest.
pub fn bspline_to_bezier(surface: &TensorBSplineSurface) -> Result<Vec<RationalBezierPatch>> {
    let [p, q] = surface.degree;
    check_open_uniform(p, &surface.knots[0], 0)?;
    check_open_uniform(q, &surface.knots[1], 1)?;
    let [nu, nv] = surface.net_size();
    let net = surface.homogeneous();
    let spans_u = spans(p, &surface.knots[0]);
    let spans_v = spans(q, &surface.knots[1]);

    // Extract along u for every row of the net: rows[j][span][i]
    let rows: Vec<Vec<Vec<Vector4<f64>>>> = (0..nv)
        .map(|j| {
            let row: Vec<Vector4<f64>> = (0..nu).map(|i| net[j * nu + i]).collect();
            spans_u.iter().map(|&s| extract_span(p, &surface.knots[0], s, &row)).collect()
        })
        .collect();

    let mut patches = Vec::with_capacity(spans_u.len() * spans_v.len());
    for &sv in &spans_v {
        for su in 0..spans_u.len() {
            let mut bez = vec![Vector4::zeros(); (p + 1) * (q + 1)];
            for i in 0..=p {
                let column: Vec<Vector4<f64>> = (0..nv).map(|j| rows[j][su][i]).collect();
                let seg = extract_span(q, &surface.knots[1], sv, &column);
                for (j, h) in seg.into_iter().enumerate() {
                    bez[j * (p + 1) + i] = h;
                }
            }
            patches.push(RationalBezierPatch::from_homogeneous([p, q], &bez)?);
        }
    }
    Ok(patches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn open_uniform(degree: usize, spans: usize) -> Vec<f64> {
        let mut k = vec![0.0; degree + 1];
        for s in 1..spans {
            k.push(s as f64 / spans as f64);
        }
        k.extend(std::iter::repeat(1.0).take(degree + 1));
        k
    }

    // Cox-de Boor basis values, used as an independent evaluation oracle.
    fn basis(degree: usize, knots: &[f64], t: f64) -> Vec<f64> {
        let n = knots.len() - degree - 1;
        let last = knots[knots.len() - 1];
        let mut b: Vec<f64> = (0..knots.len() - 1)
            .map(|i| {
                let inside = knots[i] <= t && t < knots[i + 1];
                let at_end = t == last && knots[i] < knots[i + 1] && knots[i + 1] == last;
                if inside || at_end {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        for d in 1..=degree {
            for i in 0..knots.len() - 1 - d {
                let l = if knots[i + d] > knots[i] { (t - knots[i]) / (knots[i + d] - knots[i]) * b[i] } else { 0.0 };
                let r = if knots[i + d + 1] > knots[i + 1] {
                    (knots[i + d + 1] - t) / (knots[i + d + 1] - knots[i + 1]) * b[i + 1]
                } else {
                    0.0
                };
                b[i] = l + r;
            }
        }
        b.truncate(n);
        b
    }

    // Boehm knot insertion, repeated until every interior knot has multiplicity p.
    fn insert_knot(degree: usize, knots: &mut Vec<f64>, ctrl: &mut Vec<Vector4<f64>>, t: f64) {
        let k = knots.iter().rposition(|u| *u <= t).unwrap();
        let mut new = Vec::with_capacity(ctrl.len() + 1);
        for i in 0..=ctrl.len() {
            if i + degree <= k {
                new.push(ctrl[i]);
            } else if i > k {
                new.push(ctrl[i - 1]);
            } else {
                let a = (t - knots[i]) / (knots[i + degree] - knots[i]);
                new.push(ctrl[i - 1] * (1.0 - a) + ctrl[i] * a);
            }
        }
        knots.insert(k + 1, t);
        *ctrl = new;
    }

    fn boehm_segments(degree: usize, knots: &[f64], ctrl: &[Vector4<f64>]) -> Vec<Vec<Vector4<f64>>> {
        let mut kv = knots.to_vec();
        let mut c = ctrl.to_vec();
        let mut interior: Vec<f64> = knots[degree + 1..knots.len() - degree - 1].to_vec();
        interior.dedup();
        for t in interior {
            while kv.iter().filter(|u| **u == t).count() < degree {
                insert_knot(degree, &mut kv, &mut c, t);
            }
        }
        let segs = (c.len() - 1) / degree;
        (0..segs).map(|s| c[s * degree..=s * degree + degree].to_vec()).collect()
    }

    fn random_surface(rng: &mut ChaCha8Rng, degree: [usize; 2], spans: [usize; 2]) -> TensorBSplineSurface {
        let ku = open_uniform(degree[0], spans[0]);
        let kv = open_uniform(degree[1], spans[1]);
        let n = (ku.len() - degree[0] - 1) * (kv.len() - degree[1] - 1);
        let pts = (0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
        let w = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        TensorBSplineSurface::new(degree, [ku, kv], pts, w).unwrap()
    }

    fn eval_bspline(s: &TensorBSplineSurface, u: f64, v: f64) -> Point3<f64> {
        let bu = basis(s.degree()[0], &s.knots()[0], u);
        let bv = basis(s.degree()[1], &s.knots()[1], v);
        let [nu, _] = s.net_size();
        let mut acc = Vector4::zeros();
        for (j, b2) in bv.iter().enumerate() {
            for (i, b1) in bu.iter().enumerate() {
                let k = j * nu + i;
                let w = s.weights()[k];
                acc += Vector4::new(w * s.points()[k].x, w * s.points()[k].y, w * s.points()[k].z, w) * (b1 * b2);
            }
        }
        Point3::from(acc.xyz() / acc[3])
    }

    #[test]
    fn single_span_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_surface(&mut rng, [3, 3], [1, 1]);
        let patches = bspline_to_bezier(&s).unwrap();
        assert_eq!(patches.len(), 1);
        for (a, b) in patches[0].points().iter().zip(s.points()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn two_span_cubic_curve_matches_knot_insertion() {
        let knots = open_uniform(3, 2);
        let ctrl: Vec<Vector4<f64>> =
            (0..5).map(|i| Vector4::new(i as f64, (i as f64 * 1.3).sin(), (i * i) as f64 * 0.1, 1.0)).collect();
        let ours = extract_curve_segments(3, &knots, &ctrl).unwrap();
        let oracle = boehm_segments(3, &knots, &ctrl);
        assert_eq!(ours.len(), 2);
        assert_eq!(oracle.len(), 2);
        for (a, b) in ours.iter().zip(&oracle) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn adjacent_patches_share_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_surface(&mut rng, [3, 2], [3, 2]);
        let patches = bspline_to_bezier(&s).unwrap();
        assert_eq!(patches.len(), 6);
        let (left, right) = (&patches[0], &patches[1]);
        for j in 0..=2 {
            assert!((left.control_point(3, j) - right.control_point(0, j)).norm() < 1e-14);
        }
        let (low, high) = (&patches[0], &patches[3]);
        for i in 0..=3 {
            assert!((low.control_point(i, 2) - high.control_point(i, 0)).norm() < 1e-14);
        }
    }

    #[test]
    fn patches_reproduce_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_surface(&mut rng, [3, 2], [3, 4]);
        let patches = bspline_to_bezier(&s).unwrap();
        for _ in 0..50 {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let (su, sv) = (((u * 3.0) as usize).min(2), ((v * 4.0) as usize).min(3));
            let local = [u * 3.0 - su as f64, v * 4.0 - sv as f64];
            let p = patches[sv * 3 + su].eval(local).unwrap();
            assert!((p - eval_bspline(&s, u, v)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_open_knots() {
        let knots = vec![0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0];
        let pts = vec![Point3::origin(); 4 * 4];
        let s = TensorBSplineSurface::new([2, 2], [knots.clone(), knots], pts, vec![1.0; 16]).unwrap();
        assert!(matches!(bspline_to_bezier(&s), Err(Error::UnsupportedInput(_))));
    }
}
