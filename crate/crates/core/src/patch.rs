//! Rational tensor-product Bézier patches and rational Bézier curves.
//!
//! Control nets are stored flat, row-major by the first parametric index: the
//! control point with 1-based multi-index `(i1, i2)` lives at
//! `k = (i2 - 1) * (mu1 + 1) + i1` (1-based), i.e. `k0 = i2_0 * (mu1 + 1) + i1_0`
//! with 0-based indices. The implicitisation matrices rely on this layout.

use nalgebra::{Point3, Vector3, Vector4};

use crate::bernstein::bernstein_all_into;
use crate::error::{Error, Result};

/// Highest degree accepted for evaluation.
pub const MAX_EVAL_DEGREE: usize = 10;

const BASE_POINT_EPS: f64 = 1e-300;

fn validate_weights(weights: &[f64]) -> Result<()> {
    for (k, w) in weights.iter().enumerate() {
        if !w.is_finite() || *w <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight {k} must be strictly positive and finite, got {w}"
            )));
        }
    }
    Ok(())
}

fn validate_points(points: &[Point3<f64>]) -> Result<()> {
    if let Some(k) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidArgument(format!("control point {k} is not finite")));
    }
    Ok(())
}

/// A rational tensor-product Bézier patch of bi-degree `(mu1, mu2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalBezierPatch {
    degree: [usize; 2],
    points: Vec<Point3<f64>>,
    weights: Vec<f64>,
}

impl RationalBezierPatch {
    pub fn new(degree: [usize; 2], points: Vec<Point3<f64>>, weights: Vec<f64>) -> Result<Self> {
        if degree[0] > MAX_EVAL_DEGREE || degree[1] > MAX_EVAL_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "patch degree {degree:?} exceeds supported maximum {MAX_EVAL_DEGREE}"
            )));
        }
        let n = (degree[0] + 1) * (degree[1] + 1);
        if points.len() != n || weights.len() != n {
            return Err(Error::InvalidArgument(format!(
                "bi-degree {degree:?} needs {n} control points and weights, got {} and {}",
                points.len(),
                weights.len()
            )));
        }
        validate_points(&points)?;
        validate_weights(&weights)?;
        Ok(Self { degree, points, weights })
    }

    /// Polynomial patch (all weights one).
    pub fn polynomial(degree: [usize; 2], points: Vec<Point3<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(degree, points, vec![1.0; n])
    }

    /// Builds a patch from homogeneous control points `(w x, w)`.
    pub fn from_homogeneous(degree: [usize; 2], net: &[Vector4<f64>]) -> Result<Self> {
        let weights: Vec<f64> = net.iter().map(|h| h[3]).collect();
        validate_weights(&weights)?;
        let points = net.iter().map(|h| Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3])).collect();
        Self::new(degree, points, weights)
    }

    #[inline]
    pub fn degree(&self) -> [usize; 2] {
        self.degree
    }

    #[inline]
    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn flat_index(&self, i1: usize, i2: usize) -> usize {
        i2 * (self.degree[0] + 1) + i1
    }

    /// Control point with 0-based indices.
    pub fn control_point(&self, i1: usize, i2: usize) -> Point3<f64> {
        self.points[self.flat_index(i1, i2)]
    }

    pub fn homogeneous_net(&self) -> Vec<Vector4<f64>> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| Vector4::new(w * p.x, w * p.y, w * p.z, *w))
            .collect()
    }

    /// The homogeneous sum `f(theta) = sum_i B_i(theta) (w_i x_i, w_i)`.
    pub fn eval_homogeneous(&self, theta: [f64; 2]) -> Vector4<f64> {
        let [m1, m2] = self.degree;
        let mut b1 = [0.0; MAX_EVAL_DEGREE + 1];
        let mut b2 = [0.0; MAX_EVAL_DEGREE + 1];
        bernstein_all_into(m1, theta[0], &mut b1);
        bernstein_all_into(m2, theta[1], &mut b2);
        let mut acc = Vector4::zeros();
        for i2 in 0..=m2 {
            for i1 in 0..=m1 {
                let k = i2 * (m1 + 1) + i1;
                let w = self.weights[k] * b1[i1] * b2[i2];
                acc += Vector4::new(w * self.points[k].x, w * self.points[k].y, w * self.points[k].z, w);
            }
        }
        acc
    }

    /// Evaluates the patch point `(f1/f4, f2/f4, f3/f4)`.
    pub fn eval(&self, theta: [f64; 2]) -> Result<Point3<f64>> {
        let h = self.eval_homogeneous(theta);
        if h[3].abs() <= BASE_POINT_EPS {
            return Err(Error::BasePoint { theta });
        }
        Ok(Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
    }

    /// Point and first partial derivatives with respect to `theta1`, `theta2`.
    pub fn eval_with_derivatives(&self, theta: [f64; 2]) -> Result<(Point3<f64>, Vector3<f64>, Vector3<f64>)> {
        let [m1, m2] = self.degree;
        let net = self.homogeneous_net();
        let mut b1 = [0.0; MAX_EVAL_DEGREE + 1];
        let mut b2 = [0.0; MAX_EVAL_DEGREE + 1];
        let mut d1 = [0.0; MAX_EVAL_DEGREE + 1];
        let mut d2 = [0.0; MAX_EVAL_DEGREE + 1];
        bernstein_all_into(m1, theta[0], &mut b1);
        bernstein_all_into(m2, theta[1], &mut b2);
        derivative_basis(m1, theta[0], &mut d1);
        derivative_basis(m2, theta[1], &mut d2);
        let mut f = Vector4::zeros();
        let mut fu = Vector4::zeros();
        let mut fv = Vector4::zeros();
        for i2 in 0..=m2 {
            for i1 in 0..=m1 {
                let h = net[i2 * (m1 + 1) + i1];
                f += h * (b1[i1] * b2[i2]);
                fu += h * (d1[i1] * b2[i2]);
                fv += h * (b1[i1] * d2[i2]);
            }
        }
        if f[3].abs() <= BASE_POINT_EPS {
            return Err(Error::BasePoint { theta });
        }
        let x = f.xyz() / f[3];
        let xu = (fu.xyz() - x * fu[3]) / f[3];
        let xv = (fv.xyz() - x * fv[3]) / f[3];
        Ok((Point3::from(x), xu, xv))
    }

    /// Unnormalized surface normal `x_u × x_v`.
    pub fn normal(&self, theta: [f64; 2]) -> Result<Vector3<f64>> {
        let (_, xu, xv) = self.eval_with_derivatives(theta)?;
        Ok(xu.cross(&xv))
    }

    /// Mean of the control points.
    pub fn centroid(&self) -> Point3<f64> {
        let sum: Vector3<f64> = self.points.iter().map(|p| p.coords).sum();
        Point3::from(sum / self.points.len() as f64)
    }

    /// Diagonal length of the control net's axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        bbox_diagonal(&self.points)
    }

    /// De Casteljau subdivision of the homogeneous net along `direction`
    /// (0 for `theta1`, 1 for `theta2`) at parameter `at`.
    pub fn split(&self, direction: usize, at: f64) -> (Self, Self) {
        assert!(direction < 2, "split direction must be 0 or 1");
        let [m1, m2] = self.degree;
        let net = self.homogeneous_net();
        let mut left = net.clone();
        let mut right = net.clone();
        let (count, len) = if direction == 0 { (m2 + 1, m1 + 1) } else { (m1 + 1, m2 + 1) };
        let index = |row: usize, j: usize| if direction == 0 { row * (m1 + 1) + j } else { j * (m1 + 1) + row };
        let mut work = vec![Vector4::zeros(); len];
        for row in 0..count {
            for (j, w) in work.iter_mut().enumerate() {
                *w = net[index(row, j)];
            }
            let (l, r) = de_casteljau_split(&work, at);
            for j in 0..len {
                left[index(row, j)] = l[j];
                right[index(row, j)] = r[j];
            }
        }
        let degree = self.degree;
        // Positive weights stay positive under convex combinations.
        (
            Self::from_homogeneous(degree, &left).expect("subdivision preserves weight positivity"),
            Self::from_homogeneous(degree, &right).expect("subdivision preserves weight positivity"),
        )
    }
}

fn derivative_basis(mu: usize, t: f64, out: &mut [f64]) {
    for v in out.iter_mut().take(mu + 1) {
        *v = 0.0;
    }
    if mu == 0 {
        return;
    }
    let mut lower = [0.0; MAX_EVAL_DEGREE + 1];
    bernstein_all_into(mu - 1, t, &mut lower);
    let m = mu as f64;
    for i in 0..=mu {
        let a = if i > 0 { lower[i - 1] } else { 0.0 };
        let b = if i < mu { lower[i] } else { 0.0 };
        out[i] = m * (a - b);
    }
}

pub(crate) fn de_casteljau_split(net: &[Vector4<f64>], t: f64) -> (Vec<Vector4<f64>>, Vec<Vector4<f64>>) {
    let n = net.len();
    let mut work = net.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = vec![Vector4::zeros(); n];
    left.push(work[0]);
    right[n - 1] = work[n - 1];
    for level in 1..n {
        for j in 0..n - level {
            work[j] = work[j] * (1.0 - t) + work[j + 1] * t;
        }
        left.push(work[0]);
        right[n - 1 - level] = work[n - 1 - level];
    }
    (left, right)
}

pub(crate) fn bbox_diagonal(points: &[Point3<f64>]) -> f64 {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    (hi - lo).norm()
}

/// A rational Bézier curve of degree `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    degree: usize,
    points: Vec<Point3<f64>>,
    weights: Vec<f64>,
}

impl BezierCurve {
    pub fn new(degree: usize, points: Vec<Point3<f64>>, weights: Vec<f64>) -> Result<Self> {
        if degree > MAX_EVAL_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "curve degree {degree} exceeds supported maximum {MAX_EVAL_DEGREE}"
            )));
        }
        if points.len() != degree + 1 || weights.len() != degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} needs {} control points and weights, got {} and {}",
                degree + 1,
                points.len(),
                weights.len()
            )));
        }
        validate_points(&points)?;
        validate_weights(&weights)?;
        Ok(Self { degree, points, weights })
    }

    pub fn polynomial(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("curve needs at least one control point".into()));
        }
        let n = points.len();
        Self::new(n - 1, points, vec![1.0; n])
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn homogeneous_net(&self) -> Vec<Vector4<f64>> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| Vector4::new(w * p.x, w * p.y, w * p.z, *w))
            .collect()
    }

    pub fn eval_homogeneous(&self, theta: f64) -> Vector4<f64> {
        let mut b = [0.0; MAX_EVAL_DEGREE + 1];
        bernstein_all_into(self.degree, theta, &mut b);
        self.homogeneous_net().iter().zip(b.iter()).map(|(h, bi)| h * *bi).sum()
    }

    pub fn eval(&self, theta: f64) -> Result<Point3<f64>> {
        let h = self.eval_homogeneous(theta);
        if h[3].abs() <= BASE_POINT_EPS {
            return Err(Error::BasePoint { theta: [theta, 0.0] });
        }
        Ok(Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
    }

    pub fn diameter(&self) -> f64 {
        bbox_diagonal(&self.points)
    }

    /// The curve viewed as a patch of bi-degree `(mu, 0)`.
    pub fn as_patch(&self) -> RationalBezierPatch {
        RationalBezierPatch {
            degree: [self.degree, 0],
            points: self.points.clone(),
            weights: self.weights.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patch(rng: &mut ChaCha8Rng, degree: [usize; 2]) -> RationalBezierPatch {
        let n = (degree[0] + 1) * (degree[1] + 1);
        let pts = (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let w = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        RationalBezierPatch::new(degree, pts, w).unwrap()
    }

    // Independent oracle: repeated linear interpolation of the homogeneous net,
    // first along theta1 for every row, then along theta2.
    fn de_casteljau_oracle(p: &RationalBezierPatch, theta: [f64; 2]) -> Point3<f64> {
        let [m1, m2] = p.degree();
        let net = p.homogeneous_net();
        let reduce = |mut v: Vec<Vector4<f64>>, t: f64| {
            while v.len() > 1 {
                v = v.windows(2).map(|w| w[0] * (1.0 - t) + w[1] * t).collect();
            }
            v[0]
        };
        let rows: Vec<Vector4<f64>> =
            (0..=m2).map(|i2| reduce((0..=m1).map(|i1| net[i2 * (m1 + 1) + i1]).collect(), theta[0])).collect();
        let h = reduce(rows, theta[1]);
        Point3::from(h.xyz() / h[3])
    }

    #[test]
    fn linear_curve_point() {
        let c = BezierCurve::polynomial(vec![Point3::new(0.0, -1.0, 0.0), Point3::new(1.0, 1.0, 0.0)]).unwrap();
        let x = c.eval(2.0 / 3.0).unwrap();
        assert!((x - Point3::new(2.0 / 3.0, 1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn corner_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_patch(&mut rng, [3, 2]);
        assert!((p.eval([0.0, 0.0]).unwrap() - p.control_point(0, 0)).norm() < 1e-14);
        assert!((p.eval([1.0, 0.0]).unwrap() - p.control_point(3, 0)).norm() < 1e-14);
        assert!((p.eval([1.0, 1.0]).unwrap() - p.control_point(3, 2)).norm() < 1e-14);
    }

    #[test]
    fn matches_de_casteljau() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_patch(&mut rng, [3, 3]);
            let a = p.eval([0.3, 0.7]).unwrap();
            let b = de_casteljau_oracle(&p, [0.3, 0.7]);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let pts = vec![Point3::origin(); 4];
        assert!(RationalBezierPatch::new([1, 1], pts.clone(), vec![1.0, 1.0, 0.0, 1.0]).is_err());
        assert!(RationalBezierPatch::new([1, 2], pts.clone(), vec![1.0; 4]).is_err());
        assert!(RationalBezierPatch::new([11, 0], vec![Point3::origin(); 12], vec![1.0; 12]).is_err());
    }

    #[test]
    fn split_reparameterizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_patch(&mut rng, [3, 3]);
        let (l, r) = p.split(0, 0.5);
        for &v in &[0.0, 0.3, 0.9] {
            let a = p.eval([0.25, v]).unwrap();
            assert!((a - l.eval([0.5, v]).unwrap()).norm() < 1e-13);
            let b = p.eval([0.8, v]).unwrap();
            assert!((b - r.eval([0.6, v]).unwrap()).norm() < 1e-13);
        }
        let (lo, hi) = p.split(1, 0.5);
        let a = p.eval([0.4, 0.75]).unwrap();
        assert!((a - hi.eval([0.4, 0.5]).unwrap()).norm() < 1e-13);
        assert!((p.eval([0.4, 0.1]).unwrap() - lo.eval([0.4, 0.2]).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_patch(&mut rng, [2, 3]);
        let t = [0.41, 0.63];
        let (_, xu, xv) = p.eval_with_derivatives(t).unwrap();
        let h = 1e-6;
        let fd_u = (p.eval([t[0] + h, t[1]]).unwrap() - p.eval([t[0] - h, t[1]]).unwrap()) / (2.0 * h);
        let fd_v = (p.eval([t[0], t[1] + h]).unwrap() - p.eval([t[0], t[1] - h]).unwrap()) / (2.0 * h);
        assert!((xu - fd_u).norm() < 1e-7);
        assert!((xv - fd_v).norm() < 1e-7);
    }
}
