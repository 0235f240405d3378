//! Linear matrix pencils `A - xi B` from implicit representations, and their
//! finite eigenvalues via orthogonal deflation to a square regular pencil.

use faer::complex::Complex;
use nalgebra::{DMatrix, Point3, Vector3};

use crate::error::{Error, Result};
use crate::implicit::{mrep_eval, MRep, RankTolerance};
use crate::linalg::{full_svd, generalized_eigenvalues};

/// Default bound on `|Im| / (1 + |Re|)` for an eigenvalue to count as real.
pub const DEFAULT_IMAG_TOL: f64 = 1e-8;

/// Straight line `r(xi) = c0 + c1 xi` restricted to a parameter interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricLine {
    pub c0: Vector3<f64>,
    pub c1: Vector3<f64>,
    pub domain: [f64; 2],
}

impl ParametricLine {
    pub fn new(c0: Vector3<f64>, c1: Vector3<f64>, domain: [f64; 2]) -> Result<Self> {
        if !(c1.norm() > 0.0) || !c1.iter().chain(c0.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("line direction must be a non-zero finite vector".into()));
        }
        if !(domain[0] <= domain[1]) {
            return Err(Error::InvalidArgument(format!("empty line domain {domain:?}")));
        }
        Ok(Self { c0, c1, domain })
    }

    /// Segment from `a` (xi = 0) to `b` (xi = 1).
    pub fn segment(a: Point3<f64>, b: Point3<f64>) -> Result<Self> {
        Self::new(a.coords, b - a, [0.0, 1.0])
    }

    pub fn eval(&self, xi: f64) -> Point3<f64> {
        Point3::from(self.c0 + self.c1 * xi)
    }

    pub fn endpoints(&self) -> (Point3<f64>, Point3<f64>) {
        (self.eval(self.domain[0]), self.eval(self.domain[1]))
    }
}

/// Quadratic curve `r(xi) = c0 + c1 xi + c2 xi^2` on a parameter interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricQuadratic {
    pub c0: Vector3<f64>,
    pub c1: Vector3<f64>,
    pub c2: Vector3<f64>,
    pub domain: [f64; 2],
}

impl ParametricQuadratic {
    pub fn new(c0: Vector3<f64>, c1: Vector3<f64>, c2: Vector3<f64>, domain: [f64; 2]) -> Result<Self> {
        if c1.norm() == 0.0 && c2.norm() == 0.0 {
            return Err(Error::InvalidArgument("quadratic curve is a single point".into()));
        }
        if !(domain[0] <= domain[1]) {
            return Err(Error::InvalidArgument(format!("empty curve domain {domain:?}")));
        }
        Ok(Self { c0, c1, c2, domain })
    }

    /// Power form of the quadratic Bézier curve with control points `p0, p1, p2` on `[0, 1]`.
    pub fn from_bezier(p0: Point3<f64>, p1: Point3<f64>, p2: Point3<f64>) -> Result<Self> {
        Self::new(p0.coords, 2.0 * (p1 - p0), p0.coords - 2.0 * p1.coords + p2.coords, [0.0, 1.0])
    }

    pub fn eval(&self, xi: f64) -> Point3<f64> {
        Point3::from(self.c0 + self.c1 * xi + self.c2 * (xi * xi))
    }

    /// Upper bound on the speed `|r'(xi)|` over the domain.
    pub fn max_speed(&self) -> f64 {
        self.domain.iter().map(|&t| (self.c1 + 2.0 * t * self.c2).norm()).fold(0.0, f64::max)
    }
}

/// The pencil `A - xi B`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPencil {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl MatrixPencil {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::InvalidArgument(format!("pencil shapes differ: {:?} vs {:?}", a.shape(), b.shape())));
        }
        Ok(Self { a, b })
    }

    pub fn eval(&self, xi: f64) -> DMatrix<f64> {
        &self.a - &self.b * xi
    }
}

/// `M(r(xi)) = A - xi B`, exact because `M` is affine in `x`.
pub fn pencil_from_line(m: &MRep, line: &ParametricLine) -> MatrixPencil {
    let p0 = Point3::from(line.c0);
    let a = mrep_eval(m, &p0);
    let b = -(mrep_eval(m, &(p0 + line.c1)) - &a);
    MatrixPencil { a, b }
}

/// Companion linearization of `M(r(xi)) = M0 + M1 xi + M2 xi^2`:
/// `[[0, I], [M0, M1]] - xi [[I, 0], [0, -M2]]`.
pub fn pencil_from_quadratic(m: &MRep, q: &ParametricQuadratic) -> MatrixPencil {
    let p0 = Point3::from(q.c0);
    let m0 = mrep_eval(m, &p0);
    let m1 = mrep_eval(m, &(p0 + q.c1)) - &m0;
    let m2 = mrep_eval(m, &(p0 + q.c2)) - &m0;
    let (r, c) = m0.shape();
    let mut a = DMatrix::zeros(c + r, 2 * c);
    let mut b = DMatrix::zeros(c + r, 2 * c);
    a.view_mut((0, c), (c, c)).fill_with_identity();
    a.view_mut((c, 0), (r, c)).copy_from(&m0);
    a.view_mut((c, c), (r, c)).copy_from(&m1);
    b.view_mut((0, 0), (c, c)).fill_with_identity();
    b.view_mut((c, c), (r, c)).copy_from(&(-m2));
    MatrixPencil { a, b }
}

/// Rank of a matrix inside the deflation: singular values at roundoff level
/// relative to the pencil scale are zeros, then the ratio rule applies.
fn deflation_rank(s: &[f64], floor: f64, eps: f64) -> usize {
    let mut r = 0;
    while r < s.len() && s[r] > floor {
        if r > 0 && s[r] / s[r - 1] < eps {
            break;
        }
        r += 1;
    }
    r
}

/// Deflates `p` with orthogonal transformations until it is square with a
/// nonsingular `B`, preserving the finite eigenvalues.
pub fn reduce_pencil(p: &MatrixPencil, tol: RankTolerance) -> Result<MatrixPencil> {
    let scale = p.a.norm().max(p.b.norm());
    let mut a = p.a.clone();
    let mut b = p.b.clone();
    if scale == 0.0 {
        return Ok(MatrixPencil { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, 0) });
    }
    let max_steps = a.nrows() + a.ncols() + 2;
    for _ in 0..max_steps {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Ok(MatrixPencil { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, 0) });
        }
        if m > n {
            a = a.transpose();
            b = b.transpose();
            continue;
        }
        let floor = scale * (m.max(n) as f64) * 64.0 * f64::EPSILON;
        let sb = full_svd(&b)?;
        let rb = deflation_rank(&sb.s, floor, tol.epsilon());
        if rb == n {
            // m == n here since rb <= m <= n
            return Ok(MatrixPencil { a, b });
        }
        let av = &a * &sb.v;
        let bv = &b * &sb.v;
        let a12 = av.columns(rb, n - rb).into_owned();
        let sa = full_svd(&a12)?;
        let ra = deflation_rank(&sa.s, floor, tol.epsilon());
        let ut = sa.u.transpose();
        let a_new = (&ut * av.columns(0, rb)).rows(ra, m - ra).into_owned();
        let b_new = (&ut * bv.columns(0, rb)).rows(ra, m - ra).into_owned();
        a = a_new;
        b = b_new;
    }
    Err(Error::NumericalFailure("pencil deflation did not terminate".into()))
}

/// All finite eigenvalues of the pencil, real and complex.
pub fn pencil_eigenvalues(p: &MatrixPencil, tol: RankTolerance) -> Result<Vec<Complex<f64>>> {
    let red = reduce_pencil(p, tol)?;
    let ev = generalized_eigenvalues(&red.a, &red.b)?;
    Ok(ev
        .into_iter()
        .filter(|e| e.beta.norm() > 1e-14 * e.alpha.norm().max(1e-300))
        .map(|e| e.value())
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .collect())
}

/// Finite real eigenvalues in ascending order.
pub fn pencil_real_eigenvalues(p: &MatrixPencil, tol: RankTolerance) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = pencil_eigenvalues(p, tol)?
        .into_iter()
        .filter(|z| z.im.abs() <= DEFAULT_IMAG_TOL * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// A real root of `det(A - xi B)`, possibly standing for a cluster of
/// coincident (tangential) eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub xi: f64,
    pub multiplicity: usize,
}

/// Groups eigenvalues into real roots.
///
/// Eigenvalues with `|Im| <= tangent_tol (1 + |Re|)` whose real parts lie
/// within `tangent_tol (1 + |Re|)` of each other form one cluster. A cluster
/// is kept if it holds an eigenvalue that is real to `imag_tol`, or if it is
/// a near-real conjugate pair (a tangency perturbed off the real axis).
pub fn cluster_real_roots(values: &[Complex<f64>], imag_tol: f64, tangent_tol: f64) -> Vec<RealRoot> {
    let mut cand: Vec<Complex<f64>> =
        values.iter().copied().filter(|z| z.im.abs() <= tangent_tol * (1.0 + z.re.abs())).collect();
    cand.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut out = Vec::new();
    let mut i = 0;
    while i < cand.len() {
        let mut j = i + 1;
        while j < cand.len() && cand[j].re - cand[j - 1].re <= tangent_tol * (1.0 + cand[j].re.abs()) {
            j += 1;
        }
        let group = &cand[i..j];
        let has_real = group.iter().any(|z| z.im.abs() <= imag_tol * (1.0 + z.re.abs()));
        if has_real || group.len() >= 2 {
            let xi = group.iter().map(|z| z.re).sum::<f64>() / group.len() as f64;
            out.push(RealRoot { xi, multiplicity: group.len() });
        }
        i = j;
    }
    out
}
