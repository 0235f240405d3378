//! Dense linear algebra helpers: full SVD, numerical rank and the QZ generalized
//! eigenvalue problem, bridged from nalgebra matrices to faer.

use faer::complex::Complex;
use faer::Mat;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default ratio threshold for numerical rank decisions.
pub const DEFAULT_RANK_EPSILON: f64 = 1e-6;

pub(crate) fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full singular value decomposition `A = U diag(s) V^T` with square `U` and `V`.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: DMatrix<f64>,
    /// Singular values in decreasing order, `min(rows, cols)` of them.
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn full_svd(a: &DMatrix<f64>) -> Result<FullSvd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(FullSvd { u: DMatrix::identity(m, m), s: Vec::new(), v: DMatrix::identity(n, n) });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    let svd = to_faer(a).svd().map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    Ok(FullSvd { u: from_faer(svd.U()), s, v: from_faer(svd.V()) })
}

/// Singular values only, in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    to_faer(a).singular_values().map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))
}

/// Numerical rank from sorted singular values.
///
/// The rank is the first `k` with `s[k] / s[k-1] < eps`. Values below
/// `s[0] * dim * 4 * f64::EPSILON` count as exact zeros, which also makes the
/// zero matrix rank 0.
pub fn numerical_rank(s: &[f64], dim: usize, eps: f64) -> usize {
    let Some(&top) = s.first() else { return 0 };
    if !(top > 0.0) {
        return 0;
    }
    let floor = top * dim.max(1) as f64 * 4.0 * f64::EPSILON;
    for k in 1..s.len() {
        if s[k] <= floor || s[k] / s[k - 1] < eps {
            return k;
        }
    }
    s.len()
}

/// Finite eigenvalue of a generalized pair, stored as `alpha / beta`.
#[derive(Debug, Clone, Copy)]
pub struct GenEigenvalue {
    pub alpha: Complex<f64>,
    pub beta: Complex<f64>,
}

impl GenEigenvalue {
    pub fn value(&self) -> Complex<f64> {
        self.alpha / self.beta
    }
}

/// All generalized eigenvalue pairs of the square pencil `A - xi B` (QZ).
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<GenEigenvalue>> {
    assert_eq!(a.shape(), b.shape());
    assert_eq!(a.nrows(), a.ncols());
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("pencil has non-finite entries".into()));
    }
    use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
    use faer::linalg::evd::ComputeEigenvectors;
    use faer::linalg::gevd;
    let n = a.nrows();
    let mut fa = to_faer(a);
    let mut fb = to_faer(b);
    let mut s_re = faer::diag::Diag::<f64>::zeros(n);
    let mut s_im = faer::diag::Diag::<f64>::zeros(n);
    let mut beta = faer::diag::Diag::<f64>::zeros(n);
    let par = faer::Par::Seq;
    // Extra room on top of the reported requirement; the reported layout has
    // been observed to be too small for tiny pencils.
    let req = gevd::gevd_scratch::<f64>(n, ComputeEigenvectors::No, ComputeEigenvectors::No, par, Default::default())
        .and(StackReq::new::<f64>(8 * n * n + 64));
    let mut buf = MemBuffer::new(req);
    gevd::gevd_real(
        fa.as_mut(),
        fb.as_mut(),
        s_re.as_mut(),
        s_im.as_mut(),
        beta.as_mut(),
        None,
        None,
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::NumericalFailure(format!("QZ did not converge: {e:?}")))?;
    let (re, im, be) = (s_re.column_vector(), s_im.column_vector(), beta.column_vector());
    Ok((0..n).map(|i| GenEigenvalue { alpha: Complex::new(re[i], im[i]), beta: Complex::new(be[i], 0.0) }).collect())
}

/// Eigenvalues and (complex) eigenvectors of a real square matrix.
pub fn eigen(a: &DMatrix<f64>) -> Result<(Vec<Complex<f64>>, Vec<Vec<Complex<f64>>>)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    let e = to_faer(a).eigen().map_err(|e| Error::NumericalFailure(format!("eigensolver failed: {e:?}")))?;
    let vals: Vec<Complex<f64>> = e.S().column_vector().iter().copied().collect();
    let u = e.U();
    let vecs = (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

/// Minimum-norm least-squares solution of `A X = B`.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(b, top * 1e-12).map_err(|e| Error::NumericalFailure(e.to_string()))
}
