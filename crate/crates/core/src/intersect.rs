//! Curve/patch intersection through the implicit matrix representation.
//!
//! The curve is substituted into `M(x)`, the real eigenvalues of the resulting
//! pencil give the curve parameters `xi*`, and the patch parameters `theta*`
//! are read off the left null space of `M(x*)`.

use nalgebra::{DMatrix, DVector, Point3, Vector4};
use serde::{Deserialize, Serialize};

use crate::bernstein::{bernstein_all, binomial};
use crate::error::{Error, Result};
use crate::implicit::{build_curve_mrep, build_mrep_default, mrep_eval, MRep, RankTolerance};
use crate::linalg::{eigen, full_svd, lstsq, numerical_rank};
use crate::patch::{BezierCurve, RationalBezierPatch};
use crate::pencil::{
    cluster_real_roots, pencil_eigenvalues, pencil_from_line, pencil_from_quadratic, ParametricLine,
    ParametricQuadratic, RealRoot, DEFAULT_IMAG_TOL,
};

/// Tolerances used by the intersection pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectTolerances {
    pub rank: RankTolerance,
    /// `|Im| <= imag_tol (1 + |Re|)` counts as a real eigenvalue.
    pub imag_tol: f64,
    /// Radius for grouping near-real eigenvalues into one tangential root.
    pub tangent_tol: f64,
    /// Records closer than this in `xi` (relative) are merged.
    pub dedup_tol: f64,
    /// Slack on the parameter domains.
    pub domain_tol: f64,
    /// Allowed `|f(theta*) - r(xi*)|` relative to the patch diameter.
    pub round_trip_tol: f64,
}

impl Default for IntersectTolerances {
    fn default() -> Self {
        Self {
            rank: RankTolerance::default(),
            imag_tol: DEFAULT_IMAG_TOL,
            tangent_tol: 1e-6,
            dedup_tol: 1e-8,
            domain_tol: 1e-9,
            round_trip_tol: 1e-7,
        }
    }
}

/// One intersection point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRecord {
    pub xi: f64,
    /// Patch parameters; for curves the second entry is 0.
    pub theta: [f64; 2],
    pub point: [f64; 3],
    pub patch_id: usize,
    /// Number of eigenvalues merged into this root (2 or more flags a tangency).
    pub multiplicity_hint: usize,
    pub self_intersection: bool,
}

impl IntersectionRecord {
    pub fn point(&self) -> Point3<f64> {
        Point3::from(self.point)
    }
}

/// Bernstein basis values are only recoverable up to these scale factors.
fn scaled_coefficients(aux: [usize; 2], v: &[f64]) -> Vec<f64> {
    let [n1, n2] = aux;
    let mut out = v.to_vec();
    for j2 in 0..=n2 {
        for j1 in 0..=n1 {
            out[j2 * (n1 + 1) + j1] /= binomial(n1, j1) * binomial(n2, j2);
        }
    }
    out
}

/// Adjacent index pairs `(j, j + e_d)` of the auxiliary grid.
fn adjacent_pairs(aux: [usize; 2], d: usize) -> Vec<(usize, usize)> {
    let [n1, n2] = aux;
    let mut out = Vec::new();
    for j2 in 0..=n2 {
        for j1 in 0..=n1 {
            let (k1, k2) = if d == 0 { (j1 + 1, j2) } else { (j1, j2 + 1) };
            if k1 <= n1 && k2 <= n2 {
                out.push((j2 * (n1 + 1) + j1, k2 * (n1 + 1) + k1));
            }
        }
    }
    out
}

/// Solves a degree-one direction from the control net: with the other
/// parameter fixed, `f(t) = (1 - t) F0 + t F1` and `f(t) ~ (x, 1)` is linear in `t`.
fn linear_direction(m: &MRep, x: &Point3<f64>, d: usize, other: f64) -> f64 {
    let [m1, m2] = m.source_degree();
    let net = m.normalized_net();
    let ends: Vec<Vector4<f64>> = (0..=1)
        .map(|e| {
            if d == 0 {
                let b = bernstein_all(m2, other);
                (0..=m2).map(|i2| net[i2 * (m1 + 1) + e] * b[i2]).sum()
            } else {
                let b = bernstein_all(m1, other);
                (0..=m1).map(|i1| net[e * (m1 + 1) + i1] * b[i1]).sum()
            }
        })
        .collect();
    let xn = m.to_normalized(x);
    let resid = |h: Vector4<f64>| h.xyz() - xn.coords * h[3];
    let a = resid(ends[0]);
    let b = resid(ends[1] - ends[0]);
    let bb = b.norm_squared();
    if bb == 0.0 {
        0.0
    } else {
        -a.dot(&b) / bb
    }
}

/// Parameters from one vector proportional to the auxiliary basis values.
fn theta_from_vector(m: &MRep, x: &Point3<f64>, v: &[f64]) -> Result<[f64; 2]> {
    let aux = m.aux().degree;
    let source = m.source_degree();
    let s = scaled_coefficients(aux, v);
    let top = s.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut theta = [f64::NAN; 2];
    let dims = if source[1] == 0 { 1 } else { 2 };
    if dims == 1 {
        theta[1] = 0.0;
    }
    for (d, t) in theta.iter_mut().enumerate().take(dims) {
        if aux[d] == 0 {
            continue;
        }
        let best = adjacent_pairs(aux, d)
            .into_iter()
            .max_by(|a, b| (s[a.0].abs() + s[a.1].abs()).total_cmp(&(s[b.0].abs() + s[b.1].abs())))
            .expect("degree >= 1 has adjacent pairs");
        let den = s[best.0] + s[best.1];
        if !(den.abs() > 1e-12 * top) {
            return Err(Error::DegenerateParameterization(format!(
                "no usable basis ratio in direction {d}"
            )));
        }
        *t = s[best.1] / den;
    }
    for d in 0..dims {
        if theta[d].is_nan() {
            if source[d] != 1 {
                return Err(Error::DegenerateParameterization(format!(
                    "auxiliary degree 0 in direction {d} with source degree {}",
                    source[d]
                )));
            }
            let other = if dims == 1 { 0.0 } else { theta[1 - d] };
            if other.is_nan() {
                return Err(Error::DegenerateParameterization("no direction carries parameter information".into()));
            }
            theta[d] = linear_direction(m, x, d, other);
        }
    }
    Ok(theta)
}

/// Parameters from a basis of the left null space (one column per vector).
///
/// With several null vectors each preimage's basis vector lies in their
/// span; the shift structure `b_{j+e} = theta (b_j + b_{j+e})` turns this into
/// a small eigenvalue problem whose eigenvectors separate the preimages.
fn thetas_from_null_basis(m: &MRep, x: &Point3<f64>, n: &DMatrix<f64>) -> Result<Vec<[f64; 2]>> {
    let k = n.ncols();
    if k == 1 {
        return Ok(vec![theta_from_vector(m, x, n.column(0).as_slice())?]);
    }
    let aux = m.aux().degree;
    let dims = if m.source_degree()[1] == 0 { 1 } else { 2 };
    let cols: Vec<Vec<f64>> = (0..k).map(|c| scaled_coefficients(aux, n.column(c).as_slice())).collect();
    let mut t = DMatrix::<f64>::zeros(k, k);
    let mut used = false;
    for (d, weight) in [(0usize, 1.0), (1usize, 0.6180339887)].into_iter().take(dims) {
        let pairs = adjacent_pairs(aux, d);
        if pairs.is_empty() {
            continue;
        }
        let low = DMatrix::from_fn(pairs.len(), k, |r, c| cols[c][pairs[r].1]);
        let up = DMatrix::from_fn(pairs.len(), k, |r, c| cols[c][pairs[r].0] + cols[c][pairs[r].1]);
        t += lstsq(&up, &low)? * weight;
        used = true;
    }
    if !used {
        return Err(Error::DegenerateParameterization("multiple null vectors and no shift structure".into()));
    }
    let (vals, vecs) = eigen(&t)?;
    let mut out = Vec::new();
    for (val, c) in vals.iter().zip(&vecs) {
        if val.im.abs() > 1e-6 * (1.0 + val.re.abs()) {
            continue;
        }
        // Rotate the complex eigenvector so it is (nearly) real.
        let piv = c.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        let coeff = DVector::from_iterator(k, c.iter().map(|z| (*z / piv).re));
        let b = n * coeff;
        if let Ok(th) = theta_from_vector(m, x, b.as_slice()) {
            out.push(th);
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateParameterization("no real preimage found".into()));
    }
    Ok(out)
}

/// Left null space of `M(x)`; with `strict`, a missing rank drop is an error,
/// otherwise at least the last left singular vector is returned.
fn left_null(m: &MRep, x: &Point3<f64>, tol: RankTolerance, strict: bool) -> Result<DMatrix<f64>> {
    let mx = mrep_eval(m, x);
    let (rows, cols) = mx.shape();
    let svd = full_svd(&mx)?;
    let r = numerical_rank(&svd.s, rows.max(cols), tol.epsilon());
    if r >= rows.min(cols) {
        if strict {
            return Err(Error::NotOnSurface);
        }
        return Ok(svd.u.columns(rows - 1, 1).into_owned());
    }
    Ok(svd.u.columns(r, rows - r).into_owned())
}

/// Parameters of the preimages of a point on the surface. Several values
/// indicate a self intersection.
pub fn param_from_point(m: &MRep, x_star: &Point3<f64>, tol: RankTolerance) -> Result<Vec<[f64; 2]>> {
    let n = left_null(m, x_star, tol, true)?;
    thetas_from_null_basis(m, x_star, &n)
}

fn in_unit(t: f64, tol: f64) -> bool {
    t >= -tol && t <= 1.0 + tol
}

/// Turns pencil roots into validated records.
#[allow(clippy::too_many_arguments)]
fn records_from_roots(
    m: &MRep,
    roots: &[RealRoot],
    curve: &dyn Fn(f64) -> Point3<f64>,
    surface: &dyn Fn([f64; 2]) -> Result<Point3<f64>>,
    domain: [f64; 2],
    diameter: f64,
    curve_dims: usize,
    patch_id: usize,
    tols: &IntersectTolerances,
) -> Result<Vec<IntersectionRecord>> {
    let mut out: Vec<IntersectionRecord> = Vec::new();
    let xi_slack = tols.domain_tol * (1.0 + domain[0].abs().max(domain[1].abs()));
    for root in roots {
        if root.xi < domain[0] - xi_slack || root.xi > domain[1] + xi_slack {
            continue;
        }
        let xi = root.xi.clamp(domain[0], domain[1]);
        let x = curve(xi);
        let null = left_null(m, &x, tols.rank, false)?;
        let thetas = match thetas_from_null_basis(m, &x, &null) {
            Ok(t) => t,
            Err(Error::DegenerateParameterization(msg)) => {
                log::debug!("patch {patch_id}: skipping root {xi}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let slack = if root.multiplicity > 1 { 1e3 } else { 1.0 };
        let mut valid: Vec<[f64; 2]> = Vec::new();
        for th in thetas {
            if !(0..curve_dims).all(|d| in_unit(th[d], tols.domain_tol)) {
                continue;
            }
            let th = [th[0].clamp(0.0, 1.0), th[1].clamp(0.0, 1.0)];
            let Ok(p) = surface(th) else { continue };
            if (p - x).norm() > tols.round_trip_tol * slack * diameter.max(f64::MIN_POSITIVE) {
                continue;
            }
            if !valid.iter().any(|v| (v[0] - th[0]).abs() + (v[1] - th[1]).abs() < 1e-6) {
                valid.push(th);
            }
        }
        let self_intersection = valid.len() > 1;
        for th in valid {
            out.push(IntersectionRecord {
                xi,
                theta: th,
                point: [x.x, x.y, x.z],
                patch_id,
                multiplicity_hint: root.multiplicity,
                self_intersection,
            });
        }
    }
    out.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    // Distinct roots that collapsed onto the same parameter after clamping.
    out.dedup_by(|b, a| {
        (a.xi - b.xi).abs() <= tols.dedup_tol * (1.0 + a.xi.abs())
            && (a.theta[0] - b.theta[0]).abs() + (a.theta[1] - b.theta[1]).abs() < 1e-6
    });
    Ok(out)
}

/// Intersections of a line with a patch whose representation is already built.
pub fn intersect_patch_line_with(
    patch: &RationalBezierPatch,
    m: &MRep,
    patch_id: usize,
    line: &ParametricLine,
    tols: &IntersectTolerances,
) -> Result<Vec<IntersectionRecord>> {
    let pencil = pencil_from_line(m, line);
    let ev = pencil_eigenvalues(&pencil, tols.rank).map_err(|e| tag_error(e, patch_id))?;
    let roots = cluster_real_roots(&ev, tols.imag_tol, tols.tangent_tol);
    records_from_roots(
        m,
        &roots,
        &|xi| line.eval(xi),
        &|th| patch.eval(th),
        line.domain,
        patch.diameter(),
        2,
        patch_id,
        tols,
    )
}

/// Intersections of a line with a patch.
pub fn intersect_patch_line(
    patch: &RationalBezierPatch,
    line: &ParametricLine,
    tols: &IntersectTolerances,
) -> Result<Vec<IntersectionRecord>> {
    let m = build_mrep_default(patch)?;
    intersect_patch_line_with(patch, &m, 0, line, tols)
}

/// Intersections of a quadratic curve with a patch (companion linearization).
pub fn intersect_patch_quadratic_with(
    patch: &RationalBezierPatch,
    m: &MRep,
    patch_id: usize,
    q: &ParametricQuadratic,
    tols: &IntersectTolerances,
) -> Result<Vec<IntersectionRecord>> {
    let pencil = pencil_from_quadratic(m, q);
    let ev = pencil_eigenvalues(&pencil, tols.rank).map_err(|e| tag_error(e, patch_id))?;
    let roots = cluster_real_roots(&ev, tols.imag_tol, tols.tangent_tol);
    records_from_roots(m, &roots, &|xi| q.eval(xi), &|th| patch.eval(th), q.domain, patch.diameter(), 2, patch_id, tols)
}

pub fn intersect_patch_quadratic(
    patch: &RationalBezierPatch,
    q: &ParametricQuadratic,
    tols: &IntersectTolerances,
) -> Result<Vec<IntersectionRecord>> {
    let m = build_mrep_default(patch)?;
    intersect_patch_quadratic_with(patch, &m, 0, q, tols)
}

/// Intersections of a line with a Bézier curve, using an auxiliary basis of
/// degree `aux_degree` (default: curve degree minus one).
pub fn intersect_curve_line(
    curve: &BezierCurve,
    line: &ParametricLine,
    aux_degree: Option<usize>,
    tols: &IntersectTolerances,
) -> Result<Vec<IntersectionRecord>> {
    if !(1..=4).contains(&curve.degree()) {
        return Err(Error::InvalidArgument(format!("curve degree {} outside 1..=4", curve.degree())));
    }
    let aux = aux_degree.unwrap_or(curve.degree() - 1);
    let m = build_curve_mrep(curve, aux, tols.rank)?;
    let pencil = pencil_from_line(&m, line);
    let ev = pencil_eigenvalues(&pencil, tols.rank)?;
    let roots = cluster_real_roots(&ev, tols.imag_tol, tols.tangent_tol);
    records_from_roots(
        &m,
        &roots,
        &|xi| line.eval(xi),
        &|th| curve.eval(th[0]),
        line.domain,
        curve.diameter(),
        1,
        0,
        tols,
    )
}

fn tag_error(e: Error, patch_id: usize) -> Error {
    match e {
        Error::NumericalFailure(msg) => Error::NumericalFailure(format!("patch {patch_id}: {msg}")),
        other => other,
    }
}
