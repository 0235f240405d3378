//! Matrix-based implicitisation of rational Bézier patches and curves.
//!
//! For a homogeneous patch `f(theta)` we look for auxiliary polynomial vectors
//! `g(theta) = sum_j B_j(theta) gamma_j` with `f . g == 0` identically. Expanding
//! the products in the Bernstein basis of the summed degree gives a linear
//! system `C gamma = 0`; its null vectors `gamma^(i)` define the columns
//! `M_j^(i)(x) = gamma_j^(i) . (x, 1)` of the implicit matrix `M(x)`, whose
//! rank drops exactly on the surface.

use nalgebra::{DMatrix, DVector, Point3, Vector4};

use crate::bernstein::binomial;
use crate::error::{Error, Result};
use crate::linalg::{full_svd, numerical_rank, singular_values, DEFAULT_RANK_EPSILON};
use crate::patch::{BezierCurve, RationalBezierPatch};

/// Largest source degree accepted for implicitisation.
pub const MAX_IMPLICIT_DEGREE: usize = 4;

/// Threshold on consecutive singular value ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    epsilon: f64,
}

impl RankTolerance {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("rank tolerance must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self { epsilon: DEFAULT_RANK_EPSILON }
    }
}

/// Bi-degree of the auxiliary polynomial basis. Curves use `[d, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxBasisSpec {
    pub degree: [usize; 2],
}

impl AuxBasisSpec {
    /// Smallest degree giving a matrix representation: `(2p-1, p-1)` for a
    /// `(p, p)` patch and `d-1` for a degree `d` curve (patch degree `[d, 0]`).
    pub fn minimal(source: [usize; 2]) -> Result<Self> {
        check_source_degree(source)?;
        let [p, q] = source;
        if q == 0 {
            Ok(Self { degree: [p - 1, 0] })
        } else {
            Ok(Self { degree: [2 * p - 1, p - 1] })
        }
    }

    /// Number of auxiliary basis functions (rows of `M`).
    pub fn size(&self) -> usize {
        (self.degree[0] + 1) * (self.degree[1] + 1)
    }

    fn validate_for(&self, source: [usize; 2]) -> Result<()> {
        let min = Self::minimal(source)?.degree;
        let ok = (self.degree[0] >= min[0] && self.degree[1] >= min[1])
            || (source[1] != 0 && self.degree[0] >= min[1] && self.degree[1] >= min[0]);
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "auxiliary degree {:?} is below the minimum {:?} for source degree {:?}",
                self.degree, min, source
            )));
        }
        if source[1] == 0 && self.degree[1] != 0 {
            return Err(Error::InvalidArgument("curves need an auxiliary degree of the form [d, 0]".into()));
        }
        Ok(())
    }
}

fn check_source_degree(source: [usize; 2]) -> Result<()> {
    let [p, q] = source;
    let curve = q == 0 && (1..=MAX_IMPLICIT_DEGREE + 2).contains(&p);
    let surface = p == q && (1..=MAX_IMPLICIT_DEGREE).contains(&p);
    if curve || surface {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "implicitisation supports bi-degree (p, p) with 1 <= p <= {MAX_IMPLICIT_DEGREE} or curves, got {source:?}"
        )))
    }
}

/// Assembles the coefficient matrix `C` from a homogeneous control net.
///
/// Row `k` is the flat index of the product basis function (first direction
/// fastest); column `4 j + c` holds component `c` of auxiliary coefficient `j`.
pub fn assemble_c_from_net(source: [usize; 2], net: &[Vector4<f64>], aux: AuxBasisSpec) -> DMatrix<f64> {
    let [m1, m2] = source;
    let [n1, n2] = aux.degree;
    let rows1 = m1 + n1 + 1;
    let rows = rows1 * (m2 + n2 + 1);
    let cols = 4 * aux.size();
    let mut c = DMatrix::zeros(rows, cols);
    for i2 in 0..=m2 {
        for i1 in 0..=m1 {
            let f = net[i2 * (m1 + 1) + i1];
            for j2 in 0..=n2 {
                for j1 in 0..=n1 {
                    let coeff = binomial(m1, i1) * binomial(n1, j1) / binomial(m1 + n1, i1 + j1)
                        * binomial(m2, i2)
                        * binomial(n2, j2)
                        / binomial(m2 + n2, i2 + j2);
                    let k = (i2 + j2) * rows1 + i1 + j1;
                    let jf = j2 * (n1 + 1) + j1;
                    for comp in 0..4 {
                        c[(k, 4 * jf + comp)] += coeff * f[comp];
                    }
                }
            }
        }
    }
    c
}

/// Coefficient matrix of a patch for the given auxiliary basis.
pub fn assemble_c(patch: &RationalBezierPatch, aux: AuxBasisSpec) -> Result<DMatrix<f64>> {
    aux.validate_for(patch.degree())?;
    Ok(assemble_c_from_net(patch.degree(), &patch.homogeneous_net(), aux))
}

/// Orthonormal basis of the numerical null space of `c`, one vector per column.
///
/// Rows are scaled to unit max-norm first, which leaves the exact null space
/// unchanged.
pub fn null_space(c: &DMatrix<f64>, tol: RankTolerance) -> Result<DMatrix<f64>> {
    let (m, n) = c.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("null space of an empty matrix".into()));
    }
    let mut scaled = c.clone();
    for mut row in scaled.row_iter_mut() {
        let s = row.amax();
        if s > 0.0 {
            row /= s;
        }
    }
    let svd = full_svd(&scaled)?;
    let rank = numerical_rank(&svd.s, m.max(n), tol.epsilon());
    Ok(svd.v.columns(rank, n - rank).into_owned())
}

/// Implicit matrix representation of a patch or curve.
///
/// The null vectors are computed for a copy of the control net translated to
/// its centroid and scaled to unit radius; [`mrep_eval`] applies the same map
/// to its argument. This changes `M(x)` only by an invertible column
/// transformation.
#[derive(Debug, Clone)]
pub struct MRep {
    source_degree: [usize; 2],
    aux: AuxBasisSpec,
    /// Null vectors as columns, `4 * aux.size()` rows.
    gamma: DMatrix<f64>,
    tol: RankTolerance,
    center: Point3<f64>,
    scale: f64,
    /// Normalized homogeneous control net.
    net: Vec<Vector4<f64>>,
}

impl MRep {
    pub fn source_degree(&self) -> [usize; 2] {
        self.source_degree
    }

    pub fn aux(&self) -> AuxBasisSpec {
        self.aux
    }

    pub fn tolerance(&self) -> RankTolerance {
        self.tol
    }

    /// Null vectors (columns) in normalized coordinates.
    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn num_gamma(&self) -> usize {
        self.gamma.ncols()
    }

    /// Centre and scale of the coordinate normalization `x' = (x - center) / scale`.
    pub fn normalization(&self) -> (Point3<f64>, f64) {
        (self.center, self.scale)
    }

    /// Null vectors expressed for the original (unnormalized) coordinates.
    ///
    /// These span the null space of the coefficient matrix of the input
    /// patch, but are not orthonormal.
    pub fn gamma_world(&self) -> DMatrix<f64> {
        let mut out = self.gamma.clone();
        let (c, s) = (self.center, self.scale);
        for mut col in out.column_iter_mut() {
            for j in 0..self.aux.size() {
                let g = Vector4::new(col[4 * j], col[4 * j + 1], col[4 * j + 2], col[4 * j + 3]);
                // g . ((x - c)/s, 1) rewritten as g' . (x, 1)
                let lin = g.xyz() / s;
                let w = g[3] - lin.dot(&c.coords);
                col[4 * j] = lin.x;
                col[4 * j + 1] = lin.y;
                col[4 * j + 2] = lin.z;
                col[4 * j + 3] = w;
            }
        }
        out
    }

    /// Homogeneous control net in normalized coordinates.
    pub fn normalized_net(&self) -> &[Vector4<f64>] {
        &self.net
    }

    /// Maps a world point to normalized coordinates.
    pub fn to_normalized(&self, x: &Point3<f64>) -> Point3<f64> {
        Point3::from((x - self.center) / self.scale)
    }

    fn normalize(&self, x: &Point3<f64>) -> Vector4<f64> {
        let v = (x - self.center) / self.scale;
        Vector4::new(v.x, v.y, v.z, 1.0)
    }
}

fn normalized_net(net: &[Vector4<f64>]) -> (Vec<Vector4<f64>>, Point3<f64>, f64) {
    let pts: Vec<Point3<f64>> = net.iter().map(|h| Point3::from(h.xyz() / h[3])).collect();
    let center = Point3::from(pts.iter().map(|p| p.coords).sum::<nalgebra::Vector3<f64>>() / pts.len() as f64);
    let scale = pts.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let out = net
        .iter()
        .map(|h| {
            let w = h[3];
            let x = (Point3::from(h.xyz() / w) - center) / scale;
            Vector4::new(w * x.x, w * x.y, w * x.z, w)
        })
        .collect();
    (out, center, scale)
}

fn build_from_net(source: [usize; 2], net: &[Vector4<f64>], aux: AuxBasisSpec, tol: RankTolerance) -> Result<MRep> {
    aux.validate_for(source)?;
    let (scaled, center, scale) = normalized_net(net);
    let c = assemble_c_from_net(source, &scaled, aux);
    let gamma = null_space(&c, tol)?;
    Ok(MRep { source_degree: source, aux, gamma, tol, center, scale, net: scaled })
}

/// Implicit representation of a patch.
pub fn build_mrep(patch: &RationalBezierPatch, aux: AuxBasisSpec, tol: RankTolerance) -> Result<MRep> {
    build_from_net(patch.degree(), &patch.homogeneous_net(), aux, tol)
}

/// Implicit representation of a patch with the minimal auxiliary degree.
pub fn build_mrep_default(patch: &RationalBezierPatch) -> Result<MRep> {
    build_mrep(patch, AuxBasisSpec::minimal(patch.degree())?, RankTolerance::default())
}

/// Implicit representation of a space curve (auxiliary degree `[d, 0]`).
pub fn build_curve_mrep(curve: &BezierCurve, aux_degree: usize, tol: RankTolerance) -> Result<MRep> {
    build_from_net([curve.degree(), 0], &curve.homogeneous_net(), AuxBasisSpec { degree: [aux_degree, 0] }, tol)
}

/// Evaluates `M(x)`: one row per auxiliary basis function, one column per null vector.
pub fn mrep_eval(m: &MRep, x: &Point3<f64>) -> DMatrix<f64> {
    let xh = m.normalize(x);
    let rows = m.aux.size();
    DMatrix::from_fn(rows, m.gamma.ncols(), |j, i| {
        let g = m.gamma.column(i);
        g[4 * j] * xh[0] + g[4 * j + 1] * xh[1] + g[4 * j + 2] * xh[2] + g[4 * j + 3]
    })
}

/// True if the numerical rank of `m` is below `min(rows, cols)`.
pub fn rank_drop_test(m: &DMatrix<f64>, tol: RankTolerance) -> Result<bool> {
    let full = m.nrows().min(m.ncols());
    if full == 0 {
        return Ok(false);
    }
    let s = singular_values(m)?;
    Ok(numerical_rank(&s, m.nrows().max(m.ncols()), tol.epsilon()) < full)
}

/// Values of the auxiliary vectors `g^(i)(theta)` for the normalized net,
/// one column per null vector. Mainly useful for checking `f . g == 0`.
pub fn aux_vectors(m: &MRep, theta: [f64; 2]) -> DMatrix<f64> {
    let [n1, n2] = m.aux.degree;
    let b1 = crate::bernstein::bernstein_all(n1, theta[0]);
    let b2 = crate::bernstein::bernstein_all(n2, theta[1]);
    let mut out = DMatrix::zeros(4, m.gamma.ncols());
    for (i, g) in m.gamma.column_iter().enumerate() {
        let mut acc = DVector::zeros(4);
        for j2 in 0..=n2 {
            for j1 in 0..=n1 {
                let j = j2 * (n1 + 1) + j1;
                acc += g.rows(4 * j, 4) * (b1[j1] * b2[j2]);
            }
        }
        out.set_column(i, &acc);
    }
    out
}
