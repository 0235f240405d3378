//! Pin-jointed truss model and small-displacement linear statics.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub x: [f64; 3],
    pub on_surface: bool,
    pub theta: Option<[f64; 2]>,
    pub patch: Option<usize>,
}

/// Strut between two joints with its cross-section area; serialized as
/// `[j1, j2, area]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strut(pub usize, pub usize, pub f64);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrussModel {
    pub joints: Vec<Joint>,
    pub struts: Vec<Strut>,
}

impl TrussModel {
    /// Length and unit tangent pointing from the first to the second joint.
    pub fn strut_geometry(&self, s: usize) -> (f64, Vector3<f64>) {
        let Strut(a, b, _) = self.struts[s];
        let d = Point3::from(self.joints[b].x) - Point3::from(self.joints[a].x);
        let l = d.norm();
        (l, d / l)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.struts.iter().enumerate() {
            if s.0 >= self.joints.len() || s.1 >= self.joints.len() {
                return Err(Error::InvalidArgument(format!("strut {k} references a missing joint")));
            }
            if !(s.2 > 0.0) {
                return Err(Error::InvalidArgument(format!("strut {k} has non-positive area")));
            }
            if !(self.strut_geometry(k).0 > 0.0) {
                return Err(Error::InvalidArgument(format!("strut {k} has zero length")));
            }
        }
        Ok(())
    }
}

/// Axial strain `((uL - uR) . t) / l`.
///
/// `L` is the strut's second joint and `R` its first, with `t` pointing from
/// the first joint to the second, so elongation is positive.
pub fn strut_strain(u_l: &Vector3<f64>, u_r: &Vector3<f64>, t: &Vector3<f64>, l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::InvalidArgument(format!("strut length must be positive, got {l}")));
    }
    if (t.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("strut tangent must have unit length".into()));
    }
    Ok((u_l - u_r).dot(t) / l)
}

/// Prescribed load on one joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLoad {
    pub joint: usize,
    pub force: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrussProblem {
    pub truss: TrussModel,
    pub youngs_modulus: f64,
    /// Fixed `(joint, component)` pairs with zero displacement.
    pub fixed_dofs: Vec<(usize, usize)>,
    pub point_loads: Vec<PointLoad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrussSolution {
    pub displacements: Vec<[f64; 3]>,
    pub strains: Vec<f64>,
    /// Support reactions; zero on free components.
    pub reactions: Vec<[f64; 3]>,
    pub compliance: f64,
}

/// Per-strut 3x3 block `(E A / l) t t^T`.
fn strut_block(truss: &TrussModel, s: usize, e: f64) -> [[f64; 3]; 3] {
    let (l, t) = truss.strut_geometry(s);
    let k = e * truss.struts[s].2 / l;
    std::array::from_fn(|i| std::array::from_fn(|j| k * t[i] * t[j]))
}

/// Global stiffness entries, summed in a fixed order.
fn stiffness_entries(truss: &TrussModel, e: f64) -> BTreeMap<(usize, usize), f64> {
    let blocks: Vec<[[f64; 3]; 3]> = (0..truss.struts.len()).into_par_iter().map(|s| strut_block(truss, s, e)).collect();
    let mut map = BTreeMap::new();
    for (s, kb) in blocks.iter().enumerate() {
        let Strut(a, b, _) = truss.struts[s];
        for i in 0..3 {
            for j in 0..3 {
                let v = kb[i][j];
                *map.entry((3 * a + i, 3 * a + j)).or_insert(0.0) += v;
                *map.entry((3 * b + i, 3 * b + j)).or_insert(0.0) += v;
                *map.entry((3 * a + i, 3 * b + j)).or_insert(0.0) -= v;
                *map.entry((3 * b + i, 3 * a + j)).or_insert(0.0) -= v;
            }
        }
    }
    map
}

/// Dense global stiffness matrix (for small models and checks).
pub fn stiffness_dense(truss: &TrussModel, e: f64) -> DMatrix<f64> {
    let n = 3 * truss.joints.len();
    let mut k = DMatrix::zeros(n, n);
    for ((i, j), v) in stiffness_entries(truss, e) {
        k[(i, j)] = v;
    }
    k
}

/// Sparse symmetric matrix in row lists, for products.
struct RowMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl RowMatrix {
    fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }
}

/// Orthonormalizes the columns of `x` in place (modified Gram-Schmidt).
fn orthonormalize(x: &mut [Vec<f64>]) {
    for k in 0..x.len() {
        for j in 0..k {
            let d: f64 = x[k].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = x.split_at_mut(k);
            for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                *a -= d * b;
            }
        }
        let n = x[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            x[k].iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Number of eigenvalues of the unit-diagonal matrix `s` below `threshold`,
/// counted among the smallest `block` by subspace inverse iteration with the
/// given solver.
fn count_soft_modes(s: &RowMatrix, solve: &dyn Fn(&mut [f64]), block: usize, threshold: f64) -> usize {
    let n = s.rows.len();
    let block = block.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut x: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    orthonormalize(&mut x);
    for _ in 0..8 {
        for v in x.iter_mut() {
            solve(v);
        }
        orthonormalize(&mut x);
    }
    // Rayleigh-Ritz on the subspace.
    let sx: Vec<Vec<f64>> = x.iter().map(|v| s.mul(v)).collect();
    let h = DMatrix::from_fn(block, block, |i, j| x[i].iter().zip(&sx[j]).map(|(a, b)| a * b).sum::<f64>());
    let h = (&h + h.transpose()) * 0.5;
    h.symmetric_eigenvalues().iter().filter(|&&l| l < threshold).count()
}

/// Solves the linear statics problem with a sparse Cholesky factorization.
///
/// Fixed components are eliminated. Free components without any stiffness
/// are dropped when unloaded (joints not attached to a strut in that
/// direction) and reported as a mechanism when loaded.
pub fn assemble_and_solve(p: &TrussProblem) -> Result<TrussSolution> {
    let truss = &p.truss;
    truss.validate()?;
    if !(p.youngs_modulus > 0.0) {
        return Err(Error::InvalidArgument("Young's modulus must be positive".into()));
    }
    let ndof = 3 * truss.joints.len();
    let mut fixed = vec![false; ndof];
    for &(j, c) in &p.fixed_dofs {
        if j >= truss.joints.len() || c > 2 {
            return Err(Error::InvalidArgument(format!("fixed dof ({j}, {c}) out of range")));
        }
        fixed[3 * j + c] = true;
    }
    let mut f = vec![0.0; ndof];
    for l in &p.point_loads {
        if l.joint >= truss.joints.len() {
            return Err(Error::InvalidArgument(format!("load on missing joint {}", l.joint)));
        }
        for c in 0..3 {
            f[3 * l.joint + c] += l.force[c];
        }
    }
    let entries = stiffness_entries(truss, p.youngs_modulus);
    let mut diag = vec![0.0; ndof];
    for (&(i, j), &v) in &entries {
        if i == j {
            diag[i] = v;
        }
    }
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let fmax = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut zero_loaded = 0;
    let mut free = Vec::new();
    for d in 0..ndof {
        if fixed[d] {
            continue;
        }
        if diag[d] <= 1e-14 * dmax {
            if f[d].abs() > 1e-14 * fmax.max(f64::MIN_POSITIVE) {
                zero_loaded += 1;
            }
            continue;
        }
        free.push(d);
    }
    if zero_loaded > 0 {
        return Err(Error::Mechanism { modes: zero_loaded });
    }
    let mut map = vec![usize::MAX; ndof];
    for (k, &d) in free.iter().enumerate() {
        map[d] = k;
    }
    let n = free.len();
    let mut u = vec![0.0; ndof];
    if n > 0 {
        // Jacobi scaling to a unit diagonal.
        let scale: Vec<f64> = free.iter().map(|&d| 1.0 / diag[d].sqrt()).collect();
        let mut triplets = Vec::new();
        let mut rows = vec![Vec::new(); n];
        for (&(i, j), &v) in &entries {
            let (a, b) = (map[i], map[j]);
            if a == usize::MAX || b == usize::MAX || v == 0.0 {
                continue;
            }
            let s = v * scale[a] * scale[b];
            rows[a].push((b, s));
            if a >= b {
                triplets.push(Triplet::new(a, b, s));
            }
        }
        let sm = RowMatrix { rows };
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::NumericalFailure(format!("sparse assembly failed: {e:?}")))?;
        let threshold = 1e-10;
        let llt = match mat.sp_cholesky(Side::Lower) {
            Ok(llt) => llt,
            Err(_) => {
                // Count the soft modes on a slightly shifted copy.
                let shifted = {
                    let mut t = triplets.clone();
                    t.extend((0..n).map(|i| Triplet::new(i, i, 1e-8)));
                    SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
                        .map_err(|e| Error::NumericalFailure(format!("sparse assembly failed: {e:?}")))?
                };
                let modes = match shifted.sp_cholesky(Side::Lower) {
                    Ok(l) => {
                        let solve = |v: &mut [f64]| {
                            let x = l.solve(Mat::from_fn(n, 1, |i, _| v[i]));
                            v.iter_mut().enumerate().for_each(|(i, y)| *y = x[(i, 0)]);
                        };
                        count_soft_modes(&sm, &solve, 12, 1e-6).max(1)
                    }
                    Err(_) => 1,
                };
                return Err(Error::Mechanism { modes });
            }
        };
        let solve = |v: &mut [f64]| {
            let x = llt.solve(Mat::from_fn(n, 1, |i, _| v[i]));
            v.iter_mut().enumerate().for_each(|(i, y)| *y = x[(i, 0)]);
        };
        // A factorization can succeed on a numerically singular matrix.
        let modes = count_soft_modes(&sm, &solve, 6, threshold);
        if modes > 0 {
            return Err(Error::Mechanism { modes });
        }
        let mut y: Vec<f64> = free.iter().zip(&scale).map(|(&d, s)| f[d] * s).collect();
        solve(&mut y);
        for (k, &d) in free.iter().enumerate() {
            u[d] = y[k] * scale[k];
        }
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite displacements".into()));
    }
    let mut ku = vec![0.0; ndof];
    for (&(i, j), &v) in &entries {
        ku[i] += v * u[j];
    }
    let displacements: Vec<[f64; 3]> = u.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let mut reactions = vec![[0.0; 3]; truss.joints.len()];
    for d in 0..ndof {
        if fixed[d] {
            reactions[d / 3][d % 3] = ku[d] - f[d];
        }
    }
    let strains = (0..truss.struts.len())
        .map(|s| {
            let Strut(a, b, _) = truss.struts[s];
            let (l, t) = truss.strut_geometry(s);
            strut_strain(&Vector3::from(displacements[b]), &Vector3::from(displacements[a]), &t, l)
        })
        .collect::<Result<Vec<_>>>()?;
    let compliance = f.iter().zip(&u).map(|(a, b)| a * b).sum();
    Ok(TrussSolution { displacements, strains, reactions, compliance })
}

/// Relative density and out-of-plane shear modulus of a pyramidal core with
/// strut diameter `d`, strut length `l`, inclination `phi` and modulus `e`.
pub fn homogenised_pyramidal(d: f64, l: f64, phi: f64, e: f64) -> Result<(f64, f64)> {
    if !(d > 0.0 && l > 0.0 && e > 0.0) || !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "need d, l, E > 0 and 0 < phi < pi/2 (got d={d}, l={l}, phi={phi}, E={e})"
        )));
    }
    let rho = std::f64::consts::PI / (2.0 * phi.cos().powi(2) * phi.sin()) * (d / l).powi(2);
    let g = rho / 8.0 * e * (2.0 * phi).sin().powi(2);
    Ok((rho, g))
}
