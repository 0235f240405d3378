//! Discrete orientation polytopes (k-dops) stored as support heights.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::patch::RationalBezierPatch;

/// A set of `k >= 6` unit direction vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    dirs: Vec<Vector3<f64>>,
}

impl DirectionSet {
    /// Normalizes and validates the given directions.
    pub fn new(dirs: Vec<Vector3<f64>>) -> Result<Self> {
        if dirs.len() < 6 {
            return Err(Error::InvalidArgument(format!("need at least 6 directions, got {}", dirs.len())));
        }
        let mut out = Vec::with_capacity(dirs.len());
        for d in dirs {
            let n = d.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::InvalidArgument(format!("direction {d:?} cannot be normalized")));
            }
            out.push(d / n);
        }
        Ok(Self { dirs: out })
    }

    /// The six signed coordinate axes.
    pub fn axes6() -> Self {
        Self { dirs: coordinate_axes().iter().flat_map(|a| [*a, -*a]).collect() }
    }

    /// Signed coordinate axes, a signed normal direction and signed lattice axes.
    ///
    /// A zero `normal` falls back to the z axis. Lattice axes that coincide with
    /// coordinate axes are kept as duplicates.
    pub fn fourteen(normal: Vector3<f64>, lattice_axes: [Vector3<f64>; 3]) -> Result<Self> {
        let n = if normal.norm() > 1e-12 { normal } else { Vector3::z() };
        let mut dirs: Vec<Vector3<f64>> = coordinate_axes().iter().flat_map(|a| [*a, -*a]).collect();
        dirs.push(n);
        dirs.push(-n);
        for a in lattice_axes {
            dirs.push(a);
            dirs.push(-a);
        }
        Self::new(dirs)
    }

    /// The 26-dop: axes, face diagonals and body diagonals, each with both signs.
    pub fn dop26() -> Self {
        let mut dirs = Vec::with_capacity(26);
        for x in -1i32..=1 {
            for y in -1i32..=1 {
                for z in -1i32..=1 {
                    if x == 0 && y == 0 && z == 0 {
                        continue;
                    }
                    dirs.push(Vector3::new(x as f64, y as f64, z as f64).normalize());
                }
            }
        }
        Self { dirs }
    }

    /// Default 14-dop for a patch set: the normal is averaged over a 3x3
    /// parameter grid of every patch.
    pub fn for_patches(patches: &[RationalBezierPatch], lattice_axes: [Vector3<f64>; 3]) -> Result<Self> {
        Self::fourteen(average_normal(patches), lattice_axes)
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.dirs
    }
}

fn coordinate_axes() -> [Vector3<f64>; 3] {
    [Vector3::x(), Vector3::y(), Vector3::z()]
}

/// Mean unit normal sampled on a 3x3 grid of each patch; zero if it cancels out.
pub fn average_normal(patches: &[RationalBezierPatch]) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    for p in patches {
        for a in 0..3 {
            for b in 0..3 {
                if let Ok(n) = p.normal([a as f64 / 2.0, b as f64 / 2.0]) {
                    if n.iter().all(|c| c.is_finite()) {
                        acc += n;
                    }
                }
            }
        }
    }
    if acc.norm() > 1e-12 {
        acc.normalize()
    } else {
        Vector3::zeros()
    }
}

/// Minimum and maximum projection heights along each direction of a [`DirectionSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct KDopBounds {
    pub h_min: Vec<f64>,
    pub h_max: Vec<f64>,
}

impl KDopBounds {
    pub fn k(&self) -> usize {
        self.h_min.len()
    }

    /// Smallest bounds containing both inputs.
    pub fn union(&self, other: &KDopBounds) -> KDopBounds {
        KDopBounds {
            h_min: self.h_min.iter().zip(&other.h_min).map(|(a, b)| a.min(*b)).collect(),
            h_max: self.h_max.iter().zip(&other.h_max).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// True if `other` lies inside `self` in every direction (with slack `tol`).
    pub fn contains(&self, other: &KDopBounds, tol: f64) -> bool {
        (0..self.k()).all(|j| self.h_min[j] <= other.h_min[j] + tol && self.h_max[j] >= other.h_max[j] - tol)
    }

    /// True if the point's heights fall inside the bounds (with slack `tol`).
    pub fn contains_point(&self, dirs: &DirectionSet, x: &Point3<f64>, tol: f64) -> bool {
        dirs.dirs.iter().enumerate().all(|(j, d)| {
            let h = x.coords.dot(d);
            h >= self.h_min[j] - tol && h <= self.h_max[j] + tol
        })
    }
}

/// Support heights of a point cloud along each direction.
pub fn support_heights(points: &[Point3<f64>], dirs: &DirectionSet) -> Result<KDopBounds> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("support heights of an empty point set".into()));
    }
    let k = dirs.len();
    let mut h_min = vec![f64::INFINITY; k];
    let mut h_max = vec![f64::NEG_INFINITY; k];
    for x in points {
        for (j, d) in dirs.dirs.iter().enumerate() {
            let h = x.coords.dot(d);
            h_min[j] = h_min[j].min(h);
            h_max[j] = h_max[j].max(h);
        }
    }
    Ok(KDopBounds { h_min, h_max })
}

/// Bounds of a patch via its control net (convex hull property).
pub fn patch_bounds(patch: &RationalBezierPatch, dirs: &DirectionSet) -> KDopBounds {
    support_heights(patch.points(), dirs).expect("patches have at least one control point")
}

/// Two k-dops overlap unless some direction separates them.
pub fn kdops_overlap(a: &KDopBounds, b: &KDopBounds) -> Result<bool> {
    if a.k() != b.k() {
        return Err(Error::InvalidArgument(format!("k-dop sizes differ: {} vs {}", a.k(), b.k())));
    }
    Ok(overlap_unchecked(a, b))
}

#[inline]
pub(crate) fn overlap_unchecked(a: &KDopBounds, b: &KDopBounds) -> bool {
    (0..a.k()).all(|j| a.h_max[j] >= b.h_min[j] && b.h_max[j] >= a.h_min[j])
}
