//! JSON file formats. Every file carries `"schema": 1`.

use std::path::Path;

use nalgebra::Point3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::patch::RationalBezierPatch;
use crate::truss::{PointLoad, TrussModel, TrussProblem};

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported schema version {v}")));
    }
    Ok(())
}

/// One patch as stored on disk; points in row-major order with the first
/// parameter index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub degree: [usize; 2],
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl PatchRecord {
    pub fn from_patch(p: &RationalBezierPatch) -> Self {
        let weights = (!p.weights().iter().all(|&w| w == 1.0)).then(|| p.weights().to_vec());
        Self { degree: p.degree(), points: p.points().iter().map(|x| [x.x, x.y, x.z]).collect(), weights }
    }

    pub fn to_patch(&self) -> Result<RationalBezierPatch> {
        let pts: Vec<Point3<f64>> = self.points.iter().map(|p| Point3::from(*p)).collect();
        let n = pts.len();
        RationalBezierPatch::new(self.degree, pts, self.weights.clone().unwrap_or_else(|| vec![1.0; n]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFile {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub patches: Vec<PatchRecord>,
}

impl PatchFile {
    pub fn new(patches: &[RationalBezierPatch]) -> Self {
        Self { schema: SCHEMA_VERSION, patches: patches.iter().map(PatchRecord::from_patch).collect() }
    }

    pub fn to_patches(&self) -> Result<Vec<RationalBezierPatch>> {
        check_schema(self.schema)?;
        self.patches
            .iter()
            .enumerate()
            .map(|(i, r)| r.to_patch().map_err(|e| Error::Format(format!("patch {i}: {e}"))))
            .collect()
    }
}

/// Truss file: the model plus the schema tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrussFile {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(flatten)]
    pub truss: TrussModel,
}

/// Lattice configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFile {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(flatten)]
    pub spec: LatticeSpec,
}

pub fn read_lattice_spec(path: &Path) -> Result<LatticeSpec> {
    let f: LatticeFile = read_json(path)?;
    check_schema(f.schema)?;
    f.spec.validate()?;
    Ok(f.spec)
}

/// Supports and loads for a truss.
///
/// `fixed_joints` pins all three components of the listed joints, in addition
/// to the individual `fixed_dofs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub youngs_modulus: f64,
    #[serde(default)]
    pub fixed_joints: Vec<usize>,
    #[serde(default)]
    pub fixed_dofs: Vec<(usize, usize)>,
    #[serde(default)]
    pub loads: Vec<PointLoad>,
}

impl BoundaryConditions {
    pub fn problem(&self, truss: TrussModel) -> Result<TrussProblem> {
        check_schema(self.schema)?;
        let mut fixed: Vec<(usize, usize)> = self.fixed_joints.iter().flat_map(|&j| (0..3).map(move |c| (j, c))).collect();
        fixed.extend(&self.fixed_dofs);
        fixed.sort_unstable();
        fixed.dedup();
        Ok(TrussProblem { truss, youngs_modulus: self.youngs_modulus, fixed_dofs: fixed, point_loads: self.loads.clone() })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_patches(path: &Path) -> Result<Vec<RationalBezierPatch>> {
    read_json::<PatchFile>(path)?.to_patches()
}

pub fn read_truss(path: &Path) -> Result<TrussModel> {
    let f: TrussFile = read_json(path)?;
    check_schema(f.schema)?;
    f.truss.validate()?;
    Ok(f.truss)
}
