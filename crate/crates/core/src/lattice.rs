//! Periodic cubic lattices immersed in a closed spline surface.
//!
//! The lattice is intersected line by line with the surface, vertices are
//! classified by crossing parity, the vertex nearest to each crossing is moved
//! onto the surface, and the surviving part is turned into a truss.

use std::collections::HashSet;

use nalgebra::{Point3, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::{build_bvh, Bvh, DEFAULT_MAX_LEAF};
use crate::error::{Error, Result};
use crate::implicit::{build_mrep_default, MRep};
use crate::intersect::{intersect_patch_line_with, IntersectTolerances};
use crate::kdop::DirectionSet;
use crate::patch::RationalBezierPatch;
use crate::pencil::ParametricLine;
use crate::truss::{Joint, Strut, TrussModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellType {
    Bcc,
    Pyramidal,
    CubicEdges,
}

/// Lattice orientation, either as rotation angles in degrees about x, y and z
/// (applied in that order) or as a row-major rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    AnglesDeg([f64; 3]),
    Matrix([[f64; 3]; 3]),
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation::AnglesDeg([0.0; 3])
    }
}

impl Orientation {
    pub fn rotation(&self) -> Result<Rotation3<f64>> {
        match *self {
            Orientation::AnglesDeg([a, b, c]) => {
                if ![a, b, c].iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidArgument("rotation angles must be finite".into()));
                }
                Ok(Rotation3::from_euler_angles(a.to_radians(), b.to_radians(), c.to_radians()))
            }
            Orientation::Matrix(m) => {
                let r = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
                let err = (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max();
                if !(err <= 1e-12) || !(r.determinant() > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "orientation matrix is not a rotation (orthonormality error {err:e})"
                    )));
                }
                Ok(Rotation3::from_matrix_unchecked(r))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub origin: [f64; 3],
    pub cell_size: f64,
    pub counts: [usize; 3],
    #[serde(default)]
    pub orientation: Orientation,
    pub cell_type: CellType,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::InvalidArgument(format!("cell size must be positive, got {}", self.cell_size)));
        }
        if self.counts.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("cell counts must be at least 1, got {:?}", self.counts)));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("origin must be finite".into()));
        }
        self.orientation.rotation().map(|_| ())
    }

    /// Center of the lattice box before rotation; rotations act about it.
    pub fn centroid(&self) -> Point3<f64> {
        let n = Vector3::new(self.counts[0] as f64, self.counts[1] as f64, self.counts[2] as f64);
        Point3::from(self.origin) + n * (0.5 * self.cell_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VertexState {
    Unknown,
    Inside,
    Outside,
    Projected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeVertex {
    pub position: Point3<f64>,
    pub grid: [usize; 3],
    pub state: VertexState,
    /// Parity classification before projection, if classified.
    pub inside: Option<bool>,
    pub theta: Option<[f64; 2]>,
    pub patch: Option<usize>,
    pub removed: bool,
}

/// One surface crossing on a lattice line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineHit {
    /// Arc length from the first vertex of the line.
    pub s: f64,
    pub theta: [f64; 2],
    pub patch: usize,
    pub point: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLine {
    pub axis: usize,
    /// Grid indices along the other two axes, in increasing axis order.
    pub fixed: [usize; 2],
    pub vertices: Vec<usize>,
    pub hits: Vec<LineHit>,
    pub unreliable: bool,
}

impl LatticeLine {
    pub fn name(&self) -> String {
        format!("axis {} at ({}, {})", self.axis, self.fixed[0], self.fixed[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeEdge {
    pub a: usize,
    pub b: usize,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    pub spec: LatticeSpec,
    pub rotation: Rotation3<f64>,
    pub vertices: Vec<LatticeVertex>,
    pub edges: Vec<LatticeEdge>,
    pub lines: Vec<LatticeLine>,
}

impl LatticeModel {
    pub fn vertex_index(&self, g: [usize; 3]) -> usize {
        let [n1, n2, _] = self.spec.counts;
        g[0] + (n1 + 1) * (g[1] + (n2 + 1) * g[2])
    }

    /// Lattice axes after rotation.
    pub fn axes(&self) -> [Vector3<f64>; 3] {
        let m = self.rotation.matrix();
        [m.column(0).into(), m.column(1).into(), m.column(2).into()]
    }

    /// Unprojected position of a grid point.
    pub fn grid_point(&self, g: [f64; 3]) -> Point3<f64> {
        let c = self.spec.centroid();
        let local = Point3::from(self.spec.origin) + Vector3::from(g) * self.spec.cell_size;
        c + self.rotation * (local - c)
    }

    /// First and last vertex of a line, in unprojected positions.
    pub fn line_segment(&self, line: usize) -> (Point3<f64>, Point3<f64>) {
        let l = &self.lines[line];
        let g = |v: usize| {
            let [a, b, c] = self.vertices[v].grid;
            self.grid_point([a as f64, b as f64, c as f64])
        };
        (g(l.vertices[0]), g(*l.vertices.last().expect("lines have vertices")))
    }

    pub fn surviving_edges(&self) -> impl Iterator<Item = &LatticeEdge> {
        self.edges.iter().filter(|e| !self.vertices[e.a].removed && !self.vertices[e.b].removed)
    }

    pub fn count_state(&self, state: VertexState) -> usize {
        self.vertices.iter().filter(|v| !v.removed && v.state == state).count()
    }

    pub fn total_hits(&self) -> usize {
        self.lines.iter().map(|l| l.hits.len()).sum()
    }
}

/// Builds the grid vertices, edges and lines of a lattice.
pub fn generate_lattice(spec: &LatticeSpec) -> Result<LatticeModel> {
    spec.validate()?;
    let rotation = spec.orientation.rotation()?;
    let [n1, n2, n3] = spec.counts;
    let mut model = LatticeModel { spec: spec.clone(), rotation, vertices: Vec::new(), edges: Vec::new(), lines: Vec::new() };
    for k in 0..=n3 {
        for j in 0..=n2 {
            for i in 0..=n1 {
                let position = model.grid_point([i as f64, j as f64, k as f64]);
                model.vertices.push(LatticeVertex {
                    position,
                    grid: [i, j, k],
                    state: VertexState::Unknown,
                    inside: None,
                    theta: None,
                    patch: None,
                    removed: false,
                });
            }
        }
    }
    let n = spec.counts;
    for axis in 0..3 {
        let (o1, o2) = ((axis + 1) % 3, (axis + 2) % 3);
        let (lo, hi) = (o1.min(o2), o1.max(o2));
        for b in 0..=n[hi] {
            for a in 0..=n[lo] {
                let vertices: Vec<usize> = (0..=n[axis])
                    .map(|t| {
                        let mut g = [0; 3];
                        g[axis] = t;
                        g[lo] = a;
                        g[hi] = b;
                        model.vertex_index(g)
                    })
                    .collect();
                let line = model.lines.len();
                for w in vertices.windows(2) {
                    model.edges.push(LatticeEdge { a: w[0], b: w[1], line });
                }
                model.lines.push(LatticeLine { axis, fixed: [a, b], vertices, hits: Vec::new(), unreliable: false });
            }
        }
    }
    Ok(model)
}

/// Patches with their implicit representations and a bounding hierarchy.
#[derive(Debug, Clone)]
pub struct Surface {
    pub patches: Vec<RationalBezierPatch>,
    pub mreps: Vec<MRep>,
    pub bvh: Bvh,
}

impl Surface {
    pub fn new(patches: Vec<RationalBezierPatch>, dirs: &DirectionSet) -> Result<Self> {
        let mreps = patches.par_iter().map(build_mrep_default).collect::<Result<Vec<_>>>()?;
        let bvh = build_bvh(&patches, dirs, DEFAULT_MAX_LEAF)?;
        Ok(Self { patches, mreps, bvh })
    }

    /// Surface with the default 14-dop aligned to `lattice`.
    pub fn for_lattice(patches: Vec<RationalBezierPatch>, lattice: &LatticeModel) -> Result<Self> {
        let dirs = DirectionSet::for_patches(&patches, lattice.axes())?;
        Self::new(patches, &dirs)
    }
}

/// Outcome of [`compute_intersections`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntersectionSummary {
    pub candidates: usize,
    pub hits: usize,
    pub failures: Vec<(usize, Error)>,
}

fn check_containment(lattice: &LatticeModel, surface: &Surface) -> Result<()> {
    let c = lattice.spec.centroid();
    let inv = lattice.rotation.inverse();
    let o = Point3::from(lattice.spec.origin);
    let h = lattice.spec.cell_size;
    let slack = 1e-9 * h;
    for (id, p) in surface.patches.iter().enumerate() {
        for x in p.points() {
            let local = c + inv * (x - c) - o;
            for ax in 0..3 {
                let ext = lattice.spec.counts[ax] as f64 * h;
                if local[ax] < -slack || local[ax] > ext + slack {
                    return Err(Error::InvalidArgument(format!("patch {id} extends beyond the lattice box")));
                }
            }
        }
    }
    Ok(())
}

/// Fills the crossings of every lattice line with the surface.
///
/// Lines are processed in parallel; a line whose intersection fails is marked
/// unreliable and reported instead of aborting the run.
pub fn compute_intersections(
    lattice: &mut LatticeModel,
    surface: &Surface,
    tols: &IntersectTolerances,
) -> Result<IntersectionSummary> {
    check_containment(lattice, surface)?;
    let dedup = 1e-6 * lattice.spec.cell_size;
    let results: Vec<(usize, std::result::Result<Vec<LineHit>, Error>)> = (0..lattice.lines.len())
        .into_par_iter()
        .map(|li| {
            let (a, b) = lattice.line_segment(li);
            let length = (b - a).norm();
            let cands = surface.bvh.query_segment(a, b);
            let n = cands.len();
            let run = || -> Result<Vec<LineHit>> {
                let line = ParametricLine::segment(a, b)?;
                let mut hits = Vec::new();
                for id in cands {
                    for r in intersect_patch_line_with(&surface.patches[id], &surface.mreps[id], id, &line, tols)? {
                        hits.push(LineHit { s: r.xi * length, theta: r.theta, patch: id, point: r.point() });
                    }
                }
                hits.sort_by(|x, y| x.s.total_cmp(&y.s));
                // Crossings on patch seams are found once per adjacent patch.
                hits.dedup_by(|b, a| (b.s - a.s).abs() <= dedup);
                Ok(hits)
            };
            (n, run())
        })
        .collect();
    let mut summary = IntersectionSummary::default();
    for (li, (n, res)) in results.into_iter().enumerate() {
        summary.candidates += n;
        let line = &mut lattice.lines[li];
        match res {
            Ok(hits) => {
                summary.hits += hits.len();
                line.hits = hits;
                line.unreliable = false;
            }
            Err(e) => {
                log::warn!("lattice line {}: {e}", line.name());
                line.hits.clear();
                line.unreliable = true;
                summary.failures.push((li, e));
            }
        }
    }
    Ok(summary)
}

/// Counts from [`classify_and_project`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifySummary {
    pub inside: usize,
    pub outside: usize,
    pub projected: usize,
    pub unprojected_hits: usize,
}

/// Parity classification, projection of boundary vertices and removal of the
/// outside part.
pub fn classify_and_project(lattice: &mut LatticeModel) -> Result<ClassifySummary> {
    for l in &lattice.lines {
        if !l.unreliable && l.hits.len() % 2 == 1 {
            return Err(Error::OpenSurface { line: l.name(), hits: l.hits.len() });
        }
    }
    let h = lattice.spec.cell_size;
    let mut votes = vec![[0usize; 2]; lattice.vertices.len()];
    for l in lattice.lines.iter().filter(|l| !l.unreliable) {
        for (t, &v) in l.vertices.iter().enumerate() {
            let s = t as f64 * h;
            let crossings = l.hits.iter().take_while(|hit| hit.s < s).count();
            votes[v][crossings % 2] += 1;
        }
    }
    for (v, [out, ins]) in lattice.vertices.iter_mut().zip(votes) {
        if out + ins == 0 {
            log::warn!("vertex {:?} lies only on unreliable lines; treated as outside", v.grid);
        }
        let inside = ins > 0 && ins >= out;
        v.inside = Some(inside);
        v.state = if inside { VertexState::Inside } else { VertexState::Outside };
        v.theta = None;
        v.patch = None;
        v.removed = false;
    }

    let dedup = 1e-6 * h;
    let mut summary = ClassifySummary::default();
    for li in 0..lattice.lines.len() {
        let line = &lattice.lines[li];
        let n = line.vertices.len() - 1;
        for hit in &line.hits {
            let k = ((hit.s / h).floor().max(0.0) as usize).min(n - 1);
            let (va, vb) = (line.vertices[k], line.vertices[k + 1]);
            let (da, db) = ((hit.s - k as f64 * h).abs(), ((k + 1) as f64 * h - hit.s).abs());
            let a_first = if (da - db).abs() <= 1e-12 * h {
                lattice.vertices[va].state == VertexState::Inside || lattice.vertices[vb].state != VertexState::Inside
            } else {
                da < db
            };
            let order = if a_first { [va, vb] } else { [vb, va] };
            let mut done = false;
            for v in order {
                let vert = &mut lattice.vertices[v];
                if vert.state == VertexState::Projected {
                    if (vert.position - hit.point).norm() <= dedup {
                        done = true;
                        break;
                    }
                    continue;
                }
                vert.position = hit.point;
                vert.state = VertexState::Projected;
                vert.theta = Some(hit.theta);
                vert.patch = Some(hit.patch);
                done = true;
                break;
            }
            if !done {
                log::warn!("crossing at s = {} on line {} left unprojected", hit.s, line.name());
                summary.unprojected_hits += 1;
            }
        }
    }
    for v in &mut lattice.vertices {
        v.removed = v.state == VertexState::Outside;
    }
    summary.inside = lattice.count_state(VertexState::Inside);
    summary.projected = lattice.count_state(VertexState::Projected);
    summary.outside = lattice.vertices.iter().filter(|v| v.removed).count();
    Ok(summary)
}

const CORNER_EDGES: [(usize, usize); 12] =
    [(0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7), (0, 4), (1, 5), (2, 6), (3, 7)];

const PYRAMID_BASE: [(usize, usize); 4] = [(0, 1), (2, 3), (0, 2), (1, 3)];

/// Truss from the surviving lattice, one strut template per cell.
///
/// Corner `c` of a cell is offset by `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
/// Struts between two corners are kept whenever both corners survive; struts
/// to a cell center (BCC) or a pyramid apex need all eight corners.
pub fn build_truss(lattice: &LatticeModel, cell_type: CellType, area: f64) -> Result<TrussModel> {
    if !(area > 0.0) || !area.is_finite() {
        return Err(Error::InvalidArgument(format!("strut area must be positive, got {area}")));
    }
    let mut joint_of = vec![None; lattice.vertices.len()];
    let mut joints = Vec::new();
    for (i, v) in lattice.vertices.iter().enumerate() {
        if v.removed {
            continue;
        }
        joint_of[i] = Some(joints.len());
        joints.push(Joint {
            x: v.position.into(),
            on_surface: v.state == VertexState::Projected,
            theta: v.theta,
            patch: v.patch,
        });
    }
    let mut seen = HashSet::new();
    let mut struts = Vec::new();
    let mut dropped = 0usize;
    let mut add = |joints: &[Joint], a: usize, b: usize, struts: &mut Vec<Strut>| {
        let key = (a.min(b), a.max(b));
        if a == b || !seen.insert(key) {
            return;
        }
        let d = Point3::from(joints[a].x) - Point3::from(joints[b].x);
        if d.norm() <= 1e-12 * lattice.spec.cell_size {
            dropped += 1;
            return;
        }
        struts.push(Strut(key.0, key.1, area));
    };
    let [n1, n2, n3] = lattice.spec.counts;
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let corners: [Option<usize>; 8] = std::array::from_fn(|c| {
                    joint_of[lattice.vertex_index([i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1)])]
                });
                let edges: &[(usize, usize)] = match cell_type {
                    CellType::Pyramidal => &PYRAMID_BASE,
                    _ => &CORNER_EDGES,
                };
                for &(a, b) in edges {
                    if let (Some(a), Some(b)) = (corners[a], corners[b]) {
                        add(&joints, a, b, &mut struts);
                    }
                }
                if cell_type == CellType::CubicEdges || corners.iter().any(|c| c.is_none()) {
                    continue;
                }
                let pos = |c: usize| Point3::from(joints[corners[c].unwrap()].x).coords;
                let (extra, base): (Vector3<f64>, &[usize]) = match cell_type {
                    CellType::Bcc => ((0..8).map(pos).sum::<Vector3<f64>>() / 8.0, &[0, 1, 2, 3, 4, 5, 6, 7]),
                    _ => ((4..8).map(pos).sum::<Vector3<f64>>() / 4.0, &[0, 1, 2, 3]),
                };
                let id = joints.len();
                joints.push(Joint { x: extra.into(), on_surface: false, theta: None, patch: None });
                for &c in base {
                    add(&joints, corners[c].unwrap(), id, &mut struts);
                }
            }
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} zero-length strut(s) dropped after projection");
    }
    Ok(TrussModel { joints, struts })
}
