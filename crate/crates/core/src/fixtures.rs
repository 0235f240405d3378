//! Deterministic test geometry: random cubic patches with crossing segments,
//! a closed sphere-like biquadratic surface and the two-line curve problem.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io::{to_json_string, BoundaryConditions, LatticeFile, PatchFile, TrussFile, SCHEMA_VERSION};
use crate::lattice::{build_truss, generate_lattice, CellType, LatticeSpec, Orientation};
use crate::patch::{BezierCurve, RationalBezierPatch};
use crate::truss::PointLoad;
use crate::pencil::ParametricLine;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bicubic patch over the unit square with jittered control points and
/// heights in `[-0.3, 0.3]`.
pub fn random_cubic_patch<R: Rng>(rng: &mut R) -> RationalBezierPatch {
    let pts = (0..16)
        .map(|k| {
            let (i, j) = ((k % 4) as f64 / 3.0, (k / 4) as f64 / 3.0);
            Point3::new(
                i + rng.random_range(-0.1..0.1),
                j + rng.random_range(-0.1..0.1),
                rng.random_range(-0.3..0.3),
            )
        })
        .collect();
    RationalBezierPatch::polynomial([3, 3], pts).expect("valid cubic net")
}

/// A segment crossing `patch` at an interior parameter, tilted up to about
/// 30 degrees from the surface normal there.
pub fn transversal_segment<R: Rng>(rng: &mut R, patch: &RationalBezierPatch) -> ParametricLine {
    loop {
        let th = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
        let Ok((x, du, dv)) = patch.eval_with_derivatives(th) else { continue };
        let n = du.cross(&dv);
        if n.norm() < 1e-6 {
            continue;
        }
        let tilt: Vector3<f64> = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let d = (n.normalize() + tilt * 0.4 / tilt.norm().max(1.0)).normalize();
        let (s0, s1) = (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7));
        return ParametricLine::segment(x - d * s0, x + d * s1).expect("non-degenerate segment");
    }
}

/// Seeded list of `(patch, segment)` pairs.
pub fn random_cases(seed: u64, count: usize) -> Vec<(RationalBezierPatch, ParametricLine)> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let p = random_cubic_patch(&mut r);
            let l = transversal_segment(&mut r, &p);
            (p, l)
        })
        .collect()
}

pub const SPHERE_CENTER: [f64; 3] = [0.5, 0.5, 0.5];
pub const SPHERE_RADIUS: f64 = 0.4;

/// Closed sphere-like surface: each cube face is split into `per_face` x
/// `per_face` cells, and every cell becomes the biquadratic patch interpolating
/// the radially projected cube points at parameters 0, 1/2 and 1.
///
/// Neighbouring patches share their boundary control points, so the surface is
/// watertight.
pub fn sphere_patches(center: Point3<f64>, radius: f64, per_face: usize) -> Vec<RationalBezierPatch> {
    let project = |c: Vector3<f64>| center + c.normalize() * radius;
    // (normal axis, sign) per face; tangent axes chosen for outward orientation.
    let faces: [(usize, f64); 6] = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)];
    let mut out = Vec::with_capacity(6 * per_face * per_face);
    for (axis, sign) in faces {
        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
        let cube = |s: f64, t: f64| {
            let mut c = Vector3::zeros();
            c[axis] = sign;
            // Swapping tangents on negative faces keeps normals outward.
            if sign > 0.0 {
                c[a1] = s;
                c[a2] = t;
            } else {
                c[a1] = t;
                c[a2] = s;
            }
            c
        };
        let h = 2.0 / per_face as f64;
        for b in 0..per_face {
            for a in 0..per_face {
                let s0 = -1.0 + a as f64 * h;
                let t0 = -1.0 + b as f64 * h;
                let sample = |i: usize, j: usize| project(cube(s0 + 0.5 * h * i as f64, t0 + 0.5 * h * j as f64));
                // Interpolation at 0, 1/2, 1 per direction: the middle control
                // value is 2 S(1/2) - (S(0) + S(1)) / 2.
                let mut rows = [[Vector3::zeros(); 3]; 3];
                for j in 0..3 {
                    let (p0, pm, p1) = (sample(0, j).coords, sample(1, j).coords, sample(2, j).coords);
                    rows[j] = [p0, pm * 2.0 - (p0 + p1) * 0.5, p1];
                }
                let mut pts = Vec::with_capacity(9);
                let mut net = [[Vector3::zeros(); 3]; 3];
                for i in 0..3 {
                    let (q0, qm, q1) = (rows[0][i], rows[1][i], rows[2][i]);
                    net[1][i] = qm * 2.0 - (q0 + q1) * 0.5;
                    net[0][i] = q0;
                    net[2][i] = q1;
                }
                for row in &net {
                    for q in row {
                        pts.push(Point3::from(*q));
                    }
                }
                out.push(RationalBezierPatch::polynomial([2, 2], pts).expect("valid biquadratic net"));
            }
        }
    }
    out
}

/// The default sphere-like fixture: 6 faces x 3 x 3 patches.
pub fn sphere_fixture() -> Vec<RationalBezierPatch> {
    sphere_patches(Point3::from(SPHERE_CENTER), SPHERE_RADIUS, 3)
}

/// The linear curve from (0,-1,0) to (1,1,0) and the segment (0,1,0)-(1,0,0);
/// they cross at xi = theta = 2/3.
pub fn two_lines() -> (BezierCurve, ParametricLine) {
    let curve = BezierCurve::polynomial(vec![Point3::new(0.0, -1.0, 0.0), Point3::new(1.0, 1.0, 0.0)])
        .expect("valid curve");
    let line = ParametricLine::segment(Point3::new(0.0, 1.0, 0.0), Point3::new(1.0, 0.0, 0.0)).expect("valid line");
    (curve, line)
}

/// Contents of the fixture files shipped in the repository, by file name.
pub fn bundled_files() -> Result<Vec<(&'static str, String)>> {
    let (curve, _) = two_lines();
    let sphere_spec = LatticeSpec {
        origin: [-0.25; 3],
        cell_size: 0.25,
        counts: [6, 6, 6],
        orientation: Orientation::AnglesDeg([0.0; 3]),
        cell_type: CellType::Bcc,
    };
    let cell_spec = LatticeSpec {
        origin: [0.0; 3],
        cell_size: 1.0,
        counts: [1, 1, 1],
        orientation: Orientation::AnglesDeg([0.0; 3]),
        cell_type: CellType::Bcc,
    };
    let cell = build_truss(&generate_lattice(&cell_spec)?, CellType::Bcc, 0.01)?;
    let base: Vec<usize> = (0..cell.joints.len()).filter(|&j| cell.joints[j].x[2] == 0.0).collect();
    let top: Vec<usize> = (0..cell.joints.len()).filter(|&j| cell.joints[j].x[2] == 1.0).collect();
    let bc = BoundaryConditions {
        schema: SCHEMA_VERSION,
        youngs_modulus: 1.0,
        fixed_joints: base,
        // Top corners slide only vertically, as under a compression platen.
        fixed_dofs: top.iter().flat_map(|&j| [(j, 0), (j, 1)]).collect(),
        loads: top.iter().map(|&joint| PointLoad { joint, force: [0.0, 0.0, -0.25] }).collect(),
    };
    Ok(vec![
        ("two_lines.json", to_json_string(&PatchFile::new(&[curve.as_patch()]))?),
        ("sphere.json", to_json_string(&PatchFile::new(&sphere_fixture()))?),
        ("sphere_lattice.json", to_json_string(&LatticeFile { schema: SCHEMA_VERSION, spec: sphere_spec })?),
        ("bcc_cell.json", to_json_string(&TrussFile { schema: SCHEMA_VERSION, truss: cell })?),
        ("bcc_cell_bc.json", to_json_string(&bc)?),
    ])
}
