use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::{Point3, Vector3};
use serde::Serialize;
use splint::bvh::{build_bvh, DEFAULT_MAX_LEAF};
use splint::implicit::{build_mrep_default, AuxBasisSpec, RankTolerance};
use splint::intersect::{intersect_curve_line, intersect_patch_line_with, intersect_patch_quadratic_with};
use splint::intersect::{IntersectTolerances, IntersectionRecord};
use splint::io::{read_json, read_lattice_spec, read_patches, read_truss, write_json, BoundaryConditions, TrussFile};
use splint::kdop::{support_heights, DirectionSet};
use splint::lattice::{build_truss, classify_and_project, compute_intersections, generate_lattice, CellType, Surface};
use splint::patch::{BezierCurve, RationalBezierPatch};
use splint::pencil::{ParametricLine, ParametricQuadratic};
use splint::subdivision::{subdivision_intersect_with_stats, FlatnessTolerance};
use splint::truss::{assemble_and_solve, TrussSolution};

use crate::{BenchArgs, BvhArgs, CellTypeArg, IntersectArgs, LatticeArgs, Method, SolveArgs};

const SCHEMA: u32 = 1;

fn parse_points(s: &str, count: usize) -> Result<Vec<Point3<f64>>> {
    let pts = s
        .split_whitespace()
        .map(|p| {
            let c: Vec<f64> = p
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("bad coordinate in {p:?}"))?;
            if c.len() != 3 {
                bail!("expected x,y,z but got {p:?}");
            }
            Ok(Point3::new(c[0], c[1], c[2]))
        })
        .collect::<Result<Vec<_>>>()?;
    if pts.len() != count {
        bail!("expected {count} points in {s:?}, got {}", pts.len());
    }
    Ok(pts)
}

fn direction_set(dop: usize, patches: &[RationalBezierPatch], axes: [Vector3<f64>; 3]) -> Result<DirectionSet> {
    Ok(match dop {
        6 => DirectionSet::axes6(),
        14 => DirectionSet::for_patches(patches, axes)?,
        26 => DirectionSet::dop26(),
        _ => bail!(splint::Error::InvalidArgument(format!("--dop must be 6, 14 or 26, got {dop}"))),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

#[derive(Serialize)]
struct ReportRecord {
    /// Index of the query: lines first, then quadratics, in argument order.
    query: usize,
    #[serde(flatten)]
    record: IntersectionRecord,
}

#[derive(Serialize)]
struct IntersectReport {
    schema: u32,
    method: &'static str,
    records: Vec<ReportRecord>,
}

enum Query {
    Line(ParametricLine),
    Quadratic(ParametricQuadratic, [Point3<f64>; 3]),
}

pub fn intersect(a: &IntersectArgs) -> Result<()> {
    let all = read_patches(&a.patches)?;
    let tols = IntersectTolerances { rank: RankTolerance::new(a.tol)?, ..Default::default() };
    let mut queries = Vec::new();
    for s in &a.line {
        let p = parse_points(s, 2)?;
        queries.push(Query::Line(ParametricLine::segment(p[0], p[1])?));
    }
    for s in &a.quadratic {
        let p = parse_points(s, 3)?;
        queries.push(Query::Quadratic(ParametricQuadratic::from_bezier(p[0], p[1], p[2])?, [p[0], p[1], p[2]]));
    }
    if queries.is_empty() {
        bail!(splint::Error::InvalidArgument("give at least one --line or --quadratic".into()));
    }
    let ftol = FlatnessTolerance::new(a.ftol)?;

    // Degree (d, 0) entries are curves; the rest go through the hierarchy.
    let (curve_ids, surface_ids): (Vec<usize>, Vec<usize>) = (0..all.len()).partition(|&i| all[i].degree()[1] == 0);
    let surfaces: Vec<RationalBezierPatch> = surface_ids.iter().map(|&i| all[i].clone()).collect();
    let bvh = if surfaces.is_empty() {
        None
    } else {
        let dirs = DirectionSet::for_patches(&surfaces, [Vector3::x(), Vector3::y(), Vector3::z()])?;
        Some(build_bvh(&surfaces, &dirs, DEFAULT_MAX_LEAF)?)
    };
    let mut mreps = vec![None; surfaces.len()];
    let mut records = Vec::new();
    for (qi, q) in queries.iter().enumerate() {
        for &ci in &curve_ids {
            let p = &all[ci];
            let Query::Line(line) = q else {
                bail!(splint::Error::UnsupportedInput("quadratic queries against curves".into()));
            };
            if a.method == Method::Subdivision {
                bail!(splint::Error::UnsupportedInput("the subdivision method needs surface patches".into()));
            }
            let n = p.degree()[0] + 1;
            let curve = BezierCurve::new(p.degree()[0], p.points()[..n].to_vec(), p.weights()[..n].to_vec())?;
            for mut r in intersect_curve_line(&curve, line, None, &tols)? {
                r.patch_id = ci;
                records.push(ReportRecord { query: qi, record: r });
            }
        }
        let Some(bvh) = &bvh else { continue };
        let cands = match q {
            Query::Line(l) => {
                let (p0, p1) = l.endpoints();
                bvh.query_segment(p0, p1)
            }
            Query::Quadratic(_, ctrl) => bvh.query_bounds(&support_heights(ctrl, bvh.directions())?),
        };
        for si in cands {
            let id = surface_ids[si];
            let patch = &surfaces[si];
            let hits = match (a.method, q) {
                (Method::Subdivision, Query::Line(l)) => subdivision_intersect_with_stats(patch, id, l, ftol)?.0,
                (Method::Subdivision, Query::Quadratic(..)) => {
                    bail!(splint::Error::UnsupportedInput("the subdivision method handles line segments only".into()))
                }
                (Method::Mrep, _) => {
                    if mreps[si].is_none() {
                        mreps[si] = Some(build_mrep_default(patch)?);
                    }
                    let m = mreps[si].as_ref().expect("built above");
                    match q {
                        Query::Line(l) => intersect_patch_line_with(patch, m, id, l, &tols)?,
                        Query::Quadratic(c, _) => intersect_patch_quadratic_with(patch, m, id, c, &tols)?,
                    }
                }
            };
            records.extend(hits.into_iter().map(|record| ReportRecord { query: qi, record }));
        }
    }
    records.sort_by(|x, y| x.query.cmp(&y.query).then(x.record.xi.total_cmp(&y.record.xi)));
    let method = match a.method {
        Method::Mrep => "mrep",
        Method::Subdivision => "subdivision",
    };
    let report = IntersectReport { schema: SCHEMA, method, records };
    emit(a.out.as_deref(), &splint::io::to_json_string(&report)?)
}

#[derive(Serialize)]
struct StatsRow<'a> {
    schema: u32,
    kind: &'a str,
    name: String,
    hits: Option<usize>,
    parity: Option<&'a str>,
    value: Option<f64>,
}

impl<'a> StatsRow<'a> {
    fn summary(kind: &'a str, name: &str, value: f64) -> Self {
        Self { schema: SCHEMA, kind, name: name.to_string(), hits: None, parity: None, value: Some(value) }
    }
}

pub fn lattice_gen(a: &LatticeArgs) -> Result<()> {
    let patches = read_patches(&a.patches)?;
    let mut spec = read_lattice_spec(&a.lattice)?;
    if let Some(c) = a.cell_type {
        spec.cell_type = match c {
            CellTypeArg::Bcc => CellType::Bcc,
            CellTypeArg::Pyramidal => CellType::Pyramidal,
            CellTypeArg::CubicEdges => CellType::CubicEdges,
        };
    }
    let area = a.area.unwrap_or(std::f64::consts::PI * (spec.cell_size / 10.0).powi(2) / 4.0);

    let t0 = Instant::now();
    let mut lattice = generate_lattice(&spec)?;
    let dirs = direction_set(a.dop, &patches, lattice.axes())?;
    let surface = Surface::new(patches, &dirs)?;
    let t_setup = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let summary = compute_intersections(&mut lattice, &surface, &IntersectTolerances::default())?;
    let t_intersect = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let classified = classify_and_project(&mut lattice)?;
    let t_classify = t2.elapsed().as_secs_f64();

    let t3 = Instant::now();
    let truss = build_truss(&lattice, spec.cell_type, area)?;
    let t_truss = t3.elapsed().as_secs_f64();
    write_json(&a.out, &TrussFile { schema: SCHEMA, truss })?;

    if let Some(path) = &a.report {
        let mut w = csv_writer(Some(path))?;
        for l in &lattice.lines {
            w.serialize(StatsRow {
                schema: SCHEMA,
                kind: "line",
                name: l.name(),
                hits: Some(l.hits.len()),
                parity: Some(if l.unreliable {
                    "unreliable"
                } else if l.hits.len() % 2 == 0 {
                    "even"
                } else {
                    "odd"
                }),
                value: None,
            })?;
        }
        w.serialize(StatsRow::summary("summary", "intersections", summary.hits as f64))?;
        w.serialize(StatsRow::summary("summary", "candidates", summary.candidates as f64))?;
        w.serialize(StatsRow::summary("summary", "interior_vertices", classified.inside as f64))?;
        w.serialize(StatsRow::summary("summary", "projected_vertices", classified.projected as f64))?;
        w.serialize(StatsRow::summary("summary", "unreliable_lines", summary.failures.len() as f64))?;
        for (name, secs) in [("setup", t_setup), ("intersect", t_intersect), ("classify", t_classify), ("truss", t_truss)] {
            w.serialize(StatsRow::summary("phase_seconds", name, secs))?;
        }
        w.flush()?;
    }
    if let Some((line, err)) = summary.failures.into_iter().next() {
        return Err(anyhow::Error::new(err).context(format!("intersection failed on lattice line {line}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SolutionFile {
    schema: u32,
    #[serde(flatten)]
    solution: TrussSolution,
}

pub fn solve_truss(a: &SolveArgs) -> Result<()> {
    let truss = read_truss(&a.truss)?;
    let bc: BoundaryConditions = read_json(&a.bc)?;
    let solution = assemble_and_solve(&bc.problem(truss)?)?;
    emit(a.out.as_deref(), &splint::io::to_json_string(&SolutionFile { schema: SCHEMA, solution })?)
}

#[derive(Serialize)]
struct MetricRow<'a> {
    schema: u32,
    metric: &'a str,
    value: usize,
}

pub fn bvh_stats(a: &BvhArgs) -> Result<()> {
    let patches = read_patches(&a.patches)?;
    let dirs = direction_set(a.dop, &patches, [Vector3::x(), Vector3::y(), Vector3::z()])?;
    let stats = build_bvh(&patches, &dirs, a.max_leaf)?.stats();
    let mut w = csv_writer(a.out.as_deref())?;
    w.serialize(MetricRow { schema: SCHEMA, metric: "patches", value: patches.len() })?;
    w.serialize(MetricRow { schema: SCHEMA, metric: "nodes", value: stats.nodes })?;
    w.serialize(MetricRow { schema: SCHEMA, metric: "leaves", value: stats.leaves })?;
    w.serialize(MetricRow { schema: SCHEMA, metric: "depth", value: stats.depth })?;
    for (n, count) in stats.leaf_histogram.iter().enumerate() {
        let name = format!("leaves_with_{n}_patches");
        w.serialize(MetricRow { schema: SCHEMA, metric: &name, value: *count })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    schema: u32,
    case: usize,
    method: &'static str,
    ftol: Option<f64>,
    time_ms: f64,
    peak_mem_bytes: usize,
    hits: usize,
}

/// Bytes of the dense matrices held while building and using an implicit
/// representation: the constraint matrix with its two orthogonal factors.
fn mrep_memory(patch: &RationalBezierPatch) -> usize {
    let d = patch.degree();
    let Ok(aux) = AuxBasisSpec::minimal(d) else { return 0 };
    let rows = (d[0] + aux.degree[0] + 1) * (d[1] + aux.degree[1] + 1);
    let cols = 4 * aux.size();
    8 * (rows * cols + rows * rows + cols * cols)
}

pub fn bench(a: &BenchArgs, seed: u64) -> Result<()> {
    let count: usize = a
        .cases
        .strip_prefix("random")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| splint::Error::InvalidArgument(format!("unknown workload {:?}, expected random<N>", a.cases)))?;
    let ftols = a.ftol.iter().map(|&f| FlatnessTolerance::new(f)).collect::<splint::Result<Vec<_>>>()?;
    let tols = IntersectTolerances::default();
    let cases = splint::fixtures::random_cases(seed, count);
    let mut w = csv_writer(a.out.as_deref())?;
    for (case, (patch, line)) in cases.iter().enumerate() {
        let t = Instant::now();
        let m = build_mrep_default(patch)?;
        let hits = intersect_patch_line_with(patch, &m, 0, line, &tols)?;
        w.serialize(BenchRow {
            schema: SCHEMA,
            case,
            method: "mrep",
            ftol: None,
            time_ms: t.elapsed().as_secs_f64() * 1e3,
            peak_mem_bytes: mrep_memory(patch),
            hits: hits.len(),
        })?;
        let patch_bytes = patch.points().len() * (24 + 8);
        for ftol in &ftols {
            let t = Instant::now();
            let (hits, stats) = subdivision_intersect_with_stats(patch, 0, line, *ftol)?;
            w.serialize(BenchRow {
                schema: SCHEMA,
                case,
                method: "subdivision",
                ftol: Some(ftol.value()),
                time_ms: t.elapsed().as_secs_f64() * 1e3,
                peak_mem_bytes: (stats.peak_live + 1) * patch_bytes,
                hits: hits.len(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
