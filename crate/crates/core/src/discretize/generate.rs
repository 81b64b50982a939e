//! Random convex-polygon meshes: a jittered lattice clipped to the polygon,
//! boundary points spaced along each side, then Delaunay triangulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::delaunay::delaunay;
use super::mesh::{signed_area, topological_boundary, Mesh, MeshKind};
use crate::error::{Error, Result};

/// Fraction of `target_nodes` the spacing search aims for. Paired with uniform
/// targets this keeps generated sizes near the skewed training-set distribution.
pub const TARGET_FILL: f64 = 0.8;

const MIN_POLYGON_AREA: f64 = 0.05;
const MAX_ATTEMPTS: usize = 20;

#[derive(Debug, Clone)]
pub struct MeshGenOptions {
    pub target_nodes: usize,
    /// Counter-clockwise convex polygon; random when `None`.
    pub polygon: Option<Vec<[f64; 2]>>,
    /// Lattice jitter as a fraction of the spacing, at most 0.25.
    pub jitter: f64,
}

impl MeshGenOptions {
    pub fn new(target_nodes: usize) -> Self {
        Self {
            target_nodes,
            polygon: None,
            jitter: 0.25,
        }
    }
}

/// Random convex polygon mesh with roughly `target_nodes` nodes.
pub fn make_unstructured_mesh(seed: u64, target_nodes: usize) -> Result<Mesh> {
    generate_mesh(seed, &MeshGenOptions::new(target_nodes))
}

pub fn generate_mesh(seed: u64, opts: &MeshGenOptions) -> Result<Mesh> {
    if opts.target_nodes < 20 {
        return Err(Error::InvalidMesh(format!(
            "target_nodes must be at least 20, got {}",
            opts.target_nodes
        )));
    }
    if !(0.0..=0.25).contains(&opts.jitter) {
        return Err(Error::InvalidMesh("jitter must lie in [0, 0.25]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        let polygon = match &opts.polygon {
            Some(p) => p.clone(),
            None => {
                let k = rng.random_range(4..=10);
                let pts: Vec<[f64; 2]> = (0..k).map(|_| [rng.random(), rng.random()]).collect();
                convex_hull(&pts)
            }
        };
        if polygon.len() < 3 || polygon_area(&polygon) < MIN_POLYGON_AREA {
            last_err = Some(Error::InvalidMesh(format!(
                "polygon area below {MIN_POLYGON_AREA} on attempt {attempt}"
            )));
            if opts.polygon.is_some() {
                break;
            }
            continue;
        }
        let jitter_seed: u64 = rng.random();
        match fill_polygon(&polygon, opts, jitter_seed) {
            Ok(mesh) => return Ok(mesh),
            Err(e) => {
                last_err = Some(e);
                if opts.polygon.is_some() {
                    break;
                }
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::InvalidMesh("mesh generation failed".into())))
}

fn fill_polygon(polygon: &[[f64; 2]], opts: &MeshGenOptions, jitter_seed: u64) -> Result<Mesh> {
    let area = polygon_area(polygon);
    let desired = (TARGET_FILL * opts.target_nodes as f64).max(3.0);
    let mut spacing = (area / desired).sqrt();
    let mut best: Option<(f64, Vec<[f64; 2]>, usize)> = None;
    for _ in 0..8 {
        let (points, n_boundary) = sample_points(polygon, spacing, opts.jitter, jitter_seed);
        let miss = (points.len() as f64 - desired).abs();
        if best.as_ref().is_none_or(|b| miss < b.0) {
            best = Some((miss, points.clone(), n_boundary));
        }
        if miss <= 0.02 * desired {
            break;
        }
        spacing *= (points.len() as f64 / desired).sqrt();
    }
    let (_, points, n_boundary) = best.unwrap();

    let raw = delaunay(&points)?;
    let typical = spacing * spacing;
    let triangles: Vec<[usize; 3]> = raw
        .into_iter()
        .filter(|t| {
            let a = signed_area(points[t[0]], points[t[1]], points[t[2]]);
            // Near-collinear boundary triples form zero-area slivers.
            !(a < 1e-9 * typical && t.iter().all(|&v| v < n_boundary))
        })
        .collect();

    let covered: f64 = triangles
        .iter()
        .map(|t| signed_area(points[t[0]], points[t[1]], points[t[2]]))
        .sum();
    if (covered - area).abs() > 1e-9 * area {
        return Err(Error::InvalidMesh(format!(
            "triangulation covers area {covered}, polygon area {area}"
        )));
    }
    let boundary = topological_boundary(points.len(), &triangles);
    if (0..n_boundary).any(|i| !boundary[i]) || boundary[n_boundary..].iter().any(|&b| b) {
        return Err(Error::InvalidMesh("boundary points do not match the hull".into()));
    }
    let mesh = Mesh {
        kind: MeshKind::Triangulation,
        nodes: points,
        triangles,
        boundary,
        warnings: Vec::new(),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Boundary points come first in the returned list; the count is returned alongside.
fn sample_points(
    polygon: &[[f64; 2]],
    spacing: f64,
    jitter: f64,
    seed: u64,
) -> (Vec<[f64; 2]>, usize) {
    let mut points = Vec::new();
    let m = polygon.len();
    for k in 0..m {
        let (a, b) = (polygon[k], polygon[(k + 1) % m]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let segments = ((len / spacing) - 1e-9).ceil().max(1.0) as usize;
        for s in 0..segments {
            let t = s as f64 / segments as f64;
            points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let n_boundary = points.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in polygon {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let nx = ((hi[0] - lo[0]) / spacing).ceil() as usize;
    let ny = ((hi[1] - lo[1]) / spacing).ceil() as usize;
    for j in 1..=ny {
        for i in 1..=nx {
            let mut p = [lo[0] + i as f64 * spacing, lo[1] + j as f64 * spacing];
            if jitter > 0.0 {
                p[0] += jitter * spacing * rng.random_range(-1.0..1.0);
                p[1] += jitter * spacing * rng.random_range(-1.0..1.0);
            }
            if distance_inside(polygon, p) >= 0.5 * spacing {
                points.push(p);
            }
        }
    }
    (points, n_boundary)
}

/// Distance from `p` to the polygon boundary, negative when outside.
fn distance_inside(polygon: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let m = polygon.len();
    let mut d = f64::INFINITY;
    for k in 0..m {
        let (a, b) = (polygon[k], polygon[(k + 1) % m]);
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len = ex.hypot(ey);
        // Signed distance to the supporting line; positive on the inner (left) side.
        let side = (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / len;
        d = d.min(side);
    }
    d
}

fn polygon_area(polygon: &[[f64; 2]]) -> f64 {
    let m = polygon.len();
    (0..m)
        .map(|k| {
            let (a, b) = (polygon[k], polygon[(k + 1) % m]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}
