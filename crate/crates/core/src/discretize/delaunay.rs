//! Incremental Bowyer-Watson Delaunay triangulation with exact predicates.

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    /// `nb[k]` shares the edge opposite `v[k]`.
    nb: [usize; 3],
    alive: bool,
}

fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Triangulates the convex hull of `points` (which must be distinct).
/// Returns counter-clockwise vertex triples.
pub fn delaunay(points: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    if points.len() < 3 {
        return Err(Error::InvalidMesh("need at least three points".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let big = 1e5 * span;

    let n = points.len();
    let mut pts = points.to_vec();
    pts.push([center[0] - big, center[1] - big]);
    pts.push([center[0] + big, center[1] - big]);
    pts.push([center[0], center[1] + big]);

    let mut tris = vec![Tri {
        v: [n, n + 1, n + 2],
        nb: [NONE; 3],
        alive: true,
    }];
    let mut last = 0usize;
    let mut bad: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut boundary: Vec<(usize, usize, usize)> = Vec::new();
    let mut created: Vec<usize> = Vec::new();
    let mut in_cavity: Vec<bool> = vec![false; 1];

    for (ip, &p) in points.iter().enumerate() {
        let start = locate(&tris, &pts, last, p)?;

        bad.clear();
        stack.clear();
        stack.push(start);
        in_cavity[start] = true;
        while let Some(t) = stack.pop() {
            bad.push(t);
            for k in 0..3 {
                let u = tris[t].nb[k];
                if u == NONE || in_cavity[u] {
                    continue;
                }
                let [a, b, c] = tris[u].v;
                if incircle(coord(pts[a]), coord(pts[b]), coord(pts[c]), coord(p)) > 0.0 {
                    in_cavity[u] = true;
                    stack.push(u);
                }
            }
        }

        boundary.clear();
        for &t in &bad {
            for k in 0..3 {
                let u = tris[t].nb[k];
                if u != NONE && in_cavity[u] {
                    continue;
                }
                let a = tris[t].v[(k + 1) % 3];
                let b = tris[t].v[(k + 2) % 3];
                boundary.push((a, b, u));
            }
        }

        created.clear();
        for &(a, b, outside) in &boundary {
            if orient2d(coord(pts[a]), coord(pts[b]), coord(p)) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "degenerate cavity while inserting point {ip}"
                )));
            }
            let id = tris.len();
            tris.push(Tri {
                v: [a, b, ip],
                nb: [NONE, NONE, outside],
                alive: true,
            });
            in_cavity.push(false);
            if outside != NONE {
                let o = &mut tris[outside];
                for k in 0..3 {
                    let oa = o.v[(k + 1) % 3];
                    let ob = o.v[(k + 2) % 3];
                    if oa == b && ob == a {
                        o.nb[k] = id;
                    }
                }
            }
            created.push(id);
        }
        // Link the fan: tri (a, b, p) meets (b, c, p) across (b, p) and (z, a, p) across (p, a).
        for i in 0..created.len() {
            let t = created[i];
            let (a, b) = (tris[t].v[0], tris[t].v[1]);
            for &u in &created {
                if tris[u].v[0] == b {
                    tris[t].nb[0] = u;
                }
                if tris[u].v[1] == a {
                    tris[t].nb[1] = u;
                }
            }
        }
        for &t in &bad {
            tris[t].alive = false;
            in_cavity[t] = false;
        }
        last = *created.last().unwrap();
    }

    Ok(tris
        .iter()
        .filter(|t| t.alive && t.v.iter().all(|&v| v < n))
        .map(|t| t.v)
        .collect())
}

fn locate(tris: &[Tri], pts: &[[f64; 2]], from: usize, p: [f64; 2]) -> Result<usize> {
    let mut t = from;
    for rotate in 0..(4 * tris.len() + 16) {
        let tri = &tris[t];
        let mut moved = false;
        for j in 0..3 {
            let k = (j + rotate) % 3;
            let a = tri.v[(k + 1) % 3];
            let b = tri.v[(k + 2) % 3];
            if orient2d(coord(pts[a]), coord(pts[b]), coord(p)) < 0.0 {
                if tri.nb[k] == NONE {
                    return Err(Error::InvalidMesh("point outside bounding triangle".into()));
                }
                t = tri.nb[k];
                moved = true;
                break;
            }
        }
        if !moved {
            return Ok(t);
        }
    }
    Err(Error::InvalidMesh("point location did not terminate".into()))
}
