use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// How the cells of a mesh are described.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    /// Implicit `n x n` lattice of interior points with spacing `1/(n+1)`.
    StructuredGrid { n: usize },
    /// Explicit triangles.
    Triangulation,
}

/// Nodes, cells and boundary flags of a 2D mesh in the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub kind: MeshKind,
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples; empty for structured grids.
    pub triangles: Vec<[usize; 3]>,
    /// `true` for nodes on the geometric boundary.
    pub boundary: Vec<bool>,
    /// Non-fatal fixes applied while building or importing.
    pub warnings: Vec<String>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Lattice spacing of a structured grid.
    pub fn spacing(&self) -> Option<f64> {
        match self.kind {
            MeshKind::StructuredGrid { n } => Some(1.0 / (n as f64 + 1.0)),
            MeshKind::Triangulation => None,
        }
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn triangle_area(&self, t: [usize; 3]) -> f64 {
        signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]])
    }

    /// Checks the triangulation invariants: indices in range, positive areas, and
    /// boundary flags equal to the nodes on edges owned by a single triangle.
    pub fn validate(&self) -> Result<()> {
        if self.boundary.len() != self.nodes.len() {
            return Err(Error::InvalidMesh("boundary flag count differs from node count".into()));
        }
        if let MeshKind::StructuredGrid { n } = self.kind {
            if self.nodes.len() != n * n {
                return Err(Error::InvalidMesh(format!("structured grid expects {} nodes", n * n)));
            }
            return Ok(());
        }
        for (k, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= self.nodes.len()) {
                return Err(Error::InvalidMesh(format!("triangle {k} references a missing node")));
            }
            if self.triangle_area(*t) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {k} has non-positive signed area"
                )));
            }
        }
        let on_boundary = topological_boundary(self.nodes.len(), &self.triangles);
        for i in 0..self.nodes.len() {
            if on_boundary[i] != self.boundary[i] {
                return Err(Error::InvalidMesh(format!(
                    "node {i} boundary flag is {} but the node {} on the mesh boundary",
                    self.boundary[i] as u8,
                    if on_boundary[i] { "lies" } else { "does not lie" }
                )));
            }
        }
        let mut used = vec![false; self.nodes.len()];
        self.triangles.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("node {i} belongs to no triangle")));
        }
        Ok(())
    }

    /// Serializes a triangulation in the plain-text mesh format.
    pub fn to_text(&self) -> Result<String> {
        if self.kind != MeshKind::Triangulation {
            return Err(Error::InvalidMesh(
                "structured grids are implicit and have no text form".into(),
            ));
        }
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (p, &b) in self.nodes.iter().zip(&self.boundary) {
            let _ = writeln!(out, "{} {} {}", p[0], p[1], b as u8);
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        Ok(out)
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Nodes touched by an edge that belongs to exactly one triangle.
pub(crate) fn topological_boundary(n: usize, triangles: &[[usize; 3]]) -> Vec<bool> {
    let mut edges: HashMap<(usize, usize), u32> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut flags = vec![false; n];
    for ((a, b), count) in edges {
        if count == 1 {
            flags[a] = true;
            flags[b] = true;
        }
    }
    flags
}

/// `n x n` interior lattice with `h = 1/(n+1)`; node `i + j n` sits at `((i+1)h, (j+1)h)`.
pub fn make_structured_grid(n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::InvalidMesh(format!("structured grid needs N >= 2, got {n}")));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let mut nodes = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            nodes.push([(i + 1) as f64 * h, (j + 1) as f64 * h]);
        }
    }
    Ok(Mesh {
        kind: MeshKind::StructuredGrid { n },
        nodes,
        triangles: Vec::new(),
        boundary: vec![false; n * n],
        warnings: Vec::new(),
    })
}

/// Parses the plain-text mesh format. Clockwise triangles are flipped with a warning.
pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (lineno, line) = lines
        .next()
        .ok_or_else(|| err(1, "missing 'nodes' header".into()))?;
    let mut f = line.split_whitespace();
    if f.next() != Some("nodes") {
        return Err(err(lineno, "expected 'nodes <count>'".into()));
    }
    let n_nodes: usize = f
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| err(lineno, "bad nodes count".into()))?;

    let mut nodes = Vec::with_capacity(n_nodes);
    let mut boundary = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| err(text.lines().count(), "fewer node lines than declared".into()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(lineno, "node line needs 'x y boundary_flag'".into()));
        }
        let x: f64 = f[0].parse().map_err(|_| err(lineno, "bad x coordinate".into()))?;
        let y: f64 = f[1].parse().map_err(|_| err(lineno, "bad y coordinate".into()))?;
        let b = match f[2] {
            "0" => false,
            "1" => true,
            _ => return Err(err(lineno, "boundary flag must be 0 or 1".into())),
        };
        nodes.push([x, y]);
        boundary.push(b);
    }

    let (lineno, line) = lines
        .next()
        .ok_or_else(|| err(text.lines().count(), "missing 'triangles' header".into()))?;
    let mut f = line.split_whitespace();
    if f.next() != Some("triangles") {
        return Err(err(lineno, "expected 'triangles <count>'".into()));
    }
    let n_tris: usize = f
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| err(lineno, "bad triangles count".into()))?;

    let mut triangles = Vec::with_capacity(n_tris);
    let mut warnings = Vec::new();
    for k in 0..n_tris {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| err(text.lines().count(), "fewer triangle lines than declared".into()))?;
        let f: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| err(lineno, "bad vertex index".into())))
            .collect::<Result<_>>()?;
        if f.len() != 3 {
            return Err(err(lineno, "triangle line needs three indices".into()));
        }
        if f.iter().any(|&v| v >= n_nodes) {
            return Err(err(lineno, "vertex index out of range".into()));
        }
        let mut t = [f[0], f[1], f[2]];
        let area = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        if area == 0.0 {
            return Err(err(lineno, format!("triangle {k} is degenerate")));
        }
        if area < 0.0 {
            t.swap(1, 2);
            warnings.push(format!("triangle {k} was clockwise; orientation flipped"));
        }
        triangles.push(t);
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(err(lineno, "unexpected trailing content".into()));
    }

    let mesh = Mesh {
        kind: MeshKind::Triangulation,
        nodes,
        triangles,
        boundary,
        warnings,
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn import_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, path)
}
